#include "coopintersect/mechanism.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace coopintersect::mechanism {

namespace {

double alpha_at(std::span<const double> alphas, std::size_t k) {
  return k < alphas.size() ? alphas[k] : 0.0;
}

std::vector<std::size_t> rank_order(std::span<const double> bids) {
  std::vector<std::size_t> idx(bids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return bids[a] > bids[b]; });
  return idx;
}

// Agents that take part in the same auction: connected through a conflict or a shared group.
std::vector<std::vector<std::size_t>> auction_components(const AuctionInstance& inst) {
  const std::size_t n = inst.agents();
  if (inst.groups.empty()) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {all};
  }
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (comp[root] >= 0) continue;
    std::vector<std::size_t> stack{root};
    comp[root] = next;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (comp[b] >= 0) continue;
        if (inst.groups[a] == inst.groups[b] || conflicts(inst.groups[a], inst.groups[b])) {
          comp[b] = next;
          stack.push_back(b);
        }
      }
    }
    ++next;
  }
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<std::size_t>(comp[i])].push_back(i);
  return out;
}

AuctionInstance restrict_to(const AuctionInstance& inst, const std::vector<std::size_t>& members) {
  AuctionInstance sub;
  sub.alphas = inst.alphas;
  for (std::size_t m : members) sub.valuations.push_back(inst.valuations[m]);
  return sub;
}

}  // namespace

void AuctionInstance::validate() const {
  for (double z : valuations) {
    if (!(z > 0.0)) throw std::invalid_argument("valuations must be > 0");
  }
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0.0)) throw std::invalid_argument("alphas must be > 0");
    if (k > 0 && !(alphas[k] < alphas[k - 1])) throw std::invalid_argument("alphas must be strictly decreasing");
  }
  if (!lanes.empty() && lanes.size() != valuations.size()) throw std::invalid_argument("lanes size mismatch");
  if (!groups.empty() && groups.size() != valuations.size()) throw std::invalid_argument("groups size mismatch");
}

std::vector<int> allocate(std::span<const double> bids, std::size_t slots) {
  std::vector<int> slot_of(bids.size(), -1);
  const auto order = rank_order(bids);
  for (std::size_t r = 0; r < order.size() && r < slots; ++r) slot_of[order[r]] = static_cast<int>(r);
  return slot_of;
}

double utility_in_slot(double valuation, std::size_t slot, std::span<const double> bids_below,
                       std::span<const double> alphas, PaymentRule rule, double own_bid) {
  const std::size_t k_slots = alphas.size();
  if (slot >= k_slots) return 0.0;
  if (rule == PaymentRule::first_price) return (valuation - own_bid) * alphas[slot];
  double payment = 0.0;
  for (std::size_t j = slot; j < k_slots; ++j) {
    const std::size_t below = j - slot;
    const double next_bid = below < bids_below.size() ? bids_below[below] : 0.0;
    payment += next_bid * (alpha_at(alphas, j) - alpha_at(alphas, j + 1));
  }
  return valuation * alphas[slot] - payment;
}

double utility(const AuctionInstance& instance, std::span<const double> bids, std::size_t agent,
               PaymentRule rule) {
  if (bids.size() != instance.agents()) throw std::invalid_argument("utility: one bid per agent required");
  const auto order = rank_order(bids);
  const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), agent) - order.begin());
  if (pos >= instance.slots()) return 0.0;
  std::vector<double> below;
  for (std::size_t r = pos + 1; r < order.size(); ++r) below.push_back(bids[order[r]]);
  return utility_in_slot(instance.valuations[agent], pos, below, instance.alphas, rule, bids[agent]);
}

IcReport check_incentive_compatibility(const AuctionInstance& instance, double resolution,
                                       PaymentRule rule, double tolerance) {
  instance.validate();
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be > 0");
  IcReport report;
  for (const auto& members : auction_components(instance)) {
    const AuctionInstance sub = restrict_to(instance, members);
    const std::vector<double>& truthful = sub.valuations;
    const double top = *std::max_element(truthful.begin(), truthful.end());
    std::vector<double> grid;
    for (double b = 0.0; b <= 2.0 * top + 1e-12; b += resolution) grid.push_back(b);
    constexpr double kEps = 1e-7;
    for (double z : truthful) {
      grid.push_back(z);
      grid.push_back(z + kEps);
      grid.push_back(std::max(0.0, z - kEps));
    }
    for (std::size_t a = 0; a < sub.agents(); ++a) {
      const double u_true = utility(sub, truthful, a, rule);
      std::vector<double> bids = truthful;
      for (double b : grid) {
        bids[a] = b;
        const double u_dev = utility(sub, bids, a, rule);
        ++report.profiles_checked;
        if (u_dev > u_true + tolerance) report.violations.push_back({members[a], b, u_true, u_dev});
      }
    }
  }
  return report;
}

WelfareReport check_welfare_maximization(const AuctionInstance& instance) {
  instance.validate();
  WelfareReport report;
  for (const auto& members : auction_components(instance)) {
    std::vector<double> vals;
    for (std::size_t m : members) vals.push_back(instance.valuations[m]);
    if (vals.size() > 9) throw std::invalid_argument("welfare brute force limited to 9 agents per group");

    const auto slot_of = allocate(vals, instance.slots());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (slot_of[i] >= 0) report.ssa_welfare += vals[i] * instance.alphas[static_cast<std::size_t>(slot_of[i])];
    }

    std::vector<std::size_t> perm(vals.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = -std::numeric_limits<double>::infinity();
    do {
      double w = 0.0;
      for (std::size_t pos = 0; pos < perm.size(); ++pos) w += vals[perm[pos]] * alpha_at(instance.alphas, pos);
      best = std::max(best, w);
      ++report.permutations_checked;
    } while (std::next_permutation(perm.begin(), perm.end()));
    report.brute_force_welfare += best;
  }
  return report;
}

double overflow_bound(std::span<const double> valuations, std::span<const double> alphas, std::size_t slot,
                      std::size_t jump) {
  if (slot < 1 || jump < 1) throw std::invalid_argument("overflow_bound: slot and jump are 1-based and >= 1");
  if (slot + jump > alphas.size() || slot + jump > valuations.size()) {
    throw std::out_of_range("overflow_bound: slot i+m beyond the last slot");
  }
  const auto a = [&](std::size_t k) { return alphas[k - 1]; };
  const auto z = [&](std::size_t k) { return valuations[k - 1]; };
  double sum = 0.0;
  for (std::size_t s = slot; s <= slot + jump - 1; ++s) sum += z(s + 1) * (a(s) - a(s + 1)) / a(slot);
  return z(slot) * (1.0 - a(slot + jump) / a(slot)) - sum;
}

double overflow_bound(const AuctionInstance& instance, std::size_t slot, std::size_t jump) {
  return overflow_bound(instance.valuations, instance.alphas, slot, jump);
}

double transfer_gain(const AuctionInstance& instance, std::size_t slot, std::size_t jump, double amount) {
  if (slot < 1 || slot + jump > instance.slots() || slot + jump > instance.agents()) {
    throw std::out_of_range("transfer_gain: slot i+m beyond the last slot");
  }
  const std::span<const double> vals(instance.valuations);
  const double own = vals[slot - 1];
  const double accept = utility_in_slot(own - amount, slot - 1, vals.subspan(slot), instance.alphas);
  const double decline = utility_in_slot(own, slot + jump - 1, vals.subspan(slot + jump), instance.alphas);
  return accept - decline;
}

TransferReport check_transfer(const AuctionInstance& instance, std::size_t slot, std::size_t jump,
                              double fraction, double resolution) {
  TransferReport r;
  r.bound = overflow_bound(instance, slot, jump);
  r.amount = fraction * r.bound;
  r.gain = transfer_gain(instance, slot, jump, r.amount);

  AuctionInstance after = instance;
  after.groups.clear();
  after.lanes.clear();
  after.valuations[slot - 1] -= r.amount;
  after.valuations[slot + jump - 1] += r.amount;
  bool rebid_profitable = false;
  if (std::all_of(after.valuations.begin(), after.valuations.end(), [](double v) { return v > 0.0; })) {
    rebid_profitable = !check_incentive_compatibility(after, resolution).incentive_compatible();
  }
  r.profitable_deviation = r.gain < -1e-9 || rebid_profitable;
  return r;
}

double overbid_delta(double value, double bid, double t_prev, double t_k) {
  if (!(t_prev > 0.0) || !(t_k > 0.0)) throw std::domain_error("overbid_delta: times must be > 0");
  if (!(t_prev < t_k)) throw std::domain_error("overbid_delta: need t_prev < t_k");
  return (value - bid) * (1.0 / t_prev - 1.0 / t_k);
}

AuctionInstance random_instance(std::size_t n, std::uint64_t seed, bool with_groups) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(0.5, 10.0);
  std::uniform_real_distribution<double> gap(0.5, 2.0);
  std::uniform_int_distribution<int> group(0, kGroupCount - 1);
  AuctionInstance inst;
  for (std::size_t i = 0; i < n; ++i) inst.valuations.push_back(val(rng));
  std::sort(inst.valuations.begin(), inst.valuations.end(), std::greater<>());
  double t = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    t += gap(rng);
    inst.alphas.push_back(1.0 / t);
  }
  if (with_groups) {
    for (std::size_t i = 0; i < n; ++i) {
      const LaneGroup g = LaneGroup::from_index(group(rng));
      inst.groups.push_back(g);
      inst.lanes.push_back(static_cast<int>(g.intention));
    }
  }
  return inst;
}

AuctionInstance parse_instance(const std::string& text) {
  AuctionInstance inst;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::invalid_argument("instance line " + std::to_string(lineno) + ": expected key = values");
      continue;
    }
    std::string key = line.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char c) { return std::isspace(c); }), key.end());
    std::istringstream values(line.substr(eq + 1));
    std::string tok;
    while (values >> tok) {
      if (key == "valuations") inst.valuations.push_back(std::stod(tok));
      else if (key == "alphas") inst.alphas.push_back(std::stod(tok));
      else if (key == "lanes") inst.lanes.push_back(std::stoi(tok));
      else if (key == "groups") inst.groups.push_back(LaneGroup::parse(tok));
      else throw std::invalid_argument("instance line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  inst.validate();
  return inst;
}

std::string format_instance(const AuctionInstance& instance) {
  std::ostringstream out;
  out.precision(17);
  const auto row = [&](const char* key, const auto& values, auto fmt) {
    if (values.empty()) return;
    out << key << " =";
    for (const auto& v : values) out << ' ' << fmt(v);
    out << '\n';
  };
  const auto id = [](const auto& v) { return v; };
  row("valuations", instance.valuations, id);
  row("alphas", instance.alphas, id);
  row("lanes", instance.lanes, id);
  row("groups", instance.groups, [](const LaneGroup& g) { return g.label(); });
  return out.str();
}

}  // namespace coopintersect::mechanism
