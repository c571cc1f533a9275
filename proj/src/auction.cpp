#include "coopintersect/auction.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "coopintersect/mechanism.hpp"

namespace coopintersect {

std::vector<Omega> default_omega_set() {
  return {{0.25, 0.25, 0.25, 0.25},
          {0.5, 0.2, 0.1, 0.2},
          {0.1, 0.5, 0.2, 0.2},
          {0.2, 0.1, 0.5, 0.2},
          {0.1, 0.2, 0.2, 0.5}};
}

void AuctionParams::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(w_cap > 0.0) || !(a_cap > 0.0))
    throw std::invalid_argument("auction bounds must be > 0");
  if (!(tau_speed_floor > 0.0)) throw std::invalid_argument("tau_speed_floor must be > 0");
  if (!(overflow_fraction > 0.0 && overflow_fraction < 1.0))
    throw std::invalid_argument("overflow_fraction must lie in (0, 1)");
  if (!(slot_headway > 0.0)) throw std::invalid_argument("slot_headway must be > 0");
  if (omega_set.empty()) throw std::invalid_argument("omega_set must not be empty");
  for (const Omega& w : omega_set) {
    for (double c : w) {
      if (c < 0.0) throw std::invalid_argument("omega coefficients must be non-negative");
    }
  }
}

std::size_t PrioritySequence::position_of(int id) const {
  const auto it = std::find(order.begin(), order.end(), id);
  if (it == order.end()) throw std::out_of_range("vehicle not in sequence");
  return static_cast<std::size_t>(it - order.begin());
}

FeatureVector compute_features(const VehicleState& state, const VehicleClass& cls, double c1, double c2,
                               double tau_speed_floor) {
  const double tau = std::min(state.s / std::max(state.v, tau_speed_floor), c1);
  FeatureVector f;
  f.time_headroom = c1 - tau;
  f.distance_headroom = c2 - state.s;
  f.waiting = state.wait_time;
  f.assertiveness = cls.assertiveness.lerp(state.preference);
  return f;
}

MasterBid make_master_bid(int vehicle_id, const FeatureVector& raw, const Omega& omega,
                          const AuctionParams& params) {
  MasterBid bid;
  bid.vehicle_id = vehicle_id;
  bid.omega = omega;
  bid.features = FeatureVector{raw.time_headroom / params.c1, raw.distance_headroom / params.c2,
                               raw.waiting / params.w_cap, raw.assertiveness / params.a_cap};
  const auto f = bid.features.values();
  bid.value = std::inner_product(omega.begin(), omega.end(), f.begin(), 0.0);
  return bid;
}

std::vector<double> slot_alphas(std::size_t count, double headway) {
  std::vector<double> alphas(count);
  for (std::size_t k = 0; k < count; ++k) alphas[k] = 1.0 / (static_cast<double>(k + 1) * headway);
  return alphas;
}

PrioritySequence run_ssa(std::span<const MasterBid> bids, std::uint64_t seed, double slot_headway) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> tie_key(bids.size());
  for (auto& k : tie_key) k = rng();
  std::vector<std::size_t> idx(bids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (bids[a].value != bids[b].value) return bids[a].value > bids[b].value;
    return tie_key[a] < tie_key[b];
  });
  PrioritySequence seq;
  seq.order.reserve(bids.size());
  for (std::size_t i : idx) seq.order.push_back(bids[i].vehicle_id);
  seq.slot_alphas = slot_alphas(bids.size(), slot_headway);
  if (!bids.empty()) seq.omega_used = bids.front().omega;
  return seq;
}

namespace {

using StateIndex = std::unordered_map<int, std::size_t>;

StateIndex index_states(std::span<const VehicleState> states) {
  StateIndex index;
  for (std::size_t i = 0; i < states.size(); ++i) index.emplace(states[i].id, i);
  return index;
}

// Latest-scheduled same-lane vehicle physically ahead of order[p] but scheduled after it.
std::optional<std::size_t> latest_blocker(const std::vector<int>& order, std::size_t p,
                                          std::span<const VehicleState> states, const StateIndex& index) {
  const VehicleState& rear = states[index.at(order[p])];
  std::optional<std::size_t> found;
  for (std::size_t q = p + 1; q < order.size(); ++q) {
    const VehicleState& other = states[index.at(order[q])];
    if (other.same_lane(rear) && other.s < rear.s) found = q;
  }
  return found;
}

}  // namespace

bool respects_lane_order(const PrioritySequence& seq, std::span<const VehicleState> states) {
  const StateIndex index = index_states(states);
  for (std::size_t p = 0; p < seq.order.size(); ++p) {
    if (latest_blocker(seq.order, p, states, index)) return false;
  }
  return true;
}

OverflowResult apply_overflow(const PrioritySequence& seq, std::span<const VehicleState> states,
                              std::span<const double> valuations, double transfer_fraction) {
  if (valuations.size() != states.size()) throw std::invalid_argument("apply_overflow: valuation per state required");
  const StateIndex index = index_states(states);
  if (seq.order.size() != states.size()) throw std::invalid_argument("apply_overflow: sequence must cover the snapshot");

  OverflowResult result;
  result.sequence = seq;
  std::vector<int>& order = result.sequence.order;
  const std::size_t n = order.size();
  std::vector<double> alphas = seq.slot_alphas;
  if (alphas.size() < n) alphas = slot_alphas(n, 1.0);

  std::unordered_map<int, double> zeta;
  for (std::size_t i = 0; i < states.size(); ++i) zeta[states[i].id] = valuations[i];

  std::vector<double> by_slot(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto blocker = latest_blocker(order, p, states, index);
    if (!blocker) continue;
    for (std::size_t k = 0; k < n; ++k) by_slot[k] = zeta[order[k]];
    const std::size_t jump = *blocker - p;
    const double bound = mechanism::overflow_bound(by_slot, alphas, p + 1, jump);
    if (bound <= 0.0) continue;
    const double amount = transfer_fraction * bound;
    zeta[order[p]] -= amount;
    zeta[order[*blocker]] += amount;
    result.transfers.push_back({order[p], order[*blocker], amount, bound});
  }

  if (!result.transfers.empty()) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return zeta[a] > zeta[b]; });
  }

  const std::size_t cap = n * n + 1;
  for (std::size_t iter = 0; iter < cap; ++iter) {
    bool moved = false;
    for (std::size_t p = 0; p < n; ++p) {
      const auto blocker = latest_blocker(order, p, states, index);
      if (!blocker) continue;
      const int id = order[p];
      order.erase(order.begin() + static_cast<std::ptrdiff_t>(p));
      order.insert(order.begin() + static_cast<std::ptrdiff_t>(*blocker), id);
      ++result.demotions;
      moved = true;
      break;
    }
    if (!moved) break;
  }
  return result;
}

std::vector<PrioritySequence> generate_candidates(std::span<const VehicleState> states, const ClassTable& classes,
                                                  const AuctionParams& params, std::uint64_t seed, BidRule rule) {
  if (params.omega_set.empty()) throw std::invalid_argument("generate_candidates: empty omega set");
  std::vector<PrioritySequence> out;
  std::set<std::vector<int>> seen;
  std::vector<MasterBid> bids(states.size());
  std::vector<double> values(states.size());

  const std::size_t rounds = rule == BidRule::arrival_order ? 1 : params.omega_set.size();
  for (std::size_t k = 0; k < rounds; ++k) {
    const Omega& omega = params.omega_set[k];
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (rule == BidRule::arrival_order) {
        bids[i] = MasterBid{states[i].id, {}, {}, states[i].wait_time};
      } else {
        const FeatureVector raw = compute_features(states[i], classes[states[i].cls], params.c1, params.c2,
                                                   params.tau_speed_floor);
        bids[i] = make_master_bid(states[i].id, raw, omega, params);
      }
      values[i] = bids[i].value;
    }
    const std::uint64_t round_seed = seed ^ (0x9E3779B97F4A7C15ULL * (k + 1));
    const PrioritySequence ssa = run_ssa(bids, round_seed, params.slot_headway);
    OverflowResult resolved = apply_overflow(ssa, states, values, params.overflow_fraction);
    if (seen.insert(resolved.sequence.order).second) out.push_back(std::move(resolved.sequence));
  }
  return out;
}

}  // namespace coopintersect
