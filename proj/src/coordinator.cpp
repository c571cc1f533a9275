#include "coopintersect/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace coopintersect {

void CoordinatorConfig::validate() const {
  for (const auto& cls : classes.classes) cls.validate();
  auction.validate();
  qp.validate();
}

PrioritySequence promote_unstoppable(const PrioritySequence& seq, std::span<const VehicleState> control) {
  std::unordered_map<int, const VehicleState*> by_id;
  for (const auto& st : control) by_id[st.id] = &st;

  std::map<std::pair<int, int>, double> deepest;  // farthest unstoppable vehicle per lane
  for (const auto& st : control) {
    const double stopping = st.v * st.v / (2.0 * -st.a_min);
    if (stopping <= st.s) continue;
    auto [it, inserted] = deepest.try_emplace({st.road(), st.lane}, st.s);
    if (!inserted) it->second = std::max(it->second, st.s);
  }
  if (deepest.empty()) return seq;

  std::vector<const VehicleState*> front;
  std::vector<int> rest;
  for (int id : seq.order) {
    const VehicleState& st = *by_id.at(id);
    const auto it = deepest.find({st.road(), st.lane});
    if (it != deepest.end() && st.s <= it->second) {
      front.push_back(&st);
    } else {
      rest.push_back(id);
    }
  }
  std::stable_sort(front.begin(), front.end(), [](const VehicleState* a, const VehicleState* b) {
    return a->s != b->s ? a->s < b->s : a->id < b->id;
  });
  PrioritySequence out = seq;
  out.order.clear();
  for (const auto* st : front) out.order.push_back(st->id);
  out.order.insert(out.order.end(), rest.begin(), rest.end());
  return out;
}

CycleResult control_cycle(const Snapshot& snapshot, const CoordinatorConfig& config, std::uint64_t seed,
                          long cycle_index) {
  const auto start = std::chrono::steady_clock::now();
  CycleResult result;
  result.record.cycle = cycle_index;
  result.record.snapshot_size = static_cast<int>(snapshot.control.size());
  result.record.committed = static_cast<int>(snapshot.committed.size());
  if (snapshot.control.empty()) {
    result.record.plan_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  const std::uint64_t cycle_seed = seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(cycle_index + 1));
  std::vector<PrioritySequence> raw =
      generate_candidates(snapshot.control, config.classes, config.auction, cycle_seed, config.bid_rule);
  std::vector<PrioritySequence> candidates;
  std::set<std::vector<int>> seen;
  for (const auto& seq : raw) {
    PrioritySequence promoted = promote_unstoppable(seq, snapshot.control);
    if (seen.insert(promoted.order).second) candidates.push_back(std::move(promoted));
  }

  Selection sel = config.parallel ? select_optimal(snapshot, candidates, config.classes, config.qp)
                                  : select_optimal_serial(snapshot, candidates, config.classes, config.qp);
  result.record.candidates = static_cast<int>(candidates.size());
  result.record.objective = sel.program.objective_value;
  result.record.fallback = sel.fallback();
  for (std::size_t k = 0; k < sel.program.ids.size(); ++k) {
    result.commands.push_back({sel.program.ids[k], sel.program.commands[k]});
  }
  result.sequence = std::move(sel.program.sequence);
  result.record.plan_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace coopintersect
