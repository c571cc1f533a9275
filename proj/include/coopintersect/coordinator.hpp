#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coopintersect/auction.hpp"
#include "coopintersect/qp.hpp"

namespace coopintersect {

struct CoordinatorConfig {
  ClassTable classes = ClassTable::defaults();
  AuctionParams auction;
  QpParams qp;
  BidRule bid_rule = BidRule::master;
  bool parallel = true;  // solve candidate QPs concurrently

  void validate() const;
};

struct ControlCycleRecord {
  long cycle = 0;
  int snapshot_size = 0;
  int committed = 0;
  int candidates = 0;
  double objective = 0.0;
  double plan_ms = 0.0;  // wall time spent in auction and QP selection
  bool fallback = false;
};

struct Command {
  int vehicle_id = 0;
  double speed = 0.0;
};

struct CycleResult {
  std::vector<Command> commands;
  ControlCycleRecord record;
  PrioritySequence sequence;
};

/// Vehicles that can no longer stop before the entry line are moved to the front
/// of the sequence (nearest first), together with everyone ahead of them in their
/// lane; the remaining vehicles keep their relative order.
[[nodiscard]] PrioritySequence promote_unstoppable(const PrioritySequence& seq, std::span<const VehicleState> control);

/// One planning cycle: auction candidates, commitment ordering, QP selection.
/// Commands are issued for control-zone vehicles only.
[[nodiscard]] CycleResult control_cycle(const Snapshot& snapshot, const CoordinatorConfig& config, std::uint64_t seed,
                                        long cycle_index);

}  // namespace coopintersect
