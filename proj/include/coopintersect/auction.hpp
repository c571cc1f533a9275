#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "coopintersect/vehicle.hpp"

namespace coopintersect {

/// Coefficients over the four bidding features [time, distance, waiting, assertiveness].
using Omega = std::array<double, 4>;

[[nodiscard]] std::vector<Omega> default_omega_set();

struct AuctionParams {
  double c1 = 60.0;     // cap on time to intersection, seconds
  double c2 = 150.0;    // distance bound, meters (the control zone length)
  double w_cap = 120.0;  // waiting-time normalizer, seconds
  double a_cap = 10.0;   // assertiveness scale
  double tau_speed_floor = 0.1;
  double overflow_fraction = 0.5;
  double slot_headway = 1.5;  // seconds between consecutive crossing slots
  std::vector<Omega> omega_set = default_omega_set();

  void validate() const;
};

struct FeatureVector {
  double time_headroom = 0.0;      // T_I = c1 - tau
  double distance_headroom = 0.0;  // D_I = c2 - s
  double waiting = 0.0;            // W_I = w
  double assertiveness = 0.0;      // A_I

  [[nodiscard]] std::array<double, 4> values() const noexcept {
    return {time_headroom, distance_headroom, waiting, assertiveness};
  }
};

struct MasterBid {
  int vehicle_id = 0;
  FeatureVector features;  // normalized by the feature bounds
  Omega omega{};
  double value = 0.0;      // omega . features
};

struct PrioritySequence {
  std::vector<int> order;  // highest priority first
  std::vector<double> slot_alphas;
  Omega omega_used{};

  [[nodiscard]] std::size_t position_of(int id) const;
};

[[nodiscard]] FeatureVector compute_features(const VehicleState& state, const VehicleClass& cls, double c1,
                                             double c2, double tau_speed_floor = 0.1);

/// Scales raw features by their bounds and forms the master bid.
[[nodiscard]] MasterBid make_master_bid(int vehicle_id, const FeatureVector& raw, const Omega& omega,
                                        const AuctionParams& params);

/// Slot values alpha_k = 1 / t_k, with t_k = k * headway the projected crossing time of slot k.
[[nodiscard]] std::vector<double> slot_alphas(std::size_t count, double headway);

/// Sorts bids descending; exact ties are broken by a draw seeded with `seed`.
[[nodiscard]] PrioritySequence run_ssa(std::span<const MasterBid> bids, std::uint64_t seed,
                                       double slot_headway = 1.5);

struct BidTransfer {
  int from_id = 0;
  int to_id = 0;
  double amount = 0.0;
  double bound = 0.0;
};

struct OverflowResult {
  PrioritySequence sequence;
  std::vector<BidTransfer> transfers;
  int demotions = 0;
};

/// Resolves same-lane blocking: a higher-valued vehicle stuck behind a lower-valued
/// one transfers part of its value (a fixed fraction of the admissible bound), the
/// sequence is re-sorted, and any remaining blocked vehicle is demoted to just
/// behind its blocker. `valuations` is aligned with `states`.
[[nodiscard]] OverflowResult apply_overflow(const PrioritySequence& seq, std::span<const VehicleState> states,
                                            std::span<const double> valuations, double transfer_fraction = 0.5);

/// True when every same-lane pair appears in physical order (front vehicle first).
[[nodiscard]] bool respects_lane_order(const PrioritySequence& seq, std::span<const VehicleState> states);

enum class BidRule {
  master,         // omega-weighted feature bids
  arrival_order,  // first-come first-served: longest time in the control zone bids highest
};

/// One candidate per omega vector after overflow handling, deduplicated by order.
[[nodiscard]] std::vector<PrioritySequence> generate_candidates(std::span<const VehicleState> states,
                                                                const ClassTable& classes,
                                                                const AuctionParams& params, std::uint64_t seed,
                                                                BidRule rule = BidRule::master);

}  // namespace coopintersect
