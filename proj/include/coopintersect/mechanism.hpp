#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopintersect/geometry.hpp"

namespace coopintersect::mechanism {

/// An abstract sponsored-search auction among intersection agents.
struct AuctionInstance {
  std::vector<double> valuations;  // true priority values zeta_i
  std::vector<double> alphas;      // slot values, strictly decreasing, > 0
  std::vector<int> lanes;          // optional; empty means no lane information
  std::vector<LaneGroup> groups;   // optional; empty means a single conflicting group

  [[nodiscard]] std::size_t agents() const noexcept { return valuations.size(); }
  [[nodiscard]] std::size_t slots() const noexcept { return alphas.size(); }
  void validate() const;
};

enum class PaymentRule {
  sponsored_search,  // u = v*alpha_i - sum_{j>=i} b_{j+1}(alpha_j - alpha_{j+1})
  first_price,       // u = (v - b) * alpha_i; not incentive compatible, used as a negative control
};

/// Slot each agent receives when bids are sorted descending (ties: lower index first).
/// Agents past the last slot get -1.
[[nodiscard]] std::vector<int> allocate(std::span<const double> bids, std::size_t slots);

/// Utility of an agent with true value `valuation` placed in `slot` (0-based),
/// given the bids occupying slots below it, in slot order.
[[nodiscard]] double utility_in_slot(double valuation, std::size_t slot,
                                     std::span<const double> bids_below,
                                     std::span<const double> alphas,
                                     PaymentRule rule = PaymentRule::sponsored_search,
                                     double own_bid = 0.0);

/// Utility of `agent` under bid profile `bids`. Zero for agents that win no slot.
[[nodiscard]] double utility(const AuctionInstance& instance, std::span<const double> bids,
                             std::size_t agent, PaymentRule rule = PaymentRule::sponsored_search);

struct Deviation {
  std::size_t agent = 0;
  double bid = 0.0;
  double truthful_utility = 0.0;
  double deviating_utility = 0.0;
};

struct IcReport {
  std::vector<Deviation> violations;
  std::size_t profiles_checked = 0;
  [[nodiscard]] bool incentive_compatible() const noexcept { return violations.empty(); }
};

/// Grid search over unilateral deviations from truthful bidding, per conflicting
/// group. The grid covers [0, 2 max zeta] at `resolution` plus every opponent bid +- epsilon.
[[nodiscard]] IcReport check_incentive_compatibility(const AuctionInstance& instance, double resolution,
                                                     PaymentRule rule = PaymentRule::sponsored_search,
                                                     double tolerance = 1e-9);

struct WelfareReport {
  double ssa_welfare = 0.0;
  double brute_force_welfare = 0.0;
  std::size_t permutations_checked = 0;
  [[nodiscard]] bool maximal(double tol = 1e-9) const noexcept {
    return ssa_welfare >= brute_force_welfare - tol;
  }
};

/// Truthful SSA welfare against the best group-respecting slot assignment.
[[nodiscard]] WelfareReport check_welfare_maximization(const AuctionInstance& instance);

/// Largest transfer that keeps a blocked agent's jump from slot i by m slots
/// incentive compatible. `valuations` and `alphas` are in slot order, `slot` is 1-based.
[[nodiscard]] double overflow_bound(std::span<const double> valuations, std::span<const double> alphas,
                                    std::size_t slot, std::size_t jump);
[[nodiscard]] double overflow_bound(const AuctionInstance& instance, std::size_t slot, std::size_t jump);

/// Utility change for the agent in `slot` (1-based) when it transfers `amount` of
/// its value and keeps its slot, versus being pushed `jump` slots down by its
/// blocker. Computed from the allocation and payment rule, not the closed form.
[[nodiscard]] double transfer_gain(const AuctionInstance& instance, std::size_t slot, std::size_t jump,
                                   double amount);

struct TransferReport {
  double bound = 0.0;
  double amount = 0.0;
  double gain = 0.0;          // accepting the transfer vs. declining it
  bool profitable_deviation = false;
};

/// Applies a transfer of `fraction * bound` and checks whether declining it
/// (or re-bidding on the grid after accepting) beats accepting.
[[nodiscard]] TransferReport check_transfer(const AuctionInstance& instance, std::size_t slot,
                                            std::size_t jump, double fraction, double resolution);

/// Utility difference from over-bidding into the previous slot of an economic auction.
/// Throws std::domain_error for non-positive times or t_prev >= t_k.
[[nodiscard]] double overbid_delta(double value, double bid, double t_prev, double t_k);

/// Random instance with n agents, valuations in (0, 10], alphas 1/t with
/// increasing crossing times, and random groups.
[[nodiscard]] AuctionInstance random_instance(std::size_t n, std::uint64_t seed, bool with_groups);

/// Plain-text fixture: `key = values` lines for valuations, alphas, lanes, groups.
[[nodiscard]] AuctionInstance parse_instance(const std::string& text);
[[nodiscard]] std::string format_instance(const AuctionInstance& instance);

}  // namespace coopintersect::mechanism
