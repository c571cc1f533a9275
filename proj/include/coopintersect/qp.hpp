#pragma once

#include <span>
#include <string>
#include <vector>

#include "coopintersect/auction.hpp"
#include "coopintersect/qp_solver.hpp"
#include "coopintersect/vehicle.hpp"

namespace coopintersect {

struct PriorityWeights {
  double speed_priority = 1.0;      // P^s
  double variation_priority = 1.0;  // P^v
};

/// P^s rises and P^v falls with the driver preference d.
[[nodiscard]] PriorityWeights assign_priorities(const VehicleState& state, const ClassTable& classes);

struct QpParams {
  double lambda = 0.7;
  double plan_dt = 1.0;
  double speed_limit = 20.0;
  SafetyMargins margins;
  /// Extra separation, in seconds, between a committed occupant leaving the
  /// conflict zone and the next conflicting arrival.
  double committed_buffer = 0.5;

  void validate() const;
};

/// Vehicles seen by one planning cycle. `control` vehicles are decision variables;
/// `committed` vehicles are already inside the conflict zone and only shape constraints.
struct Snapshot {
  std::vector<VehicleState> control;
  std::vector<VehicleState> committed;
};

enum class RowFamily {
  longitudinal,            // end-of-step gap of at least l + M_sr
  braking_gap,             // follower can still stop if the leader brakes at its limit
  lateral,                 // conflict ordering along the sequence
  committed_longitudinal,  // gap rows behind a vehicle already in the conflict zone
};

/// first_coef * u[first] + second_coef * u[second] >= rhs; second < 0 for single-variable rows.
struct LinearRow {
  RowFamily family = RowFamily::longitudinal;
  int first = 0;
  double first_coef = 0.0;
  int second = -1;
  double second_coef = 0.0;
  double rhs = 0.0;
};

struct QpProblem {
  std::vector<int> ids;  // variable k commands vehicle ids[k]
  std::vector<PriorityWeights> weights;
  std::vector<double> current_speed;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LinearRow> rows;
  double lambda = 0.7;
  double speed_limit = 20.0;
  int tightened_bounds = 0;  // upper bounds pulled down by occupants, degenerate pairs or unreachable rows

  [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
  /// sum lambda P^s (u - v-bar)^2 + (1 - lambda) P^v (u - v)^2
  [[nodiscard]] double objective(std::span<const double> u) const;
  [[nodiscard]] qp::DenseQp to_dense() const;
};

/// Time for a committed vehicle to clear the conflict zone when accelerating toward v-bar.
[[nodiscard]] double clearance_time(const VehicleState& state, double speed_limit, const SafetyMargins& margins);

/// Throws std::invalid_argument when `seq` is not a permutation of the control vehicles.
[[nodiscard]] QpProblem build_qp(const Snapshot& snapshot, const PrioritySequence& seq, const ClassTable& classes,
                                 const QpParams& params);

enum class SolveStatus { optimal, infeasible };

struct VelocityProgram {
  std::vector<int> ids;
  std::vector<double> commands;
  double objective_value = 0.0;
  PrioritySequence sequence;
  SolveStatus solve_status = SolveStatus::infeasible;
  int iterations = 0;

  [[nodiscard]] double command_for(int id) const;
};

[[nodiscard]] VelocityProgram solve_qp(const QpProblem& problem, const PrioritySequence& seq);

struct ConstraintReport {
  double worst_violation = 0.0;
  std::string worst_constraint;
  [[nodiscard]] bool satisfied(double tol) const noexcept { return worst_violation <= tol; }
};

/// Evaluates bounds, same-lane gaps and conflict ordering directly from the
/// physical states, independently of the assembled rows.
[[nodiscard]] ConstraintReport verify_program(const Snapshot& snapshot, const PrioritySequence& seq,
                                              std::span<const int> ids, std::span<const double> commands,
                                              const QpParams& params);

struct CandidateOutcome {
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
  int iterations = 0;
};

struct Selection {
  VelocityProgram program;
  std::vector<CandidateOutcome> outcomes;
  int chosen = -1;  // candidate index, -1 when the braking fallback is used
  [[nodiscard]] bool fallback() const noexcept { return chosen < 0; }
};

/// Every control vehicle brakes at a_min for one planning step.
[[nodiscard]] VelocityProgram braking_program(const Snapshot& snapshot, const PrioritySequence& seq,
                                              const ClassTable& classes, const QpParams& params);

/// Solves one QP per candidate in parallel and keeps the feasible program with
/// the lowest objective (lowest index on ties).
[[nodiscard]] Selection select_optimal(const Snapshot& snapshot, std::span<const PrioritySequence> candidates,
                                       const ClassTable& classes, const QpParams& params);

/// Single-threaded reference for select_optimal; results are identical.
[[nodiscard]] Selection select_optimal_serial(const Snapshot& snapshot, std::span<const PrioritySequence> candidates,
                                              const ClassTable& classes, const QpParams& params);

/// All orderings of the control vehicles that keep same-lane vehicles in physical order.
[[nodiscard]] std::vector<PrioritySequence> lane_respecting_orders(const Snapshot& snapshot, double slot_headway);

}  // namespace coopintersect
