#include <gtest/gtest.h>

#include <random>
#include <stdexcept>

#include "coopintersect/qp.hpp"
#include "support/qp_oracle.hpp"

using namespace coopintersect;
using coopintersect::testing::distance_order;
using coopintersect::testing::grid_oracle;
using coopintersect::testing::problem_violation;
using coopintersect::testing::random_snapshot;
using coopintersect::testing::reference_objective;
using coopintersect::testing::SnapshotOptions;

namespace {

const ClassTable kClasses = ClassTable::defaults();
const IntersectionSpec kSpec;

VehicleState car(int id, const char* group, double s, double v, double pref = 0.5) {
  const LaneGroup g = LaneGroup::parse(group);
  return make_vehicle(id, kClasses[ClassKind::passenger], g, kSpec.lane_for(g.intention), s, v, pref);
}

PrioritySequence order(std::vector<int> ids) {
  PrioritySequence seq;
  seq.slot_alphas = slot_alphas(ids.size(), 1.5);
  seq.order = std::move(ids);
  return seq;
}

const LinearRow* find_row(const QpProblem& p, RowFamily fam) {
  for (const auto& r : p.rows) {
    if (r.family == fam) return &r;
  }
  return nullptr;
}

ClassTable unit_priorities(double a_max) {
  ClassTable t = ClassTable::defaults();
  t[ClassKind::passenger].speed_priority = {1.0, 1.0};
  t[ClassKind::passenger].variation_priority = {1.0, 1.0};
  t[ClassKind::passenger].a_max = a_max;
  return t;
}

}  // namespace

TEST(Priorities, ClassTableInterpolation) {
  VehicleState ev = make_vehicle(1, kClasses[ClassKind::emergency], LaneGroup::parse("0-1"), 1, 50, 10, 1.0);
  PriorityWeights w = assign_priorities(ev, kClasses);
  EXPECT_DOUBLE_EQ(w.speed_priority, 5.0);
  EXPECT_DOUBLE_EQ(w.variation_priority, 0.5);

  VehicleState truck = make_vehicle(2, kClasses[ClassKind::truck], LaneGroup::parse("0-1"), 1, 50, 10, 0.0);
  w = assign_priorities(truck, kClasses);
  EXPECT_DOUBLE_EQ(w.speed_priority, 0.3);
  EXPECT_DOUBLE_EQ(w.variation_priority, 4.0);

  for (ClassKind k : {ClassKind::passenger, ClassKind::truck, ClassKind::emergency}) {
    const VehicleState mid = make_vehicle(3, kClasses[k], LaneGroup::parse("0-1"), 1, 50, 10, 0.5);
    w = assign_priorities(mid, kClasses);
    EXPECT_NEAR(w.speed_priority, 0.5 * (kClasses[k].speed_priority.low + kClasses[k].speed_priority.high), 1e-12);
    EXPECT_NEAR(w.variation_priority,
                0.5 * (kClasses[k].variation_priority.low + kClasses[k].variation_priority.high), 1e-12);
  }
  ev.preference = 1.5;
  EXPECT_THROW((void)assign_priorities(ev, kClasses), std::invalid_argument);
}

TEST(BuildQp, SameLaneGapRow) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 50, 15), car(2, "0-1", 60, 15)};
  const QpProblem p = build_qp(snap, order({1, 2}), kClasses, QpParams{});
  const LinearRow* r = find_row(p, RowFamily::longitudinal);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(p.ids[static_cast<std::size_t>(r->first)], 1);
  EXPECT_EQ(p.ids[static_cast<std::size_t>(r->second)], 2);
  EXPECT_DOUBLE_EQ(r->first_coef, 1.0);
  EXPECT_DOUBLE_EQ(r->second_coef, -1.0);
  EXPECT_NEAR(r->rhs, -6.0, 1e-12);
  EXPECT_NE(find_row(p, RowFamily::braking_gap), nullptr);
}

TEST(BuildQp, ConflictOrderingRow) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "1-2", 60, 14)};
  const QpProblem p = build_qp(snap, order({1, 2}), kClasses, QpParams{});
  const LinearRow* r = find_row(p, RowFamily::lateral);
  ASSERT_NE(r, nullptr);
  // 53 u_1 - 62 u_2 >= 0
  EXPECT_EQ(p.ids[static_cast<std::size_t>(r->first)], 1);
  EXPECT_NEAR(r->first_coef, 53.0, 1e-12);
  EXPECT_NEAR(r->second_coef, -62.0, 1e-12);
  EXPECT_DOUBLE_EQ(r->rhs, 0.0);

  // The reverse order needs 32 u_2 >= 83 u_1, out of reach this step: vehicle 1 is
  // pinned to its braking limit and the row is dropped.
  const QpProblem swapped = build_qp(snap, order({2, 1}), kClasses, QpParams{});
  EXPECT_EQ(find_row(swapped, RowFamily::lateral), nullptr);
  EXPECT_DOUBLE_EQ(swapped.upper[0], swapped.lower[0]);
  EXPECT_EQ(swapped.tightened_bounds, 1);
}

TEST(BuildQp, NonConflictingPairHasNoOrderingRow) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "2-2", 60, 14), car(3, "1-0", 30, 12)};
  const QpProblem p = build_qp(snap, order({1, 2, 3}), kClasses, QpParams{});
  EXPECT_EQ(find_row(p, RowFamily::lateral), nullptr);
  EXPECT_TRUE(p.rows.empty());
}

TEST(BuildQp, BoxesFollowReachability) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 100, 19), car(2, "1-1", 90, 2)};
  const QpProblem p = build_qp(snap, order({1, 2}), kClasses, QpParams{});
  EXPECT_DOUBLE_EQ(p.lower[0], 19 - 4.5);
  EXPECT_DOUBLE_EQ(p.upper[0], 20.0);
  EXPECT_DOUBLE_EQ(p.lower[1], 0.0);
  EXPECT_DOUBLE_EQ(p.upper[1], 2 + 2.6);
}

TEST(BuildQp, RejectsSequenceThatDoesNotCoverSnapshot) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "1-2", 60, 14)};
  EXPECT_THROW((void)build_qp(snap, order({1}), kClasses, QpParams{}), std::invalid_argument);
  EXPECT_THROW((void)build_qp(snap, order({1, 1}), kClasses, QpParams{}), std::invalid_argument);
  EXPECT_THROW((void)build_qp(snap, order({1, 3}), kClasses, QpParams{}), std::invalid_argument);
}

TEST(BuildQp, CommittedOccupantHoldsBackConflictingArrival) {
  Snapshot snap;
  snap.control = {car(1, "1-2", 12, 10), car(2, "3-0", 12, 10)};
  snap.committed = {car(3, "0-1", -2, 4)};
  const QpParams params;
  const QpProblem p = build_qp(snap, order({1, 2}), kClasses, params);
  const double exit = clearance_time(snap.committed[0], 20, params.margins) + params.committed_buffer;
  // Vehicle 1 conflicts with the occupant and may only arrive once it has left.
  EXPECT_NEAR(p.upper[0], std::max(p.lower[0], (12 - 5.0) / (exit - 0.5)), 1e-12);
  // Right turns share the intersection freely.
  EXPECT_DOUBLE_EQ(p.upper[1], 12.6);
}

TEST(BuildQp, ParamsValidation) {
  QpParams p;
  p.lambda = 1.2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.plan_dt = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.committed_buffer = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ClearanceTime, ClosedForms) {
  const SafetyMargins m;
  VehicleState st = car(1, "0-1", -5, 20);
  EXPECT_NEAR(clearance_time(st, 20, m), (-5 + 5 + 25) / 20.0, 1e-12);
  st.v = 0.0;
  // 25 m from rest at 2.6 m/s^2 stays below the 20 m/s ramp distance of ~76.9 m.
  EXPECT_NEAR(clearance_time(st, 20, m), std::sqrt(2 * 25 / 2.6), 1e-12);
  st.s = -40;
  EXPECT_DOUBLE_EQ(clearance_time(st, 20, m), 0.0);
}

TEST(SolveQp, UnconstrainedSingleVehicle) {
  const ClassTable t = unit_priorities(10.0);
  Snapshot snap;
  snap.control = {make_vehicle(1, t[ClassKind::passenger], LaneGroup::parse("0-1"), 1, 100, 10, 0.5)};
  const VelocityProgram prog = solve_qp(build_qp(snap, order({1}), t, QpParams{}), order({1}));
  ASSERT_EQ(prog.solve_status, SolveStatus::optimal);
  EXPECT_NEAR(prog.command_for(1), 17.0, 1e-9);
  EXPECT_THROW((void)prog.command_for(7), std::out_of_range);
}

TEST(SolveQp, AccelerationBoxBinds) {
  const ClassTable t = unit_priorities(2.6);
  Snapshot snap;
  snap.control = {make_vehicle(1, t[ClassKind::passenger], LaneGroup::parse("0-1"), 1, 100, 10, 0.5)};
  const VelocityProgram prog = solve_qp(build_qp(snap, order({1}), t, QpParams{}), order({1}));
  ASSERT_EQ(prog.solve_status, SolveStatus::optimal);
  EXPECT_NEAR(prog.command_for(1), 12.6, 1e-9);
}

TEST(SolveQp, EmptyProblemIsTriviallyOptimal) {
  const VelocityProgram prog = solve_qp(build_qp(Snapshot{}, PrioritySequence{}, kClasses, QpParams{}), {});
  EXPECT_EQ(prog.solve_status, SolveStatus::optimal);
  EXPECT_DOUBLE_EQ(prog.objective_value, 0.0);
}

TEST(SolveQp, ThreeVehicleExampleMatchesGrid) {
  // One conflicting pair and one same-lane pair.
  Snapshot snap;
  snap.control = {car(1, "0-1", 30, 14), car(2, "1-2", 60, 15), car(3, "0-1", 45, 16)};
  const PrioritySequence seq = order({1, 3, 2});
  const QpProblem p = build_qp(snap, seq, kClasses, QpParams{});
  ASSERT_NE(find_row(p, RowFamily::lateral), nullptr);
  ASSERT_NE(find_row(p, RowFamily::longitudinal), nullptr);
  const VelocityProgram prog = solve_qp(p, seq);
  ASSERT_EQ(prog.solve_status, SolveStatus::optimal);
  const auto grid = grid_oracle(p);
  ASSERT_TRUE(grid.feasible());
  EXPECT_LE(prog.objective_value, grid.objective + 1e-9);
  EXPECT_GE(prog.objective_value, grid.objective - 0.02);
}

TEST(SolveQp, RandomSmallInstancesMatchGridOracle) {
  std::mt19937_64 rng(2025);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SnapshotOptions opt;
    opt.control = 1 + trial % 3;
    opt.max_distance = 60.0;
    opt.committed = trial % 5 == 0 ? 1 : 0;
    const Snapshot snap = random_snapshot(rng, opt);
    const PrioritySequence seq = distance_order(snap);
    const QpProblem p = build_qp(snap, seq, kClasses, QpParams{});
    const VelocityProgram prog = solve_qp(p, seq);
    const auto grid = grid_oracle(p);
    ASSERT_EQ(prog.solve_status == SolveStatus::optimal, grid.feasible()) << "trial " << trial;
    if (!grid.feasible()) continue;
    ++compared;
    EXPECT_LE(problem_violation(p, prog.commands), 1e-6);
    EXPECT_NEAR(prog.objective_value, reference_objective(p, prog.commands), 1e-9);
    EXPECT_LE(prog.objective_value, grid.objective + 1e-9) << "trial " << trial;
    EXPECT_GE(prog.objective_value, grid.objective - 0.02) << "trial " << trial;
  }
  EXPECT_GE(compared, 90);
}

TEST(SolveQp, PhysicalConstraintsHoldOnLargeSnapshots) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    SnapshotOptions opt;
    opt.control = 5 + trial % 36;
    opt.committed = trial % 3;
    const Snapshot snap = random_snapshot(rng, opt);
    const PrioritySequence seq = distance_order(snap);
    const QpParams params;
    const QpProblem p = build_qp(snap, seq, kClasses, params);
    const VelocityProgram prog = solve_qp(p, seq);
    ASSERT_EQ(prog.solve_status, SolveStatus::optimal) << "trial " << trial;
    EXPECT_LE(problem_violation(p, prog.commands), 1e-6);
    const ConstraintReport rep = verify_program(snap, seq, prog.ids, prog.commands, params);
    EXPECT_TRUE(rep.satisfied(1e-6)) << "trial " << trial << ": " << rep.worst_constraint << " by "
                                     << rep.worst_violation;
  }
}

TEST(SolveQp, PerturbationNeverImproves) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    SnapshotOptions opt;
    opt.control = 2 + trial % 10;
    const Snapshot snap = random_snapshot(rng, opt);
    const PrioritySequence seq = distance_order(snap);
    const QpProblem p = build_qp(snap, seq, kClasses, QpParams{});
    const VelocityProgram prog = solve_qp(p, seq);
    ASSERT_EQ(prog.solve_status, SolveStatus::optimal);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (double step : {-0.01, 0.01}) {
        std::vector<double> u = prog.commands;
        u[k] += step;
        if (problem_violation(p, u) > 1e-9) continue;
        EXPECT_GE(reference_objective(p, u), prog.objective_value - 1e-8);
      }
    }
  }
}

TEST(SolveQp, ScalingPrioritiesKeepsArgmin) {
  ClassTable scaled = kClasses;
  for (auto& c : scaled.classes) {
    c.speed_priority = {3.0 * c.speed_priority.low, 3.0 * c.speed_priority.high};
    c.variation_priority = {3.0 * c.variation_priority.low, 3.0 * c.variation_priority.high};
  }
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    SnapshotOptions opt;
    opt.control = 3 + trial % 12;
    const Snapshot snap = random_snapshot(rng, opt);
    const PrioritySequence seq = distance_order(snap);
    const VelocityProgram a = solve_qp(build_qp(snap, seq, kClasses, QpParams{}), seq);
    const VelocityProgram b = solve_qp(build_qp(snap, seq, scaled, QpParams{}), seq);
    ASSERT_EQ(a.commands.size(), b.commands.size());
    for (std::size_t k = 0; k < a.commands.size(); ++k) EXPECT_NEAR(a.commands[k], b.commands[k], 1e-7);
    EXPECT_NEAR(b.objective_value, 3.0 * a.objective_value, 1e-7 * (1.0 + a.objective_value));
  }
}

TEST(SolveQp, Deterministic) {
  std::mt19937_64 rng(3);
  SnapshotOptions opt;
  opt.control = 25;
  opt.committed = 2;
  const Snapshot snap = random_snapshot(rng, opt);
  const PrioritySequence seq = distance_order(snap);
  const VelocityProgram a = solve_qp(build_qp(snap, seq, kClasses, QpParams{}), seq);
  const VelocityProgram b = solve_qp(build_qp(snap, seq, kClasses, QpParams{}), seq);
  EXPECT_EQ(a.commands, b.commands);
  EXPECT_EQ(a.objective_value, b.objective_value);
}

TEST(LaneOrders, CountAndLaneOrder) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 20, 10), car(2, "0-1", 40, 10), car(3, "1-2", 30, 10), car(4, "2-0", 25, 10)};
  const auto orders = lane_respecting_orders(snap, 1.5);
  // 4! / 2! orderings keep vehicle 1 ahead of vehicle 2.
  EXPECT_EQ(orders.size(), 12u);
  for (const auto& seq : orders) EXPECT_LT(seq.position_of(1), seq.position_of(2));
}

TEST(SelectOptimal, PicksLowestObjective) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "1-2", 45, 14), car(3, "3-1", 60, 12)};
  const auto orders = lane_respecting_orders(snap, 1.5);
  const Selection sel = select_optimal(snap, orders, kClasses, QpParams{});
  ASSERT_FALSE(sel.fallback());
  ASSERT_EQ(sel.outcomes.size(), orders.size());
  for (std::size_t k = 0; k < sel.outcomes.size(); ++k) {
    if (sel.outcomes[k].status != SolveStatus::optimal) continue;
    EXPECT_LE(sel.program.objective_value, sel.outcomes[k].objective);
    if (static_cast<int>(k) < sel.chosen) EXPECT_LT(sel.program.objective_value, sel.outcomes[k].objective);
  }
  const std::vector<PrioritySequence> single{orders.back()};
  const Selection one = select_optimal(snap, single, kClasses, QpParams{});
  EXPECT_EQ(one.chosen, 0);
  EXPECT_EQ(one.program.sequence.order, orders.back().order);
}

TEST(SelectOptimal, TiesGoToLowestIndex) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16)};
  const std::vector<PrioritySequence> same{order({1}), order({1}), order({1})};
  EXPECT_EQ(select_optimal(snap, same, kClasses, QpParams{}).chosen, 0);
}

TEST(SelectOptimal, ParallelMatchesSerialAndSubsetIsNoBetter) {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 20; ++trial) {
    SnapshotOptions opt;
    opt.control = 5;
    opt.max_distance = 80.0;
    const Snapshot snap = random_snapshot(rng, opt);
    const auto orders = lane_respecting_orders(snap, 1.5);
    const Selection par = select_optimal(snap, orders, kClasses, QpParams{});
    const Selection ser = select_optimal_serial(snap, orders, kClasses, QpParams{});
    EXPECT_EQ(par.chosen, ser.chosen);
    EXPECT_EQ(par.program.commands, ser.program.commands);
    const std::vector<PrioritySequence> few(orders.begin(), orders.begin() + std::min<std::size_t>(3, orders.size()));
    const Selection sub = select_optimal(snap, few, kClasses, QpParams{});
    EXPECT_GE(sub.program.objective_value, par.program.objective_value - 1e-12);
  }
  EXPECT_THROW((void)select_optimal(Snapshot{}, std::span<const PrioritySequence>{}, kClasses, QpParams{}),
               std::invalid_argument);
}

TEST(BrakingProgram, EveryVehicleBrakesAtItsLimit) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "1-2", 45, 3)};
  const VelocityProgram prog = braking_program(snap, order({1, 2}), kClasses, QpParams{});
  EXPECT_EQ(prog.solve_status, SolveStatus::infeasible);
  EXPECT_DOUBLE_EQ(prog.command_for(1), 16 - 4.5);
  EXPECT_DOUBLE_EQ(prog.command_for(2), 0.0);
  EXPECT_GT(prog.objective_value, 0.0);
}

TEST(VerifyProgram, FlagsViolations) {
  Snapshot snap;
  snap.control = {car(1, "0-1", 40, 16), car(2, "1-2", 60, 14)};
  const PrioritySequence seq = order({1, 2});
  const std::vector<int> ids{1, 2};
  // 62 u_2 <= 53 u_1 fails for u_2 = u_1.
  const std::vector<double> bad{14.0, 14.0};
  const ConstraintReport rep = verify_program(snap, seq, ids, bad, QpParams{});
  EXPECT_FALSE(rep.satisfied(1e-6));
  EXPECT_EQ(rep.worst_constraint, "order 1<2");
  const std::vector<double> too_fast{25.0, 11.0};
  EXPECT_NE(verify_program(snap, seq, ids, too_fast, QpParams{}).worst_constraint.find("limit"), std::string::npos);
  const std::vector<int> short_ids{1};
  const std::vector<double> short_cmd{1.0};
  EXPECT_THROW((void)verify_program(snap, seq, short_ids, short_cmd, QpParams{}), std::invalid_argument);
}
