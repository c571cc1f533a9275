#include "coopintersect/qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include <omp.h>

namespace coopintersect {

namespace {

using LaneKey = std::pair<int, int>;  // (road, lane)

struct Member {
  double s = 0.0;
  int id = 0;
  int var = -1;  // decision variable index, -1 for committed vehicles
  const VehicleState* state = nullptr;
};

std::map<LaneKey, std::vector<Member>> lanes_of(const Snapshot& snapshot,
                                                const std::unordered_map<int, int>& var_of) {
  std::map<LaneKey, std::vector<Member>> lanes;
  for (const auto& st : snapshot.control) {
    lanes[{st.road(), st.lane}].push_back({st.s, st.id, var_of.at(st.id), &st});
  }
  for (const auto& st : snapshot.committed) lanes[{st.road(), st.lane}].push_back({st.s, st.id, -1, &st});
  for (auto& [key, members] : lanes) {
    std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
      return a.s != b.s ? a.s < b.s : a.id < b.id;
    });
  }
  return lanes;
}

std::unordered_map<int, int> index_control(const Snapshot& snapshot, const PrioritySequence& seq) {
  std::unordered_map<int, int> var_of;
  for (std::size_t k = 0; k < snapshot.control.size(); ++k) {
    if (!var_of.emplace(snapshot.control[k].id, static_cast<int>(k)).second) {
      throw std::invalid_argument("duplicate vehicle id in snapshot");
    }
  }
  if (seq.order.size() != snapshot.control.size()) {
    throw std::invalid_argument("sequence does not cover the control-zone snapshot");
  }
  std::vector<char> seen(snapshot.control.size(), 0);
  for (int id : seq.order) {
    const auto it = var_of.find(id);
    if (it == var_of.end() || seen[static_cast<std::size_t>(it->second)]) {
      throw std::invalid_argument("sequence is not a permutation of the control-zone vehicles");
    }
    seen[static_cast<std::size_t>(it->second)] = 1;
  }
  return var_of;
}

double reachable_low(const VehicleState& st, const QpParams& p) {
  return std::clamp(st.v + st.a_min * p.plan_dt, 0.0, p.speed_limit);
}

double reachable_high(const VehicleState& st, const QpParams& p) {
  return std::clamp(st.v + st.a_max * p.plan_dt, 0.0, p.speed_limit);
}

// The later vehicle of a row: the follower of a gap row, the second vehicle of an ordering row.
int later_vehicle(const LinearRow& r) { return r.family == RowFamily::committed_longitudinal ? r.first : r.second; }

// Interval propagation over the rows. Returns the index of a row that cannot
// hold inside the current bounds, or -1 once the bounds are stable.
int propagate(const std::vector<LinearRow>& rows, std::vector<double>& lo, std::vector<double>& hi) {
  constexpr double tol = 1e-9;
  constexpr int max_passes = 200;
  const auto max_term = [&](int var, double coef) {
    const auto k = static_cast<std::size_t>(var);
    return coef * (coef > 0.0 ? hi[k] : lo[k]);
  };
  // Applies coef * u[var] >= need to the bounds of var.
  const auto restrict = [&](int var, double coef, double need, bool& changed) {
    const auto k = static_cast<std::size_t>(var);
    if (coef == 0.0) return need <= tol;
    if (coef > 0.0) {
      const double bound = need / coef;
      if (bound > hi[k] + tol) return false;
      if (bound > lo[k] + tol) {
        lo[k] = std::min(bound, hi[k]);
        changed = true;
      }
    } else {
      const double bound = need / coef;
      if (bound < lo[k] - tol) return false;
      if (bound < hi[k] - tol) {
        hi[k] = std::max(bound, lo[k]);
        changed = true;
      }
    }
    return true;
  };
  for (int pass = 0; pass < max_passes; ++pass) {
    bool changed = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const LinearRow& row = rows[r];
      const double other_second = row.second >= 0 ? max_term(row.second, row.second_coef) : 0.0;
      if (!restrict(row.first, row.first_coef, row.rhs - other_second, changed)) return static_cast<int>(r);
      if (row.second >= 0 &&
          !restrict(row.second, row.second_coef, row.rhs - max_term(row.first, row.first_coef), changed)) {
        return static_cast<int>(r);
      }
    }
    if (!changed) break;
  }
  return -1;
}

// A row that cannot hold for any reachable commands needs more than one planning
// step to resolve. Its later vehicle brakes at its limit this cycle and the row is
// dropped; propagation restarts from the reachability boxes after every pin.
void pin_unreachable_rows(QpProblem& p) {
  const std::vector<double> box_lo = p.lower;
  const std::vector<double> box_hi = p.upper;
  std::vector<char> pinned(p.size(), 0);
  for (;;) {
    p.lower = box_lo;
    p.upper = box_hi;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (pinned[k]) p.upper[k] = p.lower[k];
    }
    const int bad = propagate(p.rows, p.lower, p.upper);
    if (bad < 0) return;
    const auto k = static_cast<std::size_t>(later_vehicle(p.rows[static_cast<std::size_t>(bad)]));
    if (!pinned[k]) {
      pinned[k] = 1;
      ++p.tightened_bounds;
    }
    p.rows.erase(p.rows.begin() + bad);
  }
}

}  // namespace

PriorityWeights assign_priorities(const VehicleState& state, const ClassTable& classes) {
  if (!(state.preference >= 0.0 && state.preference <= 1.0)) {
    throw std::invalid_argument("preference must lie in [0, 1]");
  }
  const VehicleClass& cls = classes[state.cls];
  const double d = state.preference;
  return {cls.speed_priority.lerp(d),
          cls.variation_priority.high - d * (cls.variation_priority.high - cls.variation_priority.low)};
}

void QpParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(plan_dt > 0.0)) throw std::invalid_argument("plan_dt must be positive");
  if (!(speed_limit > 0.0)) throw std::invalid_argument("speed_limit must be positive");
  if (!(committed_buffer >= 0.0)) throw std::invalid_argument("committed_buffer must be non-negative");
  margins.validate();
}

double QpProblem::objective(std::span<const double> u) const {
  if (u.size() != ids.size()) throw std::invalid_argument("objective: command count mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double ds = u[k] - speed_limit;
    const double dv = u[k] - current_speed[k];
    total += lambda * weights[k].speed_priority * ds * ds + (1.0 - lambda) * weights[k].variation_priority * dv * dv;
  }
  return total;
}

qp::DenseQp QpProblem::to_dense() const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto m = static_cast<Eigen::Index>(rows.size() + 2 * ids.size());
  qp::DenseQp dense;
  dense.hessian = Eigen::MatrixXd::Zero(n, n);
  dense.linear.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& w = weights[static_cast<std::size_t>(k)];
    const double ws = lambda * w.speed_priority;
    const double wv = (1.0 - lambda) * w.variation_priority;
    dense.hessian(k, k) = 2.0 * (ws + wv);
    dense.linear[k] = -2.0 * (ws * speed_limit + wv * current_speed[static_cast<std::size_t>(k)]);
  }
  dense.constraints = Eigen::MatrixXd::Zero(m, n);
  dense.lower.resize(m);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    dense.constraints(r, row.first) += row.first_coef;
    if (row.second >= 0) dense.constraints(r, row.second) += row.second_coef;
    dense.lower[r++] = row.rhs;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    dense.constraints(r, k) = 1.0;
    dense.lower[r++] = lower[static_cast<std::size_t>(k)];
    dense.constraints(r, k) = -1.0;
    dense.lower[r++] = -upper[static_cast<std::size_t>(k)];
  }
  return dense;
}

double clearance_time(const VehicleState& state, double speed_limit, const SafetyMargins& margins) {
  double remaining = state.s + state.length + margins.lateral;
  if (remaining <= 0.0) return 0.0;
  const double v = std::clamp(state.v, 0.0, speed_limit);
  if (state.a_max <= 0.0) {
    if (v <= 0.0) return std::numeric_limits<double>::infinity();
    return remaining / v;
  }
  const double ramp_time = (speed_limit - v) / state.a_max;
  const double ramp_dist = 0.5 * (v + speed_limit) * ramp_time;
  if (ramp_dist >= remaining) {
    return (-v + std::sqrt(v * v + 2.0 * state.a_max * remaining)) / state.a_max;
  }
  return ramp_time + (remaining - ramp_dist) / speed_limit;
}

QpProblem build_qp(const Snapshot& snapshot, const PrioritySequence& seq, const ClassTable& classes,
                   const QpParams& params) {
  const auto var_of = index_control(snapshot, seq);
  const double dt = params.plan_dt;
  const std::size_t n = snapshot.control.size();

  QpProblem problem;
  problem.lambda = params.lambda;
  problem.speed_limit = params.speed_limit;
  problem.ids.resize(n);
  problem.weights.resize(n);
  problem.current_speed.resize(n);
  problem.lower.resize(n);
  problem.upper.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const VehicleState& st = snapshot.control[k];
    problem.ids[k] = st.id;
    problem.weights[k] = assign_priorities(st, classes);
    problem.current_speed[k] = st.v;
    problem.lower[k] = reachable_low(st, params);
    problem.upper[k] = std::max(problem.lower[k], reachable_high(st, params));
  }

  const auto tighten = [&](int var, double cap) {
    auto& hi = problem.upper[static_cast<std::size_t>(var)];
    const double lo = problem.lower[static_cast<std::size_t>(var)];
    const double next = std::max(lo, std::min(hi, cap));
    if (next < hi) {
      hi = next;
      ++problem.tightened_bounds;
    }
  };

  // Same-lane gaps between consecutive vehicles (front first).
  for (const auto& [key, members] : lanes_of(snapshot, var_of)) {
    for (std::size_t k = 0; k + 1 < members.size(); ++k) {
      const Member& lead = members[k];
      const Member& follow = members[k + 1];
      if (follow.var < 0) continue;
      const VehicleState& ls = *lead.state;
      const VehicleState& fs = *follow.state;
      const auto fk = static_cast<std::size_t>(follow.var);
      const double spacing = ls.length + params.margins.rear;
      // gap after the step: s_f - s_l - dt/2 (v_f + u_f - v_l - u_l)
      const double gap_now = follow.s - lead.s - 0.5 * dt * (fs.v - ls.v);
      const double plain_rhs = (2.0 / dt) * (spacing - gap_now);
      // The gap must also cover u_f^2/(2 b_f) - u_l^2/(2 b_l). The convex follower term is
      // bounded above by its secant over the follower box, the concave leader term by a tangent.
      const double bf = -fs.a_min;
      const double bl = -ls.a_min;
      const double flo = problem.lower[fk];
      const double fhi = problem.upper[fk];
      const double f_slope = (flo + fhi) / (2.0 * bf);
      const double f_offset = -flo * fhi / (2.0 * bf);
      const double follow_coef = -(0.5 * dt + f_slope);
      if (lead.var >= 0) {
        const auto lk = static_cast<std::size_t>(lead.var);
        const double p = 0.5 * (problem.lower[lk] + problem.upper[lk]);
        const double lead_coef = 0.5 * dt + p / bl;
        const double brake_rhs = spacing - gap_now + f_offset + p * p / (2.0 * bl);
        problem.rows.push_back({RowFamily::longitudinal, lead.var, 1.0, follow.var, -1.0, plain_rhs});
        problem.rows.push_back({RowFamily::braking_gap, lead.var, lead_coef, follow.var, follow_coef, brake_rhs});
      } else {
        // Committed leaders keep their current speed over the step.
        const double brake_rhs = spacing - gap_now + f_offset - ls.v * ls.v / (2.0 * bl) - 0.5 * dt * ls.v;
        problem.rows.push_back(
            {RowFamily::committed_longitudinal, follow.var, -1.0, -1, 0.0, plain_rhs - ls.v});
        problem.rows.push_back({RowFamily::committed_longitudinal, follow.var, follow_coef, -1, 0.0, brake_rhs});
      }
    }
  }

  // Conflict ordering along the candidate sequence.
  const ConflictTable& table = ConflictTable::standard();
  std::vector<const VehicleState*> ordered(n);
  for (std::size_t p = 0; p < n; ++p) ordered[p] = &snapshot.control[static_cast<std::size_t>(var_of.at(seq.order[p]))];
  for (std::size_t p = 0; p < n; ++p) {
    const VehicleState& a = *ordered[p];
    for (std::size_t q = p + 1; q < n; ++q) {
      const VehicleState& b = *ordered[q];
      if (!table.conflicts(a.group, b.group)) continue;
      const double arrive = b.s - 0.5 * dt * b.v;
      const double clear = a.s - 0.5 * dt * a.v + a.length + params.margins.lateral;
      const int va = var_of.at(a.id);
      const int vb = var_of.at(b.id);
      if (arrive <= 0.0) {
        // Degenerate pair: the later vehicle is already at the line, so it brakes as hard as it can.
        tighten(vb, problem.lower[static_cast<std::size_t>(vb)]);
        continue;
      }
      problem.rows.push_back({RowFamily::lateral, va, arrive, vb, -clear, 0.0});
    }
  }

  // Vehicles already inside the conflict zone: conflicting arrivals wait until they clear.
  for (const VehicleState& occ : snapshot.committed) {
    const double exit_time = clearance_time(occ, params.speed_limit, params.margins) + params.committed_buffer;
    for (const VehicleState& st : snapshot.control) {
      if (!table.conflicts(occ.group, st.group)) continue;
      const int var = var_of.at(st.id);
      const double arrive = st.s - 0.5 * dt * st.v;
      if (arrive <= 0.0 || !std::isfinite(exit_time)) {
        tighten(var, problem.lower[static_cast<std::size_t>(var)]);
      } else if (exit_time > 0.5 * dt) {
        tighten(var, arrive / (exit_time - 0.5 * dt));
      }
    }
  }
  pin_unreachable_rows(problem);
  return problem;
}

double VelocityProgram::command_for(int id) const {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == id) return commands[k];
  }
  throw std::out_of_range("no command for vehicle " + std::to_string(id));
}

VelocityProgram solve_qp(const QpProblem& problem, const PrioritySequence& seq) {
  VelocityProgram program;
  program.ids = problem.ids;
  program.sequence = seq;
  if (problem.size() == 0) {
    program.solve_status = SolveStatus::optimal;
    return program;
  }
  for (std::size_t k = 0; k < problem.size(); ++k) {
    if (problem.lower[k] > problem.upper[k]) {
      program.solve_status = SolveStatus::infeasible;
      return program;
    }
  }
  const qp::DenseQp dense = problem.to_dense();
  const qp::SolverResult res = qp::solve_dense(dense);
  program.iterations = res.iterations;
  program.commands.assign(res.x.data(), res.x.data() + res.x.size());
  // Snap onto the exact bounds; the solver may land a few ulps outside.
  for (std::size_t k = 0; k < problem.size(); ++k) {
    program.commands[k] = std::clamp(program.commands[k], problem.lower[k], problem.upper[k]);
  }
  const Eigen::Map<const Eigen::VectorXd> snapped(program.commands.data(), static_cast<Eigen::Index>(problem.size()));
  const bool ok = res.status == qp::SolveStatus::optimal && qp::max_violation(dense, snapped) <= 1e-6;
  program.solve_status = ok ? SolveStatus::optimal : SolveStatus::infeasible;
  program.objective_value = problem.objective(program.commands);
  return program;
}

ConstraintReport verify_program(const Snapshot& snapshot, const PrioritySequence& seq, std::span<const int> ids,
                                std::span<const double> commands, const QpParams& params) {
  if (ids.size() != commands.size()) throw std::invalid_argument("verify_program: ids and commands differ in size");
  const double dt = params.plan_dt;
  std::unordered_map<int, double> u;
  for (std::size_t k = 0; k < ids.size(); ++k) u[ids[k]] = commands[k];

  ConstraintReport report;
  const auto note = [&](double violation, const std::string& what) {
    if (violation > report.worst_violation) {
      report.worst_violation = violation;
      report.worst_constraint = what;
    }
  };
  const auto command = [&](const VehicleState& st) {
    const auto it = u.find(st.id);
    if (it == u.end()) throw std::invalid_argument("verify_program: missing command for vehicle " + std::to_string(st.id));
    return it->second;
  };
  const auto next_s = [&](const VehicleState& st) { return st.s - 0.5 * dt * (st.v + command(st)); };
  // Nothing more can be asked of a vehicle that already brakes as hard as it can.
  const auto at_braking_limit = [&](const VehicleState& st) {
    return command(st) <= reachable_low(st, params) + 1e-9;
  };

  for (const auto& st : snapshot.control) {
    const double c = command(st);
    const std::string tag = "vehicle " + std::to_string(st.id);
    note(-c, "speed floor, " + tag);
    note(c - params.speed_limit, "speed limit, " + tag);
    note((st.v + st.a_min * dt) - c, "braking limit, " + tag);
    note(c - (st.v + st.a_max * dt), "acceleration limit, " + tag);
  }

  std::map<LaneKey, std::vector<const VehicleState*>> lanes;
  for (const auto& st : snapshot.control) lanes[{st.road(), st.lane}].push_back(&st);
  for (auto& [key, members] : lanes) {
    std::sort(members.begin(), members.end(), [](const VehicleState* a, const VehicleState* b) {
      return a->s != b->s ? a->s < b->s : a->id < b->id;
    });
    for (std::size_t k = 0; k + 1 < members.size(); ++k) {
      const VehicleState& lead = *members[k];
      const VehicleState& follow = *members[k + 1];
      const double gap = next_s(follow) - next_s(lead) - lead.length - params.margins.rear;
      if (at_braking_limit(follow)) continue;
      const std::string pair = std::to_string(lead.id) + "->" + std::to_string(follow.id);
      note(-(2.0 / dt) * gap, "gap " + pair);
      const double uf = command(follow);
      const double ul = command(lead);
      const double stop_diff = uf * uf / (2.0 * -follow.a_min) - ul * ul / (2.0 * -lead.a_min);
      note(-(gap - std::max(0.0, stop_diff)), "braking gap " + pair);
    }
  }

  std::unordered_map<int, const VehicleState*> by_id;
  for (const auto& st : snapshot.control) by_id[st.id] = &st;
  const ConflictTable& table = ConflictTable::standard();
  for (std::size_t p = 0; p < seq.order.size(); ++p) {
    const VehicleState& a = *by_id.at(seq.order[p]);
    for (std::size_t q = p + 1; q < seq.order.size(); ++q) {
      const VehicleState& b = *by_id.at(seq.order[q]);
      if (!table.conflicts(a.group, b.group)) continue;
      if (b.s - 0.5 * dt * b.v <= 0.0 || at_braking_limit(b)) continue;
      // u_a u_b (arrival_b - clearance_a), both measured after the planning step.
      const double margin = command(a) * next_s(b) - command(b) * (next_s(a) + a.length + params.margins.lateral);
      note(-margin, "order " + std::to_string(a.id) + "<" + std::to_string(b.id));
    }
  }
  return report;
}

VelocityProgram braking_program(const Snapshot& snapshot, const PrioritySequence& seq, const ClassTable& classes,
                                const QpParams& params) {
  VelocityProgram program;
  program.sequence = seq;
  program.solve_status = SolveStatus::infeasible;
  QpProblem scratch;
  scratch.lambda = params.lambda;
  scratch.speed_limit = params.speed_limit;
  for (const auto& st : snapshot.control) {
    program.ids.push_back(st.id);
    program.commands.push_back(reachable_low(st, params));
    scratch.ids.push_back(st.id);
    scratch.weights.push_back(assign_priorities(st, classes));
    scratch.current_speed.push_back(st.v);
  }
  program.objective_value = scratch.objective(program.commands);
  return program;
}

namespace {

Selection merge(const Snapshot& snapshot, std::span<const PrioritySequence> candidates, const ClassTable& classes,
                const QpParams& params, std::vector<VelocityProgram>& programs) {
  Selection sel;
  sel.outcomes.resize(programs.size());
  for (std::size_t k = 0; k < programs.size(); ++k) {
    sel.outcomes[k] = {programs[k].solve_status, programs[k].objective_value, programs[k].iterations};
    if (programs[k].solve_status != SolveStatus::optimal) continue;
    if (sel.chosen < 0 || programs[k].objective_value < sel.outcomes[static_cast<std::size_t>(sel.chosen)].objective) {
      sel.chosen = static_cast<int>(k);
    }
  }
  if (sel.chosen >= 0) {
    sel.program = std::move(programs[static_cast<std::size_t>(sel.chosen)]);
  } else {
    sel.program = braking_program(snapshot, candidates.front(), classes, params);
  }
  return sel;
}

}  // namespace

Selection select_optimal(const Snapshot& snapshot, std::span<const PrioritySequence> candidates,
                         const ClassTable& classes, const QpParams& params) {
  if (candidates.empty()) throw std::invalid_argument("select_optimal: no candidate sequences");
  std::vector<VelocityProgram> programs(candidates.size());
  const auto count = static_cast<int>(candidates.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (count > 1)
  for (int k = 0; k < count; ++k) {
    try {
      programs[static_cast<std::size_t>(k)] =
          solve_qp(build_qp(snapshot, candidates[static_cast<std::size_t>(k)], classes, params),
                   candidates[static_cast<std::size_t>(k)]);
    } catch (...) {
#pragma omp critical(select_optimal_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return merge(snapshot, candidates, classes, params, programs);
}

Selection select_optimal_serial(const Snapshot& snapshot, std::span<const PrioritySequence> candidates,
                                const ClassTable& classes, const QpParams& params) {
  if (candidates.empty()) throw std::invalid_argument("select_optimal: no candidate sequences");
  std::vector<VelocityProgram> programs;
  programs.reserve(candidates.size());
  for (const auto& seq : candidates) programs.push_back(solve_qp(build_qp(snapshot, seq, classes, params), seq));
  return merge(snapshot, candidates, classes, params, programs);
}

std::vector<PrioritySequence> lane_respecting_orders(const Snapshot& snapshot, double slot_headway) {
  std::map<LaneKey, std::vector<const VehicleState*>> lanes;
  for (const auto& st : snapshot.control) lanes[{st.road(), st.lane}].push_back(&st);
  std::vector<std::vector<int>> queues;
  for (auto& [key, members] : lanes) {
    std::sort(members.begin(), members.end(), [](const VehicleState* a, const VehicleState* b) {
      return a->s != b->s ? a->s < b->s : a->id < b->id;
    });
    std::vector<int> ids;
    for (const auto* st : members) ids.push_back(st->id);
    queues.push_back(std::move(ids));
  }
  const std::vector<double> alphas = slot_alphas(snapshot.control.size(), slot_headway);
  std::vector<PrioritySequence> out;
  std::vector<std::size_t> head(queues.size(), 0);
  std::vector<int> order;
  const std::function<void()> extend = [&] {
    if (order.size() == snapshot.control.size()) {
      out.push_back({order, alphas, {}});
      return;
    }
    for (std::size_t q = 0; q < queues.size(); ++q) {
      if (head[q] == queues[q].size()) continue;
      order.push_back(queues[q][head[q]++]);
      extend();
      --head[q];
      order.pop_back();
    }
  };
  extend();
  return out;
}

}  // namespace coopintersect
