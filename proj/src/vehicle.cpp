#include "coopintersect/vehicle.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace coopintersect {

std::string_view to_string(ClassKind kind) noexcept {
  switch (kind) {
    case ClassKind::passenger: return "passenger";
    case ClassKind::truck: return "truck";
    case ClassKind::emergency: return "emergency";
  }
  return "unknown";
}

ClassKind parse_class(std::string_view name) {
  if (name == "passenger") return ClassKind::passenger;
  if (name == "truck") return ClassKind::truck;
  if (name == "emergency") return ClassKind::emergency;
  throw std::invalid_argument("unknown vehicle class '" + std::string(name) + "'");
}

void VehicleClass::validate() const {
  const std::string who(to_string(kind));
  if (!(a_min < 0.0 && a_max > 0.0)) throw std::invalid_argument(who + ": need a_min < 0 < a_max");
  if (!(length > 0.0)) throw std::invalid_argument(who + ": length must be > 0");
  if (assertiveness.low > assertiveness.high) throw std::invalid_argument(who + ": empty assertiveness range");
  if (!(speed_priority.low > 0.0) || speed_priority.low > speed_priority.high)
    throw std::invalid_argument(who + ": bad speed priority range");
  if (!(variation_priority.low > 0.0) || variation_priority.low > variation_priority.high)
    throw std::invalid_argument(who + ": bad variation priority range");
  if (!(fuel_scale > 0.0)) throw std::invalid_argument(who + ": fuel_scale must be > 0");
}

ClassTable ClassTable::defaults() {
  ClassTable t;
  t[ClassKind::passenger] = VehicleClass{ClassKind::passenger, 5.0,  2.6, -4.5, {1.0, 5.0},
                                         1.0, {0.5, 2.0}, {0.5, 2.0}};
  t[ClassKind::truck] = VehicleClass{ClassKind::truck, 12.0, 1.3, -3.5, {2.0, 6.0},
                                     3.0, {0.3, 1.0}, {2.0, 4.0}};
  t[ClassKind::emergency] = VehicleClass{ClassKind::emergency, 6.0, 3.0, -5.0, {7.0, 10.0},
                                         1.2, {3.0, 5.0}, {0.5, 1.0}};
  return t;
}

void SafetyMargins::validate() const {
  if (!(rear > 0.0) || !(lateral > 0.0)) throw std::invalid_argument("safety margins must be > 0");
}

VehicleState make_vehicle(int id, const VehicleClass& cls, LaneGroup group, int lane, double s,
                          double v, double preference) {
  VehicleState st;
  st.id = id;
  st.s = s;
  st.v = v;
  st.lane = lane;
  st.cls = cls.kind;
  st.preference = std::clamp(preference, 0.0, 1.0);
  st.group = group;
  st.length = cls.length;
  st.a_max = cls.a_max;
  st.a_min = cls.a_min;
  return st;
}

VehicleState step_position(const VehicleState& state, double u, double dt, double speed_limit) {
  if (dt < 0.0) throw std::domain_error("step_position: negative dt");
  if (dt == 0.0) return state;
  const double lo = std::clamp(state.v + state.a_min * dt, 0.0, speed_limit);
  const double hi = std::clamp(state.v + state.a_max * dt, 0.0, speed_limit);
  constexpr double kSlack = 1e-9;
  if (u < lo - kSlack || u > hi + kSlack) {
    throw std::domain_error("step_position: command " + std::to_string(u) + " outside reachable band [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  VehicleState next = state;
  next.s = state.s - dt * (state.v + u) / 2.0;
  next.v = u;
  next.wait_time = state.wait_time + dt;
  return next;
}

VehicleState track_command(const VehicleState& state, double u_target, double exec_dt, double plan_dt,
                           double speed_limit) {
  // Replanned every tick, a full-horizon time constant would travel v * plan_dt before
  // stopping, twice the ramp the planner assumed; braking therefore uses half the horizon,
  // and a command at the bottom of the reachable band brakes at the limit.
  const bool replanned = exec_dt < plan_dt;
  const double tau = u_target < state.v && replanned ? plan_dt / 2.0 : plan_dt;
  const double floor = std::max(0.0, state.v + state.a_min * plan_dt);
  const double a = replanned && u_target <= floor + 1e-9 && state.v > 0.0
                       ? state.a_min
                       : std::clamp((u_target - state.v) / tau, state.a_min, state.a_max);
  const double v_end = std::clamp(state.v + a * exec_dt, 0.0, speed_limit);
  // Constant acceleration until the speed saturates, then hold.
  double travelled = exec_dt * (state.v + v_end) / 2.0;
  if (a != 0.0 && v_end != state.v + a * exec_dt) {
    const double t_sat = (v_end - state.v) / a;
    travelled = t_sat * (state.v + v_end) / 2.0 + (exec_dt - t_sat) * v_end;
  }
  VehicleState next = state;
  next.s = state.s - travelled;
  next.v = v_end;
  next.wait_time = state.wait_time + exec_dt;
  return next;
}

}  // namespace coopintersect
