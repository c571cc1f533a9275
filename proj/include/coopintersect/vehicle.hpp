#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "coopintersect/geometry.hpp"

namespace coopintersect {

enum class ClassKind : std::uint8_t { passenger = 0, truck = 1, emergency = 2 };
inline constexpr int kClassCount = 3;

[[nodiscard]] std::string_view to_string(ClassKind kind) noexcept;
[[nodiscard]] ClassKind parse_class(std::string_view name);

struct Range {
  double low = 0.0;
  double high = 0.0;
  /// low + t * (high - low)
  [[nodiscard]] constexpr double lerp(double t) const noexcept { return low + t * (high - low); }
};

struct VehicleClass {
  ClassKind kind = ClassKind::passenger;
  double length = 5.0;
  double a_max = 2.6;
  double a_min = -4.5;
  Range assertiveness{1.0, 5.0};  // bidding bounds for the assertiveness feature
  double fuel_scale = 1.0;
  Range speed_priority{0.5, 2.0};      // P^s bounds
  Range variation_priority{0.5, 2.0};  // P^v bounds

  void validate() const;
};

/// Per-class parameter table, indexed by ClassKind.
struct ClassTable {
  std::array<VehicleClass, kClassCount> classes;

  [[nodiscard]] static ClassTable defaults();
  [[nodiscard]] const VehicleClass& operator[](ClassKind k) const noexcept {
    return classes[static_cast<std::size_t>(k)];
  }
  [[nodiscard]] VehicleClass& operator[](ClassKind k) noexcept {
    return classes[static_cast<std::size_t>(k)];
  }
};

struct SafetyMargins {
  double rear = 2.0;      // M_sr
  double lateral = 25.0;  // M_sl
  void validate() const;
};

/// Full per-vehicle state. `s` is the along-lane distance to the conflict-zone
/// entry line; it goes negative while the vehicle crosses the conflict zone.
struct VehicleState {
  int id = 0;
  double s = 0.0;
  double v = 0.0;
  int lane = 0;
  double wait_time = 0.0;
  ClassKind cls = ClassKind::passenger;
  double preference = 0.5;  // d_i in [0, 1]
  LaneGroup group{};
  double length = 5.0;
  double a_max = 2.6;
  double a_min = -4.5;

  [[nodiscard]] int road() const noexcept { return group.road; }
  [[nodiscard]] bool same_lane(const VehicleState& o) const noexcept {
    return group.road == o.group.road && lane == o.lane;
  }
};

/// Builds a state with the kinematic limits of its class.
[[nodiscard]] VehicleState make_vehicle(int id, const VehicleClass& cls, LaneGroup group, int lane,
                                        double s, double v, double preference);

/// Trapezoidal position update with the commanded speed reached at the end of dt.
/// Throws std::domain_error when u lies outside the reachable band.
[[nodiscard]] VehicleState step_position(const VehicleState& state, double u, double dt,
                                         double speed_limit);

/// Low-level tracking controller: constant acceleration
/// clamp((u_target - v) / tau, a_min, a_max) held for exec_dt, end speed kept in [0, v-bar].
/// tau is plan_dt, except that when exec_dt < plan_dt slowing down uses plan_dt / 2 and a
/// target at or below max(0, v + a_min plan_dt) brakes at a_min.
[[nodiscard]] VehicleState track_command(const VehicleState& state, double u_target, double exec_dt,
                                         double plan_dt, double speed_limit);

}  // namespace coopintersect
