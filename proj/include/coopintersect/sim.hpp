#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include "coopintersect/coordinator.hpp"
#include "coopintersect/metrics.hpp"

namespace coopintersect {

struct ArrivalSpec {
  std::array<double, kRoadCount> road_flow{};  // veh/hr per arm
  std::array<double, kIntentionCount> turn_split{0.25, 0.5, 0.25};  // right, straight, left
  std::array<double, kClassCount> class_mix{0.90, 0.08, 0.02};      // passenger, truck, emergency

  void validate() const;
  [[nodiscard]] double total_flow() const noexcept;

  [[nodiscard]] static ArrivalSpec balanced(double total_flow);
  /// Roads 0 and 1 form the horizontal axis and carry `ratio` times the flow of roads 2 and 3.
  [[nodiscard]] static ArrivalSpec unbalanced(double total_flow, double ratio);
};

struct SimVehicle {
  VehicleState state;
  double spawn_time = 0.0;
  double fuel = 0.0;
  bool granted = false;       // baselines: permission to enter the conflict zone
  double stopped_since = -1;  // stop sign: time the vehicle came to rest at the line
};

enum class CollisionKind { rear_end, lateral };

struct CollisionEvent {
  CollisionKind kind = CollisionKind::rear_end;
  int first = 0;
  int second = 0;
  double time = 0.0;
};

struct World {
  IntersectionSpec geometry;
  SafetyMargins margins;
  double time = 0.0;
  std::vector<SimVehicle> vehicles;
  int next_id = 0;
  std::array<std::array<long, kIntentionCount>, kRoadCount> pending{};  // arrivals waiting for a free entry
  long spawned = 0;
  long departed = 0;
  std::mt19937_64 rng;

  [[nodiscard]] bool in_conflict_zone(const VehicleState& st) const noexcept {
    return st.s <= 0.0 && st.s > -(st.length + margins.lateral);
  }
  /// Control-zone vehicles (s > 0) become decision variables; the rest are committed.
  [[nodiscard]] Snapshot snapshot() const;
};

/// Largest end-of-tick speed u such that, after moving dt * (v + u) / 2 and braking
/// from u at deceleration `braking`, the vehicle stops at least u * dt / 2 short of `gap`.
[[nodiscard]] double safe_stopping_speed(double gap, double v, double braking, double dt);

/// Bernoulli arrivals per road and intention; a blocked entry keeps the arrival pending.
/// Spawned vehicles are appended to the world and also returned.
std::vector<VehicleState> spawn(World& world, const ArrivalSpec& arrivals, const ClassTable& classes, double dt);

/// Contacts in the current state: same-lane overlap, or two conflicting groups inside the conflict zone.
[[nodiscard]] std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> vehicles,
                                                            const SafetyMargins& margins, double time);

enum class ControllerKind { coop, stop_sign, traffic_light, actuated_light, fifo_auction };

[[nodiscard]] std::string_view to_string(ControllerKind kind) noexcept;
[[nodiscard]] ControllerKind parse_controller(std::string_view name);

struct SignalTiming {
  double cycle = 60.0;
  double all_red = 4.0;
  double phase_a_share = 0.5;  // share of the green time given to roads 0 and 1
  bool demand_split = true;    // fixed signal: derive phase_a_share from the arm flows instead
  double min_green = 5.0;
  double max_green = 80.0;
  double extension_headway = 3.0;  // actuated: extend while an approach is this close in time
  double critical_gap = 4.0;       // permissive left turns yield to opposing arrivals within this time

  void validate() const;
  /// Share of roads 0 and 1 in the total demand when demand_split is set, else phase_a_share.
  [[nodiscard]] double effective_share(const ArrivalSpec& arrivals) const;
};

struct StopSignRules {
  double min_stop = 1.0;
  void validate() const;
};

struct Scenario {
  IntersectionSpec geometry;
  SafetyMargins margins;
  ArrivalSpec arrivals;
  CoordinatorConfig coordinator;
  SignalTiming signal;
  StopSignRules stop_sign;
  FuelModel fuel;
  double duration = 600.0;
  double warmup = 120.0;
  double tick = 0.1;

  void validate() const;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<Event> events;
  std::vector<CollisionEvent> collisions;
};

[[nodiscard]] RunResult run_scenario(ControllerKind kind, const Scenario& scenario, std::uint64_t seed);

/// run_scenario restricted to the comparison controllers; throws for coop.
[[nodiscard]] RunResult run_baseline(ControllerKind kind, const Scenario& scenario, std::uint64_t seed);

}  // namespace coopintersect
