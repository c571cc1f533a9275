#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "coopintersect/vehicle.hpp"

namespace coopintersect {

struct FuelModel {
  double base = 1.0e-4;          // L/s
  double rolling = 2.5e-5;       // L/m
  double acceleration = 1.0e-4;  // L s^2 / m^2 per (v * a)
  double idle = 1.5e-4;          // L/s floor
  double co2_per_liter = 2.3;    // kg/L
};

/// Surrogate fuel use in liters per second; deceleration is free beyond the rolling term.
[[nodiscard]] double fuel_rate(double v, double a, const VehicleClass& cls, const FuelModel& model = {});

enum class EventKind { spawn, depart, fuel, collision, cycle, end };

/// One record of a run's event stream. Field meaning depends on the kind:
///  spawn:     vehicle, cls
///  depart:    vehicle, cls, value = time to goal, extra = lifetime fuel
///  fuel:      value = liters this tick (all vehicles), extra = liters this tick (trucks)
///  collision: vehicle, other, code = 0 rear-end / 1 lateral
///  cycle:     code = snapshot size, other = candidates, value = objective, extra = plan ms, flag = fallback
///  end:       marks a complete log
struct Event {
  EventKind kind = EventKind::spawn;
  double time = 0.0;
  int vehicle = -1;
  int other = -1;
  int code = 0;
  ClassKind cls = ClassKind::passenger;
  double value = 0.0;
  double extra = 0.0;
  bool flag = false;
};

struct RunMetrics {
  double throughput = 0.0;         // departures per minute inside the measurement window
  double mean_time_to_goal = 0.0;  // seconds
  double ev_time_to_goal = 0.0;
  double total_fuel = 0.0;         // liters burned by all vehicles inside the window
  double truck_fuel = 0.0;
  double total_co2 = 0.0;          // kg
  double fuel_per_vehicle = 0.0;   // mean lifetime fuel of departed vehicles
  double truck_fuel_per_vehicle = 0.0;
  long departures = 0;
  long ev_departures = 0;
  long truck_departures = 0;
  long spawned = 0;
  long collisions = 0;
  long cycles = 0;
  long fallback_cycles = 0;
  double plan_ms_p50 = 0.0;
  double plan_ms_p99 = 0.0;
  double plan_ms_max = 0.0;
};

struct MeasurementWindow {
  double start = 0.0;  // warmup end
  double end = 0.0;    // run end
};

/// Throws std::invalid_argument when the log lacks its end marker or the window is empty.
[[nodiscard]] RunMetrics aggregate(std::span<const Event> events, const MeasurementWindow& window,
                                   const FuelModel& model = {});

/// Nearest-rank percentile of unsorted samples; 0 for an empty set.
[[nodiscard]] double percentile(std::vector<double> samples, double q);

/// Plain-text event log, one event per line. Wall-clock fields are omitted so
/// identical runs produce identical bytes.
void write_events(std::ostream& out, std::span<const Event> events);

}  // namespace coopintersect
