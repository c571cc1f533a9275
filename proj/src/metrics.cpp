#include "coopintersect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <boost/format.hpp>

namespace coopintersect {

double fuel_rate(double v, double a, const VehicleClass& cls, const FuelModel& model) {
  if (v < 0.0) throw std::domain_error("fuel_rate: negative speed");
  const double raw = model.base + model.rolling * v + model.acceleration * v * std::max(a, 0.0);
  return cls.fuel_scale * std::max(raw, model.idle);
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const double rank = std::ceil(q * static_cast<double>(samples.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(samples.size()))) - 1;
  return samples[idx];
}

RunMetrics aggregate(std::span<const Event> events, const MeasurementWindow& window, const FuelModel& model) {
  if (events.empty() || events.back().kind != EventKind::end) {
    throw std::invalid_argument("aggregate: event log is truncated (missing end marker)");
  }
  if (!(window.end > window.start)) throw std::invalid_argument("aggregate: empty measurement window");

  RunMetrics m;
  double ttg_sum = 0.0;
  double ev_sum = 0.0;
  double life_fuel = 0.0;
  double truck_life_fuel = 0.0;
  std::vector<double> plan;
  const auto inside = [&](double t) { return t > window.start && t <= window.end + 1e-9; };

  for (const Event& e : events) {
    switch (e.kind) {
      case EventKind::spawn:
        ++m.spawned;
        break;
      case EventKind::depart:
        if (!inside(e.time)) break;
        ++m.departures;
        ttg_sum += e.value;
        life_fuel += e.extra;
        if (e.cls == ClassKind::emergency) {
          ++m.ev_departures;
          ev_sum += e.value;
        } else if (e.cls == ClassKind::truck) {
          ++m.truck_departures;
          truck_life_fuel += e.extra;
        }
        break;
      case EventKind::fuel:
        if (!inside(e.time)) break;
        m.total_fuel += e.value;
        m.truck_fuel += e.extra;
        break;
      case EventKind::collision:
        ++m.collisions;
        break;
      case EventKind::cycle:
        if (!inside(e.time)) break;
        ++m.cycles;
        if (e.flag) ++m.fallback_cycles;
        plan.push_back(e.extra);
        break;
      case EventKind::end:
        break;
    }
  }

  m.throughput = static_cast<double>(m.departures) / ((window.end - window.start) / 60.0);
  if (m.departures > 0) {
    m.mean_time_to_goal = ttg_sum / static_cast<double>(m.departures);
    m.fuel_per_vehicle = life_fuel / static_cast<double>(m.departures);
  }
  if (m.ev_departures > 0) m.ev_time_to_goal = ev_sum / static_cast<double>(m.ev_departures);
  if (m.truck_departures > 0) m.truck_fuel_per_vehicle = truck_life_fuel / static_cast<double>(m.truck_departures);
  m.total_co2 = model.co2_per_liter * m.total_fuel;
  m.plan_ms_p50 = percentile(plan, 0.5);
  m.plan_ms_p99 = percentile(plan, 0.99);
  m.plan_ms_max = plan.empty() ? 0.0 : *std::max_element(plan.begin(), plan.end());
  return m;
}

void write_events(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) {
    out << boost::format("%.1f ") % e.time;
    switch (e.kind) {
      case EventKind::spawn:
        out << "spawn " << e.vehicle << ' ' << to_string(e.cls) << '\n';
        break;
      case EventKind::depart:
        out << boost::format("depart %d %s %.6f %.9g\n") % e.vehicle % to_string(e.cls) % e.value % e.extra;
        break;
      case EventKind::fuel:
        out << boost::format("fuel %.9g %.9g\n") % e.value % e.extra;
        break;
      case EventKind::collision:
        out << "collision " << (e.code == 0 ? "rear_end " : "lateral ") << e.vehicle << ' ' << e.other << '\n';
        break;
      case EventKind::cycle:
        out << boost::format("cycle %d %d %.9g %d\n") % e.code % e.other % e.value % (e.flag ? 1 : 0);
        break;
      case EventKind::end:
        out << "end\n";
        break;
    }
  }
}

}  // namespace coopintersect
