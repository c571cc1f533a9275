#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <stdexcept>

#include "coopintersect/metrics.hpp"
#include "coopintersect/sim.hpp"

using namespace coopintersect;

namespace {

const VehicleClass& passenger() { return ClassTable::defaults()[ClassKind::passenger]; }

Event depart(double t, ClassKind cls, double ttg, double fuel) {
  Event e;
  e.kind = EventKind::depart;
  e.time = t;
  e.cls = cls;
  e.value = ttg;
  e.extra = fuel;
  return e;
}

Event end_marker(double t) {
  Event e;
  e.kind = EventKind::end;
  e.time = t;
  return e;
}

}  // namespace

TEST(Fuel, Examples) {
  EXPECT_NEAR(fuel_rate(0, 0, passenger()), 1.5e-4, 1e-15);
  EXPECT_NEAR(fuel_rate(20, 0, passenger()), 6.0e-4, 1e-15);
  // Braking costs the same as cruising: only the speed term remains.
  EXPECT_DOUBLE_EQ(fuel_rate(12, -3.0, passenger()), fuel_rate(12, 0.0, passenger()));
  EXPECT_NEAR(fuel_rate(10, 2.0, passenger()), 1.0e-4 + 2.5e-4 + 2.0e-3, 1e-15);
  const VehicleClass& truck = ClassTable::defaults()[ClassKind::truck];
  EXPECT_NEAR(fuel_rate(20, 0, truck), truck.fuel_scale * 6.0e-4, 1e-15);
  EXPECT_THROW((void)fuel_rate(-1, 0, passenger()), std::domain_error);
}

TEST(Fuel, NonDecreasingInAcceleration) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> v(0.0, 20.0), a(-5.0, 3.0);
  for (int k = 0; k < 10000; ++k) {
    const double speed = v(rng);
    double a1 = a(rng), a2 = a(rng);
    if (a1 > a2) std::swap(a1, a2);
    ASSERT_LE(fuel_rate(speed, a1, passenger()), fuel_rate(speed, a2, passenger()));
  }
}

TEST(Aggregate, ThroughputUnitsAndMeans) {
  std::vector<Event> log;
  for (int k = 0; k < 90; ++k) log.push_back(depart(60.0 + 60.0 * (k + 1) / 90.0, ClassKind::passenger, 10.0, 0.01));
  log.push_back(depart(100.0, ClassKind::emergency, 4.0, 0.02));
  log.push_back(depart(110.0, ClassKind::truck, 16.0, 0.07));
  log.push_back(depart(30.0, ClassKind::truck, 99.0, 9.0));  // inside the warmup, ignored
  log.push_back(end_marker(120.0));
  const RunMetrics m = aggregate(log, {60.0, 120.0});
  EXPECT_EQ(m.departures, 92);
  EXPECT_DOUBLE_EQ(m.throughput, 92.0);
  EXPECT_NEAR(m.mean_time_to_goal, (900.0 + 4.0 + 16.0) / 92.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.ev_time_to_goal, 4.0);
  EXPECT_EQ(m.truck_departures, 1);
  EXPECT_NEAR(m.truck_fuel_per_vehicle, 0.07, 1e-15);
  EXPECT_NEAR(m.fuel_per_vehicle, (0.9 + 0.02 + 0.07) / 92.0, 1e-12);

  std::vector<Event> half{depart(30.0, ClassKind::passenger, 5.0, 0.0), end_marker(120.0)};
  EXPECT_DOUBLE_EQ(aggregate(half, {0.0, 120.0}).throughput, 0.5);
}

TEST(Aggregate, EmptyRunIsAllZero) {
  const std::vector<Event> log{end_marker(60.0)};
  const RunMetrics m = aggregate(log, {0.0, 60.0});
  EXPECT_DOUBLE_EQ(m.throughput, 0.0);
  EXPECT_DOUBLE_EQ(m.mean_time_to_goal, 0.0);
  EXPECT_DOUBLE_EQ(m.total_fuel, 0.0);
  EXPECT_DOUBLE_EQ(m.total_co2, 0.0);
  EXPECT_EQ(m.collisions, 0);
  EXPECT_DOUBLE_EQ(m.plan_ms_p99, 0.0);
}

TEST(Aggregate, FuelAndCarbon) {
  std::vector<Event> log;
  for (int k = 1; k <= 100; ++k) {
    Event e;
    e.kind = EventKind::fuel;
    e.time = 0.1 * k;
    e.value = 0.002;
    e.extra = 0.0005;
    log.push_back(e);
  }
  log.push_back(end_marker(10.0));
  const RunMetrics m = aggregate(log, {5.0, 10.0});
  EXPECT_NEAR(m.total_fuel, 50 * 0.002, 1e-12);
  EXPECT_NEAR(m.truck_fuel, 50 * 0.0005, 1e-12);
  EXPECT_DOUBLE_EQ(m.total_co2, 2.3 * m.total_fuel);
}

TEST(Aggregate, PlanningTelemetry) {
  std::vector<Event> log;
  for (int k = 1; k <= 100; ++k) {
    Event e;
    e.kind = EventKind::cycle;
    e.time = 0.1 * k;
    e.extra = k;  // milliseconds
    e.flag = k % 25 == 0;
    log.push_back(e);
  }
  Event c;
  c.kind = EventKind::collision;
  log.push_back(c);
  log.push_back(end_marker(10.0));
  const RunMetrics m = aggregate(log, {0.0, 10.0});
  EXPECT_EQ(m.cycles, 100);
  EXPECT_EQ(m.fallback_cycles, 4);
  EXPECT_DOUBLE_EQ(m.plan_ms_p50, 50.0);
  EXPECT_DOUBLE_EQ(m.plan_ms_p99, 99.0);
  EXPECT_DOUBLE_EQ(m.plan_ms_max, 100.0);
  EXPECT_EQ(m.collisions, 1);
}

TEST(Aggregate, RejectsTruncatedLogsAndEmptyWindows) {
  std::vector<Event> log{depart(1.0, ClassKind::passenger, 5.0, 0.0)};
  EXPECT_THROW((void)aggregate(log, {0.0, 10.0}), std::invalid_argument);
  EXPECT_THROW((void)aggregate(std::vector<Event>{}, {0.0, 10.0}), std::invalid_argument);
  log.push_back(end_marker(10.0));
  EXPECT_THROW((void)aggregate(log, {10.0, 10.0}), std::invalid_argument);
}

TEST(Percentile, NearestRank) {
  EXPECT_DOUBLE_EQ(percentile({}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(percentile({3.0}, 0.99), 3.0);
  EXPECT_DOUBLE_EQ(percentile({5, 1, 4, 2, 3}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile({5, 1, 4, 2, 3}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({5, 1, 4, 2, 3}, 1.0), 5.0);
}

TEST(EventLog, OneLinePerEvent) {
  std::vector<Event> log{depart(12.3, ClassKind::truck, 9.5, 0.01), end_marker(20.0)};
  std::ostringstream out;
  write_events(out, log);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("depart"), std::string::npos);
  EXPECT_NE(text.find("truck"), std::string::npos);
}

TEST(TimeToGoal, FreeFlowCrossing) {
  // Sparse traffic on one arm: every vehicle crosses at the limit, 7.5 s in the
  // control zone plus (length + lateral margin) / 20 s in the conflict zone.
  Scenario sc;
  sc.arrivals.road_flow = {30.0, 0.0, 0.0, 0.0};
  sc.duration = 300.0;
  sc.warmup = 1.0;
  const RunResult r = run_scenario(ControllerKind::coop, sc, 3);
  const ClassTable classes = ClassTable::defaults();
  long seen = 0;
  for (const auto& e : r.events) {
    if (e.kind != EventKind::depart) continue;
    ++seen;
    const double expected = 150.0 / 20.0 + (classes[e.cls].length + 25.0) / 20.0;
    EXPECT_NEAR(e.value, expected, 0.1 + 1e-9);
  }
  EXPECT_GT(seen, 0);
}
