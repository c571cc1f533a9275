#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "coopintersect/sim.hpp"

using namespace coopintersect;

namespace {

const IntersectionSpec kSpec;

VehicleState car(int id, const char* group, double s, double v) {
  const LaneGroup g = LaneGroup::parse(group);
  return make_vehicle(id, ClassTable::defaults()[ClassKind::passenger], g, kSpec.lane_for(g.intention), s, v, 0.5);
}

Scenario short_scenario(double flow, double duration) {
  Scenario sc;
  sc.arrivals = ArrivalSpec::balanced(flow);
  sc.duration = duration;
  sc.warmup = std::min(30.0, duration / 4.0);
  return sc;
}

long count(const RunResult& r, EventKind kind) {
  return std::count_if(r.events.begin(), r.events.end(), [&](const Event& e) { return e.kind == kind; });
}

}  // namespace

TEST(Arrivals, Validation) {
  ArrivalSpec a = ArrivalSpec::balanced(4000);
  EXPECT_NO_THROW(a.validate());
  EXPECT_DOUBLE_EQ(a.total_flow(), 4000.0);
  a.turn_split = {0.5, 0.5, 0.5};
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a = ArrivalSpec::balanced(4000);
  a.road_flow[2] = -1.0;
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a = ArrivalSpec::balanced(4000);
  a.class_mix = {1.0, -0.5, 0.5};
  EXPECT_THROW(a.validate(), std::invalid_argument);
  EXPECT_THROW((void)ArrivalSpec::unbalanced(4000, 0.0), std::invalid_argument);
}

TEST(Arrivals, UnbalancedSplit) {
  const ArrivalSpec a = ArrivalSpec::unbalanced(5200, 4.0);
  EXPECT_NEAR(a.total_flow(), 5200.0, 1e-9);
  EXPECT_NEAR(a.road_flow[0] / a.road_flow[2], 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(a.road_flow[0], a.road_flow[1]);
  EXPECT_DOUBLE_EQ(a.road_flow[2], a.road_flow[3]);
}

TEST(Spawn, ZeroFlowNeverSpawns) {
  World w;
  w.rng.seed(1);
  const ArrivalSpec none = ArrivalSpec::balanced(0.0);
  for (int k = 0; k < 10000; ++k) EXPECT_TRUE(spawn(w, none, ClassTable::defaults(), 0.1).empty());
  EXPECT_EQ(w.spawned, 0);
}

TEST(Spawn, LongRunRateMatchesFlow) {
  // 3600 veh/hr into a single lane: one arrival per second on average.
  World w;
  w.rng.seed(2024);
  ArrivalSpec a;
  a.road_flow = {3600.0, 0.0, 0.0, 0.0};
  a.turn_split = {0.0, 1.0, 0.0};
  constexpr int ticks = 100000;
  for (int k = 0; k < ticks; ++k) {
    (void)spawn(w, a, ClassTable::defaults(), 0.1);
    // Move everyone downstream at the limit and drop vehicles past the intersection.
    for (auto& sv : w.vehicles) sv.state.s -= 2.0;
    std::erase_if(w.vehicles, [](const SimVehicle& sv) { return sv.state.s < -50.0; });
  }
  const long arrivals = w.spawned + w.pending[0][1];
  EXPECT_NEAR(static_cast<double>(arrivals) / (ticks * 0.1), 1.0, 0.02);
  for (int road = 1; road < kRoadCount; ++road) EXPECT_EQ(w.pending[road][1], 0);
}

TEST(Spawn, BlockedEntryKeepsDemandQueued) {
  World w;
  w.rng.seed(3);
  w.vehicles.push_back({car(100, "0-1", kSpec.control_zone_length, 0.0)});
  ArrivalSpec a;
  a.road_flow = {36000.0, 0.0, 0.0, 0.0};
  a.turn_split = {0.0, 1.0, 0.0};
  long spawned = 0;
  for (int k = 0; k < 200; ++k) spawned += static_cast<long>(spawn(w, a, ClassTable::defaults(), 0.1).size());
  EXPECT_EQ(spawned, 0);
  EXPECT_EQ(w.vehicles.size(), 1u);
  EXPECT_GT(w.pending[0][1], 150);
  const long queued = w.pending[0][1];
  // Once the blocker moves on, the queue drains at most one vehicle per tick.
  w.vehicles.front().state.s = 100.0;
  const auto out = spawn(w, a, ClassTable::defaults(), 0.1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out.front().s, kSpec.control_zone_length);
  EXPECT_LE(out.front().v, kSpec.speed_limit);
  EXPECT_GE(w.pending[0][1], queued - 1);
}

TEST(Spawn, EntrySpeedLetsFollowerStop) {
  World w;
  w.rng.seed(4);
  const double lead_s = kSpec.control_zone_length - 12.0;
  w.vehicles.push_back({car(100, "0-1", lead_s, 0.0)});
  ArrivalSpec a;
  a.road_flow = {36000.0, 0.0, 0.0, 0.0};
  a.turn_split = {0.0, 1.0, 0.0};
  std::vector<VehicleState> out;
  while (out.empty()) out = spawn(w, a, ClassTable::defaults(), 0.1);
  const VehicleState& f = out.front();
  // Gap to the stopped leader is 12 - 5 - 2 = 5 m.
  EXPECT_LE(f.v * f.v / (2.0 * -f.a_min), 5.0 + 1e-9);
}

TEST(Collisions, Examples) {
  const SafetyMargins m;
  EXPECT_TRUE(detect_collisions(std::vector{car(1, "0-1", 40, 10), car(2, "0-1", 55, 10)}, m, 0).empty());
  const auto rear = detect_collisions(std::vector{car(1, "0-1", 40, 10), car(2, "0-1", 44.9, 10)}, m, 1.5);
  ASSERT_EQ(rear.size(), 1u);
  EXPECT_EQ(rear[0].kind, CollisionKind::rear_end);
  EXPECT_EQ(rear[0].first, 1);
  EXPECT_EQ(rear[0].second, 2);
  EXPECT_DOUBLE_EQ(rear[0].time, 1.5);

  const auto lateral = detect_collisions(std::vector{car(1, "0-1", -3, 10), car(2, "1-2", -10, 10)}, m, 0);
  ASSERT_EQ(lateral.size(), 1u);
  EXPECT_EQ(lateral[0].kind, CollisionKind::lateral);
  EXPECT_TRUE(detect_collisions(std::vector{car(1, "0-1", -3, 10), car(2, "2-2", -10, 10)}, m, 0).empty());
  // One of the two is still upstream of the entry line.
  EXPECT_TRUE(detect_collisions(std::vector{car(1, "0-1", 1, 10), car(2, "1-2", -10, 10)}, m, 0).empty());
  // Different roads never produce rear-end contacts.
  EXPECT_TRUE(detect_collisions(std::vector{car(1, "0-1", 40, 10), car(2, "2-1", 41, 10)}, m, 0).empty());
}

TEST(SafeStoppingSpeed, StopsShortOfGap) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> gap(0.0, 80.0);
  std::uniform_real_distribution<double> speed(0.0, 20.0);
  std::uniform_real_distribution<double> brake(2.0, 6.0);
  for (int k = 0; k < 5000; ++k) {
    const double g = gap(rng), v = speed(rng), b = brake(rng);
    const double u = safe_stopping_speed(g, v, b, 0.1);
    ASSERT_GE(u, 0.0);
    const double used = 0.05 * (v + u) + u * u / (2.0 * b) + 0.05 * u;
    if (u > 0.0) {
      ASSERT_LE(used, g + 1e-9);
      ASSERT_NEAR(used, g, 1e-5);
    } else {
      ASSERT_LE(g - 0.05 * v, 1e-6);
    }
  }
}

TEST(Controllers, NamesRoundTrip) {
  for (ControllerKind k : {ControllerKind::coop, ControllerKind::stop_sign, ControllerKind::traffic_light,
                           ControllerKind::actuated_light, ControllerKind::fifo_auction}) {
    EXPECT_EQ(parse_controller(to_string(k)), k);
  }
  EXPECT_THROW((void)parse_controller("roundabout"), std::invalid_argument);
  EXPECT_THROW((void)run_baseline(ControllerKind::coop, short_scenario(1000, 10), 1), std::invalid_argument);
}

TEST(Scenario, Validation) {
  Scenario sc = short_scenario(2000, 60);
  EXPECT_NO_THROW(sc.validate());
  sc.warmup = 70.0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc = short_scenario(2000, 60);
  sc.tick = 0.0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc = short_scenario(2000, 60);
  sc.signal.all_red = 40.0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
}

TEST(Run, TrafficLightWithoutDemand) {
  const RunResult r = run_baseline(ControllerKind::traffic_light, short_scenario(0.0, 120), 1);
  EXPECT_DOUBLE_EQ(r.metrics.throughput, 0.0);
  EXPECT_EQ(r.metrics.spawned, 0);
  EXPECT_TRUE(r.collisions.empty());
}

TEST(Run, StopSignSingleVehicleStops) {
  Scenario sc = short_scenario(0.0, 120);
  sc.arrivals.road_flow = {20.0, 0.0, 0.0, 0.0};
  const RunResult r = run_baseline(ControllerKind::stop_sign, sc, 8);
  long departed = 0;
  for (const auto& e : r.events) {
    if (e.kind != EventKind::depart) continue;
    ++departed;
    EXPECT_GT(e.value, kSpec.control_zone_length / kSpec.speed_limit + sc.stop_sign.min_stop);
  }
  EXPECT_GT(departed, 0);
  EXPECT_TRUE(r.collisions.empty());
}

TEST(Run, VehicleConservation) {
  for (ControllerKind k : {ControllerKind::coop, ControllerKind::traffic_light, ControllerKind::stop_sign}) {
    const RunResult r = run_scenario(k, short_scenario(4000, 90), 5);
    std::set<int> alive;
    std::set<int> gone;
    for (const auto& e : r.events) {
      if (e.kind == EventKind::spawn) {
        ASSERT_TRUE(alive.insert(e.vehicle).second);
        ASSERT_FALSE(gone.count(e.vehicle));
      } else if (e.kind == EventKind::depart) {
        ASSERT_EQ(alive.erase(e.vehicle), 1u) << to_string(k);
        gone.insert(e.vehicle);
      }
    }
    EXPECT_EQ(count(r, EventKind::spawn), static_cast<long>(alive.size() + gone.size()));
    EXPECT_EQ(count(r, EventKind::end), 1);
    EXPECT_GT(gone.size(), 0u);
  }
}

TEST(Run, IdenticalSeedsGiveIdenticalLogs) {
  const Scenario sc = short_scenario(3000, 60);
  for (ControllerKind k : {ControllerKind::coop, ControllerKind::actuated_light, ControllerKind::fifo_auction}) {
    std::ostringstream a, b;
    write_events(a, run_scenario(k, sc, 77).events);
    write_events(b, run_scenario(k, sc, 77).events);
    EXPECT_EQ(a.str(), b.str()) << to_string(k);
    std::ostringstream c;
    write_events(c, run_scenario(k, sc, 78).events);
    EXPECT_NE(a.str(), c.str()) << to_string(k);
  }
}

TEST(Run, CooperativeControlIsCollisionFreeInShortRuns) {
  for (double flow : {2000.0, 6000.0}) {
    const RunResult r = run_scenario(ControllerKind::coop, short_scenario(flow, 120), 11);
    EXPECT_TRUE(r.collisions.empty()) << flow;
    EXPECT_GT(r.metrics.departures, 0);
    EXPECT_EQ(r.metrics.fallback_cycles, 0);
  }
}
