#include "coopintersect/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "coopintersect/baselines.hpp"

namespace coopintersect {

namespace {

void check_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + " has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + " must sum to 1");
}

template <class Dist>
std::size_t draw(std::mt19937_64& rng, const Dist& probs) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

// Committed vehicles clear the conflict zone toward v-bar, closing on a same-lane
// leader no faster than the spare gap allows over one planning step.
void committed_targets(const World& world, double plan_dt, std::vector<double>& targets) {
  const double vbar = world.geometry.speed_limit;
  targets.assign(world.vehicles.size(), vbar);
  for (std::size_t k = 0; k < world.vehicles.size(); ++k) {
    const VehicleState& st = world.vehicles[k].state;
    if (st.s > 0.0) continue;
    const VehicleState* lead = nullptr;
    for (const auto& other : world.vehicles) {
      const VehicleState& o = other.state;
      if (o.id == st.id || !o.same_lane(st) || o.s > st.s) continue;
      if (!lead || o.s > lead->s) lead = &o;
    }
    if (!lead) continue;
    const double spare = st.s - lead->s - lead->length - world.margins.rear;
    targets[k] = std::clamp(lead->v + spare / plan_dt, 0.0, vbar);
  }
}

}  // namespace

void ArrivalSpec::validate() const {
  for (double f : road_flow) {
    if (!(f >= 0.0)) throw std::invalid_argument("road flows must be non-negative");
  }
  check_distribution(turn_split, "turn split");
  check_distribution(class_mix, "class mix");
}

double ArrivalSpec::total_flow() const noexcept { return std::accumulate(road_flow.begin(), road_flow.end(), 0.0); }

ArrivalSpec ArrivalSpec::balanced(double total_flow) { return unbalanced(total_flow, 1.0); }

ArrivalSpec ArrivalSpec::unbalanced(double total_flow, double ratio) {
  if (!(total_flow >= 0.0)) throw std::invalid_argument("total flow must be non-negative");
  if (!(ratio > 0.0)) throw std::invalid_argument("flow ratio must be positive");
  ArrivalSpec spec;
  const double vertical = total_flow / (2.0 * (ratio + 1.0));
  spec.road_flow = {ratio * vertical, ratio * vertical, vertical, vertical};
  return spec;
}

Snapshot World::snapshot() const {
  Snapshot snap;
  for (const auto& sv : vehicles) {
    if (sv.state.s > 0.0) {
      snap.control.push_back(sv.state);
    } else {
      snap.committed.push_back(sv.state);
    }
  }
  return snap;
}

double safe_stopping_speed(double gap, double v, double braking, double dt) {
  // dt (v + u) / 2 + u^2 / (2b) + u dt / 2 <= gap
  const double room = gap - 0.5 * dt * v - 1e-6;
  if (room <= 0.0) return 0.0;
  const double bd = braking * dt;
  return std::max(0.0, -bd + std::sqrt(bd * bd + 2.0 * braking * room));
}

std::vector<VehicleState> spawn(World& world, const ArrivalSpec& arrivals, const ClassTable& classes, double dt) {
  std::vector<VehicleState> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lc = world.geometry.control_zone_length;
  for (int road = 0; road < kRoadCount; ++road) {
    for (int in = 0; in < kIntentionCount; ++in) {
      const double rate = arrivals.road_flow[static_cast<std::size_t>(road)] *
                          arrivals.turn_split[static_cast<std::size_t>(in)] / 3600.0;
      if (rate > 0.0 && unit(world.rng) < rate * dt) ++world.pending[road][in];
      if (world.pending[road][in] == 0) continue;

      const auto intention = static_cast<Intention>(in);
      const int lane = world.geometry.lane_for(intention);
      const VehicleState* last = nullptr;
      for (const auto& sv : world.vehicles) {
        if (sv.state.road() == road && sv.state.lane == lane && (!last || sv.state.s > last->s)) last = &sv.state;
      }
      const ClassKind cls_kind = static_cast<ClassKind>(draw(world.rng, arrivals.class_mix));
      const VehicleClass& cls = classes[cls_kind];
      double speed = world.geometry.speed_limit;
      if (last) {
        const double gap = lc - last->s - last->length - world.margins.rear;
        if (gap < 0.0) continue;  // entry blocked; the arrival stays queued
        // Stop behind a leader braking at its limit, and close no faster than one planning step allows.
        const double lead_stop = last->v * last->v / (2.0 * -last->a_min);
        speed = std::min({speed, std::sqrt(2.0 * -cls.a_min * (gap + lead_stop)), last->v + gap});
      }
      const double preference = unit(world.rng);
      --world.pending[road][in];
      SimVehicle sv;
      sv.state = make_vehicle(world.next_id++, cls, assign_group(road, in), lane, lc, speed, preference);
      sv.spawn_time = world.time;
      world.vehicles.push_back(sv);
      ++world.spawned;
      out.push_back(sv.state);
    }
  }
  return out;
}

std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> vehicles, const SafetyMargins& margins,
                                              double time) {
  std::vector<CollisionEvent> events;
  std::map<std::pair<int, int>, std::vector<const VehicleState*>> lanes;
  for (const auto& st : vehicles) lanes[{st.road(), st.lane}].push_back(&st);
  for (auto& [key, members] : lanes) {
    std::sort(members.begin(), members.end(), [](const VehicleState* a, const VehicleState* b) {
      return a->s != b->s ? a->s < b->s : a->id < b->id;
    });
    for (std::size_t k = 0; k + 1 < members.size(); ++k) {
      const VehicleState& lead = *members[k];
      const VehicleState& follow = *members[k + 1];
      if (follow.s - lead.s - lead.length < 0.0) {
        events.push_back({CollisionKind::rear_end, lead.id, follow.id, time});
      }
    }
  }
  const auto inside = [&](const VehicleState& st) { return st.s <= 0.0 && st.s > -(st.length + margins.lateral); };
  const ConflictTable& table = ConflictTable::standard();
  for (std::size_t a = 0; a < vehicles.size(); ++a) {
    if (!inside(vehicles[a])) continue;
    for (std::size_t b = a + 1; b < vehicles.size(); ++b) {
      if (!inside(vehicles[b]) || !table.conflicts(vehicles[a].group, vehicles[b].group)) continue;
      const int lo = std::min(vehicles[a].id, vehicles[b].id);
      const int hi = std::max(vehicles[a].id, vehicles[b].id);
      events.push_back({CollisionKind::lateral, lo, hi, time});
    }
  }
  return events;
}

std::string_view to_string(ControllerKind kind) noexcept {
  switch (kind) {
    case ControllerKind::coop:
      return "coop";
    case ControllerKind::stop_sign:
      return "stop_sign";
    case ControllerKind::traffic_light:
      return "traffic_light";
    case ControllerKind::actuated_light:
      return "actuated_light";
    case ControllerKind::fifo_auction:
      return "fifo_auction";
  }
  return "unknown";
}

ControllerKind parse_controller(std::string_view name) {
  for (auto k : {ControllerKind::coop, ControllerKind::stop_sign, ControllerKind::traffic_light,
                 ControllerKind::actuated_light, ControllerKind::fifo_auction}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown controller: " + std::string(name));
}

void SignalTiming::validate() const {
  if (!(cycle > 2.0 * all_red) || all_red < 0.0) throw std::invalid_argument("signal cycle must exceed the all-red time");
  if (!(phase_a_share > 0.0 && phase_a_share < 1.0)) throw std::invalid_argument("phase share must lie in (0, 1)");
  if (!(min_green > 0.0 && max_green >= min_green)) throw std::invalid_argument("invalid actuated green bounds");
  if (!(extension_headway >= 0.0) || !(critical_gap >= 0.0)) throw std::invalid_argument("negative signal headway");
}

double SignalTiming::effective_share(const ArrivalSpec& arrivals) const {
  const double total = arrivals.total_flow();
  if (!demand_split || total <= 0.0) return phase_a_share;
  // Keep both phases alive so a light arm still gets served.
  return std::clamp((arrivals.road_flow[0] + arrivals.road_flow[1]) / total, 0.1, 0.9);
}

void StopSignRules::validate() const {
  if (!(min_stop >= 0.0)) throw std::invalid_argument("minimum stop time must be non-negative");
}

void Scenario::validate() const {
  geometry.validate();
  margins.validate();
  arrivals.validate();
  coordinator.validate();
  signal.validate();
  stop_sign.validate();
  if (!(tick > 0.0)) throw std::invalid_argument("tick must be positive");
  if (!(duration > warmup) || warmup < 0.0) throw std::invalid_argument("duration must exceed the warmup");
}

RunResult run_scenario(ControllerKind kind, const Scenario& input, std::uint64_t seed) {
  input.validate();
  Scenario scenario = input;
  // The planner shares the world's geometry.
  scenario.coordinator.qp.speed_limit = scenario.geometry.speed_limit;
  scenario.coordinator.qp.margins = scenario.margins;
  scenario.coordinator.auction.c2 = scenario.geometry.control_zone_length;
  if (kind == ControllerKind::fifo_auction) scenario.coordinator.bid_rule = BidRule::arrival_order;

  World world;
  world.geometry = scenario.geometry;
  world.margins = scenario.margins;
  world.rng.seed(seed);

  const bool planned = kind == ControllerKind::coop || kind == ControllerKind::fifo_auction;
  std::unique_ptr<BaselineController> baseline;
  if (!planned) baseline = make_baseline(kind, scenario);

  RunResult result;
  std::vector<Event>& events = result.events;
  std::set<std::tuple<int, int, int>> reported;
  const double dt = scenario.tick;
  const double vbar = scenario.geometry.speed_limit;
  const auto steps = static_cast<long>(std::llround(scenario.duration / dt));
  const ClassTable& classes = scenario.coordinator.classes;
  std::vector<double> targets;

  for (long step = 0; step < steps; ++step) {
    world.time = static_cast<double>(step) * dt;
    for (const auto& st : spawn(world, scenario.arrivals, classes, dt)) {
      events.push_back({EventKind::spawn, world.time, st.id, -1, 0, st.cls});
    }

    double plan_dt = dt;
    if (planned) {
      plan_dt = scenario.coordinator.qp.plan_dt;
      const CycleResult cycle = control_cycle(world.snapshot(), scenario.coordinator, seed, step);
      committed_targets(world, plan_dt, targets);
      std::map<int, double> command;
      for (const auto& c : cycle.commands) command[c.vehicle_id] = c.speed;
      for (std::size_t k = 0; k < world.vehicles.size(); ++k) {
        const auto it = command.find(world.vehicles[k].state.id);
        if (it != command.end()) targets[k] = it->second;
      }
      Event e{EventKind::cycle, world.time};
      e.code = cycle.record.snapshot_size;
      e.other = cycle.record.candidates;
      e.value = cycle.record.objective;
      e.extra = cycle.record.plan_ms;
      e.flag = cycle.record.fallback;
      events.push_back(e);
    } else {
      baseline->update(world, dt, targets);
    }

    const double now = world.time + dt;
    double tick_fuel = 0.0;
    double tick_truck = 0.0;
    for (std::size_t k = 0; k < world.vehicles.size(); ++k) {
      SimVehicle& sv = world.vehicles[k];
      const double v0 = sv.state.v;
      sv.state = track_command(sv.state, targets[k], dt, plan_dt, vbar);
      const double accel = (sv.state.v - v0) / dt;
      const double burned = fuel_rate(sv.state.v, accel, classes[sv.state.cls], scenario.fuel) * dt;
      sv.fuel += burned;
      tick_fuel += burned;
      if (sv.state.cls == ClassKind::truck) tick_truck += burned;
    }
    world.time = now;

    std::vector<VehicleState> states;
    states.reserve(world.vehicles.size());
    for (const auto& sv : world.vehicles) states.push_back(sv.state);
    for (const auto& c : detect_collisions(states, world.margins, now)) {
      const auto key = std::make_tuple(static_cast<int>(c.kind), c.first, c.second);
      if (!reported.insert(key).second) continue;
      result.collisions.push_back(c);
      Event e{EventKind::collision, now, c.first, c.second, c.kind == CollisionKind::rear_end ? 0 : 1};
      events.push_back(e);
    }

    std::vector<SimVehicle> kept;
    kept.reserve(world.vehicles.size());
    for (auto& sv : world.vehicles) {
      if (sv.state.s <= -(sv.state.length + world.margins.lateral)) {
        ++world.departed;
        events.push_back({EventKind::depart, now, sv.state.id, -1, 0, sv.state.cls, now - sv.spawn_time, sv.fuel});
      } else {
        kept.push_back(sv);
      }
    }
    world.vehicles = std::move(kept);
    events.push_back({EventKind::fuel, now, -1, -1, 0, ClassKind::passenger, tick_fuel, tick_truck});
  }
  events.push_back({EventKind::end, world.time});
  result.metrics = aggregate(events, {scenario.warmup, scenario.duration}, scenario.fuel);
  return result;
}

RunResult run_baseline(ControllerKind kind, const Scenario& scenario, std::uint64_t seed) {
  if (kind == ControllerKind::coop) throw std::invalid_argument("coop is not a baseline controller");
  return run_scenario(kind, scenario, seed);
}

}  // namespace coopintersect
