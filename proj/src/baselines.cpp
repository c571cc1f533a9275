#include "coopintersect/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace coopintersect {

SignalState fixed_signal(const SignalTiming& timing, double time) {
  const double green = timing.cycle - 2.0 * timing.all_red;
  const double green_a = timing.phase_a_share * green;
  const double green_b = green - green_a;
  const double t = std::fmod(std::max(time, 0.0), timing.cycle);
  SignalState s;
  if (t < green_a) {
    s.phase_a_green = true;
  } else if (t >= green_a + timing.all_red && t < green_a + timing.all_red + green_b) {
    s.phase_b_green = true;
  }
  return s;
}

SignalState ActuatedSignal::state() const noexcept {
  SignalState s;
  if (!clearing_) {
    s.phase_a_green = serving_a_;
    s.phase_b_green = !serving_a_;
  }
  return s;
}

SignalState ActuatedSignal::step(double dt, bool green_demand, bool red_demand) {
  elapsed_ += dt;
  if (clearing_) {
    if (elapsed_ >= timing_.all_red - 1e-9) {
      clearing_ = false;
      serving_a_ = !serving_a_;
      elapsed_ = 0.0;
    }
  } else if (elapsed_ >= timing_.min_green - 1e-9 && red_demand &&
             (!green_demand || elapsed_ >= timing_.max_green - 1e-9)) {
    clearing_ = true;
    elapsed_ = 0.0;
  }
  return state();
}

namespace {

double braking_of(const VehicleState& st) { return -st.a_min; }

// Shared gate logic: vehicles queue at the entry line until granted, then cross
// under car following only. A grant reserves the conflict zone against every
// conflicting group until the holder leaves it.
class GateController : public BaselineController {
 public:
  explicit GateController(const Scenario& scenario) : scenario_(scenario) {}

  void update(World& world, double dt, std::vector<double>& targets) override {
    auto& vehicles = world.vehicles;
    lanes_.clear();
    for (std::size_t k = 0; k < vehicles.size(); ++k) {
      lanes_[{vehicles[k].state.road(), vehicles[k].state.lane}].push_back(k);
    }
    for (auto& [key, idx] : lanes_) {
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = vehicles[a].state;
        const auto& sb = vehicles[b].state;
        return sa.s != sb.s ? sa.s < sb.s : sa.id < sb.id;
      });
    }

    // Anything past the line holds the zone, granted or not.
    for (auto& sv : vehicles) {
      if (sv.state.s <= 0.0) sv.granted = true;
    }

    before_grants(world, dt);

    std::vector<std::size_t> requests;
    for (auto& [key, idx] : lanes_) {
      for (std::size_t k : idx) {
        SimVehicle& sv = vehicles[k];
        if (sv.granted) continue;
        const VehicleState& st = sv.state;
        const double reach = st.v * st.v / (2.0 * braking_of(st)) + st.v * dt + 2.0;
        if (st.s <= reach) requests.push_back(k);
        break;  // only the front ungranted vehicle of a lane may ask
      }
    }
    order_requests(world, requests);

    std::vector<LaneGroup> reserved;
    for (const auto& sv : vehicles) {
      if (sv.granted) reserved.push_back(sv.state.group);
    }
    std::vector<LaneGroup> waiting_ahead;
    const ConflictTable& table = ConflictTable::standard();
    const auto clashes = [&](LaneGroup g, const std::vector<LaneGroup>& set) {
      return std::any_of(set.begin(), set.end(), [&](LaneGroup o) { return table.conflicts(g, o); });
    };
    for (std::size_t k : requests) {
      SimVehicle& sv = vehicles[k];
      if (may_enter(world, sv) && !clashes(sv.state.group, reserved) &&
          !(keeps_arrival_order() && clashes(sv.state.group, waiting_ahead))) {
        sv.granted = true;
        reserved.push_back(sv.state.group);
      } else {
        waiting_ahead.push_back(sv.state.group);
      }
    }

    // Target speeds: car following plus the entry line for ungranted vehicles.
    targets.assign(vehicles.size(), scenario_.geometry.speed_limit);
    for (auto& [key, idx] : lanes_) {
      for (std::size_t p = 0; p < idx.size(); ++p) {
        const SimVehicle& sv = vehicles[idx[p]];
        const VehicleState& st = sv.state;
        double target = scenario_.geometry.speed_limit;
        if (p > 0) {
          const VehicleState& lead = vehicles[idx[p - 1]].state;
          const double gap = st.s - lead.s - lead.length - scenario_.margins.rear;
          target = std::min(target, safe_stopping_speed(gap, st.v, braking_of(st), dt));
        }
        if (!sv.granted) target = std::min(target, safe_stopping_speed(st.s, st.v, braking_of(st), dt));
        targets[idx[p]] = target;
      }
    }
  }

 protected:
  virtual void before_grants(World& world, double dt) = 0;
  virtual void order_requests(const World& world, std::vector<std::size_t>& requests) = 0;
  virtual bool may_enter(const World& world, const SimVehicle& sv) = 0;
  virtual bool keeps_arrival_order() const { return false; }

  const Scenario& scenario_;
  std::map<std::pair<int, int>, std::vector<std::size_t>> lanes_;
};

class SignalController : public GateController {
 public:
  SignalController(const Scenario& scenario, bool actuated)
      : GateController(scenario), actuated_(actuated), timing_(scenario.signal), signal_(scenario.signal) {
    timing_.phase_a_share = scenario.signal.effective_share(scenario.arrivals);
  }

 protected:
  void before_grants(World& world, double dt) override {
    if (!actuated_) {
      state_ = fixed_signal(timing_, world.time);
      return;
    }
    bool green_demand = false;
    bool red_demand = false;
    for (const auto& sv : world.vehicles) {
      const VehicleState& st = sv.state;
      if (sv.granted || st.s <= 0.0) continue;
      const bool on_green = (st.road() < 2) == signal_.serving_a();
      if (on_green) {
        const double eta = st.s / std::max(st.v, 0.1);
        if (eta <= scenario_.signal.extension_headway || st.s <= 10.0) green_demand = true;
      } else {
        red_demand = true;
      }
    }
    state_ = signal_.step(dt, green_demand, red_demand);
  }

  void order_requests(const World& world, std::vector<std::size_t>& requests) override {
    std::sort(requests.begin(), requests.end(), [&](std::size_t a, std::size_t b) {
      const auto& sa = world.vehicles[a].state;
      const auto& sb = world.vehicles[b].state;
      const double ea = sa.s / std::max(sa.v, 0.1);
      const double eb = sb.s / std::max(sb.v, 0.1);
      return ea != eb ? ea < eb : sa.id < sb.id;
    });
  }

  bool may_enter(const World& world, const SimVehicle& sv) override {
    const VehicleState& st = sv.state;
    if (!state_.green_for(st.road())) return false;
    if (st.group.intention != Intention::left_turn) return true;
    // Permissive left turn: yield to conflicting arrivals on the green axis.
    const ConflictTable& table = ConflictTable::standard();
    for (const auto& other : world.vehicles) {
      const VehicleState& o = other.state;
      if (other.granted || o.s <= 0.0 || !state_.green_for(o.road())) continue;
      if (!table.conflicts(st.group, o.group)) continue;
      if (o.s / std::max(o.v, 0.1) <= scenario_.signal.critical_gap) return false;
    }
    return true;
  }

 private:
  bool actuated_;
  SignalTiming timing_;
  ActuatedSignal signal_;
  SignalState state_;
};

class StopSignController : public GateController {
 public:
  using GateController::GateController;

 protected:
  void before_grants(World& world, double) override {
    for (auto& [key, idx] : lanes_) {
      for (std::size_t k : idx) {
        SimVehicle& sv = world.vehicles[k];
        if (sv.granted) continue;
        if (sv.stopped_since < 0.0 && sv.state.s <= 1.0 && sv.state.v <= 0.1) sv.stopped_since = world.time;
        break;
      }
    }
  }

  void order_requests(const World& world, std::vector<std::size_t>& requests) override {
    // Vehicles that have stopped go in stop order; the rest cannot enter yet.
    std::sort(requests.begin(), requests.end(), [&](std::size_t a, std::size_t b) {
      const auto& va = world.vehicles[a];
      const auto& vb = world.vehicles[b];
      const double ta = va.stopped_since < 0.0 ? 1e300 : va.stopped_since;
      const double tb = vb.stopped_since < 0.0 ? 1e300 : vb.stopped_since;
      return ta != tb ? ta < tb : va.state.id < vb.state.id;
    });
    requests.erase(std::remove_if(requests.begin(), requests.end(),
                                  [&](std::size_t k) { return world.vehicles[k].stopped_since < 0.0; }),
                   requests.end());
  }

  bool may_enter(const World& world, const SimVehicle& sv) override {
    return world.time - sv.stopped_since >= scenario_.stop_sign.min_stop - 1e-9;
  }

  bool keeps_arrival_order() const override { return true; }
};

}  // namespace

std::unique_ptr<BaselineController> make_baseline(ControllerKind kind, const Scenario& scenario) {
  switch (kind) {
    case ControllerKind::stop_sign:
      return std::make_unique<StopSignController>(scenario);
    case ControllerKind::traffic_light:
      return std::make_unique<SignalController>(scenario, false);
    case ControllerKind::actuated_light:
      return std::make_unique<SignalController>(scenario, true);
    default:
      throw std::invalid_argument("not a gate-based baseline: " + std::string(to_string(kind)));
  }
}

}  // namespace coopintersect
