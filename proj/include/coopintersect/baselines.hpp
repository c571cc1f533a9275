#pragma once

#include <memory>
#include <vector>

#include "coopintersect/sim.hpp"

namespace coopintersect {

/// Two-phase signal state. Phase A serves roads 0 and 1, phase B roads 2 and 3.
struct SignalState {
  bool phase_a_green = false;
  bool phase_b_green = false;
  [[nodiscard]] bool green_for(int road) const noexcept { return road < 2 ? phase_a_green : phase_b_green; }
};

/// Fixed-time plan: green A, all-red, green B, all-red.
[[nodiscard]] SignalState fixed_signal(const SignalTiming& timing, double time);

/// Gap-extension signal that holds green while traffic keeps arriving.
class ActuatedSignal {
 public:
  explicit ActuatedSignal(const SignalTiming& timing) : timing_(timing) {}

  /// `green_demand`: an approaching vehicle on the green axis within the extension headway.
  /// `red_demand`: any vehicle waiting on the red axis.
  SignalState step(double dt, bool green_demand, bool red_demand);
  [[nodiscard]] SignalState state() const noexcept;
  [[nodiscard]] bool serving_a() const noexcept { return serving_a_; }

 private:
  SignalTiming timing_;
  bool serving_a_ = true;
  bool clearing_ = false;
  double elapsed_ = 0.0;
};

/// Baseline controllers issue a target speed per vehicle each tick and manage
/// permission to enter the conflict zone.
class BaselineController {
 public:
  virtual ~BaselineController() = default;
  /// Fills `targets` aligned with world.vehicles.
  virtual void update(World& world, double dt, std::vector<double>& targets) = 0;
};

[[nodiscard]] std::unique_ptr<BaselineController> make_baseline(ControllerKind kind, const Scenario& scenario);

}  // namespace coopintersect
