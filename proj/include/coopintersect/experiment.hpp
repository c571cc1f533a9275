#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coopintersect/sim.hpp"

namespace coopintersect {

struct ExperimentPlan {
  std::vector<ControllerKind> controllers;
  std::vector<double> flows;   // total veh/hr over all four arms
  std::vector<double> ratios;  // horizontal : vertical, 1 = balanced
  std::vector<std::uint64_t> seeds;
  double duration = 600.0;

  void validate(double warmup) const;
  /// Flows 2000..10000 step 800, balanced, five seeds, every controller.
  [[nodiscard]] static ExperimentPlan sweep_default();
};

struct CellKey {
  ControllerKind controller = ControllerKind::coop;
  double flow = 0.0;
  double ratio = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::string run_id() const;
  friend bool operator<(const CellKey& a, const CellKey& b);
};

struct CellResult {
  CellKey key;
  RunMetrics metrics;
  std::vector<Event> events;  // kept only when requested
};

[[nodiscard]] std::vector<CellKey> expand(const ExperimentPlan& plan);

/// Scenario for one cell: the base scenario with the cell's arrivals and duration.
[[nodiscard]] Scenario cell_scenario(const Scenario& base, const CellKey& key, double duration);

/// Runs every cell on a worker pool; results come back sorted by cell key.
[[nodiscard]] std::vector<CellResult> run_cells(std::span<const CellKey> cells, const Scenario& base, double duration,
                                                bool keep_events);

/// Single-threaded reference for run_cells.
[[nodiscard]] std::vector<CellResult> run_cells_serial(std::span<const CellKey> cells, const Scenario& base,
                                                       double duration, bool keep_events);

struct OutputOptions {
  bool emit_events = false;
  bool timing = true;  // false blanks the wall-clock columns so reruns are byte-identical
};

[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string csv_row(const CellResult& cell, bool timing = true);
[[nodiscard]] std::string summary_table(std::span<const CellResult> cells);

struct PlanReport {
  std::vector<CellResult> cells;
  long coop_collisions = 0;
};

/// Runs the plan and writes metrics.csv and summary.txt (plus events/ when asked)
/// into `out_dir`. Files appear only once every cell has finished.
PlanReport run_plan(const ExperimentPlan& plan, const Scenario& base, const std::filesystem::path& out_dir,
                    const OutputOptions& options = {});

/// Worker count from COOPINTERSECT_THREADS, or 0 when unset.
[[nodiscard]] int thread_cap_from_env();

}  // namespace coopintersect
