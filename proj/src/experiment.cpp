#include "coopintersect/experiment.hpp"

#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <boost/format.hpp>
#include <omp.h>

namespace coopintersect {

void ExperimentPlan::validate(double warmup) const {
  if (controllers.empty()) throw std::invalid_argument("plan needs at least one controller");
  if (flows.empty()) throw std::invalid_argument("plan needs at least one flow level");
  if (ratios.empty()) throw std::invalid_argument("plan needs at least one flow ratio");
  if (seeds.empty()) throw std::invalid_argument("plan needs at least one seed");
  for (double f : flows) {
    if (!(f >= 0.0)) throw std::invalid_argument("flow levels must be non-negative");
  }
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("flow ratios must be positive");
  }
  if (!(duration > warmup)) throw std::invalid_argument("plan duration must exceed the warmup");
}

ExperimentPlan ExperimentPlan::sweep_default() {
  ExperimentPlan plan;
  plan.controllers = {ControllerKind::coop, ControllerKind::stop_sign, ControllerKind::traffic_light,
                      ControllerKind::actuated_light, ControllerKind::fifo_auction};
  for (double f = 2000.0; f <= 10000.0 + 1e-9; f += 800.0) plan.flows.push_back(f);
  plan.ratios = {1.0};
  plan.seeds = {1, 2, 3, 4, 5};
  return plan;
}

std::string CellKey::run_id() const {
  return (boost::format("%s-f%g-r%g-s%d") % to_string(controller) % flow % ratio % seed).str();
}

bool operator<(const CellKey& a, const CellKey& b) {
  return std::make_tuple(to_string(a.controller), a.flow, a.ratio, a.seed) <
         std::make_tuple(to_string(b.controller), b.flow, b.ratio, b.seed);
}

std::vector<CellKey> expand(const ExperimentPlan& plan) {
  std::vector<CellKey> cells;
  for (auto c : plan.controllers)
    for (double f : plan.flows)
      for (double r : plan.ratios)
        for (auto s : plan.seeds) cells.push_back({c, f, r, s});
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end(),
                          [](const CellKey& a, const CellKey& b) { return !(a < b) && !(b < a); }),
              cells.end());
  return cells;
}

Scenario cell_scenario(const Scenario& base, const CellKey& key, double duration) {
  Scenario sc = base;
  const ArrivalSpec flows = ArrivalSpec::unbalanced(key.flow, key.ratio);
  sc.arrivals.road_flow = flows.road_flow;
  sc.duration = duration;
  return sc;
}

namespace {

CellResult run_cell(const CellKey& key, const Scenario& base, double duration, bool keep_events) {
  RunResult run = run_scenario(key.controller, cell_scenario(base, key, duration), key.seed);
  CellResult cell{key, run.metrics, {}};
  if (keep_events) cell.events = std::move(run.events);
  return cell;
}

}  // namespace

std::vector<CellResult> run_cells(std::span<const CellKey> cells, const Scenario& base, double duration,
                                  bool keep_events) {
  std::vector<CellResult> out(cells.size());
  std::exception_ptr failure;
  const auto count = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < count; ++k) {
    try {
      out[static_cast<std::size_t>(k)] = run_cell(cells[static_cast<std::size_t>(k)], base, duration, keep_events);
    } catch (...) {
#pragma omp critical(run_cells_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::sort(out.begin(), out.end(), [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  return out;
}

std::vector<CellResult> run_cells_serial(std::span<const CellKey> cells, const Scenario& base, double duration,
                                         bool keep_events) {
  std::vector<CellResult> out;
  for (const auto& key : cells) out.push_back(run_cell(key, base, duration, keep_events));
  std::sort(out.begin(), out.end(), [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  return out;
}

std::string csv_header() {
  return "run_id,controller,flow_total,flow_ratio,seed,throughput,ttg_mean,ttg_ev,fuel_total,fuel_truck,"
         "co2_total,collisions,plan_ms_p50,plan_ms_p99\n";
}

std::string csv_row(const CellResult& cell, bool timing) {
  const RunMetrics& m = cell.metrics;
  const bool planned = cell.key.controller == ControllerKind::coop || cell.key.controller == ControllerKind::fifo_auction;
  std::string p50;
  std::string p99;
  if (timing && planned) {
    p50 = (boost::format("%.4f") % m.plan_ms_p50).str();
    p99 = (boost::format("%.4f") % m.plan_ms_p99).str();
  }
  return (boost::format("%s,%s,%g,%g,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%s,%s\n") % cell.key.run_id() %
          to_string(cell.key.controller) % cell.key.flow % cell.key.ratio % cell.key.seed % m.throughput %
          m.mean_time_to_goal % m.ev_time_to_goal % m.total_fuel % m.truck_fuel % m.total_co2 % m.collisions % p50 %
          p99)
      .str();
}

std::string summary_table(std::span<const CellResult> cells) {
  struct Acc {
    double throughput = 0, ttg = 0, fuel = 0, fuel_per_vehicle = 0;
    long collisions = 0;
    int n = 0;
  };
  using Key = std::tuple<double, double, std::string>;
  std::map<Key, Acc> acc;
  for (const auto& c : cells) {
    Acc& a = acc[{c.key.flow, c.key.ratio, std::string(to_string(c.key.controller))}];
    a.throughput += c.metrics.throughput;
    a.ttg += c.metrics.mean_time_to_goal;
    a.fuel += c.metrics.total_fuel;
    a.fuel_per_vehicle += c.metrics.fuel_per_vehicle;
    a.collisions += c.metrics.collisions;
    ++a.n;
  }
  std::ostringstream out;
  out << boost::format("%-8s %-6s %-15s %5s %10s %9s %10s %9s %10s %9s %10s\n") % "flow" % "ratio" % "controller" %
             "seeds" % "veh/min" % "vs_tl" % "ttg_s" % "vs_tl" % "fuel_L" % "vs_tl" % "collisions";
  for (const auto& [key, a] : acc) {
    const auto& [flow, ratio, name] = key;
    const double n = a.n;
    const auto tl = acc.find({flow, ratio, "traffic_light"});
    const auto rel = [&](double mine, double theirs) {
      return tl == acc.end() || theirs == 0.0 ? std::string("-") : (boost::format("%.3f") % (mine / theirs)).str();
    };
    const double tn = tl == acc.end() ? 1.0 : tl->second.n;
    out << boost::format("%-8g %-6g %-15s %5d %10.2f %9s %10.2f %9s %10.3f %9s %10d\n") % flow % ratio % name % a.n %
               (a.throughput / n) % rel(a.throughput / n, tl == acc.end() ? 0.0 : tl->second.throughput / tn) %
               (a.ttg / n) % rel(a.ttg / n, tl == acc.end() ? 0.0 : tl->second.ttg / tn) % (a.fuel / n) %
               rel(a.fuel / n, tl == acc.end() ? 0.0 : tl->second.fuel / tn) % a.collisions;
  }
  return out.str();
}

namespace {

void write_atomically(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::path tmp = target;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

PlanReport run_plan(const ExperimentPlan& plan, const Scenario& base, const std::filesystem::path& out_dir,
                    const OutputOptions& options) {
  plan.validate(base.warmup);
  base.validate();
  std::filesystem::create_directories(out_dir);
  if (const int cap = thread_cap_from_env(); cap > 0) omp_set_num_threads(cap);

  const std::vector<CellKey> cells = expand(plan);
  PlanReport report;
  report.cells = run_cells(cells, base, plan.duration, options.emit_events);

  std::string csv = csv_header();
  for (const auto& c : report.cells) {
    csv += csv_row(c, options.timing);
    if (c.key.controller == ControllerKind::coop) report.coop_collisions += c.metrics.collisions;
  }
  if (options.emit_events) {
    const auto dir = out_dir / "events";
    std::filesystem::create_directories(dir);
    for (const auto& c : report.cells) {
      std::ostringstream log;
      write_events(log, c.events);
      write_atomically(dir / (c.key.run_id() + ".log"), log.str());
    }
  }
  write_atomically(out_dir / "metrics.csv", csv);
  write_atomically(out_dir / "summary.txt", summary_table(report.cells));
  return report;
}

int thread_cap_from_env() {
  const char* raw = std::getenv("COOPINTERSECT_THREADS");
  if (!raw || !*raw) return 0;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1) throw std::invalid_argument("COOPINTERSECT_THREADS must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace coopintersect
