#include "coopintersect/config.hpp"

#include <algorithm>
#include <charconv>
#include <span>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace coopintersect {

namespace {

namespace pt = boost::property_tree;

std::string trimmed(std::string_view text) { return boost::algorithm::trim_copy(std::string(text)); }

double to_double(const std::string& path, std::string_view text) {
  const std::string t = trimmed(text);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("configuration key '" + path + "': expected a number, got '" + t + "'");
  }
  return value;
}

std::uint64_t to_u64(const std::string& path, std::string_view text) {
  const std::string t = trimmed(text);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("configuration key '" + path + "': expected a non-negative integer, got '" + t + "'");
  }
  return value;
}

std::vector<std::string> split(std::string_view text, const char* sep) {
  std::vector<std::string> parts;
  const std::string t = trimmed(text);
  if (t.empty()) return parts;
  boost::algorithm::split(parts, t, boost::algorithm::is_any_of(sep));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

std::vector<double> to_doubles(const std::string& path, std::string_view text) {
  std::vector<double> out;
  for (const auto& p : split(text, ",")) out.push_back(to_double(path, p));
  return out;
}

template <std::size_t N>
std::array<double, N> to_array(const std::string& path, std::string_view text) {
  const auto values = to_doubles(path, text);
  if (values.size() != N) {
    throw std::invalid_argument("configuration key '" + path + "': expected " + std::to_string(N) + " values");
  }
  std::array<double, N> out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

std::string num(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string join(std::span<const double> xs, const char* sep = ", ") {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += sep;
    out += num(xs[k]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string& path, const std::string& value)> set;
  std::function<std::string()> get;
};

void scalar(std::vector<Field>& f, const std::string& section, const std::string& key, double& target) {
  f.push_back({section, key, [&target](const std::string& p, const std::string& v) { target = to_double(p, v); },
               [&target] { return num(target); }});
}

void range(std::vector<Field>& f, const std::string& section, const std::string& key, Range& target) {
  f.push_back({section, key,
               [&target](const std::string& p, const std::string& v) {
                 const auto a = to_array<2>(p, v);
                 target = {a[0], a[1]};
               },
               [&target] { return num(target.low) + ", " + num(target.high); }});
}

template <std::size_t N>
void array(std::vector<Field>& f, const std::string& section, const std::string& key, std::array<double, N>& target) {
  f.push_back({section, key, [&target](const std::string& p, const std::string& v) { target = to_array<N>(p, v); },
               [&target] { return join(target); }});
}

std::vector<Field> fields(Configuration& c) {
  std::vector<Field> f;
  Scenario& sc = c.scenario;
  scalar(f, "intersection", "control_zone_length", sc.geometry.control_zone_length);
  scalar(f, "intersection", "conflict_zone_width", sc.geometry.conflict_zone_width);
  scalar(f, "intersection", "speed_limit", sc.geometry.speed_limit);
  f.push_back({"intersection", "lanes_per_road",
               [&sc](const std::string& p, const std::string& v) {
                 sc.geometry.lanes_per_road = static_cast<int>(to_u64(p, v));
               },
               [&sc] { return std::to_string(sc.geometry.lanes_per_road); }});
  scalar(f, "margins", "rear", sc.margins.rear);
  scalar(f, "margins", "lateral", sc.margins.lateral);
  array(f, "arrivals", "turn_split", sc.arrivals.turn_split);
  array(f, "arrivals", "class_mix", sc.arrivals.class_mix);

  for (auto kind : {ClassKind::passenger, ClassKind::truck, ClassKind::emergency}) {
    VehicleClass& cls = sc.coordinator.classes[kind];
    const std::string s(to_string(kind));
    scalar(f, s, "length", cls.length);
    scalar(f, s, "a_max", cls.a_max);
    scalar(f, s, "a_min", cls.a_min);
    range(f, s, "assertiveness", cls.assertiveness);
    scalar(f, s, "fuel_scale", cls.fuel_scale);
    range(f, s, "speed_priority", cls.speed_priority);
    range(f, s, "variation_priority", cls.variation_priority);
  }

  AuctionParams& au = sc.coordinator.auction;
  scalar(f, "auction", "c1", au.c1);
  scalar(f, "auction", "w_cap", au.w_cap);
  scalar(f, "auction", "a_cap", au.a_cap);
  scalar(f, "auction", "tau_speed_floor", au.tau_speed_floor);
  scalar(f, "auction", "overflow_fraction", au.overflow_fraction);
  scalar(f, "auction", "slot_headway", au.slot_headway);
  f.push_back({"auction", "omega_set",
               [&au](const std::string& p, const std::string& v) {
                 au.omega_set.clear();
                 for (const auto& group : split(v, "|")) au.omega_set.push_back(to_array<4>(p, group));
               },
               [&au] {
                 std::string out;
                 for (std::size_t k = 0; k < au.omega_set.size(); ++k) {
                   if (k) out += " | ";
                   out += join(au.omega_set[k]);
                 }
                 return out;
               }});

  QpParams& q = sc.coordinator.qp;
  scalar(f, "qp", "lambda", q.lambda);
  scalar(f, "qp", "plan_dt", q.plan_dt);
  scalar(f, "qp", "committed_buffer", q.committed_buffer);

  SignalTiming& sg = sc.signal;
  scalar(f, "signal", "cycle", sg.cycle);
  scalar(f, "signal", "all_red", sg.all_red);
  scalar(f, "signal", "phase_a_share", sg.phase_a_share);
  f.push_back({"signal", "demand_split",
               [&sg](const std::string& p, const std::string& v) {
                 const std::string t = trimmed(v);
                 if (t == "true") sg.demand_split = true;
                 else if (t == "false") sg.demand_split = false;
                 else throw std::invalid_argument("configuration key '" + p + "': expected true or false, got '" + t + "'");
               },
               [&sg] { return std::string(sg.demand_split ? "true" : "false"); }});
  scalar(f, "signal", "min_green", sg.min_green);
  scalar(f, "signal", "max_green", sg.max_green);
  scalar(f, "signal", "extension_headway", sg.extension_headway);
  scalar(f, "signal", "critical_gap", sg.critical_gap);
  scalar(f, "stop_sign", "min_stop", sc.stop_sign.min_stop);

  scalar(f, "fuel", "base", sc.fuel.base);
  scalar(f, "fuel", "rolling", sc.fuel.rolling);
  scalar(f, "fuel", "acceleration", sc.fuel.acceleration);
  scalar(f, "fuel", "idle", sc.fuel.idle);
  scalar(f, "fuel", "co2_per_liter", sc.fuel.co2_per_liter);

  scalar(f, "run", "warmup", sc.warmup);
  scalar(f, "run", "tick", sc.tick);

  ExperimentPlan& pl = c.plan;
  f.push_back({"plan", "controllers",
               [&pl](const std::string& p, const std::string& v) {
                 pl.controllers.clear();
                 for (const auto& name : split(v, ",")) {
                   try {
                     pl.controllers.push_back(parse_controller(name));
                   } catch (const std::invalid_argument& e) {
                     throw std::invalid_argument("configuration key '" + p + "': " + e.what());
                   }
                 }
               },
               [&pl] {
                 std::string out;
                 for (std::size_t k = 0; k < pl.controllers.size(); ++k) {
                   if (k) out += ", ";
                   out += to_string(pl.controllers[k]);
                 }
                 return out;
               }});
  f.push_back({"plan", "flows", [&pl](const std::string& p, const std::string& v) { pl.flows = to_doubles(p, v); },
               [&pl] { return join(pl.flows); }});
  f.push_back({"plan", "ratios", [&pl](const std::string& p, const std::string& v) { pl.ratios = to_doubles(p, v); },
               [&pl] { return join(pl.ratios); }});
  f.push_back({"plan", "seeds",
               [&pl](const std::string& p, const std::string& v) {
                 pl.seeds.clear();
                 for (const auto& s : split(v, ",")) pl.seeds.push_back(to_u64(p, s));
               },
               [&pl] {
                 std::string out;
                 for (std::size_t k = 0; k < pl.seeds.size(); ++k) {
                   if (k) out += ", ";
                   out += std::to_string(pl.seeds[k]);
                 }
                 return out;
               }});
  scalar(f, "plan", "duration", pl.duration);
  return f;
}

}  // namespace

Configuration parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("malformed configuration: ") + e.message() + " (line " +
                                std::to_string(e.line()) + ")");
  }

  Configuration config;
  std::vector<Field> table = fields(config);
  bool schema_seen = false;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name != "schema") throw std::invalid_argument("unknown configuration key '" + name + "'");
      if (trimmed(node.data()) != kConfigSchema) {
        throw std::invalid_argument("configuration key 'schema': unsupported schema '" + node.data() + "'");
      }
      schema_seen = true;
      continue;
    }
    for (const auto& [key, value] : node) {
      const std::string path = name + "." + key;
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == name && f.key == key; });
      if (it == table.end()) throw std::invalid_argument("unknown configuration key '" + path + "'");
      it->set(path, value.data());
    }
  }
  if (!schema_seen) throw std::invalid_argument("configuration key 'schema' is missing");
  config.scenario.duration = config.plan.duration;
  config.scenario.validate();
  config.plan.validate(config.scenario.warmup);
  return config;
}

Configuration load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open configuration file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const Configuration& config) {
  Configuration copy = config;
  std::string out = "schema = " + std::string(kConfigSchema) + "\n";
  std::string section;
  for (const Field& f : fields(copy)) {
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace coopintersect
