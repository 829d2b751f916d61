#include "warpflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "detail/spec_string.hpp"
#include "warpflow/ambient.hpp"
#include "warpflow/error.hpp"
#include "warpflow/flows.hpp"
#include "warpflow/inequalities.hpp"
#include "warpflow/parallel.hpp"
#include "warpflow/quantities.hpp"
#include "warpflow/surface.hpp"

namespace warpflow::cli {

using nlohmann::json;
using detail::format_double;

namespace {


// ---------------------------------------------------------------------------
// Config <-> JSON

template <class T>
void read_field(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_optional(const json& j, const char* key, std::optional<double>& into) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    into.reset();
    return;
  }
  double v = 0.0;
  read_field(j, key, v);
  into = v;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["space"] = c.space;
  j["n"] = c.n;
  j["grid"] = c.grid;
  j["surface"] = c.surface;
  j["surface_file"] = c.surface_file;
  j["flow"] = c.flow;
  j["k"] = c.k;
  j["t_final"] = c.t_final;
  j["report_dt"] = c.report_dt;
  j["cfl"] = c.cfl;
  j["max_rel_step"] = c.max_rel_step;
  j["eps_mono"] = c.eps_mono;
  j["tol"] = c.tol;
  j["orders"] = c.orders;
  j["verify"] = c.verify;
  j["tolerance"] = c.tolerance;
  j["ell"] = c.ell;
  j["r"] = c.r ? json(*c.r) : json(nullptr);
  j["invert"] = c.invert ? json(*c.invert) : json(nullptr);
  j["quantity"] = c.quantity;
  j["r_max"] = c.r_max;
  j["samples"] = c.samples;
  j["vary"] = c.vary;
  j["k_list"] = c.k_list;
  j["out"] = c.out;
  j["final_surface"] = c.final_surface;
  j["format"] = c.format;
  j["workers"] = c.workers;
  return j;
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{
      "command", "space", "n", "grid", "surface", "surface_file", "flow", "k", "t_final", "report_dt",
      "cfl", "max_rel_step", "eps_mono", "tol", "orders", "verify", "tolerance", "ell", "r", "invert",
      "quantity", "r_max", "samples", "vary", "k_list", "out", "final_surface", "format", "workers"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("unknown config key '" + item.key() + "'");
    }
  }
  RunConfig c;
  read_field(j, "command", c.command);
  read_field(j, "space", c.space);
  read_field(j, "n", c.n);
  read_field(j, "grid", c.grid);
  read_field(j, "surface", c.surface);
  read_field(j, "surface_file", c.surface_file);
  read_field(j, "flow", c.flow);
  read_field(j, "k", c.k);
  read_field(j, "t_final", c.t_final);
  read_field(j, "report_dt", c.report_dt);
  read_field(j, "cfl", c.cfl);
  read_field(j, "max_rel_step", c.max_rel_step);
  read_field(j, "eps_mono", c.eps_mono);
  read_field(j, "tol", c.tol);
  read_field(j, "orders", c.orders);
  read_field(j, "verify", c.verify);
  read_field(j, "tolerance", c.tolerance);
  read_field(j, "ell", c.ell);
  read_optional(j, "r", c.r);
  read_optional(j, "invert", c.invert);
  read_field(j, "quantity", c.quantity);
  read_field(j, "r_max", c.r_max);
  read_field(j, "samples", c.samples);
  read_field(j, "vary", c.vary);
  read_field(j, "k_list", c.k_list);
  read_field(j, "out", c.out);
  read_field(j, "final_surface", c.final_surface);
  read_field(j, "format", c.format);
  read_field(j, "workers", c.workers);
  return c;
}

// ---------------------------------------------------------------------------
// Verify items

VerifyItem parse_verify_item(const std::string& text) {
  VerifyItem item;
  const auto colon = text.find(':');
  item.name = std::string(detail::trim(std::string_view(text).substr(0, colon)));
  if (colon != std::string::npos) {
    const auto params = detail::parse_params(detail::split(std::string_view(text).substr(colon + 1), ','),
                                             {"k", "l"}, "verify item '" + text + "'");
    if (auto it = params.find("k"); it != params.end()) item.k = detail::to_double(it->second, "k");
    if (auto it = params.find("l"); it != params.end()) item.ell = static_cast<int>(detail::to_int(it->second, "l"));
  }
  return item;
}

std::vector<VerifyItem> expand_verify(const std::vector<std::string>& items, const std::string& space_id,
                                      int n) {
  std::vector<VerifyItem> out;
  const auto space = parse_space(space_id);
  for (const auto& text : items) {
    if (text != "all") {
      out.push_back(parse_verify_item(text));
      continue;
    }
    for (double k : {1.0, 1.5, 2.0, 3.0}) out.push_back({"boundary-momentum", k, std::nullopt});
    for (double k : {1.0, 2.0}) out.push_back({"divergence", k, std::nullopt});
    switch (space.kind()) {
      case SpaceKind::euclidean:
        out.push_back({"weinstock", std::nullopt, std::nullopt});
        for (int k = 1; k <= n; ++k) out.push_back({"phi-quermass", double(k), std::nullopt});
        for (int k = 1; k <= n; ++k) out.push_back({"kwong-miao", double(k), std::nullopt});
        if (n == 1) out.push_back({"curve", std::nullopt, std::nullopt});
        break;
      case SpaceKind::hyperbolic:
        for (int k = 1; k <= n; ++k) {
          for (int l = 0; l <= k; ++l) out.push_back({"hyperbolic-ref", double(k), l});
        }
        break;
      case SpaceKind::sphere:
        for (int l = 0; l <= n; ++l) out.push_back({"sphere-ref", std::nullopt, l});
        break;
      case SpaceKind::custom:
        break;
    }
  }
  return out;
}

namespace {

bool is_integer(double x) { return std::floor(x) == x; }

void check_verify_item(const VerifyItem& v, const WarpedSpace& space, int n) {
  const std::string what = "verify '" + v.name + "': ";
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(what + msg);
  };
  auto integer_k = [&](int lo, int hi) {
    const double k = v.k.value_or(1.0);
    need(is_integer(k) && k >= lo && k <= hi,
         "k must be an integer in " + std::to_string(lo) + ".." + std::to_string(hi));
  };
  const bool euclid = space.kind() == SpaceKind::euclidean;
  if (v.name == "boundary-momentum" || v.name == "divergence") {
    need(v.k.value_or(1.0) >= 1.0, "k must be >= 1");
    need(!v.ell, "takes no l");
  } else if (v.name == "weinstock") {
    need(euclid, "needs the euclidean ambient");
    need(!v.k && !v.ell, "takes no parameters");
  } else if (v.name == "phi-quermass" || v.name == "kwong-miao") {
    need(euclid, "needs the euclidean ambient");
    need(!v.ell, "takes no l");
    integer_k(1, n);
  } else if (v.name == "hyperbolic-ref") {
    need(space.kind() == SpaceKind::hyperbolic, "needs the hyperbolic ambient");
    integer_k(1, n);
    const int l = v.ell.value_or(0);
    need(l >= 0 && l <= static_cast<int>(v.k.value_or(1.0)), "l must lie in 0..k");
  } else if (v.name == "sphere-ref") {
    need(space.kind() == SpaceKind::sphere, "needs the sphere ambient");
    need(!v.k || *v.k == n, "k is fixed to n");
    const int l = v.ell.value_or(0);
    need(l >= 0 && l <= n, "l must lie in 0..n");
  } else if (v.name == "curve") {
    need(n == 1, "needs n = 1");
    need(space.is_space_form(), "needs a space-form ambient");
  } else {
    throw ConfigError("unknown inequality '" + v.name +
                      "' (boundary-momentum, divergence, weinstock, phi-quermass, kwong-miao, "
                      "hyperbolic-ref, sphere-ref, curve, all)");
  }
}

std::vector<DeficitReport> evaluate_item(const VerifyItem& v, const WarpedSpace& space, const RadialGraph& g) {
  DeficitReport d;
  if (v.name == "boundary-momentum") {
    d = deficit_boundary_momentum(space, g, v.k.value_or(1.0));
  } else if (v.name == "divergence") {
    d = deficit_divergence(space, g, v.k.value_or(1.0));
  } else if (v.name == "weinstock") {
    d = deficit_weinstock_iso(space, g);
  } else if (v.name == "phi-quermass") {
    d = deficit_phi_quermass_euclidean(space, g, static_cast<int>(v.k.value_or(1.0)));
  } else if (v.name == "kwong-miao") {
    d = kwong_miao_deficit(space, g, static_cast<int>(v.k.value_or(1.0)));
  } else if (v.name == "hyperbolic-ref") {
    d = deficit_hyperbolic_ref(space, g, static_cast<int>(v.k.value_or(1.0)), v.ell.value_or(0));
  } else if (v.name == "sphere-ref") {
    d = deficit_sphere_ref(space, g, v.ell.value_or(0));
  } else if (v.name == "curve") {
    d = curve_kwww_deficit(space, g);
  } else {
    throw ConfigError("unknown inequality '" + v.name + "'");
  }
  std::vector<DeficitReport> out{d};
  for (auto a : d.auxiliary) {
    a.name = d.name + "/" + a.name;
    a.equality_expected = d.equality_expected;
    a.class_flags = d.class_flags;
    out.push_back(std::move(a));
  }
  out.front().auxiliary.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Inputs

std::string grid_dims(const RunConfig& c) {
  if (!c.grid.empty()) return c.grid;
  return c.n == 1 ? "512" : "64x128";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Inputs {
  WarpedSpace space;
  std::optional<RadialGraph> graph;
};

// Builds the ambient and the surface; failures here are usage errors.
Inputs build_inputs(const RunConfig& c, bool need_surface) {
  try {
    Inputs in{parse_space(c.space), std::nullopt};
    if (need_surface) {
      if (!c.surface_file.empty()) {
        in.graph = surface_from_csv(read_file(c.surface_file), in.space);
        if (in.graph->grid.dim() != c.n) {
          throw ConfigError("surface file has n=" + std::to_string(in.graph->grid.dim()) +
                            " but --n is " + std::to_string(c.n));
        }
      } else {
        const auto grid = SphereGrid::parse(c.n, grid_dims(c), in.space.fiber_scale());
        in.graph = make_seed_surface(in.space, grid, parse_seed(c.surface));
      }
    }
    return in;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

FlowSpec flow_spec(const RunConfig& c) {
  FlowSpec s;
  try {
    s.kind = parse_flow_kind(c.flow);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  s.k = c.k;
  s.t_final = c.t_final;
  s.report_dt = c.report_dt;
  s.cfl = c.cfl;
  s.max_rel_step = c.max_rel_step;
  s.eps_mono = c.eps_mono;
  s.tol = c.tol;
  s.momentum_orders = c.orders;
  return s;
}

// `key=from:to:step` -> (key, values)
std::pair<std::string, std::vector<double>> parse_vary(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--vary expects key=from:to:step, got '" + text + "'");
  const auto parts = detail::split(std::string_view(text).substr(eq + 1), ':');
  if (parts.size() != 3) throw ConfigError("--vary expects key=from:to:step, got '" + text + "'");
  double from, to, step;
  try {
    from = detail::to_double(parts[0], "from");
    to = detail::to_double(parts[1], "to");
    step = detail::to_double(parts[2], "step");
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(step > 0.0) || !(to >= from)) throw ConfigError("--vary needs step > 0 and to >= from");
  const long count = static_cast<long>(std::floor((to - from) / step + 1e-9)) + 1;
  if (count > 100000) throw ConfigError("--vary range has too many values");
  std::vector<double> values;
  for (long i = 0; i < count; ++i) {
    // Trim accumulated representation noise (0.15000000000000002) to 12 digits.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", from + static_cast<double>(i) * step);
    values.push_back(std::strtod(buf, nullptr));
  }
  return {text.substr(0, eq), values};
}

std::string with_param(const std::string& surface, const std::string& key, double value) {
  const auto colon = surface.find(':');
  const std::string family = surface.substr(0, colon);
  std::vector<std::string> items;
  bool replaced = false;
  if (colon != std::string::npos) {
    for (auto item : detail::split(std::string_view(surface).substr(colon + 1), ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq != std::string_view::npos && detail::trim(item.substr(0, eq)) == key) {
        items.push_back(key + "=" + format_double(value));
        replaced = true;
      } else {
        items.emplace_back(item);
      }
    }
  }
  if (!replaced) items.push_back(key + "=" + format_double(value));
  std::string out = family + ":";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace

void validate_config(const RunConfig& c) {
  static const std::vector<std::string> commands{"evolve", "verify", "reference", "probe", "sweep",
                                                 "dump-surface"};
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end()) {
    throw ConfigError("unknown command '" + c.command + "'");
  }
  if (c.n != 1 && c.n != 2) throw ConfigError("n must be 1 or 2");
  if (c.format != "csv" && c.format != "json") throw ConfigError("format must be csv or json");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(c.tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  WarpedSpace space = [&] {
    try {
      return parse_space(c.space);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }();
  try {
    (void)SphereGrid::parse(c.n, grid_dims(c), space.fiber_scale());
    if (c.surface_file.empty()) (void)parse_seed(c.surface);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (c.command == "evolve") {
    validate(flow_spec(c), space, c.n);
    for (double q : c.orders) {
      if (!(q >= 1.0)) throw ConfigError("momentum orders must be >= 1");
    }
  }
  if (c.command == "verify" || c.command == "sweep") {
    std::vector<std::string> items = c.verify;
    if (items.empty() && c.command == "sweep") items = {"boundary-momentum:k=1"};
    if (items.empty()) throw ConfigError("verify needs at least one --verify item");
    std::vector<VerifyItem> parsed;
    try {
      parsed = expand_verify(items, c.space, c.n);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    for (const auto& v : parsed) {
      if (c.command == "sweep" && !c.k_list.empty()) {
        for (double k : c.k_list) {
          auto w = v;
          w.k = k;
          check_verify_item(w, space, c.n);
        }
      } else {
        check_verify_item(v, space, c.n);
      }
    }
    if (c.command == "sweep" && !c.vary.empty()) {
      const auto [key, values] = parse_vary(c.vary);
      if (!c.surface_file.empty()) throw ConfigError("--vary needs a seed surface, not a surface file");
      for (double x : values) {
        try {
          (void)parse_seed(with_param(c.surface, key, x));
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      }
    }
  }
  if (c.command == "reference") {
    if (!space.is_space_form() || space.kind() == SpaceKind::euclidean) {
      throw ConfigError("reference needs the hyperbolic or sphere ambient");
    }
    if (c.quantity != "xi" && c.quantity != "chi" && c.quantity != "both") {
      throw ConfigError("quantity must be xi, chi or both");
    }
    if (c.invert && c.r) throw ConfigError("give either --r or --invert");
    if (!c.invert && !c.r) throw ConfigError("reference needs --r or --invert");
    if (c.ell < 0 || c.ell > c.n + 1) throw ConfigError("ell must lie in 0..n+1");
    if (c.invert && c.ell > c.n) throw ConfigError("inversion needs ell in 0..n");
    if (c.r && c.quantity != "chi" && (c.k < 0 || c.k > c.n)) throw ConfigError("k must lie in 0..n");
  }
  if (c.command == "probe") {
    if (c.samples < 10) throw ConfigError("probe needs at least 10 samples");
    if (!(c.r_max > space.inner_radius())) throw ConfigError("probe needs r_max > a");
  }
}

namespace {

// ---------------------------------------------------------------------------
// Output

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;  // numbers, strings, bools or null
};

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number()) return format_double(v.get<double>());
  std::string s = v.get<std::string>();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}

// NaN and infinities have no JSON number form; they become null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << '\n';
  }
}

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json o = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) o[t.columns[i]] = row[i];
    rows.push_back(o);
  }
  return rows;
}

// Runs `body` against the --out file or `out`.
template <class F>
void emit(const RunConfig& c, std::ostream& out, F&& body) {
  if (c.out.empty()) {
    body(out);
    return;
  }
  std::ofstream file(c.out, std::ios::binary);
  if (!file) throw Error("cannot write '" + c.out + "'");
  body(file);
  if (!file) throw Error("write to '" + c.out + "' failed");
}

std::string flags_string(const std::map<std::string, bool>& flags) {
  std::string s;
  for (const auto& [k, v] : flags) s += (s.empty() ? "" : ";") + k + "=" + (v ? "1" : "0");
  return s;
}

const std::vector<std::string> deficit_columns{"name", "k", "ell", "lhs", "rhs", "deficit",
                                               "relative_deficit", "equality_expected", "class_flags"};

std::vector<json> deficit_row(const DeficitReport& d) {
  return {d.name,
          d.k ? json(*d.k) : json(nullptr),
          d.ell ? json(*d.ell) : json(nullptr),
          number(d.lhs),
          number(d.rhs),
          number(d.deficit),
          number(d.relative_deficit),
          d.equality_expected,
          flags_string(d.class_flags)};
}

// ---------------------------------------------------------------------------
// Commands

Table trace_table(const FlowTrace& trace, const MonotoneSeries& series) {
  Table t;
  const auto& first = trace.samples.front();
  const int n = first.report.n;
  t.columns = {"t", "area", "volume"};
  for (std::size_t l = 0; l < first.report.W.size(); ++l) t.columns.push_back("W" + std::to_string(l));
  for (const auto& [k, v] : first.report.boundary_momenta) t.columns.push_back("momentum_k" + format_double(k));
  for (int k = 0; k <= n; ++k) t.columns.push_back("phiE" + std::to_string(k));
  for (const auto& name : series.names) t.columns.push_back(name);
  const int kk = trace.spec.kind == FlowKind::imcf ? 1 : trace.spec.k;
  t.columns.insert(t.columns.end(), {"minH", "minE" + std::to_string(kk), "min_static_margin", "dt"});

  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    std::vector<json> row{number(s.t), number(s.report.area), number(s.report.volume)};
    for (double w : s.report.W) row.push_back(number(w));
    for (const auto& [k, v] : s.report.boundary_momenta) row.push_back(number(v));
    for (double x : s.report.phi_curvature_integrals) row.push_back(number(x));
    for (double x : series.values[i]) row.push_back(number(x));
    row.push_back(number(s.margins.min_mean_curvature));
    row.push_back(number(s.margins.min_E.at(kk - 1)));
    row.push_back(s.margins.static_margin ? number(*s.margins.static_margin) : json(nullptr));
    row.push_back(number(s.dt));
    t.rows.push_back(std::move(row));
  }
  return t;
}

int cmd_evolve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto in = build_inputs(c, true);
  const auto spec = flow_spec(c);
  const auto tracker = make_monotone_tracker(spec, in.space, spec.momentum_orders);
  const auto trace = evolve(in.space, *in.graph, spec, tracker);
  const auto series = monotone_series(in.space, trace);
  const auto table = trace_table(trace, series);

  bool monotone_ok = trace.findings.empty();
  for (std::size_t q = 0; q < series.names.size(); ++q) {
    if (series.directions[q] != 0 && series.worst_wrong_way[q] > spec.eps_mono) monotone_ok = false;
  }

  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      write_csv(os, table);
      return;
    }
    json j;
    j["config"] = to_json(c);
    j["space"] = trace.space_id;
    j["flow"] = flow_kind_name(spec.kind);
    j["columns"] = table.columns;
    j["samples"] = table_json(table);
    j["termination"] = termination_name(trace.termination);
    j["termination_time"] = trace.termination_time;
    j["reason"] = trace.reason;
    j["expected_stop"] = trace.expected_stop;
    j["findings"] = trace.findings;
    j["accepted_steps"] = trace.accepted_steps;
    j["rejected_steps"] = trace.rejected_steps;
    json mono = json::object();
    for (std::size_t q = 0; q < series.names.size(); ++q) {
      mono[series.names[q]] = {{"direction", series.directions[q]},
                               {"worst_wrong_way", series.worst_wrong_way[q]}};
    }
    j["monotone"] = mono;
    os << j.dump(2) << '\n';
  });
  if (!c.final_surface.empty()) {
    std::ofstream f(c.final_surface, std::ios::binary);
    if (!f) throw Error("cannot write '" + c.final_surface + "'");
    f << surface_to_csv(trace.samples.back().graph);
  }

  err << "termination=" << termination_name(trace.termination) << " t=" << format_double(trace.termination_time)
      << " samples=" << trace.samples.size() << " accepted=" << trace.accepted_steps
      << " rejected=" << trace.rejected_steps;
  if (!trace.reason.empty()) err << " reason=\"" << trace.reason << "\"";
  err << '\n';
  for (const auto& f : trace.findings) err << "finding: " << f << '\n';
  for (std::size_t q = 0; q < series.names.size(); ++q) {
    if (series.directions[q] != 0 && series.worst_wrong_way[q] > spec.eps_mono) {
      err << "finding: " << series.names[q] << " worst wrong-way move "
          << format_double(series.worst_wrong_way[q]) << '\n';
    }
  }

  if (trace.termination == Termination::step_underflow) return exit_error;
  if (trace.termination == Termination::cone_violation && !trace.expected_stop) return exit_finding;
  return monotone_ok ? exit_ok : exit_finding;
}

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto in = build_inputs(c, true);
  Table t{deficit_columns, {}};
  bool ok = true;
  for (const auto& item : expand_verify(c.verify, c.space, c.n)) {
    for (const auto& d : evaluate_item(item, in.space, *in.graph)) {
      if (!(d.relative_deficit >= -c.tolerance)) {
        ok = false;
        err << "finding: " << d.name << " relative deficit " << format_double(d.relative_deficit) << '\n';
      }
      t.rows.push_back(deficit_row(d));
    }
  }
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      write_csv(os, t);
    } else {
      os << table_json(t).dump(2) << '\n';
    }
  });
  return ok ? exit_ok : exit_finding;
}

int cmd_reference(const RunConfig& c, std::ostream& out, std::ostream&) {
  auto in = build_inputs(c, false);
  Table t{{"quantity", "k", "ell", "r", "value"}, {}};
  if (c.invert) {
    const double r = ball_chi_inverse(in.space, c.n, c.ell, *c.invert);
    t.rows.push_back({"chi_inverse", nullptr, c.ell, number(r), number(*c.invert)});
  } else {
    if (c.quantity != "chi") {
      t.rows.push_back({"xi", c.k, nullptr, number(*c.r), number(ball_xi(in.space, c.n, c.k, *c.r))});
    }
    if (c.quantity != "xi") {
      t.rows.push_back({"chi", nullptr, c.ell, number(*c.r), number(ball_chi(in.space, c.n, c.ell, *c.r))});
    }
  }
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      write_csv(os, t);
    } else {
      os << table_json(t).dump(2) << '\n';
    }
  });
  return exit_ok;
}

int cmd_probe(const RunConfig& c, std::ostream& out, std::ostream&) {
  auto in = build_inputs(c, false);
  const auto report = probe_assumptions(in.space, c.r_max, c.samples, c.n);
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      Table t{{"condition", "holds", "violated_at", "value"}, {}};
      for (const auto& v : report.verdicts) {
        t.rows.push_back({v.condition, v.holds, v.violated_at ? number(*v.violated_at) : json(nullptr),
                          number(v.value)});
      }
      t.rows.push_back({"dlambda_bounded", report.dlambda_bounded, nullptr, nullptr});
      t.rows.push_back({"liminf_curvature_ratio", nullptr, nullptr, number(report.liminf_curvature_ratio)});
      write_csv(os, t);
      return;
    }
    json j;
    j["space"] = in.space.id();
    json verdicts = json::array();
    for (const auto& v : report.verdicts) {
      verdicts.push_back({{"condition", v.condition},
                          {"holds", v.holds},
                          {"violated_at", v.violated_at ? number(*v.violated_at) : json(nullptr)},
                          {"value", number(v.value)}});
    }
    j["verdicts"] = verdicts;
    j["dlambda_bounded"] = report.dlambda_bounded;
    j["liminf_curvature_ratio"] = number(report.liminf_curvature_ratio);
    json samples = json::array();
    for (std::size_t i = 0; i < report.radii.size(); ++i) {
      samples.push_back({{"r", report.radii[i]},
                         {"curvature_ratio", number(report.curvature_ratio[i])},
                         {"third_ratio", number(report.third_ratio[i])}});
    }
    j["samples"] = samples;
    os << j.dump(2) << '\n';
  });
  return exit_ok;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto space = parse_space(c.space);
  std::vector<std::string> items = c.verify.empty() ? std::vector<std::string>{"boundary-momentum:k=1"} : c.verify;
  auto parsed = expand_verify(items, c.space, c.n);
  if (!c.k_list.empty()) {
    std::vector<VerifyItem> with_k;
    for (const auto& v : parsed) {
      for (double k : c.k_list) {
        auto w = v;
        w.k = k;
        with_k.push_back(w);
      }
    }
    parsed = std::move(with_k);
  }
  std::string key;
  std::vector<std::optional<double>> values{std::nullopt};
  if (!c.vary.empty()) {
    auto [k, vs] = parse_vary(c.vary);
    key = k;
    values.assign(vs.begin(), vs.end());
  }

  Table t;
  t.columns = {"param", "value"};
  t.columns.insert(t.columns.end(), deficit_columns.begin(), deficit_columns.end());
  bool ok = true;
  struct Worst {
    double deficit;
    std::optional<double> at;
  };
  std::map<std::string, Worst> worst;
  for (const auto& value : values) {
    RunConfig member = c;
    if (value) member.surface = with_param(c.surface, key, *value);
    auto in = build_inputs(member, true);
    for (const auto& item : parsed) {
      for (const auto& d : evaluate_item(item, space, *in.graph)) {
        std::vector<json> row{key, value ? json(*value) : json(nullptr)};
        const auto rest = deficit_row(d);
        row.insert(row.end(), rest.begin(), rest.end());
        t.rows.push_back(std::move(row));
        if (!(d.relative_deficit >= -c.tolerance)) ok = false;
        const std::string label = d.name + (d.k ? " k=" + format_double(*d.k) : "") +
                                  (d.ell ? " l=" + std::to_string(*d.ell) : "");
        auto it = worst.find(label);
        if (it == worst.end() || d.deficit < it->second.deficit) worst[label] = {d.deficit, value};
      }
    }
  }
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      write_csv(os, t);
    } else {
      os << table_json(t).dump(2) << '\n';
    }
  });
  for (const auto& [label, w] : worst) {
    err << "min deficit " << label << ": " << format_double(w.deficit);
    if (w.at) err << " at " << key << "=" << format_double(*w.at);
    err << '\n';
  }
  return ok ? exit_ok : exit_finding;
}

int cmd_dump_surface(const RunConfig& c, std::ostream& out, std::ostream&) {
  auto in = build_inputs(c, true);
  const auto& g = *in.graph;
  emit(c, out, [&](std::ostream& os) {
    if (c.format == "csv") {
      os << surface_to_csv(g);
      return;
    }
    json j;
    j["space"] = in.space.id();
    j["n"] = g.grid.dim();
    j["grid"] = g.grid.dims_string();
    std::vector<double> theta, phi;
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
      theta.push_back(g.grid.theta(i));
      phi.push_back(g.grid.phi(i));
    }
    j["theta"] = theta;
    if (g.grid.dim() == 2) j["phi"] = phi;
    j["u"] = g.u;
    os << j.dump() << '\n';
  });
  return exit_ok;
}

// ---------------------------------------------------------------------------
// Argument parsing

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  return path;
}

void add_common(CLI::App* sub, RunConfig& c, std::string& config_path) {
  sub->add_option("--config", config_path, "JSON run config; flags override it");
  sub->add_option("--space", c.space, "euclidean | hyperbolic | sphere | custom:<family>,...");
  sub->add_option("--n", c.n, "fiber dimension (1 or 2)");
  sub->add_option("--out", c.out, "output path (default stdout)");
  sub->add_option("--format", c.format, "csv | json");
  sub->add_option("--workers", c.workers, "worker threads (default WARPFLOW_WORKERS or 1)");
}

void add_surface(CLI::App* sub, RunConfig& c) {
  sub->add_option("--grid", c.grid, "MxP for n = 2, m for n = 1");
  sub->add_option("--surface", c.surface, "round:... | legendre:... | bandlimited:...");
  sub->add_option("--surface-file", c.surface_file, "surface CSV (theta,phi,u or theta,u)");
}

void add_verify(CLI::App* sub, RunConfig& c) {
  sub->add_option("--verify", c.verify, "inequality name[:k=..,l=..] or all (repeatable)");
  sub->add_option("--tolerance", c.tolerance, "relative deficit floor");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string config_path;
  bool print_config = false;
  try {
    if (const char* env = std::getenv("WARPFLOW_WORKERS"); env && *env) {
      try {
        c.workers = static_cast<int>(detail::to_int(env, "WARPFLOW_WORKERS"));
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    if (const auto path = find_config_path(args)) {
      json j;
      try {
        j = json::parse(read_file(*path));
      } catch (const json::exception& e) {
        throw ConfigError("config '" + *path + "': " + e.what());
      }
      const int env_workers = c.workers;
      c = config_from_json(j);
      if (!j.contains("workers")) c.workers = env_workers;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  }

  CLI::App app{"Star-shaped radial graphs in warped products: flows, quantities and inequalities", "warpflow"};
  app.require_subcommand(1);
  app.add_flag("--print-config", print_config, "print the resolved config as JSON and exit");

  auto* evolve_cmd = app.add_subcommand("evolve", "run a curvature flow and write its trace");
  add_common(evolve_cmd, c, config_path);
  add_surface(evolve_cmd, c);
  evolve_cmd->add_option("--flow", c.flow, "imcf | euclidean-inverse | sx | bgl");
  evolve_cmd->add_option("--k", c.k, "curvature order");
  evolve_cmd->add_option("--t-final", c.t_final);
  evolve_cmd->add_option("--report-dt", c.report_dt);
  evolve_cmd->add_option("--cfl", c.cfl);
  evolve_cmd->add_option("--max-rel-step", c.max_rel_step);
  evolve_cmd->add_option("--eps-mono", c.eps_mono);
  evolve_cmd->add_option("--tol", c.tol, "local error tolerance of the step control");
  evolve_cmd->add_option("--orders", c.orders, "imcf momentum orders, comma separated")->delimiter(',');
  evolve_cmd->add_option("--final-surface", c.final_surface, "write the last surface as CSV");
  evolve_cmd->add_flag("--print-config", print_config);

  auto* verify_cmd = app.add_subcommand("verify", "evaluate inequality deficits on one surface");
  add_common(verify_cmd, c, config_path);
  add_surface(verify_cmd, c);
  add_verify(verify_cmd, c);
  verify_cmd->add_flag("--print-config", print_config);

  auto* reference_cmd = app.add_subcommand("reference", "geodesic ball reference functions");
  add_common(reference_cmd, c, config_path);
  reference_cmd->add_option("--k", c.k);
  reference_cmd->add_option("--ell", c.ell);
  reference_cmd->add_option("--r", c.r);
  reference_cmd->add_option("--invert", c.invert, "solve chi_ell(r) = value for r");
  reference_cmd->add_option("--quantity", c.quantity, "xi | chi | both");
  reference_cmd->add_flag("--print-config", print_config);

  auto* probe_cmd = app.add_subcommand("probe", "sample the warping-function assumptions");
  add_common(probe_cmd, c, config_path);
  probe_cmd->add_option("--r-max", c.r_max);
  probe_cmd->add_option("--samples", c.samples);
  probe_cmd->add_flag("--print-config", print_config);

  auto* sweep_cmd = app.add_subcommand("sweep", "deficits over a family of surfaces");
  add_common(sweep_cmd, c, config_path);
  add_surface(sweep_cmd, c);
  add_verify(sweep_cmd, c);
  sweep_cmd->add_option("--vary", c.vary, "surface parameter range key=from:to:step");
  sweep_cmd->add_option("--k-list", c.k_list, "orders substituted into every item")->delimiter(',');
  sweep_cmd->add_flag("--print-config", print_config);

  auto* dump_cmd = app.add_subcommand("dump-surface", "write the seed surface");
  add_common(dump_cmd, c, config_path);
  add_surface(dump_cmd, c);
  dump_cmd->add_flag("--print-config", print_config);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_usage;
  }
  for (auto* sub : app.get_subcommands()) c.command = sub->get_name();

  try {
    validate_config(c);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  }
  if (print_config) {
    out << to_json(c).dump(2) << '\n';
    return exit_ok;
  }

  set_workers(c.workers);
  try {
    if (c.command == "evolve") return cmd_evolve(c, out, err);
    if (c.command == "verify") return cmd_verify(c, out, err);
    if (c.command == "reference") return cmd_reference(c, out, err);
    if (c.command == "probe") return cmd_probe(c, out, err);
    if (c.command == "sweep") return cmd_sweep(c, out, err);
    return cmd_dump_surface(c, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_error;
  }
}

}  // namespace warpflow::cli
