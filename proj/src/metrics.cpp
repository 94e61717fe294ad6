#include "dhnplan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dhnplan/csv.hpp"
#include "dhnplan/error.hpp"

namespace dhnplan::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_p2h(TechKind k) { return k == TechKind::heat_pump || k == TechKind::electric_boiler; }
bool is_gas(TechKind k) {
  return k == TechKind::gas_boiler_greengas || k == TechKind::gas_boiler_hydrogen || is_chp(k);
}
bool is_nondispatchable(TechKind k) {
  return k == TechKind::geothermal || k == TechKind::residual_heat || k == TechKind::solar_thermal;
}

}  // namespace

int persistent_overload_events(const std::vector<double>& loading, double limit, int window,
                               RunCounting counting) {
  if (window < 1) throw DomainError("overload window must be >= 1");
  int events = 0;
  int run = 0;
  auto close = [&] {
    if (run >= window) events += counting == RunCounting::per_run ? 1 : run / window;
    run = 0;
  };
  for (double v : loading) {
    if (v > limit) ++run;
    else close();
  }
  close();
  return events;
}

double percentile(std::vector<double> values, double q) {
  if (!(q >= 0.0 && q <= 100.0)) throw DomainError("percentile must lie in [0, 100]");
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) throw DomainError("percentile of an empty series");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double loading_percentile_summary(const std::vector<std::vector<double>>& components,
                                  std::vector<std::size_t>* excluded, double over_time,
                                  double across) {
  std::vector<double> per;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto& s = components[c];
    if (std::none_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) {
      if (excluded) excluded->push_back(c);
      continue;
    }
    per.push_back(percentile(s, over_time));
  }
  if (per.empty()) return kNaN;
  return percentile(per, across);
}

HeatMetrics heat_metrics(const HeatSystem& system, const DesignResult& design) {
  HeatMetrics m;
  double primary = 0.0, p2h = 0.0, gas = 0.0, nd = 0.0, other = 0.0;
  for (const auto& [id, info] : design.assets) {
    const double cap = design.capacities.at(id);
    if (info.kind == TechKind::pipeline) {
      m.pipeline_capacity += cap;
    } else if (is_storage(info.kind)) {
      m.storage_capacity += cap;
    } else {
      primary += cap;
      if (is_p2h(info.kind)) p2h += cap;
      else if (is_gas(info.kind)) gas += cap;
      else if (is_nondispatchable(info.kind)) nd += cap;
      else other += cap;
    }
  }
  if (primary > 0.0) {
    m.p2h_share = 100.0 * p2h / primary;
    m.gas_share = 100.0 * gas / primary;
    m.nondispatchable_share = 100.0 * nd / primary;
    m.other_share = 100.0 * other / primary;
  }
  for (std::size_t t = 0; t < system.snapshots.size(); ++t)
    for (const auto& n : system.nodes) m.annual_heat += system.snapshots.weights[t] * n.demand[t];
  m.annual_cost = design.cost.total;
  if (!(m.annual_heat > 0.0)) throw DomainError("levelized cost of heat undefined: no heat delivered");
  m.lcoh = m.annual_cost / m.annual_heat;
  return m;
}

GridMetrics grid_metrics(const grid::FlowResult& flows, const GridMetricOptions& o) {
  GridMetrics m;
  m.divergent_snapshots = flows.divergent;
  std::vector<std::vector<double>> lines, trafos;
  int overloaded_lines = 0, overloaded_trafos = 0;
  for (std::size_t k = 0; k < flows.branch_ids.size(); ++k) {
    auto s = flows.loading_series(k, o.active_power);
    const int events = persistent_overload_events(s, o.limit, o.window, o.counting);
    if (flows.branch_kinds[k] == grid::BranchKind::line) {
      m.line_overload_events += events;
      overloaded_lines += events > 0;
      lines.push_back(std::move(s));
    } else {
      m.transformer_overload_events += events;
      overloaded_trafos += events > 0;
      trafos.push_back(std::move(s));
    }
  }
  if (!lines.empty()) m.overloaded_lines_share = 100.0 * overloaded_lines / lines.size();
  if (!trafos.empty())
    m.overloaded_transformers_share = 100.0 * overloaded_trafos / trafos.size();
  std::vector<std::size_t> ex_l, ex_t;
  m.line_loading_p = loading_percentile_summary(lines, &ex_l);
  m.transformer_loading_p = loading_percentile_summary(trafos, &ex_t);
  if (m.divergent_snapshots > 0)
    m.notes.push_back(std::to_string(m.divergent_snapshots) +
                      " divergent snapshots excluded from loading statistics");
  if (!ex_l.empty() || !ex_t.empty())
    m.notes.push_back(std::to_string(ex_l.size() + ex_t.size()) +
                      " components without a converged snapshot excluded");
  return m;
}

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::spore: return "spore";
    case RowKind::least_cost: return "least_cost";
    case RowKind::no_dhn: return "no_dhn";
  }
  return "spore";
}

const DecisionRow& DecisionSpace::row(const std::string& id) const {
  for (const auto& r : rows)
    if (r.id == id) return r;
  throw ValidationError("", "no decision-space row '" + id + "'");
}

const DecisionRow& DecisionSpace::reference() const {
  for (const auto& r : rows)
    if (r.kind == RowKind::least_cost) return r;
  throw ValidationError("", "decision space has no least-cost row");
}

double peak_demand(const HeatSystem& system) {
  double peak = 0.0;
  for (std::size_t t = 0; t < system.snapshots.size(); ++t) {
    double total = 0.0;
    for (const auto& n : system.nodes) total += n.demand[t];
    peak = std::max(peak, total);
  }
  return peak;
}

DecisionRow least_cost_row(const HeatSystem& system, const DesignResult& design,
                           const grid::FlowResult& flows, const GridMetricOptions& options) {
  DecisionRow lc;
  lc.id = "least_cost";
  lc.kind = RowKind::least_cost;
  lc.cost = design.cost.total;
  lc.heat = heat_metrics(system, design);
  lc.grid = grid_metrics(flows, options);
  lc.capacities = design.capacities;
  return lc;
}

DecisionRow baseline_row(const grid::FlowResult& flows, const GridMetricOptions& options) {
  DecisionRow base;
  base.id = "no_dhn";
  base.kind = RowKind::no_dhn;
  base.grid = grid_metrics(flows, options);
  return base;
}

DecisionRow spore_row(const HeatSystem& system, const spores::Spore& s,
                      const grid::FlowResult* flows, const GridMetricOptions& options) {
  DecisionRow r;
  r.id = s.id;
  r.kind = RowKind::spore;
  r.run_id = s.provenance.run_id;
  r.target = s.provenance.target;
  r.direction = s.provenance.direction;
  r.iteration = s.provenance.iteration;
  r.cost = s.cost;
  r.capacities = s.design.capacities;
  r.heat = heat_metrics(system, s.design);
  if (flows) {
    r.grid = grid_metrics(*flows, options);
  } else {
    r.complete = false;
    r.notes.push_back("power flow missing");
  }
  return r;
}

DecisionSpace assemble_decision_space(const HeatSystem& system, const spores::SporeSet& set,
                                      const DesignResult& lc_design,
                                      const grid::FlowResult& lc_flows,
                                      const grid::FlowResult& baseline_flows,
                                      const std::vector<SporeOutputs>& outputs,
                                      const GridMetricOptions& options) {
  DecisionSpace ds;
  ds.least_cost = set.least_cost;
  ds.budget = set.budget;
  ds.slack = set.slack;
  ds.peak_demand = peak_demand(system);
  for (const auto& a : system.assets) ds.assets[a.id] = {a.node, a.kind};
  ds.rows.push_back(least_cost_row(system, lc_design, lc_flows, options));
  ds.rows.push_back(baseline_row(baseline_flows, options));
  for (const auto& out : outputs)
    ds.rows.push_back(spore_row(system, *out.spore, out.flows, options));
  return ds;
}

const std::vector<MetricInfo>& metric_fields() {
  static const std::vector<MetricInfo> fields = {
      {"cost", "EUR/a", "cost", "lower"},
      {"p2h_share", "%", "heat", "none"},
      {"gas_share", "%", "heat", "none"},
      {"nondispatchable_share", "%", "heat", "none"},
      {"other_share", "%", "heat", "none"},
      {"storage_capacity", "MW", "heat", "none"},
      {"pipeline_capacity", "MW", "heat", "none"},
      {"lcoh", "EUR/MWh", "heat", "lower"},
      {"line_overload_events", "count", "grid", "lower"},
      {"transformer_overload_events", "count", "grid", "lower"},
      {"overloaded_lines_share", "%", "grid", "lower"},
      {"overloaded_transformers_share", "%", "grid", "lower"},
      {"line_loading_p", "%", "grid", "lower"},
      {"transformer_loading_p", "%", "grid", "lower"},
  };
  return fields;
}

std::vector<std::string> grid_metric_names() {
  std::vector<std::string> out;
  for (const auto& f : metric_fields())
    if (f.group == "grid") out.push_back(f.name);
  return out;
}

namespace {

std::optional<std::vector<std::string>> cap_assets(const DecisionSpace& space,
                                                   const std::string& what) {
  std::vector<std::string> ids;
  if (what.rfind("asset:", 0) == 0) {
    auto id = what.substr(6);
    if (!space.assets.count(id)) return std::nullopt;
    return std::vector<std::string>{id};
  }
  std::vector<TechKind> kinds;
  if (auto k = parse_tech_kind(what)) kinds.push_back(*k);
  else if (auto it = spores::technology_groups().find(what); it != spores::technology_groups().end())
    kinds = it->second;
  else if (space.assets.count(what)) return std::vector<std::string>{what};
  else return std::nullopt;
  for (const auto& [id, info] : space.assets)
    if (std::find(kinds.begin(), kinds.end(), info.kind) != kinds.end()) ids.push_back(id);
  return ids;
}

bool known_field(const DecisionSpace& space, const std::string& field) {
  if (field.rfind("cap:", 0) == 0) return cap_assets(space, field.substr(4)).has_value();
  const auto& f = metric_fields();
  return std::any_of(f.begin(), f.end(), [&](const auto& m) { return m.name == field; });
}

std::optional<double> heat_field(const HeatMetrics& h, const std::string& f) {
  if (f == "p2h_share") return h.p2h_share;
  if (f == "gas_share") return h.gas_share;
  if (f == "nondispatchable_share") return h.nondispatchable_share;
  if (f == "other_share") return h.other_share;
  if (f == "storage_capacity") return h.storage_capacity;
  if (f == "pipeline_capacity") return h.pipeline_capacity;
  if (f == "lcoh") return h.lcoh;
  return std::nullopt;
}

std::optional<double> grid_field(const GridMetrics& g, const std::string& f) {
  if (f == "line_overload_events") return g.line_overload_events;
  if (f == "transformer_overload_events") return g.transformer_overload_events;
  if (f == "overloaded_lines_share") return g.overloaded_lines_share;
  if (f == "overloaded_transformers_share") return g.overloaded_transformers_share;
  if (f == "line_loading_p") return g.line_loading_p;
  if (f == "transformer_loading_p") return g.transformer_loading_p;
  return std::nullopt;
}

}  // namespace

std::optional<double> field_value(const DecisionSpace& space, const DecisionRow& row,
                                  const std::string& field) {
  if (field.rfind("cap:", 0) == 0) {
    if (row.kind == RowKind::no_dhn) return std::nullopt;
    auto ids = cap_assets(space, field.substr(4));
    if (!ids) throw ValidationError("", "unknown field '" + field + "'");
    double sum = 0.0;
    for (const auto& id : *ids) {
      auto it = row.capacities.find(id);
      if (it != row.capacities.end()) sum += it->second;
    }
    return sum;
  }
  if (field == "cost") return row.cost;
  if (row.heat)
    if (auto v = heat_field(*row.heat, field)) return v;
  if (row.grid)
    if (auto v = grid_field(*row.grid, field)) return v;
  if (!known_field(space, field)) throw ValidationError("", "unknown field '" + field + "'");
  return std::nullopt;
}

Predicate parse_predicate(const std::string& text, const DecisionSpace& space) {
  static const std::vector<std::string> ops = {"==", "!=", "<=", ">=", "<", ">"};
  Predicate p;
  p.text = text;
  std::size_t at = std::string::npos;
  for (const auto& op : ops) {
    auto pos = text.find(op);
    if (pos != std::string::npos && (at == std::string::npos || pos < at ||
                                     (pos == at && op.size() > p.op.size()))) {
      at = pos;
      p.op = op;
    }
  }
  if (at == std::string::npos) throw ValidationError("predicate '" + text + "'", "no comparison operator");
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  };
  p.field = trim(text.substr(0, at));
  auto rhs = trim(text.substr(at + p.op.size()));
  if (!known_field(space, p.field))
    throw ValidationError("predicate '" + text + "'", "unknown field '" + p.field + "'");

  double factor = 1.0;
  std::string ref = rhs;
  if (auto star = rhs.find('*'); star != std::string::npos) {
    factor = csv::parse_double(trim(rhs.substr(0, star)), "predicate '" + text + "'", "factor");
    ref = trim(rhs.substr(star + 1));
  }
  if (ref == "peak_demand") p.threshold = factor * space.peak_demand;
  else if (ref == "least_cost") p.threshold = factor * space.least_cost;
  else if (rhs.find('*') == std::string::npos)
    p.threshold = csv::parse_double(rhs, "predicate '" + text + "'", "threshold");
  else throw ValidationError("predicate '" + text + "'", "unknown reference '" + ref + "'");
  return p;
}

bool satisfies(const DecisionSpace& space, const DecisionRow& row, const Predicate& p) {
  auto v = field_value(space, row, p.field);
  if (!v || std::isnan(*v)) return false;
  const double tol = kFilterTolerance;
  const double a = *v, b = p.threshold;
  if (p.op == "==") return std::abs(a - b) <= tol;
  if (p.op == "!=") return std::abs(a - b) > tol;
  if (p.op == "<=") return a <= b + tol;
  if (p.op == ">=") return a >= b - tol;
  if (p.op == "<") return a < b - tol;
  if (p.op == ">") return a > b + tol;
  return false;
}

FilterResult filter_constraints(const DecisionSpace& space,
                                const std::vector<std::string>& predicates) {
  std::vector<Predicate> parsed;
  for (const auto& t : predicates) parsed.push_back(parse_predicate(t, space));
  FilterResult out;
  for (const auto& p : parsed) out.audit.push_back({p.text, p.threshold, 0});
  for (const auto& r : space.rows) {
    if (r.kind != RowKind::spore || !r.complete) continue;
    bool all = true;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      if (satisfies(space, r, parsed[i])) ++out.audit[i].passed;
      else all = false;
    }
    if (all) out.ids.push_back(r.id);
  }
  return out;
}

FilterResult filter_preset(const DecisionSpace& space, const std::string& preset) {
  auto it = space.presets.find(preset);
  if (it == space.presets.end()) throw ValidationError("", "unknown preset '" + preset + "'");
  return filter_constraints(space, it->second);
}

std::vector<std::string> lower_envelope(const DecisionSpace& space,
                                        const std::vector<std::string>* candidates) {
  const auto& ref = space.reference();
  if (!ref.grid) throw ValidationError("", "least-cost row has no grid metrics");
  const auto names = grid_metric_names();
  std::vector<std::string> out;
  for (const auto& r : space.rows) {
    if (r.kind == RowKind::no_dhn || !r.grid || !r.complete) continue;
    if (candidates && std::find(candidates->begin(), candidates->end(), r.id) == candidates->end())
      continue;
    bool inside = true;
    for (const auto& n : names) {
      const double v = *grid_field(*r.grid, n), rv = *grid_field(*ref.grid, n);
      if (!(v <= rv || (std::isnan(v) && std::isnan(rv)))) inside = false;
    }
    if (inside) out.push_back(r.id);
  }
  return out;
}

namespace {

std::string fmt(std::optional<double> v) {
  return v && std::isfinite(*v) ? csv::format_double(*v) : "";
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
double from_num(const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); }

}  // namespace

std::string to_csv(const DecisionSpace& space) {
  std::ostringstream out;
  std::vector<std::string> cap_ids;
  for (const auto& [id, info] : space.assets) cap_ids.push_back(id);
  out << "id,kind,complete,run_id,target,direction,iteration";
  for (const auto& f : metric_fields()) out << ',' << f.name;
  out << ",divergent_snapshots";
  for (const auto& id : cap_ids) out << ",cap:" << id;
  out << '\n';
  for (const auto& r : space.rows) {
    out << csv_cell(r.id) << ',' << to_string(r.kind) << ',' << (r.complete ? "true" : "false")
        << ',' << csv_cell(r.run_id) << ',' << csv_cell(r.target) << ',' << r.direction << ','
        << (r.iteration >= 0 ? std::to_string(r.iteration) : "");
    for (const auto& f : metric_fields()) out << ',' << fmt(field_value(space, r, f.name));
    out << ',' << (r.grid ? std::to_string(r.grid->divergent_snapshots) : "");
    for (const auto& id : cap_ids) {
      auto it = r.capacities.find(id);
      out << ',' << (it == r.capacities.end() ? "" : csv::format_double(it->second));
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const HeatMetrics& m) {
  return {{"p2h_share", m.p2h_share},
          {"gas_share", m.gas_share},
          {"nondispatchable_share", m.nondispatchable_share},
          {"other_share", m.other_share},
          {"storage_capacity", m.storage_capacity},
          {"pipeline_capacity", m.pipeline_capacity},
          {"annual_cost", m.annual_cost},
          {"annual_heat", m.annual_heat},
          {"lcoh", m.lcoh}};
}

nlohmann::json to_json(const GridMetrics& m) {
  return {{"line_overload_events", m.line_overload_events},
          {"transformer_overload_events", m.transformer_overload_events},
          {"overloaded_lines_share", m.overloaded_lines_share},
          {"overloaded_transformers_share", m.overloaded_transformers_share},
          {"line_loading_p", num(m.line_loading_p)},
          {"transformer_loading_p", num(m.transformer_loading_p)},
          {"divergent_snapshots", m.divergent_snapshots},
          {"notes", m.notes}};
}

namespace {

HeatMetrics heat_from_json(const nlohmann::json& j) {
  HeatMetrics m;
  m.p2h_share = j.at("p2h_share").get<double>();
  m.gas_share = j.at("gas_share").get<double>();
  m.nondispatchable_share = j.at("nondispatchable_share").get<double>();
  m.other_share = j.at("other_share").get<double>();
  m.storage_capacity = j.at("storage_capacity").get<double>();
  m.pipeline_capacity = j.at("pipeline_capacity").get<double>();
  m.annual_cost = j.at("annual_cost").get<double>();
  m.annual_heat = j.at("annual_heat").get<double>();
  m.lcoh = j.at("lcoh").get<double>();
  return m;
}

GridMetrics grid_from_json(const nlohmann::json& j) {
  GridMetrics m;
  m.line_overload_events = j.at("line_overload_events").get<int>();
  m.transformer_overload_events = j.at("transformer_overload_events").get<int>();
  m.overloaded_lines_share = j.at("overloaded_lines_share").get<double>();
  m.overloaded_transformers_share = j.at("overloaded_transformers_share").get<double>();
  m.line_loading_p = from_num(j.at("line_loading_p"));
  m.transformer_loading_p = from_num(j.at("transformer_loading_p"));
  m.divergent_snapshots = j.at("divergent_snapshots").get<int>();
  m.notes = j.at("notes").get<std::vector<std::string>>();
  return m;
}

}  // namespace

nlohmann::json to_json(const DecisionRow& r) {
  return {{"id", r.id},
          {"kind", to_string(r.kind)},
          {"complete", r.complete},
          {"run_id", r.run_id},
          {"target", r.target},
          {"direction", r.direction},
          {"iteration", r.iteration},
          {"cost", r.cost ? num(*r.cost) : nlohmann::json()},
          {"heat", r.heat ? to_json(*r.heat) : nlohmann::json()},
          {"grid", r.grid ? to_json(*r.grid) : nlohmann::json()},
          {"capacities", r.capacities},
          {"notes", r.notes}};
}

DecisionRow row_from_json(const nlohmann::json& r) {
  DecisionRow row;
  row.id = r.at("id").get<std::string>();
  const auto kind = r.at("kind").get<std::string>();
  row.kind = kind == "least_cost" ? RowKind::least_cost
             : kind == "no_dhn"   ? RowKind::no_dhn
                                  : RowKind::spore;
  row.complete = r.at("complete").get<bool>();
  row.run_id = r.at("run_id").get<std::string>();
  row.target = r.at("target").get<std::string>();
  row.direction = r.at("direction").get<std::string>();
  row.iteration = r.at("iteration").get<int>();
  if (!r.at("cost").is_null()) row.cost = r.at("cost").get<double>();
  if (!r.at("heat").is_null()) row.heat = heat_from_json(r.at("heat"));
  if (!r.at("grid").is_null()) row.grid = grid_from_json(r.at("grid"));
  row.capacities = r.at("capacities").get<std::map<std::string, double>>();
  row.notes = r.at("notes").get<std::vector<std::string>>();
  return row;
}

nlohmann::json to_json(const DecisionSpace& s) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& f : metric_fields())
    metrics.push_back({{"name", f.name}, {"unit", f.unit}, {"group", f.group},
                       {"direction", f.direction}});
  nlohmann::json assets = nlohmann::json::object();
  for (const auto& [id, info] : s.assets)
    assets[id] = {{"node", info.node}, {"kind", std::string(dhnplan::to_string(info.kind))}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) rows.push_back(to_json(r));
  return {{"schema_version", kDecisionSpaceSchema},
          {"least_cost", s.least_cost},
          {"budget", s.budget},
          {"slack", s.slack},
          {"peak_demand_mw", s.peak_demand},
          {"benchmarks", {{"least_cost", "least_cost"}, {"no_dhn", "no_dhn"}}},
          {"metrics", metrics},
          {"assets", assets},
          {"presets", s.presets},
          {"envelope", lower_envelope(s)},
          {"rows", rows}};
}

DecisionSpace decision_space_from_json(const nlohmann::json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kDecisionSpaceSchema)
    throw ValidationError("decision_space.json",
                          "unsupported schema version " + std::to_string(version));
  DecisionSpace s;
  s.least_cost = j.at("least_cost").get<double>();
  s.budget = j.at("budget").get<double>();
  s.slack = j.at("slack").get<double>();
  s.peak_demand = j.at("peak_demand_mw").get<double>();
  for (const auto& [id, a] : j.at("assets").items()) {
    auto kind = parse_tech_kind(a.at("kind").get<std::string>());
    if (!kind) throw ValidationError("decision_space.json", "unknown kind for asset " + id);
    s.assets[id] = {a.at("node").get<std::string>(), *kind};
  }
  s.presets = j.at("presets").get<std::map<std::string, std::vector<std::string>>>();
  for (const auto& r : j.at("rows")) s.rows.push_back(row_from_json(r));
  return s;
}

}  // namespace dhnplan::metrics
