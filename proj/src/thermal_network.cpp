#include "dhnplan/thermal_network.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dhnplan/csv.hpp"
#include "dhnplan/error.hpp"

namespace dhnplan {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 13> kKindNames = {
    "heat_pump",     "electric_boiler", "gas_boiler_greengas", "gas_boiler_hydrogen",
    "chp_greengas",  "chp_hydrogen",    "geothermal",          "solar_thermal",
    "residual_heat", "waste_to_energy", "tes_short_term",      "ht_ates",
    "pipeline",
};

// Default technology parameters (district heating cost table).
struct KindDefaults {
  double investment_cost;
  double lifetime;
  double efficiency = 1.0;
  double efficiency_elec = 0.0;
  std::optional<double> spf;
  double h_max = 0.0;
  double efficiency_charge = 1.0;
  double efficiency_discharge = 1.0;
  double standing_loss = 0.0;
  std::optional<double> full_load_hours;
};

KindDefaults defaults_for(TechKind kind) {
  switch (kind) {
    case TechKind::heat_pump: return {2'039'000, 15};
    case TechKind::chp_greengas: return {2'000'000, 15, 0.45, 0.45};
    case TechKind::chp_hydrogen: return {2'100'000, 15, 0.45, 0.45};
    case TechKind::electric_boiler: return {305'000, 15, 0.9};
    case TechKind::gas_boiler_greengas: return {200'000, 15, 0.8};
    case TechKind::gas_boiler_hydrogen: return {270'000, 15, 0.7};
    case TechKind::geothermal: return {2'500'000, 15, 1.0, 0.0, 6.0};
    case TechKind::solar_thermal: return {435'000, 15};
    case TechKind::residual_heat: return {1'200'000, 15};
    case TechKind::waste_to_energy: return {600'000, 15, 0.8};
    case TechKind::tes_short_term: return {250'000, 30, 1.0, 0.0, std::nullopt, 6.0, 0.99, 0.99};
    case TechKind::ht_ates:
      // Round-trip 0.7 applied on discharge; standing loss has a 24 h time constant.
      return {199'550, 30, 1.0, 0.0, 50.0, 0.0, 1.0, 0.7, 1.0 - std::exp(-1.0 / 24.0), 3000.0};
    case TechKind::pipeline: return {100, 30};
  }
  return {0, 1};
}

constexpr std::array<std::pair<const char*, Series CarrierPrices::*>, 5> kPriceColumns = {{
    {"electricity", &CarrierPrices::electricity},
    {"hydrogen", &CarrierPrices::hydrogen},
    {"green_gas", &CarrierPrices::green_gas},
    {"waste", &CarrierPrices::waste},
    {"residual_heat", &CarrierPrices::residual_heat},
}};

class SeriesStore {
 public:
  SeriesStore(fs::path dir, const SnapshotIndex* snapshots)
      : dir_(std::move(dir)), snapshots_(snapshots) {}

  const csv::Table& file(const std::string& name) {
    auto it = files_.find(name);
    if (it != files_.end()) return it->second;
    auto path = dir_ / (name + ".csv");
    auto table = csv::Table::read(path);
    check_timestamps(table);
    return files_.emplace(name, std::move(table)).first->second;
  }

  // Resolves "<file>.<column>"; `owner` is the referencing record's locus.
  Series resolve(const std::string& ref, const std::string& owner) {
    auto dot = ref.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == ref.size())
      throw ValidationError(owner, "series reference '" + ref + "' is not of the form file.column");
    const auto& t = file(ref.substr(0, dot));
    auto col = t.column(ref.substr(dot + 1));
    if (!col) throw ValidationError(owner, "dangling series reference '" + ref + "'");
    return column_values(t, *col);
  }

  Series column_values(const csv::Table& t, std::size_t col) {
    Series out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r)
      out[r] = csv::parse_double(t.at(r, col), t.locus(r), t.header()[col]);
    return out;
  }

 private:
  void check_timestamps(const csv::Table& t) const {
    if (!snapshots_) return;
    if (t.rows() != snapshots_->size()) {
      throw ValidationError(t.source(), "series length mismatch: " + std::to_string(t.rows()) +
                                            " rows against " + std::to_string(snapshots_->size()) +
                                            " snapshots");
    }
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.at(r, 0) != snapshots_->timestamps[r])
        throw ValidationError(t.locus(r), "timestamp '" + t.at(r, 0) +
                                              "' does not match snapshot '" +
                                              snapshots_->timestamps[r] + "'");
    }
  }

  fs::path dir_;
  const SnapshotIndex* snapshots_;
  std::map<std::string, csv::Table> files_;
};

void require_range(double v, double lo, double hi, bool lo_open, const std::string& locus,
                   std::string_view field) {
  bool ok = (lo_open ? v > lo : v >= lo) && v <= hi;
  if (!ok) {
    std::ostringstream msg;
    msg << "field '" << field << "' = " << v << " outside " << (lo_open ? "(" : "[") << lo << ", "
        << hi << "]";
    throw ValidationError(locus, msg.str());
  }
}

// `source` is the series table the values came from; its row locus is
// appended to the message.
void check_unit_series(const Series& s, const std::string& locus, std::string_view what,
                       const csv::Table& source) {
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (!(s[t] >= 0.0 && s[t] <= 1.0)) {
      std::ostringstream msg;
      msg << what << " value " << s[t] << " at snapshot " << t << " outside [0, 1] ("
          << source.locus(t) << ")";
      throw ValidationError(locus, msg.str());
    }
  }
}

SnapshotIndex load_snapshots(const fs::path& series_dir) {
  auto t = csv::Table::read(series_dir / "snapshots.csv");
  SnapshotIndex idx;
  auto wcol = t.column("weight");
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto& ts = t.at(r, 0);
    if (!idx.timestamps.empty() && !(idx.timestamps.back() < ts))
      throw ValidationError(t.locus(r), "timestamps must be strictly increasing");
    idx.timestamps.push_back(ts);
    double w = wcol ? csv::parse_double(t.at(r, *wcol), t.locus(r), "weight") : 1.0;
    if (!(w > 0.0)) throw ValidationError(t.locus(r), "snapshot weight must be strictly positive");
    idx.weights.push_back(w);
  }
  if (idx.timestamps.empty()) throw ValidationError(t.source(), "no snapshots");
  return idx;
}

TechnologyAsset parse_asset(const csv::Table& t, std::size_t r) {
  const auto locus = t.locus(r) + " (asset " + t.get(r, "id") + ")";
  TechnologyAsset a;
  a.id = t.get(r, "id");
  if (a.id.empty()) throw ValidationError(t.locus(r), "asset without id");
  a.node = t.get(r, "node");
  auto kind = parse_tech_kind(t.get(r, "kind"));
  if (!kind) throw ValidationError(locus, "unknown technology kind '" + t.get(r, "kind") + "'");
  a.kind = *kind;
  auto d = defaults_for(a.kind);

  auto num = [&](std::string_view field, double fallback) {
    return csv::parse_optional_double(t.get(r, field), locus, field).value_or(fallback);
  };
  auto opt = [&](std::string_view field, std::optional<double> fallback) {
    auto v = csv::parse_optional_double(t.get(r, field), locus, field);
    return v ? v : fallback;
  };

  a.investment_cost = num("investment_cost", d.investment_cost);
  a.lifetime = num("lifetime", d.lifetime);
  a.variable_cost = num("variable_cost", 0.0);
  a.efficiency = num("efficiency", d.efficiency);
  a.efficiency_elec = num("efficiency_elec", d.efficiency_elec);
  a.spf = opt("spf", d.spf);
  auto pot = csv::parse_optional_double(t.get(r, "potential_capacity"), locus, "potential_capacity");
  if (!pot) throw ValidationError(locus, "missing potential_capacity");
  a.potential_capacity = *pot;
  a.availability_ref = t.get(r, "availability");
  a.to_node = t.get(r, "to_node");
  a.length_m = num("length_m", 0.0);
  a.loss_per_m = num("loss_per_m", 1e-7);
  a.max_capacity = num("max_capacity", 250.0);
  a.h_max = num("h_max", d.h_max);
  a.standing_loss = num("standing_loss", d.standing_loss);
  a.efficiency_charge = num("efficiency_charge", d.efficiency_charge);
  a.efficiency_discharge = num("efficiency_discharge", d.efficiency_discharge);
  a.full_load_hours = opt("full_load_hours", d.full_load_hours);

  require_range(a.investment_cost, 0.0, HUGE_VAL, false, locus, "investment_cost");
  if (!(a.lifetime >= 1.0)) throw ValidationError(locus, "field 'lifetime' must be >= 1");
  require_range(a.potential_capacity, 0.0, HUGE_VAL, false, locus, "potential_capacity");
  if (a.kind != TechKind::pipeline && !is_storage(a.kind)) {
    require_range(a.efficiency, 0.0, 1.0, true, locus, "efficiency");
  }
  if (is_chp(a.kind)) {
    require_range(a.efficiency_elec, 0.0, 1.0, true, locus, "efficiency_elec");
    if (a.efficiency + a.efficiency_elec > 1.0 + 1e-12)
      throw ValidationError(locus, "CHP heat + electric efficiency exceeds 1");
  }
  if (a.spf && !(*a.spf > 0.0)) throw ValidationError(locus, "field 'spf' must be > 0");
  if ((a.kind == TechKind::geothermal || a.kind == TechKind::ht_ates) && !a.spf)
    throw ValidationError(locus, "missing spf");
  if (is_storage(a.kind)) {
    if (!(a.h_max > 0.0)) throw ValidationError(locus, "storage requires h_max > 0");
    require_range(a.efficiency_charge, 0.0, 1.0, true, locus, "efficiency_charge");
    require_range(a.efficiency_discharge, 0.0, 1.0, true, locus, "efficiency_discharge");
    if (!(a.standing_loss >= 0.0 && a.standing_loss < 1.0))
      throw ValidationError(locus, "field 'standing_loss' outside [0, 1)");
  }
  if (a.kind == TechKind::pipeline) {
    if (a.to_node.empty()) throw ValidationError(locus, "pipeline without to_node");
    if (a.to_node == a.node) throw ValidationError(locus, "pipeline connects a node to itself");
    require_range(a.length_m, 0.0, HUGE_VAL, false, locus, "length_m");
    require_range(a.loss_per_m, 0.0, HUGE_VAL, false, locus, "loss_per_m");
    require_range(a.max_capacity, 0.0, HUGE_VAL, false, locus, "max_capacity");
    if (a.loss_per_m * a.length_m >= 1.0)
      throw ValidationError(locus, "pipeline loses all heat (loss_per_m * length_m >= 1)");
  }
  return a;
}

}  // namespace

std::string_view to_string(TechKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<TechKind> parse_tech_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<TechKind>(i);
  return std::nullopt;
}

std::string_view to_string(Carrier carrier) {
  switch (carrier) {
    case Carrier::none: return "none";
    case Carrier::electricity: return "electricity";
    case Carrier::hydrogen: return "hydrogen";
    case Carrier::green_gas: return "green_gas";
    case Carrier::waste: return "waste";
    case Carrier::residual_heat: return "residual_heat";
  }
  return "none";
}

Carrier input_carrier(TechKind kind) {
  switch (kind) {
    case TechKind::heat_pump:
    case TechKind::electric_boiler: return Carrier::electricity;
    case TechKind::gas_boiler_greengas:
    case TechKind::chp_greengas: return Carrier::green_gas;
    case TechKind::gas_boiler_hydrogen:
    case TechKind::chp_hydrogen: return Carrier::hydrogen;
    case TechKind::waste_to_energy: return Carrier::waste;
    case TechKind::residual_heat: return Carrier::residual_heat;
    default: return Carrier::none;
  }
}

bool is_converter(TechKind kind) {
  switch (kind) {
    case TechKind::heat_pump:
    case TechKind::electric_boiler:
    case TechKind::gas_boiler_greengas:
    case TechKind::gas_boiler_hydrogen:
    case TechKind::waste_to_energy: return true;
    default: return false;
  }
}

bool is_chp(TechKind kind) { return kind == TechKind::chp_greengas || kind == TechKind::chp_hydrogen; }

bool is_storage(TechKind kind) { return kind == TechKind::tes_short_term || kind == TechKind::ht_ates; }

bool consumes_electricity(TechKind kind) {
  return kind == TechKind::heat_pump || kind == TechKind::electric_boiler ||
         kind == TechKind::geothermal || kind == TechKind::ht_ates;
}

double SnapshotIndex::horizon_hours() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double TechnologyAsset::capacity_bound() const {
  return kind == TechKind::pipeline ? std::min(potential_capacity, max_capacity) : potential_capacity;
}

const Series* CarrierPrices::price(Carrier carrier) const {
  switch (carrier) {
    case Carrier::electricity: return &electricity;
    case Carrier::hydrogen: return &hydrogen;
    case Carrier::green_gas: return &green_gas;
    case Carrier::waste: return &waste;
    case Carrier::residual_heat: return &residual_heat;
    case Carrier::none: return nullptr;
  }
  return nullptr;
}

const HeatNode* HeatSystem::find_node(std::string_view id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const HeatNode& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

const TechnologyAsset* HeatSystem::find_asset(std::string_view id) const {
  auto it = std::find_if(assets.begin(), assets.end(), [&](const auto& a) { return a.id == id; });
  return it == assets.end() ? nullptr : &*it;
}

Series HeatSystem::cop_series() const {
  Series out(snapshots.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    double delta = weather.sink_temperature - weather.ambient_temperature.at(t);
    out[t] = heat_pump_cop(delta, cop);
  }
  return out;
}

double HeatSystem::peak_demand() const {
  double peak = 0.0;
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    double total = 0.0;
    for (const auto& n : nodes) total += n.demand[t];
    peak = std::max(peak, total);
  }
  return peak;
}

double HeatSystem::annual_heat_demand() const {
  double total = 0.0;
  for (std::size_t t = 0; t < snapshots.size(); ++t)
    for (const auto& n : nodes) total += snapshots.weights[t] * n.demand[t];
  return total;
}

double annuity_factor(double lifetime_years, double discount_rate) {
  if (!(lifetime_years >= 1.0)) throw DomainError("annuity_factor: lifetime must be >= 1 year");
  if (!(discount_rate >= 0.0)) throw DomainError("annuity_factor: discount rate must be >= 0");
  if (discount_rate == 0.0) return lifetime_years;
  // expm1/log1p keep the tiny-rate regime accurate, so the limit at 0 is continuous.
  return -std::expm1(-lifetime_years * std::log1p(discount_rate)) / discount_rate;
}

double heat_pump_cop(double delta_t, const CopCoefficients& c) {
  double cop = c.a0 + c.a1 * delta_t + c.a2 * delta_t * delta_t;
  if (!(cop > 1.0)) {
    std::ostringstream msg;
    msg << "non-physical heat pump COP " << cop << " at temperature lift " << delta_t << " K";
    throw ConfigurationError(msg.str());
  }
  return cop;
}

HeatSystem load_heat_system(const fs::path& dir, const LoadOptions& options) {
  if (!fs::is_directory(dir)) throw ValidationError(dir.string(), "missing system directory");
  if (!(options.demand_scale > 0.0)) throw DomainError("demand scale must be > 0");

  HeatSystem sys;
  sys.demand_scale = options.demand_scale;
  sys.weather_variant = options.weather_variant;
  const auto series_dir = dir / "series";
  sys.snapshots = load_snapshots(series_dir);
  const std::size_t n_snap = sys.snapshots.size();
  SeriesStore store(series_dir, &sys.snapshots);

  // system-level parameters
  if (fs::exists(dir / "system.yaml")) {
    try {
      auto y = YAML::LoadFile((dir / "system.yaml").string());
      if (y["sink_temperature"]) sys.weather.sink_temperature = y["sink_temperature"].as<double>();
      if (auto c = y["cop"]) {
        if (c["a0"]) sys.cop.a0 = c["a0"].as<double>();
        if (c["a1"]) sys.cop.a1 = c["a1"].as<double>();
        if (c["a2"]) sys.cop.a2 = c["a2"].as<double>();
      }
    } catch (const YAML::Exception& e) {
      throw ValidationError((dir / "system.yaml").string(), e.what());
    }
  }
  if (options.sink_temperature) sys.weather.sink_temperature = *options.sink_temperature;
  if (options.cop) sys.cop = *options.cop;

  // nodes
  {
    auto t = csv::Table::read(dir / "nodes.csv");
    t.require_column("id");
    t.require_column("demand");
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      HeatNode n;
      n.id = t.get(r, "id");
      const auto locus = t.locus(r) + " (node " + n.id + ")";
      if (n.id.empty()) throw ValidationError(t.locus(r), "node without id");
      if (!seen.insert(n.id).second) throw ValidationError(locus, "duplicate node id");
      n.demand_ref = t.get(r, "demand");
      n.demand = store.resolve(n.demand_ref, locus);
      for (std::size_t k = 0; k < n.demand.size(); ++k) {
        if (n.demand[k] < 0.0)
          throw ValidationError(locus, "negative demand at snapshot " + std::to_string(k));
        n.demand[k] *= options.demand_scale;
      }
      sys.nodes.push_back(std::move(n));
    }
    if (sys.nodes.empty()) throw ValidationError(t.source(), "no nodes");
  }

  // assets
  {
    auto t = csv::Table::read(dir / "assets.csv");
    for (auto col : {"id", "node", "kind", "potential_capacity"}) t.require_column(col);
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto a = parse_asset(t, r);
      const auto locus = t.locus(r) + " (asset " + a.id + ")";
      if (!seen.insert(a.id).second) throw ValidationError(locus, "duplicate asset id");
      if (!sys.find_node(a.node)) throw ValidationError(locus, "dangling node reference '" + a.node + "'");
      if (a.kind == TechKind::pipeline && !sys.find_node(a.to_node))
        throw ValidationError(locus, "dangling node reference '" + a.to_node + "'");
      if (!a.availability_ref.empty()) {
        a.availability = store.resolve(a.availability_ref, locus);
        check_unit_series(a.availability, locus, "availability",
                          store.file(a.availability_ref.substr(0, a.availability_ref.rfind('.'))));
      }
      sys.assets.push_back(std::move(a));
    }
  }

  // carrier prices
  {
    const auto& t = store.file("prices");
    for (auto [name, member] : kPriceColumns) {
      if (auto c = t.column(name)) sys.prices.*member = store.column_values(t, *c);
    }
  }

  // weather
  {
    std::string name = "weather";
    if (!options.weather_variant.empty()) {
      name = "weather_" + options.weather_variant;
      if (!fs::exists(series_dir / (name + ".csv")))
        throw ValidationError((series_dir / (name + ".csv")).string(),
                              "missing file for weather variant '" + options.weather_variant + "'");
    }
    const auto& t = store.file(name);
    sys.weather.ambient_temperature = store.column_values(t, t.require_column("ambient_temperature"));
    if (auto c = t.column("solar_thermal_cf")) {
      sys.weather.solar_thermal_cf = store.column_values(t, *c);
      check_unit_series(sys.weather.solar_thermal_cf, t.source(), "solar_thermal_cf", t);
    }
  }
  for (auto& a : sys.assets) {
    if (a.kind == TechKind::solar_thermal && a.availability_ref.empty()) {
      if (sys.weather.solar_thermal_cf.size() != n_snap)
        throw ValidationError("assets.csv (asset " + a.id + ")",
                              "solar thermal asset needs weather solar_thermal_cf");
      a.availability = sys.weather.solar_thermal_cf;
    }
  }

  // bus map
  if (fs::exists(dir / "bus_map.csv")) {
    auto t = csv::Table::read(dir / "bus_map.csv");
    t.require_column("node");
    t.require_column("bus");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto node_id = t.get(r, "node");
      auto it = std::find_if(sys.nodes.begin(), sys.nodes.end(),
                             [&](const HeatNode& n) { return n.id == node_id; });
      if (it == sys.nodes.end())
        throw ValidationError(t.locus(r), "dangling node reference '" + node_id + "'");
      it->electric_bus = t.get(r, "bus");
    }
  }
  return sys;
}

void save_heat_system(const HeatSystem& sys, const fs::path& dir) {
  fs::create_directories(dir / "series");
  const auto& ts = sys.snapshots.timestamps;
  auto fmt = csv::format_double;

  {
    std::ostringstream o;
    o << "timestamp,weight\n";
    for (std::size_t t = 0; t < ts.size(); ++t) o << ts[t] << ',' << fmt(sys.snapshots.weights[t]) << '\n';
    csv::write_file(dir / "series" / "snapshots.csv", o.str());
  }

  // Group referenced series by file so each file is written once.
  std::map<std::string, std::map<std::string, const Series*>> files;
  auto add_ref = [&](const std::string& ref, const Series* values) {
    auto dot = ref.rfind('.');
    files[ref.substr(0, dot)][ref.substr(dot + 1)] = values;
  };
  std::vector<Series> unscaled;
  unscaled.reserve(sys.nodes.size());
  for (const auto& n : sys.nodes) {
    Series s = n.demand;
    for (auto& v : s) v /= sys.demand_scale;
    unscaled.push_back(std::move(s));
    add_ref(n.demand_ref, &unscaled.back());
  }
  for (const auto& a : sys.assets)
    if (!a.availability_ref.empty()) add_ref(a.availability_ref, &a.availability);

  for (auto [name, member] : kPriceColumns) {
    const Series& s = sys.prices.*member;
    if (!s.empty()) files["prices"][name] = &s;
  }
  const std::string weather_file =
      sys.weather_variant.empty() ? "weather" : "weather_" + sys.weather_variant;
  files[weather_file]["ambient_temperature"] = &sys.weather.ambient_temperature;
  if (!sys.weather.solar_thermal_cf.empty())
    files[weather_file]["solar_thermal_cf"] = &sys.weather.solar_thermal_cf;
  if (!files.count("prices")) files["prices"];

  for (const auto& [file, cols] : files) {
    std::ostringstream o;
    o << "timestamp";
    for (const auto& [name, _] : cols) o << ',' << name;
    o << '\n';
    for (std::size_t t = 0; t < ts.size(); ++t) {
      o << ts[t];
      for (const auto& [_, s] : cols) o << ',' << fmt((*s)[t]);
      o << '\n';
    }
    csv::write_file(dir / "series" / (file + ".csv"), o.str());
  }

  {
    std::ostringstream o;
    o << "id,demand\n";
    for (const auto& n : sys.nodes) o << n.id << ',' << n.demand_ref << '\n';
    csv::write_file(dir / "nodes.csv", o.str());
  }
  {
    std::ostringstream o;
    o << "id,node,kind,investment_cost,lifetime,variable_cost,efficiency,efficiency_elec,spf,"
         "potential_capacity,availability,to_node,length_m,loss_per_m,max_capacity,h_max,"
         "standing_loss,efficiency_charge,efficiency_discharge,full_load_hours\n";
    for (const auto& a : sys.assets) {
      o << a.id << ',' << a.node << ',' << to_string(a.kind) << ',' << fmt(a.investment_cost) << ','
        << fmt(a.lifetime) << ',' << fmt(a.variable_cost) << ',' << fmt(a.efficiency) << ','
        << fmt(a.efficiency_elec) << ',' << (a.spf ? fmt(*a.spf) : "") << ','
        << fmt(a.potential_capacity) << ',' << a.availability_ref << ',' << a.to_node << ','
        << fmt(a.length_m) << ',' << fmt(a.loss_per_m) << ',' << fmt(a.max_capacity) << ','
        << fmt(a.h_max) << ',' << fmt(a.standing_loss) << ',' << fmt(a.efficiency_charge) << ','
        << fmt(a.efficiency_discharge) << ',' << (a.full_load_hours ? fmt(*a.full_load_hours) : "")
        << '\n';
    }
    csv::write_file(dir / "assets.csv", o.str());
  }
  {
    std::ostringstream o;
    o << "node,bus\n";
    for (const auto& n : sys.nodes)
      if (n.electric_bus) o << n.id << ',' << *n.electric_bus << '\n';
    csv::write_file(dir / "bus_map.csv", o.str());
  }
  {
    YAML::Emitter y;
    y.SetDoublePrecision(17);
    y << YAML::BeginMap << YAML::Key << "sink_temperature" << YAML::Value
      << sys.weather.sink_temperature << YAML::Key << "cop" << YAML::Value << YAML::BeginMap
      << YAML::Key << "a0" << YAML::Value << sys.cop.a0 << YAML::Key << "a1" << YAML::Value
      << sys.cop.a1 << YAML::Key << "a2" << YAML::Value << sys.cop.a2 << YAML::EndMap
      << YAML::EndMap;
    csv::write_file(dir / "system.yaml", std::string(y.c_str()) + "\n");
  }
}

void validate_bus_mapping(const HeatSystem& sys, const std::vector<std::string>& bus_ids) {
  for (const auto& a : sys.assets) {
    if (!consumes_electricity(a.kind) && !is_chp(a.kind)) continue;
    const auto* node = sys.find_node(a.node);
    if (!node->electric_bus)
      throw ValidationError("bus_map.csv", "node '" + node->id + "' hosts electric asset '" + a.id +
                                               "' but has no bus mapping");
    if (std::find(bus_ids.begin(), bus_ids.end(), *node->electric_bus) == bus_ids.end())
      throw ValidationError("bus_map.csv", "node '" + node->id + "' maps to unknown bus '" +
                                               *node->electric_bus + "'");
  }
}

}  // namespace dhnplan
