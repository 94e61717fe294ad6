#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dhnplan {

using Series = std::vector<double>;

enum class TechKind {
  heat_pump,
  electric_boiler,
  gas_boiler_greengas,
  gas_boiler_hydrogen,
  chp_greengas,
  chp_hydrogen,
  geothermal,
  solar_thermal,
  residual_heat,
  waste_to_energy,
  tes_short_term,
  ht_ates,
  pipeline,
};

inline constexpr std::array kAllTechKinds = {
    TechKind::heat_pump,      TechKind::electric_boiler, TechKind::gas_boiler_greengas,
    TechKind::gas_boiler_hydrogen, TechKind::chp_greengas, TechKind::chp_hydrogen,
    TechKind::geothermal,     TechKind::solar_thermal,   TechKind::residual_heat,
    TechKind::waste_to_energy, TechKind::tes_short_term, TechKind::ht_ates,
    TechKind::pipeline,
};

std::string_view to_string(TechKind kind);
std::optional<TechKind> parse_tech_kind(std::string_view name);

enum class Carrier { none, electricity, hydrogen, green_gas, waste, residual_heat };

std::string_view to_string(Carrier carrier);
// Carrier purchased per MWh of the asset's input flow.
Carrier input_carrier(TechKind kind);

bool is_converter(TechKind kind);   // boilers, waste-to-energy, heat pumps
bool is_chp(TechKind kind);
bool is_storage(TechKind kind);     // TES and HT-ATES
bool consumes_electricity(TechKind kind);  // incl. booster heat pumps

struct SnapshotIndex {
  std::vector<std::string> timestamps;
  std::vector<double> weights;  // hours represented by each snapshot

  std::size_t size() const noexcept { return timestamps.size(); }
  double horizon_hours() const;

  bool operator==(const SnapshotIndex&) const = default;
};

struct HeatNode {
  std::string id;
  Series demand;              // MW_th
  std::string demand_ref;     // "<series file>.<column>"
  std::optional<std::string> electric_bus;

  bool operator==(const HeatNode&) const = default;
};

struct TechnologyAsset {
  std::string id;
  std::string node;  // pipelines: sending end of the forward direction
  TechKind kind = TechKind::gas_boiler_greengas;
  double investment_cost = 0.0;  // EUR/MW (pipelines: EUR/MW/m)
  double lifetime = 15.0;        // years
  double variable_cost = 0.0;    // EUR/MWh of input, added to the carrier price
  double efficiency = 1.0;       // heat efficiency (boilers, CHP heat side, pipelines unused)
  double efficiency_elec = 0.0;  // CHP electric efficiency
  std::optional<double> spf;     // geothermal, HT-ATES
  double potential_capacity = 0.0;  // MW
  std::string availability_ref;     // empty: always available
  Series availability;              // resolved; empty when availability_ref is empty

  // pipelines
  std::string to_node;
  double length_m = 0.0;
  double loss_per_m = 1e-7;
  double max_capacity = 250.0;

  // storage
  double h_max = 0.0;
  double standing_loss = 0.0;  // fraction of level lost per hour
  double efficiency_charge = 1.0;
  double efficiency_discharge = 1.0;
  std::optional<double> full_load_hours;  // recorded, not enforced

  double pipeline_efficiency() const { return 1.0 - loss_per_m * length_m; }
  // Upper bound actually applied to the capacity variable.
  double capacity_bound() const;
  double availability_at(std::size_t t) const {
    return availability.empty() ? 1.0 : availability[t];
  }

  bool operator==(const TechnologyAsset&) const = default;
};

struct CarrierPrices {
  Series electricity;
  Series hydrogen;
  Series green_gas;
  Series waste;
  Series residual_heat;

  const Series* price(Carrier carrier) const;
  bool operator==(const CarrierPrices&) const = default;
};

struct WeatherInputs {
  Series ambient_temperature;  // degC
  Series solar_thermal_cf;
  double sink_temperature = 80.0;  // degC, network supply temperature

  bool operator==(const WeatherInputs&) const = default;
};

// COP = a0 + a1*dT + a2*dT^2. Defaults are the regression coefficients
// exactly as published; a1 is positive there, which lets COP rise with the
// temperature lift. Override a1 for a physically decreasing curve.
struct CopCoefficients {
  double a0 = 6.81;
  double a1 = 0.121;
  double a2 = 0.000630;

  bool operator==(const CopCoefficients&) const = default;
};

struct LoadOptions {
  double demand_scale = 1.0;
  std::string weather_variant;  // selects series/weather_<variant>.csv when present
  std::optional<double> sink_temperature;
  std::optional<CopCoefficients> cop;
};

struct HeatSystem {
  SnapshotIndex snapshots;
  std::vector<HeatNode> nodes;
  std::vector<TechnologyAsset> assets;
  CarrierPrices prices;
  WeatherInputs weather;
  CopCoefficients cop;
  double demand_scale = 1.0;
  std::string weather_variant;

  const HeatNode* find_node(std::string_view id) const;
  const TechnologyAsset* find_asset(std::string_view id) const;
  // Air-source COP per snapshot from ambient temperature and the sink temperature.
  Series cop_series() const;
  double peak_demand() const;  // max over snapshots of total demand, MW
  double annual_heat_demand() const;  // sum_t W_t * total demand, MWh

  bool operator==(const HeatSystem&) const = default;
};

// (1 - (1+rate)^-lifetime) / rate, and `lifetime` at rate 0.
double annuity_factor(double lifetime_years, double discount_rate);

double heat_pump_cop(double delta_t, const CopCoefficients& coeffs = {});

// Reads nodes.csv, assets.csv, bus_map.csv, series/*.csv and the optional
// system.yaml from `dir`. Every invariant is checked; the first violation is
// thrown as ValidationError naming the file and record.
HeatSystem load_heat_system(const std::filesystem::path& dir, const LoadOptions& options = {});

// Writes the same file layout. Demand is divided back by `demand_scale`, so
// loading the output with the same options reproduces `system`.
void save_heat_system(const HeatSystem& system, const std::filesystem::path& dir);

// Asserts every node with an electricity-coupled asset has a bus reference
// contained in `bus_ids`.
void validate_bus_mapping(const HeatSystem& system, const std::vector<std::string>& bus_ids);

}  // namespace dhnplan
