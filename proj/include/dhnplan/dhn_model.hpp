#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dhnplan/lp.hpp"
#include "dhnplan/thermal_network.hpp"

namespace dhnplan {

struct ModelOptions {
  double discount_rate = 0.07;
};

// LP variables of one asset. Per-snapshot vectors are empty when they do not
// apply to the asset's kind.
//
//   converters, CHP     input        fuel or electricity drawn (f)
//   solar, residual     heat         heat produced (g)
//   geothermal          initial, booster, final
//   HT-ATES             charge, discharge, booster, final, level
//   TES                 charge, discharge, level
//   pipeline            forward, backward (sent quantities)
struct AssetVars {
  lp::VarId capacity = 0;  // heat-side power (storage: discharge power)
  std::vector<lp::VarId> input, heat;
  std::vector<lp::VarId> initial, booster, final_heat;
  std::vector<lp::VarId> charge, discharge, level;
  std::vector<lp::VarId> forward, backward;
};

struct VariableLayout {
  std::vector<AssetVars> assets;  // parallel to HeatSystem::assets

  const AssetVars& at(std::size_t asset) const { return assets.at(asset); }
};

// Creates every variable and registers capacities in the LP group "capacity".
VariableLayout declare_variables(const HeatSystem& system, lp::LinearProgram& lp);

// COP_t/(SPF - COP_t) per snapshot. Throws ConfigurationError naming the
// snapshot when SPF <= COP_t.
Series booster_ratio(const HeatSystem& system, const TechnologyAsset& asset, const Series& cop);

lp::Objective build_objective(const HeatSystem& system, const VariableLayout& layout,
                              const Series& cop, const ModelOptions& options = {});
void build_energy_balance(const HeatSystem& system, const VariableLayout& layout,
                          const Series& cop, lp::LinearProgram& lp);
void build_converter(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
                     const Series& cop, lp::LinearProgram& lp);
void build_chp(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
               lp::LinearProgram& lp);
void build_geothermal(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
                      const Series& cop, lp::LinearProgram& lp);
void build_ht_ates(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
                   const Series& cop, lp::LinearProgram& lp);
void build_tes(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
               lp::LinearProgram& lp);
void build_pipeline(const HeatSystem& system, std::size_t asset, const VariableLayout& layout,
                    lp::LinearProgram& lp);
void build_availability_generators(const HeatSystem& system, std::size_t asset,
                                   const VariableLayout& layout, lp::LinearProgram& lp);

// Throws ValidationError for a node with positive demand that no supply asset
// can reach through pipelines.
void check_supply_paths(const HeatSystem& system);

struct DhnModel {
  lp::LinearProgram lp;
  VariableLayout layout;
  Series cop;
  ModelOptions options;
};

DhnModel build_model(const HeatSystem& system, const ModelOptions& options = {});

struct CostBreakdown {
  double capex = 0.0;
  double opex = 0.0;
  double chp_revenue = 0.0;  // subtracted from the total
  double total = 0.0;
};

struct ElectricProfile {
  Series load;        // MW drawn by power-to-heat and boosters
  Series generation;  // MW from CHP
  Series net;         // load - generation
};

struct AssetInfo {
  std::string node;
  TechKind kind;
};

struct DesignResult {
  std::map<std::string, AssetInfo> assets;
  std::map<std::string, double> capacities;         // MW
  std::map<std::string, double> energy_capacities;  // MWh, storage only
  // asset id -> named series (see AssetVars for the names used per kind,
  // plus "electricity" for electric input and "electricity_out" for CHP)
  std::map<std::string, std::map<std::string, Series>> dispatch;
  CostBreakdown cost;
  std::map<std::string, ElectricProfile> electric_profiles;  // keyed by bus id
};

// Reads capacities and dispatch out of a solved model. Tiny negative values
// from solver tolerance are clipped to zero. The cost breakdown is
// recomputed from the dispatch arrays and raw inputs, not from LP data.
DesignResult extract_design(const HeatSystem& system, const DhnModel& model,
                            const std::vector<double>& values);

CostBreakdown evaluate_cost(const HeatSystem& system, const DesignResult& design,
                            const ModelOptions& options = {});

// Per-bus electric load and generation. Every mapped bus is present; buses
// with no electric assets get all-zero series. Throws ValidationError for a
// node with an electric asset but no bus.
std::map<std::string, ElectricProfile> extract_electric_profiles(const HeatSystem& system,
                                                                 const DesignResult& design);

struct LeastCostResult {
  DhnModel model;
  lp::LpSolution solution;
  DesignResult design;
  double least_cost = 0.0;  // C*
};

// Throws SolverError naming the worst-violated balance row when infeasible.
LeastCostResult solve_least_cost(const HeatSystem& system, const ModelOptions& options = {},
                                 const lp::SolveOptions& solve_options = {});

struct AuditReport {
  double balance = 0.0;         // max |supply - demand|, MW
  double capacity = 0.0;        // max dispatch above capacity * availability
  double coupling_ratio = 0.0;  // max |booster/base - ratio| where base > 1e-6
  double spf_identity = 0.0;    // max |final - SPF*booster/COP|
  double chp_ratio = 0.0;       // max |elec/heat - eta_elec/eta_heat|
  double storage_cycle = 0.0;   // max |level dynamics residual| incl. wrap-around
  double energy_power = 0.0;    // max |E - h_max * P|
  std::vector<std::string> notes;

  bool ok(double tol_mw = 1e-4, double tol = 1e-6) const;
};

// Re-checks a design against the raw system data.
AuditReport audit_design(const HeatSystem& system, const DesignResult& design);

nlohmann::json to_json(const DesignResult& design);
DesignResult design_from_json(const nlohmann::json& j);

}  // namespace dhnplan
