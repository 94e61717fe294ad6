#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhnplan/dhn_model.hpp"
#include "dhnplan/grid.hpp"
#include "dhnplan/spores.hpp"

namespace dhnplan::metrics {

// How a run of overloaded snapshots longer than the window is counted.
enum class RunCounting {
  per_run,     // one event per maximal run with length >= window
  per_window,  // floor(length / window) events per maximal run
};

// Maximal runs of loading > limit. NaN entries (divergent snapshots) break a run.
int persistent_overload_events(const std::vector<double>& loading, double limit = 110.0,
                               int window = 7, RunCounting counting = RunCounting::per_run);

// Linear interpolation between order statistics, q in [0, 100]. NaN entries
// are dropped; throws DomainError when nothing is left.
double percentile(std::vector<double> values, double q);

// 90th percentile over time per component, then the 75th percentile across
// components. Components with no finite value are skipped and their indices
// reported in `excluded`. NaN when every component is skipped.
double loading_percentile_summary(const std::vector<std::vector<double>>& components,
                                  std::vector<std::size_t>* excluded = nullptr,
                                  double over_time = 90.0, double across = 75.0);

struct HeatMetrics {
  double p2h_share = 0.0;              // % of primary supply capacity
  double gas_share = 0.0;
  double nondispatchable_share = 0.0;
  double other_share = 0.0;            // waste-to-energy
  double storage_capacity = 0.0;       // MW discharge
  double pipeline_capacity = 0.0;      // MW
  double annual_cost = 0.0;            // EUR/a
  double annual_heat = 0.0;            // MWh/a delivered
  double lcoh = 0.0;                   // EUR/MWh
};

// Throws DomainError when no heat is delivered. Shares are 0 when no primary
// supply capacity is deployed.
HeatMetrics heat_metrics(const HeatSystem& system, const DesignResult& design);

struct GridMetricOptions {
  double limit = 110.0;
  int window = 7;
  RunCounting counting = RunCounting::per_run;
  bool active_power = false;  // loading from |P| instead of |S|
};

struct GridMetrics {
  int line_overload_events = 0;
  int transformer_overload_events = 0;
  double overloaded_lines_share = 0.0;         // %
  double overloaded_transformers_share = 0.0;  // %
  double line_loading_p = 0.0;                 // %, 75th of per-line 90th percentiles
  double transformer_loading_p = 0.0;
  int divergent_snapshots = 0;
  std::vector<std::string> notes;
};

GridMetrics grid_metrics(const grid::FlowResult& flows, const GridMetricOptions& options = {});

enum class RowKind { spore, least_cost, no_dhn };
const char* to_string(RowKind kind);

struct DecisionRow {
  std::string id;
  RowKind kind = RowKind::spore;
  bool complete = true;
  std::string run_id, target, direction;
  int iteration = -1;
  std::optional<double> cost;
  std::optional<HeatMetrics> heat;
  std::optional<GridMetrics> grid;
  std::map<std::string, double> capacities;  // MW by asset id
  std::vector<std::string> notes;
};

struct DecisionSpace {
  double least_cost = 0.0;
  double budget = 0.0;
  double slack = 0.0;
  double peak_demand = 0.0;  // MW, max over snapshots of total demand
  std::map<std::string, AssetInfo> assets;
  std::map<std::string, std::vector<std::string>> presets;
  std::vector<DecisionRow> rows;  // least_cost, no_dhn, then Spores in generation order

  const DecisionRow& row(const std::string& id) const;  // throws ValidationError
  const DecisionRow& reference() const;                 // the least-cost row
};

double peak_demand(const HeatSystem& system);

struct SporeOutputs {
  const spores::Spore* spore = nullptr;
  const grid::FlowResult* flows = nullptr;  // null when the power flow is missing
};

DecisionRow least_cost_row(const HeatSystem& system, const DesignResult& design,
                           const grid::FlowResult& flows, const GridMetricOptions& options = {});
DecisionRow baseline_row(const grid::FlowResult& flows, const GridMetricOptions& options = {});
// Flagged incomplete when `flows` is null.
DecisionRow spore_row(const HeatSystem& system, const spores::Spore& spore,
                      const grid::FlowResult* flows, const GridMetricOptions& options = {});

// Rows are ordered: least-cost benchmark, no-DHN benchmark, Spores.
DecisionSpace assemble_decision_space(const HeatSystem& system, const spores::SporeSet& set,
                                      const DesignResult& least_cost_design,
                                      const grid::FlowResult& least_cost_flows,
                                      const grid::FlowResult& baseline_flows,
                                      const std::vector<SporeOutputs>& outputs,
                                      const GridMetricOptions& options = {});

// One value per row and named field: metric names from metric_fields(),
// "cost", or "cap:<kind|group|asset:id|asset id>" (summed MW).
std::optional<double> field_value(const DecisionSpace& space, const DecisionRow& row,
                                  const std::string& field);

struct MetricInfo {
  std::string name;
  std::string unit;
  std::string group;      // heat, grid or cost
  std::string direction;  // lower, higher or none
};
const std::vector<MetricInfo>& metric_fields();
std::vector<std::string> grid_metric_names();

// "<field> <op> <value>" with op one of == != <= >= < > and value a number,
// "peak_demand", "least_cost", or "<k>*peak_demand" / "<k>*least_cost".
struct Predicate {
  std::string text;
  std::string field;
  std::string op;
  double threshold = 0.0;
};

// Throws ValidationError for syntax errors and unknown fields.
Predicate parse_predicate(const std::string& text, const DecisionSpace& space);

inline constexpr double kFilterTolerance = 1e-6;  // MW or metric units
bool satisfies(const DecisionSpace& space, const DecisionRow& row, const Predicate& p);

struct FilterAudit {
  std::string predicate;
  double threshold = 0.0;
  std::size_t passed = 0;  // Spore rows satisfying this predicate alone
};

struct FilterResult {
  std::vector<std::string> ids;  // Spore rows satisfying every predicate, in row order
  std::vector<FilterAudit> audit;
};

// Applies to Spore rows only; an empty predicate list keeps every complete Spore.
FilterResult filter_constraints(const DecisionSpace& space,
                                const std::vector<std::string>& predicates);
FilterResult filter_preset(const DecisionSpace& space, const std::string& preset);

// Rows (among `candidates`, default every complete row with grid metrics
// except no_dhn) with every grid metric <= the least-cost row's.
std::vector<std::string> lower_envelope(const DecisionSpace& space,
                                        const std::vector<std::string>* candidates = nullptr);

// Flat table, one row per DecisionRow. Numbers use the shortest round-trip
// form so identical inputs give identical bytes.
std::string to_csv(const DecisionSpace& space);

inline constexpr int kDecisionSpaceSchema = 1;
nlohmann::json to_json(const DecisionSpace& space);
DecisionSpace decision_space_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DecisionRow& row);
DecisionRow row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HeatMetrics& m);
nlohmann::json to_json(const GridMetrics& m);

}  // namespace dhnplan::metrics
