#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhnplan/dhn_model.hpp"

namespace dhnplan::spores {

enum class Direction { minimize, maximize };

const char* to_string(Direction d);

// One intensification run. `target` is a technology kind name, a group name
// from technology_groups(), or "asset:<id>".
struct RunSpec {
  std::string target;
  Direction direction = Direction::minimize;
  int batch_size = 4;
};

struct SporesConfig {
  double slack = 0.10;
  double a = 1.0;
  double b = 10.0;  // magnitude; the sign follows the run direction
  std::vector<RunSpec> runs;
  int diversification_batch = 4;
  std::string weight_strategy = "evolving_average";
  std::string normalization = "potential";

  // Throws ConfigurationError.
  void validate() const;
  int total_spores() const;
};

// Every technology kind present in `system` plus the named groups, both
// directions, `batch` spores each.
std::vector<RunSpec> default_runs(const HeatSystem& system, int batch);

// Reads a plan file (YAML): weights {a, b}, runs [{target, direction,
// batch_size}], diversification {batch_size}. Slack is set by the caller.
SporesConfig load_plan(const std::filesystem::path& path);

// electrification, molecule, gas_boilers, dispatchable, non_dispatchable, storage.
const std::map<std::string, std::vector<TechKind>>& technology_groups();

// Indices into system.assets. Throws ConfigurationError for an unknown name or
// a target with no matching asset.
std::vector<std::size_t> resolve_target(const HeatSystem& system, const std::string& target);

// Capacities divided by their effective bound; assets with a zero bound are
// left out.
std::map<std::string, double> normalized_capacities(const HeatSystem& system,
                                                    const DesignResult& design);

inline constexpr double kOmegaMin = 1e-3;
inline constexpr double kOmegaMax = 1e3;
inline constexpr double kZero = 1e-9;  // on normalized capacities

// Evolving-average state for one run, in normalized capacity units.
struct WeightState {
  std::map<std::string, double> sum;  // running sum of normalized capacities
  std::size_t count = 0;
  std::map<std::string, double> omega;      // clamped, used in the objective
  std::map<std::string, double> omega_raw;  // before clamping (may be 0 or inf)

  double mean(const std::string& key) const { return sum.at(key) / static_cast<double>(count); }
};

// Pre-clamp weight |(mean - y) / mean|^-1, with both-zero -> 1.
double raw_weight(double mean, double y);
double clamp_weight(double raw);

// Mean seeded from the reference solution, omega neutral (1).
WeightState seed_weights(const std::map<std::string, double>& reference);

// Weights from the distance of `capacities` to the current mean, then the
// mean absorbs `capacities`.
WeightState update_weights_evolving_average(const WeightState& state,
                                            const std::map<std::string, double>& capacities);

std::string weight_hash(const WeightState& state);

// a * sum_i omega_i * Y_i/pot_i  +  s * b * sum_{i in target} Y_i/pot_i,
// s = +1 for minimize and -1 for maximize.
lp::Objective build_spores_objective(const HeatSystem& system, const VariableLayout& layout,
                                     const WeightState* weights,
                                     const std::vector<std::size_t>& target, double a, double b,
                                     Direction direction);

struct Provenance {
  std::size_t run_index = 0;
  std::string run_id;
  std::string target;  // empty for the diversification run
  std::string direction;  // "minimize", "maximize" or "diversify"
  int iteration = 0;
  double a = 0.0;
  double b = 0.0;  // signed as used in the objective
  std::string weight_hash;
  std::string solver = "highs";
};

struct Spore {
  std::string id;
  Provenance provenance;
  DesignResult design;
  double cost = 0.0;            // recomputed from the design
  double spores_objective = 0.0;
  double target_capacity = 0.0;  // normalized sum over the target, 0 when none
  std::map<std::string, double> normalized;
  WeightState weights;  // state the objective of this spore was built from
};

// Least-cost solve plus the budget-constrained program every run starts from.
struct SporesBase {
  const HeatSystem* system = nullptr;
  DhnModel model;  // lp carries the budget row
  double least_cost = 0.0;
  double budget = 0.0;
  double slack = 0.0;
  DesignResult least_cost_design;
};

SporesBase prepare_base(const HeatSystem& system, double slack, const ModelOptions& options = {});
// Same, from a least-cost solution computed earlier: builds the model without solving.
SporesBase prepare_base(const HeatSystem& system, double slack, double least_cost,
                        DesignResult least_cost_design, const ModelOptions& options = {});

// Run index in [0, runs.size()] where runs.size() is the diversification run.
std::string run_id(const SporesConfig& config, std::size_t run_index);

int batch_size(const SporesConfig& config, std::size_t run_index);

// One iteration of a run. The weights are rebuilt from `previous` (the
// spore of iteration - 1, required when iteration > 0), so a single spore
// can be regenerated from its stored predecessor.
Spore generate_one(const SporesBase& base, const SporesConfig& config, std::size_t run_index,
                   int iteration, const Spore* previous);

// Sequential within a run. Throws SolverError when a solve is not optimal.
std::vector<Spore> generate_batch(const SporesBase& base, const SporesConfig& config,
                                  std::size_t run_index);

struct RunFailure {
  std::string run_id;
  std::string message;
};

struct SporeSet {
  double least_cost = 0.0;
  double budget = 0.0;
  double slack = 0.0;
  std::vector<Spore> spores;  // ordered by (run index, iteration)
  std::vector<RunFailure> failures;
  std::vector<std::string> notes;  // diversity flags and similar
};

struct GenerateOptions {
  unsigned jobs = 1;
  ModelOptions model;
};

// Runs execute concurrently on up to `jobs` threads; the result does not
// depend on `jobs`.
SporeSet generate_all(const HeatSystem& system, const SporesConfig& config,
                      const GenerateOptions& options = {});

// Batches of size >= 3 where no two spores differ by more than 1% of potential
// in any capacity. Returns a note per degenerate run.
std::vector<std::string> diversity_flags(const std::vector<Spore>& spores);

nlohmann::json to_json(const Spore& spore);
Spore spore_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WeightState& w);
WeightState weights_from_json(const nlohmann::json& j);

}  // namespace dhnplan::spores
