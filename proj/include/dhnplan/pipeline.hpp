#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace dhnplan::pipeline {

struct ScenarioConfig {
  std::filesystem::path source;  // the scenario file, empty when built in code
  std::filesystem::path system_dir;
  std::filesystem::path grid_dir;
  std::filesystem::path plan_path;
  std::filesystem::path output_dir;
  double slack = 0.10;
  double discount_rate = 0.07;
  double demand_scale = 1.0;
  std::string weather_year;  // weather variant id, empty for the default series
  double power_factor = 0.95;
  double loading_limit = 110.0;
  int overload_window = 7;
  std::string overload_counting = "per_run";  // or per_window
  unsigned jobs = 0;                          // 0: DHNPLAN_JOBS, then hardware threads
  std::map<std::string, std::vector<std::string>> presets;

  // Throws ConfigurationError.
  void validate() const;
};

// Relative paths are resolved against the scenario file's directory.
// Throws ValidationError for a malformed file, ConfigurationError for bad values.
ScenarioConfig load_scenario(const std::filesystem::path& path);

// DHNPLAN_JOBS overrides `requested`; 0 means the number of hardware threads.
unsigned resolve_jobs(unsigned requested);

enum class Stage { ingest, least_cost, benchmark_flows, spores, spore_flows, metrics, export_ };

inline constexpr Stage kAllStages[] = {Stage::ingest,      Stage::least_cost, Stage::benchmark_flows,
                                       Stage::spores,      Stage::spore_flows, Stage::metrics,
                                       Stage::export_};

const char* to_string(Stage stage);

struct StageReport {
  std::string status = "pending";  // pending, cached, executed, partial, failed
  int executed = 0;                // artifacts written
  int cached = 0;                  // artifacts reused
  int failed = 0;
  double seconds = 0.0;
};

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string key;   // hash of everything the artifact was computed from
  std::string sha256;
};

// Per-Spore artifacts keyed "spore", "flows", "metrics".
struct SporeRecord {
  std::string id;
  std::map<std::string, ArtifactRecord> artifacts;
  std::map<std::string, std::string> status;  // artifact -> cached | executed | failed
  std::string error;
};

inline constexpr int kManifestSchema = 1;

struct RunManifest {
  int schema_version = kManifestSchema;
  std::string scenario;
  std::map<std::string, std::string> input_hashes;  // system, grid, plan, config
  std::map<std::string, StageReport> stages;        // by to_string(Stage)
  std::map<std::string, ArtifactRecord> artifacts;  // scenario-level artifacts
  std::vector<SporeRecord> spores;                  // ordered by run, then iteration
  std::vector<std::string> failures;
  int lp_solves = 0;
  int power_flow_runs = 0;
  bool complete = false;  // every requested stage finished without failure

  const SporeRecord* spore(const std::string& id) const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

struct RunOptions {
  Stage until = Stage::export_;
  std::function<void(const std::string&)> log;
};

// Executes the stages up to `until`, reusing every artifact whose key and
// content hash still match the previous manifest. Failures are recorded in
// the manifest; only the affected Spores lose their downstream artifacts.
RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// File names inside the output directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kDecisionSpaceCsv = "decision_space.csv";
inline constexpr const char* kDecisionSpaceJson = "decision_space.json";

}  // namespace dhnplan::pipeline
