#include "dhnplan/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "dhnplan/csv.hpp"
#include "dhnplan/error.hpp"
#include "dhnplan/grid.hpp"
#include "dhnplan/hash.hpp"
#include "dhnplan/lp.hpp"
#include "dhnplan/metrics.hpp"
#include "dhnplan/spores.hpp"

namespace dhnplan::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) { return csv::format_double(v); }

std::string key_of(std::initializer_list<std::string> parts) {
  std::string s;
  for (const auto& p : parts) {
    s += p;
    s += '\x1f';
  }
  return sha256_hex(s);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error("cannot write " + p.string());
  }
  fs::rename(tmp, p);
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const unsigned k = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (k <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < k; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

void summarize(StageReport& r) {
  if (r.failed > 0) r.status = r.executed + r.cached > 0 ? "partial" : "failed";
  else if (r.executed > 0) r.status = "executed";
  else r.status = "cached";
}

metrics::RunCounting parse_counting(const std::string& s) {
  if (s == "per_run") return metrics::RunCounting::per_run;
  if (s == "per_window") return metrics::RunCounting::per_window;
  throw ConfigurationError("overload_counting must be per_run or per_window, got '" + s + "'");
}

class Runner {
 public:
  Runner(const ScenarioConfig& cfg, const RunOptions& opt)
      : cfg_(cfg), opt_(opt), out_(cfg.output_dir), jobs_(resolve_jobs(cfg.jobs)) {}

  RunManifest run();

 private:
  struct SporeState {
    SporeRecord record;
    const SporeRecord* old = nullptr;
    std::optional<spores::Spore> spore;
    std::optional<grid::FlowResult> flows;
    bool spore_executed = false;
    bool flows_executed = false;
    bool failed = false;
  };

  void log(const std::string& s) const {
    if (opt_.log) opt_.log(s);
  }

  const HeatSystem& system();
  const grid::ElectricGrid& grid();
  const spores::SporesBase& base();

  bool reusable(const ArtifactRecord* old, const std::string& key) const;
  const ArtifactRecord* old_artifact(const std::string& name) const;
  ArtifactRecord write_artifact(const std::string& rel, const std::string& key,
                                const std::string& content);

  grid::FlowResult flows_for(const DesignResult& d);
  grid::TimeseriesOptions flow_options(unsigned jobs) const;

  void stage_ingest();
  void stage_least_cost();
  void stage_benchmark_flows();
  void stage_spores();
  void stage_spore_flows();
  void stage_metrics();
  void stage_export();

  const ScenarioConfig& cfg_;
  RunOptions opt_;
  fs::path out_;
  unsigned jobs_;
  RunManifest old_, m_;
  spores::SporesConfig plan_;
  std::string system_hash_, grid_hash_, ingest_key_, heat_key_;

  std::once_flag system_once_, grid_once_, base_once_;
  std::optional<HeatSystem> system_;
  std::optional<grid::ElectricGrid> grid_;
  std::optional<spores::SporesBase> base_;

  std::optional<DesignResult> lc_design_;
  double least_cost_ = 0.0, peak_demand_ = 0.0;
  bool lc_executed_ = false;
  std::vector<SporeState> spores_;
  std::atomic<int> lp_solves_{0}, pf_runs_{0};
};

const HeatSystem& Runner::system() {
  std::call_once(system_once_, [&] {
    LoadOptions lo;
    lo.demand_scale = cfg_.demand_scale;
    lo.weather_variant = cfg_.weather_year;
    system_ = load_heat_system(cfg_.system_dir, lo);
  });
  return *system_;
}

const grid::ElectricGrid& Runner::grid() {
  std::call_once(grid_once_, [&] { grid_ = grid::load_grid(cfg_.grid_dir); });
  return *grid_;
}

const spores::SporesBase& Runner::base() {
  std::call_once(base_once_, [&] {
    ModelOptions mo;
    mo.discount_rate = cfg_.discount_rate;
    if (lc_design_) {
      base_ = spores::prepare_base(system(), cfg_.slack, least_cost_, *lc_design_, mo);
    } else {
      base_ = spores::prepare_base(system(), cfg_.slack, mo);
      ++lp_solves_;
    }
  });
  return *base_;
}

bool Runner::reusable(const ArtifactRecord* old, const std::string& key) const {
  if (!old || old->key != key) return false;
  const fs::path p = out_ / old->path;
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return false;
  return sha256_file(p) == old->sha256;
}

const ArtifactRecord* Runner::old_artifact(const std::string& name) const {
  auto it = old_.artifacts.find(name);
  return it == old_.artifacts.end() ? nullptr : &it->second;
}

ArtifactRecord Runner::write_artifact(const std::string& rel, const std::string& key,
                                      const std::string& content) {
  write_file(out_ / rel, content);
  return {rel, key, sha256_hex(content)};
}

grid::TimeseriesOptions Runner::flow_options(unsigned jobs) const {
  grid::TimeseriesOptions o;
  o.power_factor = cfg_.power_factor;
  o.jobs = jobs;
  return o;
}

grid::FlowResult Runner::flows_for(const DesignResult& d) {
  auto inj = grid::combine_injections(grid(), d.electric_profiles, system().snapshots.timestamps);
  ++pf_runs_;
  return grid::run_timeseries(grid(), inj, flow_options(1));
}

void Runner::stage_ingest() {
  auto& rep = m_.stages["ingest"];
  const std::string key = key_of({"ingest", system_hash_, grid_hash_, num(cfg_.demand_scale),
                                  cfg_.weather_year});
  ingest_key_ = key;
  heat_key_ = key_of({"heat", system_hash_, num(cfg_.demand_scale), cfg_.weather_year});
  if (reusable(old_artifact("ingest"), key)) {
    m_.artifacts["ingest"] = *old_artifact("ingest");
    ++rep.cached;
    return;
  }
  const auto& sys = system();
  const auto& g = grid();
  validate_bus_mapping(sys, g.bus_ids());
  if (sys.snapshots.timestamps != g.timestamps)
    throw ValidationError(cfg_.grid_dir.string(),
                          "baseline profile timestamps differ from the heat system snapshots");
  json j = {{"snapshots", sys.snapshots.timestamps.size()},
            {"nodes", sys.nodes.size()},
            {"assets", sys.assets.size()},
            {"buses", g.buses.size()},
            {"peak_demand_mw", sys.peak_demand()},
            {"annual_heat_demand_mwh", sys.annual_heat_demand()}};
  m_.artifacts["ingest"] = write_artifact("ingest.json", key, dump(j));
  ++rep.executed;
}

void Runner::stage_least_cost() {
  auto& rep = m_.stages["least_cost"];
  const std::string key = key_of({"least_cost", heat_key_, num(cfg_.discount_rate)});
  if (reusable(old_artifact("least_cost"), key)) {
    m_.artifacts["least_cost"] = *old_artifact("least_cost");
    auto j = json::parse(read_file(out_ / m_.artifacts["least_cost"].path));
    lc_design_ = design_from_json(j.at("design"));
    least_cost_ = j.at("least_cost").get<double>();
    peak_demand_ = j.at("peak_demand_mw").get<double>();
    ++rep.cached;
    return;
  }
  const auto& b = base();
  lc_design_ = b.least_cost_design;
  least_cost_ = b.least_cost;
  peak_demand_ = metrics::peak_demand(system());
  json j = {{"least_cost", least_cost_},
            {"peak_demand_mw", peak_demand_},
            {"design", to_json(*lc_design_)}};
  m_.artifacts["least_cost"] = write_artifact("least_cost.json", key, dump(j));
  lc_executed_ = true;
  ++rep.executed;
}

void Runner::stage_benchmark_flows() {
  auto& rep = m_.stages["benchmark_flows"];
  const std::string lc_key = key_of({"flows", grid_hash_, ingest_key_, num(cfg_.power_factor),
                                     m_.artifacts.at("least_cost").sha256});
  if (!lc_executed_ && reusable(old_artifact("flows_least_cost"), lc_key)) {
    m_.artifacts["flows_least_cost"] = *old_artifact("flows_least_cost");
    ++rep.cached;
  } else {
    auto f = flows_for(*lc_design_);
    m_.artifacts["flows_least_cost"] =
        write_artifact("flows/least_cost.json", lc_key, dump(grid::to_json(f)));
    ++rep.executed;
  }
  const std::string base_key = key_of({"flows_baseline", grid_hash_, num(cfg_.power_factor)});
  if (reusable(old_artifact("flows_no_dhn"), base_key)) {
    m_.artifacts["flows_no_dhn"] = *old_artifact("flows_no_dhn");
    ++rep.cached;
  } else {
    ++pf_runs_;
    auto f = grid::run_timeseries(grid(), grid::combine_injections(grid(), {}, {}),
                                  flow_options(jobs_));
    m_.artifacts["flows_no_dhn"] =
        write_artifact("flows/no_dhn.json", base_key, dump(grid::to_json(f)));
    ++rep.executed;
  }
}

void Runner::stage_spores() {
  auto& rep = m_.stages["spores"];
  const std::size_t n_runs = plan_.runs.size() + 1;
  std::vector<std::size_t> run_start;
  for (std::size_t r = 0; r < n_runs; ++r) {
    run_start.push_back(spores_.size());
    for (int k = 0; k < spores::batch_size(plan_, r); ++k) {
      SporeState st;
      st.record.id = spores::run_id(plan_, r) + "-" + std::to_string(k);
      st.old = old_.spore(st.record.id);
      // Downstream records carry over until their own stage revisits them.
      if (st.old) st.record.artifacts = st.old->artifacts;
      spores_.push_back(std::move(st));
    }
  }
  run_start.push_back(spores_.size());

  std::vector<std::string> errors(n_runs);
  parallel_for(n_runs, jobs_, [&](std::size_t r) {
    std::string spec = "div";
    if (r < plan_.runs.size()) {
      const auto& s = plan_.runs[r];
      spec = s.target + "/" + spores::to_string(s.direction);
    }
    std::string prev_sha;
    const spores::Spore* prev = nullptr;
    for (std::size_t i = run_start[r]; i < run_start[r + 1]; ++i) {
      auto& st = spores_[i];
      const int k = static_cast<int>(i - run_start[r]);
      const std::string key =
          key_of({"spore", m_.artifacts.at("least_cost").key, num(cfg_.slack), num(plan_.a),
                  num(plan_.b), spec, std::to_string(k), prev_sha});
      const ArtifactRecord* old = nullptr;
      if (st.old) {
        auto it = st.old->artifacts.find("spore");
        if (it != st.old->artifacts.end()) old = &it->second;
      }
      try {
        if (reusable(old, key)) {
          st.spore = spores::spore_from_json(json::parse(read_file(out_ / old->path)));
          st.record.artifacts["spore"] = *old;
          st.record.status["spore"] = "cached";
        } else {
          st.spore = spores::generate_one(base(), plan_, r, k, prev);
          ++lp_solves_;
          st.record.artifacts["spore"] = write_artifact("spores/" + st.record.id + ".json", key,
                                                        dump(spores::to_json(*st.spore)));
          st.record.status["spore"] = "executed";
          st.spore_executed = true;
        }
      } catch (const std::exception& e) {
        errors[r] = e.what();
        for (std::size_t j = i; j < run_start[r + 1]; ++j) {
          spores_[j].failed = true;
          spores_[j].record.status["spore"] = "failed";
          spores_[j].record.error = j == i ? e.what() : "earlier iteration failed";
          spores_[j].record.artifacts.clear();
        }
        return;
      }
      prev = &*st.spore;
      prev_sha = st.record.artifacts["spore"].sha256;
    }
  });

  for (std::size_t r = 0; r < n_runs; ++r)
    if (!errors[r].empty()) m_.failures.push_back("spores " + spores::run_id(plan_, r) + ": " + errors[r]);
  for (const auto& st : spores_) {
    const auto& s = st.record.status.at("spore");
    if (s == "cached") ++rep.cached;
    else if (s == "executed") ++rep.executed;
    else ++rep.failed;
  }

  // Index of the set: ids, costs and run metadata in (run, iteration) order.
  json index = {{"least_cost", least_cost_},
                {"budget", lp::budget_from_slack(least_cost_, cfg_.slack)},
                {"slack", cfg_.slack},
                {"weights", {{"a", plan_.a}, {"b", plan_.b}}}};
  json entries = json::array();
  std::string parts;
  for (const auto& st : spores_) {
    json e = {{"id", st.record.id}, {"status", st.record.status.at("spore")}};
    if (st.spore) {
      const auto& p = st.spore->provenance;
      e["run_id"] = p.run_id;
      e["target"] = p.target;
      e["direction"] = p.direction;
      e["iteration"] = p.iteration;
      e["cost"] = st.spore->cost;
      e["path"] = st.record.artifacts.at("spore").path;
      parts += st.record.artifacts.at("spore").sha256;
    } else {
      e["error"] = st.record.error;
    }
    entries.push_back(std::move(e));
  }
  index["spores"] = std::move(entries);
  const std::string key = key_of({"spore_index", m_.artifacts.at("least_cost").key, num(cfg_.slack), parts});
  if (reusable(old_artifact("spore_index"), key)) {
    m_.artifacts["spore_index"] = *old_artifact("spore_index");
  } else {
    m_.artifacts["spore_index"] = write_artifact("spores/index.json", key, dump(index));
  }
}

void Runner::stage_spore_flows() {
  auto& rep = m_.stages["spore_flows"];
  std::mutex mu;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < spores_.size(); ++i) {
    auto& st = spores_[i];
    if (st.failed) continue;
    const std::string key = key_of({"flows", grid_hash_, ingest_key_, num(cfg_.power_factor),
                                    st.record.artifacts.at("spore").sha256});
    const ArtifactRecord* old = nullptr;
    if (st.old) {
      auto it = st.old->artifacts.find("flows");
      if (it != st.old->artifacts.end()) old = &it->second;
    }
    if (!st.spore_executed && reusable(old, key)) {
      st.record.artifacts["flows"] = *old;
      st.record.status["flows"] = "cached";
      ++rep.cached;
    } else {
      st.record.artifacts["flows"] = {"", key, ""};
      todo.push_back(i);
    }
  }
  if (!todo.empty()) {
    system();
    grid();
  }
  parallel_for(todo.size(), jobs_, [&](std::size_t n) {
    auto& st = spores_[todo[n]];
    try {
      st.flows = flows_for(st.spore->design);
      const std::string key = st.record.artifacts["flows"].key;
      st.record.artifacts["flows"] =
          write_artifact("flows/" + st.record.id + ".json", key, dump(grid::to_json(*st.flows)));
      st.record.status["flows"] = "executed";
      st.flows_executed = true;
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      st.record.artifacts.erase("flows");
      st.record.status["flows"] = "failed";
      st.record.error = e.what();
      m_.failures.push_back("flows " + st.record.id + ": " + e.what());
    }
  });
  for (auto i : todo) {
    if (spores_[i].record.status["flows"] == "executed") ++rep.executed;
    else ++rep.failed;
  }
}

void Runner::stage_metrics() {
  auto& rep = m_.stages["metrics"];
  metrics::GridMetricOptions gopt;
  gopt.limit = cfg_.loading_limit;
  gopt.window = cfg_.overload_window;
  gopt.counting = parse_counting(cfg_.overload_counting);
  const std::string opts = num(cfg_.loading_limit) + "/" + std::to_string(cfg_.overload_window) +
                           "/" + cfg_.overload_counting;

  auto load_flows = [&](const ArtifactRecord& rec) {
    return grid::flow_result_from_json(json::parse(read_file(out_ / rec.path)));
  };

  // Benchmarks.
  {
    const auto& lc = m_.artifacts.at("least_cost");
    const auto& lcf = m_.artifacts.at("flows_least_cost");
    const std::string key = key_of({"metrics", heat_key_, lc.sha256, lcf.sha256, opts});
    if (reusable(old_artifact("metrics_least_cost"), key)) {
      m_.artifacts["metrics_least_cost"] = *old_artifact("metrics_least_cost");
      ++rep.cached;
    } else {
      auto row = metrics::least_cost_row(system(), *lc_design_, load_flows(lcf), gopt);
      m_.artifacts["metrics_least_cost"] =
          write_artifact("metrics/least_cost.json", key, dump(metrics::to_json(row)));
      ++rep.executed;
    }
    const auto& bf = m_.artifacts.at("flows_no_dhn");
    const std::string bkey = key_of({"metrics_baseline", bf.sha256, opts});
    if (reusable(old_artifact("metrics_no_dhn"), bkey)) {
      m_.artifacts["metrics_no_dhn"] = *old_artifact("metrics_no_dhn");
      ++rep.cached;
    } else {
      auto row = metrics::baseline_row(load_flows(bf), gopt);
      m_.artifacts["metrics_no_dhn"] =
          write_artifact("metrics/no_dhn.json", bkey, dump(metrics::to_json(row)));
      ++rep.executed;
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < spores_.size(); ++i) {
    auto& st = spores_[i];
    if (st.failed) continue;
    auto fit = st.record.artifacts.find("flows");
    const bool have_flows = st.record.status["flows"] != "failed" && fit != st.record.artifacts.end();
    const std::string key =
        key_of({"metrics", heat_key_, st.record.artifacts.at("spore").sha256,
                have_flows ? fit->second.sha256 : std::string("-"), opts});
    const ArtifactRecord* old = nullptr;
    if (st.old) {
      auto it = st.old->artifacts.find("metrics");
      if (it != st.old->artifacts.end()) old = &it->second;
    }
    if (!st.spore_executed && !st.flows_executed && reusable(old, key)) {
      st.record.artifacts["metrics"] = *old;
      st.record.status["metrics"] = "cached";
      ++rep.cached;
    } else {
      st.record.artifacts["metrics"] = {"", key, ""};
      todo.push_back(i);
    }
  }
  if (!todo.empty()) system();
  std::mutex mu;
  parallel_for(todo.size(), jobs_, [&](std::size_t n) {
    auto& st = spores_[todo[n]];
    try {
      auto fit = st.record.artifacts.find("flows");
      if (!st.flows && st.record.status["flows"] != "failed" && fit != st.record.artifacts.end())
        st.flows = load_flows(fit->second);
      auto row = metrics::spore_row(system(), *st.spore, st.flows ? &*st.flows : nullptr, gopt);
      if (!st.record.error.empty()) row.notes.push_back(st.record.error);
      const std::string key = st.record.artifacts["metrics"].key;
      st.record.artifacts["metrics"] =
          write_artifact("metrics/" + st.record.id + ".json", key, dump(metrics::to_json(row)));
      st.record.status["metrics"] = "executed";
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      st.record.artifacts.erase("metrics");
      st.record.status["metrics"] = "failed";
      m_.failures.push_back("metrics " + st.record.id + ": " + e.what());
    }
  });
  for (auto i : todo) {
    if (spores_[i].record.status["metrics"] == "executed") ++rep.executed;
    else ++rep.failed;
  }
}

void Runner::stage_export() {
  auto& rep = m_.stages["export"];
  std::string parts = m_.artifacts.at("least_cost").sha256 + m_.artifacts.at("metrics_least_cost").sha256 +
                      m_.artifacts.at("metrics_no_dhn").sha256;
  for (const auto& st : spores_) {
    auto it = st.record.artifacts.find("metrics");
    if (it != st.record.artifacts.end()) parts += st.record.id + it->second.sha256;
  }
  const std::string key =
      key_of({"export", parts, json(cfg_.presets).dump(), num(cfg_.slack)});
  if (reusable(old_artifact("decision_space_csv"), key) &&
      reusable(old_artifact("decision_space_json"), key)) {
    m_.artifacts["decision_space_csv"] = *old_artifact("decision_space_csv");
    m_.artifacts["decision_space_json"] = *old_artifact("decision_space_json");
    rep.cached += 2;
    return;
  }
  metrics::DecisionSpace ds;
  ds.least_cost = least_cost_;
  ds.budget = lp::budget_from_slack(least_cost_, cfg_.slack);
  ds.slack = cfg_.slack;
  ds.peak_demand = peak_demand_;
  ds.assets = lc_design_->assets;
  ds.presets = cfg_.presets;
  auto load_row = [&](const ArtifactRecord& rec) {
    return metrics::row_from_json(json::parse(read_file(out_ / rec.path)));
  };
  ds.rows.push_back(load_row(m_.artifacts.at("metrics_least_cost")));
  ds.rows.push_back(load_row(m_.artifacts.at("metrics_no_dhn")));
  for (const auto& st : spores_) {
    auto it = st.record.artifacts.find("metrics");
    if (it != st.record.artifacts.end()) ds.rows.push_back(load_row(it->second));
  }
  for (const auto& [name, preds] : ds.presets)
    for (const auto& p : preds) metrics::parse_predicate(p, ds);
  m_.artifacts["decision_space_csv"] = write_artifact(kDecisionSpaceCsv, key, metrics::to_csv(ds));
  m_.artifacts["decision_space_json"] =
      write_artifact(kDecisionSpaceJson, key, dump(metrics::to_json(ds)));
  rep.executed += 2;
}

RunManifest Runner::run() {
  cfg_.validate();
  for (const char* sub : {"spores", "flows", "metrics"}) fs::create_directories(out_ / sub);
  const fs::path manifest_path = out_ / kManifestFile;
  if (fs::exists(manifest_path)) {
    try {
      old_ = manifest_from_json(json::parse(read_file(manifest_path)));
    } catch (const std::exception& e) {
      log(std::string("ignoring unreadable manifest: ") + e.what());
      old_ = RunManifest{};
    }
  }

  plan_ = spores::load_plan(cfg_.plan_path);
  plan_.slack = cfg_.slack;
  system_hash_ = sha256_tree(cfg_.system_dir);
  grid_hash_ = sha256_tree(cfg_.grid_dir);
  m_.scenario = cfg_.source.string();
  m_.input_hashes["system"] = system_hash_;
  m_.input_hashes["grid"] = grid_hash_;
  m_.input_hashes["plan"] = sha256_file(cfg_.plan_path);
  m_.input_hashes["config"] = key_of(
      {num(cfg_.slack), num(cfg_.discount_rate), num(cfg_.demand_scale), cfg_.weather_year,
       num(cfg_.power_factor), num(cfg_.loading_limit), std::to_string(cfg_.overload_window),
       cfg_.overload_counting, json(cfg_.presets).dump()});
  m_.artifacts = old_.artifacts;
  m_.spores = old_.spores;
  for (auto& s : m_.spores) s.status.clear();
  for (Stage s : kAllStages) m_.stages[to_string(s)] = StageReport{};

  using Fn = void (Runner::*)();
  const std::pair<Stage, Fn> stages[] = {
      {Stage::ingest, &Runner::stage_ingest},
      {Stage::least_cost, &Runner::stage_least_cost},
      {Stage::benchmark_flows, &Runner::stage_benchmark_flows},
      {Stage::spores, &Runner::stage_spores},
      {Stage::spore_flows, &Runner::stage_spore_flows},
      {Stage::metrics, &Runner::stage_metrics},
      {Stage::export_, &Runner::stage_export},
  };
  bool halted = false;
  for (const auto& [stage, fn] : stages) {
    if (static_cast<int>(stage) > static_cast<int>(opt_.until)) break;
    auto& rep = m_.stages[to_string(stage)];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      (this->*fn)();
      summarize(rep);
    } catch (const std::exception& e) {
      rep.status = "failed";
      ++rep.failed;
      m_.failures.push_back(std::string(to_string(stage)) + ": " + e.what());
      halted = true;
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(std::string(to_string(stage)) + ": " + rep.status + " (" + std::to_string(rep.executed) +
        " executed, " + std::to_string(rep.cached) + " cached, " + std::to_string(rep.failed) +
        " failed)");
    if (stage == Stage::spores) {
      m_.spores.clear();
      for (const auto& st : spores_) m_.spores.push_back(st.record);
    } else if (static_cast<int>(stage) > static_cast<int>(Stage::spores)) {
      for (std::size_t i = 0; i < spores_.size(); ++i) m_.spores[i] = spores_[i].record;
    }
    if (halted) break;
  }
  m_.lp_solves = lp_solves_;
  m_.power_flow_runs = pf_runs_;
  m_.complete = !halted && m_.failures.empty();
  write_file(manifest_path, dump(to_json(m_)));
  return m_;
}

json to_json(const ArtifactRecord& a) {
  return {{"path", a.path}, {"key", a.key}, {"sha256", a.sha256}};
}

ArtifactRecord artifact_from_json(const json& j) {
  return {j.at("path").get<std::string>(), j.at("key").get<std::string>(),
          j.at("sha256").get<std::string>()};
}

}  // namespace

void ScenarioConfig::validate() const {
  auto need_dir = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::is_directory(p))
      throw ConfigurationError(std::string(what) + " directory not found: " + p.string());
  };
  need_dir(system_dir, "system");
  need_dir(grid_dir, "grid");
  if (plan_path.empty() || !fs::is_regular_file(plan_path))
    throw ConfigurationError("plan file not found: " + plan_path.string());
  if (output_dir.empty()) throw ConfigurationError("output_dir is required");
  if (!(slack >= 0.0 && slack <= 1.0))
    throw ConfigurationError("slack must lie in [0, 1], got " + num(slack));
  if (!(demand_scale > 0.0))
    throw ConfigurationError("demand_scale must be positive, got " + num(demand_scale));
  if (!(discount_rate >= 0.0)) throw ConfigurationError("discount_rate must be >= 0");
  if (!(power_factor > 0.0 && power_factor <= 1.0))
    throw ConfigurationError("power_factor must lie in (0, 1]");
  if (!(loading_limit > 0.0)) throw ConfigurationError("loading_limit must be positive");
  if (overload_window < 1) throw ConfigurationError("overload_window must be >= 1");
  parse_counting(overload_counting);
}

ScenarioConfig load_scenario(const fs::path& path) {
  YAML::Node y;
  try {
    y = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ValidationError(path.string(), e.what());
  }
  if (!y.IsMap()) throw ValidationError(path.string(), "expected a mapping");
  static const std::set<std::string> known = {
      "system",       "grid",          "plan",          "output_dir",      "slack",
      "discount_rate", "demand_scale", "weather_year",  "power_factor",    "loading_limit",
      "overload_window", "overload_counting", "jobs", "presets"};
  for (const auto& kv : y) {
    const auto k = kv.first.as<std::string>();
    if (!known.count(k)) throw ValidationError(path.string(), "unknown key '" + k + "'");
  }
  const fs::path dir = fs::absolute(path).parent_path();
  auto resolve = [&](const char* k) -> fs::path {
    if (!y[k]) throw ValidationError(path.string(), std::string("missing key '") + k + "'");
    fs::path p = y[k].as<std::string>();
    return (p.is_absolute() ? p : dir / p).lexically_normal();
  };
  ScenarioConfig c;
  try {
    c.source = path;
    c.system_dir = resolve("system");
    c.grid_dir = resolve("grid");
    c.plan_path = resolve("plan");
    c.output_dir = resolve("output_dir");
    if (y["slack"]) c.slack = y["slack"].as<double>();
    if (y["discount_rate"]) c.discount_rate = y["discount_rate"].as<double>();
    if (y["demand_scale"]) c.demand_scale = y["demand_scale"].as<double>();
    if (y["weather_year"] && !y["weather_year"].IsNull())
      c.weather_year = y["weather_year"].as<std::string>();
    if (y["power_factor"]) c.power_factor = y["power_factor"].as<double>();
    if (y["loading_limit"]) c.loading_limit = y["loading_limit"].as<double>();
    if (y["overload_window"]) c.overload_window = y["overload_window"].as<int>();
    if (y["overload_counting"]) c.overload_counting = y["overload_counting"].as<std::string>();
    if (y["jobs"]) c.jobs = y["jobs"].as<unsigned>();
    if (auto p = y["presets"]) {
      for (const auto& kv : p) {
        auto& list = c.presets[kv.first.as<std::string>()];
        if (kv.second.IsSequence()) {
          for (const auto& s : kv.second) list.push_back(s.as<std::string>());
        } else {
          list.push_back(kv.second.as<std::string>());
        }
      }
    }
  } catch (const YAML::Exception& e) {
    throw ValidationError(path.string(), e.what());
  }
  c.validate();
  return c;
}

unsigned resolve_jobs(unsigned requested) {
  if (const char* env = std::getenv("DHNPLAN_JOBS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw ConfigurationError(std::string("DHNPLAN_JOBS must be a positive integer, got '") + env +
                             "'");
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::least_cost: return "least_cost";
    case Stage::benchmark_flows: return "benchmark_flows";
    case Stage::spores: return "spores";
    case Stage::spore_flows: return "spore_flows";
    case Stage::metrics: return "metrics";
    case Stage::export_: return "export";
  }
  return "?";
}

const SporeRecord* RunManifest::spore(const std::string& id) const {
  for (const auto& s : spores)
    if (s.id == id) return &s;
  return nullptr;
}

json to_json(const RunManifest& m) {
  json stages = json::object();
  for (const auto& [name, r] : m.stages)
    stages[name] = {{"status", r.status}, {"executed", r.executed}, {"cached", r.cached},
                    {"failed", r.failed}, {"seconds", r.seconds}};
  json artifacts = json::object();
  for (const auto& [name, a] : m.artifacts) artifacts[name] = to_json(a);
  json spores = json::array();
  for (const auto& s : m.spores) {
    json arts = json::object();
    for (const auto& [name, a] : s.artifacts) arts[name] = to_json(a);
    spores.push_back({{"id", s.id}, {"artifacts", arts}, {"status", s.status}, {"error", s.error}});
  }
  return {{"schema_version", m.schema_version},
          {"scenario", m.scenario},
          {"input_hashes", m.input_hashes},
          {"stages", stages},
          {"artifacts", artifacts},
          {"spores", spores},
          {"failures", m.failures},
          {"lp_solves", m.lp_solves},
          {"power_flow_runs", m.power_flow_runs},
          {"complete", m.complete}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kManifestSchema)
    throw ValidationError(kManifestFile,
                          "unsupported schema version " + std::to_string(m.schema_version));
  m.scenario = j.at("scenario").get<std::string>();
  m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
  for (const auto& [name, r] : j.at("stages").items()) {
    StageReport s;
    s.status = r.at("status").get<std::string>();
    s.executed = r.at("executed").get<int>();
    s.cached = r.at("cached").get<int>();
    s.failed = r.at("failed").get<int>();
    s.seconds = r.at("seconds").get<double>();
    m.stages[name] = s;
  }
  for (const auto& [name, a] : j.at("artifacts").items()) m.artifacts[name] = artifact_from_json(a);
  for (const auto& s : j.at("spores")) {
    SporeRecord r;
    r.id = s.at("id").get<std::string>();
    for (const auto& [name, a] : s.at("artifacts").items())
      r.artifacts[name] = artifact_from_json(a);
    r.status = s.at("status").get<std::map<std::string, std::string>>();
    r.error = s.at("error").get<std::string>();
    m.spores.push_back(std::move(r));
  }
  m.failures = j.at("failures").get<std::vector<std::string>>();
  m.lp_solves = j.at("lp_solves").get<int>();
  m.power_flow_runs = j.at("power_flow_runs").get<int>();
  m.complete = j.at("complete").get<bool>();
  return m;
}

RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  Runner runner(config, options);
  return runner.run();
}

}  // namespace dhnplan::pipeline
