#include "dhnplan/spores.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "dhnplan/error.hpp"
#include "dhnplan/hash.hpp"

namespace dhnplan::spores {

const char* to_string(Direction d) { return d == Direction::minimize ? "minimize" : "maximize"; }

void SporesConfig::validate() const {
  if (!(slack >= 0.0)) throw ConfigurationError("slack must be >= 0");
  if (!(a >= 0.0) || !(b >= 0.0)) throw ConfigurationError("static weights a, b must be >= 0");
  if (diversification_batch < 1) throw ConfigurationError("diversification batch size must be >= 1");
  for (const auto& r : runs) {
    if (r.batch_size < 1) throw ConfigurationError("run '" + r.target + "': batch size must be >= 1");
    if (r.target.empty()) throw ConfigurationError("intensification run without target");
  }
  if (weight_strategy != "evolving_average")
    throw ConfigurationError("unsupported weight strategy '" + weight_strategy + "'");
  if (normalization != "potential")
    throw ConfigurationError("unsupported normalization '" + normalization + "'");
}

int SporesConfig::total_spores() const {
  int n = diversification_batch;
  for (const auto& r : runs) n += r.batch_size;
  return n;
}

const std::map<std::string, std::vector<TechKind>>& technology_groups() {
  using K = TechKind;
  static const std::map<std::string, std::vector<TechKind>> groups = {
      {"electrification", {K::heat_pump, K::electric_boiler}},
      {"molecule", {K::gas_boiler_greengas, K::gas_boiler_hydrogen, K::chp_greengas, K::chp_hydrogen}},
      {"gas_boilers", {K::gas_boiler_greengas, K::gas_boiler_hydrogen}},
      {"dispatchable",
       {K::electric_boiler, K::gas_boiler_greengas, K::gas_boiler_hydrogen, K::chp_greengas,
        K::chp_hydrogen, K::waste_to_energy}},
      {"non_dispatchable", {K::geothermal, K::residual_heat, K::solar_thermal}},
      {"storage", {K::tes_short_term, K::ht_ates}},
  };
  return groups;
}

std::vector<RunSpec> default_runs(const HeatSystem& system, int batch) {
  std::vector<std::string> targets;
  for (auto kind : kAllTechKinds) {
    bool present = std::any_of(system.assets.begin(), system.assets.end(), [&](const auto& a) {
      return a.kind == kind && a.capacity_bound() > 0.0;
    });
    if (present) targets.emplace_back(to_string(kind));
  }
  for (const auto& [name, kinds] : technology_groups()) {
    if (name == "gas_boilers" || name == "storage") continue;
    targets.push_back(name);
  }
  std::vector<RunSpec> runs;
  for (const auto& t : targets) {
    runs.push_back({t, Direction::maximize, batch});
    runs.push_back({t, Direction::minimize, batch});
  }
  return runs;
}

SporesConfig load_plan(const std::filesystem::path& path) {
  YAML::Node y;
  try {
    y = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ValidationError(path.string(), e.what());
  }
  SporesConfig c;
  try {
    if (auto w = y["weights"]) {
      if (w["a"]) c.a = w["a"].as<double>();
      if (w["b"]) c.b = std::abs(w["b"].as<double>());
    }
    if (y["weight_strategy"]) c.weight_strategy = y["weight_strategy"].as<std::string>();
    if (y["normalization"]) c.normalization = y["normalization"].as<std::string>();
    if (auto runs = y["runs"]) {
      for (const auto& r : runs) {
        RunSpec spec;
        spec.target = r["target"].as<std::string>();
        auto dir = r["direction"] ? r["direction"].as<std::string>() : "minimize";
        if (dir == "maximize" || dir == "max") spec.direction = Direction::maximize;
        else if (dir == "minimize" || dir == "min") spec.direction = Direction::minimize;
        else throw ValidationError(path.string(), "unknown direction '" + dir + "'");
        if (r["batch_size"]) spec.batch_size = r["batch_size"].as<int>();
        c.runs.push_back(spec);
      }
    }
    if (auto d = y["diversification"]; d && d["batch_size"])
      c.diversification_batch = d["batch_size"].as<int>();
  } catch (const YAML::Exception& e) {
    throw ValidationError(path.string(), e.what());
  }
  c.validate();
  return c;
}

std::vector<std::size_t> resolve_target(const HeatSystem& system, const std::string& target) {
  std::vector<std::size_t> out;
  if (target.rfind("asset:", 0) == 0) {
    auto id = target.substr(6);
    for (std::size_t i = 0; i < system.assets.size(); ++i)
      if (system.assets[i].id == id) out.push_back(i);
  } else {
    std::vector<TechKind> kinds;
    if (auto k = parse_tech_kind(target)) kinds.push_back(*k);
    else if (auto it = technology_groups().find(target); it != technology_groups().end())
      kinds = it->second;
    else throw ConfigurationError("unknown intensification target '" + target + "'");
    for (std::size_t i = 0; i < system.assets.size(); ++i)
      if (std::find(kinds.begin(), kinds.end(), system.assets[i].kind) != kinds.end())
        out.push_back(i);
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [&](std::size_t i) { return system.assets[i].capacity_bound() <= 0.0; }),
            out.end());
  if (out.empty()) throw ConfigurationError("intensification target '" + target + "' is empty");
  return out;
}

std::map<std::string, double> normalized_capacities(const HeatSystem& system,
                                                    const DesignResult& design) {
  std::map<std::string, double> out;
  for (const auto& a : system.assets) {
    const double bound = a.capacity_bound();
    if (bound > 0.0) out[a.id] = design.capacities.at(a.id) / bound;
  }
  return out;
}

double raw_weight(double mean, double y) {
  if (std::abs(mean) <= kZero) return std::abs(y) <= kZero ? 1.0 : 0.0;
  const double dev = std::abs((mean - y) / mean);
  return dev == 0.0 ? HUGE_VAL : 1.0 / dev;
}

double clamp_weight(double raw) { return std::clamp(raw, kOmegaMin, kOmegaMax); }

WeightState seed_weights(const std::map<std::string, double>& reference) {
  WeightState w;
  w.count = 1;
  for (const auto& [k, y] : reference) {
    w.sum[k] = y;
    w.omega[k] = 1.0;
    w.omega_raw[k] = 1.0;
  }
  return w;
}

WeightState update_weights_evolving_average(const WeightState& state,
                                            const std::map<std::string, double>& capacities) {
  WeightState next = state;
  for (const auto& [k, y] : capacities) {
    auto it = state.sum.find(k);
    const double mean = (it == state.sum.end() || state.count == 0)
                            ? 0.0
                            : it->second / static_cast<double>(state.count);
    const double raw = raw_weight(mean, y);
    next.omega_raw[k] = raw;
    next.omega[k] = clamp_weight(raw);
    next.sum[k] = (it == state.sum.end() ? 0.0 : it->second) + y;
  }
  next.count = state.count + 1;
  return next;
}

std::string weight_hash(const WeightState& state) { return sha256_hex(to_json(state).dump()); }

lp::Objective build_spores_objective(const HeatSystem& system, const VariableLayout& layout,
                                     const WeightState* weights,
                                     const std::vector<std::size_t>& target, double a, double b,
                                     Direction direction) {
  lp::Objective obj{"spores", {}, 0.0};
  std::map<lp::VarId, double> coef;
  if (a != 0.0 && weights) {
    for (std::size_t i = 0; i < system.assets.size(); ++i) {
      const double bound = system.assets[i].capacity_bound();
      if (bound <= 0.0) continue;
      auto it = weights->omega.find(system.assets[i].id);
      const double omega = it == weights->omega.end() ? 1.0 : it->second;
      coef[layout.at(i).capacity] += a * omega / bound;
    }
  }
  if (b != 0.0) {
    const double sign = direction == Direction::minimize ? 1.0 : -1.0;
    for (auto i : target) coef[layout.at(i).capacity] += sign * b / system.assets[i].capacity_bound();
  }
  for (const auto& [v, c] : coef) obj.terms.push_back({v, c});
  if (obj.terms.empty()) throw ConfigurationError("SPORES objective has no terms");
  return obj;
}

SporesBase prepare_base(const HeatSystem& system, double slack, const ModelOptions& options) {
  auto lc = solve_least_cost(system, options);
  SporesBase base;
  base.system = &system;
  base.least_cost = lc.least_cost;
  base.slack = slack;
  base.budget = lp::budget_from_slack(lc.least_cost, slack);
  base.least_cost_design = std::move(lc.design);
  base.model = std::move(lc.model);
  base.model.lp = lp::add_budget_constraint(base.model.lp, base.model.lp.objective(), base.budget,
                                            base.least_cost);
  return base;
}

SporesBase prepare_base(const HeatSystem& system, double slack, double least_cost,
                        DesignResult least_cost_design, const ModelOptions& options) {
  SporesBase base;
  base.system = &system;
  base.least_cost = least_cost;
  base.slack = slack;
  base.budget = lp::budget_from_slack(least_cost, slack);
  base.least_cost_design = std::move(least_cost_design);
  base.model = build_model(system, options);
  base.model.lp = lp::add_budget_constraint(base.model.lp, base.model.lp.objective(), base.budget,
                                            base.least_cost);
  return base;
}

std::string run_id(const SporesConfig& config, std::size_t run_index) {
  if (run_index == config.runs.size()) return "div";
  const auto& r = config.runs.at(run_index);
  char prefix[8];
  std::snprintf(prefix, sizeof prefix, "r%02zu", run_index);
  std::string t = r.target;
  std::replace(t.begin(), t.end(), ':', '_');
  return std::string(prefix) + "-" + t + "-" + (r.direction == Direction::minimize ? "min" : "max");
}

Spore generate_one(const SporesBase& base, const SporesConfig& config, std::size_t run_index,
                   int iteration, const Spore* previous) {
  const HeatSystem& sys = *base.system;
  const bool diversify = run_index == config.runs.size();
  if (run_index > config.runs.size()) throw ConfigurationError("run index out of range");
  if (iteration > 0 && !previous)
    throw ConfigurationError("iteration " + std::to_string(iteration) + " needs its predecessor");
  const std::string rid = run_id(config, run_index);
  std::vector<std::size_t> target;
  Direction dir = Direction::minimize;
  if (!diversify) {
    target = resolve_target(sys, config.runs[run_index].target);
    dir = config.runs[run_index].direction;
  }

  std::optional<WeightState> weights;
  if (iteration == 0) {
    if (diversify) weights = seed_weights(normalized_capacities(sys, base.least_cost_design));
  } else if (!diversify && iteration == 1) {
    weights = seed_weights(previous->normalized);
  } else {
    weights = update_weights_evolving_average(previous->weights, previous->normalized);
  }

  const bool first_intensify = !diversify && iteration == 0;
  const double a = first_intensify ? 0.0 : config.a;
  const double b = diversify ? 0.0 : (first_intensify ? 1.0 : config.b);
  auto obj = build_spores_objective(sys, base.model.layout, weights ? &*weights : nullptr, target,
                                    a, b, dir);
  auto prog = lp::replace_objective(base.model.lp, obj);
  auto sol = lp::solve(prog);
  if (sol.status != lp::Status::optimal)
    throw SolverError("run " + rid + " iteration " + std::to_string(iteration) + ": " +
                      lp::to_string(sol.status) + " under the cost budget");

  Spore s;
  s.id = rid + "-" + std::to_string(iteration);
  s.provenance.run_index = run_index;
  s.provenance.run_id = rid;
  s.provenance.target = diversify ? "" : config.runs[run_index].target;
  s.provenance.direction = diversify ? "diversify" : to_string(dir);
  s.provenance.iteration = iteration;
  s.provenance.a = a;
  s.provenance.b = dir == Direction::minimize ? b : -b;
  s.design = extract_design(sys, base.model, sol.values);
  s.cost = s.design.cost.total;
  s.spores_objective = sol.objective;
  s.normalized = normalized_capacities(sys, s.design);
  for (auto i : target) s.target_capacity += s.normalized.at(sys.assets[i].id);
  if (weights) s.weights = *weights;
  s.provenance.weight_hash = weight_hash(s.weights);
  return s;
}

int batch_size(const SporesConfig& config, std::size_t run_index) {
  return run_index == config.runs.size() ? config.diversification_batch
                                         : config.runs.at(run_index).batch_size;
}

std::vector<Spore> generate_batch(const SporesBase& base, const SporesConfig& config,
                                  std::size_t run_index) {
  std::vector<Spore> out;
  const int batch = batch_size(config, run_index);
  for (int k = 0; k < batch; ++k)
    out.push_back(generate_one(base, config, run_index, k, out.empty() ? nullptr : &out.back()));
  return out;
}

std::vector<std::string> diversity_flags(const std::vector<Spore>& spores) {
  std::map<std::string, std::vector<const Spore*>> runs;
  for (const auto& s : spores) runs[s.provenance.run_id].push_back(&s);
  std::vector<std::string> notes;
  for (const auto& [rid, batch] : runs) {
    if (batch.size() < 3) continue;
    double spread = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t j = i + 1; j < batch.size(); ++j)
        for (const auto& [k, v] : batch[i]->normalized)
          spread = std::max(spread, std::abs(v - batch[j]->normalized.at(k)));
    if (spread <= 0.01)
      notes.push_back("run " + rid + ": no two spores differ by more than 1% of potential");
  }
  return notes;
}

SporeSet generate_all(const HeatSystem& system, const SporesConfig& config,
                      const GenerateOptions& options) {
  config.validate();
  auto base = prepare_base(system, config.slack, options.model);
  const std::size_t n_runs = config.runs.size() + 1;
  std::vector<std::vector<Spore>> results(n_runs);
  std::vector<std::optional<std::string>> errors(n_runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < n_runs;) {
      try {
        results[r] = generate_batch(base, config, r);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, n_runs));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SporeSet set;
  set.least_cost = base.least_cost;
  set.budget = base.budget;
  set.slack = config.slack;
  for (std::size_t r = 0; r < n_runs; ++r) {
    if (errors[r]) set.failures.push_back({run_id(config, r), *errors[r]});
    for (auto& s : results[r]) set.spores.push_back(std::move(s));
  }
  set.notes = diversity_flags(set.spores);
  return set;
}

nlohmann::json to_json(const WeightState& w) {
  nlohmann::json raw = nlohmann::json::object();
  for (const auto& [k, v] : w.omega_raw) raw[k] = std::isfinite(v) ? nlohmann::json(v) : nullptr;
  return {{"count", w.count}, {"sum", w.sum}, {"omega", w.omega}, {"omega_raw", raw}};
}

WeightState weights_from_json(const nlohmann::json& j) {
  WeightState w;
  w.count = j.at("count").get<std::size_t>();
  w.sum = j.at("sum").get<std::map<std::string, double>>();
  w.omega = j.at("omega").get<std::map<std::string, double>>();
  for (const auto& [k, v] : j.at("omega_raw").items())
    w.omega_raw[k] = v.is_null() ? HUGE_VAL : v.get<double>();
  return w;
}

nlohmann::json to_json(const Spore& s) {
  const auto& p = s.provenance;
  return {{"id", s.id},
          {"provenance",
           {{"run_index", p.run_index},
            {"run_id", p.run_id},
            {"target", p.target},
            {"direction", p.direction},
            {"iteration", p.iteration},
            {"a", p.a},
            {"b", p.b},
            {"weight_hash", p.weight_hash},
            {"solver", p.solver}}},
          {"cost", s.cost},
          {"spores_objective", s.spores_objective},
          {"target_capacity", s.target_capacity},
          {"normalized_capacities", s.normalized},
          {"weights", to_json(s.weights)},
          {"design", dhnplan::to_json(s.design)}};
}

Spore spore_from_json(const nlohmann::json& j) {
  Spore s;
  s.id = j.at("id").get<std::string>();
  const auto& p = j.at("provenance");
  s.provenance.run_index = p.at("run_index").get<std::size_t>();
  s.provenance.run_id = p.at("run_id").get<std::string>();
  s.provenance.target = p.at("target").get<std::string>();
  s.provenance.direction = p.at("direction").get<std::string>();
  s.provenance.iteration = p.at("iteration").get<int>();
  s.provenance.a = p.at("a").get<double>();
  s.provenance.b = p.at("b").get<double>();
  s.provenance.weight_hash = p.at("weight_hash").get<std::string>();
  s.provenance.solver = p.at("solver").get<std::string>();
  s.cost = j.at("cost").get<double>();
  s.spores_objective = j.at("spores_objective").get<double>();
  s.target_capacity = j.at("target_capacity").get<double>();
  s.normalized = j.at("normalized_capacities").get<std::map<std::string, double>>();
  s.weights = weights_from_json(j.at("weights"));
  s.design = design_from_json(j.at("design"));
  return s;
}

}  // namespace dhnplan::spores
