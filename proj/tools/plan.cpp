// plan: command-line front end for scenario runs and decision-space queries.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

#include "dhnplan/error.hpp"
#include "dhnplan/metrics.hpp"
#include "dhnplan/pipeline.hpp"
#include "dhnplan/serve.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace dhnplan;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct StageArgs {
  std::string scenario, output, plan;
  std::optional<double> slack;
  unsigned jobs = 0;
  bool quiet = false;
};

int run_stages(const StageArgs& a, pipeline::Stage until) {
  const bool quiet = a.quiet;
  auto cfg = pipeline::load_scenario(a.scenario);
  if (!a.output.empty()) cfg.output_dir = a.output;
  if (!a.plan.empty()) cfg.plan_path = fs::absolute(a.plan);
  if (a.slack) cfg.slack = *a.slack;
  if (a.jobs > 0) cfg.jobs = a.jobs;
  pipeline::RunOptions opt;
  opt.until = until;
  if (!quiet) opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
  auto m = pipeline::run_scenario(cfg, opt);
  for (const auto& f : m.failures) std::cerr << "failed: " << f << '\n';
  if (!quiet)
    std::cerr << cfg.output_dir.string() << ": " << m.spores.size() << " spores, " << m.lp_solves
              << " LP solves, " << m.power_flow_runs << " power-flow runs"
              << (m.complete ? "" : ", INCOMPLETE") << '\n';
  return m.complete ? 0 : 1;
}

metrics::DecisionSpace load_space(const fs::path& dir) {
  const fs::path p = dir / pipeline::kDecisionSpaceJson;
  std::ifstream in(p);
  if (!in) throw Error("no decision space bundle at " + p.string());
  return metrics::decision_space_from_json(nlohmann::json::parse(in));
}

int filter_dir(const std::string& dir, const std::vector<std::string>& presets,
           const std::vector<std::string>& where, bool envelope, const std::string& format) {
  auto space = load_space(dir);
  std::vector<std::string> predicates;
  for (const auto& name : presets) {
    auto it = space.presets.find(name);
    if (it == space.presets.end()) {
      std::string known;
      for (const auto& [k, v] : space.presets) known += " " + k;
      throw ValidationError("preset", "unknown preset '" + name + "'; available:" + known);
    }
    predicates.insert(predicates.end(), it->second.begin(), it->second.end());
  }
  predicates.insert(predicates.end(), where.begin(), where.end());
  auto result = metrics::filter_constraints(space, predicates);
  std::vector<std::string> ids = result.ids;
  if (envelope) {
    // The benchmark stays in so the envelope is taken against it.
    std::vector<std::string> candidates = ids;
    candidates.push_back(space.reference().id);
    auto env = metrics::lower_envelope(space, &candidates);
    ids.clear();
    for (const auto& id : env)
      if (id != space.reference().id) ids.push_back(id);
  }
  for (const auto& a : result.audit)
    std::cerr << a.predicate << "  (threshold " << a.threshold << "): " << a.passed << " pass\n";
  std::cerr << ids.size() << " of " << metrics::filter_constraints(space, {}).ids.size()
            << " spores selected\n";

  if (format == "ids") {
    for (const auto& id : ids) std::cout << id << '\n';
  } else if (format == "json") {
    nlohmann::json audit = nlohmann::json::array();
    for (const auto& a : result.audit)
      audit.push_back({{"predicate", a.predicate}, {"threshold", a.threshold}, {"passed", a.passed}});
    std::cout << nlohmann::json({{"predicates", predicates}, {"audit", audit}, {"ids", ids}}).dump(1)
              << '\n';
  } else {
    metrics::DecisionSpace sub = space;
    sub.rows.clear();
    for (const auto& r : space.rows)
      if (r.kind != metrics::RowKind::spore ||
          std::find(ids.begin(), ids.end(), r.id) != ids.end())
        sub.rows.push_back(r);
    std::cout << metrics::to_csv(sub);
  }
  return 0;
}

int serve_dir(const std::string& dir, const std::string& host, int port) {
  auto server = serve::make_server(dir);
  g_server = server.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving " << dir << " on http://" << host << ':' << port << "/\n";
  if (!server->listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"District-heating network planning: least-cost, SPORES, power flows, metrics"};
  app.require_subcommand(1);

  StageArgs args;
  struct StageCmd {
    const char* name;
    const char* help;
    pipeline::Stage until;
  };
  const StageCmd stage_cmds[] = {
      {"solve", "Ingest inputs and solve the least-cost design", pipeline::Stage::least_cost},
      {"spores", "Run through SPORES generation", pipeline::Stage::spores},
      {"flows", "Run through the per-Spore power flows", pipeline::Stage::spore_flows},
      {"metrics", "Run through the per-Spore metrics", pipeline::Stage::metrics},
      {"run", "Run every stage and export the decision space", pipeline::Stage::export_},
  };
  std::vector<std::pair<CLI::App*, pipeline::Stage>> subs;
  for (const auto& c : stage_cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("scenario", args.scenario, "Scenario YAML file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--output", args.output, "Output directory (overrides the scenario)");
    sub->add_option("--slack", args.slack, "Cost slack (overrides the scenario)");
    sub->add_option("--plan", args.plan, "Run plan file (overrides the scenario)")
        ->check(CLI::ExistingFile);
    sub->add_option("-j,--jobs", args.jobs, "Worker threads (DHNPLAN_JOBS overrides)");
    sub->add_flag("-q,--quiet", args.quiet, "Only report failures");
    subs.emplace_back(sub, c.until);
  }

  std::string dir, host = "127.0.0.1", format = "ids";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve an output directory over local HTTP");
  serve_cmd->add_option("outdir", dir, "Output directory of a completed run")->required();
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("-p,--port", port, "Port");

  std::vector<std::string> presets, where;
  bool envelope = false;
  auto* filter_cmd = app.add_subcommand("filter", "Select Spores from an exported decision space");
  filter_cmd->add_option("outdir", dir, "Output directory of a completed run")->required();
  filter_cmd->add_option("--preset", presets, "Constraint preset from the scenario (repeatable)");
  filter_cmd->add_option("--where", where, "Predicate such as 'cap:geothermal == 0' (repeatable)");
  filter_cmd->add_flag("--envelope", envelope,
                       "Keep only Spores within the lower grid loading envelope");
  filter_cmd->add_option("--format", format, "ids, csv or json")
      ->check(CLI::IsMember({"ids", "csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, until] : subs)
      if (sub->parsed()) return run_stages(args, until);
    if (serve_cmd->parsed()) return serve_dir(dir, host, port);
    if (filter_cmd->parsed()) return filter_dir(dir, presets, where, envelope, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
