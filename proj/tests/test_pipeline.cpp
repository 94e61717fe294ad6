#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "dhnplan/error.hpp"
#include "dhnplan/hash.hpp"
#include "dhnplan/metrics.hpp"
#include "dhnplan/pipeline.hpp"
#include "dhnplan/serve.hpp"
#include "test_support.hpp"

// After the project headers: resolv.h defines macros that clash with Eigen.
#include <httplib.h>

using namespace dhnplan;
using namespace dhnplan::pipeline;
using dhnplan::testing::fixtures;
using dhnplan::testing::TempDir;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// Small campaign on the two-node system: 2 runs of 3 plus a diversification
// run of 2.
void write_plan(const fs::path& p) {
  spit(p,
       "weights: {a: 1, b: 10}\n"
       "runs:\n"
       "  - {target: electrification, direction: minimize, batch_size: 3}\n"
       "  - {target: solar_thermal, direction: maximize, batch_size: 3}\n"
       "diversification: {batch_size: 2}\n");
}

ScenarioConfig small_scenario(const TempDir& tmp, const std::string& out = "out") {
  write_plan(tmp.path() / "plan.yaml");
  ScenarioConfig c;
  c.system_dir = fixtures() / "toy2";
  c.grid_dir = fixtures() / "grid10";
  c.plan_path = tmp.path() / "plan.yaml";
  c.output_dir = tmp.path() / out;
  c.jobs = 2;
  c.presets["no_p2h"] = {"cap:electrification == 0"};
  return c;
}

const std::vector<std::string> kSmallIds = {
    "r00-electrification-min-0", "r00-electrification-min-1", "r00-electrification-min-2",
    "r01-solar_thermal-max-0",   "r01-solar_thermal-max-1",   "r01-solar_thermal-max-2",
    "div-0",                     "div-1"};

// One shared run: most tests copy its output directory instead of solving again.
class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new TempDir("dhnplan-pipe");
    cfg_ = new ScenarioConfig(small_scenario(*tmp_));
    first_ = new RunManifest(run_scenario(*cfg_));
  }
  static void TearDownTestSuite() {
    delete first_;
    delete cfg_;
    delete tmp_;
  }

  // Copy of the shared output directory with its own scenario pointing at it.
  ScenarioConfig fork(const TempDir& into) const {
    ScenarioConfig c = *cfg_;
    c.output_dir = into.path() / "out";
    fs::copy(cfg_->output_dir, c.output_dir, fs::copy_options::recursive);
    return c;
  }

  static TempDir* tmp_;
  static ScenarioConfig* cfg_;
  static RunManifest* first_;
};

TempDir* SmallRun::tmp_ = nullptr;
ScenarioConfig* SmallRun::cfg_ = nullptr;
RunManifest* SmallRun::first_ = nullptr;

}  // namespace

TEST(Scenario, ResolvesRelativePathsAgainstItsFile) {
  auto c = load_scenario(fixtures() / "scenarios" / "toy.yaml");
  EXPECT_EQ(c.system_dir, (fixtures() / "heat5").lexically_normal());
  EXPECT_EQ(c.grid_dir, (fixtures() / "grid10").lexically_normal());
  EXPECT_EQ(c.plan_path, (fixtures() / "scenarios" / "plan_desk.yaml").lexically_normal());
  EXPECT_DOUBLE_EQ(c.slack, 0.10);
  EXPECT_EQ(c.overload_window, 7);
  EXPECT_EQ(c.presets.at("no_geothermal_limited_gas").size(), 2u);
}

TEST(Scenario, RejectsBadFilesAndValues) {
  TempDir tmp;
  write_plan(tmp.path() / "plan.yaml");
  const std::string base = "system: " + (fixtures() / "toy2").string() +
                           "\ngrid: " + (fixtures() / "grid10").string() +
                           "\nplan: plan.yaml\noutput_dir: out\n";
  auto load = [&](const std::string& extra) {
    spit(tmp.path() / "s.yaml", base + extra);
    return load_scenario(tmp.path() / "s.yaml");
  };
  EXPECT_NO_THROW(load(""));
  EXPECT_THROW(load("slak: 0.1\n"), ValidationError);
  EXPECT_THROW(load("slack: 1.5\n"), ConfigurationError);
  EXPECT_THROW(load("slack: -0.01\n"), ConfigurationError);
  EXPECT_THROW(load("demand_scale: 0\n"), ConfigurationError);
  EXPECT_THROW(load("overload_counting: sometimes\n"), ConfigurationError);
  EXPECT_THROW(load("overload_window: 0\n"), ConfigurationError);
  EXPECT_THROW(load("slack: lots\n"), ValidationError);

  spit(tmp.path() / "s.yaml", "system: nowhere\ngrid: nowhere\nplan: plan.yaml\noutput_dir: o\n");
  EXPECT_THROW(load_scenario(tmp.path() / "s.yaml"), ConfigurationError);
  spit(tmp.path() / "s.yaml", "grid: x\n");
  EXPECT_THROW(load_scenario(tmp.path() / "s.yaml"), ValidationError);
}

TEST(Jobs, EnvironmentOverridesRequest) {
  ::unsetenv("DHNPLAN_JOBS");
  EXPECT_EQ(resolve_jobs(3), 3u);
  EXPECT_GE(resolve_jobs(0), 1u);
  ::setenv("DHNPLAN_JOBS", "5", 1);
  EXPECT_EQ(resolve_jobs(3), 5u);
  EXPECT_EQ(resolve_jobs(0), 5u);
  ::setenv("DHNPLAN_JOBS", "0", 1);
  EXPECT_THROW(resolve_jobs(1), ConfigurationError);
  ::setenv("DHNPLAN_JOBS", "4x", 1);
  EXPECT_THROW(resolve_jobs(1), ConfigurationError);
  ::unsetenv("DHNPLAN_JOBS");
}

TEST_F(SmallRun, StageArithmetic) {
  const auto& m = *first_;
  ASSERT_TRUE(m.complete) << (m.failures.empty() ? "" : m.failures.front());
  ASSERT_EQ(m.spores.size(), kSmallIds.size());
  for (std::size_t i = 0; i < kSmallIds.size(); ++i) EXPECT_EQ(m.spores[i].id, kSmallIds[i]);
  // One least-cost solve plus one per Spore; benchmarks plus one flow run per Spore.
  EXPECT_EQ(m.lp_solves, 9);
  EXPECT_EQ(m.power_flow_runs, 10);
  for (Stage s : kAllStages) EXPECT_EQ(m.stages.at(to_string(s)).status, "executed") << to_string(s);
  EXPECT_EQ(m.stages.at("spore_flows").executed, 8);
  EXPECT_EQ(m.stages.at("benchmark_flows").executed, 2);

  const auto space = metrics::decision_space_from_json(
      json::parse(slurp(cfg_->output_dir / kDecisionSpaceJson)));
  EXPECT_EQ(space.rows.size(), kSmallIds.size() + 2);
  EXPECT_EQ(space.rows[0].kind, metrics::RowKind::least_cost);
  EXPECT_EQ(space.rows[1].kind, metrics::RowKind::no_dhn);
  for (const auto& r : space.rows) EXPECT_TRUE(r.complete) << r.id;
  EXPECT_TRUE(fs::is_regular_file(cfg_->output_dir / kDecisionSpaceCsv));
}

TEST_F(SmallRun, ManifestRoundTripsAndMatchesFiles) {
  const auto on_disk = manifest_from_json(json::parse(slurp(cfg_->output_dir / kManifestFile)));
  EXPECT_EQ(on_disk.schema_version, kManifestSchema);
  EXPECT_EQ(to_json(on_disk), to_json(*first_));
  for (const auto& s : on_disk.spores)
    for (const auto& [name, a] : s.artifacts) {
      ASSERT_TRUE(fs::is_regular_file(cfg_->output_dir / a.path)) << a.path;
      EXPECT_EQ(sha256_hex(slurp(cfg_->output_dir / a.path)), a.sha256) << a.path;
    }
  for (const auto& k : {"system", "grid", "plan", "config"})
    EXPECT_EQ(on_disk.input_hashes.at(k).size(), 64u);
}

TEST_F(SmallRun, SporeIndexListsTheSetInOrder) {
  const auto index = json::parse(slurp(cfg_->output_dir / "spores" / "index.json"));
  ASSERT_EQ(index.at("spores").size(), kSmallIds.size());
  const double budget = index.at("budget").get<double>();
  EXPECT_NEAR(budget, 1.10 * index.at("least_cost").get<double>(), 1e-6 * budget);
  for (std::size_t i = 0; i < kSmallIds.size(); ++i) {
    const auto& e = index["spores"][i];
    EXPECT_EQ(e.at("id"), kSmallIds[i]);
    EXPECT_LE(e.at("cost").get<double>(), budget * (1 + 1e-6));
    EXPECT_TRUE(fs::is_regular_file(cfg_->output_dir / e.at("path").get<std::string>()));
  }
  EXPECT_EQ(index["spores"][0].at("direction"), "minimize");
  EXPECT_EQ(index["spores"][6].at("direction"), "diversify");
}

TEST_F(SmallRun, UnchangedRerunIsFullyCached) {
  TempDir tmp;
  auto c = fork(tmp);
  const auto m = run_scenario(c);
  EXPECT_TRUE(m.complete);
  EXPECT_EQ(m.lp_solves, 0);
  EXPECT_EQ(m.power_flow_runs, 0);
  for (Stage s : kAllStages) {
    EXPECT_EQ(m.stages.at(to_string(s)).status, "cached") << to_string(s);
    EXPECT_EQ(m.stages.at(to_string(s)).executed, 0) << to_string(s);
  }
  EXPECT_EQ(slurp(c.output_dir / kDecisionSpaceCsv), slurp(cfg_->output_dir / kDecisionSpaceCsv));
}

TEST_F(SmallRun, IdenticalRunsAreByteIdentical) {
  TempDir tmp;
  ScenarioConfig c = *cfg_;
  c.output_dir = tmp.path() / "again";
  c.jobs = 1;  // the worker count must not leak into the results
  const auto m = run_scenario(c);
  ASSERT_TRUE(m.complete);
  EXPECT_EQ(slurp(c.output_dir / kDecisionSpaceCsv), slurp(cfg_->output_dir / kDecisionSpaceCsv));
  EXPECT_EQ(slurp(c.output_dir / kDecisionSpaceJson),
            slurp(cfg_->output_dir / kDecisionSpaceJson));
  for (const auto& id : kSmallIds)
    EXPECT_EQ(slurp(c.output_dir / "spores" / (id + ".json")),
              slurp(cfg_->output_dir / "spores" / (id + ".json")))
        << id;
}

TEST_F(SmallRun, CorruptedSporeReexecutesOnlyItsDownstream) {
  TempDir tmp;
  auto c = fork(tmp);
  const std::string victim = "r00-electrification-min-1";
  const fs::path file = c.output_dir / "spores" / (victim + ".json");
  const std::string original = slurp(file);
  spit(file, original.substr(0, original.size() / 2));

  const auto m = run_scenario(c);
  ASSERT_TRUE(m.complete);
  EXPECT_EQ(slurp(file), original);
  EXPECT_EQ(m.lp_solves, 1);
  EXPECT_EQ(m.power_flow_runs, 1);
  for (const auto& s : m.spores) {
    const std::string expect = s.id == victim ? "executed" : "cached";
    for (const char* a : {"spore", "flows", "metrics"})
      EXPECT_EQ(s.status.at(a), expect) << s.id << " " << a;
  }
  for (const char* s : {"ingest", "least_cost", "benchmark_flows"})
    EXPECT_EQ(m.stages.at(s).status, "cached") << s;
  // The regenerated Spore hashes the same, so later iterations and the export stay valid.
  EXPECT_EQ(m.stages.at("export").status, "cached");
  EXPECT_EQ(slurp(c.output_dir / kDecisionSpaceCsv), slurp(cfg_->output_dir / kDecisionSpaceCsv));
}

TEST_F(SmallRun, DeletedArtifactsAreReproducedIdentically) {
  TempDir tmp;
  auto c = fork(tmp);
  const std::vector<fs::path> victims = {
      "flows/div-1.json", "metrics/r01-solar_thermal-max-2.json", "spores/div-0.json",
      "flows/no_dhn.json", kDecisionSpaceCsv};
  std::vector<std::string> before;
  for (const auto& v : victims) {
    before.push_back(slurp(c.output_dir / v));
    fs::remove(c.output_dir / v);
  }
  const auto m = run_scenario(c);
  ASSERT_TRUE(m.complete);
  for (std::size_t i = 0; i < victims.size(); ++i)
    EXPECT_EQ(slurp(c.output_dir / victims[i]), before[i]) << victims[i];
  EXPECT_EQ(m.lp_solves, 1);         // div-0
  EXPECT_EQ(m.power_flow_runs, 3);   // div-0, div-1, no_dhn
  EXPECT_EQ(m.spore("div-1")->status.at("spore"), "cached");
  EXPECT_EQ(m.spore("div-1")->status.at("flows"), "executed");
  EXPECT_EQ(m.spore("r01-solar_thermal-max-2")->status.at("flows"), "cached");
  EXPECT_EQ(m.spore("r01-solar_thermal-max-2")->status.at("metrics"), "executed");
  EXPECT_EQ(m.spore("r00-electrification-min-0")->status.at("metrics"), "cached");
}

TEST_F(SmallRun, MetricSettingsOnlyRerunMetrics) {
  TempDir tmp;
  auto c = fork(tmp);
  c.loading_limit = 80.0;
  const auto m = run_scenario(c);
  ASSERT_TRUE(m.complete);
  EXPECT_EQ(m.lp_solves, 0);
  EXPECT_EQ(m.power_flow_runs, 0);
  EXPECT_EQ(m.stages.at("spores").status, "cached");
  EXPECT_EQ(m.stages.at("spore_flows").status, "cached");
  EXPECT_EQ(m.stages.at("metrics").status, "executed");
  EXPECT_EQ(m.stages.at("export").status, "executed");
}

TEST_F(SmallRun, SlackChangeRegeneratesSporesButNotLeastCost) {
  TempDir tmp;
  auto c = fork(tmp);
  c.slack = 0.05;
  const auto m = run_scenario(c);
  ASSERT_TRUE(m.complete);
  EXPECT_EQ(m.stages.at("least_cost").status, "cached");
  EXPECT_EQ(m.stages.at("benchmark_flows").status, "cached");
  EXPECT_EQ(m.stages.at("spores").executed, 8);
  EXPECT_EQ(m.lp_solves, 8);
}

TEST_F(SmallRun, UntilStopsAfterTheRequestedStage) {
  TempDir tmp;
  ScenarioConfig c = *cfg_;
  c.output_dir = tmp.path() / "partial";
  RunOptions opt;
  opt.until = Stage::least_cost;
  auto m = run_scenario(c, opt);
  EXPECT_TRUE(m.complete);
  EXPECT_EQ(m.lp_solves, 1);
  EXPECT_EQ(m.stages.at("spores").status, "pending");
  EXPECT_FALSE(fs::exists(c.output_dir / kDecisionSpaceCsv));
  // Finishing later reuses the solve.
  m = run_scenario(c);
  EXPECT_TRUE(m.complete);
  EXPECT_EQ(m.stages.at("least_cost").status, "cached");
  EXPECT_EQ(slurp(c.output_dir / kDecisionSpaceCsv), slurp(cfg_->output_dir / kDecisionSpaceCsv));
}

TEST_F(SmallRun, FailedStageHaltsDownstreamAndKeepsResults) {
  TempDir tmp;
  auto c = fork(tmp);
  c.presets["broken"] = {"cap:nothing_like_this > 1"};
  const auto m = run_scenario(c);
  EXPECT_FALSE(m.complete);
  EXPECT_EQ(m.stages.at("metrics").status, "cached");
  EXPECT_EQ(m.stages.at("export").status, "failed");
  ASSERT_EQ(m.failures.size(), 1u);
  EXPECT_NE(m.failures[0].find("export"), std::string::npos);
  // Earlier artifacts are still recorded and intact.
  const auto on_disk = manifest_from_json(json::parse(slurp(c.output_dir / kManifestFile)));
  EXPECT_FALSE(on_disk.complete);
  EXPECT_EQ(on_disk.spores.size(), kSmallIds.size());
}

TEST(Pipeline, FailedRunOnlyLosesItsOwnSpores) {
  TempDir tmp;
  auto c = small_scenario(tmp);
  // The two-node system has no geothermal, so this run fails at its first iteration.
  spit(c.plan_path,
       "runs:\n"
       "  - {target: electrification, direction: minimize, batch_size: 2}\n"
       "  - {target: geothermal, direction: maximize, batch_size: 2}\n"
       "diversification: {batch_size: 1}\n");
  const auto m = run_scenario(c);
  EXPECT_FALSE(m.complete);
  ASSERT_EQ(m.failures.size(), 1u);
  EXPECT_NE(m.failures[0].find("r01-geothermal-max"), std::string::npos) << m.failures[0];
  EXPECT_EQ(m.stages.at("spores").status, "partial");
  for (const auto& s : m.spores) {
    if (s.id.rfind("r01-", 0) == 0) {
      EXPECT_EQ(s.status.at("spore"), "failed") << s.id;
      EXPECT_FALSE(s.error.empty());
      EXPECT_TRUE(s.artifacts.empty());
    } else {
      EXPECT_EQ(s.status.at("metrics"), "executed") << s.id;
    }
  }
  // The export still carries every Spore that made it through.
  const auto space = metrics::decision_space_from_json(
      json::parse(slurp(c.output_dir / kDecisionSpaceJson)));
  EXPECT_EQ(space.rows.size(), 2u + 3u);
}

TEST(Pipeline, IngestFailureHaltsEverything) {
  TempDir tmp;
  auto c = small_scenario(tmp);
  // Drop a bus the heat system is mapped to.
  auto g = dhnplan::testing::copy_fixture("grid10", tmp);
  std::istringstream in(slurp(g / "buses.csv"));
  std::string line, kept;
  while (std::getline(in, line))
    if (line.rfind("B7,", 0) != 0) kept += line + "\n";
  spit(g / "buses.csv", kept);
  c.grid_dir = g;
  const auto m = run_scenario(c);
  EXPECT_FALSE(m.complete);
  EXPECT_EQ(m.lp_solves, 0);
  ASSERT_FALSE(m.failures.empty());
  EXPECT_EQ(m.failures[0].rfind("ingest", 0), 0u) << m.failures[0];
  EXPECT_EQ(m.stages.at("least_cost").status, "pending");
  EXPECT_FALSE(fs::exists(c.output_dir / kDecisionSpaceCsv));
}

namespace {

struct Served {
  explicit Served(const fs::path& dir) : server(serve::make_server(dir)) {
    port = server->bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server->listen_after_bind(); });
    server->wait_until_ready();
  }
  ~Served() {
    server->stop();
    thread.join();
  }
  std::unique_ptr<httplib::Server> server;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_F(SmallRun, ServeReturnsTheBundleByteIdentically) {
  Served s(cfg_->output_dir);
  ASSERT_GT(s.port, 0);
  const std::string expected = slurp(cfg_->output_dir / kDecisionSpaceJson);

  httplib::Client cli("127.0.0.1", s.port);
  auto res = cli.Get("/decision_space.json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, expected);
  EXPECT_NE(res->get_header_value("Content-Type").find("json"), std::string::npos);

  auto root = cli.Get("/");
  ASSERT_TRUE(root);
  EXPECT_EQ(root->status, 302);
  EXPECT_EQ(root->get_header_value("Location"), "/decision_space.json");

  auto post = cli.Post("/decision_space.json", "{}", "application/json");
  ASSERT_TRUE(post);
  EXPECT_GE(post->status, 400);
  EXPECT_EQ(slurp(cfg_->output_dir / kDecisionSpaceJson), expected);
}

TEST_F(SmallRun, ServeGivesConcurrentReadersIdenticalContent) {
  Served s(cfg_->output_dir);
  const std::string expected = slurp(cfg_->output_dir / kDecisionSpaceJson);
  constexpr int kReaders = 8, kEach = 5;
  std::vector<int> matches(kReaders, 0);
  std::vector<std::thread> readers;
  for (int r = 0; r < kReaders; ++r)
    readers.emplace_back([&, r] {
      httplib::Client cli("127.0.0.1", s.port);
      for (int k = 0; k < kEach; ++k) {
        auto res = cli.Get("/decision_space.json");
        if (res && res->status == 200 && res->body == expected) ++matches[r];
      }
    });
  for (auto& t : readers) t.join();
  for (int r = 0; r < kReaders; ++r) EXPECT_EQ(matches[r], kEach) << "reader " << r;
}

TEST(Serve, MissingOrInvalidBundleIsAStartupError) {
  TempDir tmp;
  EXPECT_THROW(serve::make_server(tmp.path()), Error);
  spit(tmp.path() / kDecisionSpaceJson, "{\"schema_version\": 999}");
  EXPECT_THROW(serve::make_server(tmp.path()), Error);
}
