#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dhnplan/error.hpp"
#include "dhnplan/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dhnplan;
using namespace dhnplan::metrics;
using dhnplan::testing::fixtures;
using dhnplan::oracles::hand_count;
using dhnplan::oracles::series;

namespace {

DesignResult design_of(std::vector<std::tuple<std::string, TechKind, double>> assets, double cost) {
  DesignResult d;
  for (auto& [id, kind, cap] : assets) {
    d.assets[id] = {"N", kind};
    d.capacities[id] = cap;
  }
  d.cost.total = cost;
  return d;
}

HeatSystem flat_demand_system(std::size_t T, double demand, double weight) {
  HeatSystem s;
  for (std::size_t t = 0; t < T; ++t) {
    s.snapshots.timestamps.push_back("t" + std::to_string(t));
    s.snapshots.weights.push_back(weight);
  }
  HeatNode n;
  n.id = "N";
  n.demand = Series(T, demand);
  s.nodes.push_back(n);
  return s;
}

grid::FlowResult flows_of(const std::vector<std::pair<grid::BranchKind, std::vector<double>>>& b) {
  grid::FlowResult r;
  const std::size_t T = b.empty() ? 0 : b[0].second.size();
  r.timestamps.resize(T);
  r.converged.assign(T, true);
  r.flows.assign(T, std::vector<grid::BranchFlow>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k) {
    r.branch_ids.push_back("c" + std::to_string(k));
    r.branch_kinds.push_back(b[k].first);
    r.branch_ratings.push_back(10.0);
    for (std::size_t t = 0; t < T; ++t) {
      r.flows[t][k].loading_percent = b[k].second[t];
      r.flows[t][k].loading_active_percent = b[k].second[t] * 0.95;
    }
  }
  return r;
}

DecisionRow row_with(std::string id, std::map<std::string, double> caps, GridMetrics g) {
  DecisionRow r;
  r.id = std::move(id);
  r.kind = RowKind::spore;
  r.capacities = std::move(caps);
  r.grid = std::move(g);
  r.cost = 1.0;
  return r;
}

GridMetrics gm(int le, int te, double ls, double ts, double lp, double tp) {
  GridMetrics g;
  g.line_overload_events = le;
  g.transformer_overload_events = te;
  g.overloaded_lines_share = ls;
  g.overloaded_transformers_share = ts;
  g.line_loading_p = lp;
  g.transformer_loading_p = tp;
  return g;
}

DecisionSpace synthetic_space() {
  DecisionSpace s;
  s.peak_demand = 1400.0;
  s.least_cost = 100.0;
  s.assets = {{"geo_1", {"N1", TechKind::geothermal}},
              {"geo_2", {"N2", TechKind::geothermal}},
              {"gb_1", {"N1", TechKind::gas_boiler_greengas}},
              {"gbh_2", {"N2", TechKind::gas_boiler_hydrogen}},
              {"hp_1", {"N1", TechKind::heat_pump}}};
  DecisionRow lc = row_with("least_cost", {{"geo_1", 50}, {"gb_1", 200}, {"hp_1", 100}},
                             gm(3, 4, 20, 40, 80, 120));
  lc.kind = RowKind::least_cost;
  s.rows.push_back(lc);
  DecisionRow base;
  base.id = "no_dhn";
  base.kind = RowKind::no_dhn;
  base.grid = gm(0, 2, 0, 20, 50, 90);
  s.rows.push_back(base);
  s.rows.push_back(row_with("s0", {{"geo_1", 10}, {"gb_1", 300}, {"gbh_2", 0}, {"hp_1", 0}},
                             gm(1, 3, 10, 20, 70, 100)));
  s.rows.push_back(row_with("s1", {{"geo_2", 20}, {"gb_1", 100}, {"gbh_2", 150}, {"hp_1", 50}},
                             gm(3, 4, 20, 40, 80, 120)));
  s.rows.push_back(row_with("s2", {{"gb_1", 250}, {"gbh_2", 20}, {"hp_1", 80}},
                             gm(2, 5, 10, 20, 60, 100)));
  s.rows.push_back(row_with("s3", {{"gb_1", 280}, {"hp_1", 200}}, gm(0, 0, 0, 0, 10, 20)));
  s.presets["no_geothermal"] = {"cap:geothermal == 0"};
  s.presets["limited_gas"] = {"cap:gas_boilers <= 0.2*peak_demand"};
  return s;
}

}  // namespace

TEST(OverloadEvents, HandCountedExamples) {
  EXPECT_EQ(persistent_overload_events(series({{100, 1}, {115, 7}, {100, 1}})), 1);
  EXPECT_EQ(persistent_overload_events(series({{100, 1}, {115, 6}, {100, 1}})), 0);
  EXPECT_EQ(persistent_overload_events(series({{115, 14}})), 1);
  EXPECT_EQ(persistent_overload_events(series({{115, 14}}), 110, 7, RunCounting::per_window), 2);
  EXPECT_EQ(persistent_overload_events({}), 0);
  // Exactly at the limit is not an overload.
  EXPECT_EQ(persistent_overload_events(series({{110, 10}})), 0);
  // Two qualifying runs separated by one normal snapshot.
  EXPECT_EQ(persistent_overload_events(series({{120, 7}, {90, 1}, {120, 8}})), 2);
  // Run touching the end of the horizon.
  EXPECT_EQ(persistent_overload_events(series({{90, 3}, {111, 7}})), 1);
}

TEST(OverloadEvents, DivergentSnapshotBreaksRun) {
  auto s = series({{115, 4}});
  s.push_back(std::nan(""));
  auto tail = series({{115, 4}});
  s.insert(s.end(), tail.begin(), tail.end());
  EXPECT_EQ(persistent_overload_events(s), 0);
}

TEST(OverloadEvents, MatchesRecountOnRandomSeries) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(80, 140);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> s(168);
    double level = d(rng);
    for (auto& v : s) v = level = 0.8 * level + 0.2 * d(rng);
    EXPECT_EQ(persistent_overload_events(s), hand_count(s, 110, 7));
  }
}

TEST(OverloadEvents, MonotoneInLimitAndWindow) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(60, 160);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> s(168);
    double level = 100;
    for (auto& v : s) v = level = 0.7 * level + 0.3 * d(rng);
    int prev = persistent_overload_events(s, 80, 7, RunCounting::per_window);
    bool any_prev = persistent_overload_events(s, 80, 7) > 0;
    for (double limit = 85; limit <= 160; limit += 5) {
      int now = persistent_overload_events(s, limit, 7, RunCounting::per_window);
      bool any_now = persistent_overload_events(s, limit, 7) > 0;
      EXPECT_LE(now, prev);
      EXPECT_LE(any_now, any_prev);
      prev = now;
      any_prev = any_now;
    }
    for (auto counting : {RunCounting::per_run, RunCounting::per_window}) {
      prev = persistent_overload_events(s, 110, 1, counting);
      for (int w = 2; w <= 24; ++w) {
        int now = persistent_overload_events(s, 110, w, counting);
        EXPECT_LE(now, prev);
        prev = now;
      }
    }
  }
  EXPECT_THROW(persistent_overload_events({1.0}, 110, 0), DomainError);
}

TEST(OverloadEvents, RaisedLimitCanSplitARun) {
  // One 15-snapshot run above 110 with a dip to 115 in the middle.
  auto s = series({{120, 7}, {115, 1}, {120, 7}});
  EXPECT_EQ(persistent_overload_events(s, 110, 7), 1);
  EXPECT_EQ(persistent_overload_events(s, 116, 7), 2);
  EXPECT_EQ(persistent_overload_events(s, 110, 7, RunCounting::per_window), 2);
  EXPECT_EQ(persistent_overload_events(s, 116, 7, RunCounting::per_window), 2);
}

TEST(Percentile, HandArithmetic) {
  EXPECT_DOUBLE_EQ(percentile({10, 20, 30, 40}, 75), 32.5);
  EXPECT_DOUBLE_EQ(percentile({40, 10, 30, 20}, 75), 32.5);
  EXPECT_DOUBLE_EQ(percentile({10, 20, 30, 40}, 0), 10);
  EXPECT_DOUBLE_EQ(percentile({10, 20, 30, 40}, 100), 40);
  EXPECT_DOUBLE_EQ(percentile({5}, 90), 5);
  // 11 values 0..100: the 90th percentile is an order statistic.
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(10.0 * i);
  EXPECT_DOUBLE_EQ(percentile(v, 90), 90.0);
  EXPECT_THROW(percentile({}, 50), DomainError);
  EXPECT_THROW(percentile({1.0}, 101), DomainError);
}

TEST(Percentile, SummaryOfComponents) {
  EXPECT_DOUBLE_EQ(loading_percentile_summary({std::vector<double>(168, 80.0)}), 80.0);
  std::vector<std::vector<double>> comps = {std::vector<double>(10, 10.0),
                                            std::vector<double>(10, 20.0),
                                            std::vector<double>(10, 30.0),
                                            std::vector<double>(10, 40.0)};
  EXPECT_DOUBLE_EQ(loading_percentile_summary(comps), 32.5);
  std::reverse(comps.begin(), comps.end());
  EXPECT_DOUBLE_EQ(loading_percentile_summary(comps), 32.5);

  comps.push_back(std::vector<double>(10, std::nan("")));
  std::vector<std::size_t> excluded;
  EXPECT_DOUBLE_EQ(loading_percentile_summary(comps, &excluded), 32.5);
  EXPECT_EQ(excluded, std::vector<std::size_t>{4});
}

TEST(Percentile, SummaryWithinComponentRange) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0, 200);
  for (int k = 0; k < 30; ++k) {
    std::vector<std::vector<double>> comps(7, std::vector<double>(48));
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (auto& c : comps) {
      for (auto& v : c) v = d(rng);
      const double p = percentile(c, 90);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    const double s = loading_percentile_summary(comps);
    EXPECT_GE(s, lo);
    EXPECT_LE(s, hi);
  }
}

TEST(HeatMetrics, SingleCategory) {
  auto sys = flat_demand_system(4, 10, 1);
  auto m = heat_metrics(sys, design_of({{"gb", TechKind::gas_boiler_greengas, 20},
                                        {"gbh", TechKind::gas_boiler_hydrogen, 5}},
                                       100));
  EXPECT_DOUBLE_EQ(m.gas_share, 100.0);
  EXPECT_DOUBLE_EQ(m.p2h_share, 0.0);
}

TEST(HeatMetrics, CategoriesAddUp) {
  auto sys = flat_demand_system(4, 10, 1);
  auto d = design_of({{"hp", TechKind::heat_pump, 10},
                      {"eb", TechKind::electric_boiler, 20},
                      {"chp", TechKind::chp_hydrogen, 10},
                      {"geo", TechKind::geothermal, 25},
                      {"st", TechKind::solar_thermal, 5},
                      {"wte", TechKind::waste_to_energy, 30},
                      {"tes", TechKind::tes_short_term, 40},
                      {"ates", TechKind::ht_ates, 7},
                      {"pipe", TechKind::pipeline, 60}},
                     1000);
  auto m = heat_metrics(sys, d);
  EXPECT_DOUBLE_EQ(m.p2h_share, 30.0);
  EXPECT_DOUBLE_EQ(m.gas_share, 10.0);
  EXPECT_DOUBLE_EQ(m.nondispatchable_share, 30.0);
  EXPECT_DOUBLE_EQ(m.other_share, 30.0);
  EXPECT_NEAR(m.p2h_share + m.gas_share + m.nondispatchable_share + m.other_share, 100.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.storage_capacity, 47.0);
  EXPECT_DOUBLE_EQ(m.pipeline_capacity, 60.0);
}

TEST(HeatMetrics, LevelizedCost) {
  // 1,000 GWh over one year: 8760 hourly snapshots of 114.155... MW.
  auto sys = flat_demand_system(8760, 1e6 / 8760.0, 1.0);
  auto m = heat_metrics(sys, design_of({{"gb", TechKind::gas_boiler_greengas, 200}}, 70e6));
  EXPECT_NEAR(m.annual_heat, 1e6, 1e-6);
  EXPECT_NEAR(m.lcoh, 70.0, 1e-9);
  EXPECT_NEAR(m.lcoh * m.annual_heat / m.annual_cost, 1.0, 1e-6);
  auto none = flat_demand_system(4, 0, 1);
  EXPECT_THROW(heat_metrics(none, design_of({}, 1)), DomainError);
}

TEST(GridMetrics, CountsSharesAndPercentiles) {
  using grid::BranchKind;
  auto over = series({{100, 2}, {120, 8}, {100, 2}});
  auto calm = std::vector<double>(12, 50.0);
  auto r = flows_of({{BranchKind::line, over}, {BranchKind::line, calm},
                     {BranchKind::transformer, calm}, {BranchKind::transformer, over},
                     {BranchKind::transformer, over}});
  auto g = grid_metrics(r);
  EXPECT_EQ(g.line_overload_events, 1);
  EXPECT_EQ(g.transformer_overload_events, 2);
  EXPECT_DOUBLE_EQ(g.overloaded_lines_share, 50.0);
  EXPECT_NEAR(g.overloaded_transformers_share, 200.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(g.line_loading_p, percentile({percentile(over, 90), 50.0}, 75));
  // Active-power loading uses the other series.
  GridMetricOptions active;
  active.active_power = true;
  auto ga = grid_metrics(r, active);
  EXPECT_EQ(ga.line_overload_events, 1);  // 114 > 110
  EXPECT_LT(ga.line_loading_p, g.line_loading_p);
  // Same input, same bits.
  EXPECT_EQ(to_json(grid_metrics(r)).dump(), to_json(g).dump());
}

TEST(GridMetrics, DivergentSnapshotsExcluded) {
  using grid::BranchKind;
  auto r = flows_of({{BranchKind::line, series({{120, 10}})}});
  r.converged[4] = false;
  r.divergent = 1;
  auto g = grid_metrics(r);
  EXPECT_EQ(g.line_overload_events, 0);
  EXPECT_EQ(g.divergent_snapshots, 1);
  EXPECT_DOUBLE_EQ(g.line_loading_p, 120.0);
  EXPECT_FALSE(g.notes.empty());
}

TEST(Filter, PresetsAndPredicates) {
  auto s = synthetic_space();
  auto p = parse_predicate("cap:gas_boilers <= 0.2*peak_demand", s);
  EXPECT_DOUBLE_EQ(p.threshold, 280.0);
  EXPECT_EQ(p.op, "<=");

  auto no_geo = filter_preset(s, "no_geothermal");
  EXPECT_EQ(no_geo.ids, (std::vector<std::string>{"s2", "s3"}));
  // Gas boiler group totals: s0 300, s1 250, s2 270, s3 280 (boundary kept).
  auto gas = filter_preset(s, "limited_gas");
  EXPECT_EQ(gas.ids, (std::vector<std::string>{"s1", "s2", "s3"}));
  auto gas_only = filter_constraints(s, {"cap:gas_boilers <= 270"});
  EXPECT_EQ(gas_only.ids, (std::vector<std::string>{"s1", "s2"}));
  // Conjunction equals intersection.
  auto both = filter_constraints(s, {"cap:geothermal == 0", "cap:gas_boilers <= 270"});
  EXPECT_EQ(both.ids, std::vector<std::string>{"s2"});
  ASSERT_EQ(both.audit.size(), 2u);
  EXPECT_EQ(both.audit[0].passed, 2u);
  EXPECT_EQ(both.audit[1].passed, 2u);

  EXPECT_EQ(filter_constraints(s, {}).ids.size(), 4u);
  EXPECT_EQ(filter_constraints(s, {"cap:asset:hp_1 >= 80"}).ids,
            (std::vector<std::string>{"s2", "s3"}));
  EXPECT_EQ(filter_constraints(s, {"transformer_overload_events < 4"}).ids,
            (std::vector<std::string>{"s0", "s3"}));
}

TEST(Filter, VacuousAndErrors) {
  auto s = synthetic_space();
  // Every Spore deploys a heat pump except s0.
  s.rows[2].capacities["hp_1"] = 5;
  EXPECT_TRUE(filter_constraints(s, {"cap:heat_pump == 0"}).ids.empty());
  EXPECT_THROW(filter_constraints(s, {"cap:fusion == 0"}), ValidationError);
  EXPECT_THROW(filter_constraints(s, {"happiness >= 3"}), ValidationError);
  EXPECT_THROW(filter_constraints(s, {"cap:geothermal 0"}), ValidationError);
  EXPECT_THROW(filter_constraints(s, {"cap:geothermal <= 2*moon"}), ValidationError);
  EXPECT_THROW(filter_preset(s, "nope"), ValidationError);
}

TEST(Envelope, NonStrictIntersection) {
  auto s = synthetic_space();
  auto env = lower_envelope(s);
  // least_cost is in its own envelope; s1 ties everywhere; s3 dominates;
  // s0 better on five metrics and equal on one; s2 worse on transformer events.
  EXPECT_EQ(env, (std::vector<std::string>{"least_cost", "s0", "s1", "s3"}));
  const auto& ref = s.reference();
  for (const auto& id : env) {
    const auto& r = s.row(id);
    EXPECT_LE(r.grid->transformer_overload_events, ref.grid->transformer_overload_events);
    EXPECT_LE(r.grid->line_loading_p, ref.grid->line_loading_p);
  }
}

TEST(Envelope, WorseOnOneMetricExcluded) {
  auto s = synthetic_space();
  s.rows.push_back(row_with("s4", {}, gm(0, 0, 0, 0, 0, 121)));
  auto env = lower_envelope(s);
  EXPECT_EQ(std::count(env.begin(), env.end(), "s4"), 0);
}

TEST(Envelope, SubsetMonotone) {
  auto s = synthetic_space();
  auto full = lower_envelope(s);
  std::vector<std::string> subset = {"least_cost", "s0", "s2"};
  auto sub = lower_envelope(s, &subset);
  for (const auto& id : sub) {
    EXPECT_NE(std::find(full.begin(), full.end(), id), full.end());
    EXPECT_NE(std::find(subset.begin(), subset.end(), id), subset.end());
  }
  std::vector<std::string> restricted;
  for (const auto& id : full)
    if (std::find(subset.begin(), subset.end(), id) != subset.end()) restricted.push_back(id);
  EXPECT_EQ(sub, restricted);
}

TEST(DecisionSpaceExport, CsvAndJsonRoundTrip) {
  auto s = synthetic_space();
  s.rows[0].heat = HeatMetrics{30, 40, 20, 10, 5, 50, 7e6, 1e5, 70};
  auto csv = to_csv(s);
  EXPECT_EQ(csv, to_csv(s));
  EXPECT_NE(csv.find("cap:geo_1"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  auto j = to_json(s);
  EXPECT_EQ(j["schema_version"], kDecisionSpaceSchema);
  auto back = decision_space_from_json(j);
  EXPECT_EQ(to_csv(back), csv);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  j["schema_version"] = 99;
  EXPECT_THROW(decision_space_from_json(j), ValidationError);
}

namespace {

struct ToyCampaign {
  HeatSystem system;
  grid::ElectricGrid grid;
  spores::SporeSet set;
  LeastCostResult lc;
  grid::FlowResult lc_flows, base_flows;
  std::vector<grid::FlowResult> spore_flows;
};

const ToyCampaign& toy_campaign() {
  static const ToyCampaign c = [] {
    ToyCampaign c;
    c.system = load_heat_system(fixtures() / "toy2");
    c.grid = grid::load_grid(fixtures() / "grid10");
    spores::SporesConfig cfg;
    cfg.runs = {{"electric_boiler", spores::Direction::maximize, 4},
                {"electric_boiler", spores::Direction::minimize, 4},
                {"solar_thermal", spores::Direction::maximize, 4},
                {"gas_boiler_greengas", spores::Direction::minimize, 4}};
    cfg.diversification_batch = 4;
    c.set = spores::generate_all(c.system, cfg);
    c.lc = solve_least_cost(c.system);
    auto flows_for = [&](const DesignResult& d) {
      return grid::run_timeseries(
          c.grid,
          grid::combine_injections(c.grid, d.electric_profiles, c.system.snapshots.timestamps));
    };
    c.lc_flows = flows_for(c.lc.design);
    c.base_flows = grid::run_timeseries(c.grid, grid::combine_injections(c.grid, {}, {}));
    for (const auto& s : c.set.spores) c.spore_flows.push_back(flows_for(s.design));
    return c;
  }();
  return c;
}

}  // namespace

TEST(DecisionSpaceAssembly, RowsBenchmarksAndRecomputation) {
  const auto& c = toy_campaign();
  ASSERT_EQ(c.set.spores.size(), 20u);
  std::vector<SporeOutputs> outs;
  for (std::size_t i = 0; i < c.set.spores.size(); ++i)
    outs.push_back({&c.set.spores[i], &c.spore_flows[i]});
  auto ds = assemble_decision_space(c.system, c.set, c.lc.design, c.lc_flows, c.base_flows, outs);
  EXPECT_EQ(ds.rows.size(), 22u);
  EXPECT_EQ(ds.rows[0].id, "least_cost");
  EXPECT_EQ(ds.rows[1].id, "no_dhn");
  EXPECT_EQ(to_json(*ds.reference().grid).dump(), to_json(grid_metrics(c.lc_flows)).dump());
  for (const auto& r : ds.rows) {
    if (r.kind != RowKind::spore) continue;
    EXPECT_GE(r.heat->p2h_share, 0.0);
    EXPECT_LE(r.heat->p2h_share, 100.0);
    EXPECT_NEAR(r.heat->lcoh * r.heat->annual_heat, *r.cost, 1e-6 * *r.cost);
  }
  // Reference is always inside its own envelope.
  auto env = lower_envelope(ds);
  EXPECT_EQ(env.front(), "least_cost");
}

TEST(DecisionSpaceAssembly, ZeroProfilesEqualBaselineAndMissingFlowsFlagged) {
  const auto& c = toy_campaign();
  std::map<std::string, ElectricProfile> zero;
  for (const auto& [bus, p] : c.lc.design.electric_profiles)
    zero[bus] = {Series(p.load.size(), 0.0), Series(p.load.size(), 0.0), Series(p.load.size(), 0.0)};
  auto zf = grid::run_timeseries(
      c.grid, grid::combine_injections(c.grid, zero, c.system.snapshots.timestamps));
  std::vector<SporeOutputs> outs = {{&c.set.spores[0], &zf}, {&c.set.spores[1], nullptr}};
  auto ds = assemble_decision_space(c.system, c.set, c.lc.design, c.lc_flows, c.base_flows, outs);
  EXPECT_EQ(to_json(*ds.rows[2].grid).dump(), to_json(*ds.row("no_dhn").grid).dump());
  EXPECT_FALSE(ds.rows[3].complete);
  EXPECT_FALSE(ds.rows[3].grid.has_value());
  auto all = filter_constraints(ds, {});
  EXPECT_EQ(all.ids, std::vector<std::string>{c.set.spores[0].id});
}
