#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dhnplan/error.hpp"
#include "dhnplan/spores.hpp"
#include "test_support.hpp"

using namespace dhnplan;
using namespace dhnplan::spores;
using dhnplan::testing::fixtures;

namespace {

HeatSystem truncate(HeatSystem s, std::size_t T) {
  s.snapshots.timestamps.resize(T);
  s.snapshots.weights.resize(T);
  for (auto& n : s.nodes) n.demand.resize(T);
  for (auto& a : s.assets)
    if (!a.availability.empty()) a.availability.resize(T);
  for (Series* p : {&s.prices.electricity, &s.prices.hydrogen, &s.prices.green_gas,
                    &s.prices.waste, &s.prices.residual_heat})
    if (!p->empty()) p->resize(T);
  s.weather.ambient_temperature.resize(T);
  if (!s.weather.solar_thermal_cf.empty()) s.weather.solar_thermal_cf.resize(T);
  return s;
}

const HeatSystem& toy24() {
  static const HeatSystem s = truncate(load_heat_system(fixtures() / "toy2"), 24);
  return s;
}

double coef_of(const lp::Objective& obj, lp::VarId v) {
  double c = 0.0;
  for (const auto& t : obj.terms)
    if (t.var == v) c += t.coef;
  return c;
}

SporesConfig small_plan() {
  SporesConfig c;
  c.runs = {{"electric_boiler", Direction::minimize, 3},
            {"electric_boiler", Direction::maximize, 3},
            {"solar_thermal", Direction::maximize, 3}};
  c.diversification_batch = 3;
  return c;
}

// Direct "optimize the target under the budget" program, assembled here
// from the cost model and solved with the reference simplex.
double direct_target_optimum(const HeatSystem& sys, const std::vector<std::size_t>& target,
                             Direction dir, double budget) {
  auto m = build_model(sys);
  auto prog = m.lp;
  const auto& cost = prog.objective();
  prog.add_constraint("oracle_budget", cost.terms, lp::Sense::le, budget - cost.constant);
  lp::Objective obj{"oracle", {}, 0.0};
  const double sign = dir == Direction::minimize ? 1.0 : -1.0;
  for (auto i : target)
    obj.terms.push_back({m.layout.at(i).capacity, sign / sys.assets[i].capacity_bound()});
  prog.set_objective(obj);
  auto sol = lp::solve_reference(prog);
  EXPECT_EQ(sol.status, lp::Status::optimal);
  return sign * sol.objective;
}

}  // namespace

TEST(SporesObjective, PureIntensification) {
  const auto& s = toy24();
  auto m = build_model(s);
  auto target = resolve_target(s, "electric_boiler");
  auto obj = build_spores_objective(s, m.layout, nullptr, target, 0.0, 1.0, Direction::minimize);
  ASSERT_EQ(obj.terms.size(), 1u);
  const auto& eb = s.assets[target[0]];
  EXPECT_DOUBLE_EQ(coef_of(obj, m.layout.at(target[0]).capacity), 1.0 / eb.capacity_bound());
}

TEST(SporesObjective, PureDiversificationHasNoTargetTerm) {
  const auto& s = toy24();
  auto m = build_model(s);
  std::map<std::string, double> ref;
  for (const auto& a : s.assets) ref[a.id] = 0.5;
  auto w = seed_weights(ref);
  w.omega["gb_A"] = 3.0;
  auto obj = build_spores_objective(s, m.layout, &w, {}, 1.0, 0.0, Direction::minimize);
  ASSERT_EQ(obj.terms.size(), s.assets.size());
  for (std::size_t i = 0; i < s.assets.size(); ++i) {
    const double omega = s.assets[i].id == "gb_A" ? 3.0 : 1.0;
    EXPECT_DOUBLE_EQ(coef_of(obj, m.layout.at(i).capacity), omega / s.assets[i].capacity_bound());
  }
}

TEST(SporesObjective, DirectionFlipsOnlyTheTargetTerm) {
  const auto& s = toy24();
  auto m = build_model(s);
  std::map<std::string, double> ref;
  for (const auto& a : s.assets) ref[a.id] = 0.3;
  auto w = seed_weights(ref);
  auto target = resolve_target(s, "electric_boiler");
  auto lo = build_spores_objective(s, m.layout, &w, target, 1.0, 10.0, Direction::minimize);
  auto hi = build_spores_objective(s, m.layout, &w, target, 1.0, 10.0, Direction::maximize);
  for (std::size_t i = 0; i < s.assets.size(); ++i) {
    const auto v = m.layout.at(i).capacity;
    const double div = 1.0 / s.assets[i].capacity_bound();
    if (i == target[0]) {
      EXPECT_NEAR(coef_of(lo, v), div + 10.0 * div, 1e-15);
      EXPECT_NEAR(coef_of(hi, v), div - 10.0 * div, 1e-15);
    } else {
      EXPECT_DOUBLE_EQ(coef_of(lo, v), coef_of(hi, v));
    }
  }
}

TEST(SporesObjective, EmptyTargetThrows) {
  auto s = toy24();
  EXPECT_THROW(resolve_target(s, "geothermal"), ConfigurationError);
  EXPECT_THROW(resolve_target(s, "no_such_thing"), ConfigurationError);
  for (auto& a : s.assets)
    if (a.id == "eb_A") a.potential_capacity = 0.0;
  EXPECT_THROW(resolve_target(s, "electrification"), ConfigurationError);
  EXPECT_EQ(resolve_target(s, "asset:gb_A").size(), 1u);
}

TEST(Weights, MeanOfTwoPriorSolutions) {
  auto w = seed_weights({{"x", 10.0}});
  w = update_weights_evolving_average(w, {{"x", 20.0}});
  EXPECT_DOUBLE_EQ(w.mean("x"), 15.0);
  w = update_weights_evolving_average(w, {{"x", 30.0}});
  EXPECT_DOUBLE_EQ(w.omega_raw.at("x"), 1.0);
  EXPECT_DOUBLE_EQ(w.omega.at("x"), 1.0);
  EXPECT_DOUBLE_EQ(w.mean("x"), 20.0);
}

TEST(Weights, AtTheMeanClampsHigh) {
  auto w = seed_weights({{"x", 10.0}});
  w = update_weights_evolving_average(w, {{"x", 20.0}});
  w = update_weights_evolving_average(w, {{"x", 15.0}});
  EXPECT_TRUE(std::isinf(w.omega_raw.at("x")));
  EXPECT_DOUBLE_EQ(w.omega.at("x"), 1e3);
}

TEST(Weights, AllZeroHistoryIsNeutral) {
  auto w = seed_weights({{"x", 0.0}});
  w = update_weights_evolving_average(w, {{"x", 0.0}});
  EXPECT_DOUBLE_EQ(w.omega.at("x"), 1.0);
  // Something appears where the history was empty: weight bottoms out.
  w = update_weights_evolving_average(w, {{"x", 0.4}});
  EXPECT_DOUBLE_EQ(w.omega_raw.at("x"), 0.0);
  EXPECT_DOUBLE_EQ(w.omega.at("x"), 1e-3);
}

TEST(Weights, FarFromMeanClampsLow) {
  auto w = seed_weights({{"x", 1e-6}});
  w = update_weights_evolving_average(w, {{"x", 1.0}});
  EXPECT_NEAR(w.omega_raw.at("x"), 1.0 / (1.0 / 1e-6 - 1.0), 1e-18);
  EXPECT_DOUBLE_EQ(w.omega.at("x"), 1e-3);
}

TEST(Weights, JsonRoundTripKeepsInfinity) {
  auto w = seed_weights({{"x", 1.0}, {"y", 2.0}});
  w = update_weights_evolving_average(w, {{"x", 1.0}, {"y", 3.0}});
  auto back = weights_from_json(to_json(w));
  EXPECT_TRUE(std::isinf(back.omega_raw.at("x")));
  EXPECT_EQ(back.sum, w.sum);
  EXPECT_EQ(back.count, w.count);
  EXPECT_EQ(weight_hash(back), weight_hash(w));
}

TEST(Plan, DeskScaleTotal) {
  auto c = load_plan(fixtures() / "scenarios" / "plan_desk.yaml");
  EXPECT_EQ(c.runs.size(), 4u);
  EXPECT_EQ(c.total_spores(), 20);
  EXPECT_DOUBLE_EQ(c.a, 1.0);
  EXPECT_DOUBLE_EQ(c.b, 10.0);
}

TEST(Plan, PaperScaleArithmetic) {
  SporesConfig c;
  c.runs.assign(31, RunSpec{"heat_pump", Direction::maximize, 15});
  c.diversification_batch = 50;
  EXPECT_EQ(c.total_spores(), 515);
}

TEST(Plan, Validation) {
  SporesConfig c;
  c.slack = -0.1;
  EXPECT_THROW(c.validate(), ConfigurationError);
  c = {};
  c.diversification_batch = 0;
  EXPECT_THROW(c.validate(), ConfigurationError);
  c = {};
  c.runs = {{"heat_pump", Direction::minimize, 0}};
  EXPECT_THROW(c.validate(), ConfigurationError);
  c = {};
  c.weight_strategy = "random";
  EXPECT_THROW(c.validate(), ConfigurationError);
}

TEST(Plan, DefaultRunsCoverPresentKindsAndGroups) {
  auto runs = default_runs(toy24(), 2);
  std::set<std::string> targets;
  for (const auto& r : runs) targets.insert(r.target);
  EXPECT_TRUE(targets.count("gas_boiler_greengas"));
  EXPECT_TRUE(targets.count("electrification"));
  EXPECT_TRUE(targets.count("molecule"));
  EXPECT_FALSE(targets.count("geothermal"));
  EXPECT_EQ(runs.size() % 2, 0u);
}

TEST(Generate, BatchSizesAndProvenance) {
  auto set = generate_all(toy24(), small_plan());
  ASSERT_TRUE(set.failures.empty()) << set.failures[0].message;
  ASSERT_EQ(set.spores.size(), 12u);
  EXPECT_EQ(set.spores[0].id, "r00-electric_boiler-min-0");
  EXPECT_EQ(set.spores.back().id, "div-2");
  for (const auto& s : set.spores) {
    const auto& p = s.provenance;
    if (p.direction == "diversify") {
      EXPECT_DOUBLE_EQ(p.a, 1.0);
      EXPECT_DOUBLE_EQ(p.b, 0.0);
    } else if (p.iteration == 0) {
      EXPECT_DOUBLE_EQ(p.a, 0.0);
      EXPECT_DOUBLE_EQ(std::abs(p.b), 1.0);
    } else {
      EXPECT_DOUBLE_EQ(p.a, 1.0);
      EXPECT_DOUBLE_EQ(p.b, p.direction == "minimize" ? 10.0 : -10.0);
    }
    EXPECT_EQ(p.weight_hash.size(), 64u);
  }
}

TEST(Generate, BudgetHoldsAcrossSlacks) {
  for (double eps : {0.05, 0.10, 0.15}) {
    auto c = small_plan();
    c.slack = eps;
    auto set = generate_all(toy24(), c);
    ASSERT_TRUE(set.failures.empty());
    for (const auto& s : set.spores) {
      EXPECT_LE(s.cost, (1 + eps) * set.least_cost * (1 + 1e-6)) << s.id;
      EXPECT_GE(s.cost, set.least_cost * (1 - 1e-6)) << s.id;
    }
  }
}

TEST(Generate, ZeroSlackPinsCost) {
  auto c = small_plan();
  c.slack = 0.0;
  auto set = generate_all(toy24(), c);
  ASSERT_TRUE(set.failures.empty());
  for (const auto& s : set.spores) EXPECT_NEAR(s.cost / set.least_cost, 1.0, 1e-6) << s.id;
}

TEST(Generate, FirstSporeMatchesDirectSolve) {
  const auto& sys = toy24();
  auto c = small_plan();
  auto set = generate_all(sys, c);
  for (std::size_t r = 0; r < c.runs.size(); ++r) {
    const auto& first = set.spores[r * 3];
    ASSERT_EQ(first.provenance.iteration, 0);
    auto target = resolve_target(sys, c.runs[r].target);
    double direct = direct_target_optimum(sys, target, c.runs[r].direction, set.budget);
    EXPECT_NEAR(first.target_capacity, direct, 1e-6) << first.id;
  }
}

TEST(Generate, MinRunStartsAtItsMinimum) {
  auto set = generate_all(toy24(), small_plan());
  std::vector<const Spore*> run;
  for (const auto& s : set.spores)
    if (s.provenance.run_index == 0) run.push_back(&s);
  ASSERT_EQ(run.size(), 3u);
  for (const auto* s : run) EXPECT_LE(run[0]->target_capacity, s->target_capacity + 1e-9);
}

TEST(Generate, JobsDoNotChangeTheResult) {
  auto c = small_plan();
  GenerateOptions one, two;
  two.jobs = 2;
  auto a = generate_all(toy24(), c, one);
  auto b = generate_all(toy24(), c, two);
  ASSERT_EQ(a.spores.size(), b.spores.size());
  for (std::size_t i = 0; i < a.spores.size(); ++i)
    EXPECT_EQ(to_json(a.spores[i]).dump(), to_json(b.spores[i]).dump()) << a.spores[i].id;
}

TEST(Generate, StoredWeightsReplayFromHistory) {
  auto set = generate_all(toy24(), small_plan());
  std::map<std::size_t, std::vector<const Spore*>> runs;
  for (const auto& s : set.spores) runs[s.provenance.run_index].push_back(&s);
  auto lc_norm = normalized_capacities(toy24(), solve_least_cost(toy24()).design);
  for (const auto& [r, batch] : runs) {
    const bool div = batch[0]->provenance.direction == "diversify";
    std::optional<WeightState> w;
    if (div) w = seed_weights(lc_norm);
    for (const auto* s : batch) {
      if (w) {
        // Bitwise: same operations in the same order.
        EXPECT_EQ(s->weights.omega_raw, w->omega_raw) << s->id;
        EXPECT_EQ(s->weights.omega, w->omega) << s->id;
        EXPECT_EQ(s->weights.sum, w->sum) << s->id;
        EXPECT_EQ(s->provenance.weight_hash, weight_hash(*w));
      }
      w = w ? update_weights_evolving_average(*w, s->normalized) : seed_weights(s->normalized);
    }
  }
}

TEST(Generate, ScalingPotentialsAndDemandKeepsNormalizedResults) {
  auto scaled = toy24();
  for (auto& n : scaled.nodes)
    for (auto& d : n.demand) d *= 2.0;
  for (auto& a : scaled.assets) {
    a.potential_capacity *= 2.0;
    a.max_capacity *= 2.0;
  }
  auto c = small_plan();
  auto a = generate_all(toy24(), c);
  auto b = generate_all(scaled, c);
  ASSERT_EQ(a.spores.size(), b.spores.size());
  EXPECT_TRUE(a.failures.empty());
  EXPECT_TRUE(b.failures.empty());
  EXPECT_NEAR(b.least_cost / a.least_cost, 2.0, 1e-6);
  for (std::size_t i = 0; i < a.spores.size(); ++i)
    EXPECT_NEAR(a.spores[i].spores_objective, b.spores[i].spores_objective,
                1e-6 * std::max(1.0, std::abs(a.spores[i].spores_objective)))
        << a.spores[i].id;
}

TEST(Generate, SporeJsonRoundTrip) {
  auto set = generate_all(toy24(), small_plan());
  for (const auto& s : set.spores) {
    auto back = spore_from_json(to_json(s));
    EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  }
}

TEST(Diversity, FlagsCollapsedBatch) {
  Spore s;
  s.provenance.run_id = "r00-x-min";
  s.normalized = {{"a", 0.5}, {"b", 0.2}};
  std::vector<Spore> batch(3, s);
  batch[2].normalized["a"] = 0.505;
  EXPECT_EQ(diversity_flags(batch).size(), 1u);
  batch[2].normalized["a"] = 0.52;
  EXPECT_TRUE(diversity_flags(batch).empty());
  batch.resize(2);
  batch[1] = s;
  EXPECT_TRUE(diversity_flags(batch).empty());
}
