#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dhnplan/error.hpp"
#include "dhnplan/grid.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dhnplan;
using namespace dhnplan::grid;
using dhnplan::testing::fixtures;
using namespace dhnplan::oracles;

namespace {

const ElectricGrid& grid10() {
  static const ElectricGrid g = load_grid(fixtures() / "grid10");
  return g;
}

ElectricGrid without_shunts(ElectricGrid g) {
  for (auto& l : g.lines) l.b_us = 0.0;
  return g;
}

}  // namespace

TEST(Admittance, TwoBusHandBuilt) {
  auto y = build_admittance(2, {pu_branch(0, 1, 0.0, 0.1)});
  Eigen::MatrixXcd d(y);
  EXPECT_NEAR(d(0, 0).real(), 0.0, 1e-12);
  EXPECT_NEAR(d(0, 0).imag(), -10.0, 1e-12);
  EXPECT_NEAR(d(0, 1).imag(), 10.0, 1e-12);
  EXPECT_NEAR(d(1, 0).imag(), 10.0, 1e-12);
  EXPECT_NEAR(d(1, 1).imag(), -10.0, 1e-12);
}

TEST(Admittance, ShuntSplitsOverBothEnds) {
  auto y = build_admittance(2, {pu_branch(0, 1, 0.0, 0.1, 0.02)});
  Eigen::MatrixXcd d(y);
  EXPECT_NEAR(d(0, 0).imag(), -10.0 + 0.01, 1e-12);
  EXPECT_NEAR(d(1, 1).imag(), -10.0 + 0.01, 1e-12);
  EXPECT_NEAR(d(0, 1).imag(), 10.0, 1e-12);
}

TEST(Admittance, ParallelLinesDoubleOffDiagonal) {
  auto one = Eigen::MatrixXcd(build_admittance(2, {pu_branch(0, 1, 0.01, 0.1)}));
  auto two = Eigen::MatrixXcd(
      build_admittance(2, {pu_branch(0, 1, 0.01, 0.1), pu_branch(0, 1, 0.01, 0.1)}));
  EXPECT_NEAR(std::abs(two(0, 1)), 2.0 * std::abs(one(0, 1)), 1e-12);
  EXPECT_NEAR(std::abs(two(0, 0) - 2.0 * one(0, 0)), 0.0, 1e-12);
}

TEST(Admittance, SymmetricPatternOnFixture) {
  auto y = Eigen::MatrixXcd(build_admittance(grid10()));
  ASSERT_EQ(y.rows(), 10);
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 10; ++k) EXPECT_EQ(y(i, k), y(k, i));
}

TEST(Admittance, PhysicalUnitConversion) {
  const auto& g = grid10();
  auto brs = branches(g);
  // L1 at 50 kV: Z_base = 2500/100 = 25 ohm.
  const auto& l1 = brs[0];
  EXPECT_EQ(l1.id, "L1");
  EXPECT_NEAR((1.0 / l1.y_series).real(), 0.6 / 25.0, 1e-15);
  EXPECT_NEAR((1.0 / l1.y_series).imag(), 2.4 / 25.0, 1e-15);
  EXPECT_NEAR(l1.b_shunt, 25e-6 * 25.0, 1e-18);
  // T3: 6 % on 60 MVA, 0.5 % resistive.
  const auto& t3 = brs[7];
  EXPECT_EQ(t3.id, "T3");
  const Complex z = 1.0 / t3.y_series;
  EXPECT_NEAR(std::abs(z), 0.06 * 100.0 / 60.0, 1e-12);
  EXPECT_NEAR(z.real(), 0.005 * 100.0 / 60.0, 1e-12);
}

TEST(Admittance, RejectsBadTopology) {
  auto g = grid10();
  g.buses.push_back({"B10", 10.0, BusType::pq});
  EXPECT_THROW(build_admittance(g), ValidationError);

  g = grid10();
  g.lines[0].r_ohm = 0.0;
  g.lines[0].x_ohm = 0.0;
  EXPECT_THROW(build_admittance(g), ValidationError);

  g = grid10();
  g.buses[1].type = BusType::reference;
  EXPECT_THROW(g.validate(), ValidationError);

  g = grid10();
  g.lines[0].to = "B7";  // 50 kV to 20 kV
  EXPECT_THROW(g.validate(), ValidationError);
}

TEST(GridFixture, Loads) {
  const auto& g = grid10();
  EXPECT_EQ(g.buses.size(), 10u);
  EXPECT_EQ(g.lines.size(), 5u);
  EXPECT_EQ(g.transformers.size(), 5u);
  EXPECT_EQ(g.buses[g.reference_bus()].id, "B0");
  EXPECT_EQ(g.baseline.size(), 7u);
  EXPECT_EQ(g.timestamps.size(), 168u);
  EXPECT_EQ(g.baseline.at("B7").p_load.size(), 168u);
}

TEST(PowerFlow, TwoBusMatchesClosedFormAndFixedPoint) {
  auto y = build_admittance(2, {pu_branch(0, 1, 0.0, 0.1)});
  auto sol = solve_snapshot(y, make_injection({0, -0.5}, {0, -0.1}), 0);
  ASSERT_TRUE(sol.converged);
  auto [v2, delta] = two_bus_closed_form(1.0, 0.1, 0.5, 0.1);
  EXPECT_NEAR(sol.vm[1], v2, 1e-6);
  EXPECT_NEAR(sol.va[1], delta, 1e-6);
  auto fp = two_bus_fixed_point(1.0, Complex(0.0, 0.1), Complex(0.5, 0.1));
  EXPECT_NEAR(sol.vm[1], std::abs(fp), 1e-6);
  EXPECT_NEAR(sol.va[1], std::arg(fp), 1e-6);
}

TEST(PowerFlow, LossyTwoBusMatchesFixedPoint) {
  auto y = build_admittance(2, {pu_branch(0, 1, 0.05, 0.1)});
  auto sol = solve_snapshot(y, make_injection({0, -0.4}, {0, -0.15}), 0);
  ASSERT_TRUE(sol.converged);
  auto fp = two_bus_fixed_point(1.0, Complex(0.05, 0.1), Complex(0.4, 0.15));
  EXPECT_NEAR(sol.vm[1], std::abs(fp), 1e-9);
  EXPECT_NEAR(sol.va[1], std::arg(fp), 1e-9);
}

TEST(PowerFlow, FlatNoLoadIsExact) {
  auto g = without_shunts(grid10());
  auto y = build_admittance(g);
  Injection zero{Eigen::VectorXd::Zero(10), Eigen::VectorXd::Zero(10)};
  auto sol = solve_snapshot(y, zero, g.reference_bus());
  ASSERT_TRUE(sol.converged);
  EXPECT_EQ(sol.iterations, 0);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(sol.vm[i], 1.0);
    EXPECT_EQ(sol.va[i], 0.0);
  }
  for (const auto& f : branch_flows(branches(g), g.s_base_mva, sol.vm, sol.va)) {
    EXPECT_EQ(f.p_from_mw, 0.0);
    EXPECT_EQ(f.q_to_mvar, 0.0);
    EXPECT_EQ(f.loading_percent, 0.0);
  }
}

TEST(PowerFlow, JacobianMatchesFiniteDifferences) {
  const auto& g = grid10();
  auto y = build_admittance(g);
  const auto ref = g.reference_bus();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> vm_d(0.9, 1.1), va_d(-0.2, 0.2);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd vm(10), va(10);
    for (int i = 0; i < 10; ++i) vm[i] = vm_d(rng), va[i] = va_d(rng);
    Eigen::MatrixXd jac(jacobian(y, vm, va, ref));
    EXPECT_LT(jacobian_fd_error(y, vm, va, ref, jac), 1e-6) << "trial " << trial;
  }
}

TEST(PowerFlow, ReEvaluatedMismatchOnEverySnapshot) {
  const auto& g = grid10();
  auto y = build_admittance(g);
  auto set = combine_injections(g, {}, {});
  for (std::size_t t = 0; t < set.size(); ++t) {
    auto spec = snapshot_injection(g, set, t, 0.95);
    auto sol = solve_snapshot(y, spec, g.reference_bus());
    ASSERT_TRUE(sol.converged) << t;
    EXPECT_LT(max_mismatch(y, sol.vm, sol.va, spec, g.reference_bus()), 1e-8) << t;
    auto s = polar_injections(y, sol.vm, sol.va);
    for (int i = 0; i < 10; ++i) {
      if (i == static_cast<int>(g.reference_bus())) continue;
      EXPECT_LT(std::abs(s.p[i] - spec.p[i]), 1e-8) << t;
      EXPECT_LT(std::abs(s.q[i] - spec.q[i]), 1e-8) << t;
    }
  }
}

TEST(PowerFlow, SlackCoversLoadAndLosses) {
  const auto& g = grid10();
  auto y = build_admittance(g);
  auto set = combine_injections(g, {}, {});
  auto brs = branches(g);
  for (std::size_t t : {0u, 12u, 60u, 100u}) {
    auto spec = snapshot_injection(g, set, t, 0.95);
    auto sol = solve_snapshot(y, spec, g.reference_bus());
    ASSERT_TRUE(sol.converged);
    auto s = bus_injections(y, sol.vm, sol.va);
    double losses = 0.0;
    for (const auto& f : branch_flows(brs, g.s_base_mva, sol.vm, sol.va)) {
      EXPECT_GE(f.p_from_mw + f.p_to_mw, -1e-12);
      losses += f.p_from_mw + f.p_to_mw;
    }
    double net_load = 0.0;
    for (int i = 0; i < 10; ++i)
      if (i != static_cast<int>(g.reference_bus())) net_load -= spec.p[i] * g.s_base_mva;
    EXPECT_NEAR(s.p[g.reference_bus()] * g.s_base_mva, net_load + losses, 1e-6);
  }
}

TEST(PowerFlow, SymmetricThreeBus) {
  // Reference in the middle, identical branches and loads on both sides.
  auto y = build_admittance(3, {pu_branch(0, 1, 0.02, 0.08, 0.01), pu_branch(0, 2, 0.02, 0.08, 0.01),
                                pu_branch(1, 2, 0.04, 0.16)});
  auto sol = solve_snapshot(y, make_injection({0, -0.6, -0.6}, {0, -0.2, -0.2}), 0);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.vm[1], sol.vm[2], 1e-12);
  EXPECT_NEAR(sol.va[1], sol.va[2], 1e-12);
  // Load on one side, generation of the same size on the other: mirrored angles.
  auto y2 = build_admittance(3, {pu_branch(0, 1, 0.0, 0.1), pu_branch(0, 2, 0.0, 0.1)});
  auto m = solve_snapshot(y2, make_injection({0, -0.3, 0.3}, {0, 0, 0}), 0);
  ASSERT_TRUE(m.converged);
  EXPECT_NEAR(m.va[1], -m.va[2], 1e-12);
}

TEST(PowerFlow, BaseDoublingKeepsMegawattFlows) {
  auto g1 = grid10();
  auto g2 = grid10();
  g2.s_base_mva = 200.0;
  auto set = combine_injections(g1, {}, {});
  // Solved well past the default stop so the comparison sees units, not the
  // stopping point.
  TimeseriesOptions opt;
  opt.powerflow.tolerance = 1e-12;
  auto a = run_timeseries(g1, set, opt);
  auto b = run_timeseries(g2, set, opt);
  auto spec1 = snapshot_injection(g1, set, 12, 0.95);
  auto spec2 = snapshot_injection(g2, set, 12, 0.95);
  EXPECT_NEAR(spec2.p[7], spec1.p[7] / 2.0, 1e-15);
  for (std::size_t t = 0; t < set.size(); ++t)
    for (std::size_t k = 0; k < a.branch_ids.size(); ++k) {
      EXPECT_NEAR(a.flows[t][k].p_from_mw, b.flows[t][k].p_from_mw, 1e-6);
      EXPECT_NEAR(a.flows[t][k].loading_percent, b.flows[t][k].loading_percent, 1e-6);
    }
}

TEST(PowerFlow, DivergenceIsFlaggedNotThrown) {
  auto y = build_admittance(2, {pu_branch(0, 1, 0.0, 0.1)});
  auto sol = solve_snapshot(y, make_injection({0, -50.0}, {0, -10.0}), 0);
  EXPECT_FALSE(sol.converged);
  EXPECT_LE(sol.iterations, 30);
}

TEST(Loading, PowerFactorArithmetic) {
  const double q = 10.0 * reactive_ratio(0.95);
  EXPECT_NEAR(q, 3.2868, 5e-5);
  EXPECT_NEAR(std::hypot(10.0, q), 10.526, 5e-4);
  EXPECT_NEAR(std::hypot(10.0, q), 10.0 / 0.95, 1e-12);
  EXPECT_DOUBLE_EQ(reactive_ratio(1.0), 0.0);
  EXPECT_THROW(reactive_ratio(0.0), DomainError);
  EXPECT_THROW(reactive_ratio(1.2), DomainError);
}

TEST(Loading, RatioOfApparentFlowToRating) {
  auto br = pu_branch(0, 1, 0.01, 0.1, 0.0, 50.0);
  auto y = build_admittance(2, {br});
  auto sol = solve_snapshot(y, make_injection({0, -0.5}, {0, -0.1}), 0);
  ASSERT_TRUE(sol.converged);
  auto f = branch_flows({br}, 100.0, sol.vm, sol.va)[0];
  const double s_from = std::hypot(f.p_from_mw, f.q_from_mvar);
  const double s_to = std::hypot(f.p_to_mw, f.q_to_mvar);
  EXPECT_NEAR(f.loading_percent, 100.0 * std::max(s_from, s_to) / 50.0, 1e-12);
  EXPECT_NEAR(f.loading_active_percent,
              100.0 * std::max(std::abs(f.p_from_mw), std::abs(f.p_to_mw)) / 50.0, 1e-12);
  // Receiving end carries 50 MW / 10 MVAr.
  EXPECT_NEAR(f.p_to_mw, -50.0, 1e-6);
  EXPECT_NEAR(f.q_to_mvar, -10.0, 1e-6);
  EXPECT_GT(f.loading_percent, 100.0 * std::hypot(50.0, 10.0) / 50.0);
}

TEST(Timeseries, ZeroDhnProfilesMatchBaselineRun) {
  const auto& g = grid10();
  std::map<std::string, ElectricProfile> zero;
  zero["B7"] = {Series(168, 0.0), Series(168, 0.0), Series(168, 0.0)};
  zero["B4"] = zero["B7"];
  auto base = run_timeseries(g, combine_injections(g, {}, {}));
  auto with = run_timeseries(g, combine_injections(g, zero, g.timestamps));
  EXPECT_EQ(to_json(base).dump(), to_json(with).dump());
  EXPECT_EQ(base.divergent, 0);
  EXPECT_FALSE(base.degraded);
}

TEST(Timeseries, AddedLoadNeverLowersItsFeeder) {
  // Without local generation the extra load cannot reverse a flow.
  auto g = grid10();
  for (auto& [bus, p] : g.baseline) std::fill(p.p_gen.begin(), p.p_gen.end(), 0.0);
  std::map<std::string, ElectricProfile> extra;
  extra["B7"] = {Series(168, 10.0), Series(168, 0.0), Series(168, 10.0)};
  auto base = run_timeseries(g, combine_injections(g, {}, {}));
  auto more = run_timeseries(g, combine_injections(g, extra, g.timestamps));
  for (std::string id : {"T3", "L1", "T1"}) {
    std::size_t k = std::find(base.branch_ids.begin(), base.branch_ids.end(), id) -
                    base.branch_ids.begin();
    auto a = base.loading_series(k);
    auto b = more.loading_series(k);
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_GE(b[t], a[t]) << id << " t=" << t;
  }
}

TEST(Timeseries, PermutedSnapshotsPermuteResults) {
  const auto& g = grid10();
  auto set = combine_injections(g, {}, {});
  auto rev = set;
  std::reverse(rev.timestamps.begin(), rev.timestamps.end());
  for (auto& [bus, p] : rev.buses) {
    std::reverse(p.p_load.begin(), p.p_load.end());
    std::reverse(p.p_gen.begin(), p.p_gen.end());
  }
  auto a = run_timeseries(g, set);
  auto b = run_timeseries(g, rev);
  const auto T = set.size();
  for (std::size_t t = 0; t < T; ++t) {
    EXPECT_EQ(a.vm[t], b.vm[T - 1 - t]);
    EXPECT_EQ(a.flows[t][3].loading_percent, b.flows[T - 1 - t][3].loading_percent);
  }
}

TEST(Timeseries, JobsDoNotChangeTheResult) {
  const auto& g = grid10();
  auto set = combine_injections(g, {}, {});
  TimeseriesOptions par;
  par.jobs = 3;
  EXPECT_EQ(to_json(run_timeseries(g, set)).dump(), to_json(run_timeseries(g, set, par)).dump());
}

TEST(Timeseries, DivergentSnapshotsAreCountedAndNull) {
  const auto& g = grid10();
  std::map<std::string, ElectricProfile> huge;
  Series load(168, 0.0);
  load[5] = 5000.0;
  huge["B9"] = {load, Series(168, 0.0), load};
  auto r = run_timeseries(g, combine_injections(g, huge, g.timestamps));
  EXPECT_EQ(r.divergent, 1);
  EXPECT_FALSE(r.converged[5]);
  EXPECT_TRUE(std::isnan(r.loading_series(0)[5]));
  EXPECT_FALSE(std::isnan(r.loading_series(0)[6]));
  EXPECT_FALSE(r.degraded);
  auto j = to_json(r);
  EXPECT_TRUE(j["branches"][0]["loading_percent"][5].is_null());
  TimeseriesOptions strict;
  strict.degraded_fraction = 0.0;
  EXPECT_TRUE(run_timeseries(g, combine_injections(g, huge, g.timestamps), strict).degraded);
}

TEST(Timeseries, JsonRoundTrip) {
  const auto& g = grid10();
  auto r = run_timeseries(g, combine_injections(g, {}, {}));
  auto back = flow_result_from_json(to_json(r));
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  EXPECT_EQ(back.branch_kinds[6], BranchKind::transformer);
}

TEST(Injections, HorizonAndBusChecks) {
  const auto& g = grid10();
  std::map<std::string, ElectricProfile> short_profile;
  short_profile["B7"] = {Series(10, 1.0), Series(10, 0.0), Series(10, 1.0)};
  EXPECT_THROW(combine_injections(g, short_profile, g.timestamps), ValidationError);
  std::map<std::string, ElectricProfile> unknown;
  unknown["B99"] = {Series(168, 1.0), Series(168, 0.0), Series(168, 1.0)};
  EXPECT_THROW(combine_injections(g, unknown, g.timestamps), ValidationError);
  auto shifted = g.timestamps;
  shifted[3] = "2015-01-01T00:00";
  try {
    combine_injections(g, {}, shifted);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("snapshot 3"), std::string::npos) << e.what();
  }
}

TEST(Injections, NetInjectionUsesFixedPowerFactor) {
  const auto& g = grid10();
  auto set = combine_injections(g, {}, {});
  auto inj = snapshot_injection(g, set, 12, 0.95);
  const auto b7 = g.bus_index("B7");
  const auto& p = g.baseline.at("B7");
  EXPECT_NEAR(inj.p[b7], (p.p_gen[12] - p.p_load[12]) / 100.0, 1e-15);
  EXPECT_NEAR(inj.q[b7], inj.p[b7] * std::tan(std::acos(0.95)), 1e-15);
  EXPECT_EQ(inj.p[g.bus_index("B1")], 0.0);
}
