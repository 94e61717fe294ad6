#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Highs.h>

#include "dhnplan/error.hpp"
#include "dhnplan/lp.hpp"
#include "oracles.hpp"

using namespace dhnplan::lp;
using dhnplan::oracles::random_feasible_lp;
using dhnplan::oracles::rel_gap;

TEST(Solve, SingleVariable) {
  LinearProgram lp;
  auto x = lp.add_variable("x");
  lp.add_constraint("c", {{x, 1.0}}, Sense::ge, 3.0);
  lp.set_objective({"obj", {{x, 1.0}}, 0.0});
  for (auto* f : {&solve, &solve_reference}) {
    auto s = (*f)(lp, {});
    ASSERT_EQ(s.status, Status::optimal);
    EXPECT_NEAR(s.values[x], 3.0, 1e-9);
    EXPECT_NEAR(s.objective, 3.0, 1e-9);
  }
}

TEST(Solve, TwoVariableVertex) {
  LinearProgram lp;
  auto x = lp.add_variable("x");
  auto y = lp.add_variable("y");
  lp.add_constraint("c", {{x, 1.0}, {y, 2.0}}, Sense::ge, 4.0);
  lp.set_objective({"obj", {{x, 1.0}, {y, 1.0}}, 0.0});
  // Hand oracle: vertices of {x + 2y >= 4, x, y >= 0} are (4,0) and (0,2).
  double best = std::min(4.0 + 0.0, 0.0 + 2.0);
  for (auto* f : {&solve, &solve_reference}) {
    auto s = (*f)(lp, {});
    ASSERT_EQ(s.status, Status::optimal);
    EXPECT_NEAR(s.objective, best, 1e-9);
    EXPECT_NEAR(s.values[x], 0.0, 1e-9);
    EXPECT_NEAR(s.values[y], 2.0, 1e-9);
  }
}

TEST(Solve, ContradictoryBoundsInfeasible) {
  LinearProgram lp;
  auto x = lp.add_variable("x");
  lp.add_constraint("c", {{x, 1.0}}, Sense::le, -1.0);
  lp.set_objective({"obj", {{x, 1.0}}, 0.0});
  EXPECT_EQ(solve(lp).status, Status::infeasible);
  EXPECT_EQ(solve_reference(lp).status, Status::infeasible);
}

TEST(Solve, Unbounded) {
  LinearProgram lp;
  auto x = lp.add_variable("x");
  auto y = lp.add_variable("y");
  lp.add_constraint("c", {{x, 1.0}, {y, -1.0}}, Sense::le, 1.0);
  lp.set_objective({"obj", {{x, -1.0}}, 0.0});
  EXPECT_EQ(solve(lp).status, Status::unbounded);
  EXPECT_EQ(solve_reference(lp).status, Status::unbounded);
}

TEST(Solve, IterationLimitThrows) {
  std::mt19937_64 rng(7);
  LinearProgram lp;
  std::vector<VarId> v;
  for (int j = 0; j < 40; ++j) v.push_back(lp.add_variable("x" + std::to_string(j), 0, 10));
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int i = 0; i < 40; ++i) {
    std::vector<Term> t;
    for (auto j : v) t.push_back({j, u(rng)});
    lp.add_constraint("r" + std::to_string(i), t, Sense::ge, 20.0 + i);
  }
  Objective o{"obj", {}, 0.0};
  for (auto j : v) o.terms.push_back({j, u(rng)});
  lp.set_objective(o);
  SolveOptions opt;
  opt.iteration_limit = 1;
  opt.method = Method::simplex;
  EXPECT_THROW(solve(lp, opt), dhnplan::SolverError);
  EXPECT_THROW(solve_reference(lp, opt), dhnplan::SolverError);
}

TEST(Solve, ObjectiveConstantCarried) {
  LinearProgram lp;
  auto x = lp.add_variable("x", 1.0, 2.0);
  lp.set_objective({"obj", {{x, 2.0}}, 5.0});
  auto s = solve(lp);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, 7.0, 1e-12);
}

TEST(OracleEquivalence, HundredRandomLps) {
  std::mt19937_64 rng(20240601);
  int compared = 0;
  for (int k = 0; k < 100; ++k) {
    auto lp = random_feasible_lp(rng);
    auto a = solve(lp);
    auto b = solve_reference(lp);
    ASSERT_EQ(a.status, Status::optimal) << "lp " << k;
    ASSERT_EQ(b.status, Status::optimal) << "lp " << k;
    EXPECT_LE(rel_gap(a.objective, b.objective), 1e-6) << "lp " << k;
    EXPECT_TRUE(check_feasibility(lp, a.values).ok(1e-6)) << "lp " << k;
    EXPECT_TRUE(check_feasibility(lp, b.values).ok(1e-6)) << "lp " << k;
    ++compared;
  }
  EXPECT_EQ(compared, 100);
}

TEST(OracleEquivalence, StatusesAgreeOnPerturbedPrograms) {
  // Flip a row's rhs far past the feasible point: statuses must agree even
  // when the program becomes infeasible.
  std::mt19937_64 rng(99);
  for (int k = 0; k < 40; ++k) {
    auto base = random_feasible_lp(rng);
    LinearProgram lp;
    for (const auto& v : base.variables()) lp.add_variable(v.name, v.lower, v.upper);
    bool first = true;
    for (const auto& c : base.constraints()) {
      double rhs = c.rhs;
      if (first && c.sense == Sense::le) rhs -= 1e3;
      if (first && c.sense == Sense::ge) rhs += 1e3;
      first = false;
      lp.add_constraint(c.name, c.terms, c.sense, rhs);
    }
    lp.set_objective(base.objective());
    auto a = solve(lp);
    auto b = solve_reference(lp);
    EXPECT_EQ(a.status, b.status) << "lp " << k;
    if (a.status == Status::optimal && b.status == Status::optimal)
      EXPECT_LE(rel_gap(a.objective, b.objective), 1e-6) << "lp " << k;
  }
}

TEST(Feasibility, DetectsRowAndBoundViolations) {
  LinearProgram lp;
  auto x = lp.add_variable("x", 0.0, 1.0);
  auto y = lp.add_variable("y");
  lp.add_constraint("cap", {{x, 2.0}, {y, 4.0}}, Sense::le, 4.0);
  lp.set_objective({"obj", {{x, 1.0}}, 0.0});
  std::vector<double> ok{1.0, 0.5};
  EXPECT_TRUE(check_feasibility(lp, ok).ok(1e-12));
  std::vector<double> bad_row{1.0, 1.0};  // 2 + 4 = 6 > 4, scaled by 4
  auto r = check_feasibility(lp, bad_row);
  EXPECT_NEAR(r.max_row_violation, 0.5, 1e-12);
  EXPECT_EQ(r.worst_row, "cap");
  std::vector<double> bad_bound{1.5, 0.0};
  EXPECT_NEAR(check_feasibility(lp, bad_bound).max_bound_violation, 0.5, 1e-12);
}

TEST(Validate, RejectsBadPrograms) {
  LinearProgram inverted;
  inverted.add_variable("x", 2.0, 1.0);
  EXPECT_THROW(inverted.validate(), dhnplan::ValidationError);
  LinearProgram dangling;
  dangling.add_variable("x");
  dangling.add_constraint("c", {{3, 1.0}}, Sense::le, 1.0);
  EXPECT_THROW(dangling.validate(), dhnplan::ValidationError);
  LinearProgram nan;
  auto x = nan.add_variable("x");
  nan.add_constraint("c", {{x, std::nan("")}}, Sense::le, 1.0);
  EXPECT_THROW(nan.validate(), dhnplan::ValidationError);
}

TEST(Budget, RhsArithmetic) {
  EXPECT_DOUBLE_EQ(budget_from_slack(100.0, 0.10), 110.0);
  EXPECT_DOUBLE_EQ(budget_from_slack(100.0, 0.0), 100.0);
  EXPECT_DOUBLE_EQ(budget_from_slack(100.0, 0.05), 105.0);
  EXPECT_DOUBLE_EQ(budget_from_slack(-100.0, 0.10), -90.0);
}

namespace {

// min 3a + 2b  s.t. a + b >= 10, a <= 8, b <= 8  ->  C* = 2*8 + 3*2 = 22
LinearProgram small_design() {
  LinearProgram lp;
  auto a = lp.add_variable("a", 0, 8);
  auto b = lp.add_variable("b", 0, 8);
  lp.add_constraint("demand", {{a, 1}, {b, 1}}, Sense::ge, 10);
  lp.set_objective({"cost", {{a, 3}, {b, 2}}, 0.0});
  lp.add_to_group("cap", a);
  lp.add_to_group("cap", b);
  return lp;
}

}  // namespace

TEST(Budget, ZeroSlackReturnsLeastCost) {
  auto lp = small_design();
  auto base = solve(lp);
  ASSERT_EQ(base.status, Status::optimal);
  EXPECT_NEAR(base.objective, 22.0, 1e-9);
  auto bounded = add_budget_constraint(lp, lp.objective(), budget_from_slack(base.objective, 0.0),
                                       base.objective);
  EXPECT_EQ(bounded.num_constraints(), lp.num_constraints() + 1);
  EXPECT_EQ(bounded.constraints().back().name, "budget");
  EXPECT_DOUBLE_EQ(bounded.constraints().back().rhs, 22.0);
  ASSERT_TRUE(bounded.cost_objective().has_value());
  auto again = solve(bounded);
  EXPECT_NEAR(again.objective, 22.0, 1e-9);
  EXPECT_TRUE(bounded.warnings().empty());
}

TEST(Budget, BelowLeastCostWarns) {
  auto lp = small_design();
  auto bounded = add_budget_constraint(lp, lp.objective(), 20.0, 22.0);
  ASSERT_EQ(bounded.warnings().size(), 1u);
  EXPECT_EQ(solve(bounded).status, Status::infeasible);
}

TEST(Budget, IdempotentFeasibleSet) {
  auto lp = small_design();
  auto once = add_budget_constraint(lp, lp.objective(), 24.2, 22.0);
  auto twice = add_budget_constraint(once, lp.objective(), 24.2, 22.0);
  // Same feasible set: minimizing and maximizing each variable gives equal extremes.
  for (VarId v = 0; v < lp.num_variables(); ++v) {
    for (double sign : {1.0, -1.0}) {
      auto s1 = solve(replace_objective(once, {"probe", {{v, sign}}, 0.0}));
      auto s2 = solve(replace_objective(twice, {"probe", {{v, sign}}, 0.0}));
      ASSERT_EQ(s1.status, Status::optimal);
      EXPECT_NEAR(s1.objective, s2.objective, 1e-9);
    }
  }
}

TEST(ReplaceObjective, MinimizeSingleCapacityUnderBudget) {
  auto lp = small_design();
  auto bounded = add_budget_constraint(lp, lp.objective(), 24.0, 22.0);
  auto swapped = replace_objective(bounded, {"min_b", {{1, 1.0}}, 0.0});
  EXPECT_EQ(swapped.num_constraints(), bounded.num_constraints());
  ASSERT_EQ(swapped.archived_objectives().size(), 1u);
  EXPECT_EQ(swapped.archived_objectives()[0].name, "cost");
  auto s = solve(swapped);
  ASSERT_EQ(s.status, Status::optimal);
  // Feasible minimum of b: a = 8 forces b >= 2; 3*8 + 2*2 = 28 > 24, so the
  // budget binds: 3a + 2b <= 24, a + b >= 10 -> b >= 6.
  EXPECT_NEAR(s.values[1], 6.0, 1e-9);
}

TEST(ReplaceObjective, EmptyAndDanglingRejected) {
  auto lp = small_design();
  EXPECT_THROW(replace_objective(lp, {"empty", {}, 0.0}), dhnplan::ValidationError);
  EXPECT_THROW(replace_objective(lp, {"bad", {{7, 1.0}}, 0.0}), dhnplan::ValidationError);
}

TEST(ReplaceObjective, SwapBackRestoresOptimum) {
  auto lp = small_design();
  auto first = solve(lp);
  auto swapped = replace_objective(lp, {"max_a", {{0, -1.0}}, 0.0});
  auto back = replace_objective(swapped, swapped.archived_objectives().back());
  auto second = solve(back);
  ASSERT_EQ(second.status, Status::optimal);
  EXPECT_LE(rel_gap(second.objective, first.objective), 1e-6);
  EXPECT_EQ(back.archived_objectives().size(), 2u);
}

TEST(LpFormat, WritesSections) {
  auto lp = small_design();
  std::ostringstream out;
  write_lp_format(lp, out);
  auto s = out.str();
  for (const char* kw : {"\\ cost", "Minimize", "Subject To", "Bounds", "End", "demand:"})
    EXPECT_NE(s.find(kw), std::string::npos) << kw;
}

TEST(LpFormat, ReadBackByHighs) {
  // The exported text is parsed by HiGHS' own LP reader and re-solved; the
  // objective must match the in-memory solve.
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    auto lp = random_feasible_lp(rng);
    auto path = std::filesystem::temp_directory_path() / ("dhnplan_lp_" + std::to_string(k) + ".lp");
    {
      std::ofstream out(path);
      write_lp_format(lp, out);
    }
    Highs h;
    h.setOptionValue("output_flag", false);
    ASSERT_EQ(h.readModel(path.string()), HighsStatus::kOk) << path;
    ASSERT_EQ(h.run(), HighsStatus::kOk);
    ASSERT_EQ(h.getModelStatus(), HighsModelStatus::kOptimal);
    double expected = solve(lp).objective;
    EXPECT_LE(rel_gap(h.getInfo().objective_function_value, expected), 1e-6) << k;
    std::filesystem::remove(path);
  }
}
