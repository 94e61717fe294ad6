#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dhnplan::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using VarId = std::size_t;

enum class Sense { le, eq, ge };

struct Term {
  VarId var;
  double coef;

  bool operator==(const Term&) const = default;
};

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::le;
  double rhs = 0.0;
};

// Always minimized.
struct Objective {
  std::string name;
  std::vector<Term> terms;
  double constant = 0.0;

  double evaluate(std::span<const double> values) const;
};

class LinearProgram {
 public:
  VarId add_variable(std::string name, double lower = 0.0, double upper = kInf);
  std::size_t add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);
  void set_objective(Objective objective) { objective_ = std::move(objective); }

  std::size_t num_variables() const noexcept { return vars_.size(); }
  std::size_t num_constraints() const noexcept { return cons_.size(); }
  const std::vector<Variable>& variables() const noexcept { return vars_; }
  const std::vector<Constraint>& constraints() const noexcept { return cons_; }
  const Objective& objective() const noexcept { return objective_; }
  Variable& variable(VarId id) { return vars_.at(id); }

  // Named variable groups used by objective rewrites (e.g. all capacities).
  void add_to_group(const std::string& group, VarId var) { groups_[group].push_back(var); }
  const std::vector<VarId>& group(const std::string& name) const;
  const std::map<std::string, std::vector<VarId>>& groups() const noexcept { return groups_; }

  // Objectives replaced by replace_objective, oldest first.
  const std::vector<Objective>& archived_objectives() const noexcept { return archived_; }
  // The cost expression a budget constraint was built from, if any.
  const std::optional<Objective>& cost_objective() const noexcept { return cost_objective_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  // Throws ValidationError on dangling references, inverted bounds, NaN/inf.
  void validate() const;

 private:
  friend LinearProgram add_budget_constraint(const LinearProgram&, const Objective&, double,
                                             std::optional<double>);
  friend LinearProgram replace_objective(const LinearProgram&, Objective);

  std::vector<Variable> vars_;
  std::vector<Constraint> cons_;
  Objective objective_;
  std::map<std::string, std::vector<VarId>> groups_;
  std::vector<Objective> archived_;
  std::optional<Objective> cost_objective_;
  std::vector<std::string> warnings_;
};

enum class Status { optimal, infeasible, unbounded };

const char* to_string(Status status);

struct Diagnostics {
  std::string solver;
  long iterations = 0;
  double max_scaled_violation = 0.0;  // worst row residual after row scaling
  double max_bound_violation = 0.0;
};

struct LpSolution {
  Status status = Status::infeasible;
  double objective = 0.0;
  std::vector<double> values;
  Diagnostics diagnostics;
};

enum class Method { automatic, simplex, ipm };

struct SolveOptions {
  double feasibility_tol = 1e-6;  // on row-scaled constraints
  double optimality_tol = 1e-6;   // relative objective
  long iteration_limit = 1'000'000;
  Method method = Method::automatic;
};

// Production solve. Infeasible and unbounded programs come back as statuses;
// running out of iterations throws SolverError.
LpSolution solve(const LinearProgram& lp, const SolveOptions& options = {});

// Dense two-phase tableau simplex with Bland's rule. Meant for a few hundred
// variables at most; used as an oracle for `solve`.
LpSolution solve_reference(const LinearProgram& lp, const SolveOptions& options = {});

struct FeasibilityReport {
  double max_row_violation = 0.0;  // scaled by the row's max |coefficient|
  double max_bound_violation = 0.0;
  std::string worst_row;

  bool ok(double tol) const { return max_row_violation <= tol && max_bound_violation <= tol; }
};

// Re-evaluates every constraint and bound from the raw coefficient data.
FeasibilityReport check_feasibility(const LinearProgram& lp, std::span<const double> values);

// Adds `cost . x <= budget` (named "budget"). When `least_cost` is given and
// the budget sits below it, a warning is recorded: the result is infeasible.
LinearProgram add_budget_constraint(const LinearProgram& lp, const Objective& cost, double budget,
                                    std::optional<double> least_cost = std::nullopt);

// (1 + slack) * C*, or C* + slack * |C*| when C* is negative.
double budget_from_slack(double least_cost, double slack);

// Swaps the objective; the previous one is archived. Throws ValidationError
// for an empty objective or a dangling variable reference.
LinearProgram replace_objective(const LinearProgram& lp, Objective objective);

// CPLEX LP text format; layout documented in docs/lp_format.md.
void write_lp_format(const LinearProgram& lp, std::ostream& out);

}  // namespace dhnplan::lp
