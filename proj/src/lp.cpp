#include "dhnplan/lp.hpp"

#include <Highs.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

#include "dhnplan/error.hpp"

namespace dhnplan::lp {

double Objective::evaluate(std::span<const double> values) const {
  double v = constant;
  for (const auto& t : terms) v += t.coef * values[t.var];
  return v;
}

VarId LinearProgram::add_variable(std::string name, double lower, double upper) {
  vars_.push_back({std::move(name), lower, upper});
  return vars_.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::string name, std::vector<Term> terms, Sense sense,
                                          double rhs) {
  cons_.push_back({std::move(name), std::move(terms), sense, rhs});
  return cons_.size() - 1;
}

const std::vector<VarId>& LinearProgram::group(const std::string& name) const {
  auto it = groups_.find(name);
  if (it == groups_.end()) throw ValidationError("lp", "unknown variable group '" + name + "'");
  return it->second;
}

namespace {

void check_terms(const std::vector<Term>& terms, std::size_t n_vars, const std::string& owner) {
  for (const auto& t : terms) {
    if (t.var >= n_vars)
      throw ValidationError(owner, "coefficient references undeclared variable " + std::to_string(t.var));
    if (!std::isfinite(t.coef)) throw ValidationError(owner, "non-finite coefficient");
  }
}

}  // namespace

void LinearProgram::validate() const {
  for (const auto& v : vars_) {
    if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper || v.lower == kInf ||
        v.upper == -kInf)
      throw ValidationError("variable " + v.name, "invalid bounds");
  }
  for (const auto& c : cons_) {
    check_terms(c.terms, vars_.size(), "constraint " + c.name);
    if (!std::isfinite(c.rhs)) throw ValidationError("constraint " + c.name, "non-finite rhs");
  }
  check_terms(objective_.terms, vars_.size(), "objective " + objective_.name);
  if (!std::isfinite(objective_.constant)) throw ValidationError("objective", "non-finite constant");
}

const char* to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
  }
  return "?";
}

FeasibilityReport check_feasibility(const LinearProgram& lp, std::span<const double> x) {
  FeasibilityReport rep;
  for (const auto& c : lp.constraints()) {
    double lhs = 0.0;
    double scale = 0.0;
    for (const auto& t : c.terms) {
      lhs += t.coef * x[t.var];
      scale = std::max(scale, std::abs(t.coef));
    }
    if (scale == 0.0) scale = 1.0;
    double viol = 0.0;
    switch (c.sense) {
      case Sense::le: viol = lhs - c.rhs; break;
      case Sense::ge: viol = c.rhs - lhs; break;
      case Sense::eq: viol = std::abs(lhs - c.rhs); break;
    }
    viol = std::max(0.0, viol) / scale;
    if (viol > rep.max_row_violation) {
      rep.max_row_violation = viol;
      rep.worst_row = c.name;
    }
  }
  const auto& vars = lp.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    double v = std::max({0.0, vars[j].lower - x[j], x[j] - vars[j].upper});
    rep.max_bound_violation = std::max(rep.max_bound_violation, v);
  }
  return rep;
}

double budget_from_slack(double least_cost, double slack) {
  if (!(slack >= 0.0)) throw DomainError("cost slack must be >= 0");
  return least_cost + slack * std::abs(least_cost);
}

LinearProgram add_budget_constraint(const LinearProgram& lp, const Objective& cost, double budget,
                                    std::optional<double> least_cost) {
  LinearProgram out = lp;
  check_terms(cost.terms, lp.num_variables(), "budget");
  if (least_cost) {
    double tol = 1e-6 * std::max(1.0, std::abs(*least_cost));
    if (budget < *least_cost - tol)
      out.warnings_.push_back("budget below least cost: program is infeasible");
  }
  out.add_constraint("budget", cost.terms, Sense::le, budget - cost.constant);
  out.cost_objective_ = cost;
  return out;
}

LinearProgram replace_objective(const LinearProgram& lp, Objective objective) {
  if (objective.terms.empty()) throw ValidationError("objective " + objective.name, "empty objective");
  check_terms(objective.terms, lp.num_variables(), "objective " + objective.name);
  LinearProgram out = lp;
  out.archived_.push_back(std::move(out.objective_));
  out.objective_ = std::move(objective);
  return out;
}

namespace {

// Row-scaled copy in HiGHS' column-wise form.
struct ScaledModel {
  HighsLp lp;
  std::vector<double> row_scale;
};

ScaledModel to_highs(const LinearProgram& lp) {
  ScaledModel m;
  auto& h = m.lp;
  const auto n = static_cast<HighsInt>(lp.num_variables());
  const auto rows = static_cast<HighsInt>(lp.num_constraints());
  h.num_col_ = n;
  h.num_row_ = rows;
  h.sense_ = ObjSense::kMinimize;
  h.offset_ = lp.objective().constant;
  h.col_cost_.assign(n, 0.0);
  for (const auto& t : lp.objective().terms) h.col_cost_[t.var] += t.coef;
  for (const auto& v : lp.variables()) {
    h.col_lower_.push_back(v.lower);
    h.col_upper_.push_back(v.upper);
  }

  // Merge duplicate terms per row and scale by max |a_ij|.
  std::vector<std::vector<std::pair<HighsInt, double>>> cols(n);
  m.row_scale.resize(rows, 1.0);
  std::vector<double> dense(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<HighsInt> touched;
  for (HighsInt i = 0; i < rows; ++i) {
    const auto& c = lp.constraints()[i];
    touched.clear();
    for (const auto& t : c.terms) {
      if (!seen[t.var]) {
        seen[t.var] = 1;
        touched.push_back(static_cast<HighsInt>(t.var));
      }
      dense[t.var] += t.coef;
    }
    double scale = 0.0;
    for (auto j : touched) scale = std::max(scale, std::abs(dense[j]));
    if (scale == 0.0) scale = 1.0;
    m.row_scale[i] = scale;
    for (auto j : touched) {
      if (dense[j] != 0.0) cols[j].push_back({i, dense[j] / scale});
      dense[j] = 0.0;
      seen[j] = 0;
    }
    double rhs = c.rhs / scale;
    h.row_lower_.push_back(c.sense == Sense::le ? -kHighsInf : rhs);
    h.row_upper_.push_back(c.sense == Sense::ge ? kHighsInf : rhs);
  }
  auto& a = h.a_matrix_;
  a.format_ = MatrixFormat::kColwise;
  a.num_col_ = n;
  a.num_row_ = rows;
  a.start_.assign(1, 0);
  for (HighsInt j = 0; j < n; ++j) {
    for (auto [i, v] : cols[j]) {
      a.index_.push_back(i);
      a.value_.push_back(v);
    }
    a.start_.push_back(static_cast<HighsInt>(a.index_.size()));
  }
  return m;
}

void fill_diagnostics(const LinearProgram& lp, LpSolution& sol) {
  auto rep = check_feasibility(lp, sol.values);
  sol.diagnostics.max_scaled_violation = rep.max_row_violation;
  sol.diagnostics.max_bound_violation = rep.max_bound_violation;
}

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolveOptions& options) {
  lp.validate();
  auto model = to_highs(lp);

  Highs highs;
  highs.setOptionValue("output_flag", false);
  highs.setOptionValue("threads", 1);
  highs.setOptionValue("random_seed", 0);
  highs.setOptionValue("primal_feasibility_tolerance", std::min(1e-7, options.feasibility_tol));
  highs.setOptionValue("dual_feasibility_tolerance", std::min(1e-7, options.optimality_tol));
  highs.setOptionValue("simplex_iteration_limit",
                       static_cast<HighsInt>(std::min<long>(options.iteration_limit, kHighsIInf)));
  switch (options.method) {
    case Method::automatic:
    case Method::simplex: highs.setOptionValue("solver", "simplex"); break;
    case Method::ipm:
      highs.setOptionValue("solver", "ipm");
      highs.setOptionValue("run_crossover", "on");
      break;
  }
  if (highs.passModel(std::move(model.lp)) == HighsStatus::kError)
    throw SolverError("solver rejected the program");
  highs.run();

  auto status = highs.getModelStatus();
  if (status == HighsModelStatus::kUnboundedOrInfeasible) {
    // Presolve could not tell which; ask again without it.
    highs.setOptionValue("presolve", "off");
    highs.run();
    status = highs.getModelStatus();
  }

  LpSolution sol;
  sol.diagnostics.solver = "highs";
  const auto& info = highs.getInfo();
  sol.diagnostics.iterations = info.simplex_iteration_count + info.ipm_iteration_count;
  switch (status) {
    case HighsModelStatus::kOptimal: sol.status = Status::optimal; break;
    case HighsModelStatus::kInfeasible: sol.status = Status::infeasible; return sol;
    case HighsModelStatus::kUnbounded: sol.status = Status::unbounded; return sol;
    case HighsModelStatus::kIterationLimit:
      throw SolverError("LP iteration limit reached after " +
                        std::to_string(sol.diagnostics.iterations) + " iterations");
    default:
      throw SolverError("LP solver stopped with status '" + highs.modelStatusToString(status) + "'");
  }
  sol.values = highs.getSolution().col_value;
  sol.objective = lp.objective().evaluate(sol.values);
  fill_diagnostics(lp, sol);
  return sol;
}

// ---------------------------------------------------------------------------
// Reference simplex
//
// The program is rewritten as min c'y, A y = b, y >= 0, b >= 0:
//   finite lower bound      x = l + y
//   only an upper bound     x = u - y
//   free                    x = y+ - y-
//   finite upper and lower  extra row y + s = u - l
// then solved with a two-phase dense tableau and Bland's rule.

namespace {

struct StandardForm {
  // x_j = offset_j + sum_k coef * y_k
  struct Map {
    double offset = 0.0;
    std::vector<std::pair<std::size_t, double>> parts;
  };
  std::vector<Map> var_map;
  std::size_t n_struct = 0;  // y columns before slacks
  std::vector<std::vector<double>> rows;  // dense rows over y and slacks
  std::vector<double> rhs;
  std::vector<int> slack_col;             // basic-feasible slack column per row, or -1
  std::vector<double> cost;
  double cost_offset = 0.0;
  std::size_t n_cols = 0;
};

StandardForm standardize(const LinearProgram& lp) {
  StandardForm sf;
  const auto& vars = lp.variables();
  std::vector<std::pair<std::size_t, double>> upper_rows;  // (y column, u - l)
  for (const auto& v : vars) {
    StandardForm::Map m;
    if (std::isfinite(v.lower)) {
      m.offset = v.lower;
      m.parts.push_back({sf.n_struct, 1.0});
      if (std::isfinite(v.upper)) upper_rows.push_back({sf.n_struct, v.upper - v.lower});
      ++sf.n_struct;
    } else if (std::isfinite(v.upper)) {
      m.offset = v.upper;
      m.parts.push_back({sf.n_struct++, -1.0});
    } else {
      m.parts.push_back({sf.n_struct++, 1.0});
      m.parts.push_back({sf.n_struct++, -1.0});
    }
    sf.var_map.push_back(std::move(m));
  }

  struct RawRow {
    std::vector<double> a;
    Sense sense;
    double rhs;
  };
  std::vector<RawRow> raw;
  for (const auto& c : lp.constraints()) {
    RawRow r{std::vector<double>(sf.n_struct, 0.0), c.sense, c.rhs};
    for (const auto& t : c.terms) {
      const auto& m = sf.var_map[t.var];
      r.rhs -= t.coef * m.offset;
      for (auto [k, s] : m.parts) r.a[k] += t.coef * s;
    }
    double scale = 0.0;
    for (double a : r.a) scale = std::max(scale, std::abs(a));
    if (scale > 0.0) {
      for (double& a : r.a) a /= scale;
      r.rhs /= scale;
    }
    raw.push_back(std::move(r));
  }
  for (auto [k, width] : upper_rows) {
    RawRow r{std::vector<double>(sf.n_struct, 0.0), Sense::le, width};
    r.a[k] = 1.0;
    raw.push_back(std::move(r));
  }

  std::size_t n_slack = 0;
  for (const auto& r : raw) n_slack += r.sense != Sense::eq;
  sf.n_cols = sf.n_struct + n_slack;
  std::size_t next_slack = sf.n_struct;
  for (auto& r : raw) {
    std::vector<double> row(sf.n_cols, 0.0);
    std::copy(r.a.begin(), r.a.end(), row.begin());
    int slack = -1;
    if (r.sense != Sense::eq) {
      row[next_slack] = r.sense == Sense::le ? 1.0 : -1.0;
      slack = static_cast<int>(next_slack++);
    }
    if (r.rhs < 0.0) {
      for (double& a : row) a = -a;
      r.rhs = -r.rhs;
    }
    // A slack with +1 after sign normalization starts basic.
    if (slack >= 0 && row[slack] < 0.0) slack = -1;
    sf.rows.push_back(std::move(row));
    sf.rhs.push_back(r.rhs);
    sf.slack_col.push_back(slack);
  }

  sf.cost.assign(sf.n_cols, 0.0);
  sf.cost_offset = lp.objective().constant;
  for (const auto& t : lp.objective().terms) {
    const auto& m = sf.var_map[t.var];
    sf.cost_offset += t.coef * m.offset;
    for (auto [k, s] : m.parts) sf.cost[k] += t.coef * s;
  }
  return sf;
}

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t i, std::size_t j) { return t_[i * (n_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, n_); }
  double& obj(std::size_t j) { return at(m_, j); }  // reduced costs; obj(n_) = -z

  void pivot(std::size_t r, std::size_t c) {
    double p = at(r, c);
    for (std::size_t j = 0; j <= n_; ++j) at(r, j) /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  std::size_t m_, n_;
  std::vector<double> t_;
};

enum class PhaseResult { optimal, unbounded };

// Bland's rule: lowest-index improving column, ties in the ratio test broken
// by the lowest basic variable index.
PhaseResult run_phase(Tableau& tab, std::vector<std::size_t>& basis, std::size_t usable_cols,
                      long& iterations, long limit, double tol) {
  while (true) {
    std::size_t enter = usable_cols;
    for (std::size_t j = 0; j < usable_cols; ++j) {
      if (tab.obj(j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter == usable_cols) return PhaseResult::optimal;
    std::size_t leave = tab.rows();
    double best = 0.0;
    for (std::size_t i = 0; i < tab.rows(); ++i) {
      double a = tab.at(i, enter);
      if (a <= tol) continue;
      double ratio = tab.rhs(i) / a;
      if (leave == tab.rows() || ratio < best - 1e-12 ||
          (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave == tab.rows()) return PhaseResult::unbounded;
    if (++iterations > limit)
      throw SolverError("reference simplex iteration limit reached");
    tab.pivot(leave, enter);
    basis[leave] = enter;
  }
}

}  // namespace

LpSolution solve_reference(const LinearProgram& lp, const SolveOptions& options) {
  lp.validate();
  auto sf = standardize(lp);
  const std::size_t m = sf.rows.size();
  std::size_t n_art = 0;
  for (int s : sf.slack_col) n_art += s < 0;
  const std::size_t n = sf.n_cols + n_art;
  constexpr double tol = 1e-9;

  Tableau tab(m, n);
  std::vector<std::size_t> basis(m);
  std::size_t next_art = sf.n_cols;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < sf.n_cols; ++j) tab.at(i, j) = sf.rows[i][j];
    tab.rhs(i) = sf.rhs[i];
    if (sf.slack_col[i] >= 0) {
      basis[i] = static_cast<std::size_t>(sf.slack_col[i]);
    } else {
      tab.at(i, next_art) = 1.0;
      basis[i] = next_art++;
    }
  }

  LpSolution sol;
  sol.diagnostics.solver = "reference-simplex";
  long iterations = 0;

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    for (std::size_t j = sf.n_cols; j < n; ++j) tab.obj(j) = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < sf.n_cols) continue;
      for (std::size_t j = 0; j <= n; ++j) tab.obj(j) -= tab.at(i, j);
    }
    run_phase(tab, basis, n, iterations, options.iteration_limit, tol);
    if (-tab.obj(n) > 1e-7) {
      sol.status = Status::infeasible;
      sol.diagnostics.iterations = iterations;
      return sol;
    }
    // Drive artificials out of the basis; rows where that is impossible are redundant.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < sf.n_cols) continue;
      for (std::size_t j = 0; j < sf.n_cols; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-7) {
          tab.pivot(i, j);
          basis[i] = j;
          break;
        }
      }
    }
  }

  // Phase 2 over structural and slack columns only.
  for (std::size_t j = 0; j <= n; ++j) tab.obj(j) = 0.0;
  for (std::size_t j = 0; j < sf.n_cols; ++j) tab.obj(j) = sf.cost[j];
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] >= sf.n_cols) continue;  // redundant row, artificial stays at 0
    double cb = sf.cost[basis[i]];
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= n; ++j) tab.obj(j) -= cb * tab.at(i, j);
  }
  // Artificial columns must not re-enter.
  auto phase = run_phase(tab, basis, sf.n_cols, iterations, options.iteration_limit, tol);
  sol.diagnostics.iterations = iterations;
  if (phase == PhaseResult::unbounded) {
    sol.status = Status::unbounded;
    return sol;
  }

  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) y[basis[i]] = tab.rhs(i);
  sol.values.resize(lp.num_variables());
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto& map = sf.var_map[j];
    double v = map.offset;
    for (auto [k, s] : map.parts) v += s * y[k];
    sol.values[j] = v;
  }
  sol.status = Status::optimal;
  sol.objective = lp.objective().evaluate(sol.values);
  fill_diagnostics(lp, sol);
  return sol;
}

// ---------------------------------------------------------------------------

namespace {

std::string lp_name(const std::string& raw, const char* fallback_prefix, std::size_t idx) {
  std::string s;
  for (char c : raw) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '[' ||
              c == ']' || c == '#';
    s.push_back(ok ? c : '_');
  }
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.' || s[0] == 'e' ||
      s[0] == 'E')
    s = std::string(fallback_prefix) + std::to_string(idx) + (s.empty() ? "" : "_" + s);
  return s;
}

void write_expr(std::ostream& out, const std::vector<Term>& terms,
                const std::vector<std::string>& names) {
  if (terms.empty()) {
    out << " 0 " << names.front();
    return;
  }
  std::size_t col = 0;
  for (const auto& t : terms) {
    out << (t.coef < 0 ? " - " : " + ") << std::abs(t.coef) << ' ' << names[t.var];
    if (++col % 8 == 0) out << "\n   ";
  }
}

}  // namespace

void write_lp_format(const LinearProgram& lp, std::ostream& out) {
  lp.validate();
  std::vector<std::string> names;
  for (std::size_t j = 0; j < lp.num_variables(); ++j)
    names.push_back(lp_name(lp.variables()[j].name, "x", j));
  auto old_prec = out.precision(17);

  out << "\\ " << (lp.objective().name.empty() ? "objective" : lp.objective().name) << "\n";
  out << "Minimize\n obj:";
  write_expr(out, lp.objective().terms, names);
  if (lp.objective().constant != 0.0)
    out << (lp.objective().constant < 0 ? " - " : " + ") << std::abs(lp.objective().constant);
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.num_constraints(); ++i) {
    const auto& c = lp.constraints()[i];
    out << ' ' << lp_name(c.name, "c", i) << ':';
    write_expr(out, c.terms, names);
    out << (c.sense == Sense::le ? " <= " : c.sense == Sense::ge ? " >= " : " = ") << c.rhs << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto& v = lp.variables()[j];
    if (v.lower == 0.0 && v.upper == kInf) continue;
    if (v.lower == -kInf && v.upper == kInf) {
      out << ' ' << names[j] << " free\n";
    } else if (v.lower == v.upper) {
      out << ' ' << names[j] << " = " << v.lower << '\n';
    } else {
      out << ' ';
      if (v.lower == -kInf) out << "-inf"; else out << v.lower;
      out << " <= " << names[j] << " <= ";
      if (v.upper == kInf) out << "+inf"; else out << v.upper;
      out << '\n';
    }
  }
  out << "End\n";
  out.precision(old_prec);
}

}  // namespace dhnplan::lp
