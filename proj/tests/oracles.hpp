#pragma once

// Independent reference routes shared by the unit tests and the acceptance
// binary. Nothing here calls into the code it is used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <utility>
#include <vector>

#include "dhnplan/grid.hpp"
#include "dhnplan/lp.hpp"

namespace dhnplan::oracles {

inline double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Random LP that is feasible by construction: constraints are built around a
// known interior point x0. Bounds are finite on most variables; the objective
// is kept bounded by giving every free direction a nonnegative cost.
inline lp::LinearProgram random_feasible_lp(std::mt19937_64& rng) {
  using namespace dhnplan::lp;
  std::uniform_int_distribution<int> nvar(1, 12), ncon(1, 12), kind(0, 9), sense(0, 2);
  std::uniform_real_distribution<double> u(-5.0, 5.0), pos(0.1, 5.0), coin(0.0, 1.0);
  LinearProgram lp;
  int n = nvar(rng), m = ncon(rng);
  std::vector<double> x0(n);
  Objective obj{"obj", {}, 0.0};
  for (int j = 0; j < n; ++j) {
    double lo = 0.0, hi = kInf;
    int k = kind(rng);
    if (k < 5) {
      lo = std::round(u(rng));
      hi = lo + pos(rng) * 2;
    } else if (k < 7) {
      lo = 0.0;
    } else if (k < 9) {
      lo = -kInf;
      hi = std::round(u(rng));
    } else {
      lo = std::round(u(rng));
      hi = lo;  // fixed
    }
    auto id = lp.add_variable("x" + std::to_string(j), lo, hi);
    if (std::isfinite(lo) && std::isfinite(hi)) {
      x0[j] = lo + (hi - lo) * coin(rng);
      obj.terms.push_back({id, u(rng)});
    } else if (std::isfinite(lo)) {
      x0[j] = lo + pos(rng);
      obj.terms.push_back({id, pos(rng)});
    } else {
      x0[j] = hi - pos(rng);
      obj.terms.push_back({id, -pos(rng)});
    }
  }
  for (int i = 0; i < m; ++i) {
    std::vector<Term> terms;
    double ax = 0.0;
    for (int j = 0; j < n; ++j) {
      if (coin(rng) < 0.6) {
        double c = std::round(u(rng) * 10) / 10;
        if (c == 0.0) continue;
        terms.push_back({static_cast<VarId>(j), c});
        ax += c * x0[j];
      }
    }
    if (terms.empty()) continue;
    int s = sense(rng);
    if (s == 0) lp.add_constraint("r" + std::to_string(i), terms, Sense::le, ax + pos(rng));
    else if (s == 1) lp.add_constraint("r" + std::to_string(i), terms, Sense::ge, ax - pos(rng));
    else lp.add_constraint("r" + std::to_string(i), terms, Sense::eq, ax);
  }
  lp.set_objective(std::move(obj));
  return lp;
}

inline grid::Branch pu_branch(std::size_t f, std::size_t t, double r, double x, double b = 0.0,
                              double rating = 100.0) {
  grid::Branch br;
  br.id = "b" + std::to_string(f) + std::to_string(t);
  br.from = f;
  br.to = t;
  br.y_series = 1.0 / grid::Complex(r, x);
  br.b_shunt = b;
  br.rating_mva = rating;
  return br;
}

inline grid::Injection make_injection(std::vector<double> p, std::vector<double> q) {
  grid::Injection inj{Eigen::VectorXd(p.size()), Eigen::VectorXd(q.size())};
  for (std::size_t i = 0; i < p.size(); ++i) inj.p[i] = p[i], inj.q[i] = q[i];
  return inj;
}

// Lossless line, load P + jQ at the far end: closed-form receiving voltage.
inline std::pair<double, double> two_bus_closed_form(double v1, double x, double p_load,
                                                     double q_load) {
  const double a = v1 * v1 - 2.0 * q_load * x;
  const double v2sq = (a + std::sqrt(a * a - 4.0 * x * x * (p_load * p_load + q_load * q_load))) / 2.0;
  const double v2 = std::sqrt(v2sq);
  const double delta = std::asin(-p_load * x / (v1 * v2));
  return {v2, delta};
}

// Same case by fixed-point iteration on V2 = V1 - Z * conj(S_load / V2).
inline std::complex<double> two_bus_fixed_point(double v1, grid::Complex z, grid::Complex s_load) {
  grid::Complex v2 = v1;
  for (int k = 0; k < 500; ++k) v2 = v1 - z * std::conj(s_load / v2);
  return v2;
}

// P_i, Q_i as the polar double sum over G_ij and B_ij, evaluated from a dense
// copy of Y. Independent of the library's complex-current route.
inline grid::Injection polar_injections(const grid::AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                                        const Eigen::VectorXd& va) {
  Eigen::MatrixXcd d(y);
  const auto n = vm.size();
  grid::Injection out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) {
      const double g = d(i, k).real(), b = d(i, k).imag(), th = va[i] - va[k];
      out.p[i] += vm[i] * vm[k] * (g * std::cos(th) + b * std::sin(th));
      out.q[i] += vm[i] * vm[k] * (g * std::sin(th) - b * std::cos(th));
    }
  return out;
}

// Largest |J - finite difference| over the state, polar route, step h.
inline double jacobian_fd_error(const grid::AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                                const Eigen::VectorXd& va, std::size_t ref,
                                const Eigen::MatrixXd& jac, double h = 1e-6) {
  const int n = static_cast<int>(vm.size());
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (i != static_cast<int>(ref)) idx.push_back(i);
  const int m = static_cast<int>(idx.size());
  double worst = 0.0;
  for (int c = 0; c < 2 * m; ++c) {
    auto up_vm = vm, up_va = va, dn_vm = vm, dn_va = va;
    const int bus = idx[c % m];
    if (c < m) up_va[bus] += h, dn_va[bus] -= h;
    else up_vm[bus] += h, dn_vm[bus] -= h;
    auto su = polar_injections(y, up_vm, up_va);
    auto sd = polar_injections(y, dn_vm, dn_va);
    for (int r = 0; r < m; ++r) {
      worst = std::max(worst, std::abs(jac(r, c) - (su.p[idx[r]] - sd.p[idx[r]]) / (2 * h)));
      worst = std::max(worst, std::abs(jac(m + r, c) - (su.q[idx[r]] - sd.q[idx[r]]) / (2 * h)));
    }
  }
  return worst;
}

// Piecewise-constant series from (value, length) pairs.
inline std::vector<double> series(std::initializer_list<std::pair<double, int>> runs) {
  std::vector<double> out;
  for (auto [v, n] : runs) out.insert(out.end(), n, v);
  return out;
}

// Straightforward recount: scan for starts of runs above the limit. With
// per_window set, a run of length L counts floor(L / window) times.
inline int hand_count(const std::vector<double>& s, double limit, int window,
                      bool per_window = false) {
  int events = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!(s[i] > limit)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j] > limit) ++j;
    const int len = static_cast<int>(j - i);
    if (per_window) events += len / window;
    else if (len >= window) ++events;
    i = j;
  }
  return events;
}

}  // namespace dhnplan::oracles
