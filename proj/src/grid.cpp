#include "dhnplan/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <thread>

#include <Eigen/SparseLU>

#include "dhnplan/csv.hpp"
#include "dhnplan/error.hpp"

namespace dhnplan::grid {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double positive(const csv::Table& t, std::size_t r, std::string_view field) {
  double v = csv::parse_double(t.get(r, field), t.locus(r), field);
  if (!(v > 0.0)) throw ValidationError(t.locus(r), std::string(field) + " must be > 0");
  return v;
}

double non_negative(const csv::Table& t, std::size_t r, std::string_view field) {
  double v = csv::parse_double(t.get(r, field), t.locus(r), field);
  if (!(v >= 0.0)) throw ValidationError(t.locus(r), std::string(field) + " must be >= 0");
  return v;
}

std::string required(const csv::Table& t, std::size_t r, std::string_view field) {
  t.require_column(field);
  auto v = t.get(r, field);
  if (v.empty()) throw ValidationError(t.locus(r), "missing " + std::string(field));
  return v;
}

void load_baseline(ElectricGrid& g, const fs::path& dir) {
  if (!fs::is_directory(dir)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    auto t = csv::Table::read(path);
    const auto bus = path.stem().string();
    g.bus_index(bus);
    const auto ts_col = t.require_column("timestamp");
    const auto load_col = t.column("p_load_mw");
    const auto gen_col = t.column("p_gen_mw");
    if (!load_col && !gen_col)
      throw ValidationError(t.source(), "needs a p_load_mw or p_gen_mw column");
    std::vector<std::string> stamps;
    BaselineProfile p;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      stamps.push_back(t.at(r, ts_col));
      p.p_load.push_back(load_col ? csv::parse_double(t.at(r, *load_col), t.locus(r), "p_load_mw")
                                  : 0.0);
      p.p_gen.push_back(gen_col ? csv::parse_double(t.at(r, *gen_col), t.locus(r), "p_gen_mw")
                                : 0.0);
      if (p.p_load.back() < 0.0 || p.p_gen.back() < 0.0)
        throw ValidationError(t.locus(r), "baseline load and generation must be >= 0");
    }
    if (g.timestamps.empty()) g.timestamps = stamps;
    else if (stamps != g.timestamps)
      throw ValidationError(t.source(), "timestamps differ from the other baseline profiles");
    g.baseline[bus] = std::move(p);
  }
}

}  // namespace

const char* to_string(BranchKind kind) { return kind == BranchKind::line ? "line" : "transformer"; }

std::size_t ElectricGrid::bus_index(const std::string& id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  throw ValidationError("", "unknown bus '" + id + "'");
}

std::size_t ElectricGrid::reference_bus() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].type == BusType::reference) return i;
  throw ValidationError("", "grid has no reference bus");
}

std::vector<std::string> ElectricGrid::bus_ids() const {
  std::vector<std::string> ids;
  for (const auto& b : buses) ids.push_back(b.id);
  return ids;
}

void ElectricGrid::validate() const {
  if (!(s_base_mva > 0.0)) throw ValidationError("", "S_base must be > 0");
  std::size_t refs = 0;
  for (const auto& b : buses) {
    if (b.type == BusType::reference) ++refs;
    if (!(b.vn_kv > 0.0)) throw ValidationError("bus " + b.id, "nominal voltage must be > 0");
  }
  if (refs != 1)
    throw ValidationError("", "grid needs exactly one reference bus, found " + std::to_string(refs));
  for (std::size_t i = 0; i < buses.size(); ++i)
    for (std::size_t j = i + 1; j < buses.size(); ++j)
      if (buses[i].id == buses[j].id) throw ValidationError("bus " + buses[i].id, "duplicate id");

  std::vector<std::vector<std::size_t>> adj(buses.size());
  for (const auto& l : lines) {
    const std::string locus = "line " + l.id;
    std::size_t f, t;
    try {
      f = bus_index(l.from);
      t = bus_index(l.to);
    } catch (const ValidationError& e) {
      throw ValidationError(locus, e.what());
    }
    if (f == t) throw ValidationError(locus, "connects a bus to itself");
    if (l.r_ohm == 0.0 && l.x_ohm == 0.0) throw ValidationError(locus, "zero impedance");
    if (l.r_ohm < 0.0 || l.x_ohm < 0.0) throw ValidationError(locus, "negative impedance");
    if (!(l.rating_mva > 0.0)) throw ValidationError(locus, "rating must be > 0");
    if (std::abs(buses[f].vn_kv - buses[t].vn_kv) > 1e-9 * buses[f].vn_kv)
      throw ValidationError(locus, "ends at different nominal voltages");
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  for (const auto& tr : transformers) {
    const std::string locus = "transformer " + tr.id;
    std::size_t h, l;
    try {
      h = bus_index(tr.hv_bus);
      l = bus_index(tr.lv_bus);
    } catch (const ValidationError& e) {
      throw ValidationError(locus, e.what());
    }
    if (h == l) throw ValidationError(locus, "connects a bus to itself");
    if (!(tr.vk_percent > 0.0)) throw ValidationError(locus, "zero impedance");
    if (tr.vkr_percent < 0.0 || tr.vkr_percent > tr.vk_percent)
      throw ValidationError(locus, "vkr_percent must lie in [0, vk_percent]");
    if (!(tr.rating_mva > 0.0)) throw ValidationError(locus, "rating must be > 0");
    adj[h].push_back(l);
    adj[l].push_back(h);
  }

  std::vector<bool> seen(buses.size(), false);
  std::queue<std::size_t> q;
  q.push(reference_bus());
  seen[reference_bus()] = true;
  while (!q.empty()) {
    auto i = q.front();
    q.pop();
    for (auto k : adj[i])
      if (!seen[k]) seen[k] = true, q.push(k);
  }
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (!seen[i]) throw ValidationError("bus " + buses[i].id, "not connected to the reference bus");
}

ElectricGrid load_grid(const fs::path& dir, double s_base_mva) {
  ElectricGrid g;
  g.s_base_mva = s_base_mva;
  {
    auto t = csv::Table::read(dir / "buses.csv");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Bus b;
      b.id = required(t, r, "id");
      b.vn_kv = positive(t, r, "vn_kv");
      auto type = t.get(r, "type");
      if (type == "reference" || type == "slack") b.type = BusType::reference;
      else if (type.empty() || type == "PQ" || type == "pq") b.type = BusType::pq;
      else throw ValidationError(t.locus(r), "unknown bus type '" + type + "'");
      g.buses.push_back(b);
    }
  }
  {
    auto t = csv::Table::read(dir / "lines.csv");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Line l;
      l.id = required(t, r, "id");
      l.from = required(t, r, "from");
      l.to = required(t, r, "to");
      l.r_ohm = non_negative(t, r, "r_ohm");
      l.x_ohm = non_negative(t, r, "x_ohm");
      l.b_us = t.get(r, "b_us").empty() ? 0.0 : non_negative(t, r, "b_us");
      l.rating_mva = positive(t, r, "rating_mva");
      if (l.r_ohm == 0.0 && l.x_ohm == 0.0) throw ValidationError(t.locus(r), "zero impedance");
      g.lines.push_back(l);
    }
  }
  if (fs::exists(dir / "trafos.csv")) {
    auto t = csv::Table::read(dir / "trafos.csv");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Transformer tr;
      tr.id = required(t, r, "id");
      tr.hv_bus = required(t, r, "hv_bus");
      tr.lv_bus = required(t, r, "lv_bus");
      tr.vk_percent = positive(t, r, "vk_percent");
      tr.vkr_percent = non_negative(t, r, "vkr_percent");
      tr.rating_mva = positive(t, r, "rating_mva");
      g.transformers.push_back(tr);
    }
  }
  g.validate();
  load_baseline(g, dir / "baseline_profiles");
  return g;
}

std::vector<Branch> branches(const ElectricGrid& grid) {
  std::vector<Branch> out;
  const double sb = grid.s_base_mva;
  for (const auto& l : grid.lines) {
    Branch b;
    b.id = l.id;
    b.kind = BranchKind::line;
    b.from = grid.bus_index(l.from);
    b.to = grid.bus_index(l.to);
    const double vn = grid.buses[b.from].vn_kv;
    const double z_base = vn * vn / sb;
    b.y_series = 1.0 / Complex(l.r_ohm / z_base, l.x_ohm / z_base);
    b.b_shunt = l.b_us * 1e-6 * z_base;
    b.rating_mva = l.rating_mva;
    out.push_back(b);
  }
  for (const auto& t : grid.transformers) {
    Branch b;
    b.id = t.id;
    b.kind = BranchKind::transformer;
    b.from = grid.bus_index(t.hv_bus);
    b.to = grid.bus_index(t.lv_bus);
    const double z = t.vk_percent / 100.0 * sb / t.rating_mva;
    const double r = t.vkr_percent / 100.0 * sb / t.rating_mva;
    b.y_series = 1.0 / Complex(r, std::sqrt(std::max(0.0, z * z - r * r)));
    b.rating_mva = t.rating_mva;
    out.push_back(b);
  }
  return out;
}

AdmittanceMatrix build_admittance(std::size_t n, const std::vector<Branch>& brs) {
  std::vector<Eigen::Triplet<Complex>> trip;
  for (const auto& b : brs) {
    if (b.from >= n || b.to >= n) throw ValidationError("branch " + b.id, "bus index out of range");
    if (!std::isfinite(b.y_series.real()) || !std::isfinite(b.y_series.imag()))
      throw ValidationError("branch " + b.id, "zero impedance");
    const Complex sh(0.0, b.b_shunt / 2.0);
    trip.emplace_back(b.from, b.from, b.y_series + sh);
    trip.emplace_back(b.to, b.to, b.y_series + sh);
    trip.emplace_back(b.from, b.to, -b.y_series);
    trip.emplace_back(b.to, b.from, -b.y_series);
  }
  AdmittanceMatrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  y.setFromTriplets(trip.begin(), trip.end());
  y.makeCompressed();
  return y;
}

AdmittanceMatrix build_admittance(const ElectricGrid& grid) {
  grid.validate();
  return build_admittance(grid.buses.size(), branches(grid));
}

namespace {

Eigen::VectorXcd phasors(const Eigen::VectorXd& vm, const Eigen::VectorXd& va) {
  Eigen::VectorXcd v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
  return v;
}

}  // namespace

Injection bus_injections(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                         const Eigen::VectorXd& va) {
  const auto v = phasors(vm, va);
  const Eigen::VectorXcd i = y * v;
  Injection out{Eigen::VectorXd(vm.size()), Eigen::VectorXd(vm.size())};
  for (Eigen::Index k = 0; k < vm.size(); ++k) {
    const Complex s = v[k] * std::conj(i[k]);
    out.p[k] = s.real();
    out.q[k] = s.imag();
  }
  return out;
}

double max_mismatch(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                    const Eigen::VectorXd& va, const Injection& spec, std::size_t reference) {
  auto s = bus_injections(y, vm, va);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < vm.size(); ++k) {
    if (static_cast<std::size_t>(k) == reference) continue;
    const double dp = std::abs(s.p[k] - spec.p[k]);
    const double dq = std::abs(s.q[k] - spec.q[k]);
    if (!std::isfinite(dp) || !std::isfinite(dq)) return HUGE_VAL;
    worst = std::max({worst, dp, dq});
  }
  return worst;
}

Eigen::SparseMatrix<double> jacobian(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                                     const Eigen::VectorXd& va, std::size_t reference) {
  const Eigen::Index n = vm.size();
  std::vector<Eigen::Index> pos(n, -1);
  Eigen::Index m = 0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (static_cast<std::size_t>(k) != reference) pos[k] = m++;

  const auto v = phasors(vm, va);
  const Eigen::VectorXcd cur = y * v;
  // dS_i/dtheta_k and dS_i/d|V|_k accumulated per nonzero of Y.
  std::map<std::pair<Eigen::Index, Eigen::Index>, std::pair<Complex, Complex>> d;
  const Complex j(0.0, 1.0);
  for (Eigen::Index col = 0; col < y.outerSize(); ++col) {
    for (AdmittanceMatrix::InnerIterator it(y, col); it; ++it) {
      const Eigen::Index i = it.row(), k = it.col();
      auto& e = d[{i, k}];
      e.first += -j * v[i] * std::conj(it.value() * v[k]);
      e.second += v[i] * std::conj(it.value() * v[k] / vm[k]);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& e = d[{i, i}];
    e.first += j * v[i] * std::conj(cur[i]);
    e.second += v[i] / vm[i] * std::conj(cur[i]);
  }

  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& [ik, e] : d) {
    const auto [i, k] = ik;
    if (pos[i] < 0 || pos[k] < 0) continue;
    const auto r = pos[i], c = pos[k];
    trip.emplace_back(r, c, e.first.real());
    trip.emplace_back(r, m + c, e.second.real());
    trip.emplace_back(m + r, c, e.first.imag());
    trip.emplace_back(m + r, m + c, e.second.imag());
  }
  Eigen::SparseMatrix<double> jac(2 * m, 2 * m);
  jac.setFromTriplets(trip.begin(), trip.end());
  jac.makeCompressed();
  return jac;
}

SnapshotSolution solve_snapshot(const AdmittanceMatrix& y, const Injection& spec,
                                std::size_t reference, const PowerFlowOptions& options) {
  const Eigen::Index n = y.rows();
  SnapshotSolution sol;
  sol.vm = Eigen::VectorXd::Constant(n, 1.0);
  sol.va = Eigen::VectorXd::Zero(n);
  sol.vm[reference] = options.reference_vm;
  sol.va[reference] = options.reference_va;
  // Flat start: PQ buses at 1 p.u. and the reference angle.
  for (Eigen::Index k = 0; k < n; ++k)
    if (static_cast<std::size_t>(k) != reference) sol.va[k] = options.reference_va;

  std::vector<Eigen::Index> buses;
  for (Eigen::Index k = 0; k < n; ++k)
    if (static_cast<std::size_t>(k) != reference) buses.push_back(k);
  const auto m = static_cast<Eigen::Index>(buses.size());

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analysed = false;
  for (int iter = 0;; ++iter) {
    auto s = bus_injections(y, sol.vm, sol.va);
    Eigen::VectorXd f(2 * m);
    double worst = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      f[r] = s.p[buses[r]] - spec.p[buses[r]];
      f[m + r] = s.q[buses[r]] - spec.q[buses[r]];
      worst = std::max({worst, std::abs(f[r]), std::abs(f[m + r])});
    }
    if (!std::isfinite(f.sum())) worst = HUGE_VAL;
    sol.mismatch = worst;
    sol.iterations = iter;
    if (worst < options.tolerance) {
      sol.converged = true;
      return sol;
    }
    if (!std::isfinite(worst) || iter >= options.max_iterations) return sol;

    auto jac = jacobian(y, sol.vm, sol.va, reference);
    if (!analysed) {
      lu.analyzePattern(jac);
      analysed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) return sol;
    Eigen::VectorXd dx = lu.solve(-f);
    if (lu.info() != Eigen::Success || !std::isfinite(dx.sum())) return sol;
    for (Eigen::Index r = 0; r < m; ++r) {
      sol.va[buses[r]] += dx[r];
      sol.vm[buses[r]] += dx[m + r];
    }
  }
}

std::vector<BranchFlow> branch_flows(const std::vector<Branch>& brs, double s_base_mva,
                                     const Eigen::VectorXd& vm, const Eigen::VectorXd& va) {
  const auto v = phasors(vm, va);
  std::vector<BranchFlow> out;
  out.reserve(brs.size());
  for (const auto& b : brs) {
    const Complex sh(0.0, b.b_shunt / 2.0);
    const Complex vf = v[b.from], vt = v[b.to];
    const Complex sf = vf * std::conj((vf - vt) * b.y_series + sh * vf) * s_base_mva;
    const Complex st = vt * std::conj((vt - vf) * b.y_series + sh * vt) * s_base_mva;
    BranchFlow f;
    f.p_from_mw = sf.real();
    f.q_from_mvar = sf.imag();
    f.p_to_mw = st.real();
    f.q_to_mvar = st.imag();
    f.loading_percent = 100.0 * std::max(std::abs(sf), std::abs(st)) / b.rating_mva;
    f.loading_active_percent =
        100.0 * std::max(std::abs(sf.real()), std::abs(st.real())) / b.rating_mva;
    out.push_back(f);
  }
  return out;
}

double reactive_ratio(double pf) {
  if (!(pf > 0.0 && pf <= 1.0)) throw DomainError("power factor must lie in (0, 1]");
  return std::tan(std::acos(pf));
}

InjectionSet combine_injections(const ElectricGrid& grid,
                                const std::map<std::string, ElectricProfile>& dhn,
                                const std::vector<std::string>& timestamps) {
  InjectionSet set;
  if (!grid.timestamps.empty()) {
    if (!timestamps.empty() && timestamps != grid.timestamps) {
      std::string detail = "horizon mismatch: " + std::to_string(timestamps.size()) +
                           " DHN snapshots against " + std::to_string(grid.timestamps.size()) +
                           " baseline snapshots";
      if (timestamps.size() == grid.timestamps.size()) {
        for (std::size_t t = 0; t < timestamps.size(); ++t)
          if (timestamps[t] != grid.timestamps[t]) {
            detail = "timestamp mismatch at snapshot " + std::to_string(t) + ": '" +
                     timestamps[t] + "' against baseline '" + grid.timestamps[t] + "'";
            break;
          }
      }
      throw ValidationError("baseline_profiles", detail);
    }
    set.timestamps = grid.timestamps;
  } else {
    set.timestamps = timestamps;
  }
  const std::size_t T = set.timestamps.size();
  for (const auto& [bus, p] : grid.baseline) set.buses[bus] = p;
  for (const auto& [bus, prof] : dhn) {
    grid.bus_index(bus);
    if (prof.load.size() != T || prof.generation.size() != T)
      throw ValidationError("bus " + bus, "DHN electric profile length " +
                                              std::to_string(prof.load.size()) + " against " +
                                              std::to_string(T) + " snapshots");
    auto& dst = set.buses[bus];
    if (dst.p_load.empty()) dst.p_load.assign(T, 0.0);
    if (dst.p_gen.empty()) dst.p_gen.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      dst.p_load[t] += prof.load[t];
      dst.p_gen[t] += prof.generation[t];
    }
  }
  return set;
}

Injection snapshot_injection(const ElectricGrid& grid, const InjectionSet& set, std::size_t t,
                             double power_factor) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  const double k = reactive_ratio(power_factor);
  Injection inj{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (const auto& [bus, p] : set.buses) {
    const auto i = static_cast<Eigen::Index>(grid.bus_index(bus));
    const double net = (p.p_gen.at(t) - p.p_load.at(t)) / grid.s_base_mva;
    inj.p[i] += net;
    inj.q[i] += net * k;
  }
  return inj;
}

std::vector<double> FlowResult::loading_series(std::size_t branch, bool active) const {
  std::vector<double> out(flows.size());
  for (std::size_t t = 0; t < flows.size(); ++t) {
    if (!converged[t]) {
      out[t] = kNaN;
      continue;
    }
    const auto& f = flows[t].at(branch);
    out[t] = active ? f.loading_active_percent : f.loading_percent;
  }
  return out;
}

FlowResult run_timeseries(const ElectricGrid& grid, const InjectionSet& injections,
                          const TimeseriesOptions& options) {
  const auto brs = branches(grid);
  const auto y = build_admittance(grid);
  const auto ref = grid.reference_bus();
  const std::size_t T = injections.size();
  reactive_ratio(options.power_factor);

  FlowResult res;
  res.timestamps = injections.timestamps;
  res.bus_ids = grid.bus_ids();
  for (const auto& b : brs) {
    res.branch_ids.push_back(b.id);
    res.branch_kinds.push_back(b.kind);
    res.branch_ratings.push_back(b.rating_mva);
  }
  res.vm.assign(T, {});
  res.va.assign(T, {});
  res.flows.assign(T, {});
  res.reference_p_mw.assign(T, kNaN);
  res.reference_q_mvar.assign(T, kNaN);
  res.converged.assign(T, false);
  res.iterations.assign(T, 0);
  res.mismatch.assign(T, kNaN);

  std::vector<char> ok(T, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < T;) {
      auto spec = snapshot_injection(grid, injections, t, options.power_factor);
      auto sol = solve_snapshot(y, spec, ref, options.powerflow);
      res.iterations[t] = sol.iterations;
      res.mismatch[t] = sol.mismatch;
      const auto nb = grid.buses.size();
      if (!sol.converged) {
        res.vm[t].assign(nb, kNaN);
        res.va[t].assign(nb, kNaN);
        res.flows[t].assign(brs.size(), BranchFlow{kNaN, kNaN, kNaN, kNaN, kNaN, kNaN});
        continue;
      }
      ok[t] = 1;
      res.vm[t].assign(sol.vm.data(), sol.vm.data() + nb);
      res.va[t].assign(sol.va.data(), sol.va.data() + nb);
      res.flows[t] = branch_flows(brs, grid.s_base_mva, sol.vm, sol.va);
      auto s = bus_injections(y, sol.vm, sol.va);
      res.reference_p_mw[t] = s.p[ref] * grid.s_base_mva;
      res.reference_q_mvar[t] = s.q[ref] * grid.s_base_mva;
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, std::max<std::size_t>(T, 1)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = 0; t < T; ++t) {
    res.converged[t] = ok[t] != 0;
    if (!ok[t]) ++res.divergent;
  }
  res.degraded = T > 0 && static_cast<double>(res.divergent) > options.degraded_fraction * T;
  return res;
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json column(const std::vector<std::vector<double>>& m, std::size_t k) {
  auto a = nlohmann::json::array();
  for (const auto& row : m) a.push_back(num(row.at(k)));
  return a;
}

double from_num(const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); }

}  // namespace

nlohmann::json to_json(const FlowResult& r) {
  const std::size_t T = r.timestamps.size();
  nlohmann::json buses = nlohmann::json::array();
  for (std::size_t b = 0; b < r.bus_ids.size(); ++b)
    buses.push_back({{"id", r.bus_ids[b]}, {"vm_pu", column(r.vm, b)}, {"va_rad", column(r.va, b)}});
  nlohmann::json brs = nlohmann::json::array();
  for (std::size_t k = 0; k < r.branch_ids.size(); ++k) {
    nlohmann::json pf = nlohmann::json::array(), qf = pf, pt = pf, qt = pf, ld = pf, la = pf;
    for (std::size_t t = 0; t < T; ++t) {
      const auto& f = r.flows[t][k];
      pf.push_back(num(f.p_from_mw));
      qf.push_back(num(f.q_from_mvar));
      pt.push_back(num(f.p_to_mw));
      qt.push_back(num(f.q_to_mvar));
      ld.push_back(num(f.loading_percent));
      la.push_back(num(f.loading_active_percent));
    }
    brs.push_back({{"id", r.branch_ids[k]},
                   {"kind", to_string(r.branch_kinds[k])},
                   {"rating_mva", r.branch_ratings[k]},
                   {"p_from_mw", pf},
                   {"q_from_mvar", qf},
                   {"p_to_mw", pt},
                   {"q_to_mvar", qt},
                   {"loading_percent", ld},
                   {"loading_active_percent", la}});
  }
  nlohmann::json rp = nlohmann::json::array(), rq = rp, mm = rp;
  for (std::size_t t = 0; t < T; ++t) {
    rp.push_back(num(r.reference_p_mw[t]));
    rq.push_back(num(r.reference_q_mvar[t]));
    mm.push_back(num(r.mismatch[t]));
  }
  return {{"timestamps", r.timestamps},
          {"buses", buses},
          {"branches", brs},
          {"reference", {{"p_mw", rp}, {"q_mvar", rq}}},
          {"convergence",
           {{"converged", r.converged},
            {"iterations", r.iterations},
            {"mismatch_pu", mm},
            {"divergent", r.divergent},
            {"degraded", r.degraded}}}};
}

FlowResult flow_result_from_json(const nlohmann::json& j) {
  FlowResult r;
  r.timestamps = j.at("timestamps").get<std::vector<std::string>>();
  const std::size_t T = r.timestamps.size();
  const auto& buses = j.at("buses");
  const auto& brs = j.at("branches");
  r.vm.assign(T, std::vector<double>(buses.size()));
  r.va.assign(T, std::vector<double>(buses.size()));
  r.flows.assign(T, std::vector<BranchFlow>(brs.size()));
  for (std::size_t b = 0; b < buses.size(); ++b) {
    r.bus_ids.push_back(buses[b].at("id").get<std::string>());
    for (std::size_t t = 0; t < T; ++t) {
      r.vm[t][b] = from_num(buses[b].at("vm_pu").at(t));
      r.va[t][b] = from_num(buses[b].at("va_rad").at(t));
    }
  }
  for (std::size_t k = 0; k < brs.size(); ++k) {
    const auto& e = brs[k];
    r.branch_ids.push_back(e.at("id").get<std::string>());
    r.branch_kinds.push_back(e.at("kind").get<std::string>() == "line" ? BranchKind::line
                                                                       : BranchKind::transformer);
    r.branch_ratings.push_back(e.at("rating_mva").get<double>());
    for (std::size_t t = 0; t < T; ++t) {
      auto& f = r.flows[t][k];
      f.p_from_mw = from_num(e.at("p_from_mw").at(t));
      f.q_from_mvar = from_num(e.at("q_from_mvar").at(t));
      f.p_to_mw = from_num(e.at("p_to_mw").at(t));
      f.q_to_mvar = from_num(e.at("q_to_mvar").at(t));
      f.loading_percent = from_num(e.at("loading_percent").at(t));
      f.loading_active_percent = from_num(e.at("loading_active_percent").at(t));
    }
  }
  const auto& ref = j.at("reference");
  const auto& conv = j.at("convergence");
  for (std::size_t t = 0; t < T; ++t) {
    r.reference_p_mw.push_back(from_num(ref.at("p_mw").at(t)));
    r.reference_q_mvar.push_back(from_num(ref.at("q_mvar").at(t)));
    r.mismatch.push_back(from_num(conv.at("mismatch_pu").at(t)));
  }
  r.converged = conv.at("converged").get<std::vector<bool>>();
  r.iterations = conv.at("iterations").get<std::vector<int>>();
  r.divergent = conv.at("divergent").get<int>();
  r.degraded = conv.at("degraded").get<bool>();
  return r;
}

}  // namespace dhnplan::grid
