#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "dhnplan/dhn_model.hpp"

namespace dhnplan::grid {

using Complex = std::complex<double>;

enum class BusType { reference, pq };

struct Bus {
  std::string id;
  double vn_kv = 0.0;
  BusType type = BusType::pq;
};

enum class BranchKind { line, transformer };

// Lines in physical units: ohm for the series impedance, microsiemens for the
// total shunt susceptance.
struct Line {
  std::string id;
  std::string from, to;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double b_us = 0.0;
  double rating_mva = 0.0;
};

// Two-winding transformer at nominal tap: vk/vkr in percent of the rating.
struct Transformer {
  std::string id;
  std::string hv_bus, lv_bus;
  double vk_percent = 0.0;
  double vkr_percent = 0.0;
  double rating_mva = 0.0;
};

// Local non-DHN load and distributed generation at one bus, MW.
struct BaselineProfile {
  Series p_load;
  Series p_gen;
};

struct ElectricGrid {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Transformer> transformers;
  double s_base_mva = 100.0;
  std::vector<std::string> timestamps;  // from the baseline profiles, may be empty
  std::map<std::string, BaselineProfile> baseline;

  std::size_t bus_index(const std::string& id) const;  // throws ValidationError
  std::size_t reference_bus() const;
  std::vector<std::string> bus_ids() const;

  // Throws ValidationError: reference bus count, unknown bus references,
  // non-positive ratings or voltages, zero impedance, line voltage mismatch,
  // disconnected buses.
  void validate() const;
};

ElectricGrid load_grid(const std::filesystem::path& dir, double s_base_mva = 100.0);

// A branch in per unit on the system base, lines first then transformers.
struct Branch {
  std::string id;
  BranchKind kind = BranchKind::line;
  std::size_t from = 0, to = 0;  // transformer: hv, lv
  Complex y_series;
  double b_shunt = 0.0;  // total, split equally over both ends
  double rating_mva = 0.0;
};

std::vector<Branch> branches(const ElectricGrid& grid);

using AdmittanceMatrix = Eigen::SparseMatrix<Complex>;

AdmittanceMatrix build_admittance(const ElectricGrid& grid);
AdmittanceMatrix build_admittance(std::size_t n_buses, const std::vector<Branch>& branches);

// Net injections in per unit (generation positive), one entry per bus.
struct Injection {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

// P_i and Q_i computed from the bus voltages.
Injection bus_injections(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                         const Eigen::VectorXd& va);

// Largest |P_i - P_spec| or |Q_i - Q_spec| over non-reference buses.
double max_mismatch(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                    const Eigen::VectorXd& va, const Injection& spec, std::size_t reference);

// Newton-Raphson Jacobian d[P;Q]/d[theta;V] over non-reference buses (theta
// block first). Rows and columns follow bus order with the reference skipped.
Eigen::SparseMatrix<double> jacobian(const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                                     const Eigen::VectorXd& va, std::size_t reference);

struct PowerFlowOptions {
  double tolerance = 1e-10;  // p.u., max mismatch; well inside the 1e-8 validity check
  int max_iterations = 30;
  double reference_vm = 1.0;
  double reference_va = 0.0;
};

struct SnapshotSolution {
  bool converged = false;
  int iterations = 0;
  double mismatch = 0.0;
  Eigen::VectorXd vm;
  Eigen::VectorXd va;  // rad
};

// Flat start. Never throws on divergence; `converged` is false instead.
SnapshotSolution solve_snapshot(const AdmittanceMatrix& y, const Injection& spec,
                                std::size_t reference, const PowerFlowOptions& options = {});

struct BranchFlow {
  double p_from_mw = 0.0, q_from_mvar = 0.0;
  double p_to_mw = 0.0, q_to_mvar = 0.0;
  double loading_percent = 0.0;         // apparent power, higher-loaded end
  double loading_active_percent = 0.0;  // |P| only, higher-loaded end
};

std::vector<BranchFlow> branch_flows(const std::vector<Branch>& branches, double s_base_mva,
                                     const Eigen::VectorXd& vm, const Eigen::VectorXd& va);

// tan(arccos(pf)); throws DomainError outside (0, 1].
double reactive_ratio(double power_factor);

// Per-bus active load and generation over the horizon, MW.
struct InjectionSet {
  std::vector<std::string> timestamps;
  std::map<std::string, BaselineProfile> buses;

  std::size_t size() const { return timestamps.size(); }
};

// Grid baseline profiles plus the DHN electric profiles (load adds to load,
// CHP output to generation). `timestamps` is the DHN horizon; it must equal
// the baseline's when the grid has one. Throws ValidationError on a horizon
// mismatch or an unknown bus.
InjectionSet combine_injections(const ElectricGrid& grid,
                                const std::map<std::string, ElectricProfile>& dhn,
                                const std::vector<std::string>& timestamps);

// Injection at snapshot t in per unit, Q = P * tan(phi) on the net injection.
Injection snapshot_injection(const ElectricGrid& grid, const InjectionSet& set, std::size_t t,
                             double power_factor);

struct FlowResult {
  std::vector<std::string> timestamps;
  std::vector<std::string> bus_ids;
  std::vector<std::string> branch_ids;
  std::vector<BranchKind> branch_kinds;
  std::vector<double> branch_ratings;

  // [snapshot][bus] / [snapshot][branch]; NaN for divergent snapshots.
  std::vector<std::vector<double>> vm, va;
  std::vector<std::vector<BranchFlow>> flows;
  std::vector<double> reference_p_mw, reference_q_mvar;
  std::vector<bool> converged;
  std::vector<int> iterations;
  std::vector<double> mismatch;
  int divergent = 0;
  bool degraded = false;

  // loading_percent (apparent) or loading_active_percent over time.
  std::vector<double> loading_series(std::size_t branch, bool active = false) const;
};

struct TimeseriesOptions {
  double power_factor = 0.95;
  PowerFlowOptions powerflow;
  unsigned jobs = 1;
  double degraded_fraction = 0.05;  // divergent share above which the run is degraded
};

// Snapshots are independent and solved concurrently on up to `jobs` threads.
FlowResult run_timeseries(const ElectricGrid& grid, const InjectionSet& injections,
                          const TimeseriesOptions& options = {});

nlohmann::json to_json(const FlowResult& result);
FlowResult flow_result_from_json(const nlohmann::json& j);

const char* to_string(BranchKind kind);

}  // namespace dhnplan::grid
