#include "dhnplan/dhn_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "dhnplan/error.hpp"

namespace dhnplan {

using lp::Sense;
using lp::Term;
using lp::VarId;

namespace {

std::string var_name(const std::string& asset, const char* what, std::size_t t) {
  return asset + "." + what + "[" + std::to_string(t) + "]";
}

std::vector<VarId> per_snapshot(lp::LinearProgram& lp, const std::string& asset, const char* what,
                                std::size_t n, double lower = 0.0) {
  std::vector<VarId> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = lp.add_variable(var_name(asset, what, t), lower);
  return out;
}

bool is_availability_generator(TechKind k) {
  return k == TechKind::solar_thermal || k == TechKind::residual_heat;
}

// Heat produced per unit of input for converters and CHP (COP_t for heat pumps).
double conversion(const TechnologyAsset& a, const Series& cop, std::size_t t) {
  return a.kind == TechKind::heat_pump ? cop[t] : a.efficiency;
}

const Series& require_price(const HeatSystem& sys, const TechnologyAsset& a, Carrier c) {
  const Series* p = sys.prices.price(c);
  if (!p || p->size() != sys.snapshots.size()) {
    throw ConfigurationError("asset " + a.id + ": missing price series '" +
                             std::string(to_string(c)) + "'");
  }
  return *p;
}

double annualized_investment(const TechnologyAsset& a, double rate) {
  double per_mw = a.investment_cost / annuity_factor(a.lifetime, rate);
  return a.kind == TechKind::pipeline ? per_mw * a.length_m : per_mw;
}

std::string balance_name(const HeatNode& n, const SnapshotIndex& s, std::size_t t) {
  return "balance[" + n.id + "][" + s.timestamps[t] + "]";
}

const Series& series_of(const DesignResult& d, const std::string& asset, const char* name) {
  static const Series empty;
  auto it = d.dispatch.find(asset);
  if (it == d.dispatch.end()) return empty;
  auto jt = it->second.find(name);
  return jt == it->second.end() ? empty : jt->second;
}

}  // namespace

VariableLayout declare_variables(const HeatSystem& sys, lp::LinearProgram& lp) {
  const std::size_t T = sys.snapshots.size();
  VariableLayout layout;
  layout.assets.resize(sys.assets.size());
  for (std::size_t i = 0; i < sys.assets.size(); ++i) {
    const auto& a = sys.assets[i];
    auto& v = layout.assets[i];
    v.capacity = lp.add_variable("cap[" + a.id + "]", 0.0, a.capacity_bound());
    lp.add_to_group("capacity", v.capacity);
    if (is_converter(a.kind) || is_chp(a.kind)) {
      v.input = per_snapshot(lp, a.id, "input", T);
    } else if (is_availability_generator(a.kind)) {
      v.heat = per_snapshot(lp, a.id, "heat", T);
    } else if (a.kind == TechKind::geothermal) {
      v.initial = per_snapshot(lp, a.id, "initial", T);
      v.booster = per_snapshot(lp, a.id, "booster", T);
      v.final_heat = per_snapshot(lp, a.id, "final", T);
    } else if (a.kind == TechKind::ht_ates) {
      v.charge = per_snapshot(lp, a.id, "charge", T);
      v.discharge = per_snapshot(lp, a.id, "discharge", T);
      v.booster = per_snapshot(lp, a.id, "booster", T);
      v.final_heat = per_snapshot(lp, a.id, "final", T);
      v.level = per_snapshot(lp, a.id, "level", T);
    } else if (a.kind == TechKind::tes_short_term) {
      v.charge = per_snapshot(lp, a.id, "charge", T);
      v.discharge = per_snapshot(lp, a.id, "discharge", T);
      v.level = per_snapshot(lp, a.id, "level", T);
    } else if (a.kind == TechKind::pipeline) {
      v.forward = per_snapshot(lp, a.id, "forward", T);
      v.backward = per_snapshot(lp, a.id, "backward", T);
    }
  }
  return layout;
}

Series booster_ratio(const HeatSystem& sys, const TechnologyAsset& a, const Series& cop) {
  if (!a.spf) throw ConfigurationError("asset " + a.id + ": missing spf");
  Series r(cop.size());
  for (std::size_t t = 0; t < cop.size(); ++t) {
    double denom = *a.spf - cop[t];
    if (!(denom > 0.0)) {
      std::ostringstream msg;
      msg << "asset " << a.id << ": SPF " << *a.spf << " <= COP " << cop[t] << " at snapshot "
          << t << " (" << sys.snapshots.timestamps.at(t) << ")";
      throw ConfigurationError(msg.str());
    }
    r[t] = cop[t] / denom;
  }
  return r;
}

lp::Objective build_objective(const HeatSystem& sys, const VariableLayout& layout,
                              const Series& cop, const ModelOptions& options) {
  const std::size_t T = sys.snapshots.size();
  const auto& W = sys.snapshots.weights;
  lp::Objective obj{"cost", {}, 0.0};
  auto& terms = obj.terms;
  for (std::size_t i = 0; i < sys.assets.size(); ++i) {
    const auto& a = sys.assets[i];
    const auto& v = layout.at(i);
    terms.push_back({v.capacity, annualized_investment(a, options.discount_rate)});

    if (is_converter(a.kind) || is_chp(a.kind)) {
      const auto& price = require_price(sys, a, input_carrier(a.kind));
      const Series* elec = is_chp(a.kind) ? &require_price(sys, a, Carrier::electricity) : nullptr;
      for (std::size_t t = 0; t < T; ++t) {
        double c = W[t] * (price[t] + a.variable_cost);
        if (elec) c -= W[t] * (*elec)[t] * a.efficiency_elec;
        terms.push_back({v.input[t], c});
      }
    } else if (is_availability_generator(a.kind)) {
      const Series* price =
          input_carrier(a.kind) == Carrier::none ? nullptr : &require_price(sys, a, input_carrier(a.kind));
      for (std::size_t t = 0; t < T; ++t)
        terms.push_back({v.heat[t], W[t] * ((price ? (*price)[t] : 0.0) + a.variable_cost)});
    } else if (a.kind == TechKind::geothermal || a.kind == TechKind::ht_ates) {
      const auto& elec = require_price(sys, a, Carrier::electricity);
      const auto& base = a.kind == TechKind::geothermal ? v.final_heat : v.discharge;
      for (std::size_t t = 0; t < T; ++t) {
        terms.push_back({v.booster[t], W[t] * elec[t] / cop[t]});
        if (a.variable_cost != 0.0) terms.push_back({base[t], W[t] * a.variable_cost});
      }
    } else if (a.kind == TechKind::tes_short_term) {
      if (a.variable_cost != 0.0)
        for (std::size_t t = 0; t < T; ++t) terms.push_back({v.discharge[t], W[t] * a.variable_cost});
    } else if (a.kind == TechKind::pipeline) {
      if (a.variable_cost != 0.0)
        for (std::size_t t = 0; t < T; ++t) {
          terms.push_back({v.forward[t], W[t] * a.variable_cost});
          terms.push_back({v.backward[t], W[t] * a.variable_cost});
        }
    }
  }
  return obj;
}

void build_energy_balance(const HeatSystem& sys, const VariableLayout& layout,
                          const Series& cop, lp::LinearProgram& lp) {
  const std::size_t T = sys.snapshots.size();
  for (const auto& node : sys.nodes) {
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<Term> terms;
      for (std::size_t i = 0; i < sys.assets.size(); ++i) {
        const auto& a = sys.assets[i];
        const auto& v = layout.at(i);
        if (a.kind == TechKind::pipeline) {
          const double eta = a.pipeline_efficiency();
          if (a.node == node.id) {
            terms.push_back({v.forward[t], -1.0});
            terms.push_back({v.backward[t], eta});
          } else if (a.to_node == node.id) {
            terms.push_back({v.forward[t], eta});
            terms.push_back({v.backward[t], -1.0});
          }
          continue;
        }
        if (a.node != node.id) continue;
        if (is_converter(a.kind) || is_chp(a.kind)) {
          terms.push_back({v.input[t], conversion(a, cop, t)});
        } else if (is_availability_generator(a.kind)) {
          terms.push_back({v.heat[t], 1.0});
        } else if (a.kind == TechKind::geothermal) {
          terms.push_back({v.final_heat[t], 1.0});
        } else if (a.kind == TechKind::ht_ates) {
          terms.push_back({v.final_heat[t], 1.0});
          terms.push_back({v.charge[t], -1.0});
        } else if (a.kind == TechKind::tes_short_term) {
          terms.push_back({v.discharge[t], 1.0});
          terms.push_back({v.charge[t], -1.0});
        }
      }
      lp.add_constraint(balance_name(node, sys.snapshots, t), std::move(terms), Sense::eq,
                        node.demand[t]);
    }
  }
}

void build_converter(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
                     const Series& cop, lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  const auto& v = layout.at(i);
  for (std::size_t t = 0; t < sys.snapshots.size(); ++t)
    lp.add_constraint(var_name(a.id, "cap", t), {{v.input[t], conversion(a, cop, t)}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
}

void build_chp(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
               lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  if (a.efficiency + a.efficiency_elec > 1.0 + 1e-12)
    throw ConfigurationError("asset " + a.id + ": CHP heat + electric efficiency exceeds 1");
  const auto& v = layout.at(i);
  for (std::size_t t = 0; t < sys.snapshots.size(); ++t)
    lp.add_constraint(var_name(a.id, "cap", t), {{v.input[t], a.efficiency}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
}

void build_geothermal(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
                      const Series& cop, lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  const auto& v = layout.at(i);
  const Series ratio = booster_ratio(sys, a, cop);
  for (std::size_t t = 0; t < sys.snapshots.size(); ++t) {
    lp.add_constraint(var_name(a.id, "sum", t),
                      {{v.final_heat[t], 1.0}, {v.initial[t], -1.0}, {v.booster[t], -1.0}},
                      Sense::eq, 0.0);
    lp.add_constraint(var_name(a.id, "ratio", t), {{v.booster[t], 1.0}, {v.initial[t], -ratio[t]}},
                      Sense::eq, 0.0);
    lp.add_constraint(var_name(a.id, "cap", t), {{v.final_heat[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
  }
}

namespace {

// level_t = level_{t-1} (1 - loss) + eta_c charge_t - discharge_t / eta_d,
// with level_{-1} = level_{T-1}; charge, discharge <= P; level <= h_max P.
void storage_block(const TechnologyAsset& a, const AssetVars& v, std::size_t T,
                   lp::LinearProgram& lp) {
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t prev = t == 0 ? T - 1 : t - 1;
    std::vector<Term> terms{{v.level[t], 1.0},
                            {v.charge[t], -a.efficiency_charge},
                            {v.discharge[t], 1.0 / a.efficiency_discharge}};
    if (prev == t) terms[0].coef -= 1.0 - a.standing_loss;
    else terms.push_back({v.level[prev], -(1.0 - a.standing_loss)});
    lp.add_constraint(var_name(a.id, "level", t), std::move(terms), Sense::eq, 0.0);
    lp.add_constraint(var_name(a.id, "charge_cap", t), {{v.charge[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
    lp.add_constraint(var_name(a.id, "energy_cap", t), {{v.level[t], 1.0}, {v.capacity, -a.h_max}},
                      Sense::le, 0.0);
  }
}

}  // namespace

void build_ht_ates(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
                   const Series& cop, lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  const auto& v = layout.at(i);
  const Series ratio = booster_ratio(sys, a, cop);
  const std::size_t T = sys.snapshots.size();
  storage_block(a, v, T, lp);
  for (std::size_t t = 0; t < T; ++t) {
    lp.add_constraint(var_name(a.id, "sum", t),
                      {{v.final_heat[t], 1.0}, {v.discharge[t], -1.0}, {v.booster[t], -1.0}},
                      Sense::eq, 0.0);
    lp.add_constraint(var_name(a.id, "ratio", t), {{v.booster[t], 1.0}, {v.discharge[t], -ratio[t]}},
                      Sense::eq, 0.0);
    lp.add_constraint(var_name(a.id, "cap", t), {{v.final_heat[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
  }
}

void build_tes(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
               lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  const auto& v = layout.at(i);
  const std::size_t T = sys.snapshots.size();
  storage_block(a, v, T, lp);
  for (std::size_t t = 0; t < T; ++t)
    lp.add_constraint(var_name(a.id, "cap", t), {{v.discharge[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
}

void build_pipeline(const HeatSystem& sys, std::size_t i, const VariableLayout& layout,
                    lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  if (!(a.pipeline_efficiency() > 0.0))
    throw ConfigurationError("asset " + a.id + ": pipeline loses all heat");
  const auto& v = layout.at(i);
  for (std::size_t t = 0; t < sys.snapshots.size(); ++t) {
    lp.add_constraint(var_name(a.id, "cap_fwd", t), {{v.forward[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
    lp.add_constraint(var_name(a.id, "cap_bwd", t), {{v.backward[t], 1.0}, {v.capacity, -1.0}},
                      Sense::le, 0.0);
  }
}

void build_availability_generators(const HeatSystem& sys, std::size_t i,
                                   const VariableLayout& layout, lp::LinearProgram& lp) {
  const auto& a = sys.assets[i];
  if (a.availability.size() != sys.snapshots.size())
    throw ConfigurationError("asset " + a.id + ": missing availability series");
  const auto& v = layout.at(i);
  for (std::size_t t = 0; t < sys.snapshots.size(); ++t)
    lp.add_constraint(var_name(a.id, "cap", t),
                      {{v.heat[t], 1.0}, {v.capacity, -a.availability[t]}}, Sense::le, 0.0);
}

void check_supply_paths(const HeatSystem& sys) {
  std::set<std::string> reached;
  std::deque<std::string> queue;
  for (const auto& a : sys.assets) {
    if (a.kind == TechKind::pipeline || is_storage(a.kind) || a.capacity_bound() <= 0.0) continue;
    if (reached.insert(a.node).second) queue.push_back(a.node);
  }
  while (!queue.empty()) {
    auto n = queue.front();
    queue.pop_front();
    for (const auto& a : sys.assets) {
      if (a.kind != TechKind::pipeline || a.capacity_bound() <= 0.0) continue;
      const std::string* other = a.node == n ? &a.to_node : a.to_node == n ? &a.node : nullptr;
      if (other && reached.insert(*other).second) queue.push_back(*other);
    }
  }
  for (const auto& node : sys.nodes) {
    if (reached.count(node.id)) continue;
    if (std::any_of(node.demand.begin(), node.demand.end(), [](double d) { return d > 0.0; }))
      throw ValidationError("node " + node.id, "positive demand but no supply asset reachable");
  }
}

DhnModel build_model(const HeatSystem& sys, const ModelOptions& options) {
  check_supply_paths(sys);
  DhnModel m;
  m.options = options;
  m.cop = sys.cop_series();
  m.layout = declare_variables(sys, m.lp);
  build_energy_balance(sys, m.layout, m.cop, m.lp);
  for (std::size_t i = 0; i < sys.assets.size(); ++i) {
    const auto kind = sys.assets[i].kind;
    if (is_converter(kind)) build_converter(sys, i, m.layout, m.cop, m.lp);
    else if (is_chp(kind)) build_chp(sys, i, m.layout, m.lp);
    else if (is_availability_generator(kind)) build_availability_generators(sys, i, m.layout, m.lp);
    else if (kind == TechKind::geothermal) build_geothermal(sys, i, m.layout, m.cop, m.lp);
    else if (kind == TechKind::ht_ates) build_ht_ates(sys, i, m.layout, m.cop, m.lp);
    else if (kind == TechKind::tes_short_term) build_tes(sys, i, m.layout, m.lp);
    else if (kind == TechKind::pipeline) build_pipeline(sys, i, m.layout, m.lp);
  }
  m.lp.set_objective(build_objective(sys, m.layout, m.cop, options));
  m.lp.validate();
  return m;
}

DesignResult extract_design(const HeatSystem& sys, const DhnModel& model,
                            const std::vector<double>& x) {
  const std::size_t T = sys.snapshots.size();
  auto val = [&](VarId id) { return std::max(0.0, x.at(id)); };
  auto read = [&](const std::vector<VarId>& ids) {
    Series s(ids.size());
    for (std::size_t t = 0; t < ids.size(); ++t) s[t] = val(ids[t]);
    return s;
  };
  DesignResult d;
  for (std::size_t i = 0; i < sys.assets.size(); ++i) {
    const auto& a = sys.assets[i];
    const auto& v = model.layout.at(i);
    d.assets[a.id] = {a.node, a.kind};
    const double cap = val(v.capacity);
    d.capacities[a.id] = cap;
    if (is_storage(a.kind)) d.energy_capacities[a.id] = a.h_max * cap;
    auto& out = d.dispatch[a.id];
    if (is_converter(a.kind) || is_chp(a.kind)) {
      out["input"] = read(v.input);
      Series heat(T);
      for (std::size_t t = 0; t < T; ++t) heat[t] = conversion(a, model.cop, t) * out["input"][t];
      out["heat"] = std::move(heat);
      if (input_carrier(a.kind) == Carrier::electricity) out["electricity"] = out["input"];
      if (is_chp(a.kind)) {
        Series e(T);
        for (std::size_t t = 0; t < T; ++t) e[t] = a.efficiency_elec * out["input"][t];
        out["electricity_out"] = std::move(e);
      }
    } else if (is_availability_generator(a.kind)) {
      out["heat"] = read(v.heat);
    } else if (a.kind == TechKind::geothermal || a.kind == TechKind::ht_ates) {
      if (a.kind == TechKind::geothermal) {
        out["initial"] = read(v.initial);
      } else {
        out["charge"] = read(v.charge);
        out["discharge"] = read(v.discharge);
        out["level"] = read(v.level);
      }
      out["booster"] = read(v.booster);
      out["final"] = read(v.final_heat);
      Series e(T);
      for (std::size_t t = 0; t < T; ++t) e[t] = out["booster"][t] / model.cop[t];
      out["electricity"] = std::move(e);
    } else if (a.kind == TechKind::tes_short_term) {
      out["charge"] = read(v.charge);
      out["discharge"] = read(v.discharge);
      out["level"] = read(v.level);
    } else if (a.kind == TechKind::pipeline) {
      out["forward"] = read(v.forward);
      out["backward"] = read(v.backward);
    }
  }
  d.cost = evaluate_cost(sys, d, model.options);
  d.electric_profiles = extract_electric_profiles(sys, d);
  return d;
}

CostBreakdown evaluate_cost(const HeatSystem& sys, const DesignResult& d,
                            const ModelOptions& options) {
  const std::size_t T = sys.snapshots.size();
  const auto& W = sys.snapshots.weights;
  const Series cop = sys.cop_series();
  CostBreakdown c;
  for (const auto& a : sys.assets) {
    c.capex += annualized_investment(a, options.discount_rate) * d.capacities.at(a.id);
    auto weighted = [&](const Series& flow, auto&& unit_cost) {
      double s = 0.0;
      for (std::size_t t = 0; t < T && t < flow.size(); ++t) s += W[t] * unit_cost(t) * flow[t];
      return s;
    };
    if (is_converter(a.kind) || is_chp(a.kind)) {
      const auto& price = require_price(sys, a, input_carrier(a.kind));
      const auto& f = series_of(d, a.id, "input");
      c.opex += weighted(f, [&](std::size_t t) { return price[t] + a.variable_cost; });
      if (is_chp(a.kind)) {
        const auto& elec = require_price(sys, a, Carrier::electricity);
        c.chp_revenue += weighted(f, [&](std::size_t t) { return elec[t] * a.efficiency_elec; });
      }
    } else if (is_availability_generator(a.kind)) {
      const Series* price = input_carrier(a.kind) == Carrier::none
                                ? nullptr
                                : &require_price(sys, a, input_carrier(a.kind));
      c.opex += weighted(series_of(d, a.id, "heat"), [&](std::size_t t) {
        return (price ? (*price)[t] : 0.0) + a.variable_cost;
      });
    } else if (a.kind == TechKind::geothermal || a.kind == TechKind::ht_ates) {
      const auto& elec = require_price(sys, a, Carrier::electricity);
      c.opex += weighted(series_of(d, a.id, "booster"), [&](std::size_t t) { return elec[t] / cop[t]; });
      const char* base = a.kind == TechKind::geothermal ? "final" : "discharge";
      c.opex += weighted(series_of(d, a.id, base), [&](std::size_t) { return a.variable_cost; });
    } else if (a.kind == TechKind::tes_short_term) {
      c.opex += weighted(series_of(d, a.id, "discharge"), [&](std::size_t) { return a.variable_cost; });
    } else if (a.kind == TechKind::pipeline) {
      c.opex += weighted(series_of(d, a.id, "forward"), [&](std::size_t) { return a.variable_cost; });
      c.opex += weighted(series_of(d, a.id, "backward"), [&](std::size_t) { return a.variable_cost; });
    }
  }
  c.total = c.capex + c.opex - c.chp_revenue;
  return c;
}

std::map<std::string, ElectricProfile> extract_electric_profiles(const HeatSystem& sys,
                                                                 const DesignResult& d) {
  const std::size_t T = sys.snapshots.size();
  std::map<std::string, ElectricProfile> out;
  for (const auto& n : sys.nodes) {
    if (n.electric_bus && !out.count(*n.electric_bus))
      out[*n.electric_bus] = {Series(T, 0.0), Series(T, 0.0), Series(T, 0.0)};
  }
  for (const auto& a : sys.assets) {
    const bool draws = consumes_electricity(a.kind);
    const bool feeds = is_chp(a.kind);
    if (!draws && !feeds) continue;
    const auto* node = sys.find_node(a.node);
    if (!node || !node->electric_bus)
      throw ValidationError("node " + a.node, "electric asset " + a.id + " has no bus mapping");
    auto& p = out[*node->electric_bus];
    const auto& s = series_of(d, a.id, draws ? "electricity" : "electricity_out");
    for (std::size_t t = 0; t < T && t < s.size(); ++t) (draws ? p.load : p.generation)[t] += s[t];
  }
  for (auto& [bus, p] : out)
    for (std::size_t t = 0; t < T; ++t) p.net[t] = p.load[t] - p.generation[t];
  return out;
}

LeastCostResult solve_least_cost(const HeatSystem& sys, const ModelOptions& options,
                                 const lp::SolveOptions& solve_options) {
  LeastCostResult r;
  r.model = build_model(sys, options);
  r.solution = lp::solve(r.model.lp, solve_options);
  if (r.solution.status != lp::Status::optimal) {
    // Elastic re-solve: free the balance rows and report the one needing the
    // largest correction.
    lp::LinearProgram el;
    for (const auto& v : r.model.lp.variables()) el.add_variable(v.name, v.lower, v.upper);
    lp::Objective pen{"elastic", {}, 0.0};
    for (const auto& c : r.model.lp.constraints()) {
      auto terms = c.terms;
      if (c.name.rfind("balance[", 0) == 0) {
        auto up = el.add_variable(c.name + ".up");
        auto dn = el.add_variable(c.name + ".down");
        terms.push_back({up, 1.0});
        terms.push_back({dn, -1.0});
        pen.terms.push_back({up, 1.0});
        pen.terms.push_back({dn, 1.0});
      }
      el.add_constraint(c.name, std::move(terms), c.sense, c.rhs);
    }
    el.set_objective(pen);
    auto s = lp::solve(el, solve_options);
    std::string worst = "unknown";
    double worst_v = 0.0;
    if (s.status == lp::Status::optimal) {
      for (std::size_t j = r.model.lp.num_variables(); j + 1 < el.num_variables(); j += 2) {
        double v = s.values[j] + s.values[j + 1];
        if (v > worst_v) {
          worst_v = v;
          worst = el.variables()[j].name.substr(0, el.variables()[j].name.size() - 3);
        }
      }
    }
    std::ostringstream msg;
    msg << "least-cost problem " << lp::to_string(r.solution.status) << "; worst balance row "
        << worst << " short by " << worst_v << " MW";
    throw SolverError(msg.str());
  }
  r.design = extract_design(sys, r.model, r.solution.values);
  r.least_cost = r.solution.objective;
  return r;
}

bool AuditReport::ok(double tol_mw, double tol) const {
  return balance <= tol_mw && capacity <= tol && coupling_ratio <= tol && spf_identity <= tol &&
         chp_ratio <= tol && storage_cycle <= tol_mw && energy_power <= tol;
}

AuditReport audit_design(const HeatSystem& sys, const DesignResult& d) {
  const std::size_t T = sys.snapshots.size();
  const Series cop = sys.cop_series();
  AuditReport rep;
  std::map<std::string, Series> supply;
  for (const auto& n : sys.nodes) supply[n.id] = Series(T, 0.0);
  auto worse = [](double& slot, double v) { slot = std::max(slot, v); };

  for (const auto& a : sys.assets) {
    const double cap = d.capacities.at(a.id);
    worse(rep.capacity, cap - a.capacity_bound());
    auto S = [&](const char* name) -> const Series& { return series_of(d, a.id, name); };
    auto& node_supply = supply[a.node];
    if (is_converter(a.kind) || is_chp(a.kind)) {
      const auto& f = S("input");
      for (std::size_t t = 0; t < T; ++t) {
        double eta = a.kind == TechKind::heat_pump ? cop[t] : a.efficiency;
        node_supply[t] += eta * f[t];
        worse(rep.capacity, eta * f[t] - cap);
      }
      if (is_chp(a.kind)) {
        const auto& e = S("electricity_out");
        const auto& h = S("heat");
        for (std::size_t t = 0; t < T; ++t)
          if (h[t] > 1e-6)
            worse(rep.chp_ratio, std::abs(e[t] / h[t] - a.efficiency_elec / a.efficiency));
      }
    } else if (is_availability_generator(a.kind)) {
      const auto& g = S("heat");
      for (std::size_t t = 0; t < T; ++t) {
        node_supply[t] += g[t];
        worse(rep.capacity, g[t] - a.availability_at(t) * cap);
      }
    } else if (a.kind == TechKind::geothermal || a.kind == TechKind::ht_ates) {
      const bool geo = a.kind == TechKind::geothermal;
      const auto& base = geo ? S("initial") : S("discharge");
      const auto& b = S("booster");
      const auto& fin = S("final");
      for (std::size_t t = 0; t < T; ++t) {
        const double ratio = cop[t] / (*a.spf - cop[t]);
        if (base[t] > 1e-6) worse(rep.coupling_ratio, std::abs(b[t] / base[t] - ratio));
        if (b[t] > 1e-6 || fin[t] > 1e-6)
          worse(rep.spf_identity, std::abs(fin[t] - *a.spf * b[t] / cop[t]));
        worse(rep.balance, std::abs(fin[t] - base[t] - b[t]));
        node_supply[t] += fin[t];
        worse(rep.capacity, fin[t] - cap);
      }
    } else if (a.kind == TechKind::pipeline) {
      const auto& fw = S("forward");
      const auto& bw = S("backward");
      const double eta = a.pipeline_efficiency();
      auto& to = supply[a.to_node];
      for (std::size_t t = 0; t < T; ++t) {
        node_supply[t] += eta * bw[t] - fw[t];
        to[t] += eta * fw[t] - bw[t];
        worse(rep.capacity, std::max(fw[t], bw[t]) - cap);
      }
    }
    if (is_storage(a.kind)) {
      const auto& ch = S("charge");
      const auto& dis = S("discharge");
      const auto& lev = S("level");
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t prev = t == 0 ? T - 1 : t - 1;
        double expect = lev[prev] * (1.0 - a.standing_loss) + a.efficiency_charge * ch[t] -
                        dis[t] / a.efficiency_discharge;
        worse(rep.storage_cycle, std::abs(lev[t] - expect));
        worse(rep.capacity, ch[t] - cap);
        worse(rep.capacity, lev[t] - a.h_max * cap);
        node_supply[t] -= ch[t];
        if (a.kind == TechKind::tes_short_term) {
          node_supply[t] += dis[t];
          worse(rep.capacity, dis[t] - cap);
        }
      }
      auto it = d.energy_capacities.find(a.id);
      if (it == d.energy_capacities.end()) rep.notes.push_back("no energy capacity for " + a.id);
      else worse(rep.energy_power, std::abs(it->second - a.h_max * cap));
    }
  }
  for (const auto& n : sys.nodes)
    for (std::size_t t = 0; t < T; ++t)
      worse(rep.balance, std::abs(supply[n.id][t] - n.demand[t]));
  return rep;
}

nlohmann::json to_json(const DesignResult& d) {
  nlohmann::json j;
  j["assets"] = nlohmann::json::object();
  for (const auto& [id, info] : d.assets)
    j["assets"][id] = {{"node", info.node}, {"kind", std::string(to_string(info.kind))}};
  j["capacities"] = d.capacities;
  j["energy_capacities"] = d.energy_capacities;
  j["dispatch"] = d.dispatch;
  j["cost_breakdown"] = {{"capex", d.cost.capex},
                         {"opex", d.cost.opex},
                         {"chp_revenue", d.cost.chp_revenue},
                         {"total", d.cost.total}};
  j["electric_profiles"] = nlohmann::json::object();
  for (const auto& [bus, p] : d.electric_profiles)
    j["electric_profiles"][bus] = {{"load", p.load}, {"generation", p.generation}, {"net", p.net}};
  return j;
}

DesignResult design_from_json(const nlohmann::json& j) {
  DesignResult d;
  for (const auto& [id, info] : j.at("assets").items()) {
    auto kind = parse_tech_kind(info.at("kind").get<std::string>());
    if (!kind) throw ValidationError("design " + id, "unknown technology kind");
    d.assets[id] = {info.at("node").get<std::string>(), *kind};
  }
  d.capacities = j.at("capacities").get<std::map<std::string, double>>();
  d.energy_capacities = j.at("energy_capacities").get<std::map<std::string, double>>();
  d.dispatch = j.at("dispatch").get<std::map<std::string, std::map<std::string, Series>>>();
  const auto& c = j.at("cost_breakdown");
  d.cost = {c.at("capex").get<double>(), c.at("opex").get<double>(),
            c.at("chp_revenue").get<double>(), c.at("total").get<double>()};
  for (const auto& [bus, p] : j.at("electric_profiles").items())
    d.electric_profiles[bus] = {p.at("load").get<Series>(), p.at("generation").get<Series>(),
                                p.at("net").get<Series>()};
  return d;
}

}  // namespace dhnplan
