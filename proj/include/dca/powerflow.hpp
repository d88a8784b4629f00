#pragma once

// Newton-Raphson AC power flow (polar, full Jacobian, sparse LU), link-line
// injection evaluation and operating-limit checks.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "dca/admittance.hpp"
#include "dca/grid.hpp"
#include "dca/partition.hpp"

namespace dca {

struct NewtonOptions {
  double tol = 1e-8;   // per-unit mismatch tolerance
  int max_iter = 30;
};

struct PowerFlowState {
  std::vector<double> v_mag;  // aligned with the bus index
  std::vector<double> v_ang;
  int iterations = 0;
  bool converged = false;
  double max_mismatch = 0.0;
};

namespace detail {

struct Injections {
  Eigen::VectorXd p, q;
};

inline Injections calc_injections(const SparseComplex& Y,
                                  const std::vector<double>& v,
                                  const std::vector<double>& th) {
  int n = static_cast<int>(v.size());
  Injections inj{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int k = 0; k < Y.outerSize(); ++k) {
    for (SparseComplex::InnerIterator it(Y, k); it; ++it) {
      int i = static_cast<int>(it.row());
      int j = static_cast<int>(it.col());
      double g = it.value().real(), b = it.value().imag();
      double d = th[i] - th[j];
      inj.p[i] += v[i] * v[j] * (g * std::cos(d) + b * std::sin(d));
      inj.q[i] += v[i] * v[j] * (g * std::sin(d) - b * std::cos(d));
    }
  }
  return inj;
}

}  // namespace detail

// Generic polar Newton-Raphson. `roles` are the effective bus types for this
// solve (exactly one Slack). PV and Slack magnitudes are held at `start.v_mag`;
// the slack angle is held at `start.v_ang[slack]`.
inline PowerFlowState solve_newton(const SparseComplex& Y,
                                   const std::vector<BusKind>& roles,
                                   const Eigen::VectorXd& p_sched,
                                   const Eigen::VectorXd& q_sched,
                                   std::vector<double> v,
                                   std::vector<double> th,
                                   const NewtonOptions& opts = {}) {
  const int n = static_cast<int>(roles.size());
  std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
  int n_ang = 0;
  for (int i = 0; i < n; ++i)
    if (roles[i] != BusKind::Slack) ang_pos[i] = n_ang++;
  int n_mag = 0;
  for (int i = 0; i < n; ++i)
    if (roles[i] == BusKind::PQ) mag_pos[i] = n_mag++;
  const int dim = n_ang + n_mag;

  PowerFlowState st;
  st.v_mag = v;
  st.v_ang = th;

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    auto inj = detail::calc_injections(Y, v, th);
    Eigen::VectorXd mism(dim);
    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) mism[ang_pos[i]] = p_sched[i] - inj.p[i];
      if (mag_pos[i] >= 0) mism[n_ang + mag_pos[i]] = q_sched[i] - inj.q[i];
    }
    double max_mism = dim > 0 ? mism.cwiseAbs().maxCoeff() : 0.0;
    st.v_mag = v;
    st.v_ang = th;
    st.iterations = iter;
    st.max_mismatch = max_mism;
    if (max_mism <= opts.tol) {
      st.converged = true;
      return st;
    }
    if (iter == opts.max_iter) break;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(Y.nonZeros() * 4);
    for (int k = 0; k < Y.outerSize(); ++k) {
      for (SparseComplex::InnerIterator it(Y, k); it; ++it) {
        int i = static_cast<int>(it.row());
        int j = static_cast<int>(it.col());
        double g = it.value().real(), b = it.value().imag();
        double dPdth, dPdv, dQdth, dQdv;
        if (i == j) {
          dPdth = -inj.q[i] - b * v[i] * v[i];
          dPdv = inj.p[i] / v[i] + g * v[i];
          dQdth = inj.p[i] - g * v[i] * v[i];
          dQdv = inj.q[i] / v[i] - b * v[i];
        } else {
          double d = th[i] - th[j];
          double c = std::cos(d), s = std::sin(d);
          dPdth = v[i] * v[j] * (g * s - b * c);
          dPdv = v[i] * (g * c + b * s);
          dQdth = -v[i] * v[j] * (g * c + b * s);
          dQdv = v[i] * (g * s - b * c);
        }
        if (ang_pos[i] >= 0 && ang_pos[j] >= 0) trip.emplace_back(ang_pos[i], ang_pos[j], dPdth);
        if (ang_pos[i] >= 0 && mag_pos[j] >= 0)
          trip.emplace_back(ang_pos[i], n_ang + mag_pos[j], dPdv);
        if (mag_pos[i] >= 0 && ang_pos[j] >= 0)
          trip.emplace_back(n_ang + mag_pos[i], ang_pos[j], dQdth);
        if (mag_pos[i] >= 0 && mag_pos[j] >= 0)
          trip.emplace_back(n_ang + mag_pos[i], n_ang + mag_pos[j], dQdv);
      }
    }
    Eigen::SparseMatrix<double> J(dim, dim);
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw SingularJacobianError("power flow Jacobian factorization failed");
    Eigen::VectorXd dx = lu.solve(mism);
    if (!dx.allFinite())
      throw SingularJacobianError("power flow Jacobian solve produced non-finite step");
    for (int i = 0; i < n; ++i) {
      if (ang_pos[i] >= 0) th[i] += dx[ang_pos[i]];
      if (mag_pos[i] >= 0) v[i] += dx[n_ang + mag_pos[i]];
    }
  }
  st.converged = false;
  return st;
}

struct RegionSolution {
  std::vector<double> v_mag;  // aligned with region.buses order
  std::vector<double> v_ang;
  std::vector<Complex> boundary_voltages;  // ordered as boundary_bus_ids
  double slack_p = 0.0;  // realized slack active power
  double slack_q = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_mismatch = 0.0;
};

// Region power flow with trial boundary injections added at boundary buses
// (treated as PQ) and the slack held at (V_i0, slack_angle).
inline RegionSolution solve_region_power_flow(
    const RegionGrid& region,
    const std::vector<double>& boundary_p,
    const std::vector<double>& boundary_q,
    double slack_angle,
    const std::optional<PowerFlowState>& start = std::nullopt,
    const NewtonOptions& opts = {}) {
  if (boundary_p.size() != region.boundary_bus_ids.size() ||
      boundary_q.size() != region.boundary_bus_ids.size())
    throw LayoutMismatchError("boundary injection vectors do not match |B_i|");

  BusIndex index(region.buses);
  SparseComplex Y = build_admittance_matrix(region.buses, region.branches, index);
  const int n = index.size();

  std::vector<BusKind> roles(n);
  Eigen::VectorXd p_sched(n), q_sched(n);
  std::vector<double> v(n), th(n);
  for (int i = 0; i < n; ++i) {
    const Bus& b = region.buses[i];
    roles[i] = b.kind;
    p_sched[i] = b.p_inj;
    q_sched[i] = b.q_inj;
    v[i] = (b.kind == BusKind::PQ) ? 1.0 : b.v_mag;
    th[i] = slack_angle;
  }
  for (size_t k = 0; k < region.boundary_bus_ids.size(); ++k) {
    int i = index.at(region.boundary_bus_ids[k]);
    roles[i] = BusKind::PQ;  // boundary nodes are PQ during the region solve
    p_sched[i] += boundary_p[k];
    q_sched[i] += boundary_q[k];
    v[i] = 1.0;
  }
  int slack_idx = index.at(region.slack_bus);
  roles[slack_idx] = BusKind::Slack;
  v[slack_idx] = region.slack_v0;
  th[slack_idx] = slack_angle;
  if (start) {
    v = start->v_mag;
    th = start->v_ang;
    v[slack_idx] = region.slack_v0;
    th[slack_idx] = slack_angle;
  }

  PowerFlowState st = solve_newton(Y, roles, p_sched, q_sched, v, th, opts);

  RegionSolution sol;
  sol.v_mag = st.v_mag;
  sol.v_ang = st.v_ang;
  sol.iterations = st.iterations;
  sol.converged = st.converged;
  sol.max_mismatch = st.max_mismatch;
  for (int bid : region.boundary_bus_ids) {
    int i = index.at(bid);
    sol.boundary_voltages.push_back(std::polar(st.v_mag[i], st.v_ang[i]));
  }
  auto inj = detail::calc_injections(Y, st.v_mag, st.v_ang);
  sol.slack_p = inj.p[slack_idx];
  sol.slack_q = inj.q[slack_idx];
  return sol;
}

struct SystemSolution {
  BusIndex index;
  PowerFlowState state;
};

// Whole-system Newton-Raphson on the unpartitioned case; the single
// Slack-kind bus is the global reference. Used for validation and fixtures.
inline SystemSolution solve_centralized_power_flow(const GridCase& gc,
                                                   const NewtonOptions& opts = {}) {
  BusIndex index(gc.buses);
  SparseComplex Y = build_admittance_matrix(gc.buses, gc.branches, index);
  const int n = index.size();
  int slack_count = 0;
  std::vector<BusKind> roles(n);
  Eigen::VectorXd p_sched(n), q_sched(n);
  std::vector<double> v(n), th(n);
  for (int i = 0; i < n; ++i) {
    const Bus& b = gc.buses[i];
    roles[i] = b.kind;
    if (b.kind == BusKind::Slack) ++slack_count;
    p_sched[i] = b.p_inj;
    q_sched[i] = b.q_inj;
    v[i] = (b.kind == BusKind::PQ) ? 1.0 : b.v_mag;
    th[i] = (b.kind == BusKind::Slack) ? b.v_ang : 0.0;
  }
  if (slack_count != 1)
    throw SlackError("centralized solve needs exactly one Slack bus, found " +
                     std::to_string(slack_count));
  PowerFlowState st = solve_newton(Y, roles, p_sched, q_sched, v, th, opts);
  if (!st.converged)
    throw NonConvergence("centralized power flow did not converge; max mismatch " +
                         std::to_string(st.max_mismatch));
  return SystemSolution{std::move(index), std::move(st)};
}

// Max |dP|,|dQ| of a full-system voltage state against the case's scheduled
// injections (P at non-slack buses, Q at PQ buses).
inline double centralized_mismatch(const GridCase& gc, const BusIndex& index,
                                   const std::vector<double>& v_mag,
                                   const std::vector<double>& v_ang) {
  SparseComplex Y = build_admittance_matrix(gc.buses, gc.branches, index);
  auto inj = detail::calc_injections(Y, v_mag, v_ang);
  double worst = 0.0;
  for (size_t i = 0; i < gc.buses.size(); ++i) {
    const Bus& b = gc.buses[i];
    if (b.kind != BusKind::Slack)
      worst = std::max(worst, std::abs(b.p_inj - inj.p[i]));
    if (b.kind == BusKind::PQ)
      worst = std::max(worst, std::abs(b.q_inj - inj.q[i]));
  }
  return worst;
}

// Complex power leaving each end of a branch into the line (pi-model).
struct BranchFlow {
  Complex from;  // S injected at the from bus into the branch
  Complex to;
};

inline BranchFlow branch_flow(const Branch& br, Complex u_from, Complex u_to) {
  auto st = branch_stamp(br);
  Complex i_from = st.ff * u_from + st.ft * u_to;
  Complex i_to = st.tf * u_from + st.tt * u_to;
  return BranchFlow{u_from * std::conj(i_from), u_to * std::conj(i_to)};
}

// Link-side boundary injections (Eq. 3 counterpart): per boundary bus, the
// sum over incident link branches of power flowing from the bus into the
// branch. Voltages are keyed region -> bus -> U.
inline std::map<int, std::vector<Complex>> evaluate_link_injections(
    const LinkPartition& link,
    const std::map<int, std::vector<int>>& boundary_map,
    const std::map<int, std::map<int, Complex>>& voltages) {
  auto voltage_at = [&](int region, int bus) -> Complex {
    auto rit = voltages.find(region);
    if (rit != voltages.end()) {
      auto bit = rit->second.find(bus);
      if (bit != rit->second.end()) return bit->second;
    }
    throw MissingVoltageError("no voltage for boundary bus " + std::to_string(bus) +
                              " of region " + std::to_string(region));
  };

  std::map<int, std::map<int, Complex>> acc;
  for (auto& [region, buses] : boundary_map)
    for (int b : buses) acc[region][b] = Complex(0.0, 0.0);

  for (const auto& br : link.branches) {
    const auto& ends = link.end_map.at(br.id);
    Complex uf = voltage_at(ends.first.region, ends.first.bus);
    Complex ut = voltage_at(ends.second.region, ends.second.bus);
    auto flow = branch_flow(br, uf, ut);
    acc[ends.first.region][ends.first.bus] += flow.from;
    acc[ends.second.region][ends.second.bus] += flow.to;
  }

  std::map<int, std::vector<Complex>> out;
  for (auto& [region, buses] : boundary_map) {
    auto& vec = out[region];
    for (int b : buses) vec.push_back(acc[region][b]);
  }
  return out;
}

enum class ViolationKind { BranchActiveFlow, VoltageHigh, VoltageLow };

inline std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::BranchActiveFlow: return "BranchActiveFlow";
    case ViolationKind::VoltageHigh: return "VoltageHigh";
    case ViolationKind::VoltageLow: return "VoltageLow";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  int element_id;
  int region;
  double value;
  double limit;
  int contingency_id;  // outaged branch id, -1 for base case

  // identity for "new violation" bookkeeping
  auto key() const { return std::tuple(static_cast<int>(kind), element_id, region); }
};

// Branch-flow and voltage checks over one region's converged solution.
// Voltages come in aligned with region.buses.
inline std::vector<Violation> check_violations(const RegionGrid& region,
                                               const std::vector<double>& v_mag,
                                               const std::vector<double>& v_ang,
                                               int contingency_id) {
  BusIndex index(region.buses);
  std::vector<Violation> out;
  for (const auto& br : region.branches) {
    if (!br.p_max) continue;
    Complex uf = std::polar(v_mag[index.at(br.from_bus)], v_ang[index.at(br.from_bus)]);
    Complex ut = std::polar(v_mag[index.at(br.to_bus)], v_ang[index.at(br.to_bus)]);
    auto flow = branch_flow(br, uf, ut);
    double p = std::max(std::abs(flow.from.real()), std::abs(flow.to.real()));
    if (p > *br.p_max)
      out.push_back({ViolationKind::BranchActiveFlow, br.id, region.region_index, p,
                     *br.p_max, contingency_id});
  }
  for (size_t i = 0; i < region.buses.size(); ++i) {
    const Bus& b = region.buses[i];
    if (v_mag[i] > b.v_max)
      out.push_back({ViolationKind::VoltageHigh, b.id, region.region_index, v_mag[i],
                     b.v_max, contingency_id});
    else if (v_mag[i] < b.v_min)
      out.push_back({ViolationKind::VoltageLow, b.id, region.region_index, v_mag[i],
                     b.v_min, contingency_id});
  }
  std::sort(out.begin(), out.end(),
            [](const Violation& a, const Violation& b) { return a.key() < b.key(); });
  return out;
}

// Link-branch flow checks (region 0 = link partition).
inline std::vector<Violation> check_link_violations(
    const LinkPartition& link, const std::map<int, std::map<int, Complex>>& voltages,
    int contingency_id) {
  std::vector<Violation> out;
  for (const auto& br : link.branches) {
    if (!br.p_max) continue;
    const auto& ends = link.end_map.at(br.id);
    Complex uf = voltages.at(ends.first.region).at(ends.first.bus);
    Complex ut = voltages.at(ends.second.region).at(ends.second.bus);
    auto flow = branch_flow(br, uf, ut);
    double p = std::max(std::abs(flow.from.real()), std::abs(flow.to.real()));
    if (p > *br.p_max)
      out.push_back({ViolationKind::BranchActiveFlow, br.id, 0, p, *br.p_max,
                     contingency_id});
  }
  std::sort(out.begin(), out.end(),
            [](const Violation& a, const Violation& b) { return a.key() < b.key(); });
  return out;
}

}  // namespace dca
