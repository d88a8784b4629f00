#pragma once

// Boundary unknown vector layout and residual assembly: the distributed
// power flow is F(x) = 0 over boundary injections plus non-dominant slack
// angles. Only boundary quantities cross region boundaries.

#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dca/jfng.hpp"
#include "dca/partition.hpp"
#include "dca/powerflow.hpp"

namespace dca {

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Slot layout: [P_B1 | Q_B1 | P_B2 | Q_B2 | ... | theta_i0 per non-dominant
// region, regions ascending]. Identical on every participant of a session.
struct BoundaryLayout {
  struct RegionSlice {
    int region = 0;
    std::vector<int> boundary_bus_ids;  // ascending
    int p_offset = 0;                   // start of the P block
    int q_offset = 0;                   // start of the Q block
  };

  std::vector<RegionSlice> slices;       // regions ascending
  std::vector<int> theta_regions;        // non-dominant regions ascending
  int theta_offset = 0;
  int dim = 0;
  int dominant_region = 0;

  static BoundaryLayout from_system(const PartitionedSystem& sys) {
    BoundaryLayout layout;
    int off = 0;
    for (const auto& rg : sys.regions) {
      RegionSlice slice;
      slice.region = rg.region_index;
      slice.boundary_bus_ids = rg.boundary_bus_ids;
      slice.p_offset = off;
      off += static_cast<int>(slice.boundary_bus_ids.size());
      slice.q_offset = off;
      off += static_cast<int>(slice.boundary_bus_ids.size());
      layout.slices.push_back(std::move(slice));
      if (rg.is_dominant)
        layout.dominant_region = rg.region_index;
      else
        layout.theta_regions.push_back(rg.region_index);
    }
    layout.theta_offset = off;
    layout.dim = off + static_cast<int>(layout.theta_regions.size());
    return layout;
  }

  const RegionSlice& slice(int region) const {
    for (const auto& s : slices)
      if (s.region == region) return s;
    throw LayoutMismatchError("region " + std::to_string(region) + " not in layout");
  }

  int theta_slot(int region) const {
    for (size_t i = 0; i < theta_regions.size(); ++i)
      if (theta_regions[i] == region) return theta_offset + static_cast<int>(i);
    throw LayoutMismatchError("region " + std::to_string(region) +
                              " has no angle unknown (dominant slack)");
  }

  double theta_of(const Vector& x, int region, double dominant_theta) const {
    return region == dominant_region ? dominant_theta : x[theta_slot(region)];
  }

  std::string descriptor() const {
    std::ostringstream os;
    for (const auto& s : slices) {
      os << "R" << s.region << ":";
      for (int b : s.boundary_bus_ids) os << b << ",";
      os << ";";
    }
    os << "theta:";
    for (int r : theta_regions) os << r << ",";
    os << "dom:" << dominant_region;
    return os.str();
  }

  uint64_t hash() const { return fnv1a(descriptor()); }
};

// What a region sends back after one inner solve: boundary quantities only.
struct RegionReply {
  std::vector<Complex> boundary_voltages;  // ordered as the layout slice
  double slack_p = 0.0;
  double slack_q = 0.0;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
};

struct RegionRequest {
  std::vector<double> boundary_p;
  std::vector<double> boundary_q;
  double slack_angle = 0.0;
};

// Pluggable region solve: local call or a coordination-layer round trip.
// One residual evaluation puts every region in flight at once.
class RegionBackend {
 public:
  virtual ~RegionBackend() = default;
  virtual std::map<int, RegionReply> solve_all(
      const std::map<int, RegionRequest>& requests, bool final_round) = 0;

  RegionReply solve(int region, const std::vector<double>& boundary_p,
                    const std::vector<double>& boundary_q, double slack_angle) {
    std::map<int, RegionRequest> req;
    req[region] = RegionRequest{boundary_p, boundary_q, slack_angle};
    return solve_all(req, false).at(region);
  }
};

// Direct in-process solves against a (possibly outage-modified) system.
class LocalRegionBackend : public RegionBackend {
 public:
  explicit LocalRegionBackend(const PartitionedSystem& sys, NewtonOptions opts = {})
      : sys_(sys), opts_(opts) {}

  std::map<int, RegionReply> solve_all(const std::map<int, RegionRequest>& requests,
                                       bool /*final_round*/) override {
    std::map<int, RegionReply> replies;
    for (const auto& [region, req] : requests) {
      const RegionGrid& rg = sys_.region(region);
      RegionSolution sol = solve_region_power_flow(rg, req.boundary_p, req.boundary_q,
                                                   req.slack_angle, std::nullopt, opts_);
      RegionReply reply;
      reply.boundary_voltages = sol.boundary_voltages;
      reply.slack_p = sol.slack_p;
      reply.slack_q = sol.slack_q;
      reply.converged = sol.converged;
      reply.iterations = sol.iterations;
      reply.max_mismatch = sol.max_mismatch;
      replies[region] = std::move(reply);
    }
    return replies;
  }

 private:
  const PartitionedSystem& sys_;
  NewtonOptions opts_;
};

// Splits x into per-region (P_B, Q_B, theta0) requests.
inline std::map<int, RegionRequest> boundary_requests(const Vector& x,
                                                      const BoundaryLayout& layout,
                                                      const PartitionedSystem& sys) {
  if (x.size() != layout.dim)
    throw LayoutMismatchError("boundary vector has dimension " +
                              std::to_string(x.size()) + ", layout needs " +
                              std::to_string(layout.dim));
  double dominant_theta = 0.0;
  for (const auto& rg : sys.regions)
    if (rg.is_dominant) dominant_theta = rg.slack_theta0;
  std::map<int, RegionRequest> requests;
  for (const auto& rg : sys.regions) {
    const auto& slice = layout.slice(rg.region_index);
    int nb = static_cast<int>(slice.boundary_bus_ids.size());
    RegionRequest req;
    req.boundary_p.resize(nb);
    req.boundary_q.resize(nb);
    for (int k = 0; k < nb; ++k) {
      req.boundary_p[k] = x[slice.p_offset + k];
      req.boundary_q[k] = x[slice.q_offset + k];
    }
    req.slack_angle = layout.theta_of(x, rg.region_index, dominant_theta);
    requests[rg.region_index] = std::move(req);
  }
  return requests;
}

// Assembles F(x): region solves with the x slices, boundary-voltage exchange,
// link injections, then dP_B = P_B + P_B~, dQ_B = Q_B + Q_B~ and
// dP_i0 = P_i0 - P~_i0 for non-dominant slacks.
inline Vector evaluate_boundary_residual(const Vector& x, const BoundaryLayout& layout,
                                         const PartitionedSystem& sys,
                                         RegionBackend& backend) {
  auto requests = boundary_requests(x, layout, sys);
  std::map<int, std::map<int, Complex>> voltages;
  std::map<int, RegionReply> replies = backend.solve_all(requests, false);
  for (const auto& rg : sys.regions) {
    const auto& slice = layout.slice(rg.region_index);
    const RegionReply& reply = replies.at(rg.region_index);
    if (!reply.converged)
      throw RegionSolveError(rg.region_index,
                             "region " + std::to_string(rg.region_index) +
                                 " power flow did not converge at probe point");
    auto& vmap = voltages[rg.region_index];
    for (size_t k = 0; k < slice.boundary_bus_ids.size(); ++k)
      vmap[slice.boundary_bus_ids[k]] = reply.boundary_voltages[k];
  }

  auto link_inj = evaluate_link_injections(sys.link_partition, sys.boundary_map, voltages);

  Vector residual = Vector::Zero(layout.dim);
  for (const auto& rg : sys.regions) {
    const auto& slice = layout.slice(rg.region_index);
    const auto& inj = link_inj.at(rg.region_index);
    int nb = static_cast<int>(slice.boundary_bus_ids.size());
    for (int k = 0; k < nb; ++k) {
      residual[slice.p_offset + k] = x[slice.p_offset + k] + inj[k].real();
      residual[slice.q_offset + k] = x[slice.q_offset + k] + inj[k].imag();
    }
    if (!rg.is_dominant)
      residual[layout.theta_slot(rg.region_index)] =
          rg.slack_p0 - replies.at(rg.region_index).slack_p;
  }
  return residual;
}

// Full per-region solutions at a given x, for stitching and violation checks.
struct DistributedSolution {
  std::map<int, RegionSolution> regions;
  std::map<int, std::map<int, Complex>> boundary_voltages;
};

inline DistributedSolution solve_all_regions(const Vector& x, const BoundaryLayout& layout,
                                             const PartitionedSystem& sys,
                                             const NewtonOptions& opts = {}) {
  DistributedSolution out;
  double dominant_theta = 0.0;
  for (const auto& rg : sys.regions)
    if (rg.is_dominant) dominant_theta = rg.slack_theta0;
  for (const auto& rg : sys.regions) {
    const auto& slice = layout.slice(rg.region_index);
    int nb = static_cast<int>(slice.boundary_bus_ids.size());
    std::vector<double> pb(nb), qb(nb);
    for (int k = 0; k < nb; ++k) {
      pb[k] = x[slice.p_offset + k];
      qb[k] = x[slice.q_offset + k];
    }
    double theta = layout.theta_of(x, rg.region_index, dominant_theta);
    RegionSolution sol = solve_region_power_flow(rg, pb, qb, theta, std::nullopt, opts);
    auto& vmap = out.boundary_voltages[rg.region_index];
    for (int k = 0; k < nb; ++k) vmap[slice.boundary_bus_ids[k]] = sol.boundary_voltages[k];
    out.regions[rg.region_index] = std::move(sol);
  }
  return out;
}

}  // namespace dca
