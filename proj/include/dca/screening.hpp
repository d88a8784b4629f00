#pragma once

// Distributed CCS screening: nodal impedance matrix, electrical distances to
// the boundary, line grouping by ranked anchor node and the adjacent-group
// stopping criterion.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dca/admittance.hpp"
#include "dca/partition.hpp"
#include "dca/powerflow.hpp"

namespace dca {

// Inverse of the region admittance matrix with the slack row/column removed
// (slack = ground reference). Built once per session.
struct ImpedanceMatrix {
  Eigen::MatrixXcd z;          // over non-slack nodes
  std::vector<int> node_ids;   // ascending, excludes the slack
  std::map<int, int> index_of;
  int slack_bus = 0;

  bool is_slack(int node) const { return node == slack_bus; }

  int at(int node) const {
    auto it = index_of.find(node);
    if (it == index_of.end())
      throw UnknownNodeError("node " + std::to_string(node) +
                             " not in impedance matrix");
    return it->second;
  }
};

inline ImpedanceMatrix build_impedance_matrix(const RegionGrid& region) {
  BusIndex full(region.buses);
  SparseComplex Y = build_admittance_matrix(region.buses, region.branches, full);

  ImpedanceMatrix out;
  out.slack_bus = region.slack_bus;
  std::vector<int> keep;
  for (const auto& b : region.buses) {
    if (b.id == region.slack_bus) continue;
    out.index_of[b.id] = static_cast<int>(out.node_ids.size());
    out.node_ids.push_back(b.id);
    keep.push_back(full.at(b.id));
  }
  const int n = static_cast<int>(keep.size());
  Eigen::MatrixXcd y_reduced(n, n);
  Eigen::MatrixXcd dense = Eigen::MatrixXcd(Y);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y_reduced(i, j) = dense(keep[i], keep[j]);

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(y_reduced);
  if (!lu.isInvertible())
    throw SingularMatrixError("region " + std::to_string(region.region_index) +
                              " admittance matrix is singular (island off the slack)");
  out.z = lu.inverse();
  return out;
}

// Thevenin impedance magnitude |Z_ii + Z_jj - 2 Z_ij|; the slack is the
// ground reference, so d(slack, j) = |Z_jj|.
inline double electrical_distance_pair(const ImpedanceMatrix& zm, int i, int j) {
  if (i == j) return 0.0;
  if (zm.is_slack(i)) return std::abs(zm.z(zm.at(j), zm.at(j)));
  if (zm.is_slack(j)) return std::abs(zm.z(zm.at(i), zm.at(i)));
  int a = zm.at(i), b = zm.at(j);
  return std::abs(zm.z(a, a) + zm.z(b, b) - 2.0 * zm.z(a, b));
}

enum class DistanceFormula { Thevenin, TransferMagnitude };

inline double electrical_distance(const ImpedanceMatrix& zm, int node,
                                  const std::vector<int>& boundary,
                                  DistanceFormula formula = DistanceFormula::Thevenin) {
  if (boundary.empty()) throw UnknownNodeError("empty boundary set");
  double best = -1.0;
  for (int j : boundary) {
    double d;
    if (formula == DistanceFormula::Thevenin) {
      d = electrical_distance_pair(zm, node, j);
    } else {
      // raw transfer impedance |Z_ij|, kept for comparison; the slack keeps
      // the driving-point convention
      if (node == j)
        d = 0.0;
      else if (zm.is_slack(node))
        d = std::abs(zm.z(zm.at(j), zm.at(j)));
      else if (zm.is_slack(j))
        d = std::abs(zm.z(zm.at(node), zm.at(node)));
      else
        d = std::abs(zm.z(zm.at(node), zm.at(j)));
    }
    if (best < 0 || d < best) best = d;
  }
  return best;
}

struct DistanceRanking {
  int region = 0;
  std::vector<std::pair<int, double>> entries;  // (node, distance) ascending
};

struct ContingencyGroup {
  int anchor_node = 0;
  double distance = 0.0;
  std::vector<int> member_branch_ids;
  int region = 0;  // 0 = link partition
};

struct RankAndGroups {
  DistanceRanking ranking;
  std::vector<ContingencyGroup> groups;
};

// Nodes ranked ascending by distance to the nearest boundary node (ties by
// node id); each node claims its still-unclaimed incident in-service lines.
inline RankAndGroups rank_and_group(const RegionGrid& region, const ImpedanceMatrix& zm,
                                    const std::vector<int>& boundary,
                                    DistanceFormula formula = DistanceFormula::Thevenin) {
  RankAndGroups out;
  out.ranking.region = region.region_index;
  for (const auto& b : region.buses)
    out.ranking.entries.emplace_back(b.id, electrical_distance(zm, b.id, boundary, formula));
  std::sort(out.ranking.entries.begin(), out.ranking.entries.end(),
            [](const auto& a, const auto& b) {
              return a.second != b.second ? a.second < b.second : a.first < b.first;
            });

  std::map<int, std::vector<int>> incident;
  for (const auto& br : region.branches) {
    incident[br.from_bus].push_back(br.id);
    incident[br.to_bus].push_back(br.id);
  }
  std::set<int> claimed;
  for (const auto& [node, dist] : out.ranking.entries) {
    ContingencyGroup group;
    group.anchor_node = node;
    group.distance = dist;
    group.region = region.region_index;
    auto it = incident.find(node);
    if (it != incident.end())
      for (int bid : it->second)
        if (claimed.insert(bid).second) group.member_branch_ids.push_back(bid);
    std::sort(group.member_branch_ids.begin(), group.member_branch_ids.end());
    if (!group.member_branch_ids.empty()) out.groups.push_back(std::move(group));
  }
  return out;
}

using ViolationKey = std::tuple<int, int, int>;  // (kind, element, region)

struct CcsState {
  int k_stop = 2;
  std::set<ViolationKey> cumulative;
  std::map<int, int> no_new_counter;  // region -> consecutive groups w/o new violations
  std::map<int, bool> stopped;

  bool region_stopped(int region) const {
    auto it = stopped.find(region);
    return it != stopped.end() && it->second;
  }
};

struct StopDecision {
  bool stop = false;
  int new_violations = 0;
};

// A violation is "new" when its (kind, element, region) key is unseen. A
// region stops after k_stop consecutive groups contributing nothing new.
inline StopDecision should_stop(CcsState& state, int region,
                                const std::vector<Violation>& group_violations) {
  StopDecision decision;
  for (const auto& v : group_violations)
    if (state.cumulative.insert(v.key()).second) ++decision.new_violations;
  int& counter = state.no_new_counter[region];
  if (decision.new_violations == 0)
    ++counter;
  else
    counter = 0;
  if (counter >= state.k_stop) {
    state.stopped[region] = true;
    decision.stop = true;
  }
  return decision;
}

}  // namespace dca
