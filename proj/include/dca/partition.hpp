#pragma once

// Region / link-line partitioning of a grid case and branch outage
// application with islanding detection.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dca/grid.hpp"

namespace dca {

struct PartitionSpec {
  std::map<int, int> region_of_bus;   // bus id -> region index (1..R)
  std::vector<int> link_branch_ids;   // branches crossing regions
  int dominant_slack_bus = 0;
  std::map<int, int> slack_bus_of_region;  // region -> bus id
};

inline PartitionSpec parse_partition(const json& doc) {
  if (!doc.is_object()) throw SchemaError("$: partition document must be an object");
  PartitionSpec spec;
  if (!doc.contains("regions") || !doc["regions"].is_object())
    throw SchemaError("$.regions: missing or not an object");
  for (auto& [key, val] : doc["regions"].items())
    spec.region_of_bus[std::stoi(key)] = val.get<int>();
  if (!doc.contains("links") || !doc["links"].is_array())
    throw SchemaError("$.links: missing or not an array");
  for (auto& v : doc["links"]) spec.link_branch_ids.push_back(v.get<int>());
  if (!doc.contains("dominant_slack"))
    throw SchemaError("$.dominant_slack: missing");
  spec.dominant_slack_bus = doc["dominant_slack"].get<int>();
  if (!doc.contains("region_slacks") || !doc["region_slacks"].is_object())
    throw SchemaError("$.region_slacks: missing or not an object");
  for (auto& [key, val] : doc["region_slacks"].items())
    spec.slack_bus_of_region[std::stoi(key)] = val.get<int>();
  return spec;
}

inline PartitionSpec parse_partition(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return parse_partition(doc);
}

struct RegionGrid {
  int region_index = 0;
  std::vector<Bus> buses;        // sorted by id
  std::vector<Branch> branches;  // internal branches, sorted by id
  std::vector<int> boundary_bus_ids;  // ordered ascending
  int slack_bus = 0;
  double slack_v0 = 1.0;
  double slack_theta0 = 0.0;
  double slack_p0 = 0.0;  // scheduled active injection of the slack (Eq. 4 target)
  double slack_q0 = 0.0;
  bool is_dominant = false;

  const Bus& bus(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const Bus& b, int v) { return b.id < v; });
    if (it == buses.end() || it->id != id)
      throw ReferenceError("region " + std::to_string(region_index) +
                           ": unknown bus " + std::to_string(id));
    return *it;
  }

  bool has_bus(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const Bus& b, int v) { return b.id < v; });
    return it != buses.end() && it->id == id;
  }
};

struct LinkEnd {
  int region = 0;
  int bus = 0;
};

struct LinkPartition {
  std::vector<Branch> branches;              // sorted by id
  std::map<int, std::pair<LinkEnd, LinkEnd>> end_map;  // branch id -> (from end, to end)
};

struct PartitionedSystem {
  std::vector<RegionGrid> regions;  // sorted by region_index
  LinkPartition link_partition;
  std::map<int, std::vector<int>> boundary_map;  // region -> ordered boundary bus ids
  double base_mva = 100.0;
  std::string case_name;

  const RegionGrid& region(int index) const {
    for (const auto& r : regions)
      if (r.region_index == index) return r;
    throw ReferenceError("unknown region " + std::to_string(index));
  }
};

inline PartitionedSystem partition_system(const GridCase& gc, const PartitionSpec& spec) {
  for (const auto& b : gc.buses)
    if (!spec.region_of_bus.count(b.id))
      throw SpecMismatchError("bus " + std::to_string(b.id) + " has no region assignment");

  std::set<int> declared_links(spec.link_branch_ids.begin(), spec.link_branch_ids.end());
  std::set<int> region_indices;
  for (auto& [bus, region] : spec.region_of_bus) region_indices.insert(region);

  PartitionedSystem sys;
  sys.base_mva = gc.base_mva;
  sys.case_name = gc.name;

  std::map<int, RegionGrid> regions;
  for (int ri : region_indices) {
    regions[ri].region_index = ri;
  }
  for (const auto& b : gc.buses)
    regions[spec.region_of_bus.at(b.id)].buses.push_back(b);

  std::set<int> boundary_buses;
  for (const auto& br : gc.branches) {
    int rf = spec.region_of_bus.at(br.from_bus);
    int rt = spec.region_of_bus.at(br.to_bus);
    bool crosses = rf != rt;
    bool declared = declared_links.count(br.id) != 0;
    if (declared && !crosses)
      throw SpecMismatchError("declared link branch " + std::to_string(br.id) +
                              " is intra-region");
    if (crosses && !declared)
      throw SpecMismatchError("branch " + std::to_string(br.id) +
                              " crosses regions but is not declared as a link");
    if (crosses) {
      sys.link_partition.branches.push_back(br);
      sys.link_partition.end_map[br.id] = {LinkEnd{rf, br.from_bus}, LinkEnd{rt, br.to_bus}};
      boundary_buses.insert(br.from_bus);
      boundary_buses.insert(br.to_bus);
    } else {
      regions[rf].branches.push_back(br);
    }
  }

  for (auto& [ri, rg] : regions) {
    if (!spec.slack_bus_of_region.count(ri))
      throw SlackError("region " + std::to_string(ri) + " has no slack assignment");
    int slack = spec.slack_bus_of_region.at(ri);
    if (!rg.has_bus(slack))
      throw SlackError("slack bus " + std::to_string(slack) + " is not in region " +
                       std::to_string(ri));
    const Bus& sb = rg.bus(slack);
    if (sb.kind == BusKind::PQ)
      throw SlackError("slack bus " + std::to_string(slack) +
                       " must be a PV or Slack bus");
    if (boundary_buses.count(slack))
      throw SlackError("slack bus " + std::to_string(slack) +
                       " is a boundary bus; boundary nodes are PQ");
    rg.slack_bus = slack;
    rg.slack_v0 = sb.v_mag;
    rg.slack_theta0 = sb.v_ang;
    rg.slack_p0 = sb.p_inj;
    rg.slack_q0 = sb.q_inj;
    rg.is_dominant = (slack == spec.dominant_slack_bus);

    for (const auto& b : rg.buses)
      if (boundary_buses.count(b.id)) rg.boundary_bus_ids.push_back(b.id);
    std::sort(rg.boundary_bus_ids.begin(), rg.boundary_bus_ids.end());

    // internal connectivity
    std::vector<int> ids;
    for (const auto& b : rg.buses) ids.push_back(b.id);
    std::vector<std::pair<int, int>> edges;
    for (const auto& br : rg.branches) edges.emplace_back(br.from_bus, br.to_bus);
    auto missing = detail::unreachable_buses(ids, edges);
    if (!missing.empty())
      throw IslandedRegionError("region " + std::to_string(ri) +
                                " internally disconnected; bus " +
                                std::to_string(missing.front()) + " unreachable");
  }

  bool dominant_found = false;
  for (auto& [ri, rg] : regions) dominant_found = dominant_found || rg.is_dominant;
  if (!dominant_found)
    throw SlackError("dominant slack bus " + std::to_string(spec.dominant_slack_bus) +
                     " is not one of the regional slacks");

  for (auto& [ri, rg] : regions) {
    sys.boundary_map[ri] = rg.boundary_bus_ids;
    sys.regions.push_back(std::move(rg));
  }
  return sys;
}

enum class OutageStatus { Applied, Islanding };

struct OutageResult {
  OutageStatus status = OutageStatus::Applied;
  PartitionedSystem system;       // valid when status == Applied
  std::vector<int> isolated_buses;  // buses cut off from their region slack
};

// Removes one branch. Islanding is reported when removal disconnects a
// region internally; such contingencies are skipped, not solved.
inline OutageResult apply_outage(const PartitionedSystem& sys, int branch_id) {
  bool found = false;
  OutageResult out;
  out.system = sys;

  auto& link = out.system.link_partition;
  auto lit = std::find_if(link.branches.begin(), link.branches.end(),
                          [&](const Branch& b) { return b.id == branch_id; });
  if (lit != link.branches.end()) {
    link.branches.erase(lit);
    link.end_map.erase(branch_id);
    found = true;
  } else {
    for (auto& rg : out.system.regions) {
      auto it = std::find_if(rg.branches.begin(), rg.branches.end(),
                             [&](const Branch& b) { return b.id == branch_id; });
      if (it == rg.branches.end()) continue;
      rg.branches.erase(it);
      found = true;
      std::vector<int> ids;
      for (const auto& b : rg.buses) ids.push_back(b.id);
      std::vector<std::pair<int, int>> edges;
      for (const auto& br : rg.branches) edges.emplace_back(br.from_bus, br.to_bus);
      auto missing = detail::unreachable_buses(ids, edges, rg.slack_bus);
      if (!missing.empty()) {
        out.status = OutageStatus::Islanding;
        out.isolated_buses = missing;
      }
      break;
    }
  }
  if (!found) throw UnknownBranchError("unknown branch " + std::to_string(branch_id));
  return out;
}

}  // namespace dca
