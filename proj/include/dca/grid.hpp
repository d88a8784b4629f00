#pragma once

// Grid case model: buses, branches, per-unit conversion, validation and
// the case-json file format.

#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dca/errors.hpp"

namespace dca {

using json = nlohmann::json;
using Complex = std::complex<double>;

enum class BusKind { PQ, PV, Slack };

inline std::string to_string(BusKind k) {
  switch (k) {
    case BusKind::PQ: return "PQ";
    case BusKind::PV: return "PV";
    case BusKind::Slack: return "Slack";
  }
  return "?";
}

inline BusKind bus_kind_from_string(const std::string& s, const std::string& path) {
  if (s == "PQ") return BusKind::PQ;
  if (s == "PV") return BusKind::PV;
  if (s == "Slack") return BusKind::Slack;
  throw SchemaError(path + ": unknown bus kind '" + s + "'");
}

struct Bus {
  int id = 0;
  std::string name;
  BusKind kind = BusKind::PQ;
  double base_kv = 0.0;
  double v_mag = 1.0;   // per-unit
  double v_ang = 0.0;   // radians
  double p_inj = 0.0;   // net scheduled injection, per-unit
  double q_inj = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double shunt_g = 0.0;  // per-unit shunt admittance
  double shunt_b = 0.0;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;          // per-unit series impedance
  double x = 0.0;
  double b_charging = 0.0; // total line charging
  double tap_ratio = 1.0;  // off-nominal turns ratio, from side
  std::optional<double> p_max;  // per-unit active-flow limit
  int circuit_id = 1;
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;      // sorted by id
  std::vector<Branch> branches;  // sorted by id

  const Bus& bus(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const Bus& b, int v) { return b.id < v; });
    if (it == buses.end() || it->id != id)
      throw ReferenceError("unknown bus " + std::to_string(id));
    return *it;
  }

  const Branch& branch(int id) const {
    auto it = std::lower_bound(branches.begin(), branches.end(), id,
                               [](const Branch& b, int v) { return b.id < v; });
    if (it == branches.end() || it->id != id)
      throw UnknownBranchError("unknown branch " + std::to_string(id));
    return *it;
  }

  bool has_branch(int id) const {
    auto it = std::lower_bound(branches.begin(), branches.end(), id,
                               [](const Branch& b, int v) { return b.id < v; });
    return it != branches.end() && it->id == id;
  }
};

namespace detail {

inline double require_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number())
    throw SchemaError(path + "." + key + ": missing or not a number");
  return j[key].get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<double>();
}

inline int require_int(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw SchemaError(path + "." + key + ": missing or not an integer");
  return j[key].get<int>();
}

// Connectivity over an explicit edge list; returns ids of buses unreachable
// from the root (first bus when root < 0).
inline std::vector<int> unreachable_buses(const std::vector<int>& bus_ids,
                                          const std::vector<std::pair<int, int>>& edges,
                                          int root = -1) {
  if (bus_ids.empty()) return {};
  std::map<int, std::vector<int>> adj;
  for (int b : bus_ids) adj[b];
  for (auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  if (root < 0) root = bus_ids.front();
  std::set<int> seen;
  std::vector<int> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (seen.insert(v).second) stack.push_back(v);
  }
  std::vector<int> missing;
  for (int b : bus_ids)
    if (!seen.count(b)) missing.push_back(b);
  return missing;
}

}  // namespace detail

inline void validate_case(const GridCase& gc) {
  std::set<int> bus_ids;
  for (const auto& b : gc.buses) {
    if (!bus_ids.insert(b.id).second)
      throw SchemaError("duplicate bus id " + std::to_string(b.id));
    if (b.v_min > b.v_max)
      throw SchemaError("bus " + std::to_string(b.id) + ": v_min > v_max");
    if (b.kind == BusKind::PV && !(b.v_mag > 0))
      throw SchemaError("PV bus " + std::to_string(b.id) + " needs v_mag > 0");
  }
  std::set<int> branch_ids;
  for (const auto& br : gc.branches) {
    if (!branch_ids.insert(br.id).second)
      throw SchemaError("duplicate branch id " + std::to_string(br.id));
    if (br.r == 0.0 && br.x == 0.0)
      throw ZeroImpedanceError("branch " + std::to_string(br.id) + " has r = x = 0");
    if (!(br.tap_ratio > 0))
      throw SchemaError("branch " + std::to_string(br.id) + ": tap_ratio must be > 0");
    for (int end : {br.from_bus, br.to_bus})
      if (!bus_ids.count(end))
        throw ReferenceError("branch " + std::to_string(br.id) +
                             " references unknown bus " + std::to_string(end));
  }
  std::vector<int> ids(bus_ids.begin(), bus_ids.end());
  std::vector<std::pair<int, int>> edges;
  for (const auto& br : gc.branches) edges.emplace_back(br.from_bus, br.to_bus);
  auto missing = detail::unreachable_buses(ids, edges);
  if (!missing.empty())
    throw ConnectivityError("case graph disconnected; bus " +
                            std::to_string(missing.front()) + " unreachable");
}

inline GridCase parse_case(const json& doc) {
  if (!doc.is_object()) throw SchemaError("$: case document must be an object");
  GridCase gc;
  gc.name = doc.value("name", std::string{});
  gc.base_mva = detail::require_number(doc, "base_mva", "$");
  if (!(gc.base_mva > 0)) throw SchemaError("$.base_mva: must be > 0");
  if (!doc.contains("buses") || !doc["buses"].is_array())
    throw SchemaError("$.buses: missing or not an array");
  if (!doc.contains("branches") || !doc["branches"].is_array())
    throw SchemaError("$.branches: missing or not an array");

  const double deg = 3.14159265358979323846 / 180.0;
  int idx = 0;
  for (const auto& jb : doc["buses"]) {
    std::string path = "$.buses[" + std::to_string(idx++) + "]";
    Bus b;
    b.id = detail::require_int(jb, "id", path);
    b.name = jb.value("name", std::string{});
    if (!jb.contains("kind") || !jb["kind"].is_string())
      throw SchemaError(path + ".kind: missing or not a string");
    b.kind = bus_kind_from_string(jb["kind"].get<std::string>(), path + ".kind");
    b.base_kv = detail::number_or(jb, "base_kv", 0.0);
    b.v_mag = detail::number_or(jb, "v_mag", 1.0);
    b.v_ang = detail::number_or(jb, "v_ang_deg", 0.0) * deg;
    b.p_inj = detail::number_or(jb, "p_mw", 0.0) / gc.base_mva;
    b.q_inj = detail::number_or(jb, "q_mvar", 0.0) / gc.base_mva;
    b.v_min = detail::number_or(jb, "v_min", 0.0);
    b.v_max = detail::number_or(jb, "v_max", 2.0);
    b.shunt_g = detail::number_or(jb, "g_shunt_mw", 0.0) / gc.base_mva;
    b.shunt_b = detail::number_or(jb, "b_shunt_mvar", 0.0) / gc.base_mva;
    gc.buses.push_back(b);
  }
  idx = 0;
  for (const auto& jb : doc["branches"]) {
    std::string path = "$.branches[" + std::to_string(idx++) + "]";
    Branch br;
    br.id = detail::require_int(jb, "id", path);
    br.from_bus = detail::require_int(jb, "from", path);
    br.to_bus = detail::require_int(jb, "to", path);
    br.r = detail::number_or(jb, "r_pu", 0.0);
    br.x = detail::require_number(jb, "x_pu", path);
    br.b_charging = detail::number_or(jb, "b_pu", 0.0);
    br.tap_ratio = detail::number_or(jb, "tap", 1.0);
    if (jb.contains("p_max_mw") && !jb["p_max_mw"].is_null())
      br.p_max = jb["p_max_mw"].get<double>() / gc.base_mva;
    br.circuit_id = jb.contains("circuit") ? jb["circuit"].get<int>() : 1;
    gc.branches.push_back(br);
  }
  std::sort(gc.buses.begin(), gc.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  std::sort(gc.branches.begin(), gc.branches.end(),
            [](const Branch& a, const Branch& b) { return a.id < b.id; });
  validate_case(gc);
  return gc;
}

inline GridCase parse_case(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return parse_case(doc);
}

inline json serialize_case(const GridCase& gc) {
  const double deg = 180.0 / 3.14159265358979323846;
  json doc;
  doc["name"] = gc.name;
  doc["base_mva"] = gc.base_mva;
  doc["buses"] = json::array();
  for (const auto& b : gc.buses) {
    json jb;
    jb["id"] = b.id;
    jb["name"] = b.name;
    jb["kind"] = to_string(b.kind);
    jb["base_kv"] = b.base_kv;
    jb["v_mag"] = b.v_mag;
    jb["v_ang_deg"] = b.v_ang * deg;
    jb["p_mw"] = b.p_inj * gc.base_mva;
    jb["q_mvar"] = b.q_inj * gc.base_mva;
    jb["v_min"] = b.v_min;
    jb["v_max"] = b.v_max;
    jb["g_shunt_mw"] = b.shunt_g * gc.base_mva;
    jb["b_shunt_mvar"] = b.shunt_b * gc.base_mva;
    doc["buses"].push_back(jb);
  }
  doc["branches"] = json::array();
  for (const auto& br : gc.branches) {
    json jb;
    jb["id"] = br.id;
    jb["from"] = br.from_bus;
    jb["to"] = br.to_bus;
    jb["r_pu"] = br.r;
    jb["x_pu"] = br.x;
    jb["b_pu"] = br.b_charging;
    jb["tap"] = br.tap_ratio;
    if (br.p_max)
      jb["p_max_mw"] = *br.p_max * gc.base_mva;
    else
      jb["p_max_mw"] = nullptr;
    jb["circuit"] = br.circuit_id;
    doc["branches"].push_back(jb);
  }
  return doc;
}

}  // namespace dca
