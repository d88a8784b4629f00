#include <catch2/catch_amalgamated.hpp>

#include "dca/dca.hpp"
#include "test_util.hpp"

using namespace dca;

namespace {

// chain 1 - 2 - 3 with x = 0.1 per line, slack at bus 1
RegionGrid chain3() {
  RegionGrid rg;
  rg.region_index = 1;
  for (int id : {1, 2, 3}) {
    Bus b;
    b.id = id;
    b.kind = id == 1 ? BusKind::Slack : BusKind::PQ;
    rg.buses.push_back(b);
  }
  for (int id : {1, 2}) {
    Branch br;
    br.id = id;
    br.from_bus = id;
    br.to_bus = id + 1;
    br.x = 0.1;
    rg.branches.push_back(br);
  }
  rg.slack_bus = 1;
  rg.boundary_bus_ids = {3};
  return rg;
}

Violation make_violation(int element, int region) {
  return Violation{ViolationKind::BranchActiveFlow, element, region, 1.0, 0.5, 1};
}

}  // namespace

TEST_CASE("impedance matrix: 3-bus chain has the closed-form entries") {
  ImpedanceMatrix zm = build_impedance_matrix(chain3());
  REQUIRE(zm.node_ids == std::vector<int>{2, 3});
  REQUIRE(std::abs(zm.z(zm.at(2), zm.at(2)) - Complex(0, 0.1)) < 1e-12);
  REQUIRE(std::abs(zm.z(zm.at(2), zm.at(3)) - Complex(0, 0.1)) < 1e-12);
  REQUIRE(std::abs(zm.z(zm.at(3), zm.at(2)) - Complex(0, 0.1)) < 1e-12);
  REQUIRE(std::abs(zm.z(zm.at(3), zm.at(3)) - Complex(0, 0.2)) < 1e-12);
  REQUIRE_THROWS_AS(zm.at(1), UnknownNodeError);  // slack is the reference
}

TEST_CASE("impedance matrix inverts the reduced admittance on the fixtures") {
  for (const std::string tag : {"14", "30"}) {
    PartitionedSystem sys =
        partition_system(testutil::load_case("case" + tag + ".json"),
                         testutil::load_partition("partition" + tag + ".json"));
    for (const auto& rg : sys.regions) {
      ImpedanceMatrix zm = build_impedance_matrix(rg);
      BusIndex full(rg.buses);
      Eigen::MatrixXcd dense(build_admittance_matrix(rg.buses, rg.branches, full));
      int n = static_cast<int>(zm.node_ids.size());
      Eigen::MatrixXcd reduced(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          reduced(i, j) = dense(full.at(zm.node_ids[i]), full.at(zm.node_ids[j]));
      Eigen::MatrixXcd should_be_identity = zm.z * reduced;
      REQUIRE((should_be_identity - Eigen::MatrixXcd::Identity(n, n))
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("impedance matrix: node islanded from the slack is singular") {
  RegionGrid rg = chain3();
  rg.branches.pop_back();  // bus 3 now floats
  REQUIRE_THROWS_AS(build_impedance_matrix(rg), SingularMatrixError);
}

TEST_CASE("electrical distance: chain values and conventions") {
  ImpedanceMatrix zm = build_impedance_matrix(chain3());
  REQUIRE(electrical_distance_pair(zm, 2, 2) == 0.0);
  REQUIRE(electrical_distance_pair(zm, 2, 3) == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(electrical_distance_pair(zm, 1, 3) == Catch::Approx(0.2).margin(1e-12));
  REQUIRE(electrical_distance(zm, 2, {3}) == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(electrical_distance(zm, 3, {3}) == 0.0);
  REQUIRE_THROWS_AS(electrical_distance(zm, 2, {}), UnknownNodeError);
  REQUIRE_THROWS_AS(electrical_distance_pair(zm, 2, 99), UnknownNodeError);
}

TEST_CASE("electrical distance is symmetric on a fixture region") {
  PartitionedSystem sys =
      partition_system(testutil::load_case("case14.json"),
                       testutil::load_partition("partition14.json"));
  const RegionGrid& rg = sys.region(2);
  ImpedanceMatrix zm = build_impedance_matrix(rg);
  for (const auto& a : rg.buses)
    for (const auto& b : rg.buses)
      REQUIRE(electrical_distance_pair(zm, a.id, b.id) ==
              Catch::Approx(electrical_distance_pair(zm, b.id, a.id)).margin(1e-15));
}

TEST_CASE("transfer-magnitude formula is available and differs from Thevenin") {
  PartitionedSystem sys =
      partition_system(testutil::load_case("case14.json"),
                       testutil::load_partition("partition14.json"));
  const RegionGrid& rg = sys.region(2);
  ImpedanceMatrix zm = build_impedance_matrix(rg);
  bool differs = false;
  for (const auto& b : rg.buses) {
    double thev = electrical_distance(zm, b.id, rg.boundary_bus_ids,
                                      DistanceFormula::Thevenin);
    double xfer = electrical_distance(zm, b.id, rg.boundary_bus_ids,
                                      DistanceFormula::TransferMagnitude);
    if (std::abs(thev - xfer) > 1e-9) differs = true;
  }
  REQUIRE(differs);
}

TEST_CASE("rank and group: 3-bus chain ranking and line claims") {
  RegionGrid rg = chain3();
  ImpedanceMatrix zm = build_impedance_matrix(rg);
  RankAndGroups rag = rank_and_group(rg, zm, rg.boundary_bus_ids);
  REQUIRE(rag.ranking.entries.size() == 3);
  REQUIRE(rag.ranking.entries[0] == std::pair<int, double>{3, 0.0});
  REQUIRE(rag.ranking.entries[1].first == 2);
  REQUIRE(rag.ranking.entries[1].second == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(rag.ranking.entries[2].first == 1);
  REQUIRE(rag.ranking.entries[2].second == Catch::Approx(0.2).margin(1e-12));
  // bus 3 claims line 2-3, bus 2 claims line 1-2, the slack claims nothing
  REQUIRE(rag.groups.size() == 2);
  REQUIRE(rag.groups[0].anchor_node == 3);
  REQUIRE(rag.groups[0].member_branch_ids == std::vector<int>{2});
  REQUIRE(rag.groups[1].anchor_node == 2);
  REQUIRE(rag.groups[1].member_branch_ids == std::vector<int>{1});
}

TEST_CASE("rank and group: equal distances tie-break by node id") {
  RegionGrid rg;
  rg.region_index = 1;
  for (int id : {1, 2, 3}) {
    Bus b;
    b.id = id;
    b.kind = id == 1 ? BusKind::Slack : BusKind::PQ;
    rg.buses.push_back(b);
  }
  for (int id : {1, 2}) {
    Branch br;
    br.id = id;
    br.from_bus = 1;
    br.to_bus = id + 1;  // star around the slack
    br.x = 0.1;
    rg.branches.push_back(br);
  }
  rg.slack_bus = 1;
  rg.boundary_bus_ids = {2, 3};
  ImpedanceMatrix zm = build_impedance_matrix(rg);
  RankAndGroups rag = rank_and_group(rg, zm, rg.boundary_bus_ids);
  REQUIRE(rag.ranking.entries[0].first == 2);  // both at distance 0
  REQUIRE(rag.ranking.entries[1].first == 3);
  REQUIRE(rag.groups[0].anchor_node == 2);
  REQUIRE(rag.groups[0].member_branch_ids == std::vector<int>{1});
  REQUIRE(rag.groups[1].anchor_node == 3);
  REQUIRE(rag.groups[1].member_branch_ids == std::vector<int>{2});
}

TEST_CASE("rank and group: every internal line claimed exactly once") {
  for (const std::string tag : {"14", "30"}) {
    PartitionedSystem sys =
        partition_system(testutil::load_case("case" + tag + ".json"),
                         testutil::load_partition("partition" + tag + ".json"));
    for (const auto& rg : sys.regions) {
      ImpedanceMatrix zm = build_impedance_matrix(rg);
      RankAndGroups rag = rank_and_group(rg, zm, rg.boundary_bus_ids);
      std::map<int, double> rank_of;
      for (size_t i = 0; i < rag.ranking.entries.size(); ++i)
        rank_of[rag.ranking.entries[i].first] = static_cast<double>(i);
      std::set<int> seen;
      for (const auto& g : rag.groups) {
        REQUIRE_FALSE(g.member_branch_ids.empty());
        for (int bid : g.member_branch_ids) {
          REQUIRE(seen.insert(bid).second);
          // a line belongs to the group of its earlier-ranked endpoint
          const Branch& br = [&]() -> const Branch& {
            for (const auto& cand : rg.branches)
              if (cand.id == bid) return cand;
            FAIL("member branch not internal to the region");
            return rg.branches.front();
          }();
          int nearer = rank_of.at(br.from_bus) < rank_of.at(br.to_bus) ? br.from_bus
                                                                       : br.to_bus;
          REQUIRE(g.anchor_node == nearer);
        }
      }
      REQUIRE(seen.size() == rg.branches.size());
    }
  }
}

TEST_CASE("rank and group: fixture anchor order matches the curation oracle") {
  // leading anchors, frozen from the independent screening simulation
  std::map<std::string, std::map<int, std::vector<int>>> expect;
  expect["14"] = {{1, {4, 5, 2}}, {2, {6, 7, 9}}};
  expect["30"] = {{1, {4, 6, 28}}, {2, {9, 10, 12, 27}}};
  for (const auto& [tag, by_region] : expect) {
    PartitionedSystem sys =
        partition_system(testutil::load_case("case" + tag + ".json"),
                         testutil::load_partition("partition" + tag + ".json"));
    for (const auto& [region, anchors] : by_region) {
      ImpedanceMatrix zm = build_impedance_matrix(sys.region(region));
      RankAndGroups rag =
          rank_and_group(sys.region(region), zm, sys.region(region).boundary_bus_ids);
      REQUIRE(rag.groups.size() >= anchors.size());
      for (size_t i = 0; i < anchors.size(); ++i) {
        INFO("case" << tag << " region " << region << " group " << i);
        REQUIRE(rag.groups[i].anchor_node == anchors[i]);
      }
    }
  }
}

TEST_CASE("stop rule: two empty groups after a violation stop the region") {
  CcsState state;
  auto first = should_stop(state, 1, {make_violation(3, 1)});
  REQUIRE(first.new_violations == 1);
  REQUIRE_FALSE(first.stop);
  auto second = should_stop(state, 1, {});
  REQUIRE_FALSE(second.stop);
  auto third = should_stop(state, 1, {});
  REQUIRE(third.stop);
  REQUIRE(state.region_stopped(1));
}

TEST_CASE("stop rule: repeating a known violation does not reset the counter") {
  CcsState state;
  should_stop(state, 1, {make_violation(3, 1)});
  should_stop(state, 1, {});
  auto third = should_stop(state, 1, {make_violation(3, 1)});  // already known
  REQUIRE(third.new_violations == 0);
  REQUIRE(third.stop);
}

TEST_CASE("stop rule: a new violation in the third group keeps the region alive") {
  CcsState state;
  should_stop(state, 1, {make_violation(3, 1)});
  should_stop(state, 1, {});
  auto third = should_stop(state, 1, {make_violation(4, 1)});
  REQUIRE(third.new_violations == 1);
  REQUIRE_FALSE(third.stop);
  REQUIRE_FALSE(state.region_stopped(1));
}

TEST_CASE("stop rule: counters are tracked per region") {
  CcsState state;
  should_stop(state, 1, {});
  should_stop(state, 2, {make_violation(9, 2)});
  auto r1 = should_stop(state, 1, {});
  REQUIRE(r1.stop);
  auto r2 = should_stop(state, 2, {});
  REQUIRE_FALSE(r2.stop);
  REQUIRE(state.cumulative.size() == 1);
}
