#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dca/dca.hpp"
#include "test_util.hpp"

using namespace dca;

namespace {

PartitionedSystem load_system(const std::string& tag) {
  return partition_system(testutil::load_case("case" + tag + ".json"),
                          testutil::load_partition("partition" + tag + ".json"));
}

// projects a converged whole-system solution onto the boundary unknowns:
// trial injections equal to minus the link-side flows, plus the angles of the
// non-dominant slacks
Vector centralized_projection(const PartitionedSystem& sys, const BoundaryLayout& layout,
                              const SystemSolution& sol) {
  std::map<int, std::map<int, Complex>> voltages;
  for (const auto& [region, buses] : sys.boundary_map)
    for (int b : buses)
      voltages[region][b] = std::polar(sol.state.v_mag[sol.index.at(b)],
                                       sol.state.v_ang[sol.index.at(b)]);
  auto inj = evaluate_link_injections(sys.link_partition, sys.boundary_map, voltages);
  Vector x = Vector::Zero(layout.dim);
  for (const auto& slice : layout.slices) {
    const auto& vals = inj.at(slice.region);
    for (size_t k = 0; k < slice.boundary_bus_ids.size(); ++k) {
      x[slice.p_offset + static_cast<int>(k)] = -vals[k].real();
      x[slice.q_offset + static_cast<int>(k)] = -vals[k].imag();
    }
  }
  for (int r : layout.theta_regions) {
    int slack = sys.region(r).slack_bus;
    x[layout.theta_slot(r)] = sol.state.v_ang[sol.index.at(slack)];
  }
  return x;
}

}  // namespace

TEST_CASE("layout: slot offsets and dimension") {
  PartitionedSystem sys = load_system("14");
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  // region 1 boundary {4,5}, region 2 boundary {6,7,9}, one free slack angle
  REQUIRE(layout.dim == 2 * 2 + 2 * 3 + 1);
  REQUIRE(layout.dominant_region == 1);
  REQUIRE(layout.slice(1).boundary_bus_ids == std::vector<int>{4, 5});
  REQUIRE(layout.slice(1).p_offset == 0);
  REQUIRE(layout.slice(1).q_offset == 2);
  REQUIRE(layout.slice(2).boundary_bus_ids == std::vector<int>{6, 7, 9});
  REQUIRE(layout.slice(2).p_offset == 4);
  REQUIRE(layout.slice(2).q_offset == 7);
  REQUIRE(layout.theta_offset == 10);
  REQUIRE(layout.theta_slot(2) == 10);
  REQUIRE_THROWS_AS(layout.theta_slot(1), LayoutMismatchError);
  REQUIRE_THROWS_AS(layout.slice(9), LayoutMismatchError);
}

TEST_CASE("layout: hash is deterministic and stable under a link outage") {
  PartitionedSystem sys = load_system("30");
  BoundaryLayout a = BoundaryLayout::from_system(sys);
  BoundaryLayout b = BoundaryLayout::from_system(sys);
  REQUIRE(a.descriptor() == b.descriptor());
  REQUIRE(a.hash() == b.hash());
  // removing a link branch does not change boundary membership, so every
  // participant keeps the same layout across contingencies
  OutageResult out = apply_outage(sys, 42);
  REQUIRE(out.status == OutageStatus::Applied);
  REQUIRE(BoundaryLayout::from_system(out.system).hash() == a.hash());
  // distinct systems hash differently
  REQUIRE(BoundaryLayout::from_system(load_system("14")).hash() != a.hash());
}

TEST_CASE("boundary requests: x slices map onto per-region requests") {
  PartitionedSystem sys = load_system("14");
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  Vector x(layout.dim);
  for (int i = 0; i < layout.dim; ++i) x[i] = i;
  auto req = boundary_requests(x, layout, sys);
  REQUIRE(req.at(1).boundary_p == std::vector<double>{0, 1});
  REQUIRE(req.at(1).boundary_q == std::vector<double>{2, 3});
  REQUIRE(req.at(2).boundary_p == std::vector<double>{4, 5, 6});
  REQUIRE(req.at(2).boundary_q == std::vector<double>{7, 8, 9});
  REQUIRE(req.at(1).slack_angle == 0.0);   // dominant region keeps theta = 0
  REQUIRE(req.at(2).slack_angle == 10.0);  // free slack angle slot

  REQUIRE_THROWS_AS(boundary_requests(Vector::Zero(layout.dim + 1), layout, sys),
                    LayoutMismatchError);
}

TEST_CASE("residual: symmetric twin regions balance exactly at x = 0") {
  GridCase gc = testutil::twin6();
  PartitionedSystem sys = partition_system(gc, testutil::twin6_partition());
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  LocalRegionBackend backend(sys);
  Vector r = evaluate_boundary_residual(Vector::Zero(layout.dim), layout, sys, backend);
  REQUIRE(r.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("residual: link charging shows up only in the reactive slots") {
  const double b = 0.04;
  GridCase gc = testutil::twin6(b);
  PartitionedSystem sys = partition_system(gc, testutil::twin6_partition());
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  LocalRegionBackend backend(sys);
  Vector r = evaluate_boundary_residual(Vector::Zero(layout.dim), layout, sys, backend);
  for (const auto& slice : layout.slices) {
    REQUIRE(std::abs(r[slice.p_offset]) < 1e-12);
    // each line end injects -b/2 of charging at flat voltage
    REQUIRE(r[slice.q_offset] == Catch::Approx(-b / 2.0).margin(1e-12));
  }
  REQUIRE(std::abs(r[layout.theta_slot(2)]) < 1e-12);
}

TEST_CASE("residual vanishes at the projection of the whole-system solution") {
  for (const std::string tag : {"14", "30"}) {
    PartitionedSystem sys = load_system(tag);
    GridCase gc = testutil::load_case("case" + tag + ".json");
    SystemSolution sol = solve_centralized_power_flow(gc);
    BoundaryLayout layout = BoundaryLayout::from_system(sys);
    Vector xstar = centralized_projection(sys, layout, sol);
    LocalRegionBackend backend(sys);
    Vector r = evaluate_boundary_residual(xstar, layout, sys, backend);
    INFO("case " << tag);
    REQUIRE(r.lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("residual: an infeasible trial injection raises a region error") {
  PartitionedSystem sys = load_system("14");
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  LocalRegionBackend backend(sys);
  Vector x = Vector::Zero(layout.dim);
  x[0] = 50.0;  // 5000 MW withdrawal at one boundary bus
  try {
    evaluate_boundary_residual(x, layout, sys, backend);
    FAIL("expected RegionSolveError");
  } catch (const RegionSolveError& e) {
    REQUIRE(e.region_index == 1);
  }
}

TEST_CASE("distributed solve agrees with the whole-system solution") {
  PartitionedSystem sys = load_system("14");
  GridCase gc = testutil::load_case("case14.json");
  BoundaryLayout layout = BoundaryLayout::from_system(sys);
  LocalRegionBackend backend(sys);
  ResidualFn F = [&](const Vector& x) {
    return evaluate_boundary_residual(x, layout, sys, backend);
  };
  JfngResult res = jfng_solve(F, Vector::Zero(layout.dim),
                              Preconditioner::identity(layout.dim), {});
  REQUIRE(res.converged);
  REQUIRE(res.final_norm <= 1e-6);

  SystemSolution central = solve_centralized_power_flow(gc);
  DistributedSolution dist = solve_all_regions(res.solution, layout, sys);
  double worst = 0.0;
  for (const auto& rg : sys.regions) {
    const RegionSolution& rs = dist.regions.at(rg.region_index);
    BusIndex ridx(rg.buses);
    for (const auto& b : rg.buses) {
      int i = ridx.at(b.id);
      int j = central.index.at(b.id);
      worst = std::max(worst, std::abs(rs.v_mag[i] - central.state.v_mag[j]));
      worst = std::max(worst, std::abs(rs.v_ang[i] - central.state.v_ang[j]));
    }
  }
  REQUIRE(worst <= 4e-4);
  // the free slack angle converges to the whole-system angle of that slack
  REQUIRE(res.solution[layout.theta_slot(2)] ==
          Catch::Approx(central.state.v_ang[central.index.at(
              sys.region(2).slack_bus)]).margin(4e-4));
}

TEST_CASE("warm start across a parallel-circuit corridor is never slower") {
  PartitionedSystem sys = load_system("30");
  BoundaryLayout layout = BoundaryLayout::from_system(sys);

  auto solve_on = [&](const PartitionedSystem& target, const Vector& x0,
                      const Preconditioner& M0) {
    LocalRegionBackend backend(target);
    ResidualFn F = [&](const Vector& x) {
      return evaluate_boundary_residual(x, layout, target, backend);
    };
    return jfng_solve(F, x0, M0, {});
  };

  JfngResult base = solve_on(sys, Vector::Zero(layout.dim),
                             Preconditioner::identity(layout.dim));
  REQUIRE(base.converged);

  // branches 27 and 43 are the two circuits of the same corridor
  OutageResult first = apply_outage(sys, 27);
  OutageResult second = apply_outage(sys, 43);
  REQUIRE(first.status == OutageStatus::Applied);
  REQUIRE(second.status == OutageStatus::Applied);

  JfngResult leader = solve_on(first.system, base.solution,
                               Preconditioner::identity(layout.dim));
  REQUIRE(leader.converged);

  JfngResult cold = solve_on(second.system, base.solution,
                             Preconditioner::identity(layout.dim));
  WarmStartState w = make_warm_start(leader, 27);
  JfngResult warm = solve_on(second.system, w.last_solution, w.preconditioner);
  REQUIRE(cold.converged);
  REQUIRE(warm.converged);
  int warm_total = warm.outer_iterations + warm.inner_iterations;
  int cold_total = cold.outer_iterations + cold.inner_iterations;
  REQUIRE(warm_total <= cold_total);
}
