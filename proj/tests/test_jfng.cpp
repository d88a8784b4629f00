#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dca/dca.hpp"

using namespace dca;

TEST_CASE("jfng: F(x) = x - c converges in one outer and one inner iteration") {
  Vector c(3);
  c << 1.0, -2.0, 0.5;
  ResidualFn F = [&](const Vector& x) -> Vector { return x - c; };
  JfngParams params;
  params.fd_epsilon = 1.0;  // exact difference quotient for a linear residual
  JfngResult res = jfng_solve(F, Vector::Zero(3), Preconditioner::identity(3), params);
  REQUIRE(res.converged);
  REQUIRE(res.outer_iterations == 1);
  REQUIRE(res.inner_iterations == 1);
  REQUIRE((res.solution - c).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("jfng: random well-conditioned linear systems solve in <= dim inner") {
  std::mt19937 rng(20260823);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int dim : {2, 4, 6, 9, 12}) {
    Matrix A = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) A(i, j) = dist(rng) + (i == j ? dim : 0.0);
    Vector b(dim);
    for (int i = 0; i < dim; ++i) b[i] = dist(rng);
    ResidualFn F = [&](const Vector& x) -> Vector { return A * x - b; };

    JfngParams params;
    params.tol_boundary = 1e-9;
    params.forcing = 1e-12;
    params.fd_epsilon = 1.0;  // exact difference quotient for a linear residual
    JfngResult res = jfng_solve(F, Vector::Zero(dim), Preconditioner::identity(dim),
                                params);
    Vector exact = A.fullPivLu().solve(b);
    INFO("dim " << dim);
    REQUIRE(res.converged);
    REQUIRE(res.inner_iterations <= dim);
    REQUIRE((res.solution - exact).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("jfng: identical inputs give bit-identical traces and solutions") {
  std::mt19937 rng(7);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int dim = 8;
  Matrix A = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A(i, j) = dist(rng) + (i == j ? dim : 0.0);
  Vector b(dim);
  for (int i = 0; i < dim; ++i) b[i] = dist(rng);
  // mildly nonlinear so more than one outer step happens
  ResidualFn F = [&](const Vector& x) -> Vector {
    return A * x - b + 0.1 * x.cwiseProduct(x);
  };
  JfngResult r1 = jfng_solve(F, Vector::Zero(dim), Preconditioner::identity(dim), {});
  JfngResult r2 = jfng_solve(F, Vector::Zero(dim), Preconditioner::identity(dim), {});
  REQUIRE(r1.converged);
  REQUIRE(r1.outer_iterations >= 2);
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t i = 0; i < r1.trace.size(); ++i) {
    REQUIRE(r1.trace[i].outer == r2.trace[i].outer);
    REQUIRE(r1.trace[i].inner_total == r2.trace[i].inner_total);
    REQUIRE(r1.trace[i].norm_inf == r2.trace[i].norm_inf);  // exact equality
  }
  for (int i = 0; i < dim; ++i) REQUIRE(r1.solution[i] == r2.solution[i]);
}

TEST_CASE("jfng: preconditioner satisfies the secant condition after a step") {
  std::mt19937 rng(99);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int dim = 5;
  Matrix A = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A(i, j) = dist(rng) + (i == j ? dim : 0.0);
  Vector b(dim);
  for (int i = 0; i < dim; ++i) b[i] = dist(rng);
  ResidualFn F = [&](const Vector& x) -> Vector { return A * x - b; };
  JfngParams params;
  params.forcing = 1e-12;
  params.tol_boundary = 1e-10;
  params.fd_epsilon = 1.0;  // exact difference quotient for a linear residual
  JfngResult res = jfng_solve(F, Vector::Zero(dim), Preconditioner::identity(dim),
                              params);
  REQUIRE(res.converged);
  // s = x1 - x0, y = F(x1) - F(x0); the rank-one update enforces M y = s
  Vector s = res.solution;      // x0 = 0
  Vector y = A * res.solution;  // F(x1) - F(x0) for linear F
  REQUIRE((res.preconditioner.m * y - s).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("jfng: rank-one update with a direct oracle") {
  // the inverse-secant correction M' = M + (s - M y)(s^T M)/(s^T M y)
  // must map y to s exactly; verified on random data
  std::mt19937 rng(3);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int dim = 6;
  Matrix M = Matrix::Identity(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) M(i, j) += 0.1 * dist(rng);
  Vector s(dim), y(dim);
  for (int i = 0; i < dim; ++i) {
    s[i] = dist(rng);
    y[i] = dist(rng);
  }
  Vector my = M * y;
  Matrix updated = M + (s - my) * (M.transpose() * s).transpose() / s.dot(my);
  REQUIRE((updated * y - s).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("jfng: forward difference matches a central difference") {
  std::mt19937 rng(11);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int dim = 4;
  Matrix A = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A(i, j) = dist(rng) + (i == j ? dim : 0.0);
  auto F = [&](const Vector& x) -> Vector {
    return A * x + 0.3 * x.cwiseProduct(x.cwiseProduct(x));
  };
  Vector x(dim), v(dim);
  for (int i = 0; i < dim; ++i) {
    x[i] = dist(rng);
    v[i] = dist(rng);
  }
  v.normalize();
  double eps = 1e-7 * std::max(1.0, x.norm()) / v.norm();
  Vector fwd = (F(x + eps * v) - F(x)) / eps;
  double h = 1e-5;
  Vector central = (F(x + h * v) - F(x - h * v)) / (2.0 * h);
  REQUIRE((fwd - central).lpNorm<Eigen::Infinity>() /
              central.lpNorm<Eigen::Infinity>() <
          1e-4);
}

TEST_CASE("jfng: stagnation over three outer iterations raises an error") {
  ResidualFn F = [](const Vector& x) -> Vector {
    Vector r(1);
    r[0] = 1.0 + std::abs(x[0]);
    return r;
  };
  Vector x0(1);
  x0[0] = 0.5;
  REQUIRE_THROWS_AS(jfng_solve(F, x0, Preconditioner::identity(1), {}),
                    StagnationError);
}

TEST_CASE("jfng: outer and inner budgets are respected without throwing") {
  Matrix A = 3.0 * Matrix::Identity(4, 4);
  Vector b = Vector::Ones(4);
  ResidualFn F = [&](const Vector& x) -> Vector {
    return A * x - b + 0.5 * x.cwiseProduct(x);
  };
  JfngParams tight;
  tight.max_outer = 1;
  tight.tol_boundary = 1e-30;
  JfngResult res = jfng_solve(F, Vector::Zero(4), Preconditioner::identity(4), tight);
  REQUIRE_FALSE(res.converged);
  REQUIRE(res.outer_iterations == 1);

  JfngParams budget;
  budget.max_inner = 2;
  budget.tol_boundary = 1e-30;
  JfngResult res2 = jfng_solve(F, Vector::Zero(4), Preconditioner::identity(4), budget);
  REQUIRE_FALSE(res2.converged);
  REQUIRE(res2.inner_iterations <= 2);
}

TEST_CASE("jfng: a region failure at a probe point is retried with a halved step") {
  Matrix A = 4.0 * Matrix::Identity(3, 3);
  Vector b(3);
  b << 1.0, 2.0, 3.0;
  int evals = 0;
  bool thrown = false;
  ResidualFn F = [&](const Vector& x) -> Vector {
    ++evals;
    if (evals == 2 && !thrown) {
      thrown = true;
      throw RegionSolveError(2, "probe failed");
    }
    return A * x - b;
  };
  JfngResult res = jfng_solve(F, Vector::Zero(3), Preconditioner::identity(3), {});
  REQUIRE(thrown);
  REQUIRE(res.converged);
  REQUIRE((A * res.solution - b).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("jfng: dimension mismatches are rejected") {
  ResidualFn F = [](const Vector& x) -> Vector { return x; };
  REQUIRE_THROWS_AS(jfng_solve(F, Vector::Zero(3), Preconditioner::identity(2), {}),
                    LayoutMismatchError);
  ResidualFn bad = [](const Vector&) -> Vector { return Vector::Zero(5); };
  REQUIRE_THROWS_AS(jfng_solve(bad, Vector::Zero(3), Preconditioner::identity(3), {}),
                    LayoutMismatchError);
}

TEST_CASE("warm start: carries the solution and bumps the generation") {
  Vector c(2);
  c << 4.0, -1.0;
  ResidualFn F = [&](const Vector& x) -> Vector { return x - c; };
  JfngResult res = jfng_solve(F, Vector::Zero(2), Preconditioner::identity(2), {});
  REQUIRE(res.converged);
  WarmStartState w = make_warm_start(res, 17);
  REQUIRE(w.last_solution == res.solution);
  REQUIRE(w.preconditioner.generation == res.preconditioner.generation + 1);
  REQUIRE(w.source_contingency == 17);
}

TEST_CASE("warm start: refuses unconverged results") {
  JfngResult failed;
  failed.converged = false;
  REQUIRE_THROWS_AS(make_warm_start(failed, 1), NotConvergedError);
}
