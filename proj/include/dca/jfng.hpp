#pragma once

// Jacobian-free Newton-GMRES(m) with a rank-one-updated inverse-Jacobian
// preconditioner, plus warm-start state carried across contingencies.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dca/errors.hpp"

namespace dca {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Preconditioner {
  Matrix m;  // approximation of the inverse Jacobian
  int generation = 0;

  static Preconditioner identity(int dim) {
    return Preconditioner{Matrix::Identity(dim, dim), 0};
  }
};

struct JfngParams {
  int m = 20;                  // GMRES restart dimension
  double tol_boundary = 1e-6;  // residual inf-norm tolerance
  int max_outer = 50;
  int max_inner = 500;         // total GMRES iteration budget
  double fd_epsilon = 1e-7;
  double forcing = 1e-3;       // inner relative tolerance
};

struct JfngTraceRow {
  int outer;
  int inner_total;
  double norm_inf;
};

struct JfngResult {
  Vector solution;
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int residual_evaluations = 0;
  double final_norm = 0.0;
  Preconditioner preconditioner;
  std::vector<JfngTraceRow> trace;
};

using ResidualFn = std::function<Vector(const Vector&)>;

namespace detail {

// One restarted right-preconditioned GMRES cycle for J d = -r, where J v is
// approximated matrix-free. Returns the correction d accumulated so far and
// the achieved relative residual.
struct GmresOutcome {
  Vector d;
  double rel_residual;
  int iterations;
};

template <typename MatVec>
GmresOutcome gmres_right_preconditioned(const MatVec& jv, const Matrix& M,
                                        const Vector& rhs, int m, double rel_tol,
                                        int budget) {
  const int n = static_cast<int>(rhs.size());
  Vector d = Vector::Zero(n);
  double beta0 = rhs.norm();
  if (beta0 == 0.0) return {d, 0.0, 0};
  Vector residual = rhs;  // rhs - J d, with d = 0
  int total_iters = 0;

  while (total_iters < budget) {
    double beta = residual.norm();
    if (beta / beta0 <= rel_tol) break;

    int mm = std::min(m, budget - total_iters);
    std::vector<Vector> V;
    V.reserve(mm + 1);
    V.push_back(residual / beta);
    Matrix H = Matrix::Zero(mm + 1, mm);
    Vector g = Vector::Zero(mm + 1);
    g[0] = beta;
    std::vector<double> cs(mm), sn(mm);
    int k = 0;
    bool breakdown = false;

    for (; k < mm; ++k) {
      ++total_iters;
      Vector w = jv(M * V[k]);
      // modified Gram-Schmidt
      for (int i = 0; i <= k; ++i) {
        H(i, k) = w.dot(V[i]);
        w -= H(i, k) * V[i];
      }
      H(k + 1, k) = w.norm();
      // apply previous Givens rotations
      for (int i = 0; i < k; ++i) {
        double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      double denom = std::hypot(H(k, k), H(k + 1, k));
      if (denom == 0.0) {
        ++k;
        breakdown = true;
        break;
      }
      cs[k] = H(k, k) / denom;
      sn[k] = H(k + 1, k) / denom;
      H(k, k) = denom;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      bool happy = H(k + 1, k) == 0.0;
      if (!happy) V.push_back(w / H(k + 1, k));
      if (std::abs(g[k + 1]) / beta0 <= rel_tol || happy) {
        ++k;
        breakdown = happy;
        break;
      }
    }

    if (k > 0) {
      // back-substitution on the k x k triangular system
      Vector y = Vector::Zero(k);
      for (int i = k - 1; i >= 0; --i) {
        double s = g[i];
        for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
        y[i] = s / H(i, i);
      }
      Vector u = Vector::Zero(n);
      for (int i = 0; i < k; ++i) u += y[i] * V[i];
      d += M * u;
    }
    residual = rhs - jv(d);
    if (breakdown || k == 0) break;
  }
  return {d, residual.norm() / beta0, total_iters};
}

}  // namespace detail

// Newton outer loop with matrix-free GMRES inner solves. The preconditioner
// is improved by the inverse ("bad") Broyden rank-one secant correction after
// each accepted step and returned for reuse.
inline JfngResult jfng_solve(const ResidualFn& F, const Vector& x0,
                             const Preconditioner& M0, const JfngParams& params) {
  const int n = static_cast<int>(x0.size());
  if (M0.m.rows() != n || M0.m.cols() != n)
    throw LayoutMismatchError("preconditioner dimension does not match x0");

  JfngResult result;
  result.preconditioner = M0;
  Vector x = x0;

  auto evaluate = [&](const Vector& v) {
    ++result.residual_evaluations;
    Vector r = F(v);
    if (r.size() != n)
      throw LayoutMismatchError("residual dimension does not match x0");
    return r;
  };

  Vector r = evaluate(x);
  double norm = r.lpNorm<Eigen::Infinity>();
  result.trace.push_back({0, 0, norm});
  int no_decrease = 0;

  for (int outer = 0; outer < params.max_outer; ++outer) {
    if (norm <= params.tol_boundary) {
      result.converged = true;
      break;
    }
    if (result.inner_iterations >= params.max_inner) break;

    // matrix-free J v at the current iterate; a region-solve failure at a
    // probe point is retried once with a halved step
    auto jv = [&](const Vector& v) -> Vector {
      double vnorm = v.norm();
      if (vnorm == 0.0) return Vector::Zero(n);
      double eps = params.fd_epsilon * std::max(1.0, x.norm()) / vnorm;
      try {
        return (evaluate(x + eps * v) - r) / eps;
      } catch (const RegionSolveError&) {
        eps /= 2.0;
        return (evaluate(x + eps * v) - r) / eps;
      }
    };

    auto inner = detail::gmres_right_preconditioned(
        jv, result.preconditioner.m, Vector(-r), params.m, params.forcing,
        params.max_inner - result.inner_iterations);
    result.inner_iterations += inner.iterations;

    Vector x_next = x + inner.d;
    Vector r_next = evaluate(x_next);
    double norm_next = r_next.lpNorm<Eigen::Infinity>();

    // rank-one inverse-secant correction: M <- M + (s - M y) (s^T M) / (s^T M y)
    Vector s = inner.d;
    Vector y = r_next - r;
    Vector my = result.preconditioner.m * y;
    double denom = s.dot(my);
    if (std::abs(denom) >= 1e-12 * s.norm() * my.norm()) {
      Vector sm = result.preconditioner.m.transpose() * s;
      result.preconditioner.m += (s - my) * sm.transpose() / denom;
    }

    x = x_next;
    r = r_next;
    ++result.outer_iterations;
    result.trace.push_back({result.outer_iterations, result.inner_iterations, norm_next});

    // require a meaningful relative improvement; finite-difference jitter at
    // the last digits must not reset the stagnation counter
    if (norm_next >= norm * (1.0 - 1e-9)) {
      if (++no_decrease >= 3)
        throw StagnationError("no residual decrease over 3 outer iterations; |F| = " +
                              std::to_string(norm_next));
    } else {
      no_decrease = 0;
    }
    norm = norm_next;
  }

  result.converged = result.converged || norm <= params.tol_boundary;
  result.solution = x;
  result.final_norm = norm;
  return result;
}

struct WarmStartState {
  Vector last_solution;
  Preconditioner preconditioner;
  int source_contingency = -1;
};

inline WarmStartState make_warm_start(const JfngResult& previous, int contingency_id) {
  if (!previous.converged)
    throw NotConvergedError("warm starts only from converged results");
  WarmStartState state;
  state.last_solution = previous.solution;
  state.preconditioner = previous.preconditioner;
  state.preconditioner.generation += 1;
  state.source_contingency = contingency_id;
  return state;
}

}  // namespace dca
