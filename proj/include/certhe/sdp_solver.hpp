#pragma once

// Small dense primal-dual interior-point solver for
//
//   min ⟨C, X⟩  s.t. ⟨A_i, X⟩ = b_i,  X ⪰ 0
//   max bᵀy     s.t. S = C − Σ y_i A_i ⪰ 0
//
// HKM search direction with a Mehrotra predictor-corrector step. Intended for
// the fixed 10×10 hand-eye relaxation (m ≤ 22); everything is dense.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace certhe::ipm {

struct Problem {
  Eigen::MatrixXd C;
  std::vector<Eigen::MatrixXd> A;
  Eigen::VectorXd b;
};

struct Options {
  int max_iterations = 100;
  /// Stop when the gap and both infeasibilities are below this, each measured
  /// relative to (1 + magnitude) in the original data units.
  double tolerance = 1e-10;
  double step_fraction = 0.98;
};

enum class Status { converged, max_iterations, stalled, numerical_error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iterations: return "max_iterations";
    case Status::stalled: return "stalled";
    case Status::numerical_error: return "numerical_error";
  }
  return "unknown";
}

struct Result {
  Eigen::MatrixXd X;
  Eigen::MatrixXd S;
  Eigen::VectorXd y;
  int iterations = 0;
  Status status = Status::numerical_error;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = std::numeric_limits<double>::infinity();
  double primal_infeasibility = std::numeric_limits<double>::infinity();
  double dual_infeasibility = std::numeric_limits<double>::infinity();
  /// Indices of constraints dropped as linearly dependent (their y is 0).
  std::vector<int> dropped;
};

namespace detail {

inline double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

/// Largest α ≤ cap with X + α dX ⪰ 0, given the Cholesky factor of X.
inline double max_step(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& dx,
                       double cap = 1e30) {
  const Eigen::MatrixXd l = chol.matrixL();
  Eigen::MatrixXd w = l.triangularView<Eigen::Lower>().solve(dx);
  w = l.triangularView<Eigen::Lower>().solve(w.transpose()).transpose();
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym(w), Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  if (lmin >= 0.0) return cap;
  return std::min(cap, -1.0 / lmin);
}

/// Greedy Gram–Schmidt over the constraint matrices; returns kept indices.
inline std::vector<int> independent_subset(const std::vector<Eigen::MatrixXd>& a) {
  std::vector<int> kept;
  std::vector<Eigen::MatrixXd> basis;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) {
    Eigen::MatrixXd v = a[i];
    const double norm0 = v.norm();
    for (const auto& q : basis) v -= inner(q, v) * q;
    if (norm0 > 0.0 && v.norm() > 1e-10 * norm0) {
      basis.push_back(v / v.norm());
      kept.push_back(i);
    }
  }
  return kept;
}

}  // namespace detail

inline Result solve(const Problem& problem, const Options& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  using detail::inner;
  using detail::sym;

  const Eigen::Index n = problem.C.rows();
  Result result;
  result.y = VectorXd::Zero(static_cast<Eigen::Index>(problem.A.size()));

  const std::vector<int> kept = detail::independent_subset(problem.A);
  for (int i = 0; i < static_cast<int>(problem.A.size()); ++i) {
    if (std::find(kept.begin(), kept.end(), i) == kept.end()) result.dropped.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(kept.size());

  // Normalize data to unit scale; objectives are rescaled on the way out.
  const double c_scale = std::max(problem.C.norm(), 1e-12);
  const MatrixXd C = problem.C / c_scale;
  std::vector<MatrixXd> A(m);
  VectorXd a_scale(m);
  VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const MatrixXd& ai = problem.A[kept[i]];
    a_scale(i) = ai.norm();
    A[i] = ai / a_scale(i);
    b(i) = problem.b(kept[i]) / a_scale(i);
  }
  const double b_norm = b.norm();

  auto apply_a = [&](const MatrixXd& x) {
    VectorXd out(m);
    for (Eigen::Index i = 0; i < m; ++i) out(i) = inner(A[i], x);
    return out;
  };
  auto apply_at = [&](const VectorXd& y) {
    MatrixXd out = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < m; ++i) out += y(i) * A[i];
    return out;
  };

  MatrixXd X = MatrixXd::Identity(n, n);
  MatrixXd S = MatrixXd::Identity(n, n);
  VectorXd y = VectorXd::Zero(m);

  auto finish = [&](Status status, int iterations) {
    result.status = status;
    result.iterations = iterations;
    result.X = X;
    result.S = S * c_scale;
    for (Eigen::Index i = 0; i < m; ++i) result.y(kept[i]) = y(i) * c_scale / a_scale(i);
    return result;
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    const VectorXd rp = b - apply_a(X);
    const MatrixXd rd = C - apply_at(y) - S;
    const double mu = inner(X, S) / static_cast<double>(n);

    const double pobj = inner(C, X) * c_scale;
    const double dobj = b.dot(y) * c_scale;
    result.primal_objective = pobj;
    result.dual_objective = dobj;
    result.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    result.primal_infeasibility = rp.norm() / (1.0 + b_norm);
    result.dual_infeasibility = rd.norm() * c_scale / (1.0 + c_scale);
    if (result.relative_gap <= opts.tolerance &&
        result.primal_infeasibility <= opts.tolerance &&
        result.dual_infeasibility <= opts.tolerance) {
      return finish(Status::converged, it);
    }

    Eigen::LLT<MatrixXd> chol_x(X);
    Eigen::LLT<MatrixXd> chol_s(S);
    if (chol_x.info() != Eigen::Success || chol_s.info() != Eigen::Success) {
      return finish(Status::numerical_error, it);
    }
    const MatrixXd s_inv = sym(chol_s.solve(MatrixXd::Identity(n, n)));

    // Schur complement M_ij = tr(A_i X A_j S⁻¹).
    std::vector<MatrixXd> g(m);
    for (Eigen::Index j = 0; j < m; ++j) g[j] = X * A[j] * s_inv;
    MatrixXd M(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) M(i, j) = A[i].cwiseProduct(g[j].transpose()).sum();
    }
    M = sym(M);
    Eigen::LDLT<MatrixXd> schur(M);
    if (schur.info() != Eigen::Success) return finish(Status::numerical_error, it);

    const MatrixXd x_rd_sinv = X * rd * s_inv;
    auto direction = [&](const MatrixXd& rc, MatrixXd& dx, VectorXd& dy, MatrixXd& ds) {
      dy = schur.solve(rp - apply_a(rc - x_rd_sinv));
      ds = rd - apply_at(dy);
      dx = sym(rc - X * ds * s_inv);
    };

    MatrixXd dx_a, ds_a;
    VectorXd dy_a;
    direction(-X, dx_a, dy_a, ds_a);
    const double ap_a = std::min(1.0, detail::max_step(chol_x, dx_a));
    const double ad_a = std::min(1.0, detail::max_step(chol_s, ds_a));
    const double mu_aff =
        inner(X + ap_a * dx_a, S + ad_a * ds_a) / static_cast<double>(n);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    MatrixXd dx, ds;
    VectorXd dy;
    direction(sigma * mu * s_inv - X - dx_a * ds_a * s_inv, dx, dy, ds);
    const double ap = std::min(1.0, opts.step_fraction * detail::max_step(chol_x, dx));
    const double ad = std::min(1.0, opts.step_fraction * detail::max_step(chol_s, ds));
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dx.allFinite() || !ds.allFinite()) {
      return finish(Status::numerical_error, it);
    }
    if (ap < 1e-10 && ad < 1e-10) return finish(Status::stalled, it);

    X = sym(X + ap * dx);
    S = sym(S + ad * ds);
    y += ad * dy;
  }
  // Final residuals for the last iterate.
  {
    const VectorXd rp = b - apply_a(X);
    const MatrixXd rd = C - apply_at(y) - S;
    result.primal_objective = inner(C, X) * c_scale;
    result.dual_objective = b.dot(y) * c_scale;
    result.relative_gap = std::abs(result.primal_objective - result.dual_objective) /
                          (1.0 + std::abs(result.primal_objective) +
                           std::abs(result.dual_objective));
    result.primal_infeasibility = rp.norm() / (1.0 + b_norm);
    result.dual_infeasibility = rd.norm() * c_scale / (1.0 + c_scale);
  }
  return finish(Status::max_iterations, opts.max_iterations);
}

}  // namespace certhe::ipm
