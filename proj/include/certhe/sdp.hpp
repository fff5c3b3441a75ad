#pragma once

// Lagrangian dual of the homogenized hand-eye QCQP:
//
//   max ν_y  s.t.  Z(ν) = Q_homog + Σ_k ν_k A_k − ν_y A_y ⪰ 0
//
// followed by nullspace extraction of the primal rotation and a post-hoc
// optimality certificate (nullspace, orthogonality, duality gap).

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "certhe/constraints.hpp"
#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"
#include "certhe/problem.hpp"
#include "certhe/sdp_solver.hpp"

namespace certhe {

struct SolverOptions {
  int max_iterations = 100;
  double psd_tolerance = 1e-8;
  /// Relative objective convergence |p − d| / (1 + |p| + |d|).
  double objective_tolerance = 1e-9;
};

struct CertifyOptions {
  double nullspace_threshold = 1e-3;      // singular values of Z counted as zero
  double orthogonality_threshold = 1e-3;  // ‖RᵀR − I‖_F
  double gap_threshold = 1e-4;            // |p − d| / max(1, p)
  double min_abs_y = 1e-6;
};

struct SolverStats {
  int iterations = 0;
  double runtime_seconds = 0.0;
  std::string termination;
};

struct DualSolution {
  /// Multipliers of the constraint set followed by ν_y (last entry).
  Eigen::VectorXd nu;
  double objective = 0.0;
  Mat10 Z = Mat10::Zero();
  /// Primal moment matrix from the interior-point run (≈ r̃ r̃ᵀ when tight).
  Mat10 X = Mat10::Zero();
  SolverStats stats;
};

inline double min_eigenvalue(const Mat10& m) {
  return Eigen::SelfAdjointEigenSolver<Mat10>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

/// True when λ_min(Z) ≥ −tol · max(1, ‖Z‖_F).
inline bool is_dual_feasible(const Mat10& z, double tol = 1e-8) {
  return min_eigenvalue(z) >= -tol * std::max(1.0, z.norm());
}

inline Mat10 assemble_Z(const CostMatrices& cost, const ConstraintSet& set,
                        const Eigen::VectorXd& nu) {
  if (static_cast<std::size_t>(nu.size()) != set.size() + 1) {
    std::ostringstream os;
    os << "multiplier vector has length " << nu.size() << ", expected " << set.size() + 1;
    throw Error(Stage::solve, os.str());
  }
  Mat10 z = cost.Q_homog;
  for (std::size_t k = 0; k < set.size(); ++k) z += nu(static_cast<Eigen::Index>(k)) * set.matrices[k];
  z -= nu(nu.size() - 1) * set.homogenizer;
  return z;
}

inline DualSolution solve_dual(const CostMatrices& cost, const ConstraintSet& set,
                               const SolverOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const auto m = static_cast<Eigen::Index>(set.size());

  ipm::Problem problem;
  problem.C = cost.Q_homog;
  problem.A.reserve(set.size() + 1);
  for (const auto& a : set.matrices) problem.A.emplace_back(a);
  problem.A.emplace_back(set.homogenizer);
  problem.b = Eigen::VectorXd::Zero(m + 1);
  problem.b(m) = 1.0;

  ipm::Options ipm_opts;
  ipm_opts.max_iterations = opts.max_iterations;
  ipm_opts.tolerance = opts.objective_tolerance;
  const ipm::Result res = ipm::solve(problem, ipm_opts);

  DualSolution sol;
  sol.nu.resize(m + 1);
  // S = C − Σ y_k A_k − y_y A_y, so ν_k = −y_k and ν_y = y_y.
  sol.nu.head(m) = -res.y.head(m);
  sol.nu(m) = res.y(m);
  sol.objective = sol.nu(m);
  sol.Z = assemble_Z(cost, set, sol.nu);
  sol.X = res.X;
  sol.stats.iterations = res.iterations;
  sol.stats.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  sol.stats.termination = ipm::to_string(res.status);

  const bool feasible = is_dual_feasible(sol.Z, opts.psd_tolerance);
  // A stalled run close to the optimum is still a valid lower bound as long as
  // Z is PSD; the certificate's gap test decides whether it is good enough.
  const bool usable = res.status == ipm::Status::converged ||
                      (res.status == ipm::Status::stalled &&
                       res.relative_gap <= std::sqrt(opts.objective_tolerance));
  if (!usable || !feasible) {
    std::ostringstream os;
    os << "dual SDP unsolved: " << sol.stats.termination << " after " << res.iterations
       << " iterations (gap " << res.relative_gap << ", primal infeasibility "
       << res.primal_infeasibility << ", dual infeasibility " << res.dual_infeasibility
       << ", λ_min(Z) " << min_eigenvalue(sol.Z) << ")";
    throw Error(Stage::solve, os.str());
  }
  return sol;
}

struct Candidate {
  /// r̃ normalized so that y = 1.
  Vec10 r_tilde = Vec10::Zero();
  Mat3 raw_rotation = Mat3::Zero();  // unvec(r̃/y) before projection
  double raw_y = 0.0;
  Rotation rotation;                 // projection of raw_rotation onto SO(3)
  Vec3 translation = Vec3::Zero();
  std::optional<double> scale;
  double primal_cost = 0.0;
  double orthogonality_residual = 0.0;
  std::string source;
};

struct NullspaceInfo {
  Eigen::VectorXd singular_values;  // descending
  Eigen::MatrixXd basis;            // 10 × nullspace_dim
  int nullspace_dim = 0;
  /// Rank of the rotation rows of the nullspace basis. More than one rotation
  /// direction means the minimizer is not unique.
  int rotation_rank = 0;
  bool ambiguous() const { return rotation_rank > 1; }
};

inline NullspaceInfo nullspace_of(const Mat10& z, double threshold = 1e-3) {
  Eigen::JacobiSVD<Mat10> svd(z, Eigen::ComputeFullV);
  NullspaceInfo info;
  info.singular_values = svd.singularValues();
  for (int i = 0; i < 10; ++i) {
    if (info.singular_values(i) < threshold) ++info.nullspace_dim;
  }
  info.basis = svd.matrixV().rightCols(info.nullspace_dim);
  if (info.nullspace_dim > 0) {
    const Eigen::VectorXd sv =
        Eigen::JacobiSVD<Eigen::MatrixXd>(info.basis.topRows(9)).singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > threshold) ++info.rotation_rank;
    }
  }
  return info;
}

struct Extraction {
  NullspaceInfo nullspace;
  std::vector<Candidate> candidates;
};

namespace detail {

inline std::optional<Candidate> make_candidate(const CostMatrices& cost, const Vec9& r_raw,
                                               double raw_y, std::string source) {
  Candidate c;
  c.raw_y = raw_y;
  c.raw_rotation = unvec(r_raw);
  c.r_tilde << r_raw, 1.0;
  c.orthogonality_residual = orthogonality_residual(c.raw_rotation);
  try {
    c.rotation = nearest_rotation(c.raw_rotation);
  } catch (const Error&) {
    return std::nullopt;
  }
  const TranslationScale ts = cost.translation_observable
                                  ? recover_translation_scale(cost, vec(c.rotation.matrix()))
                                  : recover_unchecked(cost, vec(c.rotation.matrix()));
  c.translation = ts.translation;
  c.scale = ts.scale;
  c.primal_cost =
      std::max(0.0, quadratic_cost(cost, c.rotation.matrix(), c.translation, ts.scale.value_or(1.0)));
  c.source = std::move(source);
  return c;
}

}  // namespace detail

/// Candidates from the (numerical) nullspace of Z: every basis vector with a
/// usable y component, normalized by y, plus the dominant rotation direction of
/// the nullspace. The latter covers the unknown-scale case where (R, t, α) and
/// (−R, −t, −α) are both minimizers and Z has a two-dimensional nullspace
/// spanned by [r, 0] and [0, 1].
inline Extraction extract_primal(const DualSolution& sol, const CostMatrices& cost,
                                 const CertifyOptions& opts = {}) {
  Extraction ex;
  ex.nullspace = nullspace_of(sol.Z, opts.nullspace_threshold);
  if (ex.nullspace.nullspace_dim == 0) {
    std::ostringstream os;
    os << "empty nullspace: smallest singular value of Z is "
       << ex.nullspace.singular_values(9) << " >= " << opts.nullspace_threshold;
    throw Error(Stage::extract, os.str());
  }
  const Eigen::MatrixXd& basis = ex.nullspace.basis;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    const double y = basis(9, k);
    if (std::abs(y) < opts.min_abs_y) continue;
    const Vec9 r = basis.col(k).head<9>() / y;
    if (auto c = detail::make_candidate(cost, r, y, "nullspace[" + std::to_string(k) + "]")) {
      ex.candidates.push_back(std::move(*c));
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> rsvd(basis.topRows(9), Eigen::ComputeThinU);
  if (rsvd.singularValues()(0) > opts.nullspace_threshold) {
    Vec9 u = rsvd.matrixU().col(0);
    Mat3 m = unvec(u);
    if (m.determinant() < 0.0) u = -u;
    u *= std::sqrt(3.0) / u.norm();
    if (auto c = detail::make_candidate(cost, u, 1.0, "rotation-subspace")) {
      ex.candidates.push_back(std::move(*c));
    }
  }
  // With several rotation directions the dominant one alone may be rank
  // deficient; the projection of the identity onto the subspace still gives a
  // representative to report (it cannot certify).
  if (ex.nullspace.ambiguous()) {
    const Eigen::Index rank = std::max<Eigen::Index>(ex.nullspace.rotation_rank, 1);
    const Eigen::MatrixXd u = rsvd.matrixU().leftCols(rank);
    const Vec9 id = vec(Mat3::Identity());
    Vec9 p = u * (u.transpose() * id);
    if (p.norm() > opts.nullspace_threshold) {
      p *= std::sqrt(3.0) / p.norm();
      if (auto c = detail::make_candidate(cost, p, 1.0, "identity-projection")) {
        ex.candidates.push_back(std::move(*c));
      }
    }
  }
  // Vectors of one nullspace often project to the same rotation; keep the
  // best-conditioned representative of each.
  std::vector<Candidate> unique;
  for (Candidate& c : ex.candidates) {
    auto same = std::find_if(unique.begin(), unique.end(), [&](const Candidate& u) {
      return rotation_geodesic_error(u.rotation, c.rotation) < 1e-6;
    });
    if (same == unique.end()) {
      unique.push_back(std::move(c));
    } else if (c.orthogonality_residual < same->orthogonality_residual) {
      *same = std::move(c);
    }
  }
  ex.candidates = std::move(unique);
  if (ex.candidates.empty()) {
    throw Error(Stage::extract,
                "normalization failure: no nullspace vector has |y| >= " +
                    std::to_string(opts.min_abs_y) + " or a usable rotation part");
  }
  return ex;
}

struct Certificate {
  bool certified = false;
  double relative_gap = 0.0;
  int nullspace_dim = 0;
  double min_singular_value = 0.0;
  double orthogonality_residual = 0.0;
  std::vector<std::string> reasons;
};

/// Verdict for one candidate. The gap compares the dual objective against the
/// cost of the candidate's projected rotation with its optimal (t, α), which is
/// a feasible primal point; a PSD violation of Z invalidates the dual bound.
inline Certificate certify(const Candidate& candidate, const DualSolution& sol,
                           const CostMatrices& cost, const CertifyOptions& opts = {},
                           const SolverOptions& solver_opts = {}) {
  (void)cost;
  Certificate cert;
  const NullspaceInfo ns = nullspace_of(sol.Z, opts.nullspace_threshold);
  cert.nullspace_dim = ns.nullspace_dim;
  cert.min_singular_value = ns.singular_values(9);
  cert.orthogonality_residual = candidate.orthogonality_residual;
  cert.relative_gap =
      std::abs(candidate.primal_cost - sol.objective) / std::max(1.0, candidate.primal_cost);

  if (ns.nullspace_dim == 0) {
    cert.reasons.push_back("nullspace: no singular value of Z below threshold");
  } else if (ns.ambiguous()) {
    cert.reasons.push_back("nullspace: " + std::to_string(ns.rotation_rank) +
                           " independent rotation directions, minimizer not unique");
  }
  if (!(cert.orthogonality_residual < opts.orthogonality_threshold)) {
    std::ostringstream os;
    os << "orthogonality: ‖RᵀR − I‖_F = " << cert.orthogonality_residual;
    cert.reasons.push_back(os.str());
  }
  if (!is_dual_feasible(sol.Z, solver_opts.psd_tolerance)) {
    std::ostringstream os;
    os << "dual infeasible: λ_min(Z) = " << min_eigenvalue(sol.Z);
    cert.reasons.push_back(os.str());
  }
  if (!(cert.relative_gap <= opts.gap_threshold)) {
    std::ostringstream os;
    os << "duality gap: " << cert.relative_gap << " > " << opts.gap_threshold;
    cert.reasons.push_back(os.str());
  }
  cert.certified = cert.reasons.empty();
  return cert;
}

enum class Method { dual_sdp, linear };

inline const char* to_string(Method m) { return m == Method::dual_sdp ? "dual_sdp" : "linear"; }

struct ExtrinsicEstimate {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  std::optional<double> scale;  // absent for known scale
  double primal_cost = 0.0;
  std::optional<Certificate> certificate;
  Method method = Method::dual_sdp;
  std::optional<double> dual_objective;
  std::optional<SolverStats> solver_stats;

  bool certified() const { return certificate && certificate->certified; }
};

struct CalibrateOptions {
  SolverOptions solver;
  CertifyOptions certify;
  CostOptions cost;
};

/// build_cost → build_constraints → solve_dual → extract_primal → certify.
/// Returns the lowest-cost certified candidate, or the lowest-cost candidate
/// flagged as uncertified.
inline ExtrinsicEstimate calibrate(const EgomotionDataset& data, const ConstraintConfig& config,
                                   const CalibrateOptions& opts = {}) {
  CostMatrices cost;
  try {
    cost = build_cost(data, opts.cost);
  } catch (const Error& e) {
    const ObservabilityReport obs = observability_check(data, Rotation::identity());
    std::string msg = e.what();
    msg += "; observability check (identity reference): ";
    msg += obs.ok ? "ok" : "failed";
    for (const auto& m : obs.messages) msg += "; " + m;
    throw Error(e.stage(), msg);
  }
  const ConstraintSet set = build_constraints(config);
  const DualSolution sol = solve_dual(cost, set, opts.solver);
  const Extraction ex = extract_primal(sol, cost, opts.certify);

  const Candidate* best = nullptr;
  Certificate best_cert;
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.primal_cost != b.primal_cost) return a.primal_cost < b.primal_cost;
    return std::abs(a.raw_y) > std::abs(b.raw_y);
  };
  for (const Candidate& c : ex.candidates) {
    const Certificate cert = certify(c, sol, cost, opts.certify, opts.solver);
    const bool take = best == nullptr || (cert.certified && !best_cert.certified) ||
                      (cert.certified == best_cert.certified && better(c, *best));
    if (take) {
      best = &c;
      best_cert = cert;
    }
  }

  ExtrinsicEstimate est;
  est.rotation = best->rotation;
  est.translation = best->translation;
  est.scale = best->scale;
  est.primal_cost = best->primal_cost;
  est.certificate = best_cert;
  est.method = Method::dual_sdp;
  est.dual_objective = sol.objective;
  est.solver_stats = sol.stats;
  return est;
}

}  // namespace certhe
