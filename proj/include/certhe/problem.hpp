#pragma once

// Hand-eye measurement model and its quadratic cost.
//
// State layout (fixed everywhere in the library):
//   x  = [t(0..2), s(3), r(4..12)]   with r = vec(R), column-major
//   r̃  = [r(0..8), y(9)]
// For unknown scale s is the camera scale α. For known scale s is the
// homogenizing variable y (fixed to 1), so the same 13×13 matrix encodes the
// affine known-scale cost and the elimination keeps [r, y] instead of r.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"

namespace certhe {

namespace layout {
inline constexpr int kT = 0;
inline constexpr int kScale = 3;
inline constexpr int kR = 4;
inline constexpr int kState = 13;
inline constexpr int kY = 9;  // y inside r̃
}  // namespace layout

using Mat13 = Eigen::Matrix<double, 13, 13>;
using Vec13 = Eigen::Matrix<double, 13, 1>;

/// Paired relative motions T_{a_t a_{t+1}}, T_{b_t b_{t+1}}.
struct EgomotionDataset {
  std::vector<RigidTransform> motions_a;
  std::vector<RigidTransform> motions_b;
  bool scale_known = false;

  std::size_t size() const { return motions_a.size(); }

  void validate(std::size_t min_steps = 2) const {
    if (motions_a.size() != motions_b.size()) {
      throw Error(Stage::config, "dataset sensor sequences differ in length");
    }
    if (motions_a.size() < min_steps) {
      throw Error(Stage::config, "dataset needs at least " + std::to_string(min_steps) +
                                     " motion pairs, got " + std::to_string(motions_a.size()));
    }
  }
};

/// Σ_t M_Rᵀ M_R + M_tᵀ M_t over the 13-dim state. Only requires equal-length
/// sequences; no excitation checks.
inline Mat13 quadratic_form(const EgomotionDataset& data) {
  data.validate(1);
  using namespace layout;
  Mat13 q = Mat13::Zero();
  const Mat3 eye = Mat3::Identity();
  Eigen::Matrix<double, 9, 13> m_rot;
  Eigen::Matrix<double, 3, 13> m_trans;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Mat3& ra = data.motions_a[i].rotation.matrix();
    const Mat3& rb = data.motions_b[i].rotation.matrix();
    const Vec3& ta = data.motions_a[i].translation;
    const Vec3& tb = data.motions_b[i].translation;

    m_rot.setZero();
    m_rot.block<9, 9>(0, kR) = kron(ra.transpose(), eye) - kron(eye, rb);

    m_trans.block<3, 3>(0, kT) = eye - rb;
    m_trans.col(kScale) = -tb;
    m_trans.block<3, 9>(0, kR) = kron(ta.transpose(), eye);

    q.noalias() += m_rot.transpose() * m_rot;
    q.noalias() += m_trans.transpose() * m_trans;
  }
  return 0.5 * (q + q.transpose());
}

struct CostMatrices {
  bool scale_known = false;
  Mat13 Q = Mat13::Zero();
  /// Block of eliminated variables: [t, α] (4×4), or t (3×3) for known scale.
  Eigen::MatrixXd Q_elim;
  /// Coupling of eliminated variables to r (4×9), or to r̃ (3×10) for known scale.
  Eigen::MatrixXd Q_elim_r;
  Mat9 Q_r = Mat9::Zero();
  /// Rotation-only reduced cost (the r-block of Q_homog for known scale).
  Mat9 Q_reduced = Mat9::Zero();
  /// 10×10 cost in r̃. Zero last row/column for unknown scale.
  Mat10 Q_homog = Mat10::Zero();
  /// −Q_elim⁻¹ Q_elim_r (pseudo-inverse when the block is singular).
  Eigen::MatrixXd recovery;
  double elimination_condition = std::numeric_limits<double>::infinity();
  bool translation_observable = false;

  int eliminated_dim() const { return scale_known ? 3 : 4; }
};

struct CostOptions {
  /// Largest accepted condition number of Q_elim.
  double max_condition = 1e12;
  /// Throw when Q_elim is singular or ill-conditioned. When false the reduced
  /// cost is still formed (generalized Schur complement) and the flag
  /// translation_observable records the problem.
  bool require_translation_excitation = true;
};

inline CostMatrices build_cost(const EgomotionDataset& data, bool scale_known,
                               const CostOptions& opts = {}) {
  data.validate();
  using namespace layout;
  CostMatrices c;
  c.scale_known = scale_known;
  c.Q = quadratic_form(data);
  c.Q_r = c.Q.block<9, 9>(kR, kR);

  const int ne = c.eliminated_dim();
  c.Q_elim = c.Q.topLeftCorner(ne, ne);
  Eigen::MatrixXd kept;  // cost block over the kept coordinates (r or r̃)
  if (scale_known) {
    // Reorder the kept coordinates from [s, r] to r̃ = [r, y].
    std::vector<int> idx = {4, 5, 6, 7, 8, 9, 10, 11, 12, kScale};
    c.Q_elim_r.resize(3, 10);
    kept.resize(10, 10);
    for (int j = 0; j < 10; ++j) {
      for (int i = 0; i < 3; ++i) c.Q_elim_r(i, j) = c.Q(i, idx[j]);
      for (int i = 0; i < 10; ++i) kept(i, j) = c.Q(idx[i], idx[j]);
    }
  } else {
    c.Q_elim_r = c.Q.block<4, 9>(0, kR);
    kept = c.Q_r;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.Q_elim);
  const Eigen::VectorXd lam = eig.eigenvalues();
  const double lmax = lam.maxCoeff();
  const double lmin = lam.minCoeff();
  c.elimination_condition =
      (lmin > 0.0 && lmax > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  c.translation_observable = c.elimination_condition <= opts.max_condition;
  if (!c.translation_observable && opts.require_translation_excitation) {
    std::ostringstream os;
    os << "under-excited translations: translation/scale block is singular or ill-conditioned"
       << " (condition " << c.elimination_condition << " > " << opts.max_condition << ")";
    throw Error(Stage::cost, os.str());
  }

  Eigen::VectorXd inv_lam(ne);
  for (int i = 0; i < ne; ++i) {
    inv_lam(i) = lam(i) > 1e-12 * std::max(lmax, 1e-300) ? 1.0 / lam(i) : 0.0;
  }
  const Eigen::MatrixXd q_elim_inv =
      eig.eigenvectors() * inv_lam.asDiagonal() * eig.eigenvectors().transpose();
  c.recovery = -q_elim_inv * c.Q_elim_r;

  Eigen::MatrixXd reduced = kept + c.Q_elim_r.transpose() * c.recovery;
  reduced = 0.5 * (reduced + reduced.transpose());
  if (scale_known) {
    c.Q_homog = reduced;
  } else {
    c.Q_homog.topLeftCorner<9, 9>() = reduced;
  }
  c.Q_reduced = c.Q_homog.topLeftCorner<9, 9>();
  return c;
}

inline CostMatrices build_cost(const EgomotionDataset& data, const CostOptions& opts = {}) {
  return build_cost(data, data.scale_known, opts);
}

/// Stacked state x for given parameters. Known scale puts 1 in the s slot.
inline Vec13 stack_state(const CostMatrices& cost, const Mat3& r, const Vec3& t, double scale) {
  Vec13 x;
  x.segment<3>(layout::kT) = t;
  x(layout::kScale) = cost.scale_known ? 1.0 : scale;
  x.segment<9>(layout::kR) = vec(r);
  return x;
}

/// xᵀQx.
inline double quadratic_cost(const CostMatrices& cost, const Mat3& r, const Vec3& t,
                             double scale) {
  const Vec13 x = stack_state(cost, r, t, scale);
  return x.dot(cost.Q * x);
}

/// Σ‖R R_a − R_b R‖²_F + Σ‖R t_a + t − R_b t − α t_b‖², with α = 1 for known scale.
inline double evaluate_cost_residual(const EgomotionDataset& data, const Mat3& r,
                                     const Vec3& t, double scale) {
  const double alpha = data.scale_known ? 1.0 : scale;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Mat3& ra = data.motions_a[i].rotation.matrix();
    const Mat3& rb = data.motions_b[i].rotation.matrix();
    total += (r * ra - rb * r).squaredNorm();
    total += (r * data.motions_a[i].translation + t - rb * t -
              alpha * data.motions_b[i].translation)
                 .squaredNorm();
  }
  return total;
}

inline double evaluate_cost_residual(const EgomotionDataset& data, const Rotation& r,
                                     const Vec3& t, double scale) {
  return evaluate_cost_residual(data, r.matrix(), t, scale);
}

struct TranslationScale {
  Vec3 translation = Vec3::Zero();
  std::optional<double> scale;  // absent for known scale
};

namespace detail {
inline TranslationScale recover_unchecked(const CostMatrices& cost, const Vec9& r) {
  TranslationScale out;
  if (cost.scale_known) {
    Vec10 rt;
    rt << r, 1.0;
    out.translation = cost.recovery * rt;
  } else {
    const Eigen::Vector4d ta = cost.recovery * r;
    out.translation = ta.head<3>();
    out.scale = ta(3);
  }
  return out;
}
}  // namespace detail

/// Minimizer of the full cost over (t, α) at fixed r: −Q_elim⁻¹ Q_elim,r r.
inline TranslationScale recover_translation_scale(const CostMatrices& cost, const Vec9& r) {
  if (!cost.translation_observable) {
    throw Error(Stage::cost,
                "under-excited translations: cannot recover translation/scale uniquely");
  }
  return detail::recover_unchecked(cost, r);
}

/// (reduced cost at r, full cost at the recovered (t, α)). Equal by the Schur
/// complement identity.
inline std::pair<double, double> schur_consistency_check(const CostMatrices& cost,
                                                         const Vec9& r) {
  const TranslationScale ts = recover_translation_scale(cost, r);
  double reduced;
  if (cost.scale_known) {
    Vec10 rt;
    rt << r, 1.0;
    reduced = rt.dot(cost.Q_homog * rt);
  } else {
    reduced = r.dot(cost.Q_reduced * r);
  }
  const double full = quadratic_cost(cost, unvec(r), ts.translation, ts.scale.value_or(1.0));
  return {reduced, full};
}

struct ObservabilityTolerances {
  double angle_tol = 1e-3;     // rad, minimum rotation angle of each motion
  double axis_tol = 1e-2;      // rad, minimum separation of rotation axes
  double rank_rel_tol = 1e-6;  // σ_min > rank_rel_tol · σ_max
};

struct ObservabilityReport {
  bool ok = false;
  std::optional<std::pair<std::size_t, std::size_t>> best_pair;
  double axis_angle_between = 0.0;
  double span_margin = 0.0;
  std::vector<std::string> messages;
};

/// Two-axis excitation and span condition, evaluated at a reference rotation.
/// The span condition depends on the true extrinsic rotation; callers pass
/// ground truth in synthetic studies and an estimate (or identity) otherwise.
inline ObservabilityReport observability_check(const EgomotionDataset& data,
                                               const Rotation& reference,
                                               const ObservabilityTolerances& tol = {}) {
  data.validate(1);
  ObservabilityReport report;
  const std::size_t n = data.size();

  std::vector<AxisAngle> axes(n);
  std::vector<std::size_t> rotating;
  for (std::size_t i = 0; i < n; ++i) {
    axes[i] = to_axis_angle(data.motions_b[i].rotation);
    if (axes[i].angle > tol.angle_tol) rotating.push_back(i);
  }
  if (rotating.size() < 2) {
    report.messages.push_back("fewer than two motions rotate by more than " +
                              std::to_string(tol.angle_tol) + " rad");
    return report;
  }

  bool any_axis_pair = false;
  double best_rel = -1.0;
  for (std::size_t a = 0; a < rotating.size(); ++a) {
    for (std::size_t b = a + 1; b < rotating.size(); ++b) {
      const std::size_t i = rotating[a];
      const std::size_t j = rotating[b];
      // Axes are lines: a and −a describe the same axis.
      const double c = std::min(1.0, std::abs(axes[i].axis.dot(axes[j].axis)));
      const double separation = std::acos(c);
      if (separation <= tol.axis_tol) continue;
      any_axis_pair = true;

      Eigen::Matrix<double, 6, 4> m;
      m.block<3, 3>(0, 0) = Mat3::Identity() - data.motions_b[i].rotation.matrix();
      m.block<3, 1>(0, 3) = reference * data.motions_a[i].translation;
      m.block<3, 3>(3, 0) = Mat3::Identity() - data.motions_b[j].rotation.matrix();
      m.block<3, 1>(3, 3) = reference * data.motions_a[j].translation;
      const Eigen::Vector4d sv = Eigen::JacobiSVD<Eigen::Matrix<double, 6, 4>>(m).singularValues();
      const double rel = sv(0) > 0.0 ? sv(3) / sv(0) : 0.0;
      if (rel > best_rel) {
        best_rel = rel;
        report.best_pair = std::make_pair(i, j);
        report.axis_angle_between = separation;
        report.span_margin = sv(3);
        report.ok = rel > tol.rank_rel_tol;
      }
    }
  }
  if (!any_axis_pair) {
    report.messages.push_back("all rotations share one axis (within " +
                              std::to_string(tol.axis_tol) + " rad)");
    report.best_pair.reset();
    report.ok = false;
  } else if (!report.ok) {
    report.messages.push_back(
        "translations lie in the span of the rotation columns for every axis pair");
  }
  return report;
}

}  // namespace certhe
