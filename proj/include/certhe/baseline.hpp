#pragma once

// Suboptimal linear comparator: minimize the reduced quadratic form without
// the rotation constraint, project onto SO(3), then recover (t, α) in closed
// form.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"
#include "certhe/problem.hpp"
#include "certhe/sdp.hpp"

namespace certhe {

inline ExtrinsicEstimate calibrate_linear(const EgomotionDataset& data,
                                          const CostOptions& cost_opts = {}) {
  CostOptions relaxed = cost_opts;
  relaxed.require_translation_excitation = false;
  const CostMatrices cost = build_cost(data, relaxed);

  // Unknown scale: smallest eigenvector of the 9×9 reduced form (defined up to
  // scale and sign). Known scale: the 10×10 form over [r, y], normalized by y.
  Eigen::VectorXd lam;
  Eigen::MatrixXd vecs;
  if (cost.scale_known) {
    Eigen::SelfAdjointEigenSolver<Mat10> eig(cost.Q_homog);
    lam = eig.eigenvalues();
    vecs = eig.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Mat9> eig(cost.Q_reduced);
    lam = eig.eigenvalues();
    vecs = eig.eigenvectors();
  }
  const double lmax = std::max(std::abs(lam(lam.size() - 1)), 1e-300);
  if (lam(1) - lam(0) < 1e-10 * lmax) {
    std::ostringstream os;
    os << "ambiguous minimizer: smallest eigenvalue of the reduced cost is not simple"
       << " (λ₁ = " << lam(0) << ", λ₂ = " << lam(1) << ")";
    throw Error(Stage::extract, os.str());
  }
  if (!cost.translation_observable) {
    std::ostringstream os;
    os << "under-excited translations: translation/scale block condition "
       << cost.elimination_condition;
    throw Error(Stage::cost, os.str());
  }

  ExtrinsicEstimate best;
  best.method = Method::linear;
  bool have = false;
  const Eigen::VectorXd v0 = vecs.col(0);
  for (double sign : {1.0, -1.0}) {
    Vec9 r;
    if (cost.scale_known) {
      if (std::abs(v0(9)) < 1e-12) {
        throw Error(Stage::extract, "ambiguous minimizer: homogenizing component vanishes");
      }
      r = v0.head<9>() / v0(9);
      if (sign < 0.0) continue;
    } else {
      r = sign * v0.head<9>();
    }
    Rotation rot;
    try {
      rot = nearest_rotation(unvec(r));
    } catch (const Error& e) {
      throw Error(Stage::extract, std::string("ambiguous minimizer: ") + e.what());
    }
    const TranslationScale ts = recover_translation_scale(cost, vec(rot.matrix()));
    const double c =
        evaluate_cost_residual(data, rot, ts.translation, ts.scale.value_or(1.0));
    const bool tie = have && std::abs(c - best.primal_cost) <= 1e-12 * std::max(1.0, c);
    const bool take = !have || (tie ? (ts.scale.value_or(1.0) > 0.0 &&
                                       best.scale.value_or(1.0) <= 0.0)
                                    : c < best.primal_cost);
    if (take) {
      best.rotation = rot;
      best.translation = ts.translation;
      best.scale = ts.scale;
      best.primal_cost = c;
      have = true;
    }
  }
  return best;
}

}  // namespace certhe
