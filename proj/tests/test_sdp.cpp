#include <gtest/gtest.h>

#include <random>

#include "certhe/sdp.hpp"
#include "test_support.hpp"

using namespace certhe;
using certhe::testing::consistent_dataset;
using certhe::testing::identity_dataset;
using certhe::testing::instance;
using certhe::testing::random_vec;

namespace {

const std::vector<ConstraintConfig> kConfigs = {
    ConstraintConfig::parse("R"), ConstraintConfig::parse("RC"), ConstraintConfig::parse("RH"),
    ConstraintConfig::parse("RCH")};

Eigen::VectorXd random_nu(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd nu(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < nu.size(); ++i) nu(i) = d(rng);
  return nu;
}

// Block form of Z for the full constraint set, written from the structured
// multipliers: symmetric V₁ (columns) and V₂ (rows), the three handedness
// vectors and ν_y:
//   P₁ = [−V₁⊗I − I⊗V₂, 0; 0, tr V₁ + tr V₂]
//   P₂ = [0, −[ν_ijk]×, [ν_kij]×, −ν_jki; [ν_ijk]×, 0, −[ν_jki]×, −ν_kij;
//         −[ν_kij]×, [ν_jki]×, 0, −ν_ijk; −ν_jkiᵀ, −ν_kijᵀ, −ν_ijkᵀ, −ν_y]
Mat10 block_form_Z(const Mat10& q, const Mat3& v1, const Mat3& v2, const Vec3& n_ijk,
                   const Vec3& n_jki, const Vec3& n_kij, double n_y) {
  const Mat3 eye = Mat3::Identity();
  Mat10 p1 = Mat10::Zero();
  p1.topLeftCorner<9, 9>() = -kron(v1, eye) - kron(eye, v2);
  p1(9, 9) = v1.trace() + v2.trace();

  Mat10 p2 = Mat10::Zero();
  p2.block<3, 3>(0, 3) = -hat(n_ijk);
  p2.block<3, 3>(0, 6) = hat(n_kij);
  p2.block<3, 1>(0, 9) = -n_jki;
  p2.block<3, 3>(3, 0) = hat(n_ijk);
  p2.block<3, 3>(3, 6) = -hat(n_jki);
  p2.block<3, 1>(3, 9) = -n_kij;
  p2.block<3, 3>(6, 0) = -hat(n_kij);
  p2.block<3, 3>(6, 3) = hat(n_jki);
  p2.block<3, 1>(6, 9) = -n_ijk;
  p2.block<1, 3>(9, 0) = -n_jki.transpose();
  p2.block<1, 3>(9, 3) = -n_kij.transpose();
  p2.block<1, 3>(9, 6) = -n_ijk.transpose();
  p2(9, 9) = -n_y;
  return q + p1 + p2;
}

// Our multiplier order: 6 row, 6 column (upper triangles (1,1),(1,2),(1,3),
// (2,2),(2,3),(3,3)), 9 handedness (triples 123, 231, 312; x,y,z), ν_y.
// A multiplier μ on the (i,j) orthogonality equation weights the bilinear sum
// once, so the symmetric block matrix carries μ on the diagonal and μ/2 off
// it; the block form uses the opposite sign. Handedness multiplier λ weights
// λ·(R⁽ⁱ⁾×R⁽ʲ⁾ − y R⁽ᵏ⁾), which the block form writes with ν = λ/2.
Mat3 sym_from_upper(const Eigen::VectorXd& six) {
  Mat3 v;
  v << six(0), six(1) / 2, six(2) / 2, six(1) / 2, six(3), six(4) / 2, six(2) / 2, six(4) / 2,
      six(5);
  return v;
}

}  // namespace

TEST(AssembleZ, ZeroMultipliersGiveCost) {
  const auto inst = instance(1, 1.0, 1.0);
  const CostMatrices c = build_cost(inst.noisy);
  const ConstraintSet s = build_constraints(ConstraintConfig::full());
  EXPECT_EQ(assemble_Z(c, s, Eigen::VectorXd::Zero(22)), c.Q_homog);
}

TEST(AssembleZ, LengthMismatchThrows) {
  const auto inst = instance(1);
  const CostMatrices c = build_cost(inst.clean);
  const ConstraintSet s = build_constraints(ConstraintConfig::row_only());
  EXPECT_THROW(assemble_Z(c, s, Eigen::VectorXd::Zero(6)), Error);
  EXPECT_NO_THROW(assemble_Z(c, s, Eigen::VectorXd::Zero(7)));
}

TEST(AssembleZ, LagrangianIdentity) {
  std::mt19937_64 rng(2);
  const auto inst = instance(2, 1.5, 2.0);
  const CostMatrices c = build_cost(inst.noisy);
  for (const auto& cfg : kConfigs) {
    const ConstraintSet s = build_constraints(cfg);
    for (int k = 0; k < 200; ++k) {
      const Eigen::VectorXd nu = random_nu(rng, s.size() + 1);
      Vec10 rt;
      for (int i = 0; i < 10; ++i) rt(i) = random_nu(rng, 1)(0);
      const Mat10 z = assemble_Z(c, s, nu);
      const double lhs = nu(nu.size() - 1) + rt.dot(z * rt);
      const Eigen::VectorXd res = constraint_residuals(s, rt);
      double rhs = rt.dot(c.Q_homog * rt);
      for (std::size_t j = 0; j < s.size(); ++j) rhs += nu(static_cast<Eigen::Index>(j)) * res(static_cast<Eigen::Index>(j));
      rhs -= nu(nu.size() - 1) * res(res.size() - 1);  // ν_y (1 − r̃ᵀA_y r̃)
      EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(AssembleZ, MatchesStructuredBlockForm) {
  std::mt19937_64 rng(3);
  const auto inst = instance(3, 0.8, 1.0, 0.01);
  const CostMatrices c = build_cost(inst.noisy);
  const ConstraintSet s = build_constraints(ConstraintConfig::full());
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd nu = random_nu(rng, 22);
    const Mat3 v_row = sym_from_upper(nu.segment(0, 6));
    const Mat3 v_col = sym_from_upper(nu.segment(6, 6));
    const Mat10 oracle =
        block_form_Z(c.Q_homog, -v_col, -v_row, nu.segment<3>(12) / 2.0, nu.segment<3>(15) / 2.0,
                     nu.segment<3>(18) / 2.0, nu(21));
    const Mat10 z = assemble_Z(c, s, nu);
    EXPECT_LE((z - oracle).cwiseAbs().maxCoeff(), 1e-14) << k;
  }
}

TEST(SolveDual, NoiseFreeObjectiveIsZeroForAllConfigs) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = instance(seed, 0.3 + seed);
    const CostMatrices c = build_cost(inst.clean);
    for (const auto& cfg : kConfigs) {
      const DualSolution sol = solve_dual(c, build_constraints(cfg));
      EXPECT_NEAR(sol.objective, 0.0, 1e-8) << cfg.label();
      EXPECT_TRUE(is_dual_feasible(sol.Z));
      EXPECT_EQ(sol.stats.termination, "converged");
      EXPECT_GT(sol.stats.iterations, 0);
    }
  }
}

TEST(SolveDual, NoisyObjectiveMatchesPrimalCost) {
  const auto inst = instance(7, 2.0, 1.0, 0.01);
  const ExtrinsicEstimate est = calibrate(inst.noisy, ConstraintConfig::row_only());
  ASSERT_TRUE(est.certified());
  ASSERT_TRUE(est.dual_objective.has_value());
  EXPECT_GT(est.primal_cost, 0.0);
  EXPECT_LE(std::abs(est.primal_cost - *est.dual_objective), 1e-4 * std::max(1.0, est.primal_cost));
}

TEST(SolveDual, WeakDualityOnRandomProbes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const auto inst = instance(8, 1.2, 10.0, 0.1);
  const CostMatrices c = build_cost(inst.noisy);
  for (const auto& cfg : kConfigs) {
    const DualSolution sol = solve_dual(c, build_constraints(cfg));
    for (int k = 0; k < 1000; ++k) {
      const Rotation r = random_rotation(rng);
      const double p = evaluate_cost_residual(inst.noisy, r, random_vec(rng, 2.0), u(rng));
      ASSERT_LE(sol.objective, p + 1e-9 * std::max(1.0, p));
    }
  }
}

TEST(SolveDual, MoreConstraintsNeverLowerTheBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = instance(seed, 1.0, 10.0, 0.1);
    const CostMatrices c = build_cost(inst.noisy);
    auto obj = [&](const char* cfg) {
      return solve_dual(c, build_constraints(ConstraintConfig::parse(cfg))).objective;
    };
    const double r = obj("R"), rc = obj("RC"), rh = obj("RH"), rch = obj("RCH");
    const double tol = 1e-8 * std::max(1.0, rch);
    EXPECT_LE(r, rc + tol);
    EXPECT_LE(r, rh + tol);
    EXPECT_LE(rc, rch + tol);
    EXPECT_LE(rh, rch + tol);
  }
}

TEST(SolveDual, IterationCapReportsUnsolved) {
  const auto inst = instance(9, 1.0, 5.0, 0.05);
  const CostMatrices c = build_cost(inst.noisy);
  SolverOptions opts;
  opts.max_iterations = 1;
  try {
    solve_dual(c, build_constraints(ConstraintConfig::row_only()), opts);
    FAIL() << "expected an unsolved error";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), Stage::solve);
    EXPECT_NE(std::string(e.what()).find("unsolved"), std::string::npos);
  }
}

TEST(SolveDual, Deterministic) {
  const auto inst = instance(10, 1.0, 3.0, 0.02);
  const CostMatrices c = build_cost(inst.noisy);
  const ConstraintSet s = build_constraints(ConstraintConfig::full());
  const DualSolution a = solve_dual(c, s);
  const DualSolution b = solve_dual(c, s);
  EXPECT_EQ(a.nu, b.nu);
  EXPECT_EQ(a.Z, b.Z);
}

TEST(ExtractPrimal, NoiseFreeGivesOneCandidateAtGroundTruth) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = instance(seed, 2.0);
    const CostMatrices c = build_cost(inst.clean);
    for (const auto& cfg : kConfigs) {
      const DualSolution sol = solve_dual(c, build_constraints(cfg));
      const Extraction ex = extract_primal(sol, c);
      ASSERT_EQ(ex.candidates.size(), 1u) << cfg.label();
      EXPECT_FALSE(ex.nullspace.ambiguous());
      EXPECT_LE(rotation_geodesic_error(ex.candidates[0].rotation, inst.extrinsic.rotation), 1e-6);
      EXPECT_NEAR(*ex.candidates[0].scale, inst.scale, 1e-6);
    }
  }
}

TEST(ExtractPrimal, DegenerateDatasetIsAmbiguous) {
  CostOptions relaxed;
  relaxed.require_translation_excitation = false;
  const CostMatrices c = build_cost(identity_dataset(5), relaxed);
  DualSolution sol;
  sol.Z = c.Q_homog;
  sol.nu = Eigen::VectorXd::Zero(7);
  const NullspaceInfo ns = nullspace_of(sol.Z);
  EXPECT_GT(ns.nullspace_dim, 1);
  EXPECT_TRUE(ns.ambiguous());
  const Extraction ex = extract_primal(sol, c);
  EXPECT_TRUE(ex.nullspace.ambiguous());
  const Certificate cert = certify(ex.candidates.front(), sol, c);
  EXPECT_FALSE(cert.certified);
  EXPECT_GT(cert.nullspace_dim, 1);
}

TEST(ExtractPrimal, SignOfNullVectorCancels) {
  const auto inst = instance(11, 1.0);
  const CostMatrices c = build_cost(inst.clean);
  const DualSolution sol = solve_dual(c, build_constraints(ConstraintConfig::full()));
  const NullspaceInfo ns = nullspace_of(sol.Z);
  ASSERT_GE(ns.nullspace_dim, 1);
  for (Eigen::Index k = 0; k < ns.basis.cols(); ++k) {
    const Vec10 v = ns.basis.col(k);
    if (std::abs(v(9)) < 1e-6) continue;
    const Vec10 w = -v;
    EXPECT_EQ(unvec(v.head<9>() / v(9)), unvec(w.head<9>() / w(9)));
  }
}

TEST(ExtractPrimal, EmptyNullspaceThrows) {
  const auto inst = instance(12, 1.0);
  const CostMatrices c = build_cost(inst.clean);
  DualSolution sol;
  sol.Z = Mat10::Identity();
  sol.nu = Eigen::VectorXd::Zero(7);
  EXPECT_THROW(extract_primal(sol, c), Error);
}

TEST(Certify, NoiseFreeIsCertifiedWithTinyGap) {
  const auto inst = instance(13, 3.0);
  const CostMatrices c = build_cost(inst.clean);
  const DualSolution sol = solve_dual(c, build_constraints(ConstraintConfig::row_only()));
  const Extraction ex = extract_primal(sol, c);
  const Certificate cert = certify(ex.candidates[0], sol, c);
  EXPECT_TRUE(cert.certified);
  EXPECT_LE(cert.relative_gap, 1e-8);
  EXPECT_TRUE(cert.reasons.empty());
}

TEST(Certify, CorruptedMultiplierFails) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = instance(seed, 1.0, 1.0, 0.01);
    const CostMatrices c = build_cost(inst.noisy);
    const ConstraintSet s = build_constraints(ConstraintConfig::full());
    const DualSolution sol = solve_dual(c, s);
    const Extraction ex = extract_primal(sol, c);
    for (Eigen::Index k = 0; k < sol.nu.size(); ++k) {
      DualSolution bad = sol;
      bad.nu(k) += 0.1;
      bad.objective = bad.nu(bad.nu.size() - 1);
      bad.Z = assemble_Z(c, s, bad.nu);
      const Certificate cert = certify(ex.candidates[0], bad, c);
      EXPECT_FALSE(cert.certified) << "seed " << seed << " multiplier " << k;
    }
  }
}

TEST(Certify, RandomRotationCandidateFailsGap) {
  std::mt19937_64 rng(14);
  const auto inst = instance(14, 1.0, 1.0, 0.01);
  const CostMatrices c = build_cost(inst.noisy);
  const DualSolution sol = solve_dual(c, build_constraints(ConstraintConfig::row_only()));
  for (int k = 0; k < 20; ++k) {
    const Rotation r = random_rotation(rng);
    const auto cand = detail::make_candidate(c, vec(r.matrix()), 1.0, "random");
    ASSERT_TRUE(cand.has_value());
    const Certificate cert = certify(*cand, sol, c);
    EXPECT_FALSE(cert.certified);
    EXPECT_GT(cert.relative_gap, 1e-4);
  }
}

TEST(Calibrate, NoiseFreeRecoversScale) {
  const auto inst = instance(15, 2.5);
  for (const auto& cfg : kConfigs) {
    const ExtrinsicEstimate est = calibrate(inst.clean, cfg);
    EXPECT_TRUE(est.certified()) << cfg.label();
    EXPECT_LE(rotation_geodesic_error(est.rotation, inst.extrinsic.rotation), 1e-6);
    EXPECT_LE((est.translation - inst.extrinsic.translation).norm(), 1e-6);
    EXPECT_NEAR(*est.scale, 2.5, 1e-6);
    EXPECT_EQ(est.method, Method::dual_sdp);
    EXPECT_GE(est.primal_cost, 0.0);
  }
}

TEST(Calibrate, OnePercentNoiseCertifies) {
  int certified = 0;
  constexpr int trials = 20;
  for (int k = 0; k < trials; ++k) {
    const auto inst = instance(static_cast<std::uint64_t>(100 + k), 1.0, 1.0, 0.01);
    certified += calibrate(inst.noisy, ConstraintConfig::row_only()).certified() ? 1 : 0;
  }
  EXPECT_EQ(certified, trials);
}

TEST(Calibrate, KnownScaleAgreesWithUnknownScale) {
  const auto inst = instance(16, 1.0);
  EgomotionDataset known = inst.clean;
  known.scale_known = true;
  const ExtrinsicEstimate a = calibrate(inst.clean, ConstraintConfig::row_only());
  const ExtrinsicEstimate b = calibrate(known, ConstraintConfig::row_only());
  EXPECT_TRUE(a.certified());
  EXPECT_TRUE(b.certified());
  EXPECT_FALSE(b.scale.has_value());
  EXPECT_LE(rotation_geodesic_error(a.rotation, b.rotation), 1e-6);
}

TEST(Calibrate, KnownScaleNoisyCertifies) {
  auto inst = instance(17, 1.0, 1.0, 0.01);
  inst.noisy.scale_known = true;
  const ExtrinsicEstimate est = calibrate(inst.noisy, ConstraintConfig::full());
  EXPECT_TRUE(est.certified());
  EXPECT_LE(rotation_geodesic_error(est.rotation, inst.extrinsic.rotation), 0.05);
}

TEST(Calibrate, PlanarRotationsFailWithDiagnostic) {
  std::vector<RigidTransform> motions;
  for (int i = 0; i < 20; ++i) {
    motions.push_back({exp_so3(Vec3(0, 0, 0.1 + 0.01 * i)), Vec3(0.4, 0.05 * i, 0.0)});
  }
  std::mt19937_64 rng(18);
  const RigidTransform theta{random_rotation(rng), random_vec(rng)};
  const EgomotionDataset d = consistent_dataset(motions, theta, 1.0);
  try {
    const ExtrinsicEstimate est = calibrate(d, ConstraintConfig::row_only());
    EXPECT_FALSE(est.certified());
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("observability"), std::string::npos) << e.what();
  }
}
