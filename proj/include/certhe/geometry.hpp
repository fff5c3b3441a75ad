#pragma once

// Rotation and rigid-transform primitives: skew/vec/Kronecker helpers,
// SO(3) exponential and logarithm, nearest-rotation projection and uniform
// rotation sampling.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "certhe/errors.hpp"

namespace certhe {

using Vec3 = Eigen::Vector3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat10 = Eigen::Matrix<double, 10, 10>;

inline constexpr double kRotationTolerance = 1e-9;

/// ‖MᵀM − I‖_F
inline double orthogonality_residual(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3& m, double tol = kRotationTolerance) {
  return orthogonality_residual(m) <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

class Rotation;
inline Rotation exp_so3(const Vec3& phi);
inline Rotation nearest_rotation(const Mat3& m);

/// A proper orthonormal 3×3 matrix. Construction from an arbitrary matrix is
/// checked; use nearest_rotation() to obtain one from a noisy estimate.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  explicit Rotation(const Mat3& m) : m_(m) {
    if (!is_rotation(m)) {
      std::ostringstream os;
      os << "matrix is not in SO(3): orthogonality residual " << orthogonality_residual(m)
         << ", det " << m.determinant();
      throw Error(Stage::geometry, os.str());
    }
  }

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Rotation transpose() const { return unchecked(m_.transpose()); }
  Rotation operator*(const Rotation& other) const { return unchecked(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  static Rotation unchecked(const Mat3& m) {
    Rotation r;
    r.m_ = m;
    return r;
  }
  friend Rotation exp_so3(const Vec3& phi);
  friend Rotation nearest_rotation(const Mat3& m);

  Mat3 m_;
};

struct AxisAngle {
  Vec3 axis = Vec3::UnitX();
  double angle = 0.0;  // radians, [0, π]
};

/// Proper rigid transform T = [R t; 0 1].
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Mat4 homogeneous() const {
    Mat4 h = Mat4::Identity();
    h.topLeftCorner<3, 3>() = rotation.matrix();
    h.topRightCorner<3, 1>() = translation;
    return h;
  }

  RigidTransform inverse() const {
    const Rotation rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

inline Mat3 hat(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

inline Vec3 vee(const Mat3& s) { return {s(2, 1), s(0, 2), s(1, 0)}; }

/// Column-major vectorization (first column first).
inline Vec9 vec(const Mat3& m) { return Eigen::Map<const Vec9>(m.data()); }

/// Inverse of vec().
inline Mat3 unvec(const Eigen::Ref<const Vec9>& v) {
  Mat3 m;
  Eigen::Map<Vec9>(m.data()) = v;
  return m;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return k;
}

/// Rodrigues formula.
inline Rotation exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = hat(phi);
  double a;
  double b;
  if (theta < 1e-6) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  Mat3 r = Mat3::Identity() + a * k + b * k * k;
  // Re-orthonormalize to keep the invariant tight for large ‖φ‖.
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return Rotation::unchecked(svd.matrixU() * svd.matrixV().transpose());
}

inline AxisAngle to_axis_angle(const Rotation& r) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(r.matrix()).normalized());
  AxisAngle out;
  out.angle = aa.angle();
  out.axis = aa.axis();
  if (out.angle > std::numbers::pi) {
    out.angle = 2.0 * std::numbers::pi - out.angle;
    out.axis = -out.axis;
  }
  if (out.angle == 0.0) out.axis = Vec3::UnitX();
  return out;
}

/// Principal logarithm, ‖result‖ ∈ [0, π].
inline Vec3 log_so3(const Rotation& r) {
  const AxisAngle aa = to_axis_angle(r);
  return aa.angle * aa.axis;
}

/// argmin_{R ∈ SO(3)} ‖R − M‖_F via SVD with determinant correction.
inline Rotation nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) < 1e-12 * s(0)) {
    throw Error(Stage::geometry, "nearest rotation is not unique: matrix has rank < 2");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation::unchecked(u * d * v.transpose());
}

/// Geodesic distance on SO(3), symmetric in its arguments.
inline double rotation_geodesic_error(const Rotation& a, const Rotation& b) {
  const double c = 0.5 * ((a.matrix().transpose() * b.matrix()).trace() - 1.0);
  // acos is ill-conditioned near 0; fall back to the skew part there.
  if (c > 0.99) {
    const Mat3 d = a.matrix().transpose() * b.matrix();
    const double s = 0.5 * vee(d - d.transpose()).norm();
    return std::atan2(s, std::clamp(c, -1.0, 1.0));
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Uniform sample on SO(3) from a normalized quaternion of four N(0,1) draws.
template <class Rng>
Rotation random_rotation(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    const double w = normal(rng);
    const double x = normal(rng);
    const double y = normal(rng);
    const double z = normal(rng);
    q = Eigen::Quaterniond(w, x, y, z);
  } while (q.norm() < 1e-12);
  return nearest_rotation(q.normalized().toRotationMatrix());
}

}  // namespace certhe
