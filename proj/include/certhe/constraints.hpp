#pragma once

// Homogeneous quadratic constraints r̃ᵀ A r̃ = 0 describing O(3)/SO(3) membership
// of R = unvec(r) with the homogenizing variable y (r̃ = [r, y], y² = 1).

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "certhe/errors.hpp"
#include "certhe/geometry.hpp"

namespace certhe {

struct ConstraintConfig {
  bool row_orth = true;     // R Rᵀ = y² I
  bool col_orth = false;    // Rᵀ R = y² I
  bool handedness = false;  // R⁽ⁱ⁾ × R⁽ʲ⁾ = y R⁽ᵏ⁾

  static ConstraintConfig row_only() { return {true, false, false}; }
  static ConstraintConfig full() { return {true, true, true}; }

  void validate() const {
    if (!row_orth && !col_orth) {
      throw Error(Stage::constraints, "need row or column orthogonality constraints");
    }
  }

  /// Short label as used by the CLI: R, C, RC, RH, RCH, ...
  std::string label() const {
    std::string s;
    if (row_orth) s += 'R';
    if (col_orth) s += 'C';
    if (handedness) s += 'H';
    return s;
  }

  static ConstraintConfig parse(const std::string& text) {
    ConstraintConfig c{false, false, false};
    for (char ch : text) {
      switch (ch) {
        case 'R': case 'r': c.row_orth = true; break;
        case 'C': case 'c': c.col_orth = true; break;
        case 'H': case 'h': c.handedness = true; break;
        case '+': case ' ': break;
        default:
          throw Error(Stage::config, "unknown constraint flag '" + std::string(1, ch) +
                                         "' in \"" + text + "\"");
      }
    }
    c.validate();
    return c;
  }

  bool operator==(const ConstraintConfig&) const = default;
};

struct ConstraintSet {
  std::vector<Mat10> matrices;  // target value 0
  std::vector<std::string> labels;
  Mat10 homogenizer = Mat10::Zero();  // e₁₀e₁₀ᵀ, target value 1

  std::size_t size() const { return matrices.size(); }
};

namespace detail {

inline int r_index(int row, int col) { return row + 3 * col; }

/// Adds c·(u_p · u_q) symmetrically.
inline void add_bilinear(Mat10& a, int p, int q, double c) {
  a(p, q) += 0.5 * c;
  a(q, p) += 0.5 * c;
}

}  // namespace detail

/// Enumeration order: row-orthogonality entries (1,1),(1,2),(1,3),(2,2),(2,3),(3,3),
/// then column orthogonality in the same order, then handedness for the cyclic
/// triples (1,2,3),(2,3,1),(3,1,2), three components each.
inline ConstraintSet build_constraints(const ConstraintConfig& config) {
  config.validate();
  using detail::add_bilinear;
  using detail::r_index;
  ConstraintSet set;
  constexpr int y = 9;

  auto pair_label = [](const char* kind, int i, int j) {
    return std::string(kind) + "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
  };

  if (config.row_orth) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        Mat10 a = Mat10::Zero();
        for (int k = 0; k < 3; ++k) add_bilinear(a, r_index(i, k), r_index(j, k), 1.0);
        if (i == j) a(y, y) -= 1.0;
        set.matrices.push_back(a);
        set.labels.push_back(pair_label("row", i, j));
      }
    }
  }
  if (config.col_orth) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        Mat10 a = Mat10::Zero();
        for (int k = 0; k < 3; ++k) add_bilinear(a, r_index(k, i), r_index(k, j), 1.0);
        if (i == j) a(y, y) -= 1.0;
        set.matrices.push_back(a);
        set.labels.push_back(pair_label("col", i, j));
      }
    }
  }
  if (config.handedness) {
    static constexpr int kCyclic[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    static constexpr const char* kAxis = "xyz";
    for (const auto& triple : kCyclic) {
      const int ci = triple[0];
      const int cj = triple[1];
      const int ck = triple[2];
      for (int m = 0; m < 3; ++m) {
        // (u × v)_m = u_{m+1} v_{m+2} − u_{m+2} v_{m+1}
        const int m1 = (m + 1) % 3;
        const int m2 = (m + 2) % 3;
        Mat10 a = Mat10::Zero();
        add_bilinear(a, r_index(m1, ci), r_index(m2, cj), 1.0);
        add_bilinear(a, r_index(m2, ci), r_index(m1, cj), -1.0);
        add_bilinear(a, r_index(m, ck), y, -1.0);
        set.matrices.push_back(a);
        set.labels.push_back("hand(" + std::to_string(ci + 1) + std::to_string(cj + 1) +
                             std::to_string(ck + 1) + ")." + kAxis[m]);
      }
    }
  }
  set.homogenizer(y, y) = 1.0;
  return set;
}

/// (r̃ᵀA_k r̃)_k followed by r̃ᵀA_y r̃ − 1.
inline Eigen::VectorXd constraint_residuals(const ConstraintSet& set, const Vec10& rt) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()) + 1);
  for (std::size_t k = 0; k < set.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = rt.dot(set.matrices[k] * rt);
  }
  out(out.size() - 1) = rt.dot(set.homogenizer * rt) - 1.0;
  return out;
}

inline Vec10 homogenize(const Mat3& r, double y = 1.0) {
  Vec10 rt;
  rt << vec(r), y;
  return rt;
}

}  // namespace certhe
