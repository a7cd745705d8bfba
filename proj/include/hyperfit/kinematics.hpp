#pragma once

#include "hyperfit/common.hpp"

#include <array>
#include <cmath>

namespace hyperfit {

// 2D problems are treated as plane strain: the deformation gradient is
// embedded in 3x3 form with F(2,2) = 1 and zero out-of-plane coupling, so
// the constitutive layer never needs a dimension switch.

/// Deformation gradient from a displacement gradient (F = 1 + grad d).
inline Mat3 deformation_gradient(const Mat3& grad_d) {
  return Mat3::Identity() + grad_d;
}

/// Cofactor matrix, cof(F) = det(F) F^{-T}, built from column cross
/// products so no inverse is required.
inline Mat3 cofactor(const Mat3& F) {
  Mat3 c;
  c.col(0) = F.col(1).cross(F.col(2));
  c.col(1) = F.col(2).cross(F.col(0));
  c.col(2) = F.col(0).cross(F.col(1));
  return c;
}

/// Invariant triple used throughout: I1 = |F|^2, I2 = |cof F|^2, J = det F.
struct DeformationState {
  Mat3 F;
  Mat3 cof;
  double I1 = 0.0;
  double I2 = 0.0;
  double J = 0.0;
};

/// Computes invariants. Throws NonPositiveJacobian when det F <= 0; no
/// downstream code ever sees a degenerate state.
inline DeformationState invariants(const Mat3& F) {
  DeformationState s;
  s.F = F;
  s.cof = cofactor(F);
  s.J = F.determinant();
  if (!(s.J > 0.0)) throw NonPositiveJacobian(s.J);
  s.I1 = F.squaredNorm();
  s.I2 = s.cof.squaredNorm();
  return s;
}

struct IsochoricInvariants {
  double I1_bar = 0.0;   // J^{-2/3} I1
  double I2_bar = 0.0;   // J^{-4/3} I2
  double I2_bar_32 = 0.0;  // I2_bar^{3/2}
};

inline IsochoricInvariants isochoric_invariants(const DeformationState& s) {
  IsochoricInvariants iso;
  const double Jm23 = std::pow(s.J, -2.0 / 3.0);
  iso.I1_bar = Jm23 * s.I1;
  iso.I2_bar = Jm23 * Jm23 * s.I2;
  iso.I2_bar_32 = std::pow(iso.I2_bar, 1.5);
  return iso;
}

/// Eigenvalues of a symmetric 3x3 matrix, descending, by the trigonometric
/// closed form. Input symmetry is assumed, not checked.
inline std::array<double, 3> symmetric_eigenvalues(const Mat3& A) {
  const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
  std::array<double, 3> eig;
  if (p1 == 0.0) {
    eig = {A(0, 0), A(1, 1), A(2, 2)};
  } else {
    const double q = A.trace() / 3.0;
    const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) +
                      (A(2, 2) - q) * (A(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Mat3 B = (A - q * Mat3::Identity()) / p;
    double r = B.determinant() / 2.0;
    r = std::min(1.0, std::max(-1.0, r));
    const double phi = std::acos(r) / 3.0;
    eig[0] = q + 2.0 * p * std::cos(phi);
    eig[2] = q + 2.0 * p * std::cos(phi + 2.0943951023931954923);
    eig[1] = 3.0 * q - eig[0] - eig[2];
  }
  if (eig[0] < eig[1]) std::swap(eig[0], eig[1]);
  if (eig[1] < eig[2]) std::swap(eig[1], eig[2]);
  if (eig[0] < eig[1]) std::swap(eig[0], eig[1]);
  return eig;
}

/// Principal stretches: singular values of F, descending. Their product
/// equals det F up to roundoff.
inline std::array<double, 3> principal_stretches(const Mat3& F) {
  const Mat3 C = F.transpose() * F;
  auto eig = symmetric_eigenvalues(C);
  for (double& e : eig) e = std::sqrt(std::max(e, 0.0));
  return eig;
}

// ---------------------------------------------------------------------------
// Canonical homogeneous deformations (plane strain, embedded 3x3).
// ---------------------------------------------------------------------------

enum class CanonicalMode {
  UniaxialTension,
  UniaxialCompression,
  BiaxialTension,
  BiaxialCompression,
  SimpleShear,
};

/// In-plane canonical deformation at magnitude delta >= 0.
inline Mat3 canonical_deformation(CanonicalMode mode, double delta) {
  Mat3 F = Mat3::Identity();
  switch (mode) {
    case CanonicalMode::UniaxialTension:
      F(0, 0) = 1.0 + delta;
      break;
    case CanonicalMode::UniaxialCompression:
      F(0, 0) = 1.0 / (1.0 + delta);
      break;
    case CanonicalMode::BiaxialTension:
      F(0, 0) = F(1, 1) = 1.0 + delta;
      break;
    case CanonicalMode::BiaxialCompression:
      F(0, 0) = F(1, 1) = 1.0 / (1.0 + delta);
      break;
    case CanonicalMode::SimpleShear:
      F(0, 1) = delta;
      break;
  }
  return F;
}

}  // namespace hyperfit
