#include "hyperfit/kinematics.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace hyperfit;

namespace {

Mat3 random_gradient(Rng& rng, double scale) {
  Mat3 g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = scale * rng.gaussian();
  return g;
}

Mat3 random_rotation(Rng& rng) {
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = rng.gaussian();
  q.normalize();
  Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  return quat.toRotationMatrix();
}

}  // namespace

TEST_CASE("invariants of a diagonal stretch match hand values") {
  Mat3 F = Mat3::Identity();
  F(0, 0) = 2.0;
  const auto s = invariants(F);
  CHECK(s.I1 == Catch::Approx(6.0).margin(1e-14));
  CHECK(s.I2 == Catch::Approx(9.0).margin(1e-14));
  CHECK(s.J == Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("simple shear invariants") {
  Mat3 F = Mat3::Identity();
  F(0, 1) = 0.3;
  const auto s = invariants(F);
  CHECK(s.I1 == Catch::Approx(3.09).margin(1e-14));
  CHECK(s.I2 == Catch::Approx(3.09).margin(1e-14));
  CHECK(s.J == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("cofactor equals det times inverse transpose") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3 F = Mat3::Identity() + random_gradient(rng, 0.25);
    if (F.determinant() <= 0.05) continue;
    const Mat3 c = cofactor(F);
    const Mat3 ref = F.determinant() * F.inverse().transpose();
    REQUIRE((c - ref).norm() < 1e-12 * ref.norm());
    // F^T cof F = J I
    const Mat3 prod = F.transpose() * c;
    REQUIRE((prod - F.determinant() * Mat3::Identity()).norm() < 1e-12 * prod.norm());
  }
}

TEST_CASE("degenerate deformation gradients are rejected") {
  Mat3 F = Mat3::Identity();
  F(0, 0) = -1.0;
  CHECK_THROWS_AS(invariants(F), NonPositiveJacobian);
  F(0, 0) = 0.0;
  CHECK_THROWS_AS(invariants(F), NonPositiveJacobian);
}

TEST_CASE("principal stretches of a diagonal stretch") {
  Mat3 F = Mat3::Identity();
  F(0, 0) = 2.0;
  F(1, 1) = 0.5;
  const auto lam = principal_stretches(F);
  CHECK(lam[0] == Catch::Approx(2.0).margin(1e-12));
  CHECK(lam[1] == Catch::Approx(1.0).margin(1e-12));
  CHECK(lam[2] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("stretch product equals the volume ratio") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    Mat3 F = Mat3::Identity() + random_gradient(rng, 0.3);
    const double J = F.determinant();
    if (J <= 0.05) continue;
    const auto lam = principal_stretches(F);
    REQUIRE(lam[0] >= lam[1]);
    REQUIRE(lam[1] >= lam[2]);
    REQUIRE(lam[0] * lam[1] * lam[2] == Catch::Approx(J).epsilon(1e-10));
    // sum of squares recovers I1
    const double I1 = lam[0] * lam[0] + lam[1] * lam[1] + lam[2] * lam[2];
    REQUIRE(I1 == Catch::Approx(F.squaredNorm()).epsilon(1e-10));
  }
}

TEST_CASE("stretches are rotation invariant") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 F = Mat3::Identity() + random_gradient(rng, 0.25);
    if (F.determinant() <= 0.05) continue;
    const Mat3 R = random_rotation(rng);
    const auto a = principal_stretches(F);
    const auto b = principal_stretches(R * F);
    const auto c = principal_stretches(F * R);
    for (int k = 0; k < 3; ++k) {
      REQUIRE(a[k] == Catch::Approx(b[k]).epsilon(1e-10));
      REQUIRE(a[k] == Catch::Approx(c[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("symmetric eigenvalues of a known matrix") {
  Mat3 A;
  A << 2, 1, 0, 1, 2, 0, 0, 0, 3;
  const auto e = symmetric_eigenvalues(A);
  CHECK(e[0] == Catch::Approx(3.0).margin(1e-12));
  CHECK(e[1] == Catch::Approx(3.0).margin(1e-12));
  CHECK(e[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("canonical plane strain deformations") {
  const double d = 0.2;
  Mat3 ut = canonical_deformation(CanonicalMode::UniaxialTension, d);
  CHECK(ut(0, 0) == Catch::Approx(1.2));
  CHECK(ut(1, 1) == 1.0);
  CHECK(ut(2, 2) == 1.0);

  Mat3 uc = canonical_deformation(CanonicalMode::UniaxialCompression, d);
  CHECK(uc(0, 0) == Catch::Approx(1.0 / 1.2));

  Mat3 bt = canonical_deformation(CanonicalMode::BiaxialTension, d);
  CHECK(bt(0, 0) == Catch::Approx(1.2));
  CHECK(bt(1, 1) == Catch::Approx(1.2));

  Mat3 bc = canonical_deformation(CanonicalMode::BiaxialCompression, 0.5);
  CHECK(bc(0, 0) == Catch::Approx(2.0 / 3.0));

  Mat3 sh = canonical_deformation(CanonicalMode::SimpleShear, d);
  CHECK(sh(0, 1) == Catch::Approx(0.2));
  CHECK(sh(1, 0) == 0.0);
  CHECK(sh.determinant() == Catch::Approx(1.0));
}

TEST_CASE("isochoric invariants ignore volumetric scaling") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 F = Mat3::Identity() + random_gradient(rng, 0.2);
    if (F.determinant() <= 0.05) continue;
    const auto s = invariants(F);
    const auto iso = isochoric_invariants(s);
    const double alpha = 1.0 + 0.5 * rng.uniform();
    const auto s2 = invariants(Mat3(alpha * F));
    const auto iso2 = isochoric_invariants(s2);
    REQUIRE(iso.I1_bar == Catch::Approx(iso2.I1_bar).epsilon(1e-12));
    REQUIRE(iso.I2_bar == Catch::Approx(iso2.I2_bar).epsilon(1e-12));
    REQUIRE(iso.I2_bar_32 == Catch::Approx(std::pow(iso.I2_bar, 1.5)).epsilon(1e-13));
  }
}

TEST_CASE("identity state") {
  const auto s = invariants(Mat3::Identity());
  CHECK(s.I1 == 3.0);
  CHECK(s.I2 == 3.0);
  CHECK(s.J == 1.0);
  const auto iso = isochoric_invariants(s);
  CHECK(iso.I1_bar == Catch::Approx(3.0).margin(1e-15));
  CHECK(iso.I2_bar == Catch::Approx(3.0).margin(1e-15));
}
