#include "hyperfit/materials.hpp"
#include "hyperfit/model.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace hyperfit;

namespace {

const AnalyticKind kKinds[] = {AnalyticKind::NeoHooke, AnalyticKind::MooneyRivlin,
                               AnalyticKind::Isihara, AnalyticKind::FungDemiray};

Mat3 random_f(Rng& rng, double scale) {
  Mat3 g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = scale * rng.gaussian();
  Mat3 F = Mat3::Identity() + g;
  if (F.determinant() <= 0.2) F = Mat3::Identity() + 0.2 * g;
  return F;
}

// Finite-difference oracle for the invariant gradient of W.
Vec3 fd_gradient(const AnalyticModel& m, double I1, double I2, double J, double h) {
  Vec3 g;
  g[0] = (analytic_energy(m, I1 + h, I2, J).W - analytic_energy(m, I1 - h, I2, J).W) / (2 * h);
  g[1] = (analytic_energy(m, I1, I2 + h, J).W - analytic_energy(m, I1, I2 - h, J).W) / (2 * h);
  g[2] = (analytic_energy(m, I1, I2, J + h).W - analytic_energy(m, I1, I2, J - h).W) / (2 * h);
  return g;
}

}  // namespace

TEST_CASE("analytic laws vanish and are stress free at the reference state") {
  for (auto kind : kKinds) {
    const auto m = analytic_default(kind);
    const auto e = analytic_energy(m, 3.0, 3.0, 1.0);
    INFO(analytic_name(kind));
    CHECK(std::abs(e.W) < 1e-14);
    // normal stress coefficient at identity: 2 dW1 + 4 dW2 + dW3
    CHECK(std::abs(2.0 * e.dW[0] + 4.0 * e.dW[1] + e.dW[2]) < 1e-13);
    const auto s = invariants(Mat3::Identity());
    CHECK(piola_stress(e, s).norm() < 1e-13);
  }
}

TEST_CASE("invariant gradients match finite differences") {
  Rng rng(5);
  for (auto kind : kKinds) {
    const auto m = analytic_default(kind);
    for (int trial = 0; trial < 30; ++trial) {
      const auto s = invariants(random_f(rng, 0.2));
      const auto e = analytic_energy(m, s.I1, s.I2, s.J);
      const Vec3 fd = fd_gradient(m, s.I1, s.I2, s.J, 1e-6);
      INFO(analytic_name(kind) << " I1=" << s.I1 << " J=" << s.J);
      REQUIRE((e.dW - fd).norm() < 2e-6 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("invariant hessians match finite differences of the gradient") {
  Rng rng(6);
  for (auto kind : kKinds) {
    const auto m = analytic_default(kind);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = invariants(random_f(rng, 0.2));
      const auto e = analytic_energy(m, s.I1, s.I2, s.J);
      const double h = 1e-6;
      Mat3 fd;
      fd.col(0) = (analytic_energy(m, s.I1 + h, s.I2, s.J).dW -
                   analytic_energy(m, s.I1 - h, s.I2, s.J).dW) /
                  (2 * h);
      fd.col(1) = (analytic_energy(m, s.I1, s.I2 + h, s.J).dW -
                   analytic_energy(m, s.I1, s.I2 - h, s.J).dW) /
                  (2 * h);
      fd.col(2) = (analytic_energy(m, s.I1, s.I2, s.J + h).dW -
                   analytic_energy(m, s.I1, s.I2, s.J - h).dW) /
                  (2 * h);
      INFO(analytic_name(kind));
      REQUIRE((e.d2W - fd).norm() < 5e-5 * (1.0 + fd.norm()));
      REQUIRE((e.d2W - e.d2W.transpose()).norm() < 1e-14);
    }
  }
}

TEST_CASE("frozen energy value for default coefficients") {
  // Hand evaluation at (I1, I2, J) = (3.5, 3.2, 1.1):
  //   ln 1.1 = 0.09531017980432486
  //   mr: 1.0*(0.5 - 2 ln) + 0.8*(0.2 - 4 ln) + 0.5*1.0*0.1*ln
  const auto mr = analytic_default(AnalyticKind::MooneyRivlin);
  const double lnJ = 0.09531017980432486;
  const double expect =
      (0.5 - 2.0 * lnJ) + 0.8 * (0.2 - 4.0 * lnJ) + 0.5 * 0.1 * lnJ;
  CHECK(analytic_energy(mr, 3.5, 3.2, 1.1).W == Catch::Approx(expect).epsilon(1e-13));
}

TEST_CASE("piola stress matches finite differences through the invariants") {
  Rng rng(9);
  for (auto kind : kKinds) {
    const auto m = analytic_default(kind);
    for (int trial = 0; trial < 15; ++trial) {
      const Mat3 F = random_f(rng, 0.15);
      const auto s = invariants(F);
      const Mat3 P = piola_stress(analytic_energy(m, s.I1, s.I2, s.J), s);
      const double h = 1e-6;
      Mat3 fd;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Mat3 Fp = F, Fm = F;
          Fp(i, j) += h;
          Fm(i, j) -= h;
          const auto sp = invariants(Fp);
          const auto sm = invariants(Fm);
          fd(i, j) = (analytic_energy(m, sp.I1, sp.I2, sp.J).W -
                      analytic_energy(m, sm.I1, sm.I2, sm.J).W) /
                     (2 * h);
        }
      INFO(analytic_name(kind));
      REQUIRE((P - fd).norm() < 5e-6 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("uniaxial closed form for mooney rivlin") {
  const auto m = analytic_default(AnalyticKind::MooneyRivlin);
  const double C1 = m.coeff[0], C2 = m.coeff[1], K = m.coeff[2];
  const double lam = 1.2;
  Mat3 F = Mat3::Identity();
  F(0, 0) = lam;
  const auto s = invariants(F);
  const Mat3 P = piola_stress(analytic_energy(m, s.I1, s.I2, s.J), s);
  // Independent arithmetic: I1 = lam^2 + 2, cof = diag(1, lam, lam).
  const double I1 = lam * lam + 2.0;
  const double dJ = (-2.0 * C1 - 4.0 * C2) / lam + 0.5 * K * (std::log(lam) + 1.0 - 1.0 / lam);
  const double P11 = 2.0 * C1 * lam + 2.0 * C2 * (I1 * lam - lam * lam * lam) + dJ;
  CHECK(P(0, 0) == Catch::Approx(P11).epsilon(1e-13));
  CHECK(std::abs(P(0, 1)) < 1e-14);
}

TEST_CASE("material tangent matches finite differences of the stress") {
  Rng rng(13);
  for (auto kind : kKinds) {
    const auto m = analytic_default(kind);
    const Mat3 F = random_f(rng, 0.12);
    const auto s = invariants(F);
    const auto A = material_tangent(analytic_energy(m, s.I1, s.I2, s.J), s);
    const double h = 1e-6;
    double max_err = 0.0, scale = 0.0;
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) {
        Mat3 Fp = F, Fm = F;
        Fp(k, l) += h;
        Fm(k, l) -= h;
        const auto sp = invariants(Fp);
        const auto sm = invariants(Fm);
        const Mat3 dP = (piola_stress(analytic_energy(m, sp.I1, sp.I2, sp.J), sp) -
                         piola_stress(analytic_energy(m, sm.I1, sm.I2, sm.J), sm)) /
                        (2 * h);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            max_err = std::max(max_err, std::abs(dP(i, j) - A(i, j, k, l)));
            scale = std::max(scale, std::abs(dP(i, j)));
          }
      }
    INFO(analytic_name(kind));
    REQUIRE(max_err < 1e-5 * (1.0 + scale));
  }
}

TEST_CASE("tangent has major symmetry") {
  Rng rng(17);
  const auto m = analytic_default(AnalyticKind::Isihara);
  const Mat3 F = random_f(rng, 0.2);
  const auto s = invariants(F);
  const auto A = material_tangent(analytic_energy(m, s.I1, s.I2, s.J), s);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          REQUIRE(A(i, j, k, l) == Catch::Approx(A(k, l, i, j)).margin(1e-11));
}

TEST_CASE("coefficient jacobian matches finite differences") {
  Rng rng(19);
  for (auto kind : kKinds) {
    auto m = analytic_default(kind);
    const auto s = invariants(random_f(rng, 0.15));
    const MatX jac = analytic_param_jacobian(m, s.I1, s.I2, s.J);
    const double h = 1e-6;
    for (std::size_t c = 0; c < m.coeff.size(); ++c) {
      auto mp = m, mm = m;
      mp.coeff[c] += h;
      mm.coeff[c] -= h;
      const Vec3 fd =
          (analytic_energy(mp, s.I1, s.I2, s.J).dW - analytic_energy(mm, s.I1, s.I2, s.J).dW) /
          (2 * h);
      INFO(analytic_name(kind) << " coeff " << c);
      REQUIRE((Vec3(jac.col(static_cast<int>(c))) - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("objectivity and isotropy of analytic stresses") {
  Rng rng(23);
  const auto m = analytic_default(AnalyticKind::FungDemiray);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 F = random_f(rng, 0.2);
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.gaussian();
    q.normalize();
    const Mat3 R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    const auto s = invariants(F);
    const auto sl = invariants(Mat3(R * F));
    const auto sr = invariants(Mat3(F * R));
    const double W = analytic_energy(m, s.I1, s.I2, s.J).W;
    REQUIRE(analytic_energy(m, sl.I1, sl.I2, sl.J).W == Catch::Approx(W).epsilon(1e-12));
    REQUIRE(analytic_energy(m, sr.I1, sr.I2, sr.J).W == Catch::Approx(W).epsilon(1e-12));
  }
}

TEST_CASE("degenerate states are rejected") {
  const auto m = analytic_default(AnalyticKind::MooneyRivlin);
  CHECK_THROWS_AS(analytic_energy(m, 3.0, 3.0, 0.0), NonPositiveJacobian);
  CHECK_THROWS_AS(analytic_energy(m, 3.0, 3.0, -1.0), NonPositiveJacobian);
  CHECK_THROWS_AS(analytic_param_jacobian(m, 3.0, 3.0, -0.5), NonPositiveJacobian);
}
