#pragma once

#include "hyperfit/common.hpp"
#include "hyperfit/kinematics.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hyperfit {

/// Energy and its derivatives with respect to the invariant triple
/// (I1, I2, J), everything a stress or tangent evaluation needs.
struct EnergyEval {
  double W = 0.0;
  Vec3 dW = Vec3::Zero();   // (dW/dI1, dW/dI2, dW/dJ)
  Mat3 d2W = Mat3::Zero();  // symmetric second derivatives, same ordering
};

// ---------------------------------------------------------------------------
// Classical isotropic laws. All are zero-energy and stress-free at the
// reference state by construction, which the tests pin down numerically.
// ---------------------------------------------------------------------------

enum class AnalyticKind { NeoHooke, MooneyRivlin, Isihara, FungDemiray };

inline const char* analytic_name(AnalyticKind k) {
  switch (k) {
    case AnalyticKind::NeoHooke: return "nh";
    case AnalyticKind::MooneyRivlin: return "mr";
    case AnalyticKind::Isihara: return "ih";
    case AnalyticKind::FungDemiray: return "fu";
  }
  return "?";
}

/// Coefficient layout per kind:
///   nh: {C1, K}
///   mr: {C1, C2, K}
///   ih: {C1, C2, C3, K}
///   fu: {C, b, K}
struct AnalyticModel {
  AnalyticKind kind = AnalyticKind::MooneyRivlin;
  std::vector<double> coeff;
};

inline AnalyticModel analytic_default(AnalyticKind k) {
  switch (k) {
    case AnalyticKind::NeoHooke: return {k, {1.0, 1.0}};
    case AnalyticKind::MooneyRivlin: return {k, {1.0, 0.8, 1.0}};
    case AnalyticKind::Isihara: return {k, {0.5, 1.0, 3.0, 1.5}};
    case AnalyticKind::FungDemiray: return {k, {1.0, 3.0, 1.5}};
  }
  return {};
}

inline AnalyticModel analytic_from_name(const std::string& name) {
  if (name == "nh") return analytic_default(AnalyticKind::NeoHooke);
  if (name == "mr") return analytic_default(AnalyticKind::MooneyRivlin);
  if (name == "ih") return analytic_default(AnalyticKind::Isihara);
  if (name == "fu") return analytic_default(AnalyticKind::FungDemiray);
  throw Error("unknown analytic material '" + name + "'");
}

namespace detail {

// Shared isochoric chain pieces: u = J^{-2/3}, I1_bar = u I1, and the
// J-derivatives of the isochoric invariants.
struct IsoChain {
  double u, du;          // J^{-2/3} and d/dJ
  double a1, da1;        // dI1_bar/dJ and d/dJ
  double v, a2, da2;     // J^{-4/3}, dI2_bar/dJ, d/dJ
};

inline IsoChain iso_chain(double I1, double I2, double J) {
  IsoChain c;
  c.u = std::pow(J, -2.0 / 3.0);
  c.du = -2.0 / 3.0 * std::pow(J, -5.0 / 3.0);
  c.a1 = c.du * I1;
  c.da1 = 10.0 / 9.0 * std::pow(J, -8.0 / 3.0) * I1;
  c.v = c.u * c.u;
  c.a2 = -4.0 / 3.0 * std::pow(J, -7.0 / 3.0) * I2;
  c.da2 = 28.0 / 9.0 * std::pow(J, -10.0 / 3.0) * I2;
  return c;
}

}  // namespace detail

/// Evaluates W(I1, I2, J) and both derivative levels for an analytic law.
inline EnergyEval analytic_energy(const AnalyticModel& m, double I1, double I2, double J) {
  if (!(J > 0.0)) throw NonPositiveJacobian(J);
  EnergyEval e;
  const double lnJ = std::log(J);
  switch (m.kind) {
    case AnalyticKind::NeoHooke:
    case AnalyticKind::MooneyRivlin: {
      const double C1 = m.coeff[0];
      const double C2 = m.kind == AnalyticKind::MooneyRivlin ? m.coeff[1] : 0.0;
      const double K = m.coeff.back();
      e.W = C1 * (I1 - 3.0 - 2.0 * lnJ) + C2 * (I2 - 3.0 - 4.0 * lnJ) +
            0.5 * K * (J - 1.0) * lnJ;
      e.dW[0] = C1;
      e.dW[1] = C2;
      e.dW[2] = (-2.0 * C1 - 4.0 * C2) / J + 0.5 * K * (lnJ + 1.0 - 1.0 / J);
      e.d2W(2, 2) = (2.0 * C1 + 4.0 * C2) / (J * J) + 0.5 * K * (1.0 / J + 1.0 / (J * J));
      break;
    }
    case AnalyticKind::Isihara: {
      const double C1 = m.coeff[0], C2 = m.coeff[1], C3 = m.coeff[2], K = m.coeff[3];
      const auto c = detail::iso_chain(I1, I2, J);
      const double x1 = c.u * I1 - 3.0;         // I1_bar - 3
      const double x2 = c.v * I2 - 3.0;         // I2_bar - 3
      const double W1 = C1 + 2.0 * C3 * x1;     // dW/dI1_bar
      e.W = C1 * x1 + C2 * x2 + C3 * x1 * x1 + K * (J - 1.0) * (J - 1.0);
      e.dW[0] = W1 * c.u;
      e.dW[1] = C2 * c.v;
      e.dW[2] = W1 * c.a1 + C2 * c.a2 + 2.0 * K * (J - 1.0);
      e.d2W(0, 0) = 2.0 * C3 * c.u * c.u;
      e.d2W(0, 2) = e.d2W(2, 0) = 2.0 * C3 * c.a1 * c.u + W1 * c.du;
      e.d2W(1, 2) = e.d2W(2, 1) = C2 * -4.0 / 3.0 * std::pow(J, -7.0 / 3.0);
      e.d2W(2, 2) = 2.0 * C3 * c.a1 * c.a1 + W1 * c.da1 + C2 * c.da2 + 2.0 * K;
      break;
    }
    case AnalyticKind::FungDemiray: {
      const double C = m.coeff[0], b = m.coeff[1], K = m.coeff[2];
      const auto c = detail::iso_chain(I1, I2, J);
      const double x1 = c.u * I1 - 3.0;
      const double E = std::exp(b * x1);
      e.W = C / (2.0 * b) * (E - 1.0) + 0.25 * K * ((J - 1.0) * (J - 1.0) + lnJ * lnJ);
      e.dW[0] = 0.5 * C * E * c.u;
      e.dW[2] = 0.5 * C * E * c.a1 + 0.5 * K * ((J - 1.0) + lnJ / J);
      e.d2W(0, 0) = 0.5 * C * b * E * c.u * c.u;
      e.d2W(0, 2) = e.d2W(2, 0) = 0.5 * C * E * (b * c.a1 * c.u + c.du);
      e.d2W(2, 2) = 0.5 * C * E * (b * c.a1 * c.a1 + c.da1) +
                    0.5 * K * (1.0 + (1.0 - lnJ) / (J * J));
      break;
    }
  }
  return e;
}

/// Jacobian of (dW/dI1, dW/dI2, dW/dJ) with respect to the model
/// coefficients, one 3-column per coefficient. Feeds the parameter branch
/// of the stress derivative when an analytic law is being calibrated.
inline MatX analytic_param_jacobian(const AnalyticModel& m, double I1, double I2, double J) {
  if (!(J > 0.0)) throw NonPositiveJacobian(J);
  const double lnJ = std::log(J);
  MatX jac = MatX::Zero(3, static_cast<int>(m.coeff.size()));
  switch (m.kind) {
    case AnalyticKind::NeoHooke:
      jac.col(0) << 1.0, 0.0, -2.0 / J;
      jac.col(1) << 0.0, 0.0, 0.5 * (lnJ + 1.0 - 1.0 / J);
      break;
    case AnalyticKind::MooneyRivlin:
      jac.col(0) << 1.0, 0.0, -2.0 / J;
      jac.col(1) << 0.0, 1.0, -4.0 / J;
      jac.col(2) << 0.0, 0.0, 0.5 * (lnJ + 1.0 - 1.0 / J);
      break;
    case AnalyticKind::Isihara: {
      const auto c = detail::iso_chain(I1, I2, J);
      const double x1 = c.u * I1 - 3.0;
      jac.col(0) << c.u, 0.0, c.a1;
      jac.col(1) << 0.0, c.v, c.a2;
      jac.col(2) << 2.0 * x1 * c.u, 0.0, 2.0 * x1 * c.a1;
      jac.col(3) << 0.0, 0.0, 2.0 * (J - 1.0);
      break;
    }
    case AnalyticKind::FungDemiray: {
      const double C = m.coeff[0], b = m.coeff[1];
      const auto c = detail::iso_chain(I1, I2, J);
      const double x1 = c.u * I1 - 3.0;
      const double E = std::exp(b * x1);
      jac.col(0) << 0.5 * E * c.u, 0.0, 0.5 * E * c.a1;
      jac.col(1) << 0.5 * C * E * x1 * c.u, 0.0, 0.5 * C * E * x1 * c.a1;
      jac.col(2) << 0.0, 0.0, 0.5 * ((J - 1.0) + lnJ / J);
      break;
    }
  }
  return jac;
}

}  // namespace hyperfit
