#pragma once

#include "hyperfit/common.hpp"
#include "hyperfit/materials.hpp"

#include <cmath>
#include <vector>

namespace hyperfit {

// ---------------------------------------------------------------------------
// Positive layered network over the invariant triple, completed with a
// volumetric term and a reference-state correction so that energy and
// stress vanish identically at the undeformed state while convexity in
// (F, cof F, det F) is preserved.
//
// Effective weights are produced from unconstrained storage through
// softplus; the weight on the J input stays unconstrained (linear terms in
// J do not break convexity). Incoming linear maps are scaled by the inverse
// of the number of incoming neurons so that activation statistics at
// initialization are width-independent.
// ---------------------------------------------------------------------------

struct HnnArchitecture {
  int layers = 1;                // L >= 1
  int width = 5;                 // neurons per hidden layer
  bool skip_connections = false; // invariants feed layers >= 2 directly
  bool isochoric_inputs = false; // (I1_bar, I2_bar^{3/2}, J) instead of (I1, I2, J)
  double w_scale = 10.0;         // output scale multiplying the network
  double sigma_init = 0.1;       // stddev of raw weight initialization
};

/// Flat storage order of the raw parameter vector. Per layer i (1-based):
/// layer 1 and, when skip connections are on, every layer carry the three
/// input weight blocks (wI, wII, wJ) of size n; every layer carries a bias
/// block of size n; layers >= 2 carry the n x n hidden map, row-major.
/// The vector ends with the n output weights and the volumetric weight.
struct HnnLayout {
  int L = 0, n = 0;
  bool skip = false;
  int total = 0;

  explicit HnnLayout(const HnnArchitecture& a)
      : L(a.layers), n(a.width), skip(a.skip_connections) {
    total = 3 * n + n;  // layer 1 inputs + bias
    for (int i = 2; i <= L; ++i) total += (skip ? 3 * n : 0) + n * n + n;
    total += n + 1;  // output weights + volumetric weight
  }

  bool layer_has_inputs(int i) const { return i == 1 || skip; }

  int layer_offset(int i) const {  // 1-based layer index
    int off = 0;
    for (int k = 1; k < i; ++k)
      off += (layer_has_inputs(k) ? 3 * n : 0) + (k >= 2 ? n * n : 0) + n;
    return off;
  }
  // Offsets of the blocks inside layer i; only valid when present.
  int wI(int i) const { return layer_offset(i); }
  int wII(int i) const { return layer_offset(i) + n; }
  int wJ(int i) const { return layer_offset(i) + 2 * n; }
  int Wz(int i) const { return layer_offset(i) + (layer_has_inputs(i) ? 3 * n : 0); }
  int bias(int i) const {
    return layer_offset(i) + (layer_has_inputs(i) ? 3 * n : 0) + (i >= 2 ? n * n : 0);
  }
  int w_out() const { return layer_offset(L + 1); }
  int w_vol() const { return total - 1; }
};

struct HnnParams {
  VecX raw;
};

/// Seeded Gaussian initialization: raw weights are i.i.d. N(0, sigma_init^2)
/// drawn in storage order, biases and the raw volumetric weight start at
/// zero. Identical seeds give bitwise identical parameters.
inline HnnParams hnn_init(const HnnArchitecture& arch, std::uint64_t seed) {
  const HnnLayout lay(arch);
  HnnParams p;
  p.raw = VecX::Zero(lay.total);
  Rng rng(seed);
  for (int i = 1; i <= lay.L; ++i) {
    if (lay.layer_has_inputs(i))
      for (int k = 0; k < 3 * lay.n; ++k) p.raw[lay.wI(i) + k] = arch.sigma_init * rng.gaussian();
    if (i >= 2)
      for (int k = 0; k < lay.n * lay.n; ++k)
        p.raw[lay.Wz(i) + k] = arch.sigma_init * rng.gaussian();
    // biases stay zero
  }
  for (int k = 0; k < lay.n; ++k) p.raw[lay.w_out() + k] = arch.sigma_init * rng.gaussian();
  // raw volumetric weight stays zero
  return p;
}

namespace detail {

/// Per-layer forward record kept for the reverse parameter sweeps.
struct PnnTrace {
  // layer-indexed (0 = layer 1): pre-activations, activations, the
  // pre-activation input jacobian T = A + Wz G_prev, and G = dz/dx.
  std::vector<VecX> s, z;
  std::vector<MatX> T, G;
};

struct PnnEval {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

/// Forward pass of the positive core network on inputs x (already shifted
/// so that x = 0 at the reference state), with exact first and second
/// derivatives with respect to x. Optionally records the trace.
inline PnnEval pnn_eval(const HnnArchitecture& arch, const HnnLayout& lay, const HnnParams& p,
                        const Vec3& x, PnnTrace* trace = nullptr) {
  const int n = lay.n;
  VecX z_prev;
  MatX G_prev;                       // n x 3
  std::vector<Mat3> H_prev;          // per-neuron input Hessians
  if (trace) {
    trace->s.assign(lay.L, VecX());
    trace->z.assign(lay.L, VecX());
    trace->T.assign(lay.L, MatX());
    trace->G.assign(lay.L, MatX());
  }
  for (int i = 1; i <= lay.L; ++i) {
    VecX s = VecX::Zero(n);
    MatX T = MatX::Zero(n, 3);
    std::vector<Mat3> Hpre(n, Mat3::Zero());
    if (lay.layer_has_inputs(i)) {
      for (int k = 0; k < n; ++k) {
        const double wi = softplus(p.raw[lay.wI(i) + k]);
        const double wii = softplus(p.raw[lay.wII(i) + k]);
        const double wj = p.raw[lay.wJ(i) + k];
        s[k] += wi * x[0] + wii * x[1] + wj * x[2];
        T(k, 0) += wi;
        T(k, 1) += wii;
        T(k, 2) += wj;
      }
    }
    if (i >= 2) {
      for (int k = 0; k < n; ++k) {
        for (int m = 0; m < n; ++m) {
          const double w = softplus(p.raw[lay.Wz(i) + k * n + m]) / n;
          s[k] += w * z_prev[m];
          T.row(k) += w * G_prev.row(m);
          Hpre[k] += w * H_prev[m];
        }
      }
    }
    for (int k = 0; k < n; ++k) s[k] += p.raw[lay.bias(i) + k];

    VecX z(n);
    MatX G(n, 3);
    std::vector<Mat3> H(n);
    for (int k = 0; k < n; ++k) {
      const double d1 = activation_d1(s[k]);
      const double d2 = activation_d2(s[k]);
      z[k] = activation(s[k]);
      G.row(k) = d1 * T.row(k);
      H[k] = d2 * (T.row(k).transpose() * T.row(k)) + d1 * Hpre[k];
    }
    if (trace) {
      trace->s[i - 1] = s;
      trace->z[i - 1] = z;
      trace->T[i - 1] = T;
      trace->G[i - 1] = G;
    }
    z_prev = std::move(z);
    G_prev = std::move(G);
    H_prev = std::move(H);
  }

  PnnEval out;
  for (int k = 0; k < n; ++k) {
    const double wo = arch.w_scale * softplus(p.raw[lay.w_out() + k]) / n;
    out.value += wo * z_prev[k];
    out.grad += wo * G_prev.row(k).transpose();
    out.hess += wo * H_prev[k];
  }
  return out;
}

/// Reverse sweeps through the recorded forward pass: jacobian of the three
/// input-gradient components of the core network output with respect to
/// every raw parameter. Row layout matches HnnLayout; the volumetric row
/// is zero because the core network does not see it.
inline MatX pnn_grad_param_jacobian(const HnnArchitecture& arch, const HnnLayout& lay,
                                    const HnnParams& p, const Vec3& x, const PnnTrace& tr) {
  const int n = lay.n;
  MatX jac = MatX::Zero(lay.total, 3);
  for (int j = 0; j < 3; ++j) {
    // Adjoints of the layer state (z, column j of G).
    VecX zbar = VecX::Zero(n);
    VecX gbar(n);
    for (int k = 0; k < n; ++k) {
      const double raw = p.raw[lay.w_out() + k];
      gbar[k] = arch.w_scale * softplus(raw) / n;
      jac(lay.w_out() + k, j) +=
          arch.w_scale * tr.G[lay.L - 1](k, j) * sigmoid(raw) / n;
    }
    for (int i = lay.L; i >= 1; --i) {
      const VecX& s = tr.s[i - 1];
      VecX sbar(n), tbar(n);  // tbar = adjoint of T(:, j)
      for (int k = 0; k < n; ++k) {
        const double d1 = activation_d1(s[k]);
        const double d2 = activation_d2(s[k]);
        sbar[k] = zbar[k] * d1 + gbar[k] * d2 * tr.T[i - 1](k, j);
        tbar[k] = gbar[k] * d1;
      }
      if (lay.layer_has_inputs(i)) {
        for (int k = 0; k < n; ++k) {
          const double dwi = sigmoid(p.raw[lay.wI(i) + k]);
          const double dwii = sigmoid(p.raw[lay.wII(i) + k]);
          jac(lay.wI(i) + k, j) += (sbar[k] * x[0] + (j == 0 ? tbar[k] : 0.0)) * dwi;
          jac(lay.wII(i) + k, j) += (sbar[k] * x[1] + (j == 1 ? tbar[k] : 0.0)) * dwii;
          jac(lay.wJ(i) + k, j) += sbar[k] * x[2] + (j == 2 ? tbar[k] : 0.0);
        }
      }
      for (int k = 0; k < n; ++k) jac(lay.bias(i) + k, j) += sbar[k];
      if (i >= 2) {
        const VecX& zp = tr.z[i - 2];
        const MatX& Gp = tr.G[i - 2];
        VecX zbar_prev = VecX::Zero(n), gbar_prev = VecX::Zero(n);
        for (int k = 0; k < n; ++k) {
          for (int m = 0; m < n; ++m) {
            const double raw = p.raw[lay.Wz(i) + k * n + m];
            const double w = softplus(raw) / n;
            jac(lay.Wz(i) + k * n + m, j) +=
                (sbar[k] * zp[m] + tbar[k] * Gp(m, j)) * sigmoid(raw) / n;
            zbar_prev[m] += w * sbar[k];
            gbar_prev[m] += w * tbar[k];
          }
        }
        zbar = std::move(zbar_prev);
        gbar = std::move(gbar_prev);
      }
    }
  }
  return jac;
}

/// Network inputs from the invariants, plus the chain jacobian dx/d(I1,I2,J)
/// and, when requested, the second-derivative tensors of each input.
inline Vec3 hnn_inputs(const HnnArchitecture& arch, double I1, double I2, double J, Mat3* jac,
                       Mat3 d2x[3] = nullptr) {
  Vec3 x;
  if (!arch.isochoric_inputs) {
    x << I1 - 3.0, I2 - 3.0, J - 1.0;
    if (jac) *jac = Mat3::Identity();
    if (d2x)
      for (int k = 0; k < 3; ++k) d2x[k].setZero();
    return x;
  }
  // x1 = J^{-2/3} I1 - 3, x2 = (J^{-4/3} I2)^{3/2} - 3^{3/2} = J^{-2} I2^{3/2} - 3^{3/2},
  // x3 = J - 1. The 3/2 power keeps the second input a convex function of
  // (cof F, det F) so the layered construction stays polyconvex.
  const double u = std::pow(J, -2.0 / 3.0);
  const double sI2 = std::sqrt(I2);
  x << u * I1 - 3.0, I2 * sI2 / (J * J) - 5.196152422706631881, J - 1.0;
  if (jac) {
    jac->setZero();
    (*jac)(0, 0) = u;                                      // dx1/dI1
    (*jac)(0, 2) = -2.0 / 3.0 * std::pow(J, -5.0 / 3.0) * I1;  // dx1/dJ
    (*jac)(1, 1) = 1.5 * sI2 / (J * J);                    // dx2/dI2
    (*jac)(1, 2) = -2.0 * I2 * sI2 / (J * J * J);          // dx2/dJ
    (*jac)(2, 2) = 1.0;
  }
  if (d2x) {
    for (int k = 0; k < 3; ++k) d2x[k].setZero();
    d2x[0](0, 2) = d2x[0](2, 0) = -2.0 / 3.0 * std::pow(J, -5.0 / 3.0);
    d2x[0](2, 2) = 10.0 / 9.0 * std::pow(J, -8.0 / 3.0) * I1;
    d2x[1](1, 1) = 0.75 / (sI2 * J * J);
    d2x[1](1, 2) = d2x[1](2, 1) = -3.0 * sI2 / (J * J * J);
    d2x[1](2, 2) = 6.0 * I2 * sI2 / (J * J * J * J);
  }
  return x;
}

}  // namespace detail

/// Derivatives of the completed energy's reference correction: omega is the
/// slope that cancels the stress at the undeformed state, W0 the additive
/// offset that zeroes the energy there. Both are recomputed from the
/// current parameters on every evaluation, never cached, so the identities
/// survive every optimizer update exactly.
struct HnnReference {
  double omega = 0.0;
  double W0 = 0.0;
};

inline HnnReference hnn_reference(const HnnArchitecture& arch, const HnnParams& p) {
  const HnnLayout lay(arch);
  Mat3 jac0;
  const Vec3 x0 = detail::hnn_inputs(arch, 3.0, 3.0, 1.0, &jac0);
  const auto pe = detail::pnn_eval(arch, lay, p, x0);
  const Vec3 dref = jac0.transpose() * pe.grad;
  HnnReference r;
  r.omega = -(2.0 * dref[0] + 4.0 * dref[1] + dref[2]);
  r.W0 = pe.value;
  return r;
}

/// Completed energy W(I1, I2, J) with first and second invariant
/// derivatives. The volumetric term (1/2) w_vol (J - 1) log J vanishes to
/// second order nowhere but at J = 1, where value and slope are both zero.
inline EnergyEval hnn_energy(const HnnArchitecture& arch, const HnnParams& p, double I1,
                             double I2, double J) {
  if (!(J > 0.0)) throw NonPositiveJacobian(J);
  const HnnLayout lay(arch);
  Mat3 jac;
  Mat3 d2x[3];
  const Vec3 x = detail::hnn_inputs(arch, I1, I2, J, &jac, d2x);
  const auto pe = detail::pnn_eval(arch, lay, p, x);
  const auto ref = hnn_reference(arch, p);
  const double w_vol = softplus(p.raw[lay.w_vol()]);
  const double lnJ = std::log(J);

  EnergyEval e;
  e.W = pe.value + 0.5 * w_vol * (J - 1.0) * lnJ + ref.omega * (J - 1.0) - ref.W0;
  e.dW = jac.transpose() * pe.grad;
  e.dW[2] += 0.5 * w_vol * (lnJ + 1.0 - 1.0 / J) + ref.omega;
  e.d2W = jac.transpose() * pe.hess * jac;
  for (int k = 0; k < 3; ++k) e.d2W += pe.grad[k] * d2x[k];
  e.d2W(2, 2) += 0.5 * w_vol * (1.0 / J + 1.0 / (J * J));
  return e;
}

/// Jacobian of (dW/dI1, dW/dI2, dW/dJ) with respect to every raw parameter
/// (rows follow HnnLayout). Includes the parameter dependence through the
/// reference slope omega and the volumetric weight, so contracting with the
/// stress shape tensors gives the exact stress parameter derivative.
inline MatX hnn_param_jacobian(const HnnArchitecture& arch, const HnnParams& p, double I1,
                               double I2, double J) {
  if (!(J > 0.0)) throw NonPositiveJacobian(J);
  const HnnLayout lay(arch);
  Mat3 jac;
  const Vec3 x = detail::hnn_inputs(arch, I1, I2, J, &jac);
  detail::PnnTrace tr;
  detail::pnn_eval(arch, lay, p, x, &tr);
  MatX dgrad = detail::pnn_grad_param_jacobian(arch, lay, p, x, tr) * jac;

  Mat3 jac0;
  const Vec3 x0 = detail::hnn_inputs(arch, 3.0, 3.0, 1.0, &jac0);
  detail::PnnTrace tr0;
  detail::pnn_eval(arch, lay, p, x0, &tr0);
  const MatX dref = detail::pnn_grad_param_jacobian(arch, lay, p, x0, tr0) * jac0;
  // d omega/d theta enters the J column.
  dgrad.col(2) -= 2.0 * dref.col(0) + 4.0 * dref.col(1) + dref.col(2);

  const double lnJ = std::log(J);
  dgrad(lay.w_vol(), 2) += sigmoid(p.raw[lay.w_vol()]) * 0.5 * (lnJ + 1.0 - 1.0 / J);
  return dgrad;
}

/// Closed-form expectation of the reference slope E[d z_out / d I1] at
/// initialization (native inputs): the width-independent geometric series
/// over layers with ratio gamma = w_bar * rho'(0).
inline double hnn_expected_ref_slope(const HnnArchitecture& arch) {
  // w_bar = E[softplus(sigma Z)] by quadrature over the Gaussian density.
  const double sigma = arch.sigma_init;
  const int N = 24000;
  const double lo = -12.0, hi = 12.0;
  const double h = (hi - lo) / N;
  double wbar = 0.0;
  for (int k = 0; k <= N; ++k) {
    const double t = lo + k * h;
    const double f = softplus(sigma * t) * std::exp(-0.5 * t * t) / 2.5066282746310005024;
    const double w = (k == 0 || k == N) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    wbar += w * f;
  }
  wbar *= h / 3.0;
  const double gamma = 0.5 * wbar;  // rho'(0) = 1/2
  double series;
  if (arch.skip_connections)
    series = gamma * (1.0 - std::pow(gamma, arch.layers)) / (1.0 - gamma);
  else
    series = std::pow(gamma, arch.layers);
  return arch.w_scale * wbar * series;
}

}  // namespace hyperfit
