#pragma once

#include "hyperfit/common.hpp"
#include "hyperfit/hnn.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/materials.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <fstream>
#include <string>
#include <vector>

namespace hyperfit {

// ---------------------------------------------------------------------------
// First Piola-Kirchhoff stress and its derivatives from the invariant
// representation. The three shape tensors are
//   dI1/dF = 2F,  dI2/dF = 2(I1 F - F F^T F),  dJ/dF = cof F.
// ---------------------------------------------------------------------------

inline Mat3 piola_stress(const EnergyEval& e, const DeformationState& s) {
  const Mat3 BF = s.F * (s.F.transpose() * s.F);
  return 2.0 * e.dW[0] * s.F + 2.0 * e.dW[1] * (s.I1 * s.F - BF) + e.dW[2] * s.cof;
}

/// Fourth-order tangent dP/dF with major symmetry, stored dense.
struct Tangent {
  std::array<double, 81> a{};
  double& operator()(int i, int j, int k, int l) { return a[((i * 3 + j) * 3 + k) * 3 + l]; }
  double operator()(int i, int j, int k, int l) const {
    return a[((i * 3 + j) * 3 + k) * 3 + l];
  }
};

namespace detail {
// For an index pair (i,k), the third index m and the sign of eps_{ikm};
// sign 0 when i == k.
struct EpsEntry {
  int m;
  double sign;
};
inline EpsEntry eps_pair(int i, int k) {
  if (i == k) return {0, 0.0};
  const int m = 3 - i - k;
  // parity of the permutation (i, k, m) of (0, 1, 2)
  const double s = ((k - i + 3) % 3 == 1) ? 1.0 : -1.0;
  return {m, s};
}
}  // namespace detail

inline Tangent material_tangent(const EnergyEval& e, const DeformationState& s) {
  const Mat3 C = s.F.transpose() * s.F;
  const Mat3 B = s.F * s.F.transpose();
  const Mat3 BF = s.F * C;
  Mat3 G[3];
  G[0] = 2.0 * s.F;
  G[1] = 2.0 * (s.I1 * s.F - BF);
  G[2] = s.cof;

  Tangent A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double v = 0.0;
          for (int al = 0; al < 3; ++al)
            for (int be = 0; be < 3; ++be)
              v += e.d2W(al, be) * G[al](i, j) * G[be](k, l);
          if (i == k && j == l) v += 2.0 * e.dW[0];
          // dG2/dF
          double g2 = 2.0 * s.F(k, l) * s.F(i, j) - s.F(i, l) * s.F(k, j);
          if (i == k) g2 -= C(l, j);
          if (j == l) g2 -= B(i, k);
          if (i == k && j == l) g2 += s.I1;
          v += 2.0 * e.dW[1] * g2;
          // d cof/dF = eps_{ikm} eps_{jln} F_{mn}
          const auto p = detail::eps_pair(i, k);
          const auto q = detail::eps_pair(j, l);
          if (p.sign != 0.0 && q.sign != 0.0)
            v += e.dW[2] * p.sign * q.sign * s.F(p.m, q.m);
          A(i, j, k, l) = v;
        }
  return A;
}

// ---------------------------------------------------------------------------
// Tagged union of analytic laws and the neural model. Both sides expose
// energy evaluation, an unconstrained trainable vector, and the jacobian of
// the energy's invariant gradient with respect to that vector. Analytic
// coefficients train through the same softplus map that keeps them
// positive.
// ---------------------------------------------------------------------------

struct ConstitutiveModel {
  enum class Kind { Analytic, Neural };
  Kind kind = Kind::Analytic;

  AnalyticModel analytic;
  VecX analytic_raw;  // softplus preimages of the coefficients

  HnnArchitecture arch;
  HnnParams params;

  static ConstitutiveModel make_analytic(const AnalyticModel& m) {
    ConstitutiveModel c;
    c.kind = Kind::Analytic;
    c.analytic = m;
    c.analytic_raw = VecX(static_cast<int>(m.coeff.size()));
    for (int i = 0; i < c.analytic_raw.size(); ++i)
      c.analytic_raw[i] = softplus_inverse(m.coeff[i]);
    return c;
  }

  static ConstitutiveModel make_neural(const HnnArchitecture& arch, const HnnParams& p) {
    ConstitutiveModel c;
    c.kind = Kind::Neural;
    c.arch = arch;
    c.params = p;
    return c;
  }

  EnergyEval energy(double I1, double I2, double J) const {
    if (kind == Kind::Analytic) return analytic_energy(analytic, I1, I2, J);
    return hnn_energy(arch, params, I1, I2, J);
  }

  Mat3 stress(const DeformationState& s) const { return piola_stress(energy(s.I1, s.I2, s.J), s); }

  /// Magnitude scale of the energy, used to normalize residual tolerances.
  double energy_scale() const {
    if (kind == Kind::Neural) return arch.w_scale;
    double sum = 0.0;
    for (double c : analytic.coeff) sum += std::abs(c);
    return std::max(sum, 1e-8);
  }

  int n_trainable() const {
    if (kind == Kind::Analytic) return static_cast<int>(analytic_raw.size());
    return HnnLayout(arch).total;
  }

  VecX get_trainable() const {
    if (kind == Kind::Analytic) return analytic_raw;
    return params.raw;
  }

  void set_trainable(const VecX& raw) {
    if (kind == Kind::Analytic) {
      analytic_raw = raw;
      for (int i = 0; i < raw.size(); ++i) analytic.coeff[i] = softplus(raw[i]);
    } else {
      params.raw = raw;
    }
  }

  /// Rows: trainable parameters; columns: d(dW/dI1, dW/dI2, dW/dJ)/d theta.
  MatX invariant_param_jacobian(double I1, double I2, double J) const {
    if (kind == Kind::Neural) return hnn_param_jacobian(arch, params, I1, I2, J);
    MatX jac = analytic_param_jacobian(analytic, I1, I2, J).transpose();
    for (int i = 0; i < jac.rows(); ++i) jac.row(i) *= sigmoid(analytic_raw[i]);
    return jac;
  }
};

/// Per-parameter stress derivative dP/d theta at a fixed deformation state.
inline std::vector<Mat3> stress_param_jacobian(const ConstitutiveModel& model,
                                               const DeformationState& s) {
  const MatX jac = model.invariant_param_jacobian(s.I1, s.I2, s.J);
  const Mat3 BF = s.F * (s.F.transpose() * s.F);
  const Mat3 G1 = 2.0 * s.F;
  const Mat3 G2 = 2.0 * (s.I1 * s.F - BF);
  std::vector<Mat3> out(static_cast<std::size_t>(jac.rows()));
  for (int p = 0; p < jac.rows(); ++p)
    out[p] = jac(p, 0) * G1 + jac(p, 1) * G2 + jac(p, 2) * s.cof;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint files: json with raw parameters stored as the hexadecimal
// image of their bit pattern, so save/load round-trips are exact.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const ConstitutiveModel& model, const std::string& path,
                            std::uint64_t seed = 0, const std::string& created_by = "hyperfit") {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["created_by"] = created_by;
  if (model.kind == ConstitutiveModel::Kind::Neural) {
    j["model_kind"] = "hnn";
    j["architecture"] = {{"layers", model.arch.layers},
                         {"width", model.arch.width},
                         {"skip_connections", model.arch.skip_connections},
                         {"isochoric_inputs", model.arch.isochoric_inputs},
                         {"w_scale", model.arch.w_scale},
                         {"sigma_init", model.arch.sigma_init}};
    std::vector<std::string> raw;
    raw.reserve(model.params.raw.size());
    for (int i = 0; i < model.params.raw.size(); ++i)
      raw.push_back(double_to_hex(model.params.raw[i]));
    j["raw_params"] = raw;
  } else {
    j["model_kind"] = analytic_name(model.analytic.kind);
    std::vector<std::string> cs;
    for (double c : model.analytic.coeff) cs.push_back(double_to_hex(c));
    j["coefficients"] = cs;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << "\n";
}

inline ConstitutiveModel load_checkpoint(const std::string& path, std::uint64_t* seed = nullptr) {
  std::ifstream in(path);
  if (!in) throw MalformedCheckpoint("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw MalformedCheckpoint(std::string("json parse error: ") + ex.what());
  }
  try {
    if (j.at("schema_version").get<int>() != 1)
      throw MalformedCheckpoint("unsupported schema_version");
    if (seed) *seed = j.value("seed", 0ull);
    const std::string kind = j.at("model_kind").get<std::string>();
    if (kind == "hnn") {
      HnnArchitecture arch;
      const auto& a = j.at("architecture");
      arch.layers = a.at("layers").get<int>();
      arch.width = a.at("width").get<int>();
      arch.skip_connections = a.at("skip_connections").get<bool>();
      arch.isochoric_inputs = a.at("isochoric_inputs").get<bool>();
      arch.w_scale = a.at("w_scale").get<double>();
      arch.sigma_init = a.at("sigma_init").get<double>();
      if (arch.layers < 1 || arch.layers > 16 || arch.width < 1 || arch.width > 4096)
        throw MalformedCheckpoint("architecture out of range");
      const HnnLayout lay(arch);
      const auto& raw = j.at("raw_params");
      if (static_cast<int>(raw.size()) != lay.total)
        throw MalformedCheckpoint("raw_params size " + std::to_string(raw.size()) +
                                  " does not match architecture (" + std::to_string(lay.total) +
                                  ")");
      HnnParams p;
      p.raw = VecX(lay.total);
      for (int i = 0; i < lay.total; ++i)
        p.raw[i] = hex_to_double(raw[i].get<std::string>());
      return ConstitutiveModel::make_neural(arch, p);
    }
    AnalyticModel m = analytic_from_name(kind);
    const auto& cs = j.at("coefficients");
    if (cs.size() != m.coeff.size())
      throw MalformedCheckpoint("coefficient count mismatch for kind '" + kind + "'");
    for (std::size_t i = 0; i < m.coeff.size(); ++i)
      m.coeff[i] = hex_to_double(cs[i].get<std::string>());
    return ConstitutiveModel::make_analytic(m);
  } catch (const MalformedCheckpoint&) {
    throw;
  } catch (const std::exception& ex) {
    throw MalformedCheckpoint(ex.what());
  }
}

}  // namespace hyperfit
