#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

namespace hyperfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Error taxonomy. Every failure that crosses a module boundary is one of
// these; equilibrium solves additionally report non-convergence through
// their result struct instead of throwing.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonPositiveJacobian : Error {
  explicit NonPositiveJacobian(double J)
      : Error("deformation gradient has non-positive determinant J=" + std::to_string(J)) {}
};

struct ElementInversion : Error {
  int cell = -1;
  explicit ElementInversion(int cell_id)
      : Error("element inversion in cell " + std::to_string(cell_id)), cell(cell_id) {}
};

struct LinearSolveFailure : Error {
  explicit LinearSolveFailure(const std::string& what) : Error("linear solve failed: " + what) {}
};

struct ContinuationFailure : Error {
  double last_converged_load = 0.0;
  explicit ContinuationFailure(double load)
      : Error("load continuation stalled; last converged load_scale " + std::to_string(load)),
        last_converged_load(load) {}
};

struct MalformedMeshFile : Error {
  explicit MalformedMeshFile(const std::string& what) : Error("malformed mesh file: " + what) {}
};

struct MalformedCheckpoint : Error {
  explicit MalformedCheckpoint(const std::string& what) : Error("malformed checkpoint: " + what) {}
};

struct MalformedDataset : Error {
  explicit MalformedDataset(const std::string& what) : Error("malformed dataset: " + what) {}
};

struct GeometryInfeasible : Error {
  explicit GeometryInfeasible(const std::string& what) : Error("geometry infeasible: " + what) {}
};

struct PointOutsideMesh : Error {
  int point_index = -1;
  explicit PointOutsideMesh(int idx)
      : Error("interpolation point " + std::to_string(idx) + " lies outside the mesh"),
        point_index(idx) {}
};

struct TagNotDirichlet : Error {
  explicit TagNotDirichlet(const std::string& tag)
      : Error("reaction requested on non-Dirichlet tag '" + tag + "'") {}
};

struct DegenerateVariance : Error {
  DegenerateVariance() : Error("reference displacement set has zero variance") {}
};

struct TrainingStalled : Error {
  explicit TrainingStalled(const std::string& what) : Error("training stalled: " + what) {}
};

struct SinkhornNoConvergence : Error {
  double last_error = 0.0;
  explicit SinkhornNoConvergence(double err)
      : Error("sinkhorn iteration did not reach marginal tolerance, last error=" +
              std::to_string(err)),
        last_error(err) {}
};

struct MissingArtifacts : Error {
  explicit MissingArtifacts(const std::string& what) : Error("missing run artifacts: " + what) {}
};

// ---------------------------------------------------------------------------
// Numerics helpers
// ---------------------------------------------------------------------------

/// softplus log(1 + e^x), evaluated on the overflow-safe branch.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Inverse of softplus: y > 0 -> x with softplus(x) = y.
inline double softplus_inverse(double y) {
  if (y > 30.0) return y;  // softplus(y) - y < 1e-13 there
  return std::log(std::expm1(y));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Shifted softplus activation: vanishes at zero, smooth, convex,
/// non-decreasing. First derivative is the logistic sigmoid.
inline double activation(double x) { return softplus(x) - 0.6931471805599453094; }
inline double activation_d1(double x) { return sigmoid(x); }
inline double activation_d2(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

// ---------------------------------------------------------------------------
// Deterministic random numbers. std::normal_distribution is implementation
// defined, so Gaussians are produced by an explicit Box-Muller transform on
// top of mt19937_64; the stream is then identical on every platform.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the second deviate.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586477 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Bit-exact double <-> text. Values round-trip through the hexadecimal image
// of their IEEE-754 bit pattern, independent of locale and formatting.
// ---------------------------------------------------------------------------

inline std::string double_to_hex(double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  return std::string(buf);
}

/// Shortest decimal text that round-trips a double (CSV and logs).
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline double hex_to_double(const std::string& s) {
  if (s.size() != 16) throw Error("hex double field must have 16 characters, got '" + s + "'");
  std::uint64_t bits = 0;
  for (char c : s) {
    bits <<= 4;
    if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') bits |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw Error("invalid hex digit in double field: '" + s + "'");
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

/// FNV-1a 64-bit hash, used to checksum mesh files referenced from datasets.
inline std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return std::string(buf);
}

}  // namespace hyperfit
