#pragma once

// Post-processing: displacement error metrics, principal-stretch
// distributions, entropy-regularized optimal-transport divergence between
// stretch clouds, and plot-data export (CSV + simple SVG).

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hyperfit/fem.hpp"

namespace hyperfit {

// ---------------------------------------------------------------------------
// Variance-normalized RMSE.
//
//   mean     = (1/N) sum d_ref_i
//   Var      = (1/N) sum |d_ref_i - mean|^2
//   RMSE     = sqrt((1/N) sum |d_pred_i - d_ref_i|^2)
//   vRMSE    = RMSE / sqrt(Var)
//
// A predictor that outputs the reference mean everywhere scores exactly 1;
// a perfect predictor scores 0.
// ---------------------------------------------------------------------------

struct LoadMetrics {
  double load = 0.0;
  double rmse = 0.0;
  double variance = 0.0;
  double vrmse = 0.0;
};

struct MetricReport {
  double rmse = 0.0;
  double variance = 0.0;  // variance of the reference set
  double vrmse = 0.0;
  std::vector<LoadMetrics> per_load;
  std::vector<double> reaction_rel_errors;
};

namespace anadetail {

inline void pooled_vrmse(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference,
                         double& rmse, double& variance) {
  if (predicted.size() != reference.size())
    throw Error("metric input size mismatch: " + std::to_string(predicted.size()) + " vs " +
                std::to_string(reference.size()));
  const std::size_t n = reference.size();
  if (n < 2) throw Error("metric needs at least two points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& d : reference) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0, err2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var += (reference[i] - mean).squaredNorm();
    err2 += (predicted[i] - reference[i]).squaredNorm();
  }
  variance = var / static_cast<double>(n);
  rmse = std::sqrt(err2 / static_cast<double>(n));
}

}  // namespace anadetail

inline MetricReport vrmse(const std::vector<Vec3>& predicted, const std::vector<Vec3>& reference) {
  MetricReport r;
  anadetail::pooled_vrmse(predicted, reference, r.rmse, r.variance);
  if (r.variance == 0.0) throw DegenerateVariance();
  r.vrmse = r.rmse / std::sqrt(r.variance);
  return r;
}

/// Observations grouped by load level, for the per-load breakdown.
struct DisplacementGroup {
  double load = 0.0;
  std::vector<Vec3> predicted;
  std::vector<Vec3> reference;
};

struct ReactionPair {
  double load = 0.0;
  std::string tag;
  double predicted = 0.0;
  double reference = 0.0;
};

/// Pooled metrics over all groups plus the per-load breakdown and relative
/// reaction errors |predicted - reference| / |reference|.
inline MetricReport vrmse_report(const std::vector<DisplacementGroup>& groups,
                                 const std::vector<ReactionPair>& reactions = {}) {
  std::vector<Vec3> all_pred, all_ref;
  for (const auto& g : groups) {
    all_pred.insert(all_pred.end(), g.predicted.begin(), g.predicted.end());
    all_ref.insert(all_ref.end(), g.reference.begin(), g.reference.end());
  }
  MetricReport r = vrmse(all_pred, all_ref);
  for (const auto& g : groups) {
    LoadMetrics lm;
    lm.load = g.load;
    anadetail::pooled_vrmse(g.predicted, g.reference, lm.rmse, lm.variance);
    if (lm.variance == 0.0) throw DegenerateVariance();
    lm.vrmse = lm.rmse / std::sqrt(lm.variance);
    r.per_load.push_back(lm);
  }
  for (const auto& p : reactions) {
    if (p.reference == 0.0) throw Error("reference reaction is zero for tag " + p.tag);
    r.reaction_rel_errors.push_back(std::abs(p.predicted - p.reference) / std::abs(p.reference));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Principal-stretch clouds.
//
// One sample per cell, evaluated at the cell's single quadrature point.
// Components are sorted descending; 2D problems report the in-plane pair
// with a trailing 1, so the product always equals det F.
// ---------------------------------------------------------------------------

struct StretchCloud {
  int dim = 3;
  std::vector<Vec3> samples;
};

namespace anadetail {

/// Singular values of a 2x2 block, descending.
inline std::array<double, 2> principal_stretches_2d(const Mat3& F) {
  Eigen::Matrix2d f = F.topLeftCorner<2, 2>();
  const Eigen::Vector2d s = f.jacobiSvd().singularValues();
  return {s[0], s[1]};
}

}  // namespace anadetail

/// Appends one principal-stretch sample per cell of the solved problem.
inline void append_stretches(const FeSpace& sp, const VecX& u_full, StretchCloud& out) {
  out.dim = sp.dim;
  for (int c = 0; c < sp.mesh.n_cells(); ++c) {
    const Mat3 F = femdetail::cell_deformation(sp, u_full, c);
    Vec3 s;
    if (sp.dim == 2) {
      const auto p = anadetail::principal_stretches_2d(F);
      s = Vec3(p[0], p[1], 1.0);
    } else {
      s = F.jacobiSvd().singularValues();  // Eigen sorts descending
    }
    out.samples.push_back(s);
  }
}

inline StretchCloud stretch_cloud(const FeSpace& sp, const VecX& u_full) {
  StretchCloud c;
  append_stretches(sp, u_full, c);
  return c;
}

// ---------------------------------------------------------------------------
// Debiased entropic optimal-transport divergence between two clouds:
//
//   S(A, B) = OT_eps(A, B) - 1/2 OT_eps(A, A) - 1/2 OT_eps(B, B)
//
// with squared-Euclidean cost, uniform weights, and log-domain Sinkhorn
// iterations. OT_eps is the converged dual value <f, a> + <g, b>, which
// keeps the debiased divergence non-negative.
// ---------------------------------------------------------------------------

struct SinkhornOptions {
  double epsilon = 0.0;  // <= 0 selects 0.01 x mean squared pairwise distance
  int max_iters = 5000;  // iterations at the target epsilon
  // L1 error of the unconstrained marginal. The divergence value converges
  // roughly a potential-magnitude factor faster than the marginals, so the
  // default keeps heavily overlapping clouds (slowest case) fast while
  // bounding the value error near 1e-6 x cloud diameter^2. Tighten it for
  // identity checks on well-separated clouds.
  double tol = 1e-4;
  int subsample_cap = 5000;
  std::uint64_t seed = 0;
};

namespace anadetail {

inline MatX pairwise_sq_dist(const std::vector<Vec3>& xs, const std::vector<Vec3>& ys) {
  MatX c(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (xs[i] - ys[j]).squaredNorm();
  return c;
}

/// Seeded uniform subsample without replacement (partial Fisher-Yates);
/// preserves the input order of the selected elements.
inline std::vector<Vec3> subsample(const std::vector<Vec3>& xs, int cap, Rng& rng) {
  const int n = static_cast<int>(xs.size());
  if (n <= cap) return xs;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int k = 0; k < cap; ++k) {
    const int j = k + static_cast<int>(rng.uniform() * static_cast<double>(n - k));
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(cap));
  for (int i : idx) out.push_back(xs[static_cast<std::size_t>(i)]);
  return out;
}

/// One potential update: pot_i = -eps * LSE_j[(other_j - C(i,j))/eps + log w].
inline void sinkhorn_update(VecX& pot, const VecX& other, const MatX& cost, double eps,
                            double log_w, bool rows) {
  const Eigen::Index n = rows ? cost.rows() : cost.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    const VecX line = rows ? VecX(cost.row(i).transpose()) : VecX(cost.col(i));
    VecX z = (other - line) / eps;
    const double m = z.maxCoeff();
    pot[i] = -eps * (m + std::log((z.array() - m).exp().sum()) + log_w);
  }
}

/// Self-transport dual value of one cloud against itself. The alternating
/// update zigzags badly on symmetric problems at small epsilon, so this
/// uses the averaged symmetric fixed point f <- (f + T(f))/2, whose fixed
/// point satisfies the marginals exactly.
inline double entropic_ot_self(const MatX& cost, double eps, const SinkhornOptions& opts) {
  const Eigen::Index n = cost.rows();
  const double la = -std::log(static_cast<double>(n));
  VecX f = VecX::Zero(n), t(n);
  for (double e = cost.maxCoeff(); e > eps * 2.0 && e > 0.0; e *= 0.5) {
    sinkhorn_update(t, f, cost, e, la, true);
    f = 0.5 * (f + t);
  }
  double err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iters; ++it) {
    sinkhorn_update(t, f, cost, eps, la, true);
    f = 0.5 * (f + t);
    err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        row += std::exp((f[i] + f[j] - cost(i, j)) / eps + 2.0 * la);
      err += std::abs(row - std::exp(la));
    }
    if (err < opts.tol) return 2.0 * f.sum() * std::exp(la);
  }
  throw SinkhornNoConvergence(err);
}

/// Converged dual value of the entropic transport problem between uniform
/// clouds; iterates at the target epsilon until the unconstrained marginal
/// has L1 error below tol. Potentials warm-start from larger epsilons to
/// keep the iteration count flat as epsilon shrinks.
inline double entropic_ot(const MatX& cost, double eps, const SinkhornOptions& opts) {
  const Eigen::Index n = cost.rows(), m = cost.cols();
  const double la = -std::log(static_cast<double>(n));  // log a_i
  const double lb = -std::log(static_cast<double>(m));
  VecX f = VecX::Zero(n), g = VecX::Zero(m);

  // Annealing phase: geometric epsilon decay warm-starts the potentials.
  for (double e = cost.maxCoeff(); e > eps * 2.0 && e > 0.0; e *= 0.5) {
    sinkhorn_update(f, g, cost, e, lb, true);
    sinkhorn_update(g, f, cost, e, la, false);
  }

  double err = std::numeric_limits<double>::infinity();
  VecX fnew(n);
  for (int it = 0; it < opts.max_iters; ++it) {
    // Half-damped f ascent: the plain alternating update is a period-two
    // zigzag on nearly symmetric problems (clouds that almost coincide), and
    // averaging breaks the oscillation without moving the fixed point.
    sinkhorn_update(fnew, g, cost, eps, lb, true);
    f = 0.5 * (f + fnew);
    sinkhorn_update(g, f, cost, eps, la, false);
    // Column marginals are exact after the g update; measure the rows.
    err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        row += std::exp((f[i] + g[j] - cost(i, j)) / eps + la + lb);
      err += std::abs(row - std::exp(la));
    }
    if (err < opts.tol) {
      return f.sum() * std::exp(la) + g.sum() * std::exp(lb);
    }
  }
  throw SinkhornNoConvergence(err);
}

}  // namespace anadetail

inline double sinkhorn_divergence(const StretchCloud& A, const StretchCloud& B,
                                  SinkhornOptions opts = {}) {
  if (A.samples.empty() || B.samples.empty()) throw Error("empty stretch cloud");
  Rng rng(opts.seed);
  const std::vector<Vec3> xs = anadetail::subsample(A.samples, opts.subsample_cap, rng);
  const std::vector<Vec3> ys = anadetail::subsample(B.samples, opts.subsample_cap, rng);

  double eps = opts.epsilon;
  if (eps <= 0.0) {
    std::vector<Vec3> pooled = xs;
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i)
      for (std::size_t j = i + 1; j < pooled.size(); ++j) {
        sum += (pooled[i] - pooled[j]).squaredNorm();
        ++pairs;
      }
    if (pairs == 0 || sum == 0.0) return 0.0;  // all points coincide
    eps = 0.01 * sum / static_cast<double>(pairs);
  }

  // Identical point sets route the cross term through the symmetric solver
  // as well, so the debiasing cancels exactly.
  const bool same = xs.size() == ys.size() &&
                    std::equal(xs.begin(), xs.end(), ys.begin(),
                               [](const Vec3& a, const Vec3& b) { return a == b; });
  const double aa = anadetail::entropic_ot_self(anadetail::pairwise_sq_dist(xs, xs), eps, opts);
  if (same) return 0.0;
  const double ab = anadetail::entropic_ot(anadetail::pairwise_sq_dist(xs, ys), eps, opts);
  const double bb = anadetail::entropic_ot_self(anadetail::pairwise_sq_dist(ys, ys), eps, opts);
  return ab - 0.5 * aa - 0.5 * bb;
}

// ---------------------------------------------------------------------------
// Plot-data export.
//
// Reads the tabular artifacts of a completed run directory and emits
// plot-ready CSV files plus simple SVG renderings:
//
//   reactions.csv     (setup,load,tag,predicted,reference)
//       -> plot_load_reaction.csv, plot_load_reaction.svg
//   point_errors.csv  (load,error)
//       -> plot_error_box.csv  (load,q1,median,q3,whisker_lo,whisker_hi)
//   stretches.csv     (lambda1,lambda2,lambda3)
//       -> plot_stretch_samples.csv, plot_stretch_reference.csv,
//          plot_stretch_scatter.svg
// ---------------------------------------------------------------------------

namespace anadetail {

/// Percentile of a sorted sample via linear interpolation at (n-1)p.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct BoxStats {
  double q1 = 0.0, median = 0.0, q3 = 0.0, whisker_lo = 0.0, whisker_hi = 0.0;
};

/// Tukey box statistics: whiskers at the extreme samples within 1.5 IQR.
inline BoxStats box_stats(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  BoxStats b;
  b.q1 = percentile_sorted(samples, 0.25);
  b.median = percentile_sorted(samples, 0.50);
  b.q3 = percentile_sorted(samples, 0.75);
  const double iqr = b.q3 - b.q1;
  b.whisker_lo = samples.back();
  b.whisker_hi = samples.front();
  for (double v : samples) {
    if (v >= b.q1 - 1.5 * iqr) {
      b.whisker_lo = v;
      break;
    }
  }
  for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
    if (*it <= b.q3 + 1.5 * iqr) {
      b.whisker_hi = *it;
      break;
    }
  }
  return b;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      const std::string& expected_header) {
  std::ifstream in(path);
  if (!in.good()) throw MissingArtifacts(path.filename().string());
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw MissingArtifacts(path.filename().string() + " (bad header)");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_csv_line(line));
  return rows;
}

/// Canonical in-plane deformations used as reference curves in stretch
/// scatter plots; all start at (1, 1) and carry stretches sorted descending.
inline std::vector<std::pair<std::string, std::function<std::array<double, 2>(double)>>>
canonical_deformations() {
  auto sorted2 = [](double a, double b) {
    return a >= b ? std::array<double, 2>{a, b} : std::array<double, 2>{b, a};
  };
  return {
      {"uniaxial_tension", [=](double d) { return sorted2(1.0 + d, 1.0); }},
      {"uniaxial_compression", [=](double d) { return sorted2(1.0 / (1.0 + d), 1.0); }},
      {"biaxial_tension", [=](double d) { return sorted2(1.0 + d, 1.0 + d); }},
      {"biaxial_compression",
       [=](double d) { return sorted2(1.0 / (1.0 + d), 1.0 / (1.0 + d)); }},
      {"simple_shear",
       [](double d) {
         Mat3 F = Mat3::Identity();
         F(0, 1) = d;
         return principal_stretches_2d(F);
       }},
  };
}

// -- minimal SVG writing ----------------------------------------------------

struct SvgCanvas {
  static constexpr double kW = 480.0, kH = 360.0, kPad = 40.0;
  double xmin, xmax, ymin, ymax;
  std::ostringstream body;

  SvgCanvas(double x0, double x1, double y0, double y1) : xmin(x0), xmax(x1), ymin(y0), ymax(y1) {
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
  }
  double px(double x) const { return kPad + (x - xmin) / (xmax - xmin) * (kW - 2 * kPad); }
  double py(double y) const { return kH - kPad - (y - ymin) / (ymax - ymin) * (kH - 2 * kPad); }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                bool dashed = false) {
    body << "<polyline fill=\"none\" stroke=\"" << color << "\"";
    if (dashed) body << " stroke-dasharray=\"4 3\"";
    body << " points=\"";
    for (const auto& [x, y] : pts) body << px(x) << "," << py(y) << " ";
    body << "\"/>\n";
  }
  void circle(double x, double y, const std::string& color, double r = 2.0) {
    body << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r << "\" fill=\""
         << color << "\" fill-opacity=\"0.5\"/>\n";
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad
        << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\""
        << kH - kPad << "\" stroke=\"black\"/>\n"
        << body.str() << "</svg>\n";
  }
};

}  // namespace anadetail

/// Converts the tabular artifacts of a run directory into plot-ready CSV
/// files and simple SVG renderings. Throws MissingArtifacts when an input
/// table is absent or malformed.
inline void export_plot_data(const std::string& run_dir) {
  namespace fs = std::filesystem;
  using namespace anadetail;
  const fs::path dir(run_dir);
  if (!fs::exists(dir)) throw MissingArtifacts(run_dir);

  // --- load-reaction curves ---
  {
    const auto rows = read_csv(dir / "reactions.csv", "setup,load,tag,predicted,reference");
    std::map<std::string, std::vector<std::array<double, 3>>> by_tag;  // load, pred, ref
    std::ofstream out(dir / "plot_load_reaction.csv");
    out << "load,tag,predicted,reference\n";
    for (const auto& r : rows) {
      if (r.size() != 5) throw MissingArtifacts("reactions.csv (bad row)");
      const double load = std::stod(r[1]), pred = std::stod(r[3]), ref = std::stod(r[4]);
      by_tag[r[2]].push_back({load, pred, ref});
      out << fmt_g17(load) << "," << r[2] << "," << fmt_g17(pred) << "," << fmt_g17(ref) << "\n";
    }
    double lo = 0.0, hi = 1.0, rlo = 0.0, rhi = 1.0;
    bool first = true;
    for (auto& [tag, pts] : by_tag) {
      std::sort(pts.begin(), pts.end());
      for (const auto& p : pts) {
        if (first) {
          lo = hi = p[0];
          rlo = rhi = std::min(p[1], p[2]);
          rhi = std::max(p[1], p[2]);
          first = false;
        }
        lo = std::min(lo, p[0]);
        hi = std::max(hi, p[0]);
        rlo = std::min({rlo, p[1], p[2]});
        rhi = std::max({rhi, p[1], p[2]});
      }
    }
    SvgCanvas svg(lo, hi, rlo, rhi);
    const std::vector<std::string> palette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::size_t k = 0;
    for (const auto& [tag, pts] : by_tag) {
      std::vector<std::pair<double, double>> pred, ref;
      for (const auto& p : pts) {
        pred.emplace_back(p[0], p[1]);
        ref.emplace_back(p[0], p[2]);
      }
      const std::string& color = palette[k++ % palette.size()];
      svg.polyline(pred, color);
      svg.polyline(ref, color, /*dashed=*/true);
    }
    svg.write(dir / "plot_load_reaction.svg");
  }

  // --- per-load error boxplots ---
  {
    const auto rows = read_csv(dir / "point_errors.csv", "load,error");
    std::map<double, std::vector<double>> by_load;
    for (const auto& r : rows) {
      if (r.size() != 2) throw MissingArtifacts("point_errors.csv (bad row)");
      by_load[std::stod(r[0])].push_back(std::stod(r[1]));
    }
    std::ofstream out(dir / "plot_error_box.csv");
    out << "load,q1,median,q3,whisker_lo,whisker_hi\n";
    for (const auto& [load, samples] : by_load) {
      const BoxStats b = box_stats(samples);
      out << fmt_g17(load) << "," << fmt_g17(b.q1) << "," << fmt_g17(b.median) << ","
          << fmt_g17(b.q3) << "," << fmt_g17(b.whisker_lo) << "," << fmt_g17(b.whisker_hi)
          << "\n";
    }
  }

  // --- stretch scatter with canonical reference curves ---
  {
    const auto rows = read_csv(dir / "stretches.csv", "lambda1,lambda2,lambda3");
    std::ofstream samples_out(dir / "plot_stretch_samples.csv");
    samples_out << "lambda1,lambda2,lambda3\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
      if (r.size() != 3) throw MissingArtifacts("stretches.csv (bad row)");
      samples_out << r[0] << "," << r[1] << "," << r[2] << "\n";
      pts.emplace_back(std::stod(r[0]), std::stod(r[1]));
    }

    std::ofstream ref_out(dir / "plot_stretch_reference.csv");
    ref_out << "series,delta,lambda1,lambda2\n";
    std::map<std::string, std::vector<std::pair<double, double>>> curves;
    for (const auto& [name, fn] : canonical_deformations()) {
      for (int i = 0; i <= 50; ++i) {
        const double d = 0.01 * static_cast<double>(i);
        const auto s = fn(d);
        ref_out << name << "," << fmt_g17(d) << "," << fmt_g17(s[0]) << "," << fmt_g17(s[1])
                << "\n";
        curves[name].emplace_back(s[0], s[1]);
      }
    }

    double lo = 1.0, hi = 1.0;
    for (const auto& [x, y] : pts) {
      lo = std::min({lo, x, y});
      hi = std::max({hi, x, y});
    }
    for (const auto& [name, c] : curves)
      for (const auto& [x, y] : c) {
        lo = std::min({lo, x, y});
        hi = std::max({hi, x, y});
      }
    SvgCanvas svg(lo, hi, lo, hi);
    for (const auto& [x, y] : pts) svg.circle(x, y, "#1f77b4");
    for (const auto& [name, c] : curves) svg.polyline(c, "#777777", /*dashed=*/true);
    svg.write(dir / "plot_stretch_scatter.svg");
  }
}

}  // namespace hyperfit
