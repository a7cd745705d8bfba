#include "hyperfit/analysis.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "hyperfit/experiments.hpp"
#include "hyperfit/materials.hpp"

using namespace hyperfit;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

StretchCloud cloud_from(const std::vector<Vec3>& samples, int dim = 3) {
  StretchCloud c;
  c.dim = dim;
  c.samples = samples;
  return c;
}

/// Random blob of points around a center.
std::vector<Vec3> blob(const Vec3& center, double spread, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i)
    out.push_back(center + spread * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// vRMSE
// ---------------------------------------------------------------------------

TEST_CASE("error metric reproduces its defining identities") {
  const std::vector<Vec3> ref = {Vec3(0.1, 0.2, 0), Vec3(0.4, -0.1, 0), Vec3(-0.3, 0.5, 0),
                                 Vec3(0.8, 0.0, 0)};

  SECTION("perfect predictor scores zero") {
    const MetricReport r = vrmse(ref, ref);
    CHECK(r.rmse == 0.0);
    CHECK(r.vrmse == 0.0);
  }

  SECTION("predicting the reference mean scores exactly one") {
    Vec3 mean = Vec3::Zero();
    for (const Vec3& d : ref) mean += d;
    mean /= static_cast<double>(ref.size());
    const std::vector<Vec3> naive(ref.size(), mean);
    const MetricReport r = vrmse(naive, ref);
    CHECK(std::abs(r.vrmse - 1.0) < 1e-14);
  }

  SECTION("two-point hand evaluation") {
    const std::vector<Vec3> reference = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
    const std::vector<Vec3> predicted = {Vec3(1, 0, 0), Vec3(1, 0, 0)};
    const MetricReport r = vrmse(predicted, reference);
    CHECK(r.variance == 1.0);
    CHECK(r.rmse == 1.0);
    CHECK(r.vrmse == 1.0);
  }

  SECTION("rigid translation of both sets leaves the metric unchanged") {
    const std::vector<Vec3> pred = {Vec3(0.2, 0.1, 0), Vec3(0.3, -0.2, 0), Vec3(-0.1, 0.4, 0),
                                    Vec3(0.7, 0.1, 0)};
    const MetricReport base = vrmse(pred, ref);
    const Vec3 t(17.5, -3.25, 0.0);
    std::vector<Vec3> pred_t = pred, ref_t = ref;
    for (Vec3& v : pred_t) v += t;
    for (Vec3& v : ref_t) v += t;
    const MetricReport moved = vrmse(pred_t, ref_t);
    CHECK(std::abs(moved.vrmse - base.vrmse) < 1e-14);
    CHECK(std::abs(moved.rmse - base.rmse) < 1e-14);
  }

  SECTION("degenerate reference variance is rejected") {
    const std::vector<Vec3> flat(4, Vec3(0.5, 0.5, 0));
    REQUIRE_THROWS_AS(vrmse(flat, flat), DegenerateVariance);
  }

  SECTION("input validation") {
    REQUIRE_THROWS_AS(vrmse({Vec3::Zero()}, ref), Error);
    REQUIRE_THROWS_AS(vrmse({Vec3::Zero()}, {Vec3::Zero()}), Error);
  }
}

TEST_CASE("grouped report breaks the metric down by load") {
  DisplacementGroup g1;
  g1.load = 0.1;
  g1.reference = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
  g1.predicted = {Vec3(1, 0, 0), Vec3(1, 0, 0)};
  DisplacementGroup g2;
  g2.load = 0.2;
  g2.reference = {Vec3(0, 1, 0), Vec3(0, 3, 0)};
  g2.predicted = {Vec3(0, 1, 0), Vec3(0, 3, 0)};

  const std::vector<ReactionPair> reactions = {{0.1, "up", 1.1, 1.0}, {0.2, "up", 3.0, 4.0}};
  const MetricReport r = vrmse_report({g1, g2}, reactions);

  REQUIRE(r.per_load.size() == 2);
  CHECK(r.per_load[0].load == 0.1);
  CHECK(r.per_load[0].vrmse == 1.0);  // the hand case
  CHECK(r.per_load[1].vrmse == 0.0);  // perfect on the second load

  // Pooled values equal the metric over the concatenated arrays.
  std::vector<Vec3> all_pred = g1.predicted, all_ref = g1.reference;
  all_pred.insert(all_pred.end(), g2.predicted.begin(), g2.predicted.end());
  all_ref.insert(all_ref.end(), g2.reference.begin(), g2.reference.end());
  const MetricReport pooled = vrmse(all_pred, all_ref);
  CHECK(r.rmse == pooled.rmse);
  CHECK(r.vrmse == pooled.vrmse);

  REQUIRE(r.reaction_rel_errors.size() == 2);
  CHECK(std::abs(r.reaction_rel_errors[0] - 0.1) < 1e-14);
  CHECK(r.reaction_rel_errors[1] == 0.25);

  REQUIRE_THROWS_AS(vrmse_report({g1}, {{0.1, "up", 1.0, 0.0}}), Error);
}

// ---------------------------------------------------------------------------
// Stretch clouds
// ---------------------------------------------------------------------------

TEST_CASE("stretch samples recover homogeneous deformations") {
  const Mesh mesh2 = generate_mesh(GeometrySpec{1, 0}, 0.25);
  const FeSpace sp2 = make_space(mesh2, setup_bc_program(1));

  SECTION("undeformed solution gives unit stretches") {
    const VecX u = VecX::Zero(mesh2.n_nodes() * 2);
    const StretchCloud c = stretch_cloud(sp2, u);
    CHECK(c.dim == 2);
    REQUIRE(c.samples.size() == static_cast<std::size_t>(mesh2.n_cells()));
    for (const Vec3& s : c.samples) {
      CHECK(s[0] == Catch::Approx(1.0).margin(1e-13));
      CHECK(s[1] == Catch::Approx(1.0).margin(1e-13));
      CHECK(s[2] == 1.0);
    }
  }

  SECTION("homogeneous 20 percent stretch reports (1.2, 1, 1)") {
    VecX u = VecX::Zero(mesh2.n_nodes() * 2);
    for (int n = 0; n < mesh2.n_nodes(); ++n)
      u[sp2.dof(n, 0)] = 0.2 * mesh2.nodes[static_cast<std::size_t>(n)][0];
    const StretchCloud c = stretch_cloud(sp2, u);
    for (const Vec3& s : c.samples) {
      CHECK(s[0] == Catch::Approx(1.2).margin(1e-12));
      CHECK(s[1] == Catch::Approx(1.0).margin(1e-12));
      CHECK(s[2] == 1.0);
    }
  }

  SECTION("3d homogeneous stretch") {
    const Mesh mesh3 = generate_mesh(GeometrySpec{4, 0}, 0.34);
    const FeSpace sp3 = make_space(mesh3, setup_bc_program(4));
    VecX u = VecX::Zero(mesh3.n_nodes() * 3);
    for (int n = 0; n < mesh3.n_nodes(); ++n)
      u[sp3.dof(n, 2)] = 0.2 * mesh3.nodes[static_cast<std::size_t>(n)][2];
    const StretchCloud c = stretch_cloud(sp3, u);
    CHECK(c.dim == 3);
    for (const Vec3& s : c.samples) {
      CHECK(s[0] == Catch::Approx(1.2).margin(1e-12));
      CHECK(s[1] == Catch::Approx(1.0).margin(1e-12));
      CHECK(s[2] == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("stretch samples of a solved problem are positive with product J") {
  ExperimentInstance e;
  e.setup_id = 1;
  e.geometry = GeometrySpec{1, 0};
  e.h = 1.0 / 8.0;
  e.load_value = 0.8;
  e.n_steps = setup_continuation_steps(1, 0.8);
  e.mesh = generate_mesh(e.geometry, e.h);
  e.bc = setup_bc_program(1);

  const FeSpace sp = make_space(e.mesh, e.bc);
  const ConstitutiveModel mr = ConstitutiveModel::make_analytic(analytic_from_name("mr"));
  const EquilibriumSolution sol = continuation_solve(sp, mr, e.load_value, e.n_steps);
  REQUIRE(sol.converged);
  const VecX u = full_displacement(sp, sol.dof_vector, e.load_value);

  const StretchCloud c = stretch_cloud(sp, u);
  REQUIRE(c.samples.size() == static_cast<std::size_t>(e.mesh.n_cells()));
  for (int cell = 0; cell < e.mesh.n_cells(); ++cell) {
    const Vec3& s = c.samples[static_cast<std::size_t>(cell)];
    CHECK(s[0] > 0.0);
    CHECK(s[1] > 0.0);
    CHECK(s[2] > 0.0);
    CHECK(s[0] >= s[1]);
    const double J = femdetail::cell_deformation(sp, u, cell).determinant();
    CHECK(std::abs(s[0] * s[1] * s[2] - J) < 1e-10);
  }

  // The asymmetric biaxial pull keeps nearly all cells between the perfect
  // biaxial state (l1 = l2) and the uniaxial state (l2 = 1): in-plane
  // stretching everywhere, little in-plane contraction.
  int in_band = 0;
  for (const Vec3& s : c.samples)
    if (s[0] >= 1.0 - 1e-9 && s[1] >= 0.9) ++in_band;
  CHECK(static_cast<double>(in_band) >= 0.8 * static_cast<double>(c.samples.size()));
}

// ---------------------------------------------------------------------------
// Sinkhorn divergence
// ---------------------------------------------------------------------------

TEST_CASE("transport divergence satisfies its algebraic identities") {
  const StretchCloud A = cloud_from(blob(Vec3(1.2, 1.0, 1.0), 0.05, 60, 1));
  const StretchCloud B = cloud_from(blob(Vec3(1.4, 0.9, 1.0), 0.05, 50, 2));

  SECTION("self-divergence vanishes") {
    CHECK(std::abs(sinkhorn_divergence(A, A)) < 1e-8);
  }

  SECTION("symmetry") {
    SinkhornOptions opts;
    opts.tol = 1e-12;
    const double ab = sinkhorn_divergence(A, B, opts);
    const double ba = sinkhorn_divergence(B, A, opts);
    CHECK(std::abs(ab - ba) < 1e-10);
  }

  SECTION("non-negative, and positive across distinct clouds") {
    const double d = sinkhorn_divergence(A, B);
    CHECK(d > 0.0);
    const StretchCloud C = cloud_from(blob(Vec3(1.2, 1.0, 1.0), 0.08, 40, 3));
    CHECK(sinkhorn_divergence(A, C) >= 0.0);
    CHECK(sinkhorn_divergence(B, C) >= 0.0);
  }

  SECTION("deterministic under a fixed seed") {
    const double d1 = sinkhorn_divergence(A, B);
    const double d2 = sinkhorn_divergence(A, B);
    CHECK(d1 == d2);
  }
}

TEST_CASE("two point masses approach the squared distance") {
  const StretchCloud A = cloud_from({Vec3(1.0, 1.0, 1.0)});
  const StretchCloud B = cloud_from({Vec3(1.3, 0.9, 1.0)});
  const double d2 = (A.samples[0] - B.samples[0]).squaredNorm();
  SinkhornOptions opts;
  opts.epsilon = 1e-3;
  CHECK(std::abs(sinkhorn_divergence(A, B, opts) - d2) < 1e-12);
  opts.epsilon = 1e-6;
  CHECK(std::abs(sinkhorn_divergence(A, B, opts) - d2) < 1e-12);
}

TEST_CASE("iteration budget exhaustion reports the marginal error") {
  const StretchCloud A = cloud_from(blob(Vec3(1.0, 1.0, 1.0), 0.1, 30, 4));
  const StretchCloud B = cloud_from(blob(Vec3(1.5, 1.1, 1.0), 0.1, 30, 5));
  SinkhornOptions opts;
  opts.tol = 0.0;  // unattainable
  opts.max_iters = 3;
  try {
    sinkhorn_divergence(A, B, opts);
    FAIL("expected SinkhornNoConvergence");
  } catch (const SinkhornNoConvergence& e) {
    CHECK(e.last_error > 0.0);
  }
}

TEST_CASE("large clouds are subsampled deterministically") {
  StretchCloud big = cloud_from(blob(Vec3(1.1, 1.0, 1.0), 0.06, 12000, 6));
  const StretchCloud B = cloud_from(blob(Vec3(1.3, 0.95, 1.0), 0.06, 800, 7));
  SinkhornOptions opts;
  opts.subsample_cap = 400;
  const double d1 = sinkhorn_divergence(big, B, opts);
  const double d2 = sinkhorn_divergence(big, B, opts);
  CHECK(d1 == d2);
  opts.seed = 99;
  const double d3 = sinkhorn_divergence(big, B, opts);
  CHECK(d3 != d1);  // different subsample, different estimate
  CHECK(std::abs(d3 - d1) < 0.05 * ((Vec3(1.1, 1, 1) - Vec3(1.3, 0.95, 1)).squaredNorm() + 0.1));
}

TEST_CASE("half-subsamples of one cloud stay close") {
  const std::vector<Vec3> all = blob(Vec3(1.2, 1.05, 1.0), 0.07, 800, 8);
  std::vector<int> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(9);
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.uniform() * double(idx.size() - k));
    std::swap(idx[k], idx[j]);
  }
  std::vector<Vec3> h1, h2;
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k % 2 == 0 ? h1 : h2).push_back(all[static_cast<std::size_t>(idx[k])]);

  double msd = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < all.size(); i += 8)
    for (std::size_t j = i + 1; j < all.size(); j += 8) {
      msd += (all[i] - all[j]).squaredNorm();
      ++pairs;
    }
  msd /= static_cast<double>(pairs);

  const double d = sinkhorn_divergence(cloud_from(h1), cloud_from(h2));
  CHECK(d < 0.05 * msd);  // five times the default regularization scale
}

// ---------------------------------------------------------------------------
// Plot export
// ---------------------------------------------------------------------------

TEST_CASE("plot export converts run tables into plot files") {
  const auto dir = fresh_dir("hyperfit_plot_export");
  {
    std::ofstream f(dir / "reactions.csv");
    f << "setup,load,tag,predicted,reference\n";
    f << "2,0.1,up,1.05,1.0\n2,0.2,up,2.2,2.0\n2,0.1,right,0.4,0.5\n2,0.2,right,0.9,1.0\n";
  }
  {
    std::ofstream f(dir / "point_errors.csv");
    f << "load,error\n";
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) f << "0.1," << v << "\n";
    for (double v : {1.0, 2.0, 3.0, 4.0}) f << "0.2," << v << "\n";
    for (double v : {1.0, 2.0, 3.0, 4.0, 100.0}) f << "0.3," << v << "\n";
  }
  {
    std::ofstream f(dir / "stretches.csv");
    f << "lambda1,lambda2,lambda3\n1.2,1.1,1\n1.4,1.0,1\n";
  }

  export_plot_data(dir.string());

  SECTION("boxplot quartiles match the sorting-based computation") {
    std::ifstream f(dir / "plot_error_box.csv");
    REQUIRE(f.good());
    std::string header;
    std::getline(f, header);
    CHECK(header == "load,q1,median,q3,whisker_lo,whisker_hi");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
      const auto fields = anadetail::split_csv_line(line);
      std::vector<double> r;
      for (const auto& s : fields) r.push_back(std::stod(s));
      rows.push_back(r);
    }
    REQUIRE(rows.size() == 3);
    // load 0.1: {1..5} -> q1=2, med=3, q3=4, whiskers at the extremes
    CHECK(rows[0] == std::vector<double>{0.1, 2.0, 3.0, 4.0, 1.0, 5.0});
    // load 0.2: {1..4} -> interpolated quartiles
    CHECK(rows[1] == std::vector<double>{0.2, 1.75, 2.5, 3.25, 1.0, 4.0});
    // load 0.3: {1,2,3,4,100} -> the outlier is outside the upper whisker
    CHECK(rows[2] == std::vector<double>{0.3, 2.0, 3.0, 4.0, 1.0, 4.0});
  }

  SECTION("reference curves start at (1,1) and obey their closed forms") {
    std::ifstream f(dir / "plot_stretch_reference.csv");
    REQUIRE(f.good());
    std::string header;
    std::getline(f, header);
    CHECK(header == "series,delta,lambda1,lambda2");
    std::map<std::string, int> rows_per_series;
    std::string line;
    while (std::getline(f, line)) {
      const auto fields = anadetail::split_csv_line(line);
      REQUIRE(fields.size() == 4);
      const double delta = std::stod(fields[1]);
      const double l1 = std::stod(fields[2]), l2 = std::stod(fields[3]);
      ++rows_per_series[fields[0]];
      if (delta == 0.0) {
        CHECK(l1 == 1.0);
        CHECK(l2 == 1.0);
      }
      CHECK(l1 >= l2);
      if (fields[0] == "simple_shear") CHECK(std::abs(l1 * l2 - 1.0) < 1e-12);
      if (fields[0] == "uniaxial_compression") {
        CHECK(l1 == 1.0);
        CHECK(std::abs(l2 - 1.0 / (1.0 + delta)) < 1e-15);
      }
      if (fields[0] == "biaxial_tension") CHECK(l1 == l2);
    }
    REQUIRE(rows_per_series.size() == 5);
    for (const auto& [name, count] : rows_per_series) CHECK(count == 51);
  }

  SECTION("load-reaction table and svg renderings exist") {
    std::ifstream f(dir / "plot_load_reaction.csv");
    REQUIRE(f.good());
    std::string header;
    std::getline(f, header);
    CHECK(header == "load,tag,predicted,reference");
    int rows = 0;
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 4);

    for (const char* name : {"plot_load_reaction.svg", "plot_stretch_scatter.svg"}) {
      std::ifstream svg(dir / name);
      REQUIRE(svg.good());
      std::string first;
      std::getline(svg, first);
      CHECK(first.rfind("<svg", 0) == 0);
    }
  }
}

TEST_CASE("plot export demands its input tables") {
  const auto empty = fresh_dir("hyperfit_plot_empty");
  REQUIRE_THROWS_AS(export_plot_data(empty.string()), MissingArtifacts);

  const auto partial = fresh_dir("hyperfit_plot_partial");
  {
    std::ofstream f(partial / "reactions.csv");
    f << "setup,load,tag,predicted,reference\n2,0.1,up,1.0,1.0\n";
  }
  try {
    export_plot_data(partial.string());
    FAIL("expected MissingArtifacts");
  } catch (const MissingArtifacts& e) {
    CHECK(std::string(e.what()).find("point_errors.csv") != std::string::npos);
  }

  const auto badheader = fresh_dir("hyperfit_plot_badheader");
  {
    std::ofstream f(badheader / "reactions.csv");
    f << "setup,load,predicted,reference\n";
  }
  REQUIRE_THROWS_AS(export_plot_data(badheader.string()), MissingArtifacts);
}
