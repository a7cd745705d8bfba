#pragma once

// Experiment definitions and synthetic data generation. Each of the six
// benchmark setups pairs a geometry with a boundary program whose magnitudes
// scale linearly with a load parameter, plus the list of load values the
// studies sweep. Forward generation continuation-solves every experiment with
// a ground-truth analytic material, samples observations under a mask, and
// injects Gaussian noise (absolute on displacements, relative on reactions).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hyperfit/common.hpp"
#include "hyperfit/fem.hpp"
#include "hyperfit/meshgen.hpp"

namespace hyperfit {

// ---------------------------------------------------------------------------
// Observation containers.
// ---------------------------------------------------------------------------

enum class ObservationMask { FullField, BoundaryOnly, Custom };

struct ReactionRecord {
  std::string tag;
  double value = 0.0;
};

struct ExperimentObservations {
  std::vector<Vec3> points;
  std::vector<Vec3> displacements;  // z component zero in 2d
  std::vector<ReactionRecord> reactions;
};

struct ObservationSet {
  std::vector<ExperimentObservations> experiments;
  ObservationMask mask = ObservationMask::FullField;
  std::vector<Vec3> custom_points;  // used when mask == Custom
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

// ---------------------------------------------------------------------------
// Setup tables.
// ---------------------------------------------------------------------------

struct ExperimentInstance {
  int setup_id = 1;
  int geometry_index = 0;
  GeometrySpec geometry;
  double h = 0.0;  // mesh spacing the geometry was generated at
  double load_value = 0.0;
  int n_steps = 2;  // continuation steps for the full load
  Mesh mesh;
  BcProgram bc;  // per-unit-load program; load_value is the load_scale
  std::vector<std::string> reaction_tags;
};

struct SetupBuild {
  int setup_id = 1;
  bool desk_scale = true;
  std::uint64_t seed = 0;
  std::vector<ExperimentInstance> experiments;
};

inline std::vector<double> setup_load_values(int setup_id) {
  switch (setup_id) {
    case 1: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    case 2: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    case 3: return {-0.1, 0.1, 0.2, 0.3};
    case 4: return {0.1, 0.2, 0.3, 0.4, 0.5};
    case 5: return {0.1, 0.2, 0.3, 0.4, 0.5};
    case 6: return {0.01, 0.02, 0.03, 0.04, 0.05, 0.06};
    default: throw Error("unknown setup id " + std::to_string(setup_id));
  }
}

/// Faces whose reaction forces are observed (normal components on stretched
/// Dirichlet faces). Force-driven setups observe none.
inline std::vector<std::string> setup_reaction_tags(int setup_id) {
  switch (setup_id) {
    case 1: return {"up", "right"};
    case 2: return {"up", "down"};
    case 3: return {};
    case 4: return {"right", "back", "up"};
    case 5: return {"up", "down"};
    case 6: return {};
    default: throw Error("unknown setup id " + std::to_string(setup_id));
  }
}

/// Boundary program per unit load; the experiment's load value is applied as
/// the load_scale of the solver.
inline BcProgram setup_bc_program(int setup_id) {
  using BC = BoundaryCondition;
  switch (setup_id) {
    case 1:
      // Quarter-symmetric biaxial stretch: delta up, delta/2 right,
      // sliding symmetry planes, hole free.
      return {{"left", BC::dirichlet_normal(0.0)},
              {"down", BC::dirichlet_normal(0.0)},
              {"up", BC::dirichlet_normal(1.0)},
              {"right", BC::dirichlet_normal(0.5)}};
    case 2:
      // Uniaxial vertical pull between clamped faces; everything else free.
      return {{"down", BC::dirichlet(Vec3::Zero())},
              {"up", BC::dirichlet(Vec3(0, 1, 0))}};
    case 3:
      // Normal springs everywhere on the outer square; the vertical sides add
      // an outward dead traction F*n.
      return {{"up", BC::normal_spring(0.01)},
              {"down", BC::normal_spring(0.01)},
              {"left", BC::normal_spring(0.01, Vec3(-1, 0, 0))},
              {"right", BC::normal_spring(0.01, Vec3(1, 0, 0))}};
    case 4:
      // Eighth-symmetric triaxial stretch delta, delta/2, delta/4.
      return {{"left", BC::dirichlet_normal(0.0)},
              {"down", BC::dirichlet_normal(0.0)},
              {"front", BC::dirichlet_normal(0.0)},
              {"right", BC::dirichlet_normal(1.0)},
              {"back", BC::dirichlet_normal(0.5)},
              {"up", BC::dirichlet_normal(0.25)}};
    case 5:
      // Clamped bottom; top face pulled up by delta and twisted about the z
      // axis by theta = (2 pi / 5) delta.
      return {{"down", BC::dirichlet(Vec3::Zero())},
              {"up", BC::dirichlet(Vec3(0, 0, 1), Mat3::Zero(), 2.0 * kPi / 5.0)}};
    case 6:
      // Roller bottom, springs on the front face and the bore, follower
      // pressure F on the back face plus a forward dead load F/5 pressing the
      // part against the front springs.
      return {{"down", BC::dirichlet_normal(0.0)},
              {"front", BC::normal_spring(0.01)},
              {"hole", BC::normal_spring(0.1)},
              {"back", BC::follower_pressure(1.0, Vec3(0, -0.2, 0))}};
    default:
      throw Error("unknown setup id " + std::to_string(setup_id));
  }
}

/// Mesh spacing presets. Full scale approximates the study's node counts;
/// desk scale keeps everything runnable in seconds.
inline double setup_mesh_spacing(int setup_id, bool desk_scale) {
  switch (setup_id) {
    case 1: return desk_scale ? 1.0 / 16.0 : 1.0 / 37.0;
    case 2: return desk_scale ? 1.0 / 20.0 : 1.0 / 68.0;
    case 3: return desk_scale ? 1.0 / 24.0 : 1.0 / 75.0;
    case 4: return desk_scale ? 1.0 / 6.0 : 1.0 / 19.0;
    case 5: return desk_scale ? 1.0 / 7.0 : 1.0 / 13.0;
    case 6: return desk_scale ? 1.0 / 10.0 : 1.0 / 35.0;
    default: throw Error("unknown setup id " + std::to_string(setup_id));
  }
}

inline int setup_continuation_steps(int setup_id, double load) {
  const double a = std::abs(load);
  int steps;
  if (setup_id == 3)
    steps = static_cast<int>(std::ceil(a / 0.1));
  else if (setup_id == 6)
    steps = 2;
  else
    steps = static_cast<int>(std::ceil(a / 0.1));  // displacement increments of 0.1
  return std::max(2, steps);
}

/// Instantiates every experiment of a setup: geometry (10 seeded geometries
/// for setup 3), boundary program, and the full load sweep.
inline SetupBuild build_setup(int setup_id, bool desk_scale, std::uint64_t seed,
                              double h_override = 0.0) {
  SetupBuild out;
  out.setup_id = setup_id;
  out.desk_scale = desk_scale;
  out.seed = seed;
  const double h = h_override > 0.0 ? h_override : setup_mesh_spacing(setup_id, desk_scale);
  const auto loads = setup_load_values(setup_id);
  const BcProgram bc = setup_bc_program(setup_id);
  const auto rtags = setup_reaction_tags(setup_id);
  const int n_geoms = setup_id == 3 ? 10 : 1;
  for (int g = 0; g < n_geoms; ++g) {
    GeometrySpec spec;
    spec.setup_id = setup_id;
    spec.seed = setup_id == 3 ? seed + static_cast<std::uint64_t>(g) : seed;
    const Mesh mesh = generate_mesh(spec, h);
    for (double load : loads) {
      ExperimentInstance e;
      e.setup_id = setup_id;
      e.geometry_index = g;
      e.geometry = spec;
      e.h = h;
      e.load_value = load;
      e.n_steps = setup_continuation_steps(setup_id, load);
      e.mesh = mesh;
      e.bc = bc;
      e.reaction_tags = rtags;
      out.experiments.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data generation.
// ---------------------------------------------------------------------------

struct SyntheticDataset {
  int setup_id = 1;
  bool desk_scale = true;
  std::uint64_t build_seed = 0;
  std::string ground_truth;  // analytic material name: nh/mr/ih/fu
  std::vector<ExperimentInstance> experiments;
  std::vector<EquilibriumSolution> solutions;  // empty after loading from file
  std::vector<std::string> mesh_checksums;     // per experiment
  ObservationSet observations;
};

/// Observation points for one experiment under a mask: all mesh nodes, the
/// boundary nodes only, or a caller-provided list.
inline std::vector<Vec3> observation_points(const Mesh& mesh, ObservationMask mask,
                                            const std::vector<Vec3>& custom_points) {
  std::vector<Vec3> pts;
  switch (mask) {
    case ObservationMask::FullField:
      pts = mesh.nodes;
      break;
    case ObservationMask::BoundaryOnly: {
      std::set<int> nodes;
      for (const auto& f : mesh.facets)
        for (int k = 0; k < mesh.nodes_per_facet(); ++k)
          nodes.insert(f.nodes[static_cast<std::size_t>(k)]);
      for (int n : nodes) pts.push_back(mesh.nodes[static_cast<std::size_t>(n)]);
      break;
    }
    case ObservationMask::Custom:
      pts = custom_points;
      break;
  }
  return pts;
}

/// Continuation-solves every experiment with the ground-truth analytic model,
/// samples displacements at the masked points and reactions on the observed
/// faces, then adds noise: i.i.d. Gaussian(0, sigma^2) per displacement
/// component (in length units) and relative Gaussian of the same sigma on
/// each reaction. sigma = 0 reproduces the interpolated solutions bit for
/// bit. Draw order is fixed (per experiment: displacement components in point
/// order, then reactions), so a seed pins the whole dataset.
inline SyntheticDataset generate_synthetic(const SetupBuild& build,
                                           const ConstitutiveModel& ground_truth,
                                           ObservationMask mask, double noise_sigma,
                                           std::uint64_t noise_seed,
                                           const std::vector<Vec3>& custom_points = {}) {
  if (ground_truth.kind != ConstitutiveModel::Kind::Analytic)
    throw Error("synthetic data requires an analytic ground-truth model");
  if (mask == ObservationMask::Custom && custom_points.empty())
    throw Error("custom observation mask requires points");
  if (!(noise_sigma >= 0.0)) throw Error("noise sigma must be nonnegative");

  SyntheticDataset ds;
  ds.setup_id = build.setup_id;
  ds.desk_scale = build.desk_scale;
  ds.build_seed = build.seed;
  ds.ground_truth = analytic_name(ground_truth.analytic.kind);
  ds.experiments = build.experiments;
  ds.observations.mask = mask;
  ds.observations.custom_points = custom_points;
  ds.observations.noise_sigma = noise_sigma;
  ds.observations.noise_seed = noise_seed;

  Rng noise(noise_seed);
  for (const auto& e : ds.experiments) {
    const FeSpace sp = make_space(e.mesh, e.bc);
    const EquilibriumSolution sol =
        continuation_solve(sp, ground_truth, e.load_value, e.n_steps);

    ExperimentObservations obs;
    obs.points = observation_points(e.mesh, mask, custom_points);
    const VecX u_full = full_displacement(sp, sol.dof_vector, sol.load_scale);
    obs.displacements = interpolate_displacement(sp, u_full, obs.points);
    if (noise_sigma > 0.0)
      for (auto& d : obs.displacements)
        for (int c = 0; c < sp.dim; ++c) d[c] += noise_sigma * noise.gaussian();
    for (const auto& tag : e.reaction_tags) {
      const double R = reaction_force(sp, ground_truth, sol.dof_vector, sol.load_scale, tag);
      const double noisy = noise_sigma > 0.0 ? R * (1.0 + noise_sigma * noise.gaussian()) : R;
      obs.reactions.push_back({tag, noisy});
    }

    ds.solutions.push_back(sol);
    ds.mesh_checksums.push_back(mesh_checksum(e.mesh));
    ds.observations.experiments.push_back(std::move(obs));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset files: line-oriented text with hex-encoded doubles for exactness.
// Mesh geometry lives in sibling mesh files referenced with checksums.
// ---------------------------------------------------------------------------

namespace expdetail {

inline std::string mask_name(ObservationMask m) {
  switch (m) {
    case ObservationMask::FullField: return "full";
    case ObservationMask::BoundaryOnly: return "boundary";
    case ObservationMask::Custom: return "custom";
  }
  return "?";
}

inline ObservationMask mask_from_name(const std::string& s) {
  if (s == "full") return ObservationMask::FullField;
  if (s == "boundary") return ObservationMask::BoundaryOnly;
  if (s == "custom") return ObservationMask::Custom;
  throw MalformedDataset("unknown observation mask '" + s + "'");
}

inline void write_bc(std::string& out, const std::string& tag, const BoundaryCondition& c) {
  using Kind = BoundaryCondition::Kind;
  out += "bc " + tag + " ";
  switch (c.kind) {
    case Kind::Free:
      out += "free";
      break;
    case Kind::DirichletVector: {
      out += "dirichlet";
      for (int i = 0; i < 3; ++i) out += " " + double_to_hex(c.offset[i]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out += " " + double_to_hex(c.linear(i, j));
      out += " " + double_to_hex(c.twist_rate);
      break;
    }
    case Kind::DirichletNormal:
      out += "dnormal " + double_to_hex(c.normal_value);
      break;
    case Kind::Traction:
      out += "traction";
      for (int i = 0; i < 3; ++i) out += " " + double_to_hex(c.traction[i]);
      break;
    case Kind::NormalSpring:
      out += "spring " + double_to_hex(c.spring_k);
      for (int i = 0; i < 3; ++i) out += " " + double_to_hex(c.traction[i]);
      break;
    case Kind::FollowerPressure:
      out += "follower " + double_to_hex(c.pressure);
      for (int i = 0; i < 3; ++i) out += " " + double_to_hex(c.traction[i]);
      break;
  }
  out += "\n";
}

}  // namespace expdetail

inline void save_dataset(const SyntheticDataset& ds, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  const std::string stem = p.stem().string();

  // One mesh file per distinct geometry.
  std::map<int, std::string> mesh_files;
  for (std::size_t i = 0; i < ds.experiments.size(); ++i) {
    const auto& e = ds.experiments[i];
    if (mesh_files.count(e.geometry_index)) continue;
    const std::string name = stem + "_mesh" + std::to_string(e.geometry_index) + ".txt";
    save_mesh(e.mesh, (dir / name).string());
    mesh_files[e.geometry_index] = name;
  }

  std::string out;
  out += "dataset 1\n";
  out += "setup " + std::to_string(ds.setup_id) + " " + (ds.desk_scale ? "desk" : "full") + " " +
         std::to_string(ds.build_seed) + "\n";
  out += "ground_truth " + ds.ground_truth + "\n";
  out += "sigma " + double_to_hex(ds.observations.noise_sigma) + "\n";
  out += "noise_seed " + std::to_string(ds.observations.noise_seed) + "\n";
  out += "mask " + expdetail::mask_name(ds.observations.mask) + "\n";
  out += "custom " + std::to_string(ds.observations.custom_points.size()) + "\n";
  for (const auto& cp : ds.observations.custom_points) {
    out += "cp";
    for (int i = 0; i < 3; ++i) out += " " + double_to_hex(cp[i]);
    out += "\n";
  }
  out += "experiments " + std::to_string(ds.experiments.size()) + "\n";
  for (std::size_t i = 0; i < ds.experiments.size(); ++i) {
    const auto& e = ds.experiments[i];
    const auto& obs = ds.observations.experiments[i];
    out += "experiment " + std::to_string(i) + "\n";
    out += "geometry " + std::to_string(e.geometry_index) + " " + std::to_string(e.geometry.seed) +
           " " + double_to_hex(e.h) + "\n";
    out += "load " + double_to_hex(e.load_value) + " " + std::to_string(e.n_steps) + "\n";
    out += "mesh " + mesh_files.at(e.geometry_index) + " " + ds.mesh_checksums[i] + "\n";
    for (const auto& [tag, cond] : e.bc) expdetail::write_bc(out, tag, cond);
    for (const auto& tag : e.reaction_tags) out += "rtag " + tag + "\n";
    out += "obs " + std::to_string(obs.points.size()) + "\n";
    for (std::size_t k = 0; k < obs.points.size(); ++k) {
      out += "p";
      for (int c = 0; c < 3; ++c) out += " " + double_to_hex(obs.points[k][c]);
      for (int c = 0; c < 3; ++c) out += " " + double_to_hex(obs.displacements[k][c]);
      out += "\n";
    }
    for (const auto& r : obs.reactions)
      out += "rx " + r.tag + " " + double_to_hex(r.value) + "\n";
    out += "end\n";
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << out;
  if (!f) throw Error("failed writing '" + path + "'");
}

/// Loads a dataset and its referenced meshes, validating checksums. The
/// solutions vector stays empty; training re-solves from the recorded
/// experiments.
inline SyntheticDataset load_dataset(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MalformedDataset("cannot open dataset file '" + path + "'");
  const fs::path dir = fs::path(path).parent_path().empty() ? fs::path(".")
                                                            : fs::path(path).parent_path();

  SyntheticDataset ds;
  std::map<std::string, Mesh> mesh_cache;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw MalformedDataset("dataset " + path + ":" + std::to_string(line_no) + ": " + what);
  };

  bool have_header = false;
  long n_experiments = -1;
  long n_custom = -1;
  ExperimentInstance cur;
  ExperimentObservations cur_obs;
  long cur_n_obs = -1;
  bool in_experiment = false;

  auto finish_experiment = [&]() {
    if (cur_n_obs >= 0 && static_cast<long>(cur_obs.points.size()) != cur_n_obs)
      fail("observation count mismatch");
    ds.experiments.push_back(cur);
    ds.observations.experiments.push_back(cur_obs);
    cur = ExperimentInstance{};
    cur_obs = ExperimentObservations{};
    cur_n_obs = -1;
    in_experiment = false;
  };

  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto need = [&](bool ok, const char* what) {
      if (!ok) fail(std::string("bad ") + what);
    };
    if (key == "dataset") {
      int version = 0;
      need(static_cast<bool>(ss >> version), "version");
      if (version != 1) throw MalformedDataset("dataset " + path + ": unsupported version " +
                                               std::to_string(version));
      have_header = true;
    } else if (!have_header) {
      fail("missing dataset header");
    } else if (key == "setup") {
      std::string scale;
      need(static_cast<bool>(ss >> ds.setup_id >> scale >> ds.build_seed), "setup record");
      if (scale != "desk" && scale != "full") fail("setup scale must be desk or full");
      ds.desk_scale = scale == "desk";
    } else if (key == "ground_truth") {
      need(static_cast<bool>(ss >> ds.ground_truth), "ground truth");
      analytic_from_name(ds.ground_truth);  // validates the name
    } else if (key == "sigma") {
      std::string hex;
      need(static_cast<bool>(ss >> hex), "sigma");
      ds.observations.noise_sigma = hex_to_double(hex);
    } else if (key == "noise_seed") {
      need(static_cast<bool>(ss >> ds.observations.noise_seed), "noise seed");
    } else if (key == "mask") {
      std::string m;
      need(static_cast<bool>(ss >> m), "mask");
      ds.observations.mask = expdetail::mask_from_name(m);
    } else if (key == "custom") {
      need(static_cast<bool>(ss >> n_custom) && n_custom >= 0, "custom count");
    } else if (key == "cp") {
      Vec3 v;
      std::string h0, h1, h2;
      need(static_cast<bool>(ss >> h0 >> h1 >> h2), "custom point");
      v = Vec3(hex_to_double(h0), hex_to_double(h1), hex_to_double(h2));
      ds.observations.custom_points.push_back(v);
    } else if (key == "experiments") {
      need(static_cast<bool>(ss >> n_experiments) && n_experiments >= 0, "experiment count");
    } else if (key == "experiment") {
      if (in_experiment) finish_experiment();
      long idx = -1;
      need(static_cast<bool>(ss >> idx), "experiment index");
      if (idx != static_cast<long>(ds.experiments.size())) fail("experiment records out of order");
      in_experiment = true;
      cur.setup_id = ds.setup_id;
      cur.bc.clear();
      cur.reaction_tags.clear();
    } else if (!in_experiment) {
      fail("record outside an experiment block");
    } else if (key == "geometry") {
      std::string hex;
      need(static_cast<bool>(ss >> cur.geometry_index >> cur.geometry.seed >> hex), "geometry");
      cur.geometry.setup_id = ds.setup_id;
      cur.h = hex_to_double(hex);
    } else if (key == "load") {
      std::string hex;
      need(static_cast<bool>(ss >> hex >> cur.n_steps), "load");
      cur.load_value = hex_to_double(hex);
    } else if (key == "mesh") {
      std::string file, checksum;
      need(static_cast<bool>(ss >> file >> checksum), "mesh reference");
      auto it = mesh_cache.find(file);
      if (it == mesh_cache.end()) {
        Mesh m;
        try {
          m = load_mesh((dir / file).string());
        } catch (const Error& e) {
          throw MalformedDataset("dataset " + path + ": referenced mesh '" + file +
                                 "': " + e.what());
        }
        it = mesh_cache.emplace(file, std::move(m)).first;
      }
      if (mesh_checksum(it->second) != checksum)
        throw MalformedDataset("dataset " + path + ": checksum mismatch for mesh '" + file + "'");
      cur.mesh = it->second;
      ds.mesh_checksums.push_back(checksum);
    } else if (key == "bc") {
      std::string tag, kind;
      need(static_cast<bool>(ss >> tag >> kind), "bc record");
      BoundaryCondition c;
      auto rd = [&]() {
        std::string hex;
        if (!(ss >> hex)) fail("bc parameters");
        return hex_to_double(hex);
      };
      if (kind == "free") {
        c = BoundaryCondition::free_face();
      } else if (kind == "dirichlet") {
        Vec3 off;
        for (int i = 0; i < 3; ++i) off[i] = rd();
        Mat3 lin;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) lin(i, j) = rd();
        c = BoundaryCondition::dirichlet(off, lin, rd());
      } else if (kind == "dnormal") {
        c = BoundaryCondition::dirichlet_normal(rd());
      } else if (kind == "traction") {
        Vec3 t;
        for (int i = 0; i < 3; ++i) t[i] = rd();
        c = BoundaryCondition::surface_traction(t);
      } else if (kind == "spring") {
        const double k = rd();
        Vec3 t;
        for (int i = 0; i < 3; ++i) t[i] = rd();
        c = BoundaryCondition::normal_spring(k, t);
      } else if (kind == "follower") {
        const double pr = rd();
        Vec3 t;
        for (int i = 0; i < 3; ++i) t[i] = rd();
        c = BoundaryCondition::follower_pressure(pr, t);
      } else {
        fail("unknown bc kind '" + kind + "'");
      }
      cur.bc[tag] = c;
    } else if (key == "rtag") {
      std::string tag;
      need(static_cast<bool>(ss >> tag), "reaction tag");
      cur.reaction_tags.push_back(tag);
    } else if (key == "obs") {
      need(static_cast<bool>(ss >> cur_n_obs) && cur_n_obs >= 0, "observation count");
    } else if (key == "p") {
      std::string h[6];
      need(static_cast<bool>(ss >> h[0] >> h[1] >> h[2] >> h[3] >> h[4] >> h[5]),
           "observation record");
      cur_obs.points.emplace_back(hex_to_double(h[0]), hex_to_double(h[1]), hex_to_double(h[2]));
      cur_obs.displacements.emplace_back(hex_to_double(h[3]), hex_to_double(h[4]),
                                         hex_to_double(h[5]));
    } else if (key == "rx") {
      ReactionRecord r;
      std::string hex;
      need(static_cast<bool>(ss >> r.tag >> hex), "reaction record");
      r.value = hex_to_double(hex);
      cur_obs.reactions.push_back(r);
    } else if (key == "end") {
      finish_experiment();
    } else {
      fail("unknown record '" + key + "'");
    }
    std::string rest;
    if (ss >> rest) fail("trailing fields");
  }
  if (!have_header) throw MalformedDataset("dataset " + path + ": missing header");
  if (in_experiment) throw MalformedDataset("dataset " + path + ": unterminated experiment block");
  if (n_experiments >= 0 && static_cast<long>(ds.experiments.size()) != n_experiments)
    throw MalformedDataset("dataset " + path + ": expected " + std::to_string(n_experiments) +
                           " experiments, found " + std::to_string(ds.experiments.size()));
  if (n_custom >= 0 && static_cast<long>(ds.observations.custom_points.size()) != n_custom)
    throw MalformedDataset("dataset " + path + ": custom point count mismatch");
  return ds;
}

}  // namespace hyperfit
