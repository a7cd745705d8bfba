// Command-line front end for the constitutive-discovery library: synthetic
// data generation, model training, evaluation, and post-hoc analysis.
//
// Exit codes: 0 success, 2 usage/configuration errors, 3 solver failures,
// 4 data/artifact errors, 5 property-check failures. Every failure prints a
// single machine-readable line `error category=<c> message=<m>` on stderr.
#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "hyperfit/analysis.hpp"
#include "hyperfit/discovery.hpp"
#include "hyperfit/experiments.hpp"
#include "hyperfit/meshgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperfit;

namespace {

// ---------------------------------------------------------------------------
// Small shared helpers.
// ---------------------------------------------------------------------------

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

/// Shortest exact decimal form, so logs can be compared bitwise across runs.
std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

ConstitutiveModel analytic_by_name(const std::string& name) {
  return ConstitutiveModel::make_analytic(analytic_from_name(name));
}

// ---------------------------------------------------------------------------
// Option files. Each pipeline subcommand mirrors its flags into a plain
// `key=value` snapshot; `--config FILE` loads the same format, and values
// given on the command line win over the file.
// ---------------------------------------------------------------------------

class RunConfig {
 public:
  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path_, "Option file (key=value; command-line flags win)");
  }

  template <class T>
  void bind(CLI::Option* opt, const std::string& key, T& value, bool required = false) {
    Field f;
    f.opt = opt;
    f.key = key;
    f.required = required;
    f.write = [&value] { return to_text(value); };
    f.apply = [&value, key](const std::string& s) { value = from_text<T>(s, key); };
    fields_.push_back(std::move(f));
  }

  /// Applies the config file (when given) to options the command line left
  /// unset, rejects unknown keys, and enforces required options.
  void resolve() {
    std::map<std::string, std::string> kv;
    if (!path_.empty()) kv = parse_file(path_);
    std::set<std::string> known;
    for (Field& f : fields_) {
      known.insert(f.key);
      const auto it = kv.find(f.key);
      f.from_config = it != kv.end();
      if (f.from_config && f.opt->count() == 0) f.apply(it->second);
    }
    for (const auto& entry : kv)
      if (!known.count(entry.first))
        throw Error("config file " + path_ + ": unknown key '" + entry.first + "'");
    for (const Field& f : fields_)
      if (f.required && f.opt->count() == 0 && !f.from_config)
        throw Error("--" + f.key + " is required");
  }

  /// Resolved snapshot; rerunning with `--config <snapshot>` reproduces the
  /// run, and any flags given alongside still win.
  std::string str() const {
    std::string out;
    for (const auto& f : fields_) out += f.key + "=" + f.write() + "\n";
    return out;
  }

 private:
  struct Field {
    CLI::Option* opt = nullptr;
    std::string key;
    bool required = false;
    bool from_config = false;
    std::function<std::string()> write;
    std::function<void(const std::string&)> apply;
  };

  static std::string to_text(const std::string& v) { return v; }
  static std::string to_text(double v) { return num(v); }
  static std::string to_text(int v) { return std::to_string(v); }
  static std::string to_text(std::uint64_t v) { return std::to_string(v); }
  static std::string to_text(bool v) { return v ? "true" : "false"; }

  template <class T>
  static T from_text(const std::string& s, const std::string& key) {
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        return s;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw std::invalid_argument(s);
      } else if constexpr (std::is_same_v<T, double>) {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } else if constexpr (std::is_same_v<T, int>) {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } else {
        static_assert(std::is_same_v<T, std::uint64_t>);
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error("config key '" + key + "': cannot parse value '" + s + "'");
    }
  }

  static std::map<std::string, std::string> parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error("config file " + path + " line " + std::to_string(ln) +
                    ": expected key=value");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
  }

  std::string path_;
  std::vector<Field> fields_;
};

void check_setup_id(int setup) {
  if (setup < 1 || setup > 6) throw Error("--setup must be between 1 and 6");
}

double pick_spacing(int setup, bool desk, double h_flag) {
  return h_flag > 0.0 ? h_flag : setup_mesh_spacing(setup, desk);
}

/// Per-node displacement vectors from a full dof vector.
std::vector<Vec3> node_displacements(const FeSpace& sp, const Mesh& mesh, const VecX& u_full) {
  std::vector<Vec3> out(mesh.nodes.size(), Vec3::Zero());
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
    for (int c = 0; c < mesh.dim; ++c)
      out[n][c] = u_full[sp.dof(static_cast<int>(n), c)];
  return out;
}

StretchCloud read_stretch_csv(const fs::path& dir) {
  if (!fs::exists(dir / "stretches.csv"))
    throw MissingArtifacts("stretches.csv not found in " + dir.string() +
                           " (run `analyze stretches` or `evaluate` first)");
  const auto rows = anadetail::read_csv(dir / "stretches.csv", "lambda1,lambda2,lambda3");
  StretchCloud cloud;
  bool planar = true;
  for (const auto& r : rows) {
    const Vec3 s(std::stod(r[0]), std::stod(r[1]), std::stod(r[2]));
    planar = planar && s[2] == 1.0;
    cloud.samples.push_back(s);
  }
  cloud.dim = planar ? 2 : 3;
  return cloud;
}

// ---------------------------------------------------------------------------
// mesh gen
// ---------------------------------------------------------------------------

struct MeshGenArgs {
  int setup = 1;
  double h = 0.0;  // 0: preset spacing for the chosen scale
  std::uint64_t seed = 0;
  bool full_scale = false;
  std::string out;
};

void run_mesh_gen(const RunConfig& cfg, const MeshGenArgs& a) {
  check_setup_id(a.setup);
  const double h = pick_spacing(a.setup, !a.full_scale, a.h);
  const Mesh mesh = generate_mesh(GeometrySpec{a.setup, a.seed}, h);
  save_mesh(mesh, a.out);
  fs::path snap(a.out);
  snap.replace_extension(".config.ini");
  write_file(snap, cfg.str());
  std::cout << "mesh setup=" << a.setup << " h=" << num(h) << " nodes=" << mesh.n_nodes()
            << " cells=" << mesh.n_cells() << " facets=" << mesh.n_facets() << " out=" << a.out
            << "\n";
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  int setup = 1;
  std::string material;
  double h = 0.0;
  std::uint64_t seed = 0;
  bool full_scale = false;
  std::string out;
};

void run_simulate(const RunConfig& cfg, const SimulateArgs& a) {
  check_setup_id(a.setup);
  const SetupBuild build = build_setup(a.setup, !a.full_scale, a.seed, a.h);
  const ConstitutiveModel truth = analytic_by_name(a.material);
  const SyntheticDataset ds =
      generate_synthetic(build, truth, ObservationMask::FullField, 0.0, 0);
  fs::create_directories(a.out);
  save_dataset(ds, (fs::path(a.out) / "sim.txt").string());
  write_file(fs::path(a.out) / "config.ini", cfg.str());
  for (std::size_t i = 0; i < ds.experiments.size(); ++i)
    std::cout << "simulate experiment=" << i << " load=" << num(ds.experiments[i].load_value)
              << " nodes=" << ds.experiments[i].mesh.n_nodes() << "\n";
  std::cout << "simulate setup=" << a.setup << " material=" << a.material
            << " experiments=" << ds.experiments.size() << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------------------
// dataset make
// ---------------------------------------------------------------------------

struct DatasetArgs {
  std::string from;
  std::string mask;  // full | boundary
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_dataset_make(const RunConfig& cfg, const DatasetArgs& a) {
  if (a.mask != "full" && a.mask != "boundary")
    throw Error("--mask must be 'full' or 'boundary'");
  if (a.noise < 0.0) throw Error("--noise must be nonnegative");
  const fs::path src_file = fs::path(a.from) / "sim.txt";
  if (!fs::exists(src_file))
    throw MissingArtifacts("sim.txt not found in " + a.from + " (run `simulate` first)");
  const SyntheticDataset src = load_dataset(src_file.string());
  SetupBuild build;
  build.setup_id = src.setup_id;
  build.desk_scale = src.desk_scale;
  build.seed = src.build_seed;
  build.experiments = src.experiments;
  const ConstitutiveModel truth = analytic_by_name(src.ground_truth);
  const ObservationMask mask =
      a.mask == "full" ? ObservationMask::FullField : ObservationMask::BoundaryOnly;
  const SyntheticDataset ds = generate_synthetic(build, truth, mask, a.noise, a.seed);
  const std::string out =
      a.out.empty() ? (fs::path(a.from) / ("dataset_" + a.mask + ".txt")).string() : a.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_dataset(ds, out);
  fs::path snap(out);
  snap.replace_extension(".config.ini");
  write_file(snap, cfg.str());
  std::size_t n_points = 0;
  for (const auto& e : ds.observations.experiments) n_points += e.points.size();
  std::cout << "dataset mask=" << a.mask << " noise=" << num(a.noise) << " seed=" << a.seed
            << " experiments=" << ds.experiments.size() << " points=" << n_points
            << " out=" << out << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string arch_file;
  std::string grid;  // full | desk
  int seeds = 5;
  std::uint64_t seed0 = 1;
  int max_epochs = 2000;
  int checkpoint_every = 100;
  std::string out;
};

json arch_to_json(const HnnArchitecture& a) {
  return json{{"layers", a.layers},
              {"width", a.width},
              {"skip_connections", a.skip_connections},
              {"isochoric_inputs", a.isochoric_inputs},
              {"w_scale", a.w_scale},
              {"sigma_init", a.sigma_init}};
}

HnnArchitecture arch_from_json(const json& j) {
  HnnArchitecture a;
  a.layers = j.value("layers", a.layers);
  a.width = j.value("width", a.width);
  a.skip_connections = j.value("skip_connections", a.skip_connections);
  a.isochoric_inputs = j.value("isochoric_inputs", a.isochoric_inputs);
  a.w_scale = j.value("w_scale", a.w_scale);
  a.sigma_init = j.value("sigma_init", a.sigma_init);
  return a;
}

void print_seed_reports(const std::vector<SeedReport>& reports) {
  for (const auto& r : reports)
    std::cout << "train seed=" << r.seed << " loss=" << num(r.loss) << " epochs=" << r.epochs
              << " stalled=" << (r.stalled ? 1 : 0) << "\n";
}

void run_train(const RunConfig& cfg, const TrainArgs& a) {
  if (a.arch_file.empty() == a.grid.empty())
    throw Error("exactly one of --arch-file and --grid is required");
  if (!a.grid.empty() && a.grid != "full" && a.grid != "desk")
    throw Error("--grid must be 'full' or 'desk'");
  if (a.seeds < 1) throw Error("--seeds must be at least 1");
  if (a.max_epochs < 1) throw Error("--max-epochs must be at least 1");
  if (a.checkpoint_every < 0) throw Error("--checkpoint-every must be nonnegative");
  const SyntheticDataset ds = load_dataset(a.dataset);
  const DiscoveryProblem prob = make_problem(ds.experiments, ds.observations);
  fs::create_directories(a.out);

  TrainOptions opts;
  opts.max_epochs = a.max_epochs;
  opts.checkpoint_every = a.checkpoint_every;
  opts.run_dir = a.out;

  json summary;
  summary["dataset"] = a.dataset;
  summary["alpha_R"] = prob.alpha_R;
  const TrainResult* final_result = nullptr;
  TrainResult single;
  MultiSeedResult multi;
  GridResult gres;

  if (!a.grid.empty()) {
    summary["mode"] = "grid";
    const auto candidates = a.grid == "full" ? full_architecture_grid() : desk_architecture_grid();
    gres = grid_search(candidates, prob, a.seeds, a.seed0, opts);
    json report = json::array();
    for (const auto& entry : gres.report) {
      json e = arch_to_json(entry.arch);
      e["loss"] = entry.loss;
      e["failed"] = entry.failed;
      e["note"] = entry.note;
      report.push_back(e);
      std::cout << "train candidate layers=" << entry.arch.layers
                << " width=" << entry.arch.width << " loss=" << num(entry.loss)
                << " failed=" << (entry.failed ? 1 : 0) << "\n";
    }
    summary["grid_report"] = report;
    summary["best_architecture"] = arch_to_json(gres.best_arch);
    final_result = &gres.best;
  } else {
    json spec;
    try {
      std::ifstream in(a.arch_file);
      if (!in) throw Error("cannot open architecture file " + a.arch_file);
      spec = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("architecture file " + a.arch_file + ": " + e.what());
    }
    const std::string kind = spec.value("kind", "hnn");
    if (kind == "hnn" || kind == "tuned") {
      const HnnArchitecture arch =
          kind == "tuned"
              ? tuned_architecture(spec.value("dim", 2), spec.value("material", "mr"))
              : arch_from_json(spec);
      summary["mode"] = "multi_seed";
      summary["architecture"] = arch_to_json(arch);
      multi = multi_seed_train(arch, prob, a.seeds, a.seed0, opts);
      print_seed_reports(multi.reports);
      summary["best_seed"] = multi.best_seed;
      json reports = json::array();
      for (const auto& r : multi.reports)
        reports.push_back(
            {{"seed", r.seed}, {"loss", r.loss}, {"epochs", r.epochs}, {"stalled", r.stalled}});
      summary["seed_reports"] = reports;
      final_result = &multi.best;
    } else {
      // Analytic family: a single deterministic calibration run.
      ConstitutiveModel init = analytic_by_name(kind);
      if (spec.contains("coefficients")) {
        const auto coeffs = spec["coefficients"].get<std::vector<double>>();
        if (coeffs.size() != init.analytic.coeff.size())
          throw Error("architecture file: expected " +
                      std::to_string(init.analytic.coeff.size()) + " coefficients for " + kind);
        init.analytic.coeff = coeffs;
      }
      summary["mode"] = "single";
      summary["family"] = kind;
      opts.seed = a.seed0;
      single = bfgs_train(init, prob, opts);
      final_result = &single;
      json coeffs = json::array();
      for (double c : single.model.analytic.coeff) coeffs.push_back(c);
      summary["coefficients"] = coeffs;
    }
  }

  const TrainResult& best = *final_result;
  save_checkpoint(best.model, (fs::path(a.out) / "model.json").string(), a.seed0);
  summary["final_loss"] = best.loss.total;
  summary["displacement_term"] = best.loss.displacement_term;
  summary["reaction_term"] = best.loss.reaction_term;
  summary["epochs"] = best.history.epochs.size();
  summary["converged"] = best.history.converged;
  summary["stalled"] = best.history.stalled;
  summary["diagnostic"] = best.history.diagnostic;
  summary["model"] = "model.json";
  write_file(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  write_file(fs::path(a.out) / "config.ini", cfg.str());
  std::cout << "train mode=" << summary["mode"].get<std::string>()
            << " loss=" << num(best.loss.total) << " epochs=" << best.history.epochs.size()
            << " converged=" << (best.history.converged ? 1 : 0)
            << " stalled=" << (best.history.stalled ? 1 : 0) << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  int setup = 2;
  std::string material;
  double h = 0.0;
  std::uint64_t seed = 0;
  bool full_scale = false;
  std::string out;
};

void run_evaluate(const RunConfig& cfg, const EvaluateArgs& a) {
  check_setup_id(a.setup);
  const ConstitutiveModel model = load_checkpoint(a.model);
  const ConstitutiveModel truth = analytic_by_name(a.material);
  const SetupBuild build = build_setup(a.setup, !a.full_scale, a.seed, a.h);

  std::map<double, DisplacementGroup> groups;
  std::vector<ReactionPair> reactions;
  StretchCloud cloud;
  std::string point_rows;    // load,error per observation node
  std::string stretch_rows;  // lambda1,lambda2,lambda3

  for (std::size_t i = 0; i < build.experiments.size(); ++i) {
    const ExperimentInstance& e = build.experiments[i];
    const FeSpace sp = make_space(e.mesh, e.bc);
    const EquilibriumSolution ref = continuation_solve(sp, truth, e.load_value, e.n_steps);
    const EquilibriumSolution pred = continuation_solve(sp, model, e.load_value, e.n_steps);
    const VecX u_ref = full_displacement(sp, ref.dof_vector, e.load_value);
    const VecX u_pred = full_displacement(sp, pred.dof_vector, e.load_value);
    const auto d_ref = node_displacements(sp, e.mesh, u_ref);
    const auto d_pred = node_displacements(sp, e.mesh, u_pred);

    DisplacementGroup& g = groups[e.load_value];
    g.load = e.load_value;
    g.reference.insert(g.reference.end(), d_ref.begin(), d_ref.end());
    g.predicted.insert(g.predicted.end(), d_pred.begin(), d_pred.end());
    for (std::size_t n = 0; n < d_ref.size(); ++n)
      point_rows += num(e.load_value) + "," + num((d_pred[n] - d_ref[n]).norm()) + "\n";
    for (const std::string& tag : e.reaction_tags)
      reactions.push_back({e.load_value, tag,
                           reaction_force(sp, model, pred.dof_vector, e.load_value, tag),
                           reaction_force(sp, truth, ref.dof_vector, e.load_value, tag)});
    append_stretches(sp, u_pred, cloud);
    std::cout << "evaluate experiment=" << i << " load=" << num(e.load_value)
              << " newton_truth=" << ref.newton_iters << " newton_model=" << pred.newton_iters
              << "\n";
  }

  std::vector<DisplacementGroup> group_list;
  for (auto& kv : groups) group_list.push_back(std::move(kv.second));
  const MetricReport rep = vrmse_report(group_list, reactions);

  fs::create_directories(a.out);
  json metrics;
  metrics["vrmse"] = rep.vrmse;
  metrics["rmse"] = rep.rmse;
  metrics["variance"] = rep.variance;
  json per_load = json::array();
  for (const auto& m : rep.per_load)
    per_load.push_back(
        {{"load", m.load}, {"rmse", m.rmse}, {"variance", m.variance}, {"vrmse", m.vrmse}});
  metrics["per_load"] = per_load;
  metrics["reaction_rel_errors"] = rep.reaction_rel_errors;
  double worst_reaction = 0.0;
  for (double r : rep.reaction_rel_errors) worst_reaction = std::max(worst_reaction, r);
  metrics["max_reaction_rel_error"] = worst_reaction;
  metrics["setup"] = a.setup;
  metrics["material"] = a.material;
  metrics["model"] = a.model;
  write_file(fs::path(a.out) / "metrics.json", metrics.dump(2) + "\n");

  std::string mcsv = "scope,load,rmse,variance,vrmse\n";
  mcsv += "pooled,," + num(rep.rmse) + "," + num(rep.variance) + "," + num(rep.vrmse) + "\n";
  for (const auto& m : rep.per_load)
    mcsv += "load," + num(m.load) + "," + num(m.rmse) + "," + num(m.variance) + "," +
            num(m.vrmse) + "\n";
  write_file(fs::path(a.out) / "metrics.csv", mcsv);

  std::string rcsv = "setup,load,tag,predicted,reference\n";
  for (const auto& r : reactions)
    rcsv += std::to_string(a.setup) + "," + num(r.load) + "," + r.tag + "," + num(r.predicted) +
            "," + num(r.reference) + "\n";
  write_file(fs::path(a.out) / "reactions.csv", rcsv);
  write_file(fs::path(a.out) / "point_errors.csv", "load,error\n" + point_rows);
  for (const Vec3& s : cloud.samples)
    stretch_rows += num(s[0]) + "," + num(s[1]) + "," + num(s[2]) + "\n";
  write_file(fs::path(a.out) / "stretches.csv", "lambda1,lambda2,lambda3\n" + stretch_rows);
  write_file(fs::path(a.out) / "config.ini", cfg.str());
  std::cout << "evaluate setup=" << a.setup << " material=" << a.material
            << " vrmse=" << num(rep.vrmse) << " rmse=" << num(rep.rmse)
            << " max_reaction_rel_error=" << num(worst_reaction) << " out=" << a.out << "\n";
}

// ---------------------------------------------------------------------------
// analyze stretches | sinkhorn | export
// ---------------------------------------------------------------------------

void run_analyze_stretches(const RunConfig& cfg, const std::string& run) {
  const fs::path src = fs::path(run) / "sim.txt";
  if (!fs::exists(src))
    throw MissingArtifacts("sim.txt not found in " + run + " (run `simulate` first)");
  const SyntheticDataset ds = load_dataset(src.string());
  const ConstitutiveModel truth = analytic_by_name(ds.ground_truth);
  StretchCloud cloud;
  for (const auto& e : ds.experiments) {
    const FeSpace sp = make_space(e.mesh, e.bc);
    const EquilibriumSolution sol = continuation_solve(sp, truth, e.load_value, e.n_steps);
    append_stretches(sp, full_displacement(sp, sol.dof_vector, e.load_value), cloud);
  }
  std::string rows = "lambda1,lambda2,lambda3\n";
  for (const Vec3& s : cloud.samples)
    rows += num(s[0]) + "," + num(s[1]) + "," + num(s[2]) + "\n";
  write_file(fs::path(run) / "stretches.csv", rows);
  write_file(fs::path(run) / "analyze_stretches_config.ini", cfg.str());
  std::cout << "stretches samples=" << cloud.samples.size() << " dim=" << cloud.dim
            << " out=" << (fs::path(run) / "stretches.csv").string() << "\n";
}

struct SinkhornArgs {
  std::string run;
  std::string ref;
  double epsilon = 0.0;  // 0: scaled from the pooled cloud
  double tol = 1e-4;
  int max_iters = 5000;
  int cap = 5000;
  std::uint64_t seed = 0;
};

void run_analyze_sinkhorn(const RunConfig& cfg, const SinkhornArgs& a) {
  if (a.epsilon < 0.0) throw Error("--epsilon must be nonnegative");
  if (a.tol <= 0.0) throw Error("--tol must be positive");
  if (a.max_iters < 1) throw Error("--max-iters must be at least 1");
  if (a.cap < 1) throw Error("--cap must be at least 1");
  const StretchCloud A = read_stretch_csv(a.run);
  const StretchCloud B = read_stretch_csv(a.ref);
  SinkhornOptions so;
  so.epsilon = a.epsilon;
  so.tol = a.tol;
  so.max_iters = a.max_iters;
  so.subsample_cap = a.cap;
  so.seed = a.seed;
  const double div = sinkhorn_divergence(A, B, so);
  json out;
  out["run"] = a.run;
  out["ref"] = a.ref;
  out["divergence"] = div;
  out["samples_run"] = A.samples.size();
  out["samples_ref"] = B.samples.size();
  out["epsilon"] = a.epsilon;
  out["tol"] = a.tol;
  out["subsample_cap"] = a.cap;
  out["seed"] = a.seed;
  write_file(fs::path(a.run) / "sinkhorn.json", out.dump(2) + "\n");
  write_file(fs::path(a.run) / "analyze_sinkhorn_config.ini", cfg.str());
  std::cout << "sinkhorn divergence=" << num(div) << " run=" << a.run << " ref=" << a.ref
            << " out=" << (fs::path(a.run) / "sinkhorn.json").string() << "\n";
}

void run_analyze_export(const std::string& run) {
  export_plot_data(run);
  std::cout << "export out=" << run
            << " files=plot_load_reaction.csv,plot_load_reaction.svg,plot_error_box.csv,"
               "plot_stretch_samples.csv,plot_stretch_reference.csv,plot_stretch_scatter.svg\n";
}

// ---------------------------------------------------------------------------
// verify properties
// ---------------------------------------------------------------------------

struct Checker {
  int failures = 0;
  void operator()(const std::string& suite, const std::string& name, bool ok,
                  const std::string& value) {
    std::cout << "check=" << name << " suite=" << suite
              << " status=" << (ok ? "ok" : "fail");
    if (!value.empty()) std::cout << " value=" << value;
    std::cout << "\n";
    if (!ok) ++failures;
  }
};

Mat3 random_matrix(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = n(rng);
  return m;
}

Mat3 random_deformation(std::mt19937_64& rng, double spread) {
  for (;;) {
    const Mat3 f = Mat3::Identity() + random_matrix(rng, spread);
    if (f.determinant() > 0.2) return f;
  }
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  if (axis.norm() < 1e-8) axis = Vec3(1, 0, 0);
  std::uniform_real_distribution<double> angle(0.1, 3.0);
  return Eigen::AngleAxisd(angle(rng), axis.normalized()).toRotationMatrix();
}

std::vector<HnnArchitecture> sample_architectures() {
  return {{1, 5, false, false, 10.0, 0.1},
          {2, 4, true, false, 1.0, 0.5},
          {3, 3, true, true, 0.1, 1.0},
          {1, 8, false, true, 5.0, 0.3}};
}

double energy_of(const ConstitutiveModel& m, const Mat3& F) {
  const DeformationState st = invariants(F);
  return m.energy(st.I1, st.I2, st.J).W;
}

void suite_constitutive(Checker& check) {
  std::mt19937_64 rng(20260822);

  double worst_w = 0.0, worst_p = 0.0;
  std::vector<ConstitutiveModel> models;
  for (const auto& arch : sample_architectures())
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      const ConstitutiveModel m = ConstitutiveModel::make_neural(arch, hnn_init(arch, seed));
      const DeformationState st = invariants(Mat3::Identity());
      const double scale = std::max(1.0, arch.w_scale);
      worst_w = std::max(worst_w, std::abs(m.energy(st.I1, st.I2, st.J).W) / scale);
      worst_p = std::max(worst_p, m.stress(st).norm() / scale);
      models.push_back(m);
    }
  check("constitutive", "reference_energy_zero", worst_w < 1e-10, num(worst_w));
  check("constitutive", "reference_stress_zero", worst_p < 1e-8, num(worst_p));

  double worst_inv = 0.0;
  for (int i = 0; i < 50; ++i) {
    const ConstitutiveModel& m = models[static_cast<std::size_t>(i) % models.size()];
    const Mat3 F = random_deformation(rng, 0.4);
    const Mat3 Q = random_rotation(rng);
    const double w = energy_of(m, F);
    const double denom = std::max(1.0, std::abs(w));
    worst_inv = std::max(worst_inv, std::abs(energy_of(m, Q * F) - w) / denom);
    worst_inv = std::max(worst_inv, std::abs(energy_of(m, F * Q) - w) / denom);
  }
  check("constitutive", "frame_and_isotropy_invariance", worst_inv < 1e-10, num(worst_inv));

  // Midpoint convexity in the (F, cof F, J) arguments: evaluate the energy on
  // independent argument triples and on their componentwise midpoint.
  double worst_gap = -1e300;
  std::uniform_real_distribution<double> jdist(0.3, 2.0);
  for (int i = 0; i < 300; ++i) {
    const ConstitutiveModel& m = models[static_cast<std::size_t>(i) % models.size()];
    const Mat3 Fa = random_deformation(rng, 0.5), Fb = random_deformation(rng, 0.5);
    const Mat3 Ha = random_matrix(rng, 0.6), Hb = random_matrix(rng, 0.6);
    const double Ja = jdist(rng), Jb = jdist(rng);
    const Mat3 Fm = 0.5 * (Fa + Fb), Hm = 0.5 * (Ha + Hb);
    const double wa = m.energy(Fa.squaredNorm(), Ha.squaredNorm(), Ja).W;
    const double wb = m.energy(Fb.squaredNorm(), Hb.squaredNorm(), Jb).W;
    const double wm = m.energy(Fm.squaredNorm(), Hm.squaredNorm(), 0.5 * (Ja + Jb)).W;
    const double scale = std::max(1.0, std::max(std::abs(wa), std::abs(wb)));
    worst_gap = std::max(worst_gap, (wm - 0.5 * (wa + wb)) / scale);
  }
  check("constitutive", "midpoint_polyconvexity", worst_gap <= 1e-10, num(worst_gap));

  bool coercive = true;
  double least_growth = 1e300;
  for (const auto& arch : sample_architectures()) {
    const ConstitutiveModel m = ConstitutiveModel::make_neural(arch, hnn_init(arch, 1));
    auto at = [&](double j) {
      Mat3 F = Mat3::Identity();
      F(2, 2) = j;
      return energy_of(m, F);
    };
    const double w2 = at(1e-2), w4 = at(1e-4), w6 = at(1e-6), w8 = at(1e-8);
    coercive = coercive && w4 > w2 && w6 > w4 && w8 > w6;
    least_growth = std::min(least_growth, w8 - w2);
  }
  check("constitutive", "volumetric_coercivity", coercive && least_growth > 1.0,
        num(least_growth));
}

Mesh boundary_tagged_square(int n) {
  Mesh m = structured_triangles(Vec3(0, 0, 0), Vec3(1, 1, 0), n, n);
  meshdetail::extract_boundary(m,
                               {meshdetail::plane_rule("left", 0, 0.0),
                                meshdetail::plane_rule("right", 0, 1.0),
                                meshdetail::plane_rule("down", 1, 0.0),
                                meshdetail::plane_rule("up", 1, 1.0)},
                               "side");
  return m;
}

void suite_fem(Checker& check) {
  const ConstitutiveModel mr = analytic_by_name("mr");

  Mat3 M = Mat3::Zero();
  M(0, 0) = 0.12;
  M(0, 1) = 0.05;
  M(1, 0) = -0.03;
  M(1, 1) = 0.08;
  const Mesh patch = boundary_tagged_square(4);
  BcProgram affine;
  for (const char* tag : {"left", "right", "down", "up"})
    affine[tag] = BoundaryCondition::dirichlet(Vec3::Zero(), M);
  const FeSpace sp = make_space(patch, affine);
  const EquilibriumSolution sol = newton_solve(sp, mr, 1.0);
  double patch_err = 0.0;
  for (int k = 0; k < sp.n_free; ++k) {
    const int d = sp.free_dofs[static_cast<std::size_t>(k)];
    const Vec3 X = patch.nodes[static_cast<std::size_t>(d / 2)];
    patch_err = std::max(patch_err, std::abs(sol.dof_vector[k] - (M * X)[d % 2]));
  }
  check("fem", "affine_patch_exact", sol.converged && patch_err < 1e-10, num(patch_err));

  // With a uniform deformation gradient the reaction on a face must equal the
  // normal stress component times the undeformed face area.
  const Mat3 F = Mat3::Identity() + M;
  const double expected = mr.stress(invariants(F))(0, 0);
  const double got = reaction_force(sp, mr, sol.dof_vector, 1.0, "right");
  const double rel = std::abs(got - expected) / std::max(1e-300, std::abs(expected));
  check("fem", "reaction_traction_consistency", sol.converged && rel < 1e-8, num(rel));

  BcProgram stretch;
  stretch["left"] = BoundaryCondition::dirichlet_normal(0.0);
  stretch["down"] = BoundaryCondition::dirichlet_normal(0.0);
  stretch["right"] = BoundaryCondition::dirichlet_normal(0.35);
  stretch["up"] = BoundaryCondition::free_face();
  const Mesh m2 = boundary_tagged_square(6);
  const FeSpace sp2 = make_space(m2, stretch);
  NewtonOptions tight;
  tight.abs_tol = 1e-13;
  tight.rel_tol = 1e-13;
  const EquilibriumSolution sol2 = newton_solve(sp2, mr, 1.0, nullptr, tight);
  // Convergence exponent: best consecutive-triple estimate above the roundoff
  // floor (the final iterate may undershoot the tolerance and flatten).
  double q = 0.0;
  const auto& hist = sol2.residual_history;
  if (sol2.converged && hist.size() >= 3) {
    const double floor_r = hist[0] * 1e-13;
    for (std::size_t i = 2; i < hist.size(); ++i) {
      if (hist[i] <= floor_r) continue;
      const double bottom = std::log(hist[i - 1] / hist[i - 2]);
      const double top = std::log(hist[i] / hist[i - 1]);
      if (bottom < 0.0 && top < 0.0) q = std::max(q, top / bottom);
    }
  }
  check("fem", "newton_superlinear_tail", sol2.converged && q > 1.5, num(q));
}

ExperimentInstance stretch_experiment(double load) {
  ExperimentInstance e;
  e.setup_id = 1;
  e.h = 0.25;
  e.load_value = load;
  e.n_steps = 2;
  e.mesh = boundary_tagged_square(4);
  e.bc["left"] = BoundaryCondition::dirichlet_normal(0.0);
  e.bc["down"] = BoundaryCondition::dirichlet_normal(0.0);
  e.bc["right"] = BoundaryCondition::dirichlet_normal(1.0);
  e.bc["up"] = BoundaryCondition::free_face();
  e.reaction_tags = {"right"};
  return e;
}

void suite_adjoint(Checker& check) {
  std::mt19937_64 rng(777);

  std::vector<ConstitutiveModel> models;
  models.push_back(analytic_by_name("nh"));
  models.push_back(analytic_by_name("mr"));
  for (const auto& arch : sample_architectures())
    models.push_back(ConstitutiveModel::make_neural(arch, hnn_init(arch, 1)));

  double worst_tan = 0.0;
  const double h = 1e-6;
  for (const auto& m : models) {
    const Mat3 F = random_deformation(rng, 0.35);
    const DeformationState st = invariants(F);
    const Tangent tan = material_tangent(m.energy(st.I1, st.I2, st.J), st);
    for (int dir = 0; dir < 4; ++dir) {
      const Mat3 V = random_matrix(rng, 1.0);
      const Mat3 dP_fd =
          (m.stress(invariants(F + h * V)) - m.stress(invariants(F - h * V))) / (2.0 * h);
      Mat3 dP = Mat3::Zero();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) dP(i, j) += tan(i, j, k, l) * V(k, l);
      worst_tan = std::max(worst_tan, (dP - dP_fd).norm() / std::max(1e-12, dP_fd.norm()));
    }
  }
  check("adjoint", "material_tangent_fd", worst_tan < 1e-5, num(worst_tan));

  double worst_jac = 0.0;
  for (const auto& arch : sample_architectures()) {
    ConstitutiveModel m = ConstitutiveModel::make_neural(arch, hnn_init(arch, 2));
    const Mat3 F = random_deformation(rng, 0.3);
    const DeformationState st = invariants(F);
    const std::vector<Mat3> jac = stress_param_jacobian(m, st);
    // Errors are judged against the stress scale so that parameters with a
    // vanishing influence do not amplify finite-difference roundoff.
    const double stress_scale = std::max(1e-2, m.stress(st).norm());
    std::uniform_int_distribution<int> pick(0, static_cast<int>(jac.size()) - 1);
    for (int t = 0; t < 5; ++t) {
      const int p = pick(rng);
      ConstitutiveModel up = m, dn = m;
      up.params.raw[p] += h;
      dn.params.raw[p] -= h;
      const Mat3 fd = (up.stress(st) - dn.stress(st)) / (2.0 * h);
      const double denom = std::max(stress_scale, fd.norm());
      worst_jac = std::max(worst_jac, (jac[p] - fd).norm() / denom);
    }
  }
  check("adjoint", "stress_parameter_jacobian_fd", worst_jac < 1e-5, num(worst_jac));

  SetupBuild build;
  build.setup_id = 1;
  build.experiments = {stretch_experiment(0.2), stretch_experiment(0.3)};
  const SyntheticDataset ds =
      generate_synthetic(build, analytic_by_name("nh"), ObservationMask::FullField, 0.0, 0);
  const DiscoveryProblem prob = make_problem(ds.experiments, ds.observations);
  const HnnArchitecture arch{1, 4, false, false, 1.0, 0.4};
  const ConstitutiveModel model = ConstitutiveModel::make_neural(arch, hnn_init(arch, 5));
  const LossOutcome base = evaluate_loss(model, prob, WarmStarts{});
  if (std::holds_alternative<SolveFailure>(base)) {
    check("adjoint", "discovery_gradient_fd", false,
          "equilibrium_failed_experiment_" +
              std::to_string(std::get<SolveFailure>(base).experiment));
    return;
  }
  const EvalSuccess& ok = std::get<EvalSuccess>(base);
  const VecX grad = adjoint_gradient(model, prob, ok.warm);
  double worst_g = 0.0;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 3; ++t) {
    VecX v(grad.size());
    for (int i = 0; i < v.size(); ++i) v[i] = unit(rng);
    v /= v.norm();
    const double step = 1e-5;
    ConstitutiveModel up = model, dn = model;
    up.params.raw += step * v;
    dn.params.raw -= step * v;
    const LossOutcome lu = evaluate_loss(up, prob, ok.warm);
    const LossOutcome ld = evaluate_loss(dn, prob, ok.warm);
    if (std::holds_alternative<SolveFailure>(lu) || std::holds_alternative<SolveFailure>(ld)) {
      check("adjoint", "discovery_gradient_fd", false, "perturbed_equilibrium_failed");
      return;
    }
    const double fd = (std::get<EvalSuccess>(lu).loss.total -
                       std::get<EvalSuccess>(ld).loss.total) /
                      (2.0 * step);
    const double dir = grad.dot(v);
    worst_g = std::max(worst_g, std::abs(fd - dir) / std::max(1e-12, std::abs(fd)));
  }
  check("adjoint", "discovery_gradient_fd", worst_g < 1e-5, num(worst_g));
}

int run_verify(const std::string& suite) {
  if (suite != "constitutive" && suite != "fem" && suite != "adjoint" && suite != "all")
    throw Error("--suite must be one of: constitutive, fem, adjoint, all");
  Checker check;
  if (suite == "constitutive" || suite == "all") suite_constitutive(check);
  if (suite == "fem" || suite == "all") suite_fem(check);
  if (suite == "adjoint" || suite == "all") suite_adjoint(check);
  std::cout << "verify suite=" << suite << " failures=" << check.failures << "\n";
  return check.failures;
}

}  // namespace

// ---------------------------------------------------------------------------
// Option wiring.
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"Hyperelastic constitutive discovery pipeline"};
  app.require_subcommand(1);
  // Long-form help only: the short -h would collide with the mesh-spacing
  // option --h on several subcommands.
  app.set_help_flag("--help", "Print help");
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (runs are sequential; kept at 1)")
      ->envname("HYPERFIT_THREADS")
      ->check(CLI::PositiveNumber);

  int property_failures = 0;

  // mesh gen
  CLI::App* mesh_cmd = app.add_subcommand("mesh", "Mesh utilities")->require_subcommand(1);
  mesh_cmd->set_help_flag("--help", "Print help");
  CLI::App* gen = mesh_cmd->add_subcommand("gen", "Generate a specimen mesh");
  gen->set_help_flag("--help", "Print help");
  MeshGenArgs mg;
  RunConfig mg_cfg;
  mg_cfg.bind(gen->add_option("--setup", mg.setup, "Specimen family (1-3 planar, 4-6 solid)")
                  ->check(CLI::Range(1, 6)),
              "setup", mg.setup, true);
  mg_cfg.bind(gen->add_option("--h", mg.h, "Target mesh spacing (0: preset for the scale)"),
              "h", mg.h);
  mg_cfg.bind(gen->add_option("--seed", mg.seed, "Geometry randomization seed"), "seed",
              mg.seed);
  mg_cfg.bind(gen->add_flag("--full-scale", mg.full_scale, "Full-resolution preset spacing"),
              "full-scale", mg.full_scale);
  mg_cfg.bind(gen->add_option("--out", mg.out, "Output mesh file"), "out", mg.out, true);
  mg_cfg.attach(gen);
  gen->callback([&] {
    mg_cfg.resolve();
    run_mesh_gen(mg_cfg, mg);
  });

  // simulate
  CLI::App* sim = app.add_subcommand("simulate", "Solve a setup with an analytic ground truth");
  sim->set_help_flag("--help", "Print help");
  SimulateArgs sa;
  RunConfig sa_cfg;
  sa_cfg.bind(sim->add_option("--setup", sa.setup, "Specimen family")->check(CLI::Range(1, 6)),
              "setup", sa.setup, true);
  sa_cfg.bind(sim->add_option("--material", sa.material, "Ground truth: nh, mr, ih, fu")
                  ->check(CLI::IsMember({"nh", "mr", "ih", "fu"})),
              "material", sa.material, true);
  sa_cfg.bind(sim->add_option("--h", sa.h, "Mesh spacing override (0: preset)"), "h", sa.h);
  sa_cfg.bind(sim->add_option("--seed", sa.seed, "Geometry randomization seed"), "seed",
              sa.seed);
  sa_cfg.bind(sim->add_flag("--full-scale", sa.full_scale, "Full-resolution preset spacing"),
              "full-scale", sa.full_scale);
  sa_cfg.bind(sim->add_option("--out", sa.out, "Output directory"), "out", sa.out, true);
  sa_cfg.attach(sim);
  sim->callback([&] {
    sa_cfg.resolve();
    run_simulate(sa_cfg, sa);
  });

  // dataset make
  CLI::App* data_cmd = app.add_subcommand("dataset", "Dataset utilities")->require_subcommand(1);
  data_cmd->set_help_flag("--help", "Print help");
  CLI::App* dmake = data_cmd->add_subcommand("make", "Derive observations from a simulation");
  dmake->set_help_flag("--help", "Print help");
  DatasetArgs da;
  RunConfig da_cfg;
  da_cfg.bind(dmake->add_option("--from", da.from, "Simulation directory (holds sim.txt)"),
              "from", da.from, true);
  da_cfg.bind(dmake->add_option("--mask", da.mask, "Observation mask: full or boundary")
                  ->check(CLI::IsMember({"full", "boundary"})),
              "mask", da.mask, true);
  da_cfg.bind(dmake->add_option("--noise", da.noise, "Gaussian noise stddev on displacements")
                  ->check(CLI::NonNegativeNumber),
              "noise", da.noise, true);
  da_cfg.bind(dmake->add_option("--seed", da.seed, "Noise seed"), "seed", da.seed);
  da_cfg.bind(dmake->add_option("--out", da.out,
                                "Output dataset file (default: alongside the simulation)"),
              "out", da.out);
  da_cfg.attach(dmake);
  dmake->callback([&] {
    da_cfg.resolve();
    run_dataset_make(da_cfg, da);
  });

  // train
  CLI::App* tr = app.add_subcommand("train", "Fit a constitutive model to a dataset");
  tr->set_help_flag("--help", "Print help");
  TrainArgs ta;
  RunConfig ta_cfg;
  ta_cfg.bind(tr->add_option("--dataset", ta.dataset, "Dataset file"), "dataset", ta.dataset,
              true);
  CLI::Option* t_arch = tr->add_option(
      "--arch-file", ta.arch_file,
      "JSON architecture spec: {\"kind\":\"hnn\",...}, {\"kind\":\"tuned\",\"dim\":2,"
      "\"material\":\"mr\"} or {\"kind\":\"nh|mr|ih|fu\"}");
  CLI::Option* t_grid = tr->add_option("--grid", ta.grid, "Architecture grid: full or desk")
                            ->check(CLI::IsMember({"full", "desk"}));
  t_arch->excludes(t_grid);
  ta_cfg.bind(t_arch, "arch-file", ta.arch_file);
  ta_cfg.bind(t_grid, "grid", ta.grid);
  ta_cfg.bind(tr->add_option("--seeds", ta.seeds, "Restarts per architecture")
                  ->check(CLI::PositiveNumber),
              "seeds", ta.seeds);
  ta_cfg.bind(tr->add_option("--seed", ta.seed0, "First restart seed"), "seed", ta.seed0);
  ta_cfg.bind(tr->add_option("--max-epochs", ta.max_epochs, "Optimization epoch cap")
                  ->check(CLI::PositiveNumber),
              "max-epochs", ta.max_epochs);
  ta_cfg.bind(tr->add_option("--checkpoint-every", ta.checkpoint_every,
                             "Epochs between checkpoints"),
              "checkpoint-every", ta.checkpoint_every);
  ta_cfg.bind(tr->add_option("--out", ta.out, "Run directory"), "out", ta.out, true);
  ta_cfg.attach(tr);
  tr->callback([&] {
    ta_cfg.resolve();
    run_train(ta_cfg, ta);
  });

  // evaluate
  CLI::App* ev = app.add_subcommand("evaluate", "Score a trained model against a ground truth");
  ev->set_help_flag("--help", "Print help");
  EvaluateArgs ea;
  RunConfig ea_cfg;
  ea_cfg.bind(ev->add_option("--model", ea.model, "Model checkpoint file"), "model", ea.model,
              true);
  ea_cfg.bind(ev->add_option("--setup", ea.setup, "Specimen family to evaluate on")
                  ->check(CLI::Range(1, 6)),
              "setup", ea.setup, true);
  ea_cfg.bind(ev->add_option("--material", ea.material, "Reference ground-truth family")
                  ->check(CLI::IsMember({"nh", "mr", "ih", "fu"})),
              "material", ea.material, true);
  ea_cfg.bind(ev->add_option("--h", ea.h, "Mesh spacing override (0: preset)"), "h", ea.h);
  ea_cfg.bind(ev->add_option("--seed", ea.seed, "Geometry randomization seed"), "seed",
              ea.seed);
  ea_cfg.bind(ev->add_flag("--full-scale", ea.full_scale, "Full-resolution preset spacing"),
              "full-scale", ea.full_scale);
  ea_cfg.bind(ev->add_option("--out", ea.out, "Run directory"), "out", ea.out, true);
  ea_cfg.attach(ev);
  ev->callback([&] {
    ea_cfg.resolve();
    run_evaluate(ea_cfg, ea);
  });

  // analyze
  CLI::App* an = app.add_subcommand("analyze", "Post-hoc analysis")->require_subcommand(1);
  an->set_help_flag("--help", "Print help");
  CLI::App* astr = an->add_subcommand("stretches", "Principal stretch cloud of a simulation");
  astr->set_help_flag("--help", "Print help");
  std::string stretch_run;
  RunConfig astr_cfg;
  astr_cfg.bind(astr->add_option("--run", stretch_run, "Simulation directory"), "run",
                stretch_run, true);
  astr_cfg.attach(astr);
  astr->callback([&] {
    astr_cfg.resolve();
    run_analyze_stretches(astr_cfg, stretch_run);
  });

  CLI::App* asink = an->add_subcommand("sinkhorn", "Stretch-cloud divergence between two runs");
  asink->set_help_flag("--help", "Print help");
  SinkhornArgs ka;
  RunConfig ka_cfg;
  ka_cfg.bind(asink->add_option("--run", ka.run,
                                "Directory holding stretches.csv; receives sinkhorn.json"),
              "run", ka.run, true);
  ka_cfg.bind(asink->add_option("--ref", ka.ref, "Directory with the reference stretches.csv"),
              "ref", ka.ref, true);
  ka_cfg.bind(asink->add_option("--epsilon", ka.epsilon,
                                "Entropic regularization (0: auto-scaled)"),
              "epsilon", ka.epsilon);
  ka_cfg.bind(asink->add_option("--tol", ka.tol, "Marginal L1 tolerance"), "tol", ka.tol);
  ka_cfg.bind(asink->add_option("--max-iters", ka.max_iters, "Iteration cap"), "max-iters",
              ka.max_iters);
  ka_cfg.bind(asink->add_option("--cap", ka.cap, "Subsample cap per cloud"), "cap", ka.cap);
  ka_cfg.bind(asink->add_option("--seed", ka.seed, "Subsampling seed"), "seed", ka.seed);
  ka_cfg.attach(asink);
  asink->callback([&] {
    ka_cfg.resolve();
    run_analyze_sinkhorn(ka_cfg, ka);
  });

  CLI::App* aexp = an->add_subcommand("export", "Plot-ready tables and SVG previews");
  aexp->set_help_flag("--help", "Print help");
  std::string export_run;
  aexp->add_option("--run", export_run, "Run directory with evaluation artifacts")->required();
  aexp->callback([&] { run_analyze_export(export_run); });

  // verify properties
  CLI::App* vf =
      app.add_subcommand("verify", "Programmatic invariant checks")->require_subcommand(1);
  vf->set_help_flag("--help", "Print help");
  CLI::App* vp = vf->add_subcommand("properties", "Run an invariant suite");
  vp->set_help_flag("--help", "Print help");
  std::string suite = "all";
  vp->add_option("--suite", suite, "constitutive, fem, adjoint or all")
      ->check(CLI::IsMember({"constitutive", "fem", "adjoint", "all"}));
  vp->callback([&] { property_failures = run_verify(suite); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << "error category=config message=" << one_line(e.what()) << "\n";
    return 2;
  } catch (const MalformedMeshFile& e) {
    std::cerr << "error category=data message=" << one_line(e.what()) << "\n";
    return 4;
  } catch (const MalformedCheckpoint& e) {
    std::cerr << "error category=data message=" << one_line(e.what()) << "\n";
    return 4;
  } catch (const MalformedDataset& e) {
    std::cerr << "error category=data message=" << one_line(e.what()) << "\n";
    return 4;
  } catch (const MissingArtifacts& e) {
    std::cerr << "error category=data message=" << one_line(e.what()) << "\n";
    return 4;
  } catch (const DegenerateVariance& e) {
    std::cerr << "error category=data message=" << one_line(e.what()) << "\n";
    return 4;
  } catch (const ContinuationFailure& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const LinearSolveFailure& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const ElementInversion& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const NonPositiveJacobian& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const GeometryInfeasible& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const TrainingStalled& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const SinkhornNoConvergence& e) {
    std::cerr << "error category=solver message=" << one_line(e.what()) << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error category=config message=" << one_line(e.what()) << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error category=config message=" << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error category=internal message=" << one_line(e.what()) << "\n";
    return 3;
  }
  return property_failures > 0 ? 5 : 0;
}
