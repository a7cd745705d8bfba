// End-to-end checks of the command-line pipeline. Every subcommand is driven
// through the real binary; exit codes and on-disk artifacts are asserted.
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hyperfit/mesh.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HYPERFIT_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Builds the shared pipeline artifacts once; cases assert on the recorded
/// exit codes and the files left behind.
struct Pipeline {
  fs::path root;
  int rc_mesh, rc_sim, rc_dsA, rc_dsB, rc_dsC, rc_dsD;
  int rc_train1, rc_train2, rc_trainA, rc_eval, rc_stretch, rc_sink, rc_export;

  Pipeline() {
    root = fs::current_path() / "cli_scratch";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string R = root.string();
    rc_mesh = run_cli("mesh gen --setup 1 --h 0.3 --seed 0 --out " + R + "/mesh1.txt");
    rc_sim = run_cli("simulate --setup 1 --material mr --h 0.3 --out " + R + "/sim");
    const std::string make = "dataset make --from " + R + "/sim --mask boundary --noise 1e-3";
    rc_dsA = run_cli(make + " --seed 7 --out " + R + "/dsA/train.txt");
    rc_dsB = run_cli(make + " --seed 7 --out " + R + "/dsB/train.txt");
    rc_dsC = run_cli("dataset make --config " + R + "/dsA/train.config.ini --out " + R +
                     "/dsC/train.txt");
    rc_dsD = run_cli("dataset make --config " + R + "/dsA/train.config.ini --noise 5e-3 --out " +
                     R + "/dsD/train.txt");
    spit(root / "arch_h.json",
         R"({"kind":"hnn","layers":1,"width":3,"w_scale":10.0,"sigma_init":0.1})");
    spit(root / "arch_mr.json", R"({"kind":"mr"})");
    const std::string fit = "train --dataset " + R + "/dsA/train.txt --arch-file " + R;
    rc_train1 = run_cli(fit + "/arch_h.json --seeds 1 --max-epochs 20 --out " + R + "/t1");
    rc_train2 = run_cli(fit + "/arch_h.json --seeds 1 --max-epochs 20 --out " + R + "/t2");
    rc_trainA = run_cli(fit + "/arch_mr.json --max-epochs 60 --out " + R + "/fitA");
    rc_eval = run_cli("evaluate --model " + R + "/fitA/model.json --setup 1 --material mr" +
                      " --h 0.3 --out " + R + "/ev");
    rc_stretch = run_cli("analyze stretches --run " + R + "/sim");
    rc_sink = run_cli("analyze sinkhorn --run " + R + "/ev --ref " + R + "/sim");
    rc_export = run_cli("analyze export --run " + R + "/ev");
  }
};

const Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("mesh gen produces a loadable mesh and a config snapshot") {
  const Pipeline& p = pipeline();
  REQUIRE(p.rc_mesh == 0);
  const hyperfit::Mesh m = hyperfit::load_mesh((p.root / "mesh1.txt").string());
  CHECK(m.dim == 2);
  CHECK(m.n_nodes() > 0);
  CHECK(m.n_cells() > 0);
  const std::string snap = slurp(p.root / "mesh1.config.ini");
  CHECK(snap.find("setup=1") != std::string::npos);
  CHECK(snap.find("h=0.3") != std::string::npos);
  CHECK(run_cli("mesh gen --setup 9 --out " + (p.root / "bad.txt").string()) == 2);
}

TEST_CASE("dataset generation is deterministic and reruns bitwise from its snapshot") {
  const Pipeline& p = pipeline();
  REQUIRE(p.rc_sim == 0);
  REQUIRE(p.rc_dsA == 0);
  REQUIRE(p.rc_dsB == 0);
  REQUIRE(p.rc_dsC == 0);
  REQUIRE(p.rc_dsD == 0);
  const std::string a = slurp(p.root / "dsA/train.txt");
  CHECK(a == slurp(p.root / "dsB/train.txt"));  // same flags, same bytes
  CHECK(a == slurp(p.root / "dsC/train.txt"));  // config snapshot rerun
  CHECK(a != slurp(p.root / "dsD/train.txt"));  // flag overrides the file
  const std::string snapD = slurp(p.root / "dsD/train.config.ini");
  CHECK(snapD.find("noise=0.005") != std::string::npos);
}

TEST_CASE("training repeats bit-identically and writes run artifacts") {
  const Pipeline& p = pipeline();
  REQUIRE(p.rc_train1 == 0);
  REQUIRE(p.rc_train2 == 0);
  const json s1 = json::parse(slurp(p.root / "t1/summary.json"));
  const json s2 = json::parse(slurp(p.root / "t2/summary.json"));
  const double l1 = s1.at("final_loss").get<double>();
  const double l2 = s2.at("final_loss").get<double>();
  CHECK(l1 == l2);
  CHECK(std::isfinite(l1));
  CHECK(fs::exists(p.root / "t1/model.json"));
  CHECK(fs::exists(p.root / "t1/config.ini"));
  CHECK(fs::exists(p.root / "t1/seed1/epochs.csv"));
}

TEST_CASE("training requires exactly one fitting mode") {
  const Pipeline& p = pipeline();
  const std::string R = p.root.string();
  const std::string base = "train --dataset " + R + "/dsA/train.txt --out " + R + "/tbad";
  CHECK(run_cli(base) == 2);
  CHECK(run_cli(base + " --arch-file " + R + "/arch_h.json --grid desk") == 2);
}

TEST_CASE("evaluate writes metrics, reactions, point errors and stretches") {
  const Pipeline& p = pipeline();
  REQUIRE(p.rc_trainA == 0);
  REQUIRE(p.rc_eval == 0);
  const json metrics = json::parse(slurp(p.root / "ev/metrics.json"));
  const double vrmse = metrics.at("vrmse").get<double>();
  CHECK(std::isfinite(vrmse));
  CHECK(vrmse >= 0.0);
  CHECK(metrics.at("per_load").size() >= 1);
  CHECK(slurp(p.root / "ev/metrics.csv").rfind("scope,load", 0) == 0);
  CHECK(slurp(p.root / "ev/reactions.csv").rfind("setup,load,tag", 0) == 0);
  CHECK(slurp(p.root / "ev/point_errors.csv").rfind("load,error", 0) == 0);
  CHECK(slurp(p.root / "ev/stretches.csv").rfind("lambda1,lambda2,lambda3", 0) == 0);
  CHECK(fs::exists(p.root / "ev/config.ini"));
}

TEST_CASE("analysis commands produce stretch clouds, divergences and plot tables") {
  const Pipeline& p = pipeline();
  REQUIRE(p.rc_stretch == 0);
  REQUIRE(p.rc_sink == 0);
  REQUIRE(p.rc_export == 0);
  CHECK(slurp(p.root / "sim/stretches.csv").rfind("lambda1,lambda2,lambda3", 0) == 0);
  const json sink = json::parse(slurp(p.root / "ev/sinkhorn.json"));
  CHECK(sink.at("divergence").get<double>() >= 0.0);
  for (const char* f : {"plot_load_reaction.csv", "plot_load_reaction.svg", "plot_error_box.csv",
                        "plot_stretch_samples.csv", "plot_stretch_reference.csv",
                        "plot_stretch_scatter.svg"})
    CHECK(fs::exists(p.root / "ev" / f));
}

TEST_CASE("verify properties passes on a fresh build") {
  CHECK(run_cli("verify properties --suite all") == 0);
  CHECK(run_cli("verify properties --suite bogus") == 2);
}

TEST_CASE("failures map to the documented exit codes") {
  const Pipeline& p = pipeline();
  const std::string R = p.root.string();
  // Usage errors.
  CHECK(run_cli("dataset make --mask boundary --noise 0") == 2);
  spit(p.root / "bad.ini", "from=" + R + "/sim\nmask=boundary\nnoise=0\nbogus=1\n");
  CHECK(run_cli("dataset make --config " + R + "/bad.ini --out " + R + "/x/t.txt") == 2);
  // Data errors.
  fs::create_directories(p.root / "empty");
  CHECK(run_cli("dataset make --from " + R + "/empty --mask full --noise 0") == 4);
  CHECK(run_cli("evaluate --model " + R + "/absent.json --setup 1 --material mr --out " + R +
                "/x") == 4);
  spit(p.root / "junk.txt", "garbage\n");
  CHECK(run_cli("train --dataset " + R + "/junk.txt --grid desk --out " + R + "/x") == 4);
  CHECK(run_cli("analyze sinkhorn --run " + R + "/empty --ref " + R + "/sim") == 4);
  // Solver errors: an iteration cap too tight to reach the marginal tolerance.
  CHECK(run_cli("analyze sinkhorn --run " + R + "/ev --ref " + R + "/sim --max-iters 1") == 3);
}
