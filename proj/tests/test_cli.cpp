#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "cliplab/errors.hpp"
#include "cliplab/rng.hpp"

using namespace cliplab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cliplab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// Small synthetic problem shared by the train/eval tests.
std::vector<std::string> small_train(const fs::path& out, const std::string& epochs) {
  return {"train", "--n", "1400", "--n-train", "300", "--n-test", "1000", "--n-norm", "100", "--k", "2", "--d1",
          "6",     "--d2", "6",   "--dim",     "3",   "--batch-size", "100", "--epochs", epochs, "--seed", "4",
          "--out", out.string()};
}

void write_config(const fs::path& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(2); }

}  // namespace

TEST_CASE("gen writes the requested rows") {
  const auto dir = scratch("gen");
  auto r = run_cli({"gen", "--setting", "linear", "--n", "14000", "--d1", "20", "--d2", "20", "--k", "5", "--seed",
                    "1", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "a" / "X.csv") == 14001);
  CHECK(line_count(dir / "a" / "Y.csv") == 14001);
  const auto meta = nlohmann::json::parse(slurp(dir / "a" / "meta.json"));
  CHECK(meta["spec"]["k_star"] == 5);
  CHECK(meta["rows"] == 14000);

  REQUIRE(run_cli({"gen", "--n", "50", "--seed", "3", "--setting", "nonlinear", "--out", (dir / "b").string()})
              .code == 0);
  REQUIRE(run_cli({"gen", "--n", "50", "--seed", "3", "--setting", "nonlinear", "--out", (dir / "c").string()})
              .code == 0);
  CHECK(slurp(dir / "b" / "X.csv") == slurp(dir / "c" / "X.csv"));
  CHECK(slurp(dir / "b" / "Y.csv") == slurp(dir / "c" / "Y.csv"));

  REQUIRE(run_cli({"gen", "--n", "0", "--out", (dir / "empty").string()}).code == 0);
  CHECK(line_count(dir / "empty" / "X.csv") == 1);
  CHECK(slurp(dir / "empty" / "Y.csv").rfind("y1,y2,", 0) == 0);

  r = run_cli({"gen", "--k", "21", "--out", (dir / "bad").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(run_cli({"gen", "--setting", "circular"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("usage errors and help") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"gen", "--no-such-flag"}).code == 2);
  CHECK(run_cli({"gen", "--n", "many"}).code == 2);
  const auto help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("sweep") != std::string::npos);
}

TEST_CASE("untrained encoders sit at chance and alpha 1 is perfect") {
  const auto dir = scratch("untrained");
  const auto run = dir / "run";
  const auto t = run_cli(small_train(run, "0"));
  REQUIRE(t.code == 0);
  CHECK(fs::exists(run / "encoder_f.json"));
  CHECK(fs::exists(run / "temperature.json"));
  CHECK(line_count(run / "log.jsonl") == 0);

  auto e = run_cli({"eval", "--run", run.string()});
  REQUIRE(e.code == 0);
  const auto report = cli::read_report(run / "eval" / "report.json");
  CHECK(report["n_test"] == 1000);
  CHECK(report["alpha"].get<double>() == doctest::Approx(1e-3));
  CHECK(report["acc_out"].get<double>() <= 3.0 / 1000.0);
  CHECK(fs::exists(run / "eval" / "sim_pos.csv"));
  CHECK(fs::exists(run / "eval" / "norm_g.csv"));

  e = run_cli({"eval", "--run", run.string(), "--alpha", "1.0", "--out", (dir / "full").string()});
  REQUIRE(e.code == 0);
  const auto full = cli::read_report(dir / "full" / "report.json");
  CHECK(full["acc_out"] == 1.0);
  CHECK(full["acc_in"] == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("training is reproducible from its flags") {
  const auto dir = scratch("repro");
  REQUIRE(run_cli(small_train(dir / "a", "3")).code == 0);
  REQUIRE(run_cli(small_train(dir / "b", "3")).code == 0);
  CHECK(line_count(dir / "a" / "log.jsonl") == 3);
  CHECK(slurp(dir / "a" / "log.jsonl") == slurp(dir / "b" / "log.jsonl"));
  CHECK(slurp(dir / "a" / "encoder_g.json") == slurp(dir / "b" / "encoder_g.json"));

  // The resolved configuration written by the run is itself a valid input.
  const auto cfg = cli::load_run_config((dir / "a" / "config.json").string());
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.split.train == 300);
  REQUIRE(run_cli({"train", "--config", (dir / "a" / "config.json").string(), "--out", (dir / "c").string()}).code ==
          0);
  CHECK(slurp(dir / "a" / "log.jsonl") == slurp(dir / "c" / "log.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("train rejects bad configs and reports aborts") {
  const auto dir = scratch("train_errors");
  write_config(dir / "unknown.json", {{"train", {{"epochs", 1}, {"learnrate", 0.1}}}});
  auto r = run_cli({"train", "--config", (dir / "unknown.json").string(), "--out", (dir / "u").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("learnrate") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "u" / "log.jsonl"));

  write_config(dir / "top.json", {{"optimizer", "sgd"}});
  CHECK(run_cli({"train", "--config", (dir / "top.json").string()}).code == 2);
  CHECK(run_cli({"train", "--config", (dir / "missing.json").string()}).code == 2);
  CHECK(run_cli({"train", "--lr", "0", "--out", (dir / "z").string()}).code == 2);

  // Entries near the double range overflow the forward pass.
  const auto data = dir / "huge";
  fs::create_directories(data);
  {
    std::ofstream x(data / "X.csv");
    std::ofstream y(data / "Y.csv");
    x << "a,b\n";
    y << "c,d\n";
    Rng rng(1);
    for (int i = 0; i < 60; ++i) {
      x << rng.normal() * 1e300 << ',' << rng.normal() * 1e300 << '\n';
      y << rng.normal() * 1e300 << ',' << rng.normal() * 1e300 << '\n';
    }
  }
  r = run_cli({"train", "--data", data.string(), "--n-train", "40", "--n-test", "10", "--n-norm", "10",
               "--batch-size", "20", "--epochs", "2", "--out", (dir / "aborted").string()});
  CHECK(r.code == 3);
  CHECK(fs::exists(dir / "aborted" / "log.jsonl"));
  CHECK(fs::exists(dir / "aborted" / "config.json"));
  fs::remove_all(dir);
}

TEST_CASE("eval needs the run artifacts") {
  const auto dir = scratch("eval_missing");
  CHECK(run_cli({"eval", "--run", (dir / "nope").string()}).code == 2);
  REQUIRE(run_cli(small_train(dir / "run", "0")).code == 0);
  fs::remove(dir / "run" / "encoder_g.json");
  const auto r = run_cli({"eval", "--run", (dir / "run").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("encoder_g") != std::string::npos);
  CHECK(run_cli({"eval", "--run", (dir / "run").string(), "--x", (dir / "x.csv").string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("report schema version is checked") {
  const auto dir = scratch("schema");
  cli::EvalReport rep;
  rep.alpha = 0.5;
  rep.sim.pos = make_histogram({0.0, 1.0}, 2);
  rep.sim.neg = rep.sim.pos;
  rep.norm_f.histogram = rep.sim.pos;
  rep.norm_g.histogram = rep.sim.pos;
  cli::write_report(dir, rep);
  auto j = cli::read_report(dir / "report.json");
  CHECK(j["schema_version"] == cli::kReportSchemaVersion);
  CHECK(j["acc_in"].is_null());

  j["schema_version"] = 99;
  std::ofstream(dir / "future.json") << j.dump();
  CHECK_THROWS_AS(cli::read_report(dir / "future.json"), InputError);
  j.erase("schema_version");
  std::ofstream(dir / "none.json") << j.dump();
  CHECK_THROWS_AS(cli::read_report(dir / "none.json"), InputError);
  fs::remove_all(dir);
}

TEST_CASE("decomp-check") {
  auto r = run_cli({"decomp-check", "--size", "8", "--tau", "0.5", "--trials", "100"});
  CHECK(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["residual"].get<double>() <= 1e-10);
  CHECK(j["pass"] == true);
  for (const char* key : {"size", "tau", "mi", "kl1", "kl2"}) CHECK(j.contains(key));

  r = run_cli({"decomp-check", "--size", "1"});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["residual"] == 0.0);

  CHECK(run_cli({"decomp-check", "--tau", "0"}).code == 2);
  CHECK(run_cli({"decomp-check", "--tau", "-1"}).code == 2);
  CHECK(run_cli({"decomp-check", "--size", "0"}).code == 2);
}

TEST_CASE("id command") {
  const auto dir = scratch("id");
  Rng rng(7);
  {
    std::ofstream out(dir / "plane.csv");
    for (int i = 0; i < 1000; ++i) {
      const double a = rng.uniform();
      const double b = rng.uniform();
      // A flat square tilted inside ℝ⁴.
      out << a << ',' << b << ',' << a + b << ',' << a - 2 * b << '\n';
    }
  }
  auto r = run_cli({"id", "--input", (dir / "plane.csv").string(), "--k", "20"});
  REQUIRE(r.code == 0);
  const double id = nlohmann::json::parse(r.out)["value"].get<double>();
  CHECK(id > 1.8);
  CHECK(id < 2.2);

  CHECK(run_cli({"id", "--input", (dir / "plane.csv").string(), "--k", "1000"}).code == 2);
  CHECK(run_cli({"id", "--input", (dir / "plane.csv").string(), "--averaging", "median"}).code == 2);
  CHECK(run_cli({"id", "--input", (dir / "absent.csv").string()}).code == 2);

  {
    std::ofstream out(dir / "dup.csv");
    for (int i = 0; i < 40; ++i) out << i / 2 << ",0\n";
  }
  r = run_cli({"id", "--input", (dir / "dup.csv").string(), "--k", "5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("duplicate") != std::string::npos);
  CHECK(run_cli({"id", "--input", (dir / "dup.csv").string(), "--k", "5", "--jitter"}).code == 0);

  std::ofstream(dir / "broken.csv") << "1,2\n3,x\n";
  r = run_cli({"id", "--input", (dir / "broken.csv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find(":2:2") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep writes one row per cell with derived seeds") {
  const auto dir = scratch("sweep");
  cli::RunConfig cfg;
  cfg.data.n = 700;
  cfg.data.d1 = 6;
  cfg.data.d2 = 6;
  cfg.data.k_star = 2;
  cfg.split = {400, 200, 100, 3};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 100;
  cfg.train.hidden_widths = {8};
  cfg.train.id_estimate_every = 0;
  write_config(dir / "cfg.json", cfg);

  auto r = run_cli({"sweep", "--config", (dir / "cfg.json").string(), "--d-list", "3", "--repeats", "1",
                    "--base-seed", "10", "--out", (dir / "one").string()});
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "one" / "sweep.csv") == 2);
  CHECK(slurp(dir / "one" / "sweep.csv").find("\n3,0,3010,") != std::string::npos);
  CHECK(fs::exists(dir / "one" / "d3_r0" / "report.json"));

  r = run_cli({"sweep", "--config", (dir / "cfg.json").string(), "--d-list", "2,4", "--repeats", "2",
               "--base-seed", "10", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  r = run_cli({"sweep", "--config", (dir / "cfg.json").string(), "--d-list", "2,4", "--repeats", "2",
               "--base-seed", "10", "--jobs", "2", "--out", (dir / "b").string()});
  REQUIRE(r.code == 0);
  const auto csv = slurp(dir / "a" / "sweep.csv");
  CHECK(csv == slurp(dir / "b" / "sweep.csv"));
  CHECK(line_count(dir / "a" / "sweep.csv") == 5);
  CHECK(csv.rfind("d,repeat,seed,acc_in,acc_out,id_f,id_g,final_tau,status\n", 0) == 0);
  CHECK(csv.find("\n4,1,4011,") != std::string::npos);

  // Batches larger than the training split fail every cell, but each is recorded.
  cfg.train.batch_size = 1000;
  write_config(dir / "bad.json", cfg);
  r = run_cli({"sweep", "--config", (dir / "bad.json").string(), "--d-list", "2,3", "--repeats", "1", "--out",
               (dir / "bad").string()});
  CHECK(r.code == 3);
  CHECK(line_count(dir / "bad" / "sweep.csv") == 3);
  CHECK(slurp(dir / "bad" / "sweep.csv").find("failed") != std::string::npos);
  CHECK(r.err.find("d=3") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("run config json") {
  cli::RunConfig cfg;
  cfg.data.setting = Setting::Nonlinear;
  cfg.split.seed = 9;
  cfg.eval.alpha = 0.0005;
  cfg.train.epochs = 7;
  const nlohmann::json j = cfg;
  const auto back = j.get<cli::RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.eval.alpha == 0.0005);

  CHECK_FALSE(nlohmann::json::object().get<cli::RunConfig>().eval.alpha.has_value());
  CHECK(nlohmann::json::object().get<cli::RunConfig>().split.train == 10000);
  for (const char* section : {"data", "split", "eval"}) {
    nlohmann::json bad = j;
    bad[section]["extra"] = 1;
    CHECK_THROWS_AS(bad.get<cli::RunConfig>(), InputError);
  }
  nlohmann::json bad = j;
  bad["eval"]["alpha"] = 2.0;
  CHECK_THROWS_AS(bad.get<cli::RunConfig>(), InputError);
  bad = j;
  bad["split"]["train"] = "lots";
  CHECK_THROWS_AS(bad.get<cli::RunConfig>(), InputError);
}

TEST_CASE("output root follows the environment") {
  ::setenv("CLIPLAB_OUT", "/tmp/elsewhere", 1);
  CHECK(cli::default_output_root() == fs::path("/tmp/elsewhere"));
  ::unsetenv("CLIPLAB_OUT");
  CHECK(cli::default_output_root() == fs::path("runs"));
}
