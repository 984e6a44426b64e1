#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "cliplab/discreteinfo.hpp"
#include "cliplab/errors.hpp"

namespace cliplab::cli {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

nlohmann::json spec_json(const SyntheticSpec& s) {
  return {{"setting", to_string(s.setting)}, {"n", s.n},       {"d1", s.d1},
          {"d2", s.d2},                      {"k_star", s.k_star}, {"seed", s.seed},
          {"cross_term", s.cross_term}};
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"setting", "n", "d1", "d2", "k_star", "seed", "cross_term"}, "data config");
  SyntheticSpec s;
  if (j.contains("setting")) s.setting = setting_from_string(j.at("setting").get<std::string>());
  get_opt(j, "n", s.n);
  get_opt(j, "d1", s.d1);
  get_opt(j, "d2", s.d2);
  get_opt(j, "k_star", s.k_star);
  get_opt(j, "seed", s.seed);
  get_opt(j, "cross_term", s.cross_term);
  return s;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

double resolve_alpha(const EvalSettings& s, std::size_t n) {
  return s.alpha ? *s.alpha : 1.0 / static_cast<double>(n);
}

IdEstimate embedding_id(const Matrix& emb, const EvalSettings& s) {
  IdOptions opt;
  opt.k = s.id_k;
  opt.duplicates = s.jitter ? DuplicatePolicy::Jitter : DuplicatePolicy::Error;
  opt.jitter_seed = s.seed;
  return id_mle(emb, opt);
}

PairedDataset load_dir(const fs::path& dir) {
  const auto labels = dir / "labels.txt";
  return load_csv((dir / "X.csv").string(), (dir / "Y.csv").string(),
                  fs::exists(labels) ? std::optional<std::string>(labels.string()) : std::nullopt);
}

void save_dir(const fs::path& dir, const PairedDataset& ds) {
  fs::create_directories(dir);
  save_csv(dir.string(), ds);
}

SplitResult prepare_data(const RunConfig& cfg, const std::optional<std::string>& data_dir) {
  const PairedDataset all = data_dir ? load_dir(*data_dir) : generate(cfg.data);
  return split(all, {cfg.split.train, cfg.split.test, cfg.split.norm}, cfg.split.seed);
}

nlohmann::json run_config_extra(const RunConfig& cfg, const std::optional<std::string>& data_dir) {
  nlohmann::json j = cfg;
  if (data_dir) j["data_source"] = *data_dir;
  return j;
}

// Trains into `dir`, logging each epoch. The log stays on disk when training
// aborts.
TrainResult train_into(const RunConfig& cfg, const SplitResult& data, const fs::path& dir,
                       const nlohmann::json& extra, std::ostream* progress) {
  RunWriter writer(dir, cfg.train, extra);
  const PairedDataset* eval = data.test.size() > 0 ? &data.test : nullptr;
  auto res = train(cfg.train, data.train, data.norm, eval, [&](const EpochRecord& r) {
    writer.append(r);
    if (progress) {
      *progress << "epoch " << r.epoch << " loss " << r.mean_batch_loss << " tau " << r.tau << " pos "
                << r.pos_sim_mean << '\n';
    }
  });
  writer.finish(res);
  return res;
}

LoadedRun as_loaded(const TrainConfig& cfg, const TrainResult& res) {
  return LoadedRun{cfg, res.f, res.g, res.temperature, res.nu_f, res.nu_g};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string setting = "linear";
  SyntheticSpec spec;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  SyntheticSpec spec = a.spec;
  spec.setting = setting_from_string(a.setting);
  const fs::path dir = a.out.empty() ? default_output_root() / "gen" : fs::path(a.out);
  const auto ds = generate(spec);
  fs::create_directories(dir);
  write_csv_matrix((dir / "X.csv").string(), ds.x, "x");
  write_csv_matrix((dir / "Y.csv").string(), ds.y, "y");
  write_json_file(dir / "meta.json", {{"spec", spec_json(spec)}, {"rows", ds.size()}});
  out << nlohmann::json{{"out", dir.string()}, {"rows", ds.size()}}.dump() << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::string> setting;
  std::optional<std::size_t> n, d1, d2, k, n_train, n_test, n_norm, epochs, batch, dim;
  std::optional<std::uint64_t> data_seed, seed;
  std::optional<double> lr, tau_lr;
  bool verbose = false;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.setting) cfg.data.setting = setting_from_string(*a.setting);
  if (a.n) cfg.data.n = *a.n;
  if (a.d1) cfg.data.d1 = *a.d1;
  if (a.d2) cfg.data.d2 = *a.d2;
  if (a.k) cfg.data.k_star = *a.k;
  if (a.data_seed) cfg.data.seed = *a.data_seed;
  if (a.n_train) cfg.split.train = *a.n_train;
  if (a.n_test) cfg.split.test = *a.n_test;
  if (a.n_norm) cfg.split.norm = *a.n_norm;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.dim) cfg.train.output_dim = *a.dim;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.tau_lr) cfg.train.tau_lr = *a.tau_lr;
  cfg.train.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(a);
  const std::optional<std::string> data_dir = a.data.empty() ? std::nullopt : std::optional(a.data);
  const fs::path dir = a.out.empty() ? default_output_root() / "train" : fs::path(a.out);
  const auto data = prepare_data(cfg, data_dir);
  fs::create_directories(dir);
  save_dir(dir / "data" / "train", data.train);
  save_dir(dir / "data" / "test", data.test);
  const auto res = train_into(cfg, data, dir, run_config_extra(cfg, data_dir), a.verbose ? &err : nullptr);
  nlohmann::json summary = {{"run", dir.string()}, {"epochs", res.log.records.size()},
                            {"final_tau", tau_value(res.temperature)}};
  if (!res.log.records.empty()) summary["final_loss"] = res.log.records.back().mean_batch_loss;
  out << summary.dump() << '\n';
  return kOk;
}

struct EvalArgs {
  std::string run;
  std::string x, y, labels;
  std::string train_x, train_y, train_labels;
  std::optional<double> alpha;
  std::optional<std::size_t> id_k;
  bool no_jitter = false;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path run_dir(a.run);
  if (!fs::is_directory(run_dir)) throw InputError("run directory not found: " + a.run);
  const LoadedRun run = load_run(run_dir);
  EvalSettings settings = load_run_config((run_dir / "config.json").string()).eval;
  if (a.alpha) settings.alpha = *a.alpha;
  if (a.id_k) settings.id_k = *a.id_k;
  if (a.no_jitter) settings.jitter = false;

  auto load_pair = [](const std::string& x, const std::string& y, const std::string& labels) {
    return load_csv(x, y, labels.empty() ? std::nullopt : std::optional<std::string>(labels));
  };
  const PairedDataset test = a.x.empty() ? load_dir(run_dir / "data" / "test") : load_pair(a.x, a.y, a.labels);
  std::optional<PairedDataset> train;
  if (!a.train_x.empty()) {
    train = load_pair(a.train_x, a.train_y, a.train_labels);
  } else if (fs::exists(run_dir / "data" / "train" / "X.csv")) {
    train = load_dir(run_dir / "data" / "train");
  }

  const auto report = evaluate(run, test, train ? &*train : nullptr, settings);
  const fs::path dir = a.out.empty() ? run_dir / "eval" : fs::path(a.out);
  write_report(dir, report);
  nlohmann::json summary = {{"report", (dir / "report.json").string()},
                            {"alpha", report.alpha},
                            {"acc_out", report.acc_out},
                            {"id_f", report.id_f.value},
                            {"id_g", report.id_g.value}};
  if (report.acc_in) summary["acc_in"] = *report.acc_in;
  if (report.knn_acc) summary["knn_acc"] = *report.knn_acc;
  out << summary.dump() << '\n';
  return kOk;
}

struct DecompArgs {
  std::size_t size = 8;
  double tau = 0.5;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t dim = 3;
};

int cmd_decomp_check(const DecompArgs& a, std::ostream& out) {
  if (!(a.tau > 0.0) || !std::isfinite(a.tau)) throw ContractError("decomp-check: --tau must be positive");
  if (a.size == 0 || a.trials == 0 || a.dim == 0) {
    throw ContractError("decomp-check: --size, --trials and --dim must be positive");
  }
  constexpr double kTolerance = 1e-10;
  Rng rng(a.seed);
  DecompositionReport worst;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const auto joint = random_joint(a.size, a.size, a.dim, rng);
    const auto rep = decompose(joint, similarity_table(joint), a.tau);
    if (t == 0 || !(rep.residual <= worst.residual)) worst = rep;
  }
  const bool pass = worst.residual <= kTolerance;
  out << nlohmann::json{{"size", a.size},
                        {"tau", a.tau},
                        {"trials", a.trials},
                        {"seed", a.seed},
                        {"residual", worst.residual},
                        {"loss", worst.loss},
                        {"mi", worst.mi},
                        {"kl1", worst.kl_q},
                        {"kl2", worst.kl_q_tilde},
                        {"tolerance", kTolerance},
                        {"pass", pass}}
             .dump()
      << '\n';
  return pass ? kOk : kAbort;
}

struct IdArgs {
  std::string input;
  std::size_t k = 20;
  bool jitter = false;
  std::string averaging = "mean";
  std::uint64_t seed = 0;
};

int cmd_id(const IdArgs& a, std::ostream& out) {
  const Matrix pts = read_csv_matrix(a.input);
  IdOptions opt;
  opt.k = a.k;
  opt.duplicates = a.jitter ? DuplicatePolicy::Jitter : DuplicatePolicy::Error;
  opt.jitter_seed = a.seed;
  if (a.averaging == "mean") {
    opt.averaging = IdAveraging::MeanOfLocal;
  } else if (a.averaging == "inverse") {
    opt.averaging = IdAveraging::InverseOfMean;
  } else {
    throw InputError("id: --averaging must be 'mean' or 'inverse'");
  }
  out << nlohmann::json(id_mle(pts, opt)).dump() << '\n';
  return kOk;
}

struct SweepArgs {
  std::string config;
  std::string data;
  std::vector<std::size_t> d_list{3, 5, 10, 20};
  std::size_t repeats = 3;
  std::uint64_t base_seed = 0;
  std::optional<std::size_t> epochs;
  std::size_t jobs = 1;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.d_list.empty() || a.repeats == 0) throw ContractError("sweep: empty --d-list or zero --repeats");
  if (std::find(a.d_list.begin(), a.d_list.end(), 0) != a.d_list.end()) {
    throw ContractError("sweep: dimensions must be positive");
  }
  cfg.train.validate();
  const std::optional<std::string> data_dir = a.data.empty() ? std::nullopt : std::optional(a.data);
  const fs::path root = a.out.empty() ? default_output_root() / "sweep" : fs::path(a.out);
  const auto data = prepare_data(cfg, data_dir);
  fs::create_directories(root);
  write_json_file(root / "sweep.json", {{"config", run_config_extra(cfg, data_dir)},
                                        {"d_list", a.d_list},
                                        {"repeats", a.repeats},
                                        {"base_seed", a.base_seed}});

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t d : a.d_list)
    for (std::size_t r = 0; r < a.repeats; ++r) cells.emplace_back(d, r);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto [d, r] = cells[i];
      const auto cell_dir = root / ("d" + std::to_string(d) + "_r" + std::to_string(r));
      rows[i] = run_sweep_cell(cfg, data, d, r, a.base_seed, cell_dir);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(a.jobs, 1, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  write_sweep_csv(root / "sweep.csv", rows);
  std::size_t failed = 0;
  for (const auto& row : rows) {
    if (row.ok) continue;
    ++failed;
    err << "cell d=" << row.d << " repeat=" << row.repeat << " failed: " << row.error << '\n';
  }
  out << nlohmann::json{{"csv", (root / "sweep.csv").string()}, {"cells", rows.size()}, {"failed", failed}}.dump()
      << '\n';
  return failed == 0 ? kOk : kAbort;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and reports
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  nlohmann::json alpha = nullptr;
  if (cfg.eval.alpha) alpha = *cfg.eval.alpha;
  j = {{"data", spec_json(cfg.data)},
       {"split",
        {{"train", cfg.split.train}, {"test", cfg.split.test}, {"norm", cfg.split.norm}, {"seed", cfg.split.seed}}},
       {"train", cfg.train},
       {"eval",
        {{"alpha", alpha},
         {"id_k", cfg.eval.id_k},
         {"jitter", cfg.eval.jitter},
         {"hist_bins", cfg.eval.hist_bins},
         {"neg_sample", cfg.eval.neg_sample},
         {"knn_k", cfg.eval.knn_k},
         {"seed", cfg.eval.seed}}}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  // data_source is informational, written by runs that loaded CSV files.
  reject_unknown(j, {"data", "split", "train", "eval", "data_source"}, "run config");
  try {
    cfg = RunConfig{};
    if (j.contains("data")) cfg.data = spec_from_json(j.at("data"));
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train", "test", "norm", "seed"}, "split config");
      get_opt(s, "train", cfg.split.train);
      get_opt(s, "test", cfg.split.test);
      get_opt(s, "norm", cfg.split.norm);
      get_opt(s, "seed", cfg.split.seed);
    }
    if (j.contains("train")) cfg.train = j.at("train").get<TrainConfig>();
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, {"alpha", "id_k", "jitter", "hist_bins", "neg_sample", "knn_k", "seed"}, "eval config");
      if (e.contains("alpha") && !e.at("alpha").is_null()) cfg.eval.alpha = e.at("alpha").get<double>();
      get_opt(e, "id_k", cfg.eval.id_k);
      get_opt(e, "jitter", cfg.eval.jitter);
      get_opt(e, "hist_bins", cfg.eval.hist_bins);
      get_opt(e, "neg_sample", cfg.eval.neg_sample);
      get_opt(e, "knn_k", cfg.eval.knn_k);
      get_opt(e, "seed", cfg.eval.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("run config: ") + e.what());
  }
  if (cfg.eval.alpha && !(*cfg.eval.alpha > 0.0 && *cfg.eval.alpha <= 1.0)) {
    throw InputError("run config: eval.alpha must lie in (0, 1]");
  }
}

RunConfig load_run_config(const std::string& path) { return read_json_file(path).get<RunConfig>(); }

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"schema_version", kReportSchemaVersion},
       {"alpha", r.alpha},
       {"n_test", r.n_test},
       {"acc_out", r.acc_out},
       {"acc_in", r.acc_in ? nlohmann::json(*r.acc_in) : nlohmann::json(nullptr)},
       {"knn_acc", r.knn_acc ? nlohmann::json(*r.knn_acc) : nlohmann::json(nullptr)},
       {"id_f", r.id_f},
       {"id_g", r.id_g},
       {"tau", r.tau},
       {"nu_f", r.nu_f},
       {"nu_g", r.nu_g},
       {"similarity", r.sim},
       {"norm_f", r.norm_f},
       {"norm_g", r.norm_g}};
}

EvalReport evaluate(const LoadedRun& run, const PairedDataset& test, const PairedDataset* train,
                    const EvalSettings& settings) {
  test.validate();
  if (test.size() < 2) throw ContractError("eval: test set needs at least 2 rows");
  EvalReport r;
  const Matrix fe = mlp_forward(run.f, test.x);
  const Matrix ge = mlp_forward(run.g, test.y);
  r.n_test = test.size();
  r.alpha = resolve_alpha(settings, test.size());
  r.acc_out = topk_match_acc(fe, ge, r.alpha).acc;
  r.id_f = embedding_id(fe, settings);
  r.id_g = embedding_id(ge, settings);
  r.tau = tau_value(run.temperature);
  r.nu_f = run.nu_f;
  r.nu_g = run.nu_g;
  const SimilarityConfig sim{run.config.similarity, run.nu_f, run.nu_g};
  r.sim = similarity_histograms(fe, ge, sim, settings.hist_bins, settings.neg_sample, settings.seed);
  r.norm_f = norm_report(fe, run.nu_f, settings.hist_bins);
  r.norm_g = norm_report(ge, run.nu_g, settings.hist_bins);
  if (train && train->size() > 0) {
    train->validate();
    const Matrix tf = mlp_forward(run.f, train->x);
    const Matrix tg = mlp_forward(run.g, train->y);
    r.acc_in = topk_match_acc(tf, tg, resolve_alpha(settings, train->size())).acc;
    if (train->labels && test.labels) r.knn_acc = knn_classify(tf, *train->labels, fe, *test.labels, settings.knn_k);
  }
  return r;
}

void write_report(const fs::path& dir, const EvalReport& report) {
  fs::create_directories(dir);
  write_json_file(dir / "report.json", report);
  write_histogram_csv((dir / "sim_pos.csv").string(), report.sim.pos);
  write_histogram_csv((dir / "sim_neg.csv").string(), report.sim.neg);
  write_histogram_csv((dir / "norm_f.csv").string(), report.norm_f.histogram);
  write_histogram_csv((dir / "norm_g.csv").string(), report.norm_g.histogram);
}

nlohmann::json read_report(const fs::path& path) {
  auto j = read_json_file(path);
  if (!j.is_object() || !j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw InputError(path.string() + ": missing schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kReportSchemaVersion) {
    throw InputError(path.string() + ": unsupported schema_version " + std::to_string(version));
  }
  return j;
}

SweepRow run_sweep_cell(const RunConfig& base, const SplitResult& data, std::size_t d, std::size_t repeat,
                        std::uint64_t base_seed, const fs::path& dir) {
  SweepRow row;
  row.d = d;
  row.repeat = repeat;
  row.seed = sweep_seed(base_seed, d, repeat);
  try {
    RunConfig cfg = base;
    cfg.train.output_dim = d;
    cfg.train.seed = row.seed;
    const auto res = train_into(cfg, data, dir, cfg, nullptr);
    const auto report = evaluate(as_loaded(cfg.train, res), data.test, &data.train, cfg.eval);
    write_report(dir, report);
    row.acc_in = report.acc_in.value_or(0.0);
    row.acc_out = report.acc_out;
    row.id_f = report.id_f.value;
    row.id_g = report.id_g.value;
    row.final_tau = report.tau;
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "d,repeat,seed,acc_in,acc_out,id_f,id_g,final_tau,status\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.repeat << ',' << r.seed << ',';
    if (r.ok) {
      out << format_double(r.acc_in) << ',' << format_double(r.acc_out) << ',' << format_double(r.id_f) << ','
          << format_double(r.id_g) << ',' << format_double(r.final_tau) << ",ok\n";
    } else {
      out << ",,,,,failed\n";
    }
  }
}

fs::path default_output_root() {
  const char* env = std::getenv("CLIPLAB_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive dual-encoder experiments on synthetic and CSV data", "cliplab"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic paired dataset");
  g->add_option("--setting", gen.setting, "linear or nonlinear")->capture_default_str();
  g->add_option("--n", gen.spec.n, "Rows")->capture_default_str();
  g->add_option("--d1", gen.spec.d1, "Columns of X")->capture_default_str();
  g->add_option("--d2", gen.spec.d2, "Columns of Y")->capture_default_str();
  g->add_option("--k", gen.spec.k_star, "Shared dimension k*")->capture_default_str();
  g->add_option("--seed", gen.spec.seed)->capture_default_str();
  g->add_flag("--cross-term", gen.spec.cross_term, "Use sin(Y2*Y3) for the second nonlinear coordinate");
  g->add_option("--out", gen.out, "Output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a pair of encoders");
  t->add_option("--config", tr.config, "RunConfig JSON file");
  t->add_option("--data", tr.data, "Directory with X.csv, Y.csv and optional labels.txt");
  t->add_option("--out", tr.out, "Run directory");
  t->add_option("--setting", tr.setting);
  t->add_option("--n", tr.n);
  t->add_option("--d1", tr.d1);
  t->add_option("--d2", tr.d2);
  t->add_option("--k", tr.k);
  t->add_option("--data-seed", tr.data_seed);
  t->add_option("--n-train", tr.n_train);
  t->add_option("--n-test", tr.n_test);
  t->add_option("--n-norm", tr.n_norm);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch);
  t->add_option("--dim", tr.dim, "Embedding dimension d");
  t->add_option("--seed", tr.seed);
  t->add_option("--lr", tr.lr);
  t->add_option("--tau-lr", tr.tau_lr);
  t->add_flag("--verbose", tr.verbose, "Print one line per epoch to stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a trained run");
  e->add_option("--run", ev.run, "Run directory")->required();
  e->add_option("--x", ev.x, "Test X.csv (default: the run's test split)");
  e->add_option("--y", ev.y, "Test Y.csv");
  e->add_option("--labels", ev.labels, "Test labels");
  e->add_option("--train-x", ev.train_x);
  e->add_option("--train-y", ev.train_y);
  e->add_option("--train-labels", ev.train_labels);
  e->add_option("--alpha", ev.alpha, "Top fraction for matching accuracy (default 1/N)");
  e->add_option("--id-k", ev.id_k);
  e->add_flag("--no-jitter", ev.no_jitter, "Fail on duplicate embeddings instead of jittering");
  e->add_option("--out", ev.out, "Report directory (default RUN/eval)");
  e->get_option("--y")->needs("--x");
  e->get_option("--x")->needs("--y");
  e->get_option("--train-y")->needs("--train-x");
  e->get_option("--train-x")->needs("--train-y");

  DecompArgs dc;
  auto* c = app.add_subcommand("decomp-check", "Check the loss decomposition on random discrete joints");
  c->add_option("--size", dc.size)->capture_default_str();
  c->add_option("--tau", dc.tau)->capture_default_str();
  c->add_option("--trials", dc.trials)->capture_default_str();
  c->add_option("--seed", dc.seed)->capture_default_str();
  c->add_option("--dim", dc.dim, "Atom dimension")->capture_default_str();

  IdArgs ia;
  auto* i = app.add_subcommand("id", "Intrinsic dimension of a point cloud");
  i->add_option("--input", ia.input, "CSV of points")->required();
  i->add_option("--k", ia.k)->capture_default_str();
  i->add_flag("--jitter", ia.jitter, "Jitter duplicate points instead of failing");
  i->add_option("--averaging", ia.averaging, "mean or inverse")->capture_default_str();
  i->add_option("--seed", ia.seed, "Jitter seed")->capture_default_str();

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train and evaluate over embedding dimensions and repeats");
  s->add_option("--config", sw.config, "RunConfig JSON file");
  s->add_option("--data", sw.data, "Directory with X.csv and Y.csv");
  s->add_option("--d-list", sw.d_list, "Embedding dimensions")->delimiter(',')->capture_default_str();
  s->add_option("--repeats", sw.repeats)->capture_default_str();
  s->add_option("--base-seed", sw.base_seed)->capture_default_str();
  s->add_option("--epochs", sw.epochs);
  s->add_option("--jobs", sw.jobs, "Cells trained in parallel")->capture_default_str();
  s->add_option("--out", sw.out, "Sweep directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (c->parsed()) return cmd_decomp_check(dc, out);
    if (i->parsed()) return cmd_id(ia, out);
    if (s->parsed()) return cmd_sweep(sw, out, err);
  } catch (const ContractError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "aborted: " << ex.what() << '\n';
    return kAbort;
  }
  return kUsage;
}

}  // namespace cliplab::cli
