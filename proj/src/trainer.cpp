#include "cliplab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cliplab/errors.hpp"
#include "cliplab/metrics.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(tau_lr > 0.0)) throw ContractError("train config: learning rates must be positive");
  if (!(weight_decay >= 0.0)) throw ContractError("train config: weight_decay must be nonnegative");
  if (batch_size < 1) throw ContractError("train config: batch_size must be positive");
  if (!(tau_init >= kTauMin && tau_init <= kTauMax)) {
    throw ContractError("train config: tau_init must lie in [1e-4, 10]");
  }
  if (output_dim == 0) throw ContractError("train config: output_dim must be positive");
  if (id_k < 2) throw ContractError("train config: id_k must be at least 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw ContractError("train config: invalid Adam hyperparameters");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"tau_lr", c.tau_lr},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"tau_init", c.tau_init},
       {"id_estimate_every", c.id_estimate_every},
       {"id_k", c.id_k},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"output_dim", c.output_dim},
       {"hidden_widths", c.hidden_widths},
       {"similarity", to_string(c.similarity)},
       {"norm_refresh", c.norm_refresh == NormRefresh::PerEpoch ? "epoch" : "iteration"},
       {"norm_gradient", to_string(c.norm_gradient)}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "epochs", "lr",   "weight_decay", "tau_lr",     "batch_size",    "seed",       "tau_init",    "id_estimate_every",
      "id_k",   "beta1", "beta2",       "eps",        "output_dim",    "hidden_widths", "similarity", "norm_refresh",
      "norm_gradient"};
  if (!j.is_object()) throw InputError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("train config: unknown key '" + key + "'");
  }
  try {
    c = TrainConfig{};
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("epochs", c.epochs);
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("tau_lr", c.tau_lr);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("tau_init", c.tau_init);
    get("id_estimate_every", c.id_estimate_every);
    get("id_k", c.id_k);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("output_dim", c.output_dim);
    get("hidden_widths", c.hidden_widths);
    if (j.contains("similarity")) c.similarity = similarity_kind_from_string(j.at("similarity").get<std::string>());
    if (j.contains("norm_gradient")) {
      c.norm_gradient = norm_gradient_from_string(j.at("norm_gradient").get<std::string>());
    }
    if (j.contains("norm_refresh")) {
      const auto mode = j.at("norm_refresh").get<std::string>();
      if (mode == "epoch") {
        c.norm_refresh = NormRefresh::PerEpoch;
      } else if (mode == "iteration") {
        c.norm_refresh = NormRefresh::PerIteration;
      } else {
        throw InputError("train config: norm_refresh must be 'epoch' or 'iteration'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  } catch (const ContractError& e) {
    throw InputError(e.what());
  }
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"mean_batch_loss", r.mean_batch_loss},
       {"tau", r.tau},
       {"nu_f", r.nu_f},
       {"nu_g", r.nu_g},
       {"id_f", r.id_f ? nlohmann::json(*r.id_f) : nlohmann::json(nullptr)},
       {"id_g", r.id_g ? nlohmann::json(*r.id_g) : nlohmann::json(nullptr)},
       {"pos_sim_mean", r.pos_sim_mean},
       {"pos_sim_std", r.pos_sim_std},
       {"neg_sim_mean", r.neg_sim_mean}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.mean_batch_loss = j.at("mean_batch_loss").get<double>();
  r.tau = j.at("tau").get<double>();
  r.nu_f = j.at("nu_f").get<double>();
  r.nu_g = j.at("nu_g").get<double>();
  r.id_f = j.at("id_f").is_null() ? std::nullopt : std::optional<double>(j.at("id_f").get<double>());
  r.id_g = j.at("id_g").is_null() ? std::nullopt : std::optional<double>(j.at("id_g").get<double>());
  r.pos_sim_mean = j.at("pos_sim_mean").get<double>();
  r.pos_sim_std = j.at("pos_sim_std").get<double>();
  r.neg_sim_mean = j.at("neg_sim_mean").get<double>();
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state,
               const AdamConfig& cfg, const std::vector<bool>& decay) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter and gradient counts differ");
  if (!decay.empty() && decay.size() != params.size()) throw DimensionError("adam_step: decay mask size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "adam_step");
    const auto g = grads[i]->values();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " entry " +
                           std::to_string(k) + " at step " + std::to_string(state.step + 1));
      }
    }
  }
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    const auto g = grads[i]->values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    const bool apply_decay = decay.empty() || decay[i];
    const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (apply_decay && cfg.weight_decay != 0.0) p[k] *= shrink;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

namespace {

struct ParamRefs {
  std::vector<Matrix*> params;
  std::vector<bool> decay;
};

ParamRefs refs(EncoderParams& p) {
  ParamRefs r;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    r.params.push_back(&p.weights[l]);
    r.decay.push_back(true);
    r.params.push_back(&p.biases[l]);
    r.decay.push_back(false);
  }
  return r;
}

std::vector<const Matrix*> grad_refs(const Tape& tape, const EncoderVars& vars) {
  std::vector<const Matrix*> g;
  for (std::size_t l = 0; l < vars.weights.size(); ++l) {
    g.push_back(&tape.grad(vars.weights[l]));
    g.push_back(&tape.grad(vars.biases[l]));
  }
  return g;
}

struct SimStats {
  double pos_mean = 0.0;
  double pos_std = 0.0;
  double neg_mean = 0.0;
};

// Exact positive statistics and the mean over all N(N−1) off-diagonal pairs.
SimStats similarity_stats(const Matrix& u, const Matrix& v, const SimilarityConfig& cfg) {
  Matrix a = u;
  Matrix b = v;
  double scale = 1.0 / (cfg.nu_f * cfg.nu_g);
  if (cfg.kind == SimilarityKind::Cosine) {
    scale = 1.0;
    for (Matrix* m : {&a, &b}) {
      const Matrix norms = row_norms(*m);
      for (std::size_t i = 0; i < m->rows(); ++i)
        if (norms(i, 0) > 0.0)
          for (double& x : m->row(i)) x /= norms(i, 0);
    }
  }
  const std::size_t n = a.rows();
  std::vector<double> pos(n);
  std::vector<double> col_a(a.cols(), 0.0);
  std::vector<double> col_b(a.cols(), 0.0);
  double pos_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      acc += a(i, c) * b(i, c);
      col_a[c] += a(i, c);
      col_b[c] += b(i, c);
    }
    pos[i] = acc * scale;
    pos_sum += acc;
  }
  SimStats s;
  const auto ms = mean_std(pos);
  s.pos_mean = ms.mean;
  s.pos_std = ms.std;
  if (n >= 2) {
    double total = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) total += col_a[c] * col_b[c];
    s.neg_mean = (total - pos_sum) * scale / static_cast<double>(n * (n - 1));
  }
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const PairedDataset& train_set, const PairedDataset& norm_holdout,
                  const PairedDataset* eval, const EpochCallback& on_epoch) {
  cfg.validate();
  train_set.validate();
  norm_holdout.validate();
  if (train_set.x.cols() != norm_holdout.x.cols() || train_set.y.cols() != norm_holdout.y.cols()) {
    throw DimensionError("train: holdout feature dimensions differ from the training set");
  }
  if (eval && (eval->x.cols() != train_set.x.cols() || eval->y.cols() != train_set.y.cols())) {
    throw DimensionError("train: eval feature dimensions differ from the training set");
  }
  if (cfg.epochs > 0) {
    if (train_set.size() < 2) throw ContractError("train: need at least 2 training rows");
    if (cfg.batch_size > train_set.size()) {
      throw ContractError("train: batch_size " + std::to_string(cfg.batch_size) + " exceeds training size " +
                          std::to_string(train_set.size()));
    }
    if (norm_holdout.size() == 0) throw ContractError("train: empty norm holdout");
  }

  const auto start = std::chrono::steady_clock::now();
  TrainResult res;
  Rng seeds(cfg.seed);
  res.f = mlp_init(train_set.x.cols(), cfg.output_dim, seeds.next_u64(), cfg.hidden_widths);
  res.g = mlp_init(train_set.y.cols(), cfg.output_dim, seeds.next_u64(), cfg.hidden_widths);
  res.temperature = Temperature::from_tau(cfg.tau_init);
  if (norm_holdout.size() > 0) std::tie(res.nu_f, res.nu_g) = estimate_norms(res.f, res.g, norm_holdout);

  Rng shuffle_rng = seeds.fork(1);
  AdamState state_f;
  AdamState state_g;
  AdamState state_theta;
  const AdamConfig enc_cfg{cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps};
  const AdamConfig tau_cfg{cfg.tau_lr, 0.0, cfg.beta1, cfg.beta2, cfg.eps};
  const double theta_lo = std::log(res.temperature.tau_min);
  const double theta_hi = std::log(res.temperature.tau_max);
  const PairedDataset& monitor = eval ? *eval : norm_holdout;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::tie(res.nu_f, res.nu_g) = estimate_norms(res.f, res.g, norm_holdout);
    const auto order = permutation(train_set.size(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      if (end - begin < 2) break;  // a single pair carries no contrastive signal
      if (cfg.norm_refresh == NormRefresh::PerIteration && begin > 0) {
        std::tie(res.nu_f, res.nu_g) = estimate_norms(res.f, res.g, norm_holdout);
      }
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);

      Tape tape;
      const EncoderVars fv = bind(tape, res.f);
      const EncoderVars gv = bind(tape, res.g);
      const Var theta = tape.leaf(Matrix::scalar(res.temperature.theta));
      const Var xb = tape.constant(gather_rows(train_set.x, idx));
      const Var yb = tape.constant(gather_rows(train_set.y, idx));
      const Var u = mlp_forward(tape, fv, xb);
      const Var v = mlp_forward(tape, gv, yb);
      const SimilarityConfig sim_cfg{cfg.similarity, res.nu_f, res.nu_g, cfg.norm_gradient};
      const Var s = similarity_matrix(tape, u, v, sim_cfg);
      const Var loss = infonce_loss(tape, s, tau_node(tape, theta, res.temperature));
      const double loss_value = tape.value(loss).item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      tape.backward(loss);

      try {
        auto rf = refs(res.f);
        adam_step(rf.params, grad_refs(tape, fv), state_f, enc_cfg, rf.decay);
        auto rg = refs(res.g);
        adam_step(rg.params, grad_refs(tape, gv), state_g, enc_cfg, rg.decay);
        Matrix theta_param = Matrix::scalar(res.temperature.theta);
        Matrix* tp[] = {&theta_param};
        const Matrix* tg[] = {&tape.grad(theta)};
        adam_step(tp, tg, state_theta, tau_cfg);
        res.temperature.theta = std::clamp(theta_param.item(), theta_lo, theta_hi);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + ")");
      }
      loss_sum += loss_value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_batch_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.tau = tau_value(res.temperature);
    rec.nu_f = res.nu_f;
    rec.nu_g = res.nu_g;
    if (monitor.size() > 0) {
      const Matrix fe = mlp_forward(res.f, monitor.x);
      const Matrix ge = mlp_forward(res.g, monitor.y);
      const auto stats = similarity_stats(fe, ge, SimilarityConfig{cfg.similarity, res.nu_f, res.nu_g});
      rec.pos_sim_mean = stats.pos_mean;
      rec.pos_sim_std = stats.pos_std;
      rec.neg_sim_mean = stats.neg_mean;
      const bool id_epoch = cfg.id_estimate_every > 0 &&
                            ((epoch + 1) % cfg.id_estimate_every == 0 || epoch + 1 == cfg.epochs);
      if (eval && id_epoch && monitor.size() > cfg.id_k) {
        IdOptions opt;
        opt.k = cfg.id_k;
        opt.duplicates = DuplicatePolicy::Jitter;
        opt.jitter_seed = cfg.seed;
        rec.id_f = id_mle(fe, opt).value;
        rec.id_g = id_mle(ge, opt).value;
      }
    }
    res.log.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  res.log.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

RunWriter::RunWriter(const std::filesystem::path& dir, const TrainConfig& cfg, const nlohmann::json& extra_config)
    : dir_(dir) {
  std::filesystem::create_directories(dir_);
  nlohmann::json config = extra_config.is_object() ? extra_config : nlohmann::json::object();
  config["train"] = cfg;
  std::ofstream(dir_ / "config.json") << config.dump(2) << '\n';
  log_.open(dir_ / "log.jsonl", std::ios::trunc);
  if (!log_) throw InputError("cannot write " + (dir_ / "log.jsonl").string());
}

void RunWriter::append(const EpochRecord& record) {
  log_ << nlohmann::json(record).dump() << '\n';
  log_.flush();
}

void RunWriter::finish(const TrainResult& result) {
  save_encoder((dir_ / "encoder_f.json").string(), result.f);
  save_encoder((dir_ / "encoder_g.json").string(), result.g);
  const nlohmann::json t = {{"theta", result.temperature.theta},
                            {"tau", tau_value(result.temperature)},
                            {"tau_min", result.temperature.tau_min},
                            {"tau_max", result.temperature.tau_max},
                            {"nu_f", result.nu_f},
                            {"nu_g", result.nu_g}};
  std::ofstream(dir_ / "temperature.json") << t.dump(2) << '\n';
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing run artifact " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  const auto config = read_json(dir / "config.json");
  if (!config.contains("train")) throw InputError("config.json has no 'train' section");
  run.config = config.at("train").get<TrainConfig>();
  run.f = load_encoder((dir / "encoder_f.json").string());
  run.g = load_encoder((dir / "encoder_g.json").string());
  const auto t = read_json(dir / "temperature.json");
  try {
    run.temperature.theta = t.at("theta").get<double>();
    run.temperature.tau_min = t.value("tau_min", kTauMin);
    run.temperature.tau_max = t.value("tau_max", kTauMax);
    run.nu_f = t.at("nu_f").get<double>();
    run.nu_g = t.at("nu_g").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("temperature.json: ") + e.what());
  }
  return run;
}

std::vector<EpochRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line).get<EpochRecord>());
  }
  return out;
}

}  // namespace cliplab
