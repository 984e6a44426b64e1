#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cliplab/contrastive.hpp"
#include "cliplab/encoder.hpp"
#include "cliplab/synthdata.hpp"

namespace cliplab {

enum class NormRefresh { PerEpoch, PerIteration };

struct TrainConfig {
  std::size_t epochs = 800;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double tau_lr = 1e-3;
  std::size_t batch_size = 500;
  std::uint64_t seed = 0;
  double tau_init = 1.0;
  std::size_t id_estimate_every = 10;
  std::size_t id_k = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t output_dim = 3;
  std::vector<std::size_t> hidden_widths = default_hidden_widths();
  SimilarityKind similarity = SimilarityKind::PopNormalizedInner;
  NormRefresh norm_refresh = NormRefresh::PerEpoch;
  NormGradient norm_gradient = NormGradient::Batch;

  // Throws ContractError on non-positive rates or sizes.
  void validate() const;
};

// Rejects unknown keys; missing keys keep their defaults.
void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_batch_loss = 0.0;
  double tau = 0.0;
  double nu_f = 0.0;
  double nu_g = 0.0;
  std::optional<double> id_f;
  std::optional<double> id_g;
  double pos_sim_mean = 0.0;
  double pos_sim_std = 0.0;
  double neg_sim_mean = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainLog {
  std::vector<EpochRecord> records;
  double wall_clock_seconds = 0.0;  // not part of the reproducible record
};

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

// One Adam step with decoupled weight decay (p ← p − lr·wd·p, applied where
// decay[i] is true; all parameters when `decay` is empty) followed by the
// bias-corrected Adam update. Throws NumericError on a non-finite gradient.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state,
               const AdamConfig& cfg, const std::vector<bool>& decay = {});

struct TrainResult {
  EncoderParams f;
  EncoderParams g;
  Temperature temperature;
  double nu_f = 1.0;  // last holdout estimates
  double nu_g = 1.0;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam on (f, g, θ). Each epoch refreshes ν from `norm_holdout`,
// shuffles `train`, takes one step per batch, then logs similarity statistics
// (and every id_estimate_every epochs ID estimates) on `eval` when given,
// otherwise on the holdout. Throws DegenerateEncoderError / NumericError on
// aborts; `on_epoch` has already seen every completed epoch by then.
TrainResult train(const TrainConfig& cfg, const PairedDataset& train, const PairedDataset& norm_holdout,
                  const PairedDataset* eval = nullptr, const EpochCallback& on_epoch = {});

// Run directory: config.json, log.jsonl, encoder_f.json, encoder_g.json,
// temperature.json. log.jsonl is appended one line per epoch.
class RunWriter {
 public:
  RunWriter(const std::filesystem::path& dir, const TrainConfig& cfg, const nlohmann::json& extra_config);

  void append(const EpochRecord& record);
  void finish(const TrainResult& result);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::ofstream log_;
};

struct LoadedRun {
  TrainConfig config;
  EncoderParams f;
  EncoderParams g;
  Temperature temperature;
  double nu_f = 1.0;
  double nu_g = 1.0;
};

LoadedRun load_run(const std::filesystem::path& dir);
std::vector<EpochRecord> read_log(const std::filesystem::path& path);

}  // namespace cliplab
