#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cliplab/metrics.hpp"
#include "cliplab/synthdata.hpp"
#include "cliplab/trainer.hpp"

namespace cliplab::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kAbort = 3 };

inline constexpr int kReportSchemaVersion = 1;

struct SplitSizes {
  std::size_t train = 10000;
  std::size_t test = 2000;
  std::size_t norm = 2000;
  std::uint64_t seed = 0;
};

struct EvalSettings {
  std::optional<double> alpha;  // absent: top-1, i.e. 1/N
  std::size_t id_k = 20;
  bool jitter = true;           // jitter duplicate embeddings instead of failing
  std::size_t hist_bins = 50;
  std::size_t neg_sample = 20000;
  std::size_t knn_k = 10;
  std::uint64_t seed = 0;
};

struct RunConfig {
  SyntheticSpec data;
  SplitSizes split;
  TrainConfig train;
  EvalSettings eval;
};

// Every section and key is optional; unknown keys throw InputError.
void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

struct EvalReport {
  double alpha = 0.0;
  std::size_t n_test = 0;
  double acc_out = 0.0;
  std::optional<double> acc_in;
  std::optional<double> knn_acc;
  IdEstimate id_f;
  IdEstimate id_g;
  double tau = 0.0;
  double nu_f = 0.0;
  double nu_g = 0.0;
  SimHistograms sim;
  NormReport norm_f;
  NormReport norm_g;
};

void to_json(nlohmann::json& j, const EvalReport& r);

// Embeds `test` (and `train` for in-sample accuracy and kNN) with the run's
// encoders and computes every report metric.
EvalReport evaluate(const LoadedRun& run, const PairedDataset& test, const PairedDataset* train,
                    const EvalSettings& settings);

// Writes report.json plus the histogram CSVs into `dir`.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

// Throws InputError when the file's schema_version is not one this build knows.
nlohmann::json read_report(const std::filesystem::path& path);

struct SweepRow {
  std::size_t d = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double acc_in = 0.0;
  double acc_out = 0.0;
  double id_f = 0.0;
  double id_g = 0.0;
  double final_tau = 0.0;
  std::string error;
};

inline std::uint64_t sweep_seed(std::uint64_t base, std::size_t d, std::size_t repeat) {
  return base + 1000 * d + repeat;
}

// Trains and evaluates one (d, repeat) cell into `dir`. Failures are caught
// and reported in the row.
SweepRow run_sweep_cell(const RunConfig& cfg, const SplitResult& data, std::size_t d, std::size_t repeat,
                        std::uint64_t base_seed, const std::filesystem::path& dir);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// Default output root: $CLIPLAB_OUT when set, otherwise ./runs.
std::filesystem::path default_output_root();

// Full command line without the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cliplab::cli
