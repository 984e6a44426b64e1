#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cliplab/contrastive.hpp"
#include "cliplab/matrix.hpp"

namespace cliplab {

// ---------------------------------------------------------------------------
// Intrinsic dimension (Levina-Bickel maximum likelihood)
// ---------------------------------------------------------------------------

enum class IdAveraging {
  MeanOfLocal,     // mean_x m̂_k(x)
  InverseOfMean,   // MacKay-Ghahramani: 1 / mean_x (1 / m̂_k(x))
};

enum class DuplicatePolicy { Error, Jitter };

struct IdOptions {
  std::size_t k = 20;
  IdAveraging averaging = IdAveraging::MeanOfLocal;
  DuplicatePolicy duplicates = DuplicatePolicy::Error;
  double jitter_scale = 1e-8;  // relative to the cloud's coordinate spread
  std::uint64_t jitter_seed = 0;
  bool keep_local = false;
};

struct IdEstimate {
  double value = 0.0;
  std::size_t k_neighbors = 0;
  std::size_t n_points = 0;
  std::vector<double> per_point_estimates;
};

// For each point, T_j is the distance to its j-th nearest neighbour (self
// excluded) and m̂_k = [(1/(k−1)) Σ_{j<k} log(T_k/T_j)]^{-1}. Exact kNN.
// Throws ContractError if k ≥ N or k < 2, InputError on duplicate points
// under DuplicatePolicy::Error.
IdEstimate id_mle(const Matrix& points, const IdOptions& options = {});
IdEstimate id_mle(const Matrix& points, std::size_t k);

// ---------------------------------------------------------------------------
// Top-α matching accuracy
// ---------------------------------------------------------------------------

struct MatchReport {
  double alpha = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
  std::size_t top = 0;  // ⌈αN⌉
};

// Fraction of rows i whose partner G_i is among the ⌈αN⌉ rows of G closest to
// F_i in Euclidean distance, ties going to the lower index.
MatchReport topk_match_acc(const Matrix& f, const Matrix& g, double alpha);

// ---------------------------------------------------------------------------
// k-nearest-neighbour classification
// ---------------------------------------------------------------------------

// Majority vote among the k nearest training rows (distance ties broken by
// lower index). Vote ties go to the smallest summed distance, then the
// lexicographically smallest label. Returns the fraction of correct test rows.
double knn_classify(const Matrix& train_repr, const std::vector<std::string>& train_labels, const Matrix& test_repr,
                    const std::vector<std::string>& test_labels, std::size_t k);

std::vector<std::string> knn_predict(const Matrix& train_repr, const std::vector<std::string>& train_labels,
                                     const Matrix& test_repr, std::size_t k);

// ---------------------------------------------------------------------------
// Similarity and norm histograms
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<double> edges;          // bins + 1 edges
  std::vector<std::uint64_t> counts;  // bins

  std::uint64_t total() const;
};

// Equal-width bins over [lo, hi]; a degenerate range is widened by ±0.5.
Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi);
Histogram make_histogram(const std::vector<double>& values, std::size_t bins);

struct SimHistograms {
  Histogram pos;
  Histogram neg;
  double m_hat = 0.0;
  double pos_mean = 0.0;
  double pos_std = 0.0;
  double neg_mean = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Positives are σ(F_i, G_i); negatives σ(F_i, G_j) for `neg_sample` pairs
// i ≠ j drawn uniformly with the given seed. Both share one binning.
SimHistograms similarity_histograms(const Matrix& f, const Matrix& g, const SimilarityConfig& cfg, std::size_t bins,
                                    std::size_t neg_sample, std::uint64_t seed);

struct NormReport {
  Histogram histogram;
  double mean = 0.0;
  double std = 0.0;
};

// Statistics of ‖F_i‖ / ν (population standard deviation).
NormReport norm_report(const Matrix& f, double nu, std::size_t bins = 50);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values);

void to_json(nlohmann::json& j, const IdEstimate& e);
void to_json(nlohmann::json& j, const MatchReport& r);
void to_json(nlohmann::json& j, const Histogram& h);
void to_json(nlohmann::json& j, const SimHistograms& h);
void to_json(nlohmann::json& j, const NormReport& r);

// Two-column CSV: bin_left,count.
void write_histogram_csv(const std::string& path, const Histogram& h);

}  // namespace cliplab
