#include "cliplab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cliplab/errors.hpp"
#include "cliplab/rng.hpp"
#include "cliplab/synthdata.hpp"

namespace cliplab {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double distance(std::span<const double> a, std::span<const double> b) { return std::sqrt(squared_distance(a, b)); }

double coordinate_spread(const Matrix& points) {
  double spread = 0.0;
  for (std::size_t c = 0; c < points.cols(); ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = 0; r < points.rows(); ++r) {
      lo = std::min(lo, points(r, c));
      hi = std::max(hi, points(r, c));
    }
    spread = std::max(spread, hi - lo);
  }
  return spread > 0.0 ? spread : 1.0;
}

// Sorted distances to the k nearest other points of every row; 0 marks a duplicate.
std::vector<std::vector<double>> knn_distances(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  std::vector<std::vector<double>> out(n);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = points.row(i);
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d2[m++] = squared_distance(pi, points.row(j));
    }
    std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k), d2.begin() + static_cast<std::ptrdiff_t>(m));
    out[i].resize(k);
    for (std::size_t j = 0; j < k; ++j) out[i][j] = std::sqrt(d2[j]);
  }
  return out;
}

}  // namespace

IdEstimate id_mle(const Matrix& points, std::size_t k) {
  IdOptions o;
  o.k = k;
  return id_mle(points, o);
}

IdEstimate id_mle(const Matrix& points, const IdOptions& options) {
  const std::size_t n = points.rows();
  const std::size_t k = options.k;
  if (k < 2) throw ContractError("id_mle: k must be at least 2");
  if (k >= n) {
    throw ContractError("id_mle: k=" + std::to_string(k) + " needs more than " + std::to_string(n) + " points");
  }
  require_finite(points, "id_mle");

  Matrix cloud = points;
  auto neighbours = knn_distances(cloud, k);
  const auto has_duplicate = [&] {
    for (std::size_t i = 0; i < n; ++i)
      if (neighbours[i][0] == 0.0) return i + 1;
    return std::size_t{0};
  };
  if (std::size_t dup = has_duplicate()) {
    if (options.duplicates == DuplicatePolicy::Error) {
      throw InputError("id_mle: row " + std::to_string(dup - 1) +
                       " duplicates another point (zero nearest-neighbour distance); enable jitter to proceed");
    }
    add_jitter(cloud, options.jitter_scale * coordinate_spread(points), options.jitter_seed);
    neighbours = knn_distances(cloud, k);
    if (has_duplicate()) throw InputError("id_mle: duplicates persist after jitter");
  }

  IdEstimate est;
  est.k_neighbors = k;
  est.n_points = n;
  std::vector<double> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = neighbours[i];
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) acc += std::log(t[k - 1] / t[j]);
    if (!(acc > 0.0)) {
      throw InputError("id_mle: row " + std::to_string(i) + " has " + std::to_string(k) + " equidistant neighbours");
    }
    local[i] = static_cast<double>(k - 1) / acc;
  }
  if (options.averaging == IdAveraging::MeanOfLocal) {
    est.value = std::accumulate(local.begin(), local.end(), 0.0) / static_cast<double>(n);
  } else {
    double inv = 0.0;
    for (double m : local) inv += 1.0 / m;
    est.value = static_cast<double>(n) / inv;
  }
  if (options.keep_local) est.per_point_estimates = std::move(local);
  return est;
}

MatchReport topk_match_acc(const Matrix& f, const Matrix& g, double alpha) {
  if (f.rows() != g.rows() || f.cols() != g.cols()) throw DimensionError("topk_match_acc: F and G shapes differ");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("topk_match_acc: alpha must lie in (0, 1]");
  const std::size_t n = f.rows();
  if (n == 0) throw ContractError("topk_match_acc: empty representation set");
  // Guard against αN landing a hair above an integer through rounding (α = 1/N).
  const auto top = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  if (top < 1) throw ContractError("topk_match_acc: ceil(alpha * N) must be at least 1");

  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = f.row(i);
    const double own = distance(fi, g.row(i));
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n && rank < top; ++j) {
      if (j == i) continue;
      const double d = distance(fi, g.row(j));
      if (d < own || (d == own && j < i)) ++rank;
    }
    if (rank < top) ++hits;
  }
  return MatchReport{alpha, static_cast<double>(hits) / static_cast<double>(n), n, top};
}

std::vector<std::string> knn_predict(const Matrix& train_repr, const std::vector<std::string>& train_labels,
                                     const Matrix& test_repr, std::size_t k) {
  if (train_repr.rows() == 0) throw ContractError("knn_classify: empty training set");
  if (train_labels.size() != train_repr.rows()) throw ContractError("knn_classify: label count mismatch");
  if (k == 0 || k > train_repr.rows()) throw ContractError("knn_classify: k must lie in [1, train size]");
  if (train_repr.cols() != test_repr.cols()) throw DimensionError("knn_classify: representation widths differ");

  const std::size_t n = train_repr.rows();
  std::vector<std::string> predictions;
  predictions.reserve(test_repr.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t t = 0; t < test_repr.rows(); ++t) {
    const auto q = test_repr.row(t);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {distance(q, train_repr.row(i)), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    struct Vote {
      std::size_t count = 0;
      double distance = 0.0;
    };
    std::map<std::string, Vote> votes;
    for (std::size_t r = 0; r < k; ++r) {
      auto& v = votes[train_labels[dist[r].second]];
      ++v.count;
      v.distance += dist[r].first;
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      // std::map iterates labels in increasing order, so strict comparisons keep the smallest label.
      if (it->second.count > best->second.count ||
          (it->second.count == best->second.count && it->second.distance < best->second.distance)) {
        best = it;
      }
    }
    predictions.push_back(best->first);
  }
  return predictions;
}

double knn_classify(const Matrix& train_repr, const std::vector<std::string>& train_labels, const Matrix& test_repr,
                    const std::vector<std::string>& test_labels, std::size_t k) {
  if (test_labels.size() != test_repr.rows()) throw ContractError("knn_classify: test label count mismatch");
  if (test_repr.rows() == 0) throw ContractError("knn_classify: empty test set");
  const auto pred = knn_predict(train_repr, train_labels, test_repr, k);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test_labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::uint64_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw ContractError("histogram: need at least one bin");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    double pos = std::floor((v - lo) / width);
    pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
    ++h.counts[static_cast<std::size_t>(pos)];
  }
  return h;
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
  if (values.empty()) return make_histogram(values, bins, 0.0, 1.0);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return make_histogram(values, bins, *lo, *hi);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

SimHistograms similarity_histograms(const Matrix& f, const Matrix& g, const SimilarityConfig& cfg, std::size_t bins,
                                    std::size_t neg_sample, std::uint64_t seed) {
  if (f.rows() != g.rows() || f.cols() != g.cols()) throw DimensionError("similarity_histograms: F and G differ");
  const std::size_t n = f.rows();
  if (n < 2 && neg_sample > 0) throw ContractError("similarity_histograms: need at least 2 rows for negatives");

  // Row-normalized copies make cosine a plain inner product.
  Matrix u = f;
  Matrix v = g;
  double scale = 1.0;
  if (cfg.kind == SimilarityKind::Cosine) {
    for (Matrix* m : {&u, &v}) {
      const Matrix norms = row_norms(*m);
      for (std::size_t i = 0; i < m->rows(); ++i) {
        if (norms(i, 0) == 0.0) throw InputError("cosine similarity: zero row " + std::to_string(i));
        for (double& x : m->row(i)) x /= norms(i, 0);
      }
    }
  } else {
    if (!(cfg.nu_f > 0.0 && cfg.nu_g > 0.0)) throw ContractError("similarity: population norms must be positive");
    scale = 1.0 / (cfg.nu_f * cfg.nu_g);
  }
  auto sim = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    const auto a = u.row(i);
    const auto b = v.row(j);
    for (std::size_t c = 0; c < a.size(); ++c) acc += a[c] * b[c];
    return acc * scale;
  };

  std::vector<double> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = sim(i, i);
  std::vector<double> neg(neg_sample);
  Rng rng(seed);
  for (std::size_t s = 0; s < neg_sample; ++s) {
    const auto i = static_cast<std::size_t>(rng.below(n));
    auto j = static_cast<std::size_t>(rng.below(n - 1));
    if (j >= i) ++j;
    neg[s] = sim(i, j);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* vals : {&pos, &neg}) {
    for (double x : *vals) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (pos.empty() && neg.empty()) lo = hi = 0.0;

  SimHistograms out;
  out.pos = make_histogram(pos, bins, lo, hi);
  out.neg = make_histogram(neg, bins, lo, hi);
  out.m_hat = hi;
  const auto ps = mean_std(pos);
  out.pos_mean = ps.mean;
  out.pos_std = ps.std;
  out.neg_mean = mean_std(neg).mean;
  out.n_pos = pos.size();
  out.n_neg = neg.size();
  return out;
}

NormReport norm_report(const Matrix& f, double nu, std::size_t bins) {
  if (!(nu > 0.0)) throw ContractError("norm_report: nu must be positive");
  const Matrix norms = row_norms(f);
  std::vector<double> ratios(norms.rows());
  for (std::size_t i = 0; i < ratios.size(); ++i) ratios[i] = norms(i, 0) / nu;
  NormReport r;
  r.histogram = make_histogram(ratios, bins);
  const auto ms = mean_std(ratios);
  r.mean = ms.mean;
  r.std = ms.std;
  return r;
}

void to_json(nlohmann::json& j, const IdEstimate& e) {
  j = {{"value", e.value}, {"k_neighbors", e.k_neighbors}, {"n_points", e.n_points}};
  if (!e.per_point_estimates.empty()) j["per_point_estimates"] = e.per_point_estimates;
}

void to_json(nlohmann::json& j, const MatchReport& r) {
  j = {{"alpha", r.alpha}, {"acc", r.acc}, {"n", r.n}, {"top", r.top}};
}

void to_json(nlohmann::json& j, const Histogram& h) { j = {{"edges", h.edges}, {"counts", h.counts}}; }

void to_json(nlohmann::json& j, const SimHistograms& h) {
  j = {{"pos", h.pos},           {"neg", h.neg},         {"m_hat", h.m_hat}, {"pos_mean", h.pos_mean},
       {"pos_std", h.pos_std},   {"neg_mean", h.neg_mean}, {"n_pos", h.n_pos}, {"n_neg", h.n_neg}};
}

void to_json(nlohmann::json& j, const NormReport& r) {
  j = {{"histogram", r.histogram}, {"mean", r.mean}, {"std", r.std}};
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "bin_left,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) out << format_double(h.edges[b]) << ',' << h.counts[b] << '\n';
}

}  // namespace cliplab
