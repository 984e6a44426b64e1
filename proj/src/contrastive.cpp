#include "cliplab/contrastive.hpp"

#include <cmath>

#include "cliplab/errors.hpp"
#include "cliplab/synthdata.hpp"

namespace cliplab {

std::string to_string(SimilarityKind kind) {
  return kind == SimilarityKind::Cosine ? "cosine" : "pop_normalized_inner";
}

SimilarityKind similarity_kind_from_string(const std::string& name) {
  if (name == "pop_normalized_inner" || name == "inner") return SimilarityKind::PopNormalizedInner;
  if (name == "cosine") return SimilarityKind::Cosine;
  throw ContractError("unknown similarity kind '" + name + "'");
}

Temperature Temperature::from_tau(double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  Temperature t;
  t.theta = std::log(tau);
  return t;
}

double tau_value(const Temperature& t) {
  const double tau = std::exp(t.theta);
  return tau < t.tau_min ? t.tau_min : (tau > t.tau_max ? t.tau_max : tau);
}

Var tau_node(Tape& tape, Var theta, const Temperature& bounds) {
  return tape.clamp(tape.exp(theta), bounds.tau_min, bounds.tau_max);
}

double mean_norm(const Matrix& embeddings) {
  if (embeddings.rows() == 0) throw ContractError("mean_norm: no rows");
  const Matrix norms = row_norms(embeddings);
  const double nu = sum(norms) / static_cast<double>(norms.rows());
  if (!(nu >= 1e-12)) throw DegenerateEncoderError("mean embedding norm " + std::to_string(nu) + " is degenerate");
  return nu;
}

std::pair<double, double> estimate_norms(const EncoderParams& f, const EncoderParams& g,
                                         const PairedDataset& holdout) {
  if (holdout.size() == 0) throw ContractError("estimate_norms: empty holdout");
  return {mean_norm(mlp_forward(f, holdout.x)), mean_norm(mlp_forward(g, holdout.y))};
}

namespace {

void check_config(const SimilarityConfig& cfg) {
  if (cfg.kind == SimilarityKind::PopNormalizedInner && !(cfg.nu_f > 0.0 && cfg.nu_g > 0.0)) {
    throw ContractError("similarity: population norms must be positive");
  }
}

void check_rows_nonzero(const Matrix& norms, const char* which) {
  for (std::size_t i = 0; i < norms.rows(); ++i) {
    if (norms(i, 0) == 0.0) {
      throw InputError(std::string("cosine similarity: zero row ") + std::to_string(i) + " in " + which);
    }
  }
}

}  // namespace

Matrix similarity_matrix(const Matrix& u, const Matrix& v, const SimilarityConfig& cfg) {
  if (u.cols() != v.cols()) throw DimensionError("similarity_matrix: embedding widths differ");
  check_config(cfg);
  Matrix s = matmul_nt(u, v);
  if (cfg.kind == SimilarityKind::PopNormalizedInner) {
    const double scale = 1.0 / (cfg.nu_f * cfg.nu_g);
    for (double& x : s.values()) x *= scale;
    return s;
  }
  const Matrix nu = row_norms(u);
  const Matrix nv = row_norms(v);
  check_rows_nonzero(nu, "U");
  check_rows_nonzero(nv, "V");
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) s(i, j) /= nu(i, 0) * nv(j, 0);
  return s;
}

std::string to_string(NormGradient mode) {
  return mode == NormGradient::Batch ? "batch" : "constant";
}

NormGradient norm_gradient_from_string(const std::string& name) {
  if (name == "batch") return NormGradient::Batch;
  if (name == "constant") return NormGradient::Constant;
  throw InputError("unknown norm gradient mode '" + name + "' (expected batch or constant)");
}

Var similarity_matrix(Tape& tape, Var u, Var v, const SimilarityConfig& cfg) {
  if (tape.value(u).cols() != tape.value(v).cols()) throw DimensionError("similarity_matrix: embedding widths differ");
  check_config(cfg);
  if (cfg.kind == SimilarityKind::PopNormalizedInner) {
    const Var inner = tape.matmul(u, tape.transpose(v));
    if (cfg.norm_gradient == NormGradient::Constant) return tape.affine(inner, 1.0 / (cfg.nu_f * cfg.nu_g), 0.0);
    // ν·(m/m̄) with m̄ the detached batch mean norm: the value stays ν and
    // the gradient is ν/m̄ times that of the batch estimate.
    auto norm = [&](Var e, double nu) {
      const Var m = tape.mean(tape.row_norm(e));
      const double mv = tape.value(m).item();
      if (!(mv > 0.0)) throw DegenerateEncoderError("similarity_matrix: batch embeddings are all zero");
      return tape.affine(m, nu / mv, 0.0);
    };
    return tape.div_scalar(tape.div_scalar(inner, norm(u, cfg.nu_f)), norm(v, cfg.nu_g));
  }
  const Var nu = tape.row_norm(u);
  const Var nv = tape.row_norm(v);
  check_rows_nonzero(tape.value(nu), "U");
  check_rows_nonzero(tape.value(nv), "V");
  return tape.matmul(tape.div_rows(u, nu), tape.transpose(tape.div_rows(v, nv)));
}

double infonce_loss(const Matrix& s, double tau) {
  if (!(tau > 0.0)) throw ContractError("infonce_loss: temperature must be positive");
  if (s.rows() != s.cols() || s.rows() == 0) throw DimensionError("infonce_loss: similarity matrix must be square");
  const std::size_t n = s.rows();
  Matrix scaled = s;
  for (double& x : scaled.values()) x /= tau;
  const Matrix row_lse = logsumexp_rows(scaled);
  const Matrix col_lse = logsumexp_rows(transpose(scaled));
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += row_lse(i, 0) + col_lse(i, 0) - 2.0 * scaled(i, i);
  return acc / static_cast<double>(n) - 2.0 * std::log(static_cast<double>(n));
}

Var infonce_loss(Tape& tape, Var s, Var tau) {
  const Matrix& sv = tape.value(s);
  if (sv.rows() != sv.cols() || sv.rows() == 0) throw DimensionError("infonce_loss: similarity matrix must be square");
  if (!(tape.value(tau).item() > 0.0)) throw ContractError("infonce_loss: temperature must be positive");
  const double n = static_cast<double>(sv.rows());
  const Var logits = tape.div_scalar(s, tau);
  const Var rows = tape.mean(tape.logsumexp_rows(logits));
  const Var cols = tape.mean(tape.logsumexp_rows(tape.transpose(logits)));
  const Var diag = tape.mean(tape.diag(logits));
  const Var both = tape.add(rows, cols);
  return tape.affine(tape.sub(both, tape.affine(diag, 2.0, 0.0)), 1.0, -2.0 * std::log(n));
}

}  // namespace cliplab
