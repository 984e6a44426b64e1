#pragma once

#include <string>
#include <utility>

#include "cliplab/encoder.hpp"
#include "cliplab/matrix.hpp"
#include "cliplab/tape.hpp"

namespace cliplab {

struct PairedDataset;

enum class SimilarityKind { PopNormalizedInner, Cosine };

std::string to_string(SimilarityKind kind);
SimilarityKind similarity_kind_from_string(const std::string& name);

// How ν enters the tape. Its value always comes from the config; with Batch
// the derivative of E‖f(X)‖ is estimated by the batch mean norm, with
// Constant ν is treated as a fixed number.
enum class NormGradient { Batch, Constant };

std::string to_string(NormGradient mode);
NormGradient norm_gradient_from_string(const std::string& name);

// σ(u, v) = ⟨u, v⟩ / (ν_f ν_g) with ν the population mean norms, or plain
// cosine similarity. ν is ignored for cosine.
struct SimilarityConfig {
  SimilarityKind kind = SimilarityKind::PopNormalizedInner;
  double nu_f = 1.0;
  double nu_g = 1.0;
  NormGradient norm_gradient = NormGradient::Batch;
};

inline constexpr double kTauMin = 1e-4;
inline constexpr double kTauMax = 10.0;

// Temperature stored as θ = log τ; the effective τ is clamp(e^θ, τ_min, τ_max).
struct Temperature {
  double theta = 0.0;
  double tau_min = kTauMin;
  double tau_max = kTauMax;

  static Temperature from_tau(double tau);
};

double tau_value(const Temperature& t);

// τ as a tape node differentiable in the θ leaf.
Var tau_node(Tape& tape, Var theta, const Temperature& bounds);

// Holdout means of ‖f(X_i)‖ and ‖g(Y_i)‖. Throws DegenerateEncoderError when
// either mean falls below 1e-12.
std::pair<double, double> estimate_norms(const EncoderParams& f, const EncoderParams& g,
                                         const PairedDataset& holdout);

// Mean row norm of precomputed embeddings, same guards as estimate_norms.
double mean_norm(const Matrix& embeddings);

// s[i][j] = σ(U_i, V_j).
Matrix similarity_matrix(const Matrix& u, const Matrix& v, const SimilarityConfig& cfg);
Var similarity_matrix(Tape& tape, Var u, Var v, const SimilarityConfig& cfg);

// Symmetric infoNCE loss with the 1/N inside each denominator:
//   L = mean_i[lse_j s_ij/τ − s_ii/τ] + mean_i[lse_j s_ji/τ − s_ii/τ] − 2 log N.
double infonce_loss(const Matrix& s, double tau);
Var infonce_loss(Tape& tape, Var s, Var tau);

}  // namespace cliplab
