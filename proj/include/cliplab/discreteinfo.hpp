#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cliplab/contrastive.hpp"
#include "cliplab/matrix.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

// Exact information quantities for joint laws on finitely many atoms. All
// logarithms are natural; 0·log 0 = 0 and a failure of absolute continuity
// yields +∞ rather than an error.

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Joint law p over (atoms_u[i], atoms_v[j]).
struct DiscreteJoint {
  Matrix atoms_u;  // m × d
  Matrix atoms_v;  // n × d
  Matrix p;        // m × n

  // Throws ContractError unless p ≥ 0, Σp = 1 (to 1e-12) and atom counts match.
  void validate() const;

  std::vector<double> marginal_u() const;  // row sums
  std::vector<double> marginal_v() const;  // column sums
};

// Joint that is exactly p_u ⊗ p_v.
Matrix product_joint(const std::vector<double>& pu, const std::vector<double>& pv);

double discrete_mi(const DiscreteJoint& j);
double discrete_mi(const Matrix& p);

// Σ p log(p/q); +∞ when some p_ij > 0 has q_ij = 0. Shapes must match.
double kl_div(const Matrix& p, const Matrix& q);
double kl_div(const DiscreteJoint& p, const DiscreteJoint& q);

// Population-normalized similarity table σ(u_i, v_j) with ν taken as the
// expected atom norms under the joint's marginals (cosine: plain cosine).
Matrix similarity_table(const DiscreteJoint& j, SimilarityKind kind = SimilarityKind::PopNormalizedInner);

// Exponentially tilted joints built from P's marginals:
//   q(u_i | v_j) ∝ p_U(u_i) e^{σ_ij/τ},  Q = q(u|v) ⊗ P_V
//   q̃(v_j | u_i) ∝ p_V(v_j) e^{σ_ij/τ}, Q̃ = q̃(v|u) ⊗ P_U
struct SmoothedPair {
  Matrix q;
  Matrix q_tilde;
  double tau = 1.0;
};

SmoothedPair smoothed_pair(const DiscreteJoint& j, const Matrix& sim, double tau);

// Population infoNCE loss with expectations as finite sums:
//   −E_P[σ/τ − log E_{V'} e^{σ(U,V')/τ}] − E_P[σ/τ − log E_{U'} e^{σ(U',V)/τ}].
double discrete_infonce(const DiscreteJoint& j, const Matrix& sim, double tau);

struct DecompositionReport {
  double loss = 0.0;
  double mi = 0.0;
  double kl_q = 0.0;        // KL(P ‖ Q_τ)
  double kl_q_tilde = 0.0;  // KL(P ‖ Q̃_τ)
  double residual = 0.0;    // |L + 2I − KL(P‖Q_τ) − KL(P‖Q̃_τ)|
};

DecompositionReport decompose(const DiscreteJoint& j, const Matrix& sim, double tau);
double decomposition_residual(const DiscreteJoint& j, const Matrix& sim, double tau);

// Δ(τ) = ½ KL(P‖Q_τ) + ½ KL(P‖Q̃_τ) for every τ in `taus`.
std::vector<double> delta_curve(const DiscreteJoint& j, const Matrix& sim, const std::vector<double>& taus);

// Random joint on m × n atoms in ℝ^d: atoms iid N(0, I), probabilities from
// exponential weights with roughly `zero_fraction` of the cells set to 0.
DiscreteJoint random_joint(std::size_t m, std::size_t n, std::size_t d, Rng& rng, double zero_fraction = 0.2);

// ---------------------------------------------------------------------------
// Discretization of the ball of radius r in ℝ^d (d ≤ 3)
// ---------------------------------------------------------------------------

struct BallCell {
  std::vector<std::size_t> grid;  // per-axis cell index
  std::vector<double> lower;      // lower corner
  std::vector<double> center;     // representative point
};

// Axis-aligned grid over [−r, r]^d keeping the cells that meet the closed
// ball. Cells are half-open except on the upper face of the box.
struct BallPartition {
  std::size_t d = 1;
  double radius = 1.0;
  std::size_t cells_per_axis = 1;
  double cell_width = 2.0;
  double cell_volume = 2.0;  // Δ_M, shared by every interior cell
  std::vector<BallCell> cells;
  std::vector<std::int64_t> lookup;  // flattened grid index → cell index or −1

  std::size_t size() const noexcept { return cells.size(); }
  double max_cell_diameter() const;
};

BallPartition ball_partition(std::size_t d, double radius, std::size_t cells_per_axis);

struct CellLabels {
  std::vector<std::size_t> labels;
  std::size_t clamped = 0;  // rows that lay outside the ball and were pulled in
};

CellLabels discretize_embeddings(const Matrix& points, const BallPartition& part);

// Plug-in MI of the empirical joint frequency table.
double plugin_mi(const std::vector<std::size_t>& labels_u, const std::vector<std::size_t>& labels_v);

// Per-axis quantile binning for embeddings of any dimension; labels combine
// the axis bins in mixed radix. Outside the ball construction, an approximation.
std::vector<std::size_t> quantile_bin(const Matrix& points, std::size_t bins_per_axis);

// Density known through its exact cell masses.
struct DensityDescriptor {
  std::string name;
  std::function<double(const BallCell&, const BallPartition&)> cell_mass;
  double differential_entropy = 0.0;
};

// p(x) = 1 on [0, 1] (differential entropy 0).
DensityDescriptor uniform_unit_interval();
// p(x) = 2x on [0, 1] (differential entropy 1/2 − log 2).
DensityDescriptor linear_ramp_unit_interval();

struct EntropyCheck {
  double discrete_entropy = 0.0;  // H(U_M)
  double log_cell_volume = 0.0;   // log Δ_M
  double approximation = 0.0;     // H(U_M) + log Δ_M
  double target = 0.0;            // differential entropy
  double error() const { return approximation - target; }
};

EntropyCheck entropy_discretization_check(const DensityDescriptor& density, const BallPartition& part);

}  // namespace cliplab
