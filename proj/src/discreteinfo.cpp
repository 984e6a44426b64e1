#include "cliplab/discreteinfo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cliplab/errors.hpp"

namespace cliplab {

void DiscreteJoint::validate() const {
  if (p.rows() == 0 || p.cols() == 0) throw ContractError("joint: empty probability table");
  if (atoms_u.rows() != p.rows() || atoms_v.rows() != p.cols()) {
    throw ContractError("joint: atom counts do not match the probability table");
  }
  if (atoms_u.cols() != atoms_v.cols()) throw ContractError("joint: atoms live in different dimensions");
  double total = 0.0;
  for (double v : p.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("joint: probabilities must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("joint: probabilities sum to " + std::to_string(total));
}

std::vector<double> DiscreteJoint::marginal_u() const {
  std::vector<double> m(p.rows(), 0.0);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) m[i] += p(i, j);
  return m;
}

std::vector<double> DiscreteJoint::marginal_v() const {
  std::vector<double> m(p.cols(), 0.0);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) m[j] += p(i, j);
  return m;
}

Matrix product_joint(const std::vector<double>& pu, const std::vector<double>& pv) {
  Matrix out(pu.size(), pv.size());
  for (std::size_t i = 0; i < pu.size(); ++i)
    for (std::size_t j = 0; j < pv.size(); ++j) out(i, j) = pu[i] * pv[j];
  return out;
}

double discrete_mi(const Matrix& p) {
  if (p.rows() == 0 || p.cols() == 0) throw ContractError("discrete_mi: empty table");
  std::vector<double> pu(p.rows(), 0.0);
  std::vector<double> pv(p.cols(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (!(p(i, j) >= 0.0)) throw ContractError("discrete_mi: negative probability");
      pu[i] += p(i, j);
      pv[j] += p(i, j);
      total += p(i, j);
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("discrete_mi: probabilities sum to " + std::to_string(total));
  double mi = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0.0) mi += p(i, j) * std::log(p(i, j) / (pu[i] * pv[j]));
  return mi;
}

double discrete_mi(const DiscreteJoint& j) {
  j.validate();
  return discrete_mi(j.p);
}

double kl_div(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw ContractError("kl_div: supports do not match");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = p.values()[k];
    const double b = q.values()[k];
    if (a < 0.0 || b < 0.0) throw ContractError("kl_div: negative probability");
    if (a == 0.0) continue;
    if (b == 0.0) return kInfinity;
    kl += a * std::log(a / b);
  }
  return kl;
}

double kl_div(const DiscreteJoint& p, const DiscreteJoint& q) {
  p.validate();
  q.validate();
  return kl_div(p.p, q.p);
}

Matrix similarity_table(const DiscreteJoint& j, SimilarityKind kind) {
  j.validate();
  SimilarityConfig cfg{kind, 1.0, 1.0};
  if (kind == SimilarityKind::PopNormalizedInner) {
    const auto pu = j.marginal_u();
    const auto pv = j.marginal_v();
    const Matrix nu = row_norms(j.atoms_u);
    const Matrix nv = row_norms(j.atoms_v);
    double ef = 0.0;
    double eg = 0.0;
    for (std::size_t i = 0; i < pu.size(); ++i) ef += pu[i] * nu(i, 0);
    for (std::size_t k = 0; k < pv.size(); ++k) eg += pv[k] * nv(k, 0);
    if (!(ef > 0.0 && eg > 0.0)) throw DegenerateEncoderError("similarity_table: zero expected norm");
    cfg.nu_f = ef;
    cfg.nu_g = eg;
  }
  return similarity_matrix(j.atoms_u, j.atoms_v, cfg);
}

namespace {

void check_inputs(const DiscreteJoint& j, const Matrix& sim, double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  j.validate();
  if (sim.rows() != j.p.rows() || sim.cols() != j.p.cols()) throw DimensionError("similarity table shape mismatch");
  require_finite(sim, "similarity table");
}

// log Σ_k w_k e^{x_k} over entries with w_k > 0.
template <typename WeightAt, typename ExponentAt>
double weighted_lse(std::size_t count, WeightAt weight, ExponentAt exponent) {
  double m = -kInfinity;
  for (std::size_t k = 0; k < count; ++k)
    if (weight(k) > 0.0) m = std::max(m, std::log(weight(k)) + exponent(k));
  if (m == -kInfinity) return m;
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k)
    if (weight(k) > 0.0) acc += std::exp(std::log(weight(k)) + exponent(k) - m);
  return m + std::log(acc);
}

}  // namespace

SmoothedPair smoothed_pair(const DiscreteJoint& j, const Matrix& sim, double tau) {
  check_inputs(j, sim, tau);
  const auto pu = j.marginal_u();
  const auto pv = j.marginal_v();
  const std::size_t m = pu.size();
  const std::size_t n = pv.size();
  SmoothedPair out{Matrix(m, n), Matrix(m, n), tau};

  for (std::size_t c = 0; c < n; ++c) {
    if (pv[c] == 0.0) continue;
    const double lse = weighted_lse(m, [&](std::size_t k) { return pu[k]; },
                                    [&](std::size_t k) { return sim(k, c) / tau; });
    for (std::size_t r = 0; r < m; ++r) {
      if (pu[r] == 0.0) continue;
      out.q(r, c) = std::exp(std::log(pu[r]) + sim(r, c) / tau - lse) * pv[c];
    }
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (pu[r] == 0.0) continue;
    const double lse = weighted_lse(n, [&](std::size_t k) { return pv[k]; },
                                    [&](std::size_t k) { return sim(r, k) / tau; });
    for (std::size_t c = 0; c < n; ++c) {
      if (pv[c] == 0.0) continue;
      out.q_tilde(r, c) = std::exp(std::log(pv[c]) + sim(r, c) / tau - lse) * pu[r];
    }
  }
  return out;
}

double discrete_infonce(const DiscreteJoint& j, const Matrix& sim, double tau) {
  check_inputs(j, sim, tau);
  const auto pu = j.marginal_u();
  const auto pv = j.marginal_v();
  const std::size_t m = pu.size();
  const std::size_t n = pv.size();

  // log E_{V'} exp(σ(u_i, V')/τ) and log E_{U'} exp(σ(U', v_j)/τ)
  std::vector<double> row_norm(m, 0.0);
  std::vector<double> col_norm(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (pu[r] > 0.0) {
      row_norm[r] = weighted_lse(n, [&](std::size_t k) { return pv[k]; },
                                 [&](std::size_t k) { return sim(r, k) / tau; });
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (pv[c] > 0.0) {
      col_norm[c] = weighted_lse(m, [&](std::size_t k) { return pu[k]; },
                                 [&](std::size_t k) { return sim(k, c) / tau; });
    }
  }
  double first = 0.0;
  double second = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double p = j.p(r, c);
      if (p == 0.0) continue;
      first += p * (sim(r, c) / tau - row_norm[r]);
      second += p * (sim(r, c) / tau - col_norm[c]);
    }
  }
  return -first - second;
}

DecompositionReport decompose(const DiscreteJoint& j, const Matrix& sim, double tau) {
  DecompositionReport rep;
  rep.loss = discrete_infonce(j, sim, tau);
  rep.mi = discrete_mi(j.p);
  const auto pair = smoothed_pair(j, sim, tau);
  rep.kl_q = kl_div(j.p, pair.q);
  rep.kl_q_tilde = kl_div(j.p, pair.q_tilde);
  rep.residual = std::abs(rep.loss + 2.0 * rep.mi - rep.kl_q - rep.kl_q_tilde);
  return rep;
}

double decomposition_residual(const DiscreteJoint& j, const Matrix& sim, double tau) {
  return decompose(j, sim, tau).residual;
}

std::vector<double> delta_curve(const DiscreteJoint& j, const Matrix& sim, const std::vector<double>& taus) {
  std::vector<double> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    const auto pair = smoothed_pair(j, sim, tau);
    out.push_back(0.5 * kl_div(j.p, pair.q) + 0.5 * kl_div(j.p, pair.q_tilde));
  }
  return out;
}

DiscreteJoint random_joint(std::size_t m, std::size_t n, std::size_t d, Rng& rng, double zero_fraction) {
  if (m == 0 || n == 0 || d == 0) throw ContractError("random_joint: sizes must be positive");
  DiscreteJoint j;
  j.atoms_u = Matrix(m, d);
  j.atoms_v = Matrix(n, d);
  for (double& v : j.atoms_u.values()) v = rng.normal();
  for (double& v : j.atoms_v.values()) v = rng.normal();
  j.p = Matrix(m, n);
  double total = 0.0;
  for (double& v : j.p.values()) {
    const bool zero = rng.uniform() < zero_fraction;
    const double w = -std::log(1.0 - rng.uniform());
    v = zero ? 0.0 : w;
    total += v;
  }
  if (total == 0.0) {
    j.p(0, 0) = 1.0;
    total = 1.0;
  }
  for (double& v : j.p.values()) v /= total;
  return j;
}

double BallPartition::max_cell_diameter() const { return cell_width * std::sqrt(static_cast<double>(d)); }

BallPartition ball_partition(std::size_t d, double radius, std::size_t cells_per_axis) {
  if (d == 0) throw ContractError("ball_partition: dimension must be positive");
  if (d > 3) throw ContractError("ball_partition: dimension " + std::to_string(d) + " unsupported (at most 3)");
  if (cells_per_axis == 0) throw ContractError("ball_partition: need at least one cell per axis");
  if (!(radius > 0.0)) throw ContractError("ball_partition: radius must be positive");

  BallPartition part;
  part.d = d;
  part.radius = radius;
  part.cells_per_axis = cells_per_axis;
  part.cell_width = 2.0 * radius / static_cast<double>(cells_per_axis);
  part.cell_volume = std::pow(part.cell_width, static_cast<double>(d));

  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) total *= cells_per_axis;
  part.lookup.assign(total, -1);
  for (std::size_t flat = 0; flat < total; ++flat) {
    BallCell cell;
    std::size_t rest = flat;
    double closest = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t g = rest % cells_per_axis;
      rest /= cells_per_axis;
      const double lo = -radius + part.cell_width * static_cast<double>(g);
      const double hi = g + 1 == cells_per_axis ? radius : lo + part.cell_width;
      cell.grid.push_back(g);
      cell.lower.push_back(lo);
      cell.center.push_back(0.5 * (lo + hi));
      const double c = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
      closest += c * c;
    }
    if (closest <= radius * radius) {
      part.lookup[flat] = static_cast<std::int64_t>(part.cells.size());
      part.cells.push_back(std::move(cell));
    }
  }
  return part;
}

CellLabels discretize_embeddings(const Matrix& points, const BallPartition& part) {
  if (points.cols() != part.d) throw DimensionError("discretize_embeddings: point dimension differs from partition");
  CellLabels out;
  out.labels.reserve(points.rows());
  std::vector<double> x(part.d);
  for (std::size_t r = 0; r < points.rows(); ++r) {
    double norm2 = 0.0;
    for (std::size_t a = 0; a < part.d; ++a) {
      x[a] = points(r, a);
      norm2 += x[a] * x[a];
    }
    if (norm2 > part.radius * part.radius) {
      const double shrink = part.radius / std::sqrt(norm2);
      for (double& v : x) v *= shrink;
      ++out.clamped;
    }
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (std::size_t a = 0; a < part.d; ++a) {
      double g = std::floor((x[a] + part.radius) / part.cell_width);
      g = std::clamp(g, 0.0, static_cast<double>(part.cells_per_axis - 1));
      flat += static_cast<std::size_t>(g) * stride;
      stride *= part.cells_per_axis;
    }
    std::int64_t cell = part.lookup[flat];
    if (cell < 0) {
      // Rounding put a surface point in a cell outside the ball: take the nearest kept cell.
      double best = kInfinity;
      for (std::size_t c = 0; c < part.cells.size(); ++c) {
        double dist = 0.0;
        for (std::size_t a = 0; a < part.d; ++a) dist += (part.cells[c].center[a] - x[a]) * (part.cells[c].center[a] - x[a]);
        if (dist < best) {
          best = dist;
          cell = static_cast<std::int64_t>(c);
        }
      }
    }
    out.labels.push_back(static_cast<std::size_t>(cell));
  }
  return out;
}

double plugin_mi(const std::vector<std::size_t>& labels_u, const std::vector<std::size_t>& labels_v) {
  if (labels_u.size() != labels_v.size()) throw ContractError("plugin_mi: label lists differ in length");
  if (labels_u.empty()) throw ContractError("plugin_mi: no observations");
  std::map<std::size_t, std::size_t> iu;
  std::map<std::size_t, std::size_t> iv;
  for (std::size_t l : labels_u) iu.emplace(l, iu.size());
  for (std::size_t l : labels_v) iv.emplace(l, iv.size());
  Matrix counts(iu.size(), iv.size());
  for (std::size_t k = 0; k < labels_u.size(); ++k) counts(iu[labels_u[k]], iv[labels_v[k]]) += 1.0;
  const double n = static_cast<double>(labels_u.size());
  for (double& c : counts.values()) c /= n;
  // Division by n leaves the total within rounding of 1; renormalize exactly enough for the validator.
  const double total = sum(counts);
  for (double& c : counts.values()) c /= total;
  return discrete_mi(counts);
}

std::vector<std::size_t> quantile_bin(const Matrix& points, std::size_t bins_per_axis) {
  if (bins_per_axis == 0) throw ContractError("quantile_bin: need at least one bin");
  const std::size_t n = points.rows();
  std::vector<std::size_t> labels(n, 0);
  std::size_t stride = 1;
  std::vector<double> column(n);
  for (std::size_t a = 0; a < points.cols(); ++a) {
    for (std::size_t r = 0; r < n; ++r) column[r] = points(r, a);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (std::size_t b = 1; b < bins_per_axis && n > 0; ++b) cuts.push_back(sorted[b * n / bins_per_axis]);
    for (std::size_t r = 0; r < n; ++r) {
      const auto bin = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), column[r]) - cuts.begin());
      labels[r] += std::min(bin, bins_per_axis - 1) * stride;
    }
    stride *= bins_per_axis;
  }
  return labels;
}

namespace {

// Mass of [a, b] under a density on [0, 1] with CDF `cdf`.
double interval_mass(double a, double b, double (*cdf)(double)) {
  auto clip = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return cdf(clip(b)) - cdf(clip(a));
}

double upper_edge(const BallCell& cell, const BallPartition& part) {
  return cell.grid[0] + 1 == part.cells_per_axis ? part.radius : cell.lower[0] + part.cell_width;
}

}  // namespace

DensityDescriptor uniform_unit_interval() {
  return DensityDescriptor{"uniform[0,1]",
                           [](const BallCell& cell, const BallPartition& part) {
                             if (part.d != 1) throw ContractError("uniform[0,1] density needs d = 1");
                             return interval_mass(cell.lower[0], upper_edge(cell, part), [](double x) { return x; });
                           },
                           0.0};
}

DensityDescriptor linear_ramp_unit_interval() {
  return DensityDescriptor{"2x on [0,1]",
                           [](const BallCell& cell, const BallPartition& part) {
                             if (part.d != 1) throw ContractError("linear ramp density needs d = 1");
                             return interval_mass(cell.lower[0], upper_edge(cell, part), [](double x) { return x * x; });
                           },
                           0.5 - std::log(2.0)};
}

EntropyCheck entropy_discretization_check(const DensityDescriptor& density, const BallPartition& part) {
  EntropyCheck out;
  double total = 0.0;
  for (const auto& cell : part.cells) {
    const double mass = density.cell_mass(cell, part);
    if (mass < 0.0) throw ContractError("entropy check: negative cell mass");
    total += mass;
    if (mass > 0.0) out.discrete_entropy -= mass * std::log(mass);
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("entropy check: cell masses sum to " + std::to_string(total));
  out.log_cell_volume = std::log(part.cell_volume);
  out.approximation = out.discrete_entropy + out.log_cell_volume;
  out.target = density.differential_entropy;
  return out;
}

}  // namespace cliplab
