#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cliplab/discreteinfo.hpp"
#include "cliplab/errors.hpp"
#include "test_support.hpp"

using namespace cliplab;

namespace {

// Independent assembly of both sides of the decomposition, straight from the
// definitions with plain exponentials (no log-domain tricks).
struct Sides {
  double loss;
  double mi;
  double kl1;
  double kl2;
};

Sides oracle(const Matrix& p, const Matrix& sim, double tau) {
  const std::size_t m = p.rows();
  const std::size_t n = p.cols();
  std::vector<double> pu(m, 0.0);
  std::vector<double> pv(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      pu[i] += p(i, j);
      pv[j] += p(i, j);
    }
  std::vector<double> row_mean(m, 0.0);  // E_{V'} e^{σ(u_i, V')/τ}
  std::vector<double> col_mean(n, 0.0);  // E_{U'} e^{σ(U', v_j)/τ}
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += pv[j] * std::exp(sim(i, j) / tau);
      col_mean[j] += pu[i] * std::exp(sim(i, j) / tau);
    }
  Sides s{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (p(i, j) == 0.0) continue;
      const double e = std::exp(sim(i, j) / tau);
      s.loss -= p(i, j) * (std::log(e / row_mean[i]) + std::log(e / col_mean[j]));
      s.mi += p(i, j) * std::log(p(i, j) / (pu[i] * pv[j]));
      const double q = pu[i] * e / col_mean[j] * pv[j];
      const double qt = pv[j] * e / row_mean[i] * pu[i];
      s.kl1 += p(i, j) * std::log(p(i, j) / q);
      s.kl2 += p(i, j) * std::log(p(i, j) / qt);
    }
  return s;
}

DiscreteJoint diagonal_joint(const std::vector<double>& w, const Matrix& atoms) {
  DiscreteJoint j;
  j.atoms_u = atoms;
  j.atoms_v = atoms;
  j.p = Matrix(w.size(), w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) j.p(i, i) = w[i];
  return j;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace

TEST_CASE("mutual information examples") {
  CHECK(discrete_mi(product_joint({0.3, 0.7}, {0.2, 0.5, 0.3})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(discrete_mi(product_joint({0.3, 0.7}, {0.2, 0.5, 0.3}))) < 1e-15);
  CHECK(discrete_mi(Matrix{{0.5, 0.0}, {0.0, 0.5}}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double expected = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  CHECK(discrete_mi(Matrix{{0.4, 0.1}, {0.1, 0.4}}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.192745).epsilon(1e-6));

  DiscreteJoint bad{Matrix(2, 1), Matrix(2, 1), Matrix{{0.5, 0.6}, {0.0, 0.0}}};
  CHECK_THROWS_AS(discrete_mi(bad), ContractError);
  bad.p = Matrix{{1.2, -0.2}, {0.0, 0.0}};
  CHECK_THROWS_AS(discrete_mi(bad), ContractError);
}

TEST_CASE("kl divergence examples") {
  const Matrix p{{0.5, 0.0}, {0.0, 0.5}};
  CHECK(kl_div(p, p) == 0.0);
  CHECK(kl_div(p, Matrix(2, 2, 0.25)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(kl_div(Matrix(2, 2, 0.25), p) == kInfinity);
  CHECK_THROWS_AS(kl_div(p, Matrix(2, 3, 1.0 / 6.0)), ContractError);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_joint(3, 4, 2, rng, 0.0);
    const auto b = random_joint(3, 4, 2, rng, 0.0);
    CHECK(kl_div(a.p, b.p) >= 0.0);
  }
}

TEST_CASE("smoothed joints") {
  Rng rng(5);
  const auto j = random_joint(4, 3, 2, rng);
  const auto pu = j.marginal_u();
  const auto pv = j.marginal_v();

  SUBCASE("zero similarity gives the product of the marginals") {
    const auto s = smoothed_pair(j, Matrix(4, 3, 0.0), 0.7);
    const Matrix prod = product_joint(pu, pv);
    CHECK(max_abs_diff(s.q, prod) < 1e-15);
    CHECK(max_abs_diff(s.q_tilde, prod) < 1e-15);
  }
  SUBCASE("large temperature approaches the product") {
    const auto s = smoothed_pair(j, similarity_table(j), 1e6);
    CHECK(max_abs_diff(s.q, product_joint(pu, pv)) < 1e-6);
  }
  SUBCASE("marginals are preserved") {
    const auto s = smoothed_pair(j, similarity_table(j), 0.3);
    for (std::size_t c = 0; c < 3; ++c) {
      double col = 0.0;
      for (std::size_t r = 0; r < 4; ++r) col += s.q(r, c);
      CHECK(std::abs(col - pv[c]) < 1e-12);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < 3; ++c) row += s.q_tilde(r, c);
      CHECK(std::abs(row - pu[r]) < 1e-12);
    }
  }
  CHECK_THROWS_AS(smoothed_pair(j, similarity_table(j), 0.0), ContractError);
  CHECK_THROWS_AS(discrete_infonce(j, similarity_table(j), -1.0), ContractError);
}

TEST_CASE("discrete loss examples") {
  DiscreteJoint prod{Matrix{{1.0}, {2.0}}, Matrix{{0.5}, {-1.0}, {3.0}}, product_joint({0.4, 0.6}, {0.2, 0.3, 0.5})};
  CHECK(std::abs(discrete_infonce(prod, Matrix(2, 3, 0.0), 0.5)) < 1e-15);
  CHECK(decomposition_residual(prod, Matrix(2, 3, 0.0), 0.5) == 0.0);

  Rng rng(7);
  const auto j = random_joint(3, 3, 2, rng);
  const Matrix sim = similarity_table(j);
  const auto o = oracle(j.p, sim, 0.7);
  CHECK(std::abs(discrete_infonce(j, sim, 0.7) - (-2.0 * o.mi + o.kl1 + o.kl2)) < 1e-10);
  CHECK(std::abs(discrete_infonce(j, sim, 0.7) - o.loss) < 1e-12);
}

TEST_CASE("decomposition identity on random joints") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng.below(8);
    const std::size_t n = 1 + rng.below(8);
    const std::size_t d = 1 + rng.below(3);
    const auto j = random_joint(m, n, d, rng);
    const auto kind = rng.uniform() < 0.5 ? SimilarityKind::PopNormalizedInner : SimilarityKind::Cosine;
    const Matrix sim = similarity_table(j, kind);
    for (double tau : {0.1, 0.5, 1.0, 2.0}) {
      const auto rep = decompose(j, sim, tau);
      CHECK(rep.residual <= 1e-10);
      CHECK(rep.loss + 2.0 * rep.mi >= -1e-10);
      const auto o = oracle(j.p, sim, tau);
      CHECK(std::abs(o.loss + 2.0 * o.mi - o.kl1 - o.kl2) <= 1e-10);
      CHECK(std::abs(rep.loss - o.loss) <= 1e-10 * (1.0 + std::abs(o.loss)));
      CHECK(std::abs(rep.kl_q - o.kl1) <= 1e-10 * (1.0 + o.kl1));
      CHECK(std::abs(rep.kl_q_tilde - o.kl2) <= 1e-10 * (1.0 + o.kl2));
    }
  }
  Matrix atoms{{1.0, 0.0}, {0.0, 1.0}, {-1.0, -1.0}};
  const auto diag = diagonal_joint({0.2, 0.3, 0.5}, atoms);
  CHECK(decomposition_residual(diag, similarity_table(diag), 1.0) <= 1e-10);
}

TEST_CASE("delta is nondecreasing in tau on aligned diagonal joints") {
  Rng rng(13);
  const std::vector<double> taus{0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 2 + rng.below(5);
    // Unit-norm atoms: σ_ii = ⟨a_i, a_i⟩/ν² is the global maximum of σ.
    Matrix atoms = testing::random_matrix(m, 3, rng);
    for (std::size_t i = 0; i < m; ++i) {
      double nrm = 0.0;
      for (double x : atoms.row(i)) nrm += x * x;
      for (double& x : atoms.row(i)) x /= std::sqrt(nrm);
    }
    std::vector<double> w(m);
    for (double& x : w) x = 0.1 + rng.uniform();
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    const auto j = diagonal_joint(w, atoms);
    const auto delta = delta_curve(j, similarity_table(j), taus);
    for (std::size_t k = 1; k < delta.size(); ++k) CHECK(delta[k] >= delta[k - 1] - 1e-12);
  }

  Rng r2(2);
  const auto j = random_joint(3, 3, 2, r2);
  const auto prod = DiscreteJoint{j.atoms_u, j.atoms_v, product_joint(j.marginal_u(), j.marginal_v())};
  for (double v : delta_curve(prod, Matrix(3, 3, 0.4), {0.1, 1.0, 5.0})) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("mutual information of a tilted joint is bounded by the similarity range") {
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    const auto j = random_joint(4, 5, 2, rng, 0.0);
    const Matrix sim = similarity_table(j);
    const double tau = 0.2 + rng.uniform();
    const auto s = smoothed_pair(j, sim, tau);
    double lo = sim(0, 0);
    double hi = sim(0, 0);
    for (double x : sim.values()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(discrete_mi(s.q) <= (hi - lo) / tau + 1e-12);
  }
}

TEST_CASE("ball partition geometry") {
  const auto p1 = ball_partition(1, 1.0, 4);
  REQUIRE(p1.size() == 4);
  CHECK(p1.cell_volume == 0.5);
  CHECK(p1.cells[0].lower[0] == -1.0);
  CHECK(p1.cells[3].lower[0] == 0.5);
  CHECK(p1.cells[2].center[0] == 0.25);

  // Every cell of the 8-cell grid lies inside one cell of the 4-cell grid.
  const auto p8 = ball_partition(1, 1.0, 8);
  for (const auto& c : p8.cells) {
    const auto coarse = discretize_embeddings(Matrix{{c.center[0]}}, p1).labels[0];
    CHECK(coarse == c.grid[0] / 2);
  }

  const auto p2 = ball_partition(2, 1.5, 64);
  CHECK(p2.max_cell_diameter() == doctest::Approx(std::sqrt(2.0) * 3.0 / 64.0).epsilon(1e-15));
  CHECK(p2.size() < 64 * 64);
  CHECK(ball_partition(3, 1.0, 6).size() > 0);
  CHECK_THROWS_AS(ball_partition(4, 1.0, 2), ContractError);
}

TEST_CASE("discretization of points") {
  const auto p = ball_partition(1, 1.0, 4);
  CHECK(discretize_embeddings(Matrix{{0.25}}, p).labels[0] == 2);
  CHECK(discretize_embeddings(Matrix{{0.5}}, p).labels[0] == 3);
  CHECK(discretize_embeddings(Matrix{{1.0}}, p).labels[0] == 3);
  CHECK(discretize_embeddings(Matrix{{-1.0}}, p).labels[0] == 0);
  const auto out = discretize_embeddings(Matrix{{2.5}, {-7.0}}, p);
  CHECK(out.clamped == 2);
  CHECK(out.labels == std::vector<std::size_t>{3, 0});

  const auto single = ball_partition(2, 1.0, 1);
  Rng rng(1);
  const Matrix pts = testing::random_matrix(50, 2, rng, 0.3);
  const auto labels = discretize_embeddings(pts, single).labels;
  for (auto l : labels) CHECK(l == 0);
  CHECK(plugin_mi(labels, labels) == 0.0);
}

TEST_CASE("plug-in mutual information") {
  std::vector<std::size_t> a;
  for (std::size_t i = 0; i < 60; ++i) a.push_back(i % 3);
  CHECK(plugin_mi(a, a) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(plugin_mi(a, std::vector<std::size_t>(59, 0)), ContractError);

  Rng rng(19);
  std::vector<std::size_t> u(100000);
  std::vector<std::size_t> v(100000);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = rng.below(4);
    v[i] = rng.below(4);
  }
  CHECK(plugin_mi(u, v) <= 0.01);
}

TEST_CASE("merging cells never increases plug-in mutual information") {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.below(7);
    std::vector<std::size_t> u(300);
    std::vector<std::size_t> v(300);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = rng.below(k);
      v[i] = rng.uniform() < 0.6 ? u[i] : rng.below(k);
    }
    const double fine = plugin_mi(u, v);
    // Merge cells 2c and 2c+1 on one side.
    std::vector<std::size_t> merged(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) merged[i] = u[i] / 2;
    CHECK(plugin_mi(merged, v) <= fine + 1e-12);
  }
}

TEST_CASE("entropy of a discretized density") {
  // With 2M cells over [−1, 1], the M cells on [0, 1] have width 1/M.
  auto check = [](std::size_t m) {
    return entropy_discretization_check(linear_ramp_unit_interval(), ball_partition(1, 1.0, 2 * m));
  };
  for (std::size_t m : {4, 16, 64}) {
    const auto u = entropy_discretization_check(uniform_unit_interval(), ball_partition(1, 1.0, 2 * m));
    CHECK(std::abs(u.approximation) < 1e-12);
    CHECK(u.target == 0.0);
  }

  // Oracle: masses ((i+1)² − i²)/M² on cells of width 1/M.
  const std::size_t m = 256;
  std::vector<double> masses;
  for (std::size_t i = 0; i < m; ++i) masses.push_back(static_cast<double>(2 * i + 1) / static_cast<double>(m * m));
  const double approx = entropy(masses) + std::log(1.0 / static_cast<double>(m));
  const auto r256 = check(256);
  CHECK(r256.approximation == doctest::Approx(approx).epsilon(1e-12));
  CHECK(r256.target == doctest::Approx(0.5 - std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(r256.error()) <= 0.01);

  double prev = std::abs(check(16).error());
  for (std::size_t mm : {32, 64, 128, 256}) {
    const double err = std::abs(check(mm).error());
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("quantile binning labels") {
  Rng rng(29);
  const Matrix pts = testing::random_matrix(400, 2, rng);
  const auto labels = quantile_bin(pts, 4);
  std::vector<std::size_t> counts(16, 0);
  for (auto l : labels) {
    REQUIRE(l < 16);
    ++counts[l];
  }
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 400);
  CHECK(plugin_mi(quantile_bin(pts, 4), quantile_bin(pts, 4)) > 0.0);
}
