#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cliplab/encoder.hpp"
#include "cliplab/errors.hpp"
#include "test_support.hpp"

using namespace cliplab;
using cliplab::testing::gradient_check;
using cliplab::testing::random_matrix;

TEST_CASE("initialization is deterministic with the default architecture") {
  const auto a = mlp_init(20, 3, 7);
  const auto b = mlp_init(20, 3, 7);
  CHECK(a == b);
  CHECK_FALSE(a == mlp_init(20, 3, 8));
  CHECK(a.layer_dims == std::vector<std::size_t>{20, 50, 50, 50, 50, 3});
  REQUIRE(a.num_layers() == 5);
  CHECK(a.weights[0].rows() == 20);
  CHECK(a.weights[0].cols() == 50);
  CHECK(a.weights[4].rows() == 50);
  CHECK(a.weights[4].cols() == 3);
  for (const auto& bias : a.biases) CHECK(sum(bias) == 0.0);
}

TEST_CASE("first-layer weights have He scale") {
  const auto p = mlp_init(20, 3, 1);
  double sq = 0.0;
  for (double w : p.weights[0].values()) sq += w * w;
  const double sd = std::sqrt(sq / static_cast<double>(p.weights[0].size()));
  CHECK(std::abs(sd / std::sqrt(2.0 / 20.0) - 1.0) < 0.1);
}

TEST_CASE("forward shapes and simple cases") {
  auto p = mlp_init(4, 2, 3, {5});
  CHECK(mlp_forward(p, Matrix(0, 4)).rows() == 0);
  CHECK(mlp_forward(p, Matrix(7, 4, 1.0)).cols() == 2);

  for (auto& w : p.weights) w = Matrix(w.rows(), w.cols(), 0.0);
  p.biases.back() = Matrix{{0.25, -1.5}};
  const Matrix out = mlp_forward(p, Matrix{{1, 2, 3, 4}, {-1, 0, 5, 2}});
  CHECK(out == Matrix{{0.25, -1.5}, {0.25, -1.5}});
}

TEST_CASE("forward rejects bad input") {
  const auto p = mlp_init(4, 2, 3);
  CHECK_THROWS_AS(mlp_forward(p, Matrix(2, 5)), DimensionError);
  CHECK_THROWS_AS(mlp_forward(p, Matrix{{1, 2, 3, std::nan("")}}), InputError);
  CHECK_THROWS_AS(mlp_init(0, 2, 1), ContractError);
  CHECK_THROWS_AS(mlp_init(3, 0, 1), ContractError);
}

TEST_CASE("rows are processed independently") {
  Rng rng(4);
  const auto p = mlp_init(6, 3, 9);
  const Matrix x = random_matrix(5, 6, rng);
  const Matrix full = mlp_forward(p, x);
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t idx[] = {i};
    CHECK(mlp_forward(p, gather_rows(x, idx)) == gather_rows(full, idx));
  }
}

TEST_CASE("tape forward agrees with the plain forward") {
  Rng rng(6);
  const auto p = mlp_init(6, 3, 2);
  const Matrix x = random_matrix(8, 6, rng);
  Tape t;
  const auto vars = bind(t, p);
  const Var out = mlp_forward(t, vars, t.constant(x));
  CHECK(t.value(out) == mlp_forward(p, x));
}

TEST_CASE("end-to-end gradients match central differences") {
  Rng rng(12);
  const auto p = mlp_init(4, 2, 5);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(3, 2, rng);
  std::vector<Matrix> inputs;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    inputs.push_back(p.weights[l]);
    inputs.push_back(p.biases[l]);
  }
  auto graph = [&](Tape& t, const std::vector<Var>& leaves) {
    EncoderVars vars;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      vars.weights.push_back(leaves[2 * l]);
      vars.biases.push_back(leaves[2 * l + 1]);
    }
    return t.dot(mlp_forward(t, vars, t.constant(x)), t.constant(w));
  };
  CHECK(gradient_check(graph, inputs) < 1e-4);
}

TEST_CASE("serialization round-trips exactly") {
  const auto p = mlp_init(5, 3, 11, {7, 4});
  nlohmann::json j = p;
  CHECK(j.get<EncoderParams>() == p);

  const auto path = std::filesystem::temp_directory_path() / "cliplab_encoder_roundtrip.json";
  save_encoder(path.string(), p);
  CHECK(load_encoder(path.string()) == p);
  std::filesystem::remove(path);

  nlohmann::json broken = p;
  broken["weights"][1] = broken["weights"][0];
  CHECK_THROWS(broken.get<EncoderParams>());
}
