#include "cliplab/encoder.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cliplab/errors.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

std::vector<std::size_t> default_hidden_widths() {
  return std::vector<std::size_t>(kDefaultHiddenLayers, kDefaultHiddenWidth);
}

EncoderParams mlp_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed,
                       const std::vector<std::size_t>& hidden) {
  if (d_in == 0 || d_out == 0) throw ContractError("mlp_init: dimensions must be positive");
  for (std::size_t w : hidden)
    if (w == 0) throw ContractError("mlp_init: hidden widths must be positive");

  EncoderParams p;
  p.layer_dims.push_back(d_in);
  p.layer_dims.insert(p.layer_dims.end(), hidden.begin(), hidden.end());
  p.layer_dims.push_back(d_out);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const std::size_t fan_in = p.layer_dims[l];
    const std::size_t fan_out = p.layer_dims[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (double& v : w.values()) v = stddev * rng.normal();
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(1, fan_out);
  }
  return p;
}

void validate(const EncoderParams& params) {
  const auto& dims = params.layer_dims;
  if (dims.size() < 2) throw ContractError("encoder: need at least input and output dimensions");
  if (params.weights.size() != dims.size() - 1 || params.biases.size() != dims.size() - 1) {
    throw ContractError("encoder: layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (params.weights[l].rows() != dims[l] || params.weights[l].cols() != dims[l + 1] ||
        params.biases[l].rows() != 1 || params.biases[l].cols() != dims[l + 1]) {
      throw ContractError("encoder: layer " + std::to_string(l) + " has wrong shape");
    }
  }
}

Matrix mlp_forward(const EncoderParams& params, const Matrix& batch) {
  if (batch.cols() != params.input_dim()) {
    throw DimensionError("mlp_forward: batch has " + std::to_string(batch.cols()) + " columns, encoder expects " +
                         std::to_string(params.input_dim()));
  }
  require_finite(batch, "mlp_forward input");
  Matrix z = batch;
  const std::size_t last = params.num_layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    z = matmul(z, params.weights[l]);
    const Matrix& b = params.biases[l];
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        r[j] += b(0, j);
        if (l != last && !(r[j] > 0.0)) r[j] = 0.0;
      }
    }
  }
  return z;
}

EncoderVars bind(Tape& tape, const EncoderParams& params) {
  EncoderVars vars;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    vars.weights.push_back(tape.leaf(params.weights[l]));
    vars.biases.push_back(tape.leaf(params.biases[l]));
  }
  return vars;
}

Var mlp_forward(Tape& tape, const EncoderVars& vars, Var input) {
  if (vars.weights.empty()) throw ContractError("mlp_forward: encoder has no layers");
  if (tape.value(input).cols() != tape.value(vars.weights.front()).rows()) {
    throw DimensionError("mlp_forward: input width does not match encoder");
  }
  require_finite(tape.value(input), "mlp_forward input");
  Var z = input;
  const std::size_t last = vars.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    z = tape.add_row(tape.matmul(z, vars.weights[l]), vars.biases[l]);
    if (l != last) z = tape.relu(z);
  }
  return z;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) throw InputError("encoder json: wrong row count");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& r = j[i];
    if (!r.is_array() || r.size() != cols) throw InputError("encoder json: wrong column count");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = r[c].get<double>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const EncoderParams& params) {
  j = nlohmann::json::object();
  j["layer_dims"] = params.layer_dims;
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    weights.push_back(matrix_to_json(params.weights[l]));
    auto b = params.biases[l].row(0);
    biases.push_back(std::vector<double>(b.begin(), b.end()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
}

void from_json(const nlohmann::json& j, EncoderParams& params) {
  try {
    params = EncoderParams{};
    params.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    if (params.layer_dims.size() < 2) throw InputError("encoder json: layer_dims too short");
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != params.layer_dims.size() - 1 || biases.size() != params.layer_dims.size() - 1) {
      throw InputError("encoder json: layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l + 1 < params.layer_dims.size(); ++l) {
      const std::size_t in = params.layer_dims[l];
      const std::size_t out = params.layer_dims[l + 1];
      params.weights.push_back(matrix_from_json(weights[l], in, out));
      auto b = biases[l].get<std::vector<double>>();
      if (b.size() != out) throw InputError("encoder json: bias length mismatch");
      params.biases.emplace_back(1, out, std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("encoder json: ") + e.what());
  }
}

void save_encoder(const std::string& path, const EncoderParams& params) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << nlohmann::json(params).dump() << '\n';
}

EncoderParams load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return j.get<EncoderParams>();
}

}  // namespace cliplab
