#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cliplab/matrix.hpp"
#include "cliplab/tape.hpp"

namespace cliplab {

inline constexpr std::size_t kDefaultHiddenWidth = 50;
inline constexpr std::size_t kDefaultHiddenLayers = 4;

// Weights and biases of a ReLU MLP. With the default hidden widths this is the
// 5-affine-layer network [d_in, 50, 50, 50, 50, d_out]: ReLU after every
// hidden layer, the last layer linear.
struct EncoderParams {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;  // weights[i] is layer_dims[i] × layer_dims[i+1]
  std::vector<Matrix> biases;   // biases[i] is 1 × layer_dims[i+1]

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }

  bool operator==(const EncoderParams&) const = default;
};

std::vector<std::size_t> default_hidden_widths();

// He-normal weights (std √(2/fan_in)) and zero biases, deterministic per seed.
EncoderParams mlp_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed,
                       const std::vector<std::size_t>& hidden = default_hidden_widths());

// Checks shapes against layer_dims; throws ContractError on mismatch.
void validate(const EncoderParams& params);

// Plain forward pass, no gradient bookkeeping.
Matrix mlp_forward(const EncoderParams& params, const Matrix& batch);

// Parameters registered as tape leaves, in layer order.
struct EncoderVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

EncoderVars bind(Tape& tape, const EncoderParams& params);

// Forward pass recorded on `tape`; `input` must be a node holding N×d_in.
Var mlp_forward(Tape& tape, const EncoderVars& vars, Var input);

void to_json(nlohmann::json& j, const EncoderParams& params);
void from_json(const nlohmann::json& j, EncoderParams& params);

void save_encoder(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder(const std::string& path);

}  // namespace cliplab
