#pragma once

// Recurrent and affine layers built on the autodiff primitives.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "storygen/autodiff.hpp"
#include "storygen/random.hpp"

namespace storygen {

using TokenId = std::uint32_t;

/// One LSTM layer. Gates are stacked in the order input, forget, cell,
/// output; the weight acts on [x; h_prev].
struct LstmLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor weight;  // [4H x (input_dim + H)]
  Tensor bias;    // [4H]

  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input, std::size_t hidden);
};

struct LstmStackParams {
  std::vector<LstmLayerParams> layers;

  LstmStackParams() = default;
  /// Layer 0 reads input_dim, every later layer reads hidden_dim.
  LstmStackParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers);

  std::size_t input_dim() const { return layers.front().input_dim; }
  std::size_t hidden_dim() const { return layers.front().hidden_dim; }
  std::vector<Tensor*> tensors();
  /// Uniform weights in [-bound, bound]; forget-gate bias set to forget_bias.
  void init(Rng& rng, double bound, double forget_bias);
};

/// Per-layer hidden and cell states of an LSTM stack.
struct LstmState {
  std::vector<Var> h;
  std::vector<Var> c;

  Var top() const { return h.back(); }
};

LstmState zero_state(Tape& tape, const LstmStackParams& params);
LstmState lstm_step(Tape& tape, const LstmStackParams& params, const LstmState& state, Var input);
/// LSTM step on [input; context].
LstmState lstm_step_ctx(Tape& tape, const LstmStackParams& params, const LstmState& state,
                        Var input, Var context);

struct GruDirectionParams {
  Tensor gate_weight;       // update and reset gates, [2H x (in + H)]
  Tensor gate_bias;         // [2H]
  Tensor candidate_weight;  // [H x (in + H)]
  Tensor candidate_bias;    // [H]
};

struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  GruDirectionParams forward;
  GruDirectionParams backward;

  GruParams() = default;
  GruParams(std::size_t input, std::size_t hidden);

  std::vector<Tensor*> tensors();
  void init(Rng& rng, double bound);
};

/// Final states of a bidirectional GRU over exactly three vectors,
/// concatenated as [forward; backward].
Var bigru_final(Tape& tape, const GruParams& params, std::span<const Var> seq);

struct EmbeddingTable {
  Tensor table;  // [vocab x dim]
  bool trainable = true;

  std::size_t vocab_size() const { return table.rows(); }
  std::size_t dim() const { return table.cols(); }
};

Var embed(Tape& tape, const EmbeddingTable& table, TokenId id);
/// W x + b.
Var linear(Tape& tape, const Tensor& weight, const Tensor& bias, Var x);

void init_uniform(Tensor& t, Rng& rng, double bound);

}  // namespace storygen
