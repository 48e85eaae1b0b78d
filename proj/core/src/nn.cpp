#include "storygen/nn.hpp"

#include <stdexcept>
#include <string>

namespace storygen {

LstmLayerParams::LstmLayerParams(std::size_t input, std::size_t hidden)
    : input_dim(input),
      hidden_dim(hidden),
      weight(Shape{4 * hidden, input + hidden}),
      bias(Shape{4 * hidden}) {}

LstmStackParams::LstmStackParams(std::size_t input_dim, std::size_t hidden_dim,
                                 std::size_t num_layers) {
  if (num_layers == 0) throw std::invalid_argument("LSTM stack needs at least one layer");
  for (std::size_t l = 0; l < num_layers; ++l) {
    layers.emplace_back(l == 0 ? input_dim : hidden_dim, hidden_dim);
  }
}

std::vector<Tensor*> LstmStackParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& layer : layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

void LstmStackParams::init(Rng& rng, double bound, double forget_bias) {
  for (auto& layer : layers) {
    init_uniform(layer.weight, rng, bound);
    init_uniform(layer.bias, rng, bound);
    const std::size_t h = layer.hidden_dim;
    for (std::size_t i = h; i < 2 * h; ++i) layer.bias.values[i] = forget_bias;
  }
}

LstmState zero_state(Tape& tape, const LstmStackParams& params) {
  LstmState s;
  for (const auto& layer : params.layers) {
    s.h.push_back(tape.zeros({layer.hidden_dim}));
    s.c.push_back(tape.zeros({layer.hidden_dim}));
  }
  return s;
}

LstmState lstm_step(Tape& tape, const LstmStackParams& params, const LstmState& state,
                    Var input) {
  if (state.h.size() != params.layers.size() || state.c.size() != params.layers.size()) {
    throw ShapeError("lstm_step: state has " + std::to_string(state.h.size()) +
                     " layers, parameters have " + std::to_string(params.layers.size()));
  }
  if (input.shape() != Shape{params.input_dim()}) {
    throw ShapeError("lstm_step: input " + shape_to_string(input.shape()) +
                     " does not match layer input width " + std::to_string(params.input_dim()));
  }
  LstmState next;
  Var x = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const std::size_t h = layer.hidden_dim;
    Var z = add(matmul(tape.param(layer.weight), concat({x, state.h[l]})), tape.param(layer.bias));
    Var in_gate = sigmoid(slice(z, 0, h));
    Var forget_gate = sigmoid(slice(z, h, h));
    Var cell_in = tanh(slice(z, 2 * h, h));
    Var out_gate = sigmoid(slice(z, 3 * h, h));
    Var c = add(mul(forget_gate, state.c[l]), mul(in_gate, cell_in));
    Var hidden = mul(out_gate, tanh(c));
    next.h.push_back(hidden);
    next.c.push_back(c);
    x = hidden;
  }
  return next;
}

LstmState lstm_step_ctx(Tape& tape, const LstmStackParams& params, const LstmState& state,
                        Var input, Var context) {
  if (input.shape().size() != 1 || context.shape().size() != 1 ||
      input.size() + context.size() != params.input_dim()) {
    throw ShapeError("lstm_step_ctx: input " + shape_to_string(input.shape()) + " + context " +
                     shape_to_string(context.shape()) + " does not match layer input width " +
                     std::to_string(params.input_dim()));
  }
  return lstm_step(tape, params, state, concat({input, context}));
}

namespace {

GruDirectionParams make_direction(std::size_t input, std::size_t hidden) {
  return {Tensor(Shape{2 * hidden, input + hidden}), Tensor(Shape{2 * hidden}),
          Tensor(Shape{hidden, input + hidden}), Tensor(Shape{hidden})};
}

Var gru_step(Tape& tape, const GruDirectionParams& p, std::size_t hidden, Var h, Var x) {
  Var gates = sigmoid(
      add(matmul(tape.param(p.gate_weight), concat({x, h})), tape.param(p.gate_bias)));
  Var update = slice(gates, 0, hidden);
  Var reset = slice(gates, hidden, hidden);
  Var candidate = tanh(add(matmul(tape.param(p.candidate_weight), concat({x, mul(reset, h)})),
                           tape.param(p.candidate_bias)));
  // h' = (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(candidate, mul(update, sub(h, candidate)));
}

}  // namespace

GruParams::GruParams(std::size_t input, std::size_t hidden)
    : input_dim(input),
      hidden_dim(hidden),
      forward(make_direction(input, hidden)),
      backward(make_direction(input, hidden)) {}

std::vector<Tensor*> GruParams::tensors() {
  return {&forward.gate_weight,  &forward.gate_bias,  &forward.candidate_weight,
          &forward.candidate_bias, &backward.gate_weight, &backward.gate_bias,
          &backward.candidate_weight, &backward.candidate_bias};
}

void GruParams::init(Rng& rng, double bound) {
  for (Tensor* t : tensors()) init_uniform(*t, rng, bound);
}

Var bigru_final(Tape& tape, const GruParams& params, std::span<const Var> seq) {
  if (seq.size() != 3) {
    throw std::invalid_argument("bigru_final: expected 3 vectors, got " +
                                std::to_string(seq.size()));
  }
  for (const Var& v : seq) {
    if (v.shape() != Shape{params.input_dim}) {
      throw ShapeError("bigru_final: element " + shape_to_string(v.shape()) +
                       " does not match input width " + std::to_string(params.input_dim));
    }
  }
  Var fwd = tape.zeros({params.hidden_dim});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    fwd = gru_step(tape, params.forward, params.hidden_dim, fwd, seq[i]);
  }
  Var bwd = tape.zeros({params.hidden_dim});
  for (std::size_t i = seq.size(); i-- > 0;) {
    bwd = gru_step(tape, params.backward, params.hidden_dim, bwd, seq[i]);
  }
  return concat({fwd, bwd});
}

Var embed(Tape& tape, const EmbeddingTable& table, TokenId id) {
  if (id >= table.vocab_size()) {
    throw std::out_of_range("embed: token id " + std::to_string(id) + " outside table of " +
                            std::to_string(table.vocab_size()) + " rows");
  }
  return row(tape.param(table.table), id);
}

Var linear(Tape& tape, const Tensor& weight, const Tensor& bias, Var x) {
  return add(matmul(tape.param(weight), x), tape.param(bias));
}

void init_uniform(Tensor& t, Rng& rng, double bound) {
  for (auto& v : t.values) v = rng.uniform(-bound, bound);
}

}  // namespace storygen
