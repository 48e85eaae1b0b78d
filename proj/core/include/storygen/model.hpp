#pragma once

// Incremental story encoder with multi-source attention over the preceding
// sentence's hidden states and knowledge-graph vectors, plus the decoder and
// the joint encoder/decoder likelihood objective.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "storygen/autodiff.hpp"
#include "storygen/corpus.hpp"
#include "storygen/knowledge.hpp"
#include "storygen/nn.hpp"

namespace storygen {

enum class Variant {
  IE,    // incremental encoding, state context only
  IE_GA, // + knowledge context from graph attention
  IE_CA, // + knowledge context from contextual attention
};

std::string_view variant_name(Variant v);  // "ie", "ie-ga", "ie-ca"
Variant parse_variant(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::IE_CA;
  std::size_t num_layers = 2;
  std::size_t hidden = 512;
  std::size_t word_dim = 200;
  std::size_t context_dim = 512;
  std::size_t vocab_size = 10000;
  std::size_t relation_dim = 200;
  std::size_t gru_hidden = 256;
  std::size_t num_relations = 0;
  double init_bound = 0.08;
  double forget_bias = 1.0;

  bool uses_knowledge() const { return variant != Variant::IE; }
  /// Width of a graph vector: 2*word_dim (GA), 2*gru_hidden (CA), 0 (IE).
  std::size_t graph_dim() const;
  /// Width of the graph-attention projection space (GA).
  std::size_t triple_attention_dim() const { return word_dim; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  ModelConfig config;
  EmbeddingTable embedding;      // [V x word_dim]
  LstmStackParams lstm;          // one stack shared by encoder and decoder
  Tensor state_bilinear;         // [H x H]
  Tensor knowledge_bilinear;     // [H x G]
  Tensor context_weight;         // [C x (H + G)], [C x H] for IE
  Tensor context_bias;           // [C]
  Tensor relation_embedding;     // [max(R,1) x relation_dim]
  Tensor triple_relation_proj;   // GA: [A x relation_dim]
  Tensor triple_head_proj;       // GA: [A x word_dim]
  Tensor triple_tail_proj;       // GA: [A x word_dim]
  GruParams triple_gru;          // CA
  Tensor memory_bilinear;        // CA: [H x 2*gru_hidden]
  Tensor output_weight;          // [V x H]
  Tensor output_bias;            // [V]

  /// Allocates every tensor for the config and draws uniform weights.
  static ModelParams create(const ModelConfig& config, Rng& rng);

  /// Tensors in use by the configured variant, in a stable order.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  /// named_tensors() minus a frozen embedding table.
  std::vector<Tensor*> trainable();
  void zero_grad();
  std::size_t parameter_count() const;
};

/// Weighted read of a memory matrix: scores q^T W m_k, softmax over
/// positions where mask is true.
struct Attention {
  Var context;
  Var weights;
};

/// State context vector over the preceding sentence's hidden states
/// (prev_hiddens is [l x H]).
Attention state_context(Tape& tape, Var query, Var prev_hiddens, const Tensor& bilinear,
                        const std::vector<bool>& mask);
/// Knowledge context vector over the preceding sentence's graph vectors.
Attention knowledge_context(Tape& tape, Var query, Var prev_graph_vectors,
                            const Tensor& bilinear, const std::vector<bool>& mask);
/// c_l = W_l [c_h; c_x] + b_l; c_x is absent for the IE variant.
Var msa_context(Tape& tape, const ModelParams& params, Var state_ctx,
                std::optional<Var> knowledge_ctx);

struct GraphVector {
  Var vector;
  std::vector<double> triple_attention;  // empty when the fallback was used
};

GraphVector graph_vector_ga(Tape& tape, const ModelParams& params, const ConceptGraph& graph);
GraphVector graph_vector_ca(Tape& tape, const ModelParams& params, const ConceptGraph& graph,
                            Var query_hidden);
/// Triple memory BiGRU(head, relation, tail) for contextual attention.
Var triple_memory(Tape& tape, const ModelParams& params, const KnowledgeTriple& triple);

struct SentenceTrace {
  std::vector<TokenId> tokens;
  std::vector<Var> predict_states;  // top-layer state before consuming each token
  std::vector<Var> hidden;          // top-layer state after consuming each token
  Var hidden_matrix;                // [l x H]
  std::vector<Var> graph_vectors;   // empty for IE
  Var graph_matrix;                 // [l x G], unset for IE
  std::vector<std::vector<double>> state_attention;      // [l_i][l_{i-1}], empty for X1
  std::vector<std::vector<double>> knowledge_attention;  // [l_i][l_{i-1}], empty for X1 / IE
  std::vector<std::vector<double>> triple_attention;     // per word, empty on fallback
};

struct EncoderTrace {
  std::array<SentenceTrace, kContextSentences> sentences;
  LstmState final_state;
};

/// Encodes X1 with plain LSTM steps and X2..X4 with context-augmented steps;
/// the recurrent state carries across sentence boundaries. `store` may be
/// null, in which case every word uses the empty-graph fallback.
EncoderTrace encode_story(Tape& tape, const ModelParams& params, const Story& story,
                          const TripleStore* store);

/// softmax(W_0 h + b_0); the decoder uses the same projection.
Var encoder_token_distribution(Tape& tape, const ModelParams& params, Var hidden);

struct DecodeStep {
  LstmState state;
  Var distribution;
  std::vector<double> state_attention;
  std::vector<double> knowledge_attention;
};

DecodeStep decode_step(Tape& tape, const ModelParams& params, const LstmState& state,
                       TokenId previous, const EncoderTrace& trace);

struct LossTerms {
  Var total;
  Var encoder;
  Var decoder;
  std::size_t encoder_tokens = 0;
  std::size_t decoder_tokens = 0;  // ending tokens + EOS
};

/// Teacher-forced objective: encoder next-token NLL over X2..X4 plus decoder
/// NLL over the ending followed by EOS.
LossTerms story_loss(Tape& tape, const ModelParams& params, const Story& story,
                     const TripleStore* store);

}  // namespace storygen
