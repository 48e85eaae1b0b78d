#include "storygen/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace storygen {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::IE: return "ie";
    case Variant::IE_GA: return "ie-ga";
    case Variant::IE_CA: return "ie-ca";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "ie" || s == "IE") return Variant::IE;
  if (s == "ie-ga" || s == "IE_GA" || s == "ie_ga") return Variant::IE_GA;
  if (s == "ie-ca" || s == "IE_CA" || s == "ie_ca") return Variant::IE_CA;
  throw std::invalid_argument("unknown variant '" + std::string(s) +
                              "' (expected ie, ie-ga or ie-ca)");
}

std::size_t ModelConfig::graph_dim() const {
  switch (variant) {
    case Variant::IE: return 0;
    case Variant::IE_GA: return 2 * word_dim;
    case Variant::IE_CA: return 2 * gru_hidden;
  }
  return 0;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
  };
  positive(num_layers, "num_layers");
  positive(hidden, "hidden");
  positive(word_dim, "word_dim");
  positive(context_dim, "context_dim");
  positive(relation_dim, "relation_dim");
  positive(gru_hidden, "gru_hidden");
  if (vocab_size <= kNumSpecialTokens) {
    throw std::invalid_argument("model config: vocab_size must exceed the special tokens");
  }
  if (variant == Variant::IE_CA) {
    if (relation_dim != word_dim) {
      throw std::invalid_argument("model config: ie-ca feeds head, relation and tail through one "
                                  "GRU, so relation_dim must equal word_dim");
    }
    if (2 * gru_hidden < word_dim) {
      throw std::invalid_argument("model config: ie-ca fallback pads e(x) to 2*gru_hidden, which "
                                  "must be at least word_dim");
    }
  }
  if (!(init_bound >= 0.0)) throw std::invalid_argument("model config: init_bound must be >= 0");
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams ModelParams::create(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const std::size_t H = config.hidden;
  const std::size_t G = config.graph_dim();
  const std::size_t V = config.vocab_size;
  const double bound = config.init_bound;

  p.embedding.table = Tensor(Shape{V, config.word_dim});
  init_uniform(p.embedding.table, rng, bound);
  p.lstm = LstmStackParams(config.word_dim + config.context_dim, H, config.num_layers);
  p.lstm.init(rng, bound, config.forget_bias);
  p.state_bilinear = Tensor(Shape{H, H});
  init_uniform(p.state_bilinear, rng, bound);
  p.context_weight = Tensor(Shape{config.context_dim, H + G});
  init_uniform(p.context_weight, rng, bound);
  p.context_bias = Tensor(Shape{config.context_dim});
  init_uniform(p.context_bias, rng, bound);
  if (config.uses_knowledge()) {
    p.knowledge_bilinear = Tensor(Shape{H, G});
    init_uniform(p.knowledge_bilinear, rng, bound);
    p.relation_embedding =
        Tensor(Shape{std::max<std::size_t>(config.num_relations, 1), config.relation_dim});
    init_uniform(p.relation_embedding, rng, bound);
  }
  if (config.variant == Variant::IE_GA) {
    const std::size_t A = config.triple_attention_dim();
    p.triple_relation_proj = Tensor(Shape{A, config.relation_dim});
    p.triple_head_proj = Tensor(Shape{A, config.word_dim});
    p.triple_tail_proj = Tensor(Shape{A, config.word_dim});
    init_uniform(p.triple_relation_proj, rng, bound);
    init_uniform(p.triple_head_proj, rng, bound);
    init_uniform(p.triple_tail_proj, rng, bound);
  }
  if (config.variant == Variant::IE_CA) {
    p.triple_gru = GruParams(config.word_dim, config.gru_hidden);
    p.triple_gru.init(rng, bound);
    p.memory_bilinear = Tensor(Shape{H, 2 * config.gru_hidden});
    init_uniform(p.memory_bilinear, rng, bound);
  }
  p.output_weight = Tensor(Shape{V, H});
  init_uniform(p.output_weight, rng, bound);
  p.output_bias = Tensor(Shape{V});
  init_uniform(p.output_bias, rng, bound);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embedding", &embedding.table);
  for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
    out.emplace_back("lstm." + std::to_string(l) + ".weight", &lstm.layers[l].weight);
    out.emplace_back("lstm." + std::to_string(l) + ".bias", &lstm.layers[l].bias);
  }
  out.emplace_back("attention.state_bilinear", &state_bilinear);
  out.emplace_back("msa.weight", &context_weight);
  out.emplace_back("msa.bias", &context_bias);
  if (config.uses_knowledge()) {
    out.emplace_back("attention.knowledge_bilinear", &knowledge_bilinear);
    out.emplace_back("relation_embedding", &relation_embedding);
  }
  if (config.variant == Variant::IE_GA) {
    out.emplace_back("ga.relation_proj", &triple_relation_proj);
    out.emplace_back("ga.head_proj", &triple_head_proj);
    out.emplace_back("ga.tail_proj", &triple_tail_proj);
  }
  if (config.variant == Variant::IE_CA) {
    const char* names[] = {"fw.gate_weight", "fw.gate_bias", "fw.candidate_weight",
                           "fw.candidate_bias", "bw.gate_weight", "bw.gate_bias",
                           "bw.candidate_weight", "bw.candidate_bias"};
    auto gru = triple_gru.tensors();
    for (std::size_t i = 0; i < gru.size(); ++i) {
      out.emplace_back(std::string("ca.gru.") + names[i], gru[i]);
    }
    out.emplace_back("ca.memory_bilinear", &memory_bilinear);
  }
  out.emplace_back("output.weight", &output_weight);
  out.emplace_back("output.bias", &output_bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto mutable_list = const_cast<ModelParams*>(this)->named_tensors();
  return {mutable_list.begin(), mutable_list.end()};
}

std::vector<Tensor*> ModelParams::trainable() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_tensors()) {
    if (t == &embedding.table && !embedding.trainable) continue;
    out.push_back(t);
  }
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named_tensors()) t->zero_grad();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

// ---------------------------------------------------------------------------
// Attention

namespace {

Attention bilinear_attention(Tape& tape, Var query, Var memory, const Tensor& bilinear,
                             const std::vector<bool>& mask) {
  if (memory.shape().size() != 2) {
    throw ShapeError("attention memory must be a matrix, got " + shape_to_string(memory.shape()));
  }
  // scores_k = q^T W m_k = m_k . (q^T W)
  Var projected = matmul(query, tape.param(bilinear));
  Var scores = matmul(memory, projected);
  Var weights = masked_softmax(scores, mask);
  return {matmul(weights, memory), weights};
}

std::vector<double> to_vector(Var v) { return {v.value().begin(), v.value().end()}; }

}  // namespace

Attention state_context(Tape& tape, Var query, Var prev_hiddens, const Tensor& bilinear,
                        const std::vector<bool>& mask) {
  return bilinear_attention(tape, query, prev_hiddens, bilinear, mask);
}

Attention knowledge_context(Tape& tape, Var query, Var prev_graph_vectors,
                            const Tensor& bilinear, const std::vector<bool>& mask) {
  return bilinear_attention(tape, query, prev_graph_vectors, bilinear, mask);
}

Var msa_context(Tape& tape, const ModelParams& params, Var state_ctx,
                std::optional<Var> knowledge_ctx) {
  if (params.config.uses_knowledge() != knowledge_ctx.has_value()) {
    throw std::invalid_argument(std::string("msa_context: variant ") +
                                std::string(variant_name(params.config.variant)) +
                                (knowledge_ctx ? " takes no" : " requires a") +
                                " knowledge context");
  }
  Var joined = knowledge_ctx ? concat({state_ctx, *knowledge_ctx}) : state_ctx;
  return linear(tape, params.context_weight, params.context_bias, joined);
}

// ---------------------------------------------------------------------------
// Knowledge graph vectors

namespace {

Var relation_vector(Tape& tape, const ModelParams& params, RelationId relation) {
  if (relation >= params.relation_embedding.rows()) {
    throw std::out_of_range("relation id " + std::to_string(relation) +
                            " outside the model's relation table of " +
                            std::to_string(params.relation_embedding.rows()));
  }
  return row(tape.param(params.relation_embedding), relation);
}

void check_graph(const ConceptGraph& graph) {
  for (const auto& t : graph.triples) {
    if (t.head != graph.query) {
      throw std::invalid_argument("concept graph triple head differs from its query word");
    }
  }
}

}  // namespace

GraphVector graph_vector_ga(Tape& tape, const ModelParams& params, const ConceptGraph& graph) {
  check_graph(graph);
  if (graph.empty()) {
    Var e = embed(tape, params.embedding, graph.query);
    return {concat({e, e}), {}};
  }
  Var w_r = tape.param(params.triple_relation_proj);
  Var w_h = tape.param(params.triple_head_proj);
  Var w_t = tape.param(params.triple_tail_proj);
  std::vector<Var> scores;
  std::vector<Var> pairs;
  for (const auto& t : graph.triples) {
    Var head = embed(tape, params.embedding, t.head);
    Var tail = embed(tape, params.embedding, t.tail);
    Var rel = relation_vector(tape, params, t.relation);
    scores.push_back(dot(matmul(w_r, rel), tanh(add(matmul(w_h, head), matmul(w_t, tail)))));
    pairs.push_back(concat({head, tail}));
  }
  Var weights = softmax(concat(scores));
  return {matmul(weights, stack_rows(pairs)), to_vector(weights)};
}

Var triple_memory(Tape& tape, const ModelParams& params, const KnowledgeTriple& triple) {
  const Var seq[] = {embed(tape, params.embedding, triple.head),
                     relation_vector(tape, params, triple.relation),
                     embed(tape, params.embedding, triple.tail)};
  return bigru_final(tape, params.triple_gru, seq);
}

GraphVector graph_vector_ca(Tape& tape, const ModelParams& params, const ConceptGraph& graph,
                            Var query_hidden) {
  check_graph(graph);
  const std::size_t width = 2 * params.config.gru_hidden;
  if (graph.empty()) {
    Var e = embed(tape, params.embedding, graph.query);
    if (e.size() == width) return {e, {}};
    return {concat({e, tape.zeros({width - e.size()})}), {}};
  }
  if (query_hidden.shape() != Shape{params.config.hidden}) {
    throw ShapeError("graph_vector_ca: query " + shape_to_string(query_hidden.shape()) +
                     " does not match hidden width " + std::to_string(params.config.hidden));
  }
  std::vector<Var> memories;
  for (const auto& t : graph.triples) memories.push_back(triple_memory(tape, params, t));
  Var memory = stack_rows(memories);
  Var scores = matmul(memory, matmul(query_hidden, tape.param(params.memory_bilinear)));
  Var weights = softmax(scores);
  return {matmul(weights, memory), to_vector(weights)};
}

// ---------------------------------------------------------------------------
// Encoder / decoder

EncoderTrace encode_story(Tape& tape, const ModelParams& params, const Story& story,
                          const TripleStore* store) {
  const auto& cfg = params.config;
  EncoderTrace trace;
  LstmState state = zero_state(tape, params.lstm);
  std::unordered_map<TokenId, GraphVector> ga_cache;

  auto graph_for = [&](TokenId w) {
    return store ? store->retrieve(w) : ConceptGraph{w, {}};
  };

  for (std::size_t i = 0; i < kContextSentences; ++i) {
    const auto& ids = story.context[i].ids;
    if (ids.empty()) throw std::invalid_argument("encode_story: empty context sentence");
    SentenceTrace& cur = trace.sentences[i];
    cur.tokens = ids;
    const SentenceTrace* prev = i > 0 ? &trace.sentences[i - 1] : nullptr;
    const std::vector<bool> prev_mask = prev ? std::vector<bool>(prev->tokens.size(), true)
                                             : std::vector<bool>{};
    for (TokenId tok : ids) {
      cur.predict_states.push_back(state.top());
      Var e = embed(tape, params.embedding, tok);
      if (!prev) {
        // X1 has no preceding sentence: the shared stack sees a zero context.
        state = lstm_step_ctx(tape, params.lstm, state, e, tape.zeros({cfg.context_dim}));
      } else {
        Var query = state.top();
        Attention sa = state_context(tape, query, prev->hidden_matrix, params.state_bilinear,
                                     prev_mask);
        cur.state_attention.push_back(to_vector(sa.weights));
        std::optional<Var> knowledge;
        if (cfg.uses_knowledge()) {
          Attention ka = knowledge_context(tape, query, prev->graph_matrix,
                                           params.knowledge_bilinear, prev_mask);
          cur.knowledge_attention.push_back(to_vector(ka.weights));
          knowledge = ka.context;
        }
        Var context = msa_context(tape, params, sa.context, knowledge);
        state = lstm_step_ctx(tape, params.lstm, state, e, context);
      }
      cur.hidden.push_back(state.top());
    }
    cur.hidden_matrix = stack_rows(cur.hidden);

    if (cfg.variant == Variant::IE_GA) {
      for (TokenId tok : ids) {
        auto it = ga_cache.find(tok);
        if (it == ga_cache.end()) it = ga_cache.emplace(tok, graph_vector_ga(tape, params, graph_for(tok))).first;
        cur.graph_vectors.push_back(it->second.vector);
        cur.triple_attention.push_back(it->second.triple_attention);
      }
    } else if (cfg.variant == Variant::IE_CA) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        GraphVector g = graph_vector_ca(tape, params, graph_for(ids[j]), cur.hidden[j]);
        cur.graph_vectors.push_back(g.vector);
        cur.triple_attention.push_back(std::move(g.triple_attention));
      }
    }
    if (!cur.graph_vectors.empty()) cur.graph_matrix = stack_rows(cur.graph_vectors);
  }
  trace.final_state = state;
  return trace;
}

Var encoder_token_distribution(Tape& tape, const ModelParams& params, Var hidden) {
  return softmax(linear(tape, params.output_weight, params.output_bias, hidden));
}

DecodeStep decode_step(Tape& tape, const ModelParams& params, const LstmState& state,
                       TokenId previous, const EncoderTrace& trace) {
  const SentenceTrace& last = trace.sentences.back();
  if (!last.hidden_matrix.valid()) throw std::invalid_argument("decode_step: trace has no X4 states");
  const std::vector<bool> mask(last.tokens.size(), true);
  DecodeStep out;
  Var query = state.top();
  Attention sa = state_context(tape, query, last.hidden_matrix, params.state_bilinear, mask);
  out.state_attention = to_vector(sa.weights);
  std::optional<Var> knowledge;
  if (params.config.uses_knowledge()) {
    Attention ka = knowledge_context(tape, query, last.graph_matrix, params.knowledge_bilinear, mask);
    out.knowledge_attention = to_vector(ka.weights);
    knowledge = ka.context;
  }
  Var context = msa_context(tape, params, sa.context, knowledge);
  out.state = lstm_step_ctx(tape, params.lstm, state, embed(tape, params.embedding, previous), context);
  out.distribution = encoder_token_distribution(tape, params, out.state.top());
  return out;
}

LossTerms story_loss(Tape& tape, const ModelParams& params, const Story& story,
                     const TripleStore* store) {
  if (story.ending.ids.empty()) throw std::invalid_argument("story_loss: story has no ending");
  EncoderTrace trace = encode_story(tape, params, story, store);
  LossTerms terms;

  std::vector<Var> enc_terms;
  for (std::size_t i = 1; i < kContextSentences; ++i) {
    const SentenceTrace& s = trace.sentences[i];
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
      Var dist = encoder_token_distribution(tape, params, s.predict_states[j]);
      enc_terms.push_back(cross_entropy(dist, s.tokens[j]));
    }
  }
  terms.encoder_tokens = enc_terms.size();
  terms.encoder = sum(concat(enc_terms));

  std::vector<TokenId> targets = story.ending.ids;
  targets.push_back(kEos);
  std::vector<Var> dec_terms;
  LstmState state = trace.final_state;
  TokenId previous = kBos;
  for (TokenId target : targets) {
    DecodeStep step = decode_step(tape, params, state, previous, trace);
    dec_terms.push_back(cross_entropy(step.distribution, target));
    state = std::move(step.state);
    previous = target;
  }
  terms.decoder_tokens = dec_terms.size();
  terms.decoder = sum(concat(dec_terms));
  terms.total = add(terms.encoder, terms.decoder);
  return terms;
}

}  // namespace storygen
