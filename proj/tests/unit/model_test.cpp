#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "storygen/model.hpp"
#include "test_support.hpp"

using namespace storygen;
namespace st = storygen::testing;
namespace plain = storygen::testing::plain;

namespace {

std::vector<double> values(Var v) { return {v.value().begin(), v.value().end()}; }

class ModelFixture : public ::testing::TestWithParam<Variant> {
 protected:
  ModelFixture() : vocab(st::tiny_vocabulary()), store(st::tiny_store(vocab)) {}

  ModelParams make(std::uint64_t seed) {
    Rng rng(seed);
    return ModelParams::create(st::tiny_config(GetParam(), store.relations().size()), rng);
  }

  Vocabulary vocab;
  TripleStore store;
};

Story ids_story(std::array<std::vector<TokenId>, 4> ctx, std::vector<TokenId> ending) {
  Story s;
  for (std::size_t i = 0; i < 4; ++i) s.context[i].ids = std::move(ctx[i]);
  s.ending.ids = std::move(ending);
  return s;
}

}  // namespace

TEST(ModelConfig, VariantNames) {
  EXPECT_EQ(variant_name(Variant::IE), "ie");
  EXPECT_EQ(parse_variant("ie-ga"), Variant::IE_GA);
  EXPECT_EQ(parse_variant("ie-ca"), Variant::IE_CA);
  EXPECT_THROW(parse_variant("ca"), std::invalid_argument);
}

TEST(ModelConfig, ValidateRejectsInconsistentDims) {
  ModelConfig c = st::tiny_config(Variant::IE_CA, 2);
  EXPECT_NO_THROW(c.validate());
  c.relation_dim = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = st::tiny_config(Variant::IE_CA, 2);
  c.gru_hidden = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = st::tiny_config(Variant::IE, 0);
  c.hidden = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ModelConfig, GraphWidth) {
  EXPECT_EQ(st::tiny_config(Variant::IE, 0).graph_dim(), 0u);
  EXPECT_EQ(st::tiny_config(Variant::IE_GA, 2).graph_dim(), 12u);
  EXPECT_EQ(st::tiny_config(Variant::IE_CA, 2).graph_dim(), 8u);
}

TEST_P(ModelFixture, ParameterShapesFollowVariant) {
  ModelParams p = make(1);
  const auto& c = p.config;
  const std::size_t g = c.graph_dim();
  EXPECT_EQ(p.lstm.layers[0].weight.shape, (Shape{4 * c.hidden, c.word_dim + c.context_dim + c.hidden}));
  EXPECT_EQ(p.context_weight.shape, (Shape{c.context_dim, c.hidden + g}));
  EXPECT_EQ(p.output_weight.shape, (Shape{c.vocab_size, c.hidden}));
  std::set<std::string> names;
  for (const auto& [n, t] : p.named_tensors()) {
    EXPECT_TRUE(names.insert(n).second) << n;
    EXPECT_NO_THROW(t->check_invariants());
  }
  EXPECT_EQ(names.count("ga.relation_proj") + names.count("ga.head_proj"),
            GetParam() == Variant::IE_GA ? 2u : 0u);
  EXPECT_EQ(names.count("ca.memory_bilinear"), GetParam() == Variant::IE_CA ? 1u : 0u);
  EXPECT_EQ(names.count("attention.knowledge_bilinear"), GetParam() == Variant::IE ? 0u : 1u);
  std::size_t total = 0;
  for (const auto& [n, t] : p.named_tensors()) total += t->size();
  EXPECT_EQ(total, p.parameter_count());
}

TEST_P(ModelFixture, LossMatchesReferenceImplementation) {
  ModelParams p = make(3);
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Story s = st::random_story(vocab, rng, 1, 5);
    Tape tape;
    LossTerms t = story_loss(tape, p, s, &store);
    plain::PlainLoss ref = plain::story_loss(p, s, &store);
    EXPECT_NEAR(t.encoder.scalar(), ref.encoder, 1e-10);
    EXPECT_NEAR(t.decoder.scalar(), ref.decoder, 1e-10);
    EXPECT_NEAR(t.total.scalar(), ref.encoder + ref.decoder, 1e-10);
    EXPECT_EQ(t.decoder_tokens, s.ending.ids.size() + 1);
    EXPECT_EQ(t.encoder_tokens,
              s.context[1].ids.size() + s.context[2].ids.size() + s.context[3].ids.size());
  }
}

TEST_P(ModelFixture, AttentionRowsAreDistributions) {
  ModelParams p = make(5);
  Story s = st::tiny_story(vocab);
  Tape tape;
  EncoderTrace trace = encode_story(tape, p, s, &store);
  plain::PlainLoss ref = plain::story_loss(p, s, &store);
  for (std::size_t i = 1; i < 4; ++i) {
    const auto& cur = trace.sentences[i];
    ASSERT_EQ(cur.state_attention.size(), s.context[i].ids.size());
    for (std::size_t j = 0; j < cur.state_attention.size(); ++j) {
      const auto& row = cur.state_attention[j];
      ASSERT_EQ(row.size(), s.context[i - 1].ids.size());
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
      for (std::size_t k = 0; k < row.size(); ++k) {
        EXPECT_GE(row[k], 0.0);
        EXPECT_NEAR(row[k], ref.state_attention[i - 1][j][k], 1e-12);
      }
    }
    EXPECT_EQ(cur.knowledge_attention.size(), GetParam() == Variant::IE ? 0u : s.context[i].ids.size());
    for (const auto& row : cur.knowledge_attention) {
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  }
  EXPECT_TRUE(trace.sentences[0].state_attention.empty());
}

TEST_P(ModelFixture, MsaRequiresMatchingKnowledgeArgument) {
  ModelParams p = make(6);
  Tape tape;
  Var ch = tape.zeros({p.config.hidden});
  if (GetParam() == Variant::IE) {
    EXPECT_NO_THROW(msa_context(tape, p, ch, std::nullopt));
    EXPECT_THROW(msa_context(tape, p, ch, tape.zeros({4})), std::invalid_argument);
  } else {
    EXPECT_THROW(msa_context(tape, p, ch, std::nullopt), std::invalid_argument);
    Var cx = tape.zeros({p.config.graph_dim()});
    auto out = values(msa_context(tape, p, ch, cx));
    EXPECT_EQ(out, p.context_bias.values);
  }
}

TEST_P(ModelFixture, EncoderAndDecoderShareParameters) {
  ModelParams p = make(7);
  Story s = st::tiny_story(vocab);
  Tape tape;
  LossTerms t = story_loss(tape, p, s, &store);
  tape.backward(t.decoder);
  // Decoder-only loss reaches the shared LSTM, the output layer and the
  // embeddings of encoder-only words.
  for (const Tensor* shared : {&p.lstm.layers[0].weight, &p.lstm.layers[1].weight, &p.output_weight}) {
    auto g = tape.grad_of(*shared);
    ASSERT_FALSE(g.empty());
    EXPECT_GT(std::inner_product(g.begin(), g.end(), g.begin(), 0.0), 0.0);
  }
  auto names = p.named_tensors();
  std::size_t lstm_tensors = 0;
  for (const auto& [n, ptr] : names) lstm_tensors += n.rfind("lstm.", 0) == 0;
  EXPECT_EQ(lstm_tensors, 2 * p.config.num_layers);
  auto ge = tape.grad_of(p.embedding.table);
  const TokenId x1_word = s.context[0].ids[0];
  double norm = 0.0;
  for (std::size_t d = 0; d < p.config.word_dim; ++d) norm += std::abs(ge[x1_word * p.config.word_dim + d]);
  EXPECT_GT(norm, 0.0);
}

TEST_P(ModelFixture, StateCarriesAcrossSentences) {
  ModelParams p = make(8);
  Story a = st::tiny_story(vocab);
  Story b = a;
  b.context[0].ids = {vocab.id("w11")};
  Tape tape;
  EncoderTrace ta = encode_story(tape, p, a, &store);
  EncoderTrace tb = encode_story(tape, p, b, &store);
  EXPECT_NE(values(ta.sentences[3].hidden.back()), values(tb.sentences[3].hidden.back()));
  EXPECT_EQ(values(ta.sentences[1].predict_states[0]), values(ta.sentences[0].hidden.back()));
}

INSTANTIATE_TEST_SUITE_P(Variants, ModelFixture,
                         ::testing::Values(Variant::IE, Variant::IE_GA, Variant::IE_CA),
                         [](const auto& info) {
                           std::string n(variant_name(info.param));
                           for (auto& c : n) {
                             if (c == '-') c = '_';
                           }
                           return n;
                         });

TEST(GraphAttention, MatchesReferenceFormula) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  Rng rng(12);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE_GA, store.relations().size()), rng);
  for (int w = 4; w < 20; ++w) {
    ConceptGraph g = store.retrieve(static_cast<TokenId>(w));
    Tape tape;
    GraphVector gv = graph_vector_ga(tape, p, g);
    auto [ref, alpha] = plain::graph_vector_ga(p, g);
    auto out = values(gv.vector);
    ASSERT_EQ(out.size(), 12u);
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], ref[k], 1e-12);
    ASSERT_EQ(gv.triple_attention.size(), alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) EXPECT_NEAR(gv.triple_attention[k], alpha[k], 1e-12);
  }
}

TEST(GraphAttention, EmptyGraphFallsBackToDoubledEmbedding) {
  Vocabulary v = st::tiny_vocabulary();
  Rng rng(13);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE_GA, 2), rng);
  Tape tape;
  GraphVector gv = graph_vector_ga(tape, p, ConceptGraph{v.id("w14"), {}});
  auto e = plain::row(p.embedding.table, v.id("w14"));
  EXPECT_EQ(values(gv.vector), plain::join(e, e));
  EXPECT_TRUE(gv.triple_attention.empty());
}

TEST(GraphAttention, RejectsForeignHeads) {
  Rng rng(14);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE_GA, 2), rng);
  ConceptGraph g{5, {{6, 0, 7, 1.0}}};
  Tape tape;
  EXPECT_THROW(graph_vector_ga(tape, p, g), std::invalid_argument);
  ConceptGraph bad_rel{5, {{5, 9, 7, 1.0}}};
  EXPECT_THROW(graph_vector_ga(tape, p, bad_rel), std::out_of_range);
}

TEST(ContextualAttention, MatchesReferenceFormula) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  Rng rng(15);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE_CA, store.relations().size()), rng);
  for (int w = 4; w < 20; ++w) {
    ConceptGraph g = store.retrieve(static_cast<TokenId>(w));
    std::vector<double> q(p.config.hidden);
    for (auto& x : q) x = rng.uniform(-1, 1);
    Tape tape;
    GraphVector gv = graph_vector_ca(tape, p, g, tape.constant({q.size()}, q));
    auto [ref, alpha] = plain::graph_vector_ca(p, g, q);
    auto out = values(gv.vector);
    ASSERT_EQ(out.size(), 8u);
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out[k], ref[k], 1e-12);
    for (std::size_t k = 0; k < alpha.size(); ++k) EXPECT_NEAR(gv.triple_attention[k], alpha[k], 1e-12);
  }
}

TEST(ContextualAttention, EmptyGraphFallsBackToPaddedEmbedding) {
  Vocabulary v = st::tiny_vocabulary();
  Rng rng(16);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE_CA, 2), rng);
  Tape tape;
  GraphVector gv = graph_vector_ca(tape, p, ConceptGraph{v.id("w15"), {}}, tape.zeros({8}));
  auto out = values(gv.vector);
  auto e = plain::row(p.embedding.table, v.id("w15"));
  ASSERT_EQ(out.size(), 8u);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(out[k], e[k]);
  EXPECT_EQ(out[6], 0.0);
  EXPECT_EQ(out[7], 0.0);
}

TEST(Objective, HandComputedLoss) {
  ModelConfig c;
  c.variant = Variant::IE;
  c.num_layers = 1;
  c.hidden = 3;
  c.word_dim = 2;
  c.context_dim = 2;
  c.vocab_size = 6;
  Rng rng(17);
  ModelParams p = ModelParams::create(c, rng);
  std::fill(p.output_weight.values.begin(), p.output_weight.values.end(), 0.0);
  p.output_bias.values = {0, 0, 0, 0, 1, 2};
  Story s = ids_story({{{4}, {5}, {4}, {5}}}, {4});
  Tape tape;
  LossTerms t = story_loss(tape, p, s, nullptr);
  const double log_z = std::log(4.0 + std::exp(1.0) + std::exp(2.0));
  EXPECT_NEAR(t.encoder.scalar(), 3 * log_z - 5, 1e-12);
  EXPECT_NEAR(t.decoder.scalar(), 2 * log_z - 1, 1e-12);
  EXPECT_NEAR(t.total.scalar(), 5 * log_z - 6, 1e-12);
}

TEST(Objective, UniformModelCostsLogVPerToken) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  for (Variant var : {Variant::IE, Variant::IE_GA, Variant::IE_CA}) {
    Rng rng(18);
    ModelParams p = ModelParams::create(st::tiny_config(var, store.relations().size()), rng);
    std::fill(p.output_weight.values.begin(), p.output_weight.values.end(), 0.0);
    std::fill(p.output_bias.values.begin(), p.output_bias.values.end(), 0.0);
    Story s = st::tiny_story(v);
    Tape tape;
    LossTerms t = story_loss(tape, p, s, &store);
    EXPECT_NEAR(t.decoder.scalar() / static_cast<double>(t.decoder_tokens), std::log(20.0), 1e-12);
    EXPECT_NEAR(t.encoder.scalar() / static_cast<double>(t.encoder_tokens), std::log(20.0), 1e-12);
  }
}

TEST(Objective, GradientsMatchFiniteDifferences) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  for (Variant var : {Variant::IE, Variant::IE_GA, Variant::IE_CA}) {
    Rng rng(19);
    ModelConfig c = st::tiny_config(var, store.relations().size());
    c.hidden = 3;
    c.context_dim = 3;
    c.gru_hidden = 3;
    c.vocab_size = 20;
    ModelParams p = ModelParams::create(c, rng);
    Story s = ids_story({{{4, 16}, {5, 6}, {7}, {8, 17}}}, {9});
    auto loss = [&](Tape& tape) { return story_loss(tape, p, s, &store).total; };
    auto r = st::gradient_check(p.named_tensors(), loss, 1e-3);
    EXPECT_LT(r.max_rel_error, 1e-5) << variant_name(var) << " " << r.worst;
  }
}

TEST(Objective, RejectsEmptySentences) {
  Vocabulary v = st::tiny_vocabulary();
  Rng rng(20);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE, 0), rng);
  Story s = st::tiny_story(v);
  s.ending.ids.clear();
  Tape tape;
  EXPECT_THROW(story_loss(tape, p, s, nullptr), std::invalid_argument);
  s = st::tiny_story(v);
  s.context[2].ids.clear();
  EXPECT_THROW(encode_story(tape, p, s, nullptr), std::invalid_argument);
}
