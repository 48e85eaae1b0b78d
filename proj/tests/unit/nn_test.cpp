#include <gtest/gtest.h>

#include "storygen/nn.hpp"
#include "test_support.hpp"

using namespace storygen;
namespace plain = storygen::testing::plain;

namespace {

std::vector<double> values(Var v) { return {v.value().begin(), v.value().end()}; }

}  // namespace

TEST(Lstm, ParameterShapes) {
  LstmStackParams p(5, 3, 2);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].weight.shape, (Shape{12, 8}));
  EXPECT_EQ(p.layers[1].weight.shape, (Shape{12, 6}));
  EXPECT_EQ(p.layers[1].bias.shape, (Shape{12}));
  EXPECT_EQ(p.tensors().size(), 4u);
}

TEST(Lstm, ForgetBiasInitialisation) {
  LstmStackParams p(4, 3, 1);
  Rng rng(1);
  p.init(rng, 0.08, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(p.layers[0].bias.values[3 + k], 1.0);
    EXPECT_LE(std::abs(p.layers[0].bias.values[k]), 0.08);
  }
  for (double w : p.layers[0].weight.values) {
    EXPECT_LE(std::abs(w), 0.08);
  }
}

TEST(Lstm, StepMatchesReferenceFormula) {
  Rng rng(5);
  LstmStackParams p(4, 3, 2);
  p.init(rng, 0.7, 0.3);
  plain::LstmPlainState ref = plain::lstm_zero(p);
  Tape tape;
  LstmState s = zero_state(tape, p);
  for (int t = 0; t < 4; ++t) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-1, 1);
    s = lstm_step(tape, p, s, tape.constant({4}, x));
    ref = plain::lstm_step(p, ref, x);
    for (std::size_t l = 0; l < 2; ++l) {
      auto h = values(s.h[l]);
      auto c = values(s.c[l]);
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(h[k], ref.h[l][k], 1e-14);
        EXPECT_NEAR(c[k], ref.c[l][k], 1e-14);
      }
    }
  }
}

TEST(Lstm, ContextStepEqualsConcatenatedInput) {
  Rng rng(9);
  LstmStackParams p(5, 2, 1);
  p.init(rng, 0.5, 1.0);
  Tape tape;
  LstmState z = zero_state(tape, p);
  Var x = tape.constant(Tensor::vector({0.1, -0.2, 0.3}));
  Var c = tape.constant(Tensor::vector({0.5, 0.4}));
  auto a = values(lstm_step_ctx(tape, p, z, x, c).top());
  auto b = values(lstm_step(tape, p, z, concat({x, c})).top());
  EXPECT_EQ(a, b);
  EXPECT_THROW(lstm_step_ctx(tape, p, z, x, tape.zeros({3})), ShapeError);
}

TEST(Gru, BidirectionalFinalStateMatchesReference) {
  Rng rng(21);
  GruParams g(3, 2);
  g.init(rng, 0.9);
  EXPECT_EQ(g.tensors().size(), 8u);
  std::vector<std::vector<double>> seq(3, std::vector<double>(3));
  for (auto& v : seq) {
    for (auto& x : v) x = rng.uniform(-1, 1);
  }
  Tape tape;
  const Var in[] = {tape.constant({3}, seq[0]), tape.constant({3}, seq[1]), tape.constant({3}, seq[2])};
  auto out = values(bigru_final(tape, g, in));
  auto ref = plain::bigru(g, seq);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(out[k], ref[k], 1e-14);
}

TEST(Gru, RequiresExactlyThreeInputs) {
  GruParams g(2, 2);
  Tape tape;
  const Var in[] = {tape.zeros({2}), tape.zeros({2})};
  EXPECT_THROW(bigru_final(tape, g, in), std::invalid_argument);
}

TEST(Embedding, LookupAndBounds) {
  EmbeddingTable e{Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}), true};
  Tape tape;
  EXPECT_EQ(values(embed(tape, e, 2)), (std::vector<double>{5, 6}));
  EXPECT_THROW(embed(tape, e, 3), std::out_of_range);
}

TEST(Linear, AffineMap) {
  Tensor w = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::vector({0.5, -0.5});
  Tape tape;
  EXPECT_EQ(values(linear(tape, w, b, tape.constant(Tensor::vector({1, 1})))),
            (std::vector<double>{3.5, 6.5}));
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.unit(), b.unit());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    double u = c.unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(c.below(7), 7u);
  }
  EXPECT_NE(derive_seed(1, "init"), derive_seed(1, "shuffle"));
  EXPECT_EQ(derive_seed(1, "init"), derive_seed(1, "init"));
}

TEST(Rng, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}
