#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "storygen/autodiff.hpp"
#include "test_support.hpp"

using namespace storygen;
using storygen::testing::gradient_check;
using storygen::testing::random_tensor;

namespace {

std::vector<double> values(Var v) { return {v.value().begin(), v.value().end()}; }

}  // namespace

TEST(Tensor, MatrixLayoutIsRowMajor) {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m.at(0, 2), 3.0);
}

TEST(Tensor, InvariantCheckCatchesBadSizes) {
  Tensor t({2, 2});
  t.values.pop_back();
  EXPECT_THROW(t.check_invariants(), ShapeError);
}

TEST(Autodiff, MatmulMatrixVector) {
  Tape tape;
  Var w = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var x = tape.constant(Tensor::vector({1, 0, -1}));
  EXPECT_EQ(values(matmul(w, x)), (std::vector<double>{-2, -2}));
  Var y = tape.constant(Tensor::vector({1, 1}));
  EXPECT_EQ(values(matmul(y, w)), (std::vector<double>{5, 7, 9}));
}

TEST(Autodiff, MatmulShapeMismatchThrows) {
  Tape tape;
  Var w = tape.zeros({2, 3});
  Var x = tape.zeros({2});
  EXPECT_THROW(matmul(w, x), ShapeError);
  EXPECT_THROW(add(tape.zeros({2}), tape.zeros({3})), ShapeError);
}

TEST(Autodiff, SoftmaxSumsToOneAndIsStable) {
  Tape tape;
  Var s = softmax(tape.constant(Tensor::vector({1000.0, 1000.0, 999.0})));
  auto v = values(s);
  EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(v[2]));
  EXPECT_NEAR(v[0], v[1], 1e-15);
}

TEST(Autodiff, SoftmaxIsPermutationEquivariant) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.uniform(-5, 5);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    std::vector<double> px(6);
    for (std::size_t i = 0; i < 6; ++i) px[i] = x[perm[i]];
    Tape tape;
    auto a = values(softmax(tape.constant({6}, x)));
    auto b = values(softmax(tape.constant({6}, px)));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(b[i], a[perm[i]], 1e-15);
  }
}

TEST(Autodiff, MaskedSoftmaxZeroesMaskedEntries) {
  Tape tape;
  auto v = values(masked_softmax(tape.constant(Tensor::vector({3.0, 1.0, 2.0})), {true, false, true}));
  EXPECT_EQ(v[1], 0.0);
  EXPECT_NEAR(v[0] + v[2], 1.0, 1e-15);
  EXPECT_NEAR(v[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Autodiff, MaskedSoftmaxRejectsEmptyMask) {
  Tape tape;
  EXPECT_THROW(masked_softmax(tape.constant(Tensor::vector({1.0, 2.0})), {false, false}),
               std::invalid_argument);
}

TEST(Autodiff, CrossEntropyClampsZeroProbability) {
  Tape tape;
  Var d = tape.constant(Tensor::vector({1.0, 0.0}));
  EXPECT_NEAR(cross_entropy(d, 1).scalar(), -std::log(kLogEpsilon), 1e-9);
  EXPECT_EQ(cross_entropy(d, 0).scalar(), 0.0);
  EXPECT_THROW(cross_entropy(d, 2), std::out_of_range);
}

TEST(Autodiff, CrossEntropyPropagatesNan) {
  Tape tape;
  Var d = tape.constant(Tensor::vector({std::nan(""), 1.0}));
  EXPECT_TRUE(std::isnan(cross_entropy(d, 0).scalar()));
}

TEST(Autodiff, ParamIsBoundOncePerTape) {
  Tensor w = Tensor::vector({1.0, 2.0});
  Tape tape;
  Var a = tape.param(w);
  Var b = tape.param(w);
  EXPECT_EQ(a.id, b.id);
  tape.backward(sum(mul(a, b)));
  auto g = tape.grad_of(w);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], 4.0);
}

TEST(Autodiff, GradientsAccumulateIntoTensors) {
  Tensor w = Tensor::vector({3.0});
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    Var x = tape.param(w);
    tape.backward(sum(scale(x, 2.0)));
    Tensor* ptr = &w;
    tape.accumulate_param_grads(std::span<Tensor* const>(&ptr, 1));
  }
  ASSERT_EQ(w.grad.size(), 1u);
  EXPECT_DOUBLE_EQ(w.grad[0], 4.0);
  w.zero_grad();
  EXPECT_DOUBLE_EQ(w.grad[0], 0.0);
}

TEST(Autodiff, BackwardRequiresScalarAndRunsOnce) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(x), ShapeError);
  Var s = sum(x);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), std::logic_error);
}

TEST(Autodiff, UnusedParameterHasNoGradient) {
  Tensor w = Tensor::vector({1.0});
  Tape tape;
  Var s = sum(tape.constant(Tensor::vector({1.0})));
  tape.backward(s);
  EXPECT_TRUE(tape.grad_of(w).empty());
}

TEST(Autodiff, ConcatSliceRowStack) {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1, 2}));
  Var b = tape.constant(Tensor::vector({3}));
  Var c = concat({a, b});
  EXPECT_EQ(values(c), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(values(slice(c, 1, 2)), (std::vector<double>{2, 3}));
  const Var rows[] = {a, a};
  Var m = stack_rows(rows);
  EXPECT_EQ(m.shape(), (Shape{2, 2}));
  EXPECT_EQ(values(row(m, 1)), (std::vector<double>{1, 2}));
  EXPECT_THROW(slice(c, 2, 2), ShapeError);
}

TEST(Autodiff, GradientCheckOfComposedOps) {
  Rng rng(11);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor u = random_tensor({4, 2}, rng);
  Tensor x = random_tensor({4}, rng);
  Tensor m = random_tensor({3, 4}, rng);
  std::vector<std::pair<std::string, Tensor*>> params = {
      {"w", &w}, {"u", &u}, {"x", &x}, {"m", &m}};
  auto loss = [&](Tape& tape) {
    Var h = tanh(matmul(tape.param(w), tape.param(x)));
    Var g = sigmoid(matmul(tape.param(x), tape.param(u)));
    Var scores = matmul(tape.param(m), tape.param(x));
    Var att = softmax(scores);
    Var mixed = matmul(att, stack_rows(std::vector<Var>{row(tape.param(m), 0), row(tape.param(m), 1),
                                                         row(tape.param(m), 2)}));
    Var joined = concat({h, g, slice(mixed, 1, 2)});
    Var dist = softmax(scale(sub(joined, tape.constant(Tensor::vector({0.1, 0, 0, 0, 0, 0.2, -0.3}))), 1.5));
    return add(cross_entropy(dist, 2), dot(h, h));
  };
  auto r = gradient_check(params, loss, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_EQ(r.checked, 12u + 8u + 4u + 12u);
}

TEST(Autodiff, MaskedSoftmaxGradient) {
  Rng rng(3);
  Tensor x = random_tensor({5}, rng);
  std::vector<std::pair<std::string, Tensor*>> params = {{"x", &x}};
  auto loss = [&](Tape& tape) {
    Var p = masked_softmax(tape.param(x), {true, false, true, true, false});
    return cross_entropy(p, 3);
  };
  auto r = gradient_check(params, loss, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}
