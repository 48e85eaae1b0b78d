#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "storygen/checkpoint.hpp"
#include "storygen/trainer.hpp"
#include "test_support.hpp"

using namespace storygen;
namespace st = storygen::testing;

namespace {

Dataset random_dataset(const Vocabulary& v, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(st::random_story(v, rng, 1, 4));
    d.back().id = i;
  }
  return d;
}

}  // namespace

TEST(Adam, ScalarTraceMatchesReference) {
  Tensor x = Tensor::vector({1.0});
  Tensor* p = &x;
  std::span<Tensor* const> params(&p, 1);
  AdamState state;
  AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  const double grads[] = {0.5, -0.2, 1.5};
  const double expected[] = {0.90000000199999996, 0.86543941811651058536, 0.79628936180199735791};
  for (int i = 0; i < 3; ++i) {
    x.grad = {grads[i]};
    adam_step(params, state, cfg);
    EXPECT_NEAR(x.values[0], expected[i], 1e-15) << "step " << i + 1;
  }
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, MissingGradientCountsAsZero) {
  Tensor x = Tensor::vector({2.0, 3.0});
  Tensor* p = &x;
  AdamState state;
  adam_step(std::span<Tensor* const>(&p, 1), state, AdamConfig{});
  EXPECT_EQ(x.values, (std::vector<double>{2.0, 3.0}));
}

TEST(Clip, RescalesToMaxNorm) {
  Tensor a = Tensor::vector({0, 0});
  Tensor b = Tensor::vector({0});
  a.grad = {3.0, 0.0};
  b.grad = {4.0};
  Tensor* ps[] = {&a, &b};
  EXPECT_DOUBLE_EQ(clip_global_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(global_grad_norm(ps), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_global_norm(ps, 5.0), 1.0, 1e-15);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.clip_norm = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.adam.beta1 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SplitDev, DeterministicDisjointPartition) {
  Vocabulary v = st::tiny_vocabulary();
  Dataset d = random_dataset(v, 40, 1);
  auto [train_a, dev_a] = split_dev(d, 0.1, 5);
  auto [train_b, dev_b] = split_dev(d, 0.1, 5);
  ASSERT_EQ(dev_a.size(), 4u);
  EXPECT_EQ(train_a.size(), 36u);
  std::set<std::size_t> ids;
  for (const auto& s : train_a) ids.insert(s.id);
  for (const auto& s : dev_a) EXPECT_TRUE(ids.insert(s.id).second);
  EXPECT_EQ(ids.size(), 40u);
  for (std::size_t i = 0; i < dev_a.size(); ++i) EXPECT_EQ(dev_a[i].id, dev_b[i].id);
  EXPECT_THROW(split_dev(d, 1.0, 5), std::invalid_argument);
}

TEST(Train, LossDecreasesAndRunIsReproducible) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  Dataset d = random_dataset(v, 6, 2);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 3;
  cfg.adam.lr = 0.02;
  cfg.seed = 9;
  auto run = [&](ModelParams& p) { return train(p, d, &d, &store, cfg); };
  Rng r1(4), r2(4);
  ModelParams a = ModelParams::create(st::tiny_config(Variant::IE_CA, store.relations().size()), r1);
  ModelParams b = ModelParams::create(st::tiny_config(Variant::IE_CA, store.relations().size()), r2);
  TrainReport ra = run(a);
  TrainReport rb = run(b);
  ASSERT_EQ(ra.epochs.size(), 8u);
  EXPECT_LT(ra.epochs.back().mean_loss, ra.epochs.front().mean_loss);
  EXPECT_TRUE(ra.same_numbers(rb));
  EXPECT_EQ(checkpoint_hash(a), checkpoint_hash(b));
  for (const auto& e : ra.epochs) {
    ASSERT_TRUE(e.dev_perplexity.has_value());
    EXPECT_NEAR(e.mean_loss, e.mean_encoder + e.mean_decoder, 1e-9);
  }
  for (const auto& [n, t] : a.named_tensors()) EXPECT_TRUE(t->grad.empty()) << n;
}

TEST(Train, FrozenEmbeddingsStayFixed) {
  Vocabulary v = st::tiny_vocabulary();
  Dataset d = random_dataset(v, 3, 3);
  Rng rng(5);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE, 0), rng);
  p.embedding.trainable = false;
  const auto before = p.embedding.table.values;
  const auto out_before = p.output_weight.values;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  train(p, d, nullptr, nullptr, cfg);
  EXPECT_EQ(p.embedding.table.values, before);
  EXPECT_NE(p.output_weight.values, out_before);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
  Vocabulary v = st::tiny_vocabulary();
  Dataset d = random_dataset(v, 4, 6);
  Rng rng(7);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE, 0), rng);
  p.output_bias.values[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(p, d, nullptr, nullptr, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("story"), std::string::npos) << msg;
  }
}

TEST(Train, WritesPerEpochCheckpoints) {
  Vocabulary v = st::tiny_vocabulary();
  Dataset d = random_dataset(v, 2, 8);
  Rng rng(9);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE, 0), rng);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.eval_every = 2;
  cfg.checkpoint_dir = std::filesystem::temp_directory_path() / "storygen_train_ckpt_test";
  std::filesystem::remove_all(cfg.checkpoint_dir);
  std::vector<std::size_t> seen;
  train(p, d, nullptr, nullptr, cfg, [&](const EpochReport& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_FALSE(std::filesystem::exists(cfg.checkpoint_dir / "epoch-1.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(cfg.checkpoint_dir / "epoch-2.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(cfg.checkpoint_dir / "epoch-3.ckpt"));
  ModelParams last = load_checkpoint(cfg.checkpoint_dir / "epoch-3.ckpt");
  EXPECT_EQ(checkpoint_hash(last), checkpoint_hash(p));
  std::filesystem::remove_all(cfg.checkpoint_dir);
}
