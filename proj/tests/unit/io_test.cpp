#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "storygen/attention_export.hpp"
#include "storygen/checkpoint.hpp"
#include "storygen/run_config.hpp"
#include "test_support.hpp"

using namespace storygen;
namespace st = storygen::testing;

TEST(Checkpoint, RoundTripIsBitExact) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  for (Variant var : {Variant::IE, Variant::IE_GA, Variant::IE_CA}) {
    Rng rng(1);
    ModelParams p = ModelParams::create(st::tiny_config(var, store.relations().size()), rng);
    p.embedding.trainable = var != Variant::IE_GA;
    std::stringstream ss;
    save_checkpoint(ss, p);
    const std::string bytes = ss.str();
    ModelParams back = load_checkpoint(ss);
    EXPECT_EQ(back.config, p.config);
    EXPECT_EQ(back.embedding.trainable, p.embedding.trainable);
    auto a = p.named_tensors();
    auto b = back.named_tensors();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].first, b[i].first);
      EXPECT_EQ(a[i].second->shape, b[i].second->shape);
      EXPECT_EQ(0, std::memcmp(a[i].second->values.data(), b[i].second->values.data(),
                               a[i].second->size() * sizeof(double)));
    }
    std::ostringstream again;
    save_checkpoint(again, back);
    EXPECT_EQ(bytes, again.str());
    EXPECT_EQ(checkpoint_hash(p), checkpoint_hash(back));
    EXPECT_EQ(checkpoint_hash(p), fnv1a(bytes));
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  Rng rng(2);
  ModelParams p = ModelParams::create(st::tiny_config(Variant::IE, 0), rng);
  std::ostringstream ss;
  save_checkpoint(ss, p);
  const std::string bytes = ss.str();

  std::istringstream bad_magic("NOTACKPT" + bytes.substr(8));
  EXPECT_THROW(load_checkpoint(bad_magic), CheckpointError);

  std::string wrong_version = bytes;
  wrong_version[6] = 9;
  std::istringstream v(wrong_version);
  try {
    load_checkpoint(v);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(truncated), CheckpointError);
  EXPECT_THROW(load_checkpoint(std::filesystem::path("/nonexistent/x.ckpt")), CheckpointError);
}

TEST(Checkpoint, ConfigTextRoundTrip) {
  ModelConfig c = st::tiny_config(Variant::IE_GA, 3);
  c.init_bound = 0.123;
  EXPECT_EQ(config_from_text(config_to_text(c)), c);
  EXPECT_THROW(config_from_text("hidden=abc\n"), CheckpointError);
  EXPECT_THROW(config_from_text("colour=blue\n"), CheckpointError);
}

namespace {

StoryAttention sample_attention(Variant var, std::uint64_t seed) {
  Vocabulary v = st::tiny_vocabulary();
  TripleStore store = st::tiny_store(v);
  Rng rng(seed);
  ModelParams p = ModelParams::create(st::tiny_config(var, store.relations().size()), rng);
  Story s = st::tiny_story(v);
  s.id = 42;
  Tape tape;
  EncoderTrace trace = encode_story(tape, p, s, &store);
  GenerationResult g = greedy_decode(p, s, &store, 5);
  return collect_attention(trace, g, v, var != Variant::IE);
}

}  // namespace

TEST(AttentionExport, RoundTrip) {
  std::vector<StoryAttention> stories = {sample_attention(Variant::IE_CA, 1),
                                         sample_attention(Variant::IE, 2),
                                         sample_attention(Variant::IE_GA, 3)};
  std::stringstream ss;
  write_attention(ss, stories);
  const std::string text = ss.str();
  auto back = read_attention(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0], stories[0]);
  EXPECT_EQ(back[1], stories[1]);
  EXPECT_EQ(back[2], stories[2]);
  std::ostringstream again;
  write_attention(again, back);
  EXPECT_EQ(text, again.str());
}

TEST(AttentionExport, LayoutAndShapes) {
  StoryAttention a = sample_attention(Variant::IE_CA, 4);
  EXPECT_EQ(a.story_id, 42u);
  EXPECT_EQ(a.sentence_tokens[0], (std::vector<std::string>{"w0", "w3", "w12"}));
  EXPECT_EQ(a.state[0].size(), 2u);     // X2 has 2 words
  EXPECT_EQ(a.state[0][0].size(), 3u);  // attending over X1's 3 words
  EXPECT_EQ(a.knowledge[2].size(), 2u);
  EXPECT_EQ(a.triples[0].size(), 3u);
  EXPECT_EQ(a.triples[0][2].size(), 0u);  // w12 has no graph
  EXPECT_EQ(a.triples[0][0].size(), 2u);
  std::ostringstream out;
  write_attention(out, {a});
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("storygen-attention v1\nstory 42 knowledge 1\ntokens 1 w0 w3 w12\n", 0), 0u);
  EXPECT_NE(text.find("encoder 2 rows 2 cols 3\n"), std::string::npos);
  EXPECT_NE(text.find("triples 1 3 0\n"), std::string::npos);
}

TEST(AttentionExport, RejectsMalformedInput) {
  std::istringstream no_header("story 1 knowledge 0\nend\n");
  EXPECT_THROW(read_attention(no_header), DataError);
  std::istringstream unterminated("storygen-attention v1\nstory 1 knowledge 0\n");
  EXPECT_THROW(read_attention(unterminated), DataError);
  std::istringstream out_of_range(
      "storygen-attention v1\nstory 1 knowledge 0\nencoder 2 rows 1 cols 1\nenc 2 1 2 0.5 -\nend\n");
  EXPECT_THROW(read_attention(out_of_range), DataError);
}

TEST(AttentionExport, HeatmapShades) {
  std::ostringstream out;
  render_heatmap(out, {{1.0, 0.0}, {0.5, 0.5}}, {"ab", "c"}, {"x", "y"});
  EXPECT_EQ(out.str(), "   xy\nab @ \n c ++\n");
}

TEST(RunConfig, DefaultsFileEnvironmentPrecedence) {
  RunConfig c;
  EXPECT_EQ(c.get("variant"), "ie-ca");
  EXPECT_EQ(c.get_size("beam"), 1u);
  std::istringstream file("# comment\nhidden = 64\nseed=3\nvariant=ie-ga\n");
  c.load(file);
  EXPECT_EQ(c.get_size("hidden"), 64u);
  std::string e1 = "STORYGEN_SEED=11", e2 = "STORYGEN_WORKERS=2", e3 = "OTHER=1";
  char* env[] = {e1.data(), e2.data(), e3.data(), nullptr};
  c.apply_environment(env);
  EXPECT_EQ(c.get_seed(), 11u);
  EXPECT_EQ(c.get_size("workers"), 2u);
  c.set("seed", "5");
  EXPECT_EQ(c.get_seed(), 5u);
  ModelConfig m = c.model_config(100, 4);
  EXPECT_EQ(m.variant, Variant::IE_GA);
  EXPECT_EQ(m.hidden, 64u);
  EXPECT_EQ(m.vocab_size, 100u);
  EXPECT_EQ(m.num_relations, 4u);
  TrainConfig t = c.train_config();
  EXPECT_EQ(t.seed, 5u);
  EXPECT_DOUBLE_EQ(t.adam.lr, 0.001);
  EXPECT_NE(c.echo().find("seed=5\n"), std::string::npos);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(c.set("hiden", "3"), ConfigError);
  EXPECT_THROW(c.set("hidden", "0"), ConfigError);
  EXPECT_THROW(c.set("hidden", "-3"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("variant", "gpt"), ConfigError);
  EXPECT_THROW(c.set("bleu_mode", "avg"), ConfigError);
  std::istringstream bad("hidden\n");
  EXPECT_THROW(c.load(bad), ConfigError);
  EXPECT_EQ(c.get_size("hidden"), 512u);
}

TEST(RunConfig, EchoIsSortedAndComplete) {
  RunConfig c;
  std::istringstream echo(c.echo());
  std::string line, prev;
  std::size_t n = 0;
  while (std::getline(echo, line)) {
    EXPECT_LT(prev, line);
    prev = line;
    ++n;
  }
  EXPECT_EQ(n, c.values().size());
  EXPECT_EQ(c.bleu_mode(), BleuMode::Corpus);
}
