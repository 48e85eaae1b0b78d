#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storygen/attention_export.hpp"
#include "storygen/checkpoint.hpp"
#include "storygen/corpus.hpp"
#include "storygen/decode.hpp"
#include "storygen/knowledge.hpp"
#include "storygen/metrics.hpp"
#include "storygen/parallel.hpp"
#include "storygen/run_config.hpp"
#include "storygen/text.hpp"
#include "storygen/trainer.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace storygen;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

constexpr const char* kVocabFile = "vocab.tsv";
constexpr const char* kStoreFile = "triples.store";
constexpr const char* kEmbeddingFile = "embeddings.txt";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> max_len;
};

void add_common(CLI::App* app, Common& c, bool decoding) {
  app->add_option("--config", c.config_path, "key=value run configuration file");
  app->add_option("--set", c.overrides, "override one config key (key=value)");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--variant", c.variant, "model variant: ie, ie-ga or ie-ca");
  app->add_option("--workers", c.workers, "evaluation threads");
  if (decoding) {
    app->add_option("--beam", c.beam, "beam width (1 = greedy)");
    app->add_option("--max-len", c.max_len, "maximum generated length");
  }
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg.load(fs::path(c.config_path));
  cfg.apply_environment(environ);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (c.variant) cfg.set("variant", *c.variant);
  if (c.workers) cfg.set("workers", std::to_string(*c.workers));
  if (c.beam) cfg.set("beam", std::to_string(*c.beam));
  if (c.max_len) cfg.set("max_len", std::to_string(*c.max_len));
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  std::istringstream lines(cfg.echo());
  std::string line;
  while (std::getline(lines, line)) std::cout << "config " << line << '\n';
}

void summary(const ordered_json& j) { std::cout << "summary " << j.dump() << std::endl; }

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// temp file + rename
template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    fn(out);
    if (!out) throw DataError("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

Vocabulary load_vocab(const fs::path& dir) {
  std::ifstream in(dir / kVocabFile);
  if (!in) throw DataError("cannot read " + (dir / kVocabFile).string() + " (run preprocess first)");
  return Vocabulary::load(in);
}

TripleStore load_store(const fs::path& dir, const Vocabulary& vocab) {
  std::ifstream in(dir / kStoreFile);
  if (!in) throw DataError("cannot read " + (dir / kStoreFile).string() + " (run preprocess first)");
  return TripleStore::load(in, vocab);
}

const TripleStore* store_for(const ModelConfig& c, const TripleStore& store) {
  return c.uses_knowledge() ? &store : nullptr;
}

ModelParams load_model(const fs::path& path, const Vocabulary& vocab, const TripleStore& store) {
  ModelParams p = load_checkpoint(path);
  if (p.config.vocab_size != vocab.size()) {
    throw DataError("checkpoint vocabulary size " + std::to_string(p.config.vocab_size) +
                    " differs from data directory vocabulary " + std::to_string(vocab.size()));
  }
  if (p.config.uses_knowledge() && p.config.num_relations != store.relations().size()) {
    throw DataError("checkpoint relation count differs from the data directory triple store");
  }
  return p;
}

Dataset load_stories(const fs::path& path, const Vocabulary& vocab) {
  return encode_stories(read_raw_stories(path), vocab);
}

Tokens ending_tokens(const Story& s, const Vocabulary& vocab) {
  Tokens out;
  for (TokenId id : s.ending.ids) out.push_back(vocab.word(id));
  return out;
}

std::vector<GenerationResult> generate_all(const ModelParams& p, const Dataset& data,
                                           const TripleStore* store, const RunConfig& cfg) {
  const std::size_t beam = cfg.get_size("beam");
  const std::size_t max_len = cfg.get_size("max_len");
  std::vector<GenerationResult> out(data.size());
  parallel_for(data.size(), cfg.get_size("workers"), [&](std::size_t i) {
    out[i] = beam == 1 ? greedy_decode(p, data[i], store, max_len)
                       : beam_search(p, data[i], store, beam, max_len);
  });
  return out;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  Common common;
  std::string corpus, triples, pos, embeddings, out;
};

int run_preprocess(const PreprocessArgs& a) {
  RunConfig cfg = resolve(a.common);
  const Variant variant = parse_variant(cfg.get("variant"));
  const fs::path out(a.out);
  auto raw = read_raw_stories(fs::path(a.corpus));
  Vocabulary vocab = build_vocab(raw, cfg.get_size("vocab_cap"));
  encode_stories(raw, vocab);  // validates every sentence

  TripleStore store;
  IngestReport report;
  const bool have_triples = !a.triples.empty() && fs::exists(a.triples);
  if (have_triples) {
    PosLexicon pos;
    if (!a.pos.empty()) pos = PosLexicon::load(fs::path(a.pos));
    store = TripleStore::ingest(fs::path(a.triples), vocab, pos, &report);
  } else if (variant != Variant::IE) {
    throw DataError(a.triples.empty() ? "variant " + cfg.get("variant") + " needs --triples"
                                      : "cannot read triple file " + a.triples);
  }

  fs::create_directories(out);
  write_file(out / kVocabFile, [&](std::ostream& o) { vocab.save(o); });
  write_file(out / kStoreFile, [&](std::ostream& o) { store.save(o, vocab); });
  std::optional<EmbeddingLoadReport> emb_report;
  if (!a.embeddings.empty()) {
    std::ifstream in(a.embeddings);
    if (!in) throw DataError("cannot read embeddings " + a.embeddings);
    Rng rng(derive_seed(cfg.get_seed(), "embedding-fill"));
    EmbeddingLoadReport r;
    EmbeddingTable table = load_embeddings(in, vocab, cfg.get_size("word_dim"), rng, &r);
    write_file(out / kEmbeddingFile, [&](std::ostream& o) { save_embeddings(o, table, vocab); });
    emb_report = r;
  }

  std::cout << "stories " << raw.size() << "\nvocabulary " << vocab.size() << '\n';
  if (have_triples) {
    std::cout << "triple_lines " << report.lines << "\nmalformed " << report.malformed
              << "\nconsidered " << report.considered << "\ndropped_vocab " << report.dropped_vocab
              << "\ndropped_pos " << report.dropped_pos << "\ntruncated " << report.truncated
              << "\nstored " << report.stored << '\n';
  }
  ordered_json j = {{"command", "preprocess"},
                    {"stories", raw.size()},
                    {"vocab_size", vocab.size()},
                    {"relations", store.relations().size()},
                    {"triples", store.triple_count()},
                    {"query_words", store.query_words()},
                    {"mean_triples_per_word", store.mean_triples_per_word()}};
  if (emb_report) {
    j["embeddings_found"] = emb_report->found;
    j["embeddings_malformed"] = emb_report->malformed;
  }
  summary(j);
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data, corpus, dev, out, checkpoint_dir;
  std::optional<std::size_t> epochs;
};

int run_train(TrainArgs& a) {
  if (a.epochs) a.common.overrides.push_back("epochs=" + std::to_string(*a.epochs));
  RunConfig cfg = resolve(a.common);
  echo_config(cfg);
  const fs::path data_dir(a.data);
  Vocabulary vocab = load_vocab(data_dir);
  TripleStore store = load_store(data_dir, vocab);
  ModelConfig mc = cfg.model_config(vocab.size(), store.relations().size());
  TrainConfig tc = cfg.train_config();
  tc.checkpoint_dir = a.checkpoint_dir;

  Dataset all = load_stories(a.corpus, vocab);
  Dataset train_set, dev_set;
  if (!a.dev.empty()) {
    train_set = std::move(all);
    dev_set = load_stories(a.dev, vocab);
  } else {
    std::tie(train_set, dev_set) = split_dev(all, cfg.get_double("dev_fraction"), cfg.get_seed());
  }
  if (train_set.empty()) throw DataError("training set is empty after the dev split");

  Rng rng(derive_seed(cfg.get_seed(), "model-init"));
  ModelParams params = ModelParams::create(mc, rng);
  if (fs::exists(data_dir / kEmbeddingFile)) {
    std::ifstream in(data_dir / kEmbeddingFile);
    EmbeddingLoadReport r;
    Rng fill(derive_seed(cfg.get_seed(), "embedding-fill"));
    params.embedding = load_embeddings(in, vocab, mc.word_dim, fill, &r);
    if (r.malformed > 0) {
      throw DataError(std::to_string(r.malformed) + " embedding rows do not have word_dim " +
                      std::to_string(mc.word_dim) + " values");
    }
  }
  params.embedding.trainable = !cfg.get_bool("freeze_embeddings");
  std::cout << "train_stories " << train_set.size() << "\ndev_stories " << dev_set.size()
            << "\nparameters " << params.parameter_count() << std::endl;

  const TripleStore* s = store_for(mc, store);
  TrainReport report = train(params, train_set, dev_set.empty() ? nullptr : &dev_set, s, tc,
                             [](const EpochReport& e) {
                               std::cout << "epoch " << e.epoch << " loss " << format_double(e.mean_loss)
                                         << " encoder " << format_double(e.mean_encoder)
                                         << " decoder " << format_double(e.mean_decoder)
                                         << " decoder_nll_per_token "
                                         << format_double(e.decoder_nll_per_token);
                               if (e.dev_perplexity) std::cout << " dev_ppl " << format_double(*e.dev_perplexity);
                               std::cout << " seconds " << std::fixed << std::setprecision(2) << e.seconds
                                         << std::defaultfloat << std::endl;
                             });
  write_file(a.out, [&](std::ostream& o) { save_checkpoint(o, params); });
  ordered_json j = {{"command", "train"},
                    {"variant", variant_name(mc.variant)},
                    {"epochs", report.epochs.size()},
                    {"checkpoint", a.out},
                    {"checkpoint_hash", hex(checkpoint_hash(params))}};
  if (!report.epochs.empty()) {
    j["final_loss"] = report.epochs.back().mean_loss;
    if (report.epochs.back().dev_perplexity) j["dev_perplexity"] = *report.epochs.back().dev_perplexity;
  }
  summary(j);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ModelArgs {
  Common common;
  std::string data, model, input, out;
};

int run_generate(const ModelArgs& a) {
  RunConfig cfg = resolve(a.common);
  Vocabulary vocab = load_vocab(a.data);
  TripleStore store = load_store(a.data, vocab);
  ModelParams p = load_model(a.model, vocab, store);
  Dataset data = load_stories(a.input, vocab);
  auto results = generate_all(p, data, store_for(p.config, store), cfg);
  std::size_t finished = 0;
  auto emit = [&](std::ostream& o) {
    for (const auto& r : results) o << r.story_id << '\t' << vocab.decode(r.tokens) << '\n';
  };
  if (a.out.empty()) {
    emit(std::cout);
  } else {
    write_file(a.out, emit);
  }
  for (const auto& r : results) finished += r.finished;
  summary({{"command", "generate"},
           {"stories", results.size()},
           {"finished", finished},
           {"beam", cfg.get_size("beam")},
           {"checkpoint_hash", hex(checkpoint_hash(p))}});
  return kOk;
}

std::map<std::size_t, Tokens> read_generations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read generations " + path.string());
  std::map<std::size_t, Tokens> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    auto id = parse_int(std::string_view(line).substr(0, tab));
    if (tab == std::string::npos || !id || *id < 0) {
      throw DataError("generations line " + std::to_string(lineno) + ": expected id<TAB>text");
    }
    out[static_cast<std::size_t>(*id)] = tokenize(line.substr(tab + 1));
  }
  return out;
}

struct EvalArgs {
  ModelArgs base;
  std::string generations, annotations;
};

void report_human(const AnnotationTable& table) {
  for (Metric m : {Metric::Grammar, Metric::Logicality}) {
    AgreementStats ag = agreement_stats(table, m);
    if (ag.items == 0) continue;
    const char* name = m == Metric::Grammar ? "grammar" : "logicality";
    KappaResult k = fleiss_kappa(category_counts(table, m));
    std::cout << name << " items " << ag.items << " mean_score " << format_double(mean_voted_score(table, m))
              << " agree_3of3 " << format_double(ag.full) << " agree_2of3 " << format_double(ag.majority)
              << " agree_1of3 " << format_double(ag.none) << " kappa " << format_double(k.kappa)
              << (k.degenerate ? " (degenerate)" : "") << '\n';
  }
}

int run_eval(const EvalArgs& a) {
  ordered_json j = {{"command", "eval"}};
  if (!a.base.model.empty()) {
    RunConfig cfg = resolve(a.base.common);
    Vocabulary vocab = load_vocab(a.base.data);
    TripleStore store = load_store(a.base.data, vocab);
    ModelParams p = load_model(a.base.model, vocab, store);
    Dataset data = load_stories(a.base.input, vocab);
    const TripleStore* s = store_for(p.config, store);
    PerplexityResult ppl = perplexity(p, data, s, cfg.get_size("workers"));

    std::vector<Tokens> cands, refs;
    if (!a.generations.empty()) {
      auto gens = read_generations(a.generations);
      for (const auto& story : data) {
        auto it = gens.find(story.id);
        if (it == gens.end()) throw DataError("no generation for story " + std::to_string(story.id));
        cands.push_back(it->second);
        refs.push_back(ending_tokens(story, vocab));
      }
    } else {
      auto results = generate_all(p, data, s, cfg);
      for (std::size_t i = 0; i < data.size(); ++i) {
        Tokens c;
        for (TokenId id : results[i].tokens) c.push_back(vocab.word(id));
        cands.push_back(std::move(c));
        refs.push_back(ending_tokens(data[i], vocab));
      }
    }
    const BleuMode mode = cfg.bleu_mode();
    const double b1 = corpus_bleu(cands, refs, 1, mode);
    const double b2 = corpus_bleu(cands, refs, 2, mode);
    std::cout << "PPL " << format_double(ppl.perplexity) << "\nBLEU-1 " << format_double(b1)
              << "\nBLEU-2 " << format_double(b2) << '\n';
    j["stories"] = data.size();
    j["perplexity"] = ppl.perplexity;
    j["bleu1"] = b1;
    j["bleu2"] = b2;
    j["bleu_mode"] = cfg.get("bleu_mode");
    j["checkpoint_hash"] = hex(checkpoint_hash(p));
  }
  if (!a.annotations.empty()) {
    std::ifstream in(a.annotations);
    if (!in) throw DataError("cannot read annotations " + a.annotations);
    AnnotationTable table = read_annotations(in);
    report_human(table);
    j["annotated_items"] = table.size();
  }
  summary(j);
  return kOk;
}

// ---------------------------------------------------------------------------

struct AttnArgs {
  ModelArgs base;
  std::vector<std::size_t> stories;
  bool render = false;
};

int run_attn(const AttnArgs& a) {
  RunConfig cfg = resolve(a.base.common);
  Vocabulary vocab = load_vocab(a.base.data);
  TripleStore store = load_store(a.base.data, vocab);
  ModelParams p = load_model(a.base.model, vocab, store);
  Dataset data = load_stories(a.base.input, vocab);
  std::vector<std::size_t> pick = a.stories;
  if (pick.empty()) {
    for (std::size_t i = 0; i < data.size(); ++i) pick.push_back(i);
  }
  const TripleStore* s = store_for(p.config, store);
  std::vector<StoryAttention> out;
  for (std::size_t id : pick) {
    if (id >= data.size()) throw DataError("story id " + std::to_string(id) + " out of range");
    Tape tape;
    EncoderTrace trace = encode_story(tape, p, data[id], s);
    const std::size_t beam = cfg.get_size("beam");
    GenerationResult g = beam == 1 ? greedy_decode(p, data[id], s, cfg.get_size("max_len"))
                                   : beam_search(p, data[id], s, beam, cfg.get_size("max_len"));
    out.push_back(collect_attention(trace, g, vocab, p.config.uses_knowledge()));
  }
  write_file(a.base.out, [&](std::ostream& o) { write_attention(o, out); });
  if (a.render) {
    for (const auto& st : out) {
      std::cout << "story " << st.story_id << '\n';
      for (std::size_t i = 0; i + 1 < kContextSentences; ++i) {
        std::cout << "state attention X" << i + 2 << " -> X" << i + 1 << '\n';
        render_heatmap(std::cout, st.state[i], st.sentence_tokens[i + 1], st.sentence_tokens[i]);
      }
      std::cout << "decoder state attention Y -> X4\n";
      render_heatmap(std::cout, st.decoder_state, st.generated_tokens, st.sentence_tokens[3]);
    }
  }
  summary({{"command", "attn"},
           {"stories", out.size()},
           {"output", a.base.out},
           {"checkpoint_hash", hex(checkpoint_hash(p))}});
  return kOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string corpus, data;
};

int run_stats(const StatsArgs& a) {
  ordered_json j = {{"command", "stats"}};
  if (!a.corpus.empty()) {
    CorpusStats cs = corpus_stats(read_raw_stories(fs::path(a.corpus)));
    std::cout << "stories " << cs.stories << '\n';
    const char* labels[] = {"X1", "X2", "X3", "X4", "Y"};
    for (std::size_t i = 0; i < cs.mean_length.size(); ++i) {
      std::cout << "mean_length_" << labels[i] << ' ' << std::fixed << std::setprecision(2)
                << cs.mean_length[i] << std::defaultfloat << '\n';
    }
    std::cout << "unique_words " << cs.unique_words << '\n';
    j["stories"] = cs.stories;
    j["unique_words"] = cs.unique_words;
  }
  if (!a.data.empty()) {
    Vocabulary vocab = load_vocab(a.data);
    TripleStore store = load_store(a.data, vocab);
    std::cout << "vocabulary " << vocab.size() << "\nrelations " << store.relations().size()
              << "\ntriples " << store.triple_count() << "\nquery_words " << store.query_words()
              << "\nmean_triples_per_word " << std::fixed << std::setprecision(2)
              << store.mean_triples_per_word() << std::defaultfloat << '\n';
    j["triples"] = store.triple_count();
    j["query_words"] = store.query_words();
    j["mean_triples_per_word"] = store.mean_triples_per_word();
  }
  summary(j);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-enhanced story ending generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "storygen 0.1.0");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "build vocabulary, triple store and embeddings");
  add_common(c_pre, pre.common, false);
  c_pre->add_option("--corpus", pre.corpus, "training stories, 5 tab-separated sentences per line")->required();
  c_pre->add_option("--triples", pre.triples, "head<TAB>relation<TAB>tail[<TAB>weight] lines");
  c_pre->add_option("--pos", pre.pos, "word<TAB>tags part-of-speech lexicon");
  c_pre->add_option("--embeddings", pre.embeddings, "pretrained `word v1 ... vd` vectors");
  c_pre->add_option("--out", pre.out, "output data directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a model");
  add_common(c_train, tr.common, false);
  c_train->add_option("--data", tr.data, "data directory from preprocess")->required();
  c_train->add_option("--corpus", tr.corpus, "training stories")->required();
  c_train->add_option("--dev", tr.dev, "dev stories (default: split from the corpus)");
  c_train->add_option("--out", tr.out, "checkpoint to write")->required();
  c_train->add_option("--checkpoint-dir", tr.checkpoint_dir, "per-epoch checkpoints");
  c_train->add_option("--epochs", tr.epochs, "training epochs");

  ModelArgs gen;
  auto* c_gen = app.add_subcommand("generate", "generate story endings");
  add_common(c_gen, gen.common, true);
  c_gen->add_option("--data", gen.data, "data directory")->required();
  c_gen->add_option("--model", gen.model, "checkpoint")->required();
  c_gen->add_option("--input", gen.input, "stories to complete")->required();
  c_gen->add_option("--out", gen.out, "id<TAB>ending output (default stdout)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "perplexity, BLEU and human-evaluation statistics");
  add_common(c_eval, ev.base.common, true);
  c_eval->add_option("--data", ev.base.data, "data directory");
  c_eval->add_option("--model", ev.base.model, "checkpoint");
  c_eval->add_option("--input", ev.base.input, "reference stories");
  c_eval->add_option("--generations", ev.generations, "id<TAB>ending file to score");
  c_eval->add_option("--annotations", ev.annotations, "id<TAB>metric<TAB>s1<TAB>s2<TAB>s3 scores");

  AttnArgs at;
  auto* c_attn = app.add_subcommand("attn", "export attention weights");
  add_common(c_attn, at.base.common, true);
  c_attn->add_option("--data", at.base.data, "data directory")->required();
  c_attn->add_option("--model", at.base.model, "checkpoint")->required();
  c_attn->add_option("--input", at.base.input, "stories")->required();
  c_attn->add_option("--out", at.base.out, "attention file")->required();
  c_attn->add_option("--story", at.stories, "0-based story ids (default all)");
  c_attn->add_flag("--render", at.render, "print text heat maps");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "corpus and triple-store statistics");
  c_stats->add_option("--corpus", stats.corpus, "stories file");
  c_stats->add_option("--data", stats.data, "data directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (c_eval->parsed()) {
      if (ev.base.model.empty() && ev.annotations.empty()) {
        throw CLI::ValidationError("eval needs --model (with --data and --input) or --annotations");
      }
      if (!ev.base.model.empty() && (ev.base.data.empty() || ev.base.input.empty())) {
        throw CLI::ValidationError("eval --model needs --data and --input");
      }
    }
    if (c_stats->parsed() && stats.corpus.empty() && stats.data.empty()) {
      throw CLI::ValidationError("stats needs --corpus and/or --data");
    }
    if (c_pre->parsed()) return run_preprocess(pre);
    if (c_train->parsed()) return run_train(tr);
    if (c_gen->parsed()) return run_generate(gen);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_attn->parsed()) return run_attn(at);
    if (c_stats->parsed()) return run_stats(stats);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
