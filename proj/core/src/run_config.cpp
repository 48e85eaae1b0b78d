#include "storygen/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include "storygen/text.hpp"

namespace storygen {

namespace {

enum class Kind { Size, Positive, Double, Seed, Bool, Variant, Bleu };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* default_value;
};

constexpr KeySpec kKeys[] = {
    {"variant", Kind::Variant, "ie-ca"},
    {"layers", Kind::Positive, "2"},
    {"hidden", Kind::Positive, "512"},
    {"word_dim", Kind::Positive, "200"},
    {"context_dim", Kind::Positive, "512"},
    {"relation_dim", Kind::Positive, "200"},
    {"gru_hidden", Kind::Positive, "256"},
    {"init_bound", Kind::Double, "0.08"},
    {"forget_bias", Kind::Double, "1"},
    {"vocab_cap", Kind::Positive, "10000"},
    {"freeze_embeddings", Kind::Bool, "false"},
    {"lr", Kind::Double, "0.001"},
    {"beta1", Kind::Double, "0.9"},
    {"beta2", Kind::Double, "0.999"},
    {"adam_eps", Kind::Double, "1e-08"},
    {"batch_size", Kind::Positive, "32"},
    {"epochs", Kind::Size, "10"},
    {"clip_norm", Kind::Double, "5"},
    {"seed", Kind::Seed, "1"},
    {"eval_every", Kind::Size, "1"},
    {"dev_fraction", Kind::Double, "0.05"},
    {"beam", Kind::Positive, "1"},
    {"max_len", Kind::Positive, "30"},
    {"workers", Kind::Positive, "1"},
    {"bleu_mode", Kind::Bleu, "corpus"},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

void check_value(const KeySpec& spec, const std::string& value) {
  auto bad = [&] {
    throw ConfigError("invalid value '" + value + "' for config key '" + spec.key + "'");
  };
  switch (spec.kind) {
    case Kind::Size:
    case Kind::Positive:
    case Kind::Seed: {
      auto v = parse_int(value);
      if (!v || *v < 0 || (spec.kind == Kind::Positive && *v == 0)) bad();
      break;
    }
    case Kind::Double:
      if (!parse_double(value)) bad();
      break;
    case Kind::Bool:
      if (value != "true" && value != "false" && value != "1" && value != "0") bad();
      break;
    case Kind::Variant:
      try {
        parse_variant(value);
      } catch (const std::invalid_argument&) {
        bad();
      }
      break;
    case Kind::Bleu:
      if (value != "corpus" && value != "sentence") bad();
      break;
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(k.key, k.default_value);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  const std::string v(trim(value));
  check_value(*spec, v);
  values_[key] = v;
}

void RunConfig::load(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  load(in);
}

void RunConfig::apply_environment(char** envp) {
  if (!envp) return;
  for (char** e = envp; *e; ++e) {
    std::string_view entry(*e);
    if (entry.substr(0, kEnvPrefix.size()) != kEnvPrefix) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(entry.substr(kEnvPrefix.size(), eq - kEnvPrefix.size()));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    set(key, std::string(entry.substr(eq + 1)));
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(*parse_int(get(key)));
}

double RunConfig::get_double(const std::string& key) const { return *parse_double(get(key)); }

std::uint64_t RunConfig::get_seed() const {
  return static_cast<std::uint64_t>(*parse_int(get("seed")));
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  return v == "true" || v == "1";
}

ModelConfig RunConfig::model_config(std::size_t vocab_size, std::size_t num_relations) const {
  ModelConfig c;
  c.variant = parse_variant(get("variant"));
  c.num_layers = get_size("layers");
  c.hidden = get_size("hidden");
  c.word_dim = get_size("word_dim");
  c.context_dim = get_size("context_dim");
  c.relation_dim = get_size("relation_dim");
  c.gru_hidden = get_size("gru_hidden");
  c.init_bound = get_double("init_bound");
  c.forget_bias = get_double("forget_bias");
  c.vocab_size = vocab_size;
  c.num_relations = num_relations;
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.adam.lr = get_double("lr");
  t.adam.beta1 = get_double("beta1");
  t.adam.beta2 = get_double("beta2");
  t.adam.eps = get_double("adam_eps");
  t.batch_size = get_size("batch_size");
  t.epochs = get_size("epochs");
  t.clip_norm = get_double("clip_norm");
  t.seed = get_seed();
  t.eval_every = get_size("eval_every");
  t.workers = get_size("workers");
  t.validate();
  return t;
}

BleuMode RunConfig::bleu_mode() const {
  return get("bleu_mode") == "sentence" ? BleuMode::Sentence : BleuMode::Corpus;
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  return out.str();
}

}  // namespace storygen
