#include "storygen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "storygen/text.hpp"

namespace storygen {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host doubles as little-endian");

namespace {

constexpr char kMagic[6] = {'S', 'G', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError("checkpoint truncated");
  }
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint32_t>(in);
  if (n > (1u << 24)) throw CheckpointError("checkpoint string length implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream out;
  out << "variant=" << variant_name(c.variant) << '\n'
      << "num_layers=" << c.num_layers << '\n'
      << "hidden=" << c.hidden << '\n'
      << "word_dim=" << c.word_dim << '\n'
      << "context_dim=" << c.context_dim << '\n'
      << "vocab_size=" << c.vocab_size << '\n'
      << "relation_dim=" << c.relation_dim << '\n'
      << "gru_hidden=" << c.gru_hidden << '\n'
      << "num_relations=" << c.num_relations << '\n'
      << "init_bound=" << format_double(c.init_bound) << '\n'
      << "forget_bias=" << format_double(c.forget_bias) << '\n';
  return out.str();
}

ModelConfig config_from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  auto size_value = [](std::string_view key, std::string_view v) {
    auto n = parse_int(v);
    if (!n || *n < 0) throw CheckpointError("checkpoint config: bad value for " + std::string(key));
    return static_cast<std::size_t>(*n);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("checkpoint config: bad line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "variant") {
      c.variant = parse_variant(value);
    } else if (key == "num_layers") {
      c.num_layers = size_value(key, value);
    } else if (key == "hidden") {
      c.hidden = size_value(key, value);
    } else if (key == "word_dim") {
      c.word_dim = size_value(key, value);
    } else if (key == "context_dim") {
      c.context_dim = size_value(key, value);
    } else if (key == "vocab_size") {
      c.vocab_size = size_value(key, value);
    } else if (key == "relation_dim") {
      c.relation_dim = size_value(key, value);
    } else if (key == "gru_hidden") {
      c.gru_hidden = size_value(key, value);
    } else if (key == "num_relations") {
      c.num_relations = size_value(key, value);
    } else if (key == "init_bound" || key == "forget_bias") {
      auto v = parse_double(value);
      if (!v) throw CheckpointError("checkpoint config: bad value for " + key);
      (key == "init_bound" ? c.init_bound : c.forget_bias) = *v;
    } else {
      throw CheckpointError("checkpoint config: unknown key " + key);
    }
  }
  return c;
}

void save_checkpoint(std::ostream& out, const ModelParams& params) {
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_string(out, config_to_text(params.config));
  auto tensors = params.named_tensors();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (auto d : t->shape) write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t->values.data()),
              static_cast<std::streamsize>(t->values.size() * sizeof(double)));
  }
  write_pod<std::uint8_t>(out, params.embedding.trainable ? 1 : 0);
  if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  save_checkpoint(out, params);
}

ModelParams load_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a storygen checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig config = config_from_text(read_string(in));
  config.validate();
  // Allocate the layout for the config, then overwrite every tensor.
  Rng unused(0);
  ModelParams params = ModelParams::create(config, unused);
  std::map<std::string, Tensor*> by_name;
  for (auto& [name, t] : params.named_tensors()) by_name.emplace(name, t);

  const auto count = read_pod<std::uint32_t>(in);
  if (count != by_name.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                          std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint has unexpected tensor " + name);
    Tensor& t = *it->second;
    const auto rank = read_pod<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(read_pod<std::uint64_t>(in));
    if (shape != t.shape) {
      throw CheckpointError("tensor " + name + " has shape " + shape_to_string(shape) +
                            ", config expects " + shape_to_string(t.shape));
    }
    if (!in.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated in tensor " + name);
    }
    by_name.erase(it);
  }
  params.embedding.trainable = read_pod<std::uint8_t>(in) != 0;
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

std::uint64_t checkpoint_hash(const ModelParams& params) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, params);
  return fnv1a(out.str());
}

}  // namespace storygen
