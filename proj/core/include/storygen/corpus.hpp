#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "storygen/nn.hpp"

namespace storygen {

/// Input data that cannot be used (unreadable file, empty corpus, bad record).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kNumSpecialTokens = 4;
inline constexpr std::size_t kContextSentences = 4;

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// into separate tokens.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  /// Keeps the top (cap - 4) words by frequency, ties broken lexicographically.
  static Vocabulary build(const std::unordered_map<std::string, std::uint64_t>& counts,
                          std::size_t cap);

  std::size_t size() const { return words_.size(); }
  TokenId id(std::string_view word) const;  // kUnk when absent
  bool contains(std::string_view word) const;
  const std::string& word(TokenId id) const;
  std::uint64_t frequency(TokenId id) const { return freqs_.at(id); }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::string decode(const std::vector<TokenId>& ids) const;

  /// `word \t id \t freq` lines, specials included.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && freqs_ == other.freqs_;
  }

 private:
  void add(std::string word, std::uint64_t freq);

  std::vector<std::string> words_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct Sentence {
  std::vector<TokenId> ids;
  std::string text;
};

struct Story {
  std::size_t id = 0;
  std::array<Sentence, kContextSentences> context;
  Sentence ending;
};

using Dataset = std::vector<Story>;

/// Raw story lines: 5 tab-separated sentences (4 context + ending).
using RawStory = std::array<std::string, kContextSentences + 1>;
std::vector<RawStory> read_raw_stories(std::istream& in);
std::vector<RawStory> read_raw_stories(const std::filesystem::path& path);

/// Token counts over every sentence of every story.
std::unordered_map<std::string, std::uint64_t> count_tokens(const std::vector<RawStory>& raw);

Vocabulary build_vocab(const std::vector<RawStory>& raw, std::size_t cap = 10000);
Vocabulary build_vocab(const std::filesystem::path& corpus, std::size_t cap = 10000);

/// Story ids are 0-based line indices.
Dataset encode_stories(const std::vector<RawStory>& raw, const Vocabulary& vocab);

struct EmbeddingLoadReport {
  std::size_t lines = 0;
  std::size_t found = 0;      // vocabulary rows copied from the file
  std::size_t malformed = 0;  // wrong width or unparsable value
};

/// Word-per-line `word v1 ... v_dim` text. Rows for words absent from the
/// file are drawn uniformly from [-0.1, 0.1].
EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                               Rng& rng, EmbeddingLoadReport* report = nullptr);
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng);
void save_embeddings(std::ostream& out, const EmbeddingTable& table, const Vocabulary& vocab);

struct CorpusStats {
  std::size_t stories = 0;
  std::array<double, kContextSentences + 1> mean_length{};  // X1..X4, Y
  std::size_t unique_words = 0;
};

CorpusStats corpus_stats(const std::vector<RawStory>& raw);

struct Batch {
  std::vector<Story> stories;
  // Per sentence position (X1..X4, Y): stories x max_len id matrix, row-major.
  std::array<std::vector<TokenId>, kContextSentences + 1> ids;
  std::array<std::vector<bool>, kContextSentences + 1> mask;
  std::array<std::size_t, kContextSentences + 1> max_len{};
};

Batch make_batch(std::vector<Story> stories);

/// Deterministic shuffled batches; every story appears once per epoch.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

  void start_epoch(std::size_t epoch);
  bool next(Batch& batch);
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace storygen
