#include "storygen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <string_view>

#include "storygen/text.hpp"

namespace storygen {

namespace {

constexpr std::string_view kPunctuation = ".,!?;:\"()[]{}";

bool is_punct(char c) { return kPunctuation.find(c) != std::string_view::npos; }

const std::array<std::string, kNumSpecialTokens> kSpecialWords = {"<pad>", "<unk>", "<bos>",
                                                                  "<eos>"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto piece : split_whitespace(text)) {
    std::string word(piece);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t lo = 0;
    std::size_t hi = word.size();
    while (lo < hi && is_punct(word[lo])) ++lo;
    std::size_t core_end = hi;
    while (core_end > lo && is_punct(word[core_end - 1])) --core_end;
    for (std::size_t i = 0; i < lo; ++i) out.emplace_back(1, word[i]);
    if (core_end > lo) out.push_back(word.substr(lo, core_end - lo));
    for (std::size_t i = core_end; i < hi; ++i) out.emplace_back(1, word[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const auto& w : kSpecialWords) add(w, 0);
}

void Vocabulary::add(std::string word, std::uint64_t freq) {
  const auto id = static_cast<TokenId>(words_.size());
  ids_.emplace(word, id);
  words_.push_back(std::move(word));
  freqs_.push_back(freq);
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::uint64_t>& counts,
                             std::size_t cap) {
  if (cap < kNumSpecialTokens) {
    throw std::invalid_argument("vocabulary cap must be at least " +
                                std::to_string(kNumSpecialTokens));
  }
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.reserve(counts.size());
  for (const auto& [w, f] : counts) {
    if (std::find(kSpecialWords.begin(), kSpecialWords.end(), w) != kSpecialWords.end()) continue;
    entries.emplace_back(w, f);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  const std::size_t keep = std::min(entries.size(), cap - kNumSpecialTokens);
  for (std::size_t i = 0; i < keep; ++i) v.add(entries[i].first, entries[i].second);
  return v;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return ids_.find(std::string(word)) != ids_.end();
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(words_.size()));
  }
  return words_[id];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    if (!out.empty()) out += ' ';
    out += word(id);
  }
  return out;
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out << words_[i] << '\t' << i << '\t' << freqs_[i] << '\n';
  }
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  v.words_.clear();
  v.freqs_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError("vocabulary line " + std::to_string(lineno) + ": expected 3 fields");
    }
    auto id = parse_int(fields[1]);
    auto freq = parse_int(fields[2]);
    if (!id || !freq || *freq < 0 || static_cast<std::size_t>(*id) != v.words_.size()) {
      throw DataError("vocabulary line " + std::to_string(lineno) + ": bad id or frequency");
    }
    v.add(std::string(fields[0]), static_cast<std::uint64_t>(*freq));
  }
  if (v.words_.size() < kNumSpecialTokens ||
      !std::equal(kSpecialWords.begin(), kSpecialWords.end(), v.words_.begin())) {
    throw DataError("vocabulary does not start with the reserved special tokens");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Stories

std::vector<RawStory> read_raw_stories(std::istream& in) {
  std::vector<RawStory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != kContextSentences + 1) {
      throw DataError("corpus line " + std::to_string(lineno) + ": expected 5 tab-separated " +
                      "sentences, got " + std::to_string(fields.size()));
    }
    RawStory story;
    for (std::size_t i = 0; i < story.size(); ++i) story[i] = std::string(trim(fields[i]));
    out.push_back(std::move(story));
  }
  return out;
}

std::vector<RawStory> read_raw_stories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus " + path.string());
  return read_raw_stories(in);
}

std::unordered_map<std::string, std::uint64_t> count_tokens(const std::vector<RawStory>& raw) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& story : raw) {
    for (const auto& sentence : story) {
      for (auto& tok : tokenize(sentence)) ++counts[tok];
    }
  }
  return counts;
}

Vocabulary build_vocab(const std::vector<RawStory>& raw, std::size_t cap) {
  auto counts = count_tokens(raw);
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  return Vocabulary::build(counts, cap);
}

Vocabulary build_vocab(const std::filesystem::path& corpus, std::size_t cap) {
  return build_vocab(read_raw_stories(corpus), cap);
}

Dataset encode_stories(const std::vector<RawStory>& raw, const Vocabulary& vocab) {
  Dataset out;
  out.reserve(raw.size());
  for (std::size_t s = 0; s < raw.size(); ++s) {
    Story story;
    story.id = s;
    for (std::size_t i = 0; i <= kContextSentences; ++i) {
      Sentence sentence{vocab.encode(tokenize(raw[s][i])), raw[s][i]};
      if (sentence.ids.empty()) {
        throw DataError("story " + std::to_string(s) + " sentence " + std::to_string(i + 1) +
                        " is empty");
      }
      if (i < kContextSentences) {
        story.context[i] = std::move(sentence);
      } else {
        story.ending = std::move(sentence);
      }
    }
    out.push_back(std::move(story));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  EmbeddingTable t;
  t.table = Tensor(Shape{vocab.size(), dim});
  init_uniform(t.table, rng, 0.1);
  return t;
}

EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                               Rng& rng, EmbeddingLoadReport* report) {
  EmbeddingTable t = random_embeddings(vocab, dim, rng);
  EmbeddingLoadReport r;
  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++r.lines;
    auto fields = split_whitespace(line);
    bool ok = fields.size() == dim + 1;
    for (std::size_t i = 0; ok && i < dim; ++i) {
      auto v = parse_double(fields[i + 1]);
      if (!v) {
        ok = false;
      } else {
        row[i] = *v;
      }
    }
    if (!ok) {
      ++r.malformed;
      continue;
    }
    if (!vocab.contains(fields[0])) continue;
    const TokenId id = vocab.id(fields[0]);
    if (seen[id]) continue;
    seen[id] = true;
    ++r.found;
    std::copy(row.begin(), row.end(), t.table.values.begin() + static_cast<std::ptrdiff_t>(id * dim));
  }
  if (report) *report = r;
  return t;
}

void save_embeddings(std::ostream& out, const EmbeddingTable& table, const Vocabulary& vocab) {
  if (table.vocab_size() != vocab.size()) {
    throw std::invalid_argument("embedding table rows differ from vocabulary size");
  }
  for (std::size_t r = 0; r < table.vocab_size(); ++r) {
    out << vocab.word(static_cast<TokenId>(r));
    for (std::size_t c = 0; c < table.dim(); ++c) out << ' ' << format_double(table.table.at(r, c));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Statistics and batching

CorpusStats corpus_stats(const std::vector<RawStory>& raw) {
  CorpusStats stats;
  stats.stories = raw.size();
  std::array<std::size_t, kContextSentences + 1> totals{};
  std::set<std::string> unique;
  for (const auto& story : raw) {
    for (std::size_t i = 0; i < story.size(); ++i) {
      auto toks = tokenize(story[i]);
      totals[i] += toks.size();
      for (auto& t : toks) unique.insert(std::move(t));
    }
  }
  for (std::size_t i = 0; i < totals.size(); ++i) {
    stats.mean_length[i] =
        raw.empty() ? 0.0 : static_cast<double>(totals[i]) / static_cast<double>(raw.size());
  }
  stats.unique_words = unique.size();
  return stats;
}

Batch make_batch(std::vector<Story> stories) {
  Batch b;
  b.stories = std::move(stories);
  const std::size_t n = b.stories.size();
  for (std::size_t pos = 0; pos <= kContextSentences; ++pos) {
    auto sentence = [&](const Story& s) -> const Sentence& {
      return pos < kContextSentences ? s.context[pos] : s.ending;
    };
    std::size_t max_len = 0;
    for (const auto& s : b.stories) max_len = std::max(max_len, sentence(s).ids.size());
    b.max_len[pos] = max_len;
    b.ids[pos].assign(n * max_len, kPad);
    b.mask[pos].assign(n * max_len, false);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& ids = sentence(b.stories[r]).ids;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        b.ids[pos][r * max_len + j] = ids[j];
        b.mask[pos][r * max_len + j] = true;
      }
    }
  }
  return b;
}

BatchIterator::BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  start_epoch(0);
}

void BatchIterator::start_epoch(std::size_t epoch) {
  order_.resize(data_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, "batch-order-epoch-" + std::to_string(epoch)));
  rng.shuffle(order_.begin(), order_.end());
  cursor_ = 0;
}

bool BatchIterator::next(Batch& batch) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<Story> stories;
  stories.reserve(end - cursor_);
  for (std::size_t i = cursor_; i < end; ++i) stories.push_back((*data_)[order_[i]]);
  cursor_ = end;
  batch = make_batch(std::move(stories));
  return true;
}

}  // namespace storygen
