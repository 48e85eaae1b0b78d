#pragma once

// Commonsense triple ingestion and per-word one-hop graph retrieval.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "storygen/corpus.hpp"

namespace storygen {

using RelationId = std::uint32_t;

inline constexpr std::size_t kMaxTriplesPerWord = 10;

struct KnowledgeTriple {
  TokenId head = 0;
  RelationId relation = 0;
  TokenId tail = 0;
  double weight = 1.0;

  bool operator==(const KnowledgeTriple&) const = default;
};

/// One-hop graph of a query word. Every triple's head is the query.
struct ConceptGraph {
  TokenId query = 0;
  std::vector<KnowledgeTriple> triples;

  bool empty() const { return triples.empty(); }
  std::size_t size() const { return triples.size(); }
};

class RelationVocabulary {
 public:
  RelationVocabulary() = default;
  explicit RelationVocabulary(std::vector<std::string> names);  // ids follow input order

  std::size_t size() const { return names_.size(); }
  bool contains(std::string_view name) const;
  RelationId id(std::string_view name) const;  // throws when absent
  const std::string& name(RelationId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, RelationId> ids_;
};

/// word -> part-of-speech tags, from `word \t tag[,tag...]` lines.
class PosLexicon {
 public:
  void add(std::string word, std::string tag);
  bool is_noun_or_verb(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }

  static PosLexicon load(std::istream& in);
  static PosLexicon load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::set<std::string>> tags_;
};

struct IngestReport {
  std::size_t lines = 0;            // non-blank input lines
  std::size_t malformed = 0;        // skipped: wrong field count, empty field, bad weight
  std::size_t considered = 0;       // well-formed lines
  std::size_t dropped_vocab = 0;    // head or tail absent from the corpus vocabulary
  std::size_t dropped_pos = 0;      // head or tail not tagged noun or verb
  std::size_t truncated = 0;        // removed by the per-word cap
  std::size_t stored = 0;
  std::size_t query_words = 0;      // words with at least one stored triple
  double mean_triples_per_word = 0.0;
};

class TripleStore {
 public:
  TripleStore() = default;

  /// Keeps triples whose head and tail are in-vocabulary nouns or verbs,
  /// groups them by head and keeps at most `cap` per head: highest weight
  /// first (missing weight counts as 1.0), file order breaking ties.
  static TripleStore ingest(std::istream& in, const Vocabulary& vocab, const PosLexicon& pos,
                            IngestReport* report = nullptr,
                            std::size_t cap = kMaxTriplesPerWord);
  static TripleStore ingest(const std::filesystem::path& path, const Vocabulary& vocab,
                            const PosLexicon& pos, IngestReport* report = nullptr,
                            std::size_t cap = kMaxTriplesPerWord);

  /// The word's graph, empty when it has no triples.
  ConceptGraph retrieve(TokenId word) const;

  const RelationVocabulary& relations() const { return relations_; }
  std::size_t triple_count() const;
  std::size_t query_words() const { return graphs_.size(); }
  double mean_triples_per_word() const;
  const std::map<TokenId, std::vector<KnowledgeTriple>>& graphs() const { return graphs_; }

  /// Versioned line format referencing words by surface form.
  void save(std::ostream& out, const Vocabulary& vocab) const;
  static TripleStore load(std::istream& in, const Vocabulary& vocab);

  bool operator==(const TripleStore& other) const {
    return relations_.names() == other.relations_.names() && graphs_ == other.graphs_;
  }

 private:
  RelationVocabulary relations_;
  std::map<TokenId, std::vector<KnowledgeTriple>> graphs_;
};

}  // namespace storygen
