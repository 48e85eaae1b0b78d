#include "storygen/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "storygen/text.hpp"

namespace storygen {

namespace {

constexpr std::string_view kStoreHeader = "storygen-triple-store v1";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_content_word(const Vocabulary& vocab, std::string_view w) {
  return vocab.contains(w) && vocab.id(w) >= kNumSpecialTokens;
}

}  // namespace

RelationVocabulary::RelationVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!ids_.emplace(names_[i], static_cast<RelationId>(i)).second) {
      throw DataError("duplicate relation name " + names_[i]);
    }
  }
}

bool RelationVocabulary::contains(std::string_view name) const {
  return ids_.find(std::string(name)) != ids_.end();
}

RelationId RelationVocabulary::id(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) throw DataError("unknown relation " + std::string(name));
  return it->second;
}

// ---------------------------------------------------------------------------

void PosLexicon::add(std::string word, std::string tag) {
  tags_[lower(word)].insert(lower(tag));
}

bool PosLexicon::is_noun_or_verb(std::string_view word) const {
  auto it = tags_.find(std::string(word));
  if (it == tags_.end()) return false;
  for (const auto& tag : it->second) {
    if (tag == "noun" || tag == "verb" || tag == "n" || tag == "v" || tag.rfind("nn", 0) == 0 ||
        tag.rfind("vb", 0) == 0) {
      return true;
    }
  }
  return false;
}

PosLexicon PosLexicon::load(std::istream& in) {
  PosLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || trim(fields[0]).empty()) {
      throw DataError("POS lexicon line " + std::to_string(lineno) + ": expected `word<TAB>tags`");
    }
    for (auto tag : split(fields[1], ',')) {
      if (!trim(tag).empty()) lex.add(std::string(trim(fields[0])), std::string(trim(tag)));
    }
  }
  return lex;
}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read POS lexicon " + path.string());
  return load(in);
}

// ---------------------------------------------------------------------------

TripleStore TripleStore::ingest(std::istream& in, const Vocabulary& vocab, const PosLexicon& pos,
                                IngestReport* report, std::size_t cap) {
  struct Candidate {
    TokenId head;
    std::string relation;
    TokenId tail;
    double weight;
  };
  IngestReport r;
  std::map<TokenId, std::vector<Candidate>> grouped;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++r.lines;
    auto fields = split(line, '\t');
    bool ok = fields.size() == 3 || fields.size() == 4;
    double weight = 1.0;
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i) ok = ok && !trim(fields[i]).empty();
      if (ok && fields.size() == 4) {
        auto w = parse_double(fields[3]);
        ok = w.has_value();
        if (ok) weight = *w;
      }
    }
    if (!ok) {
      ++r.malformed;
      continue;
    }
    ++r.considered;
    const std::string head = lower(trim(fields[0]));
    const std::string tail = lower(trim(fields[2]));
    if (!is_content_word(vocab, head) || !is_content_word(vocab, tail)) {
      ++r.dropped_vocab;
      continue;
    }
    if (!pos.is_noun_or_verb(head) || !pos.is_noun_or_verb(tail)) {
      ++r.dropped_pos;
      continue;
    }
    grouped[vocab.id(head)].push_back(
        {vocab.id(head), std::string(trim(fields[1])), vocab.id(tail), weight});
  }

  for (auto& [head, cands] : grouped) {
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.weight > b.weight; });
    if (cands.size() > cap) {
      r.truncated += cands.size() - cap;
      cands.resize(cap);
    }
  }

  std::set<std::string> relation_names;
  for (const auto& [head, cands] : grouped) {
    for (const auto& c : cands) relation_names.insert(c.relation);
  }
  TripleStore store;
  store.relations_ = RelationVocabulary({relation_names.begin(), relation_names.end()});
  for (const auto& [head, cands] : grouped) {
    auto& graph = store.graphs_[head];
    for (const auto& c : cands) {
      graph.push_back({c.head, store.relations_.id(c.relation), c.tail, c.weight});
    }
  }
  r.stored = store.triple_count();
  r.query_words = store.query_words();
  r.mean_triples_per_word = store.mean_triples_per_word();
  if (report) *report = r;
  return store;
}

TripleStore TripleStore::ingest(const std::filesystem::path& path, const Vocabulary& vocab,
                                const PosLexicon& pos, IngestReport* report, std::size_t cap) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read triple file " + path.string());
  return ingest(in, vocab, pos, report, cap);
}

ConceptGraph TripleStore::retrieve(TokenId word) const {
  ConceptGraph g;
  g.query = word;
  if (auto it = graphs_.find(word); it != graphs_.end()) g.triples = it->second;
  return g;
}

std::size_t TripleStore::triple_count() const {
  std::size_t n = 0;
  for (const auto& [head, triples] : graphs_) n += triples.size();
  return n;
}

double TripleStore::mean_triples_per_word() const {
  if (graphs_.empty()) return 0.0;
  return static_cast<double>(triple_count()) / static_cast<double>(graphs_.size());
}

void TripleStore::save(std::ostream& out, const Vocabulary& vocab) const {
  out << kStoreHeader << '\n';
  out << "relations\t" << relations_.size() << '\n';
  for (const auto& name : relations_.names()) out << name << '\n';
  out << "graphs\t" << graphs_.size() << '\n';
  for (const auto& [head, triples] : graphs_) {
    out << vocab.word(head) << '\t' << triples.size() << '\n';
    for (const auto& t : triples) {
      out << '\t' << relations_.name(t.relation) << '\t' << vocab.word(t.tail) << '\t'
          << format_double(t.weight) << '\n';
    }
  }
}

TripleStore TripleStore::load(std::istream& in, const Vocabulary& vocab) {
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw DataError(std::string("triple store truncated at ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto resolve = [&](std::string_view w) {
    if (!vocab.contains(w)) throw DataError("triple store word not in vocabulary: " + std::string(w));
    return vocab.id(w);
  };
  next_line("header");
  if (line != kStoreHeader) {
    throw DataError("unsupported triple store version: expected '" + std::string(kStoreHeader) +
                    "', got '" + line + "'");
  }
  next_line("relation count");
  auto rel_fields = split(line, '\t');
  auto nrel = rel_fields.size() == 2 && rel_fields[0] == "relations" ? parse_int(rel_fields[1])
                                                                     : std::nullopt;
  if (!nrel || *nrel < 0) throw DataError("triple store: bad relations line");
  std::vector<std::string> names;
  for (long long i = 0; i < *nrel; ++i) {
    next_line("relation name");
    names.push_back(line);
  }
  TripleStore store;
  store.relations_ = RelationVocabulary(std::move(names));
  next_line("graph count");
  auto graph_fields = split(line, '\t');
  auto ngraphs = graph_fields.size() == 2 && graph_fields[0] == "graphs"
                     ? parse_int(graph_fields[1])
                     : std::nullopt;
  if (!ngraphs || *ngraphs < 0) throw DataError("triple store: bad graphs line");
  for (long long g = 0; g < *ngraphs; ++g) {
    next_line("graph header");
    auto hf = split(line, '\t');
    auto count = hf.size() == 2 ? parse_int(hf[1]) : std::nullopt;
    if (!count || *count < 0) throw DataError("triple store: bad graph header '" + line + "'");
    const TokenId head = resolve(hf[0]);
    auto& triples = store.graphs_[head];
    for (long long i = 0; i < *count; ++i) {
      next_line("triple");
      auto tf = split(line, '\t');
      auto weight = tf.size() == 4 ? parse_double(tf[3]) : std::nullopt;
      if (!weight || !tf[0].empty()) throw DataError("triple store: bad triple '" + line + "'");
      triples.push_back({head, store.relations_.id(tf[1]), resolve(tf[2]), *weight});
    }
  }
  return store;
}

}  // namespace storygen
