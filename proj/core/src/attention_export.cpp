#include "storygen/attention_export.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "storygen/text.hpp"

namespace storygen {

namespace {

constexpr std::string_view kHeader = "storygen-attention v1";

std::vector<std::string> words(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) out.push_back(vocab.word(id));
  return out;
}

[[noreturn]] void fail(std::size_t lineno, const std::string& what) {
  throw DataError("attention file line " + std::to_string(lineno) + ": " + what);
}

std::size_t to_index(std::string_view s, std::size_t lineno) {
  auto v = parse_int(s);
  if (!v || *v < 0) fail(lineno, "bad index '" + std::string(s) + "'");
  return static_cast<std::size_t>(*v);
}

double to_value(std::string_view s, std::size_t lineno) {
  auto v = parse_double(s);
  if (!v) fail(lineno, "bad value '" + std::string(s) + "'");
  return *v;
}

WeightMatrix sized(std::size_t rows, std::size_t cols) {
  return WeightMatrix(rows, std::vector<double>(cols, 0.0));
}

double& cell(WeightMatrix& m, std::size_t r, std::size_t c, std::size_t lineno) {
  if (r == 0 || c == 0 || r > m.size() || c > m[r - 1].size()) fail(lineno, "index out of range");
  return m[r - 1][c - 1];
}

}  // namespace

StoryAttention collect_attention(const EncoderTrace& trace, const GenerationResult& generation,
                                 const Vocabulary& vocab, bool has_knowledge) {
  StoryAttention a;
  a.story_id = generation.story_id;
  a.has_knowledge = has_knowledge;
  for (std::size_t i = 0; i < kContextSentences; ++i) {
    const auto& s = trace.sentences[i];
    a.sentence_tokens[i] = words(s.tokens, vocab);
    if (i > 0) {
      a.state[i - 1] = s.state_attention;
      if (has_knowledge) a.knowledge[i - 1] = s.knowledge_attention;
    }
    if (has_knowledge) a.triples[i] = s.triple_attention;
  }
  a.generated_tokens = words(generation.tokens, vocab);
  a.decoder_state = generation.state_attention;
  if (has_knowledge) a.decoder_knowledge = generation.knowledge_attention;
  return a;
}

void write_attention(std::ostream& out, const std::vector<StoryAttention>& stories) {
  out << kHeader << '\n';
  for (const auto& a : stories) {
    out << "story " << a.story_id << " knowledge " << (a.has_knowledge ? 1 : 0) << '\n';
    for (std::size_t i = 0; i < kContextSentences; ++i) {
      out << "tokens " << i + 1;
      for (const auto& w : a.sentence_tokens[i]) out << ' ' << w;
      out << '\n';
    }
    out << "tokens " << kContextSentences + 1;
    for (const auto& w : a.generated_tokens) out << ' ' << w;
    out << '\n';
    for (std::size_t p = 0; p + 1 < kContextSentences; ++p) {
      const auto& sm = a.state[p];
      const std::size_t cols = sm.empty() ? 0 : sm.front().size();
      out << "encoder " << p + 2 << " rows " << sm.size() << " cols " << cols << '\n';
      for (std::size_t j = 0; j < sm.size(); ++j) {
        for (std::size_t k = 0; k < sm[j].size(); ++k) {
          out << "enc " << p + 2 << ' ' << j + 1 << ' ' << k + 1 << ' ' << format_double(sm[j][k])
              << ' ' << (a.has_knowledge ? format_double(a.knowledge[p][j][k]) : "-") << '\n';
        }
      }
    }
    const auto& dm = a.decoder_state;
    out << "decoder rows " << dm.size() << " cols " << (dm.empty() ? 0 : dm.front().size()) << '\n';
    for (std::size_t t = 0; t < dm.size(); ++t) {
      for (std::size_t k = 0; k < dm[t].size(); ++k) {
        out << "dec " << t + 1 << ' ' << k + 1 << ' ' << format_double(dm[t][k]) << ' '
            << (a.has_knowledge ? format_double(a.decoder_knowledge[t][k]) : "-") << '\n';
      }
    }
    for (std::size_t i = 0; i < kContextSentences; ++i) {
      for (std::size_t j = 0; j < a.triples[i].size(); ++j) {
        const auto& w = a.triples[i][j];
        out << "triples " << i + 1 << ' ' << j + 1 << ' ' << w.size() << '\n';
        for (std::size_t r = 0; r < w.size(); ++r) {
          out << "tri " << i + 1 << ' ' << j + 1 << ' ' << r + 1 << ' ' << format_double(w[r]) << '\n';
        }
      }
    }
    out << "end\n";
  }
}

void write_attention(const std::filesystem::path& path, const std::vector<StoryAttention>& stories) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write attention file " + path.string());
  write_attention(out, stories);
  if (!out) throw DataError("failed writing attention file " + path.string());
}

std::vector<StoryAttention> read_attention(std::istream& in) {
  std::vector<StoryAttention> out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != kHeader) fail(1, "missing header '" + std::string(kHeader) + "'");
  ++lineno;
  StoryAttention* cur = nullptr;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_whitespace(line);
    const auto kind = f[0];
    if (kind == "story") {
      if (f.size() != 4 || f[2] != "knowledge") fail(lineno, "bad story header");
      out.emplace_back();
      cur = &out.back();
      cur->story_id = to_index(f[1], lineno);
      cur->has_knowledge = to_index(f[3], lineno) != 0;
      continue;
    }
    if (!cur) fail(lineno, "record outside a story block");
    if (kind == "end") {
      cur = nullptr;
    } else if (kind == "tokens") {
      if (f.size() < 2) fail(lineno, "bad tokens record");
      const std::size_t i = to_index(f[1], lineno);
      std::vector<std::string> toks(f.begin() + 2, f.end());
      if (i >= 1 && i <= kContextSentences) {
        cur->sentence_tokens[i - 1] = std::move(toks);
      } else if (i == kContextSentences + 1) {
        cur->generated_tokens = std::move(toks);
      } else {
        fail(lineno, "sentence index out of range");
      }
    } else if (kind == "encoder") {
      if (f.size() != 6) fail(lineno, "bad encoder header");
      const std::size_t i = to_index(f[1], lineno);
      if (i < 2 || i > kContextSentences) fail(lineno, "encoder sentence index out of range");
      const std::size_t rows = to_index(f[3], lineno), cols = to_index(f[5], lineno);
      cur->state[i - 2] = sized(rows, cols);
      if (cur->has_knowledge) cur->knowledge[i - 2] = sized(rows, cols);
    } else if (kind == "enc") {
      if (f.size() != 6) fail(lineno, "bad enc record");
      const std::size_t i = to_index(f[1], lineno);
      if (i < 2 || i > kContextSentences) fail(lineno, "encoder sentence index out of range");
      const std::size_t j = to_index(f[2], lineno), k = to_index(f[3], lineno);
      cell(cur->state[i - 2], j, k, lineno) = to_value(f[4], lineno);
      if (cur->has_knowledge) cell(cur->knowledge[i - 2], j, k, lineno) = to_value(f[5], lineno);
    } else if (kind == "decoder") {
      if (f.size() != 5) fail(lineno, "bad decoder header");
      const std::size_t rows = to_index(f[2], lineno), cols = to_index(f[4], lineno);
      cur->decoder_state = sized(rows, cols);
      if (cur->has_knowledge) cur->decoder_knowledge = sized(rows, cols);
    } else if (kind == "dec") {
      if (f.size() != 5) fail(lineno, "bad dec record");
      const std::size_t t = to_index(f[1], lineno), k = to_index(f[2], lineno);
      cell(cur->decoder_state, t, k, lineno) = to_value(f[3], lineno);
      if (cur->has_knowledge) cell(cur->decoder_knowledge, t, k, lineno) = to_value(f[4], lineno);
    } else if (kind == "triples") {
      if (f.size() != 4) fail(lineno, "bad triples header");
      const std::size_t i = to_index(f[1], lineno), j = to_index(f[2], lineno);
      if (i < 1 || i > kContextSentences || j < 1) fail(lineno, "triples index out of range");
      auto& words_of_sentence = cur->triples[i - 1];
      if (words_of_sentence.size() < j) words_of_sentence.resize(j);
      words_of_sentence[j - 1].assign(to_index(f[3], lineno), 0.0);
    } else if (kind == "tri") {
      if (f.size() != 5) fail(lineno, "bad tri record");
      const std::size_t i = to_index(f[1], lineno);
      if (i < 1 || i > kContextSentences) fail(lineno, "triples index out of range");
      const std::size_t j = to_index(f[2], lineno), r = to_index(f[3], lineno);
      cell(cur->triples[i - 1], j, r, lineno) = to_value(f[4], lineno);
    } else {
      fail(lineno, "unknown record '" + std::string(kind) + "'");
    }
  }
  if (cur) fail(lineno, "story block not terminated by 'end'");
  return out;
}

void render_heatmap(std::ostream& out, const WeightMatrix& weights,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels) {
  static constexpr std::string_view kShades = " .:-=+*#%@";
  std::size_t label_width = 0;
  for (const auto& l : row_labels) label_width = std::max(label_width, l.size());
  out << std::string(label_width + 1, ' ');
  for (const auto& c : col_labels) out << c.front();
  out << '\n';
  for (std::size_t r = 0; r < weights.size(); ++r) {
    const std::string label = r < row_labels.size() ? row_labels[r] : "";
    out << std::setw(static_cast<int>(label_width)) << label << ' ';
    for (double w : weights[r]) {
      const auto idx = std::min<std::size_t>(kShades.size() - 1,
                                             static_cast<std::size_t>(std::max(0.0, w) * kShades.size()));
      out << kShades[idx];
    }
    out << '\n';
  }
}

}  // namespace storygen
