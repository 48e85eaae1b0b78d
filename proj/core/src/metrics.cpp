#include "storygen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <stdexcept>

#include "storygen/corpus.hpp"
#include "storygen/text.hpp"

namespace storygen {

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  if (other.matches.size() != matches.size()) {
    throw std::invalid_argument("cannot add BLEU statistics of different orders");
  }
  for (std::size_t i = 0; i < matches.size(); ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

namespace {

std::map<Tokens, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void check_order(std::size_t n) {
  if (n != 1 && n != 2) throw std::invalid_argument("BLEU order must be 1 or 2");
}

}  // namespace

BleuStats bleu_stats(const Tokens& candidate, const Tokens& reference, std::size_t max_order) {
  BleuStats s(max_order);
  s.candidate_length = candidate.size();
  s.reference_length = reference.size();
  for (std::size_t n = 1; n <= max_order; ++n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    for (const auto& [gram, count] : cand) {
      s.totals[n - 1] += count;
      if (auto it = ref.find(gram); it != ref.end()) s.matches[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& stats, std::size_t n) {
  if (n == 0 || n > stats.matches.size()) throw std::invalid_argument("BLEU order out of range");
  if (stats.candidate_length == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (stats.matches[k] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(stats.matches[k]) /
                              static_cast<double>(stats.totals[k]));
  }
  double brevity = 1.0;
  if (stats.candidate_length < stats.reference_length) {
    brevity = std::exp(1.0 - static_cast<double>(stats.reference_length) /
                                 static_cast<double>(stats.candidate_length));
  }
  return brevity * std::exp(log_precision / static_cast<double>(n));
}

double bleu_n(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  check_order(n);
  if (candidate.empty() || reference.empty()) {
    throw std::invalid_argument("BLEU needs a non-empty candidate and reference");
  }
  return bleu_from_stats(bleu_stats(candidate, reference, n), n);
}

double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   std::size_t n, BleuMode mode) {
  check_order(n);
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("BLEU: candidate and reference counts differ");
  }
  if (candidates.empty()) throw std::invalid_argument("BLEU over an empty test set");
  if (mode == BleuMode::Sentence) {
    double total = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      total += candidates[i].empty() ? 0.0
                                     : bleu_from_stats(bleu_stats(candidates[i], references[i], n), n);
    }
    return total / static_cast<double>(candidates.size());
  }
  BleuStats pooled(n);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    pooled += bleu_stats(candidates[i], references[i], n);
  }
  return bleu_from_stats(pooled, n);
}

// ---------------------------------------------------------------------------

namespace {

void check_scores(const Scores& s) {
  for (int v : s) {
    if (v < 0 || v > kMaxScore) {
      throw std::invalid_argument("annotation score " + std::to_string(v) + " outside 0.." +
                                  std::to_string(kMaxScore));
    }
  }
}

std::size_t agreeing(const Scores& s) {
  if (s[0] == s[1] && s[1] == s[2]) return 3;
  if (s[0] == s[1] || s[1] == s[2] || s[0] == s[2]) return 2;
  return 1;
}

}  // namespace

int majority_vote(const Scores& scores) {
  check_scores(scores);
  Scores sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  // With three votes the median is the majority whenever one exists.
  return sorted[1];
}

AnnotationTable read_annotations(std::istream& in) {
  AnnotationTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2 + kAnnotators) {
      throw DataError("annotation line " + std::to_string(lineno) + ": expected 5 fields");
    }
    AnnotationItem item;
    item.item_id = std::string(trim(f[0]));
    const auto metric = trim(f[1]);
    if (metric == "grammar" || metric == "gram") {
      item.metric = Metric::Grammar;
    } else if (metric == "logicality" || metric == "logic") {
      item.metric = Metric::Logicality;
    } else {
      throw DataError("annotation line " + std::to_string(lineno) + ": unknown metric '" +
                      std::string(metric) + "'");
    }
    for (std::size_t a = 0; a < kAnnotators; ++a) {
      auto v = parse_int(f[2 + a]);
      if (!v || *v < 0 || *v > kMaxScore) {
        throw DataError("annotation line " + std::to_string(lineno) + ": score must be 0, 1 or 2");
      }
      item.scores[a] = static_cast<int>(*v);
    }
    table.push_back(std::move(item));
  }
  return table;
}

AgreementStats agreement_stats(const AnnotationTable& table, Metric metric) {
  AgreementStats s;
  std::array<std::size_t, 4> counts{};
  for (const auto& item : table) {
    if (item.metric != metric) continue;
    check_scores(item.scores);
    ++counts[agreeing(item.scores)];
    ++s.items;
  }
  if (s.items == 0) return s;
  const double n = static_cast<double>(s.items);
  s.full = static_cast<double>(counts[3]) / n;
  s.majority = static_cast<double>(counts[2]) / n;
  s.none = static_cast<double>(counts[1]) / n;
  return s;
}

double mean_voted_score(const AnnotationTable& table, Metric metric) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& item : table) {
    if (item.metric != metric) continue;
    total += majority_vote(item.scores);
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::vector<std::vector<std::size_t>> category_counts(const AnnotationTable& table, Metric metric) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& item : table) {
    if (item.metric != metric) continue;
    check_scores(item.scores);
    std::vector<std::size_t> row(kMaxScore + 1, 0);
    for (int v : item.scores) ++row[static_cast<std::size_t>(v)];
    out.push_back(std::move(row));
  }
  return out;
}

KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
  if (counts.empty()) throw std::invalid_argument("fleiss_kappa: no items");
  const std::size_t categories = counts.front().size();
  if (categories == 0) throw std::invalid_argument("fleiss_kappa: no categories");
  std::size_t raters = 0;
  for (auto c : counts.front()) raters += c;
  if (raters < 2) throw std::invalid_argument("fleiss_kappa: need at least two raters per item");

  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(counts.size());
  std::vector<double> category_totals(categories, 0.0);
  double observed_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != categories) {
      throw std::invalid_argument("fleiss_kappa: row " + std::to_string(i) +
                                  " has a different number of categories");
    }
    std::size_t row_sum = 0;
    double squares = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      row_sum += row[j];
      squares += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      category_totals[j] += static_cast<double>(row[j]);
    }
    if (row_sum != raters) {
      throw std::invalid_argument("fleiss_kappa: row " + std::to_string(i) + " sums to " +
                                  std::to_string(row_sum) + ", expected " + std::to_string(raters));
    }
    observed_sum += (squares - n) / (n * (n - 1.0));
  }
  KappaResult r;
  r.observed = observed_sum / items;
  for (double total : category_totals) {
    const double p = total / (items * n);
    r.expected += p * p;
  }
  if (r.expected == 1.0) {
    r.degenerate = true;
    r.kappa = 1.0;
    return r;
  }
  r.kappa = (r.observed - r.expected) / (1.0 - r.expected);
  return r;
}

}  // namespace storygen
