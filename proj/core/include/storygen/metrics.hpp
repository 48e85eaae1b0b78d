#pragma once

// Automatic (BLEU) and human-evaluation (voting, agreement, kappa) metrics.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace storygen {

using Tokens = std::vector<std::string>;

/// Clipped n-gram matches and candidate n-gram totals for orders 1..max_order,
/// plus candidate/reference lengths. Sums over a corpus by addition.
struct BleuStats {
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  explicit BleuStats(std::size_t max_order = 2) : matches(max_order, 0), totals(max_order, 0) {}
  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(const Tokens& candidate, const Tokens& reference, std::size_t max_order);

/// Brevity penalty times the geometric mean of modified precisions 1..n.
double bleu_from_stats(const BleuStats& stats, std::size_t n);

/// Sentence-level BLEU-n, n in {1, 2}.
double bleu_n(const Tokens& candidate, const Tokens& reference, std::size_t n);

enum class BleuMode { Corpus, Sentence };

/// Corpus mode pools clipped counts over all pairs; sentence mode averages
/// per-pair scores.
double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                   std::size_t n, BleuMode mode = BleuMode::Corpus);

// ---------------------------------------------------------------------------
// Human evaluation

inline constexpr int kMaxScore = 2;
inline constexpr std::size_t kAnnotators = 3;
using Scores = std::array<int, kAnnotators>;

/// Score held by at least two annotators; a three-way split yields the median.
int majority_vote(const Scores& scores);

enum class Metric { Grammar, Logicality };

struct AnnotationItem {
  std::string item_id;
  Metric metric = Metric::Grammar;
  Scores scores{};
};

using AnnotationTable = std::vector<AnnotationItem>;

/// `item_id \t metric \t s1 \t s2 \t s3` lines; metric is grammar or logicality.
AnnotationTable read_annotations(std::istream& in);

struct AgreementStats {
  std::size_t items = 0;
  double full = 0.0;      // 3/3 annotators agree
  double majority = 0.0;  // exactly 2/3 agree
  double none = 0.0;      // 1/3: all scores differ
};

AgreementStats agreement_stats(const AnnotationTable& table, Metric metric);

/// Mean of majority-voted labels for one metric.
double mean_voted_score(const AnnotationTable& table, Metric metric);

/// items x categories count matrix for one metric (categories are scores 0..2).
std::vector<std::vector<std::size_t>> category_counts(const AnnotationTable& table, Metric metric);

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // mean per-item agreement
  double expected = 0.0;  // chance agreement
  bool degenerate = false;  // expected == 1: defined as kappa 1.0
};

/// Fleiss' kappa; every row must sum to the same annotator count (> 1).
KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts);

}  // namespace storygen
