#pragma once

// Ending generation and teacher-forced perplexity.

#include <cstddef>
#include <vector>

#include "storygen/model.hpp"

namespace storygen {

inline constexpr std::size_t kDefaultMaxLength = 30;

struct GenerationResult {
  std::size_t story_id = 0;
  std::vector<TokenId> tokens;        // generated words, EOS excluded
  std::vector<double> step_log_probs; // one per decoding step, EOS step included
  bool finished = false;              // ended with EOS rather than the length cap
  std::vector<std::vector<double>> state_attention;      // per step, over X4
  std::vector<std::vector<double>> knowledge_attention;  // per step, over X4

  double score() const;             // sum of step log-probabilities
  double normalized_score() const;  // score / number of steps
};

/// Picks the most probable token at each step (lowest id on ties) until EOS
/// or max_length steps.
GenerationResult greedy_decode(const ModelParams& params, const Story& story,
                               const TripleStore* store, std::size_t max_length = kDefaultMaxLength);

/// Beam search ranking finished hypotheses by score / steps. beam == 1
/// returns exactly the greedy result.
GenerationResult beam_search(const ModelParams& params, const Story& story,
                             const TripleStore* store, std::size_t beam = 5,
                             std::size_t max_length = kDefaultMaxLength);

struct DecoderLikelihood {
  double nll = 0.0;
  std::size_t tokens = 0;  // ending tokens + EOS
};

/// Teacher-forced decoder NLL of the reference ending.
DecoderLikelihood decoder_likelihood(const ModelParams& params, const Story& story,
                                     const TripleStore* store);

struct PerplexityResult {
  double perplexity = 0.0;
  double total_nll = 0.0;
  std::size_t tokens = 0;
  double mean_nll() const { return total_nll / static_cast<double>(tokens); }
};

/// exp(total decoder NLL / total ending tokens, EOS included). Per-story
/// results are folded in dataset order regardless of worker count.
PerplexityResult perplexity(const ModelParams& params, const Dataset& data,
                            const TripleStore* store, std::size_t workers = 1);

}  // namespace storygen
