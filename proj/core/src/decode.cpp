#include "storygen/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "storygen/parallel.hpp"

namespace storygen {

namespace {

double clamped_log(double p) { return std::log(std::max(p, kLogEpsilon)); }

struct Hypothesis {
  LstmState state;
  TokenId last = kBos;
  GenerationResult result;
  double score = 0.0;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  double score;
  double prob;
};

// Higher score first; equal scores prefer the more probable token, then the
// earlier parent and the lower id.
bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.prob != b.prob) return a.prob > b.prob;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

}  // namespace

double GenerationResult::score() const {
  double s = 0.0;
  for (double lp : step_log_probs) s += lp;
  return s;
}

double GenerationResult::normalized_score() const {
  return step_log_probs.empty() ? 0.0 : score() / static_cast<double>(step_log_probs.size());
}

GenerationResult greedy_decode(const ModelParams& params, const Story& story,
                               const TripleStore* store, std::size_t max_length) {
  Tape tape;
  EncoderTrace trace = encode_story(tape, params, story, store);
  GenerationResult out;
  out.story_id = story.id;
  LstmState state = trace.final_state;
  TokenId previous = kBos;
  for (std::size_t step = 0; step < max_length; ++step) {
    DecodeStep d = decode_step(tape, params, state, previous, trace);
    auto dist = d.distribution.value();
    // max_element returns the first maximum, i.e. the lowest id.
    const auto best = static_cast<TokenId>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    out.step_log_probs.push_back(clamped_log(dist[best]));
    out.state_attention.push_back(std::move(d.state_attention));
    out.knowledge_attention.push_back(std::move(d.knowledge_attention));
    if (best == kEos) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(best);
    state = std::move(d.state);
    previous = best;
  }
  return out;
}

GenerationResult beam_search(const ModelParams& params, const Story& story,
                             const TripleStore* store, std::size_t beam, std::size_t max_length) {
  if (beam < 1) throw std::invalid_argument("beam width must be at least 1");
  Tape tape;
  EncoderTrace trace = encode_story(tape, params, story, store);

  std::vector<Hypothesis> live(1);
  live[0].state = trace.final_state;
  live[0].result.story_id = story.id;
  std::vector<GenerationResult> finished;

  for (std::size_t step = 0; step < max_length && !live.empty(); ++step) {
    std::vector<DecodeStep> steps;
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      steps.push_back(decode_step(tape, params, live[h].state, live[h].last, trace));
      auto dist = steps.back().distribution.value();
      for (std::size_t tok = 0; tok < dist.size(); ++tok) {
        candidates.push_back({h, static_cast<TokenId>(tok),
                              live[h].score + clamped_log(dist[tok]), dist[tok]});
      }
    }
    const std::size_t keep = std::min(beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<Hypothesis> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = candidates[c];
      const Hypothesis& parent = live[cand.parent];
      const DecodeStep& d = steps[cand.parent];
      Hypothesis h;
      h.result = parent.result;
      h.result.step_log_probs.push_back(clamped_log(cand.prob));
      h.result.state_attention.push_back(d.state_attention);
      h.result.knowledge_attention.push_back(d.knowledge_attention);
      h.score = cand.score;
      if (cand.token == kEos) {
        h.result.finished = true;
        finished.push_back(std::move(h.result));
        continue;
      }
      h.result.tokens.push_back(cand.token);
      h.state = d.state;
      h.last = cand.token;
      next.push_back(std::move(h));
    }
    live = std::move(next);
    if (finished.size() >= beam) break;
  }

  for (auto& h : live) finished.push_back(std::move(h.result));
  // Stable selection: the first hypothesis with the best normalized score.
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].normalized_score() > finished[best].normalized_score()) best = i;
  }
  return finished[best];
}

DecoderLikelihood decoder_likelihood(const ModelParams& params, const Story& story,
                                     const TripleStore* store) {
  Tape tape;
  EncoderTrace trace = encode_story(tape, params, story, store);
  DecoderLikelihood out;
  LstmState state = trace.final_state;
  TokenId previous = kBos;
  std::vector<TokenId> targets = story.ending.ids;
  targets.push_back(kEos);
  for (TokenId target : targets) {
    DecodeStep d = decode_step(tape, params, state, previous, trace);
    out.nll += cross_entropy(d.distribution, target).scalar();
    state = std::move(d.state);
    previous = target;
  }
  out.tokens = targets.size();
  return out;
}

PerplexityResult perplexity(const ModelParams& params, const Dataset& data,
                            const TripleStore* store, std::size_t workers) {
  if (data.empty()) throw std::invalid_argument("perplexity of an empty dataset");
  std::vector<DecoderLikelihood> per_story(data.size());
  parallel_for(data.size(), workers,
               [&](std::size_t i) { per_story[i] = decoder_likelihood(params, data[i], store); });
  PerplexityResult r;
  for (const auto& l : per_story) {
    r.total_nll += l.nll;
    r.tokens += l.tokens;
  }
  r.perplexity = std::exp(r.mean_nll());
  return r;
}

}  // namespace storygen
