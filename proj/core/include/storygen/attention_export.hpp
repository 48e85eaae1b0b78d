#pragma once

// Attention weights of one story in a line-oriented text format for
// heat-map plotting.
//
//   storygen-attention v1
//   story <id> knowledge <0|1>
//   tokens <i> <w1> ... <wn>            i = 1..4 context, 5 = generated ending
//   encoder <i> rows <l_i> cols <l_i-1>  i = 2..4
//   enc <i> <j> <k> <alpha_h> <alpha_x>  alpha_x is '-' without knowledge
//   decoder rows <T> cols <l_4>
//   dec <t> <k> <alpha_h> <alpha_x>
//   triples <i> <j> <n>                  n = 0 when the word used the fallback
//   tri <i> <j> <r> <alpha>
//   end
//
// Indices are 1-based. Values use the shortest round-trip decimal form.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "storygen/corpus.hpp"
#include "storygen/decode.hpp"
#include "storygen/model.hpp"

namespace storygen {

using WeightMatrix = std::vector<std::vector<double>>;

struct StoryAttention {
  std::size_t story_id = 0;
  bool has_knowledge = false;
  std::array<std::vector<std::string>, kContextSentences> sentence_tokens;
  std::vector<std::string> generated_tokens;
  // Index p holds sentence p+2 attending to sentence p+1.
  std::array<WeightMatrix, kContextSentences - 1> state;
  std::array<WeightMatrix, kContextSentences - 1> knowledge;
  WeightMatrix decoder_state;      // steps x l_4
  WeightMatrix decoder_knowledge;  // steps x l_4
  std::array<WeightMatrix, kContextSentences> triples;  // per sentence, per word

  bool operator==(const StoryAttention&) const = default;
};

StoryAttention collect_attention(const EncoderTrace& trace, const GenerationResult& generation,
                                 const Vocabulary& vocab, bool has_knowledge);

void write_attention(std::ostream& out, const std::vector<StoryAttention>& stories);
void write_attention(const std::filesystem::path& path, const std::vector<StoryAttention>& stories);
std::vector<StoryAttention> read_attention(std::istream& in);

/// Character-shaded heat map of a weight matrix.
void render_heatmap(std::ostream& out, const WeightMatrix& weights,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels);

}  // namespace storygen
