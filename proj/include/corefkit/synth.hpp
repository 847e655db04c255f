#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corefkit/model.hpp"

namespace coref {

// Layout of one generated document: every entity owns a contiguous block of
// sentences, one mention per sentence placed as the final token (a leaf of
// the right-branching chain). The block opens with the entity's unique name
// token; the remaining mentions are the shared pronoun. Entities marked for
// a cross-segment chain repeat their name token once more in the tail
// sentences of the document, as far from the block as the document allows.
// Filler sentences carry no mention.
struct SynthSpec {
  int vocab_size = 50;        // distinct name tokens available
  int documents = 10;
  int sentences_per_doc = 20;
  int sentence_length = 4;    // tokens per sentence, mention slot included
  int entities_per_doc = 4;
  int mentions_per_entity = 3;  // one name plus pronouns
  double singleton_rate = 0.0;
  double cross_segment_rate = 0.0;
  std::uint64_t seed = 0;

  // Throws ConfigError when the pattern cannot fit the document shape.
  void validate() const;
};

std::vector<Document> generate(const SynthSpec& spec);

// Token forms the generator emits; tests and oracles key off these.
inline std::string synth_name_form(int index) {
  return "n" + std::to_string(index);
}
inline constexpr const char* kSynthPronoun = "it";
inline constexpr const char* kSynthFiller = "x";

}  // namespace coref
