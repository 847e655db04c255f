#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "corefkit/model.hpp"

namespace coref {

class ConlluError : public std::runtime_error {
 public:
  ConlluError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// One bracket event inside a MISC Entity attribute.
struct EntityEvent {
  enum class Kind { kOpen, kClose, kSingle };
  Kind kind;
  std::string entity_id;
  // Subspan marker "[k/n]" of a discontinuous mention part; 0/0 when absent.
  int part_k = 0;
  int part_n = 0;
  // Opaque '-'-separated attribute fields after the entity id (opens and
  // singles only; empty when absent).
  std::string attrs;

  friend bool operator==(const EntityEvent&, const EntityEvent&) = default;
};

// Parses the value of one Entity attribute, e.g. "(e2-person(e3" or
// "e3)e2)" or "(e1[1/2])". Throws ConlluError (line number 0) on malformed
// input; callers re-wrap with the real line number.
std::vector<EntityEvent> parse_entity_events(const std::string& value);

// Serializes events back to an Entity attribute value.
std::string format_entity_events(const std::vector<EntityEvent>& events);

// Parses a CorefUD file (contents, not a path). Documents are delimited by
// "# newdoc" comments; a file without any becomes a single document with an
// empty doc_id. Throws ConlluError with a 1-based line number on malformed
// input. The returned documents are validated and canonically ordered.
std::vector<Document> parse_corpus(const std::string& text);

// Writes documents back to CorefUD text, LF line endings, canonical comment
// lines ("# newdoc id = ...", "# sent_id = ..."), Entity attribute first in
// MISC. parse_corpus(write_corpus(parse_corpus(x))) equals
// parse_corpus(write_corpus(...)) structurally, and writing twice is
// byte-identical.
std::string write_corpus(const std::vector<Document>& docs);

}  // namespace coref
