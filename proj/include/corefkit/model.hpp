#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace coref {

// Identifies one node of a document. Regular words have empty_suffix == 0;
// an empty node "t.k" has token == t and empty_suffix == k and orders between
// word t and word t+1 of its sentence. sentence is 0-based, token is the
// 1-based CoNLL-U word index. token == 0 with empty_suffix == 0 is the ROOT
// sentinel of a sentence (valid as a head, never as a node), while "0.k" is a
// legal empty node placed before the first word.
struct NodeId {
  int sentence = 0;
  int token = 0;
  int empty_suffix = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;

  bool is_root() const { return token == 0 && empty_suffix == 0; }

  std::string to_string() const;
};

// ROOT sentinel for the given sentence.
inline NodeId root_of(int sentence) { return NodeId{sentence, 0, 0}; }

struct NodeIdHash {
  std::size_t operator()(const NodeId& id) const {
    std::size_t h = std::hash<int>()(id.sentence);
    h = h * 1000003u ^ std::hash<int>()(id.token);
    h = h * 1000003u ^ std::hash<int>()(id.empty_suffix);
    return h;
  }
};

struct Node {
  NodeId id;
  std::string form;
  NodeId head;          // ROOT sentinel when attached to the sentence root
  std::string deprel;
  bool is_empty = false;

  // Remaining CoNLL-U columns, passed through verbatim ("_" when absent).
  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::string feats = "_";
  std::string deps = "_";
  std::string misc = "_";  // excluding the Entity attribute
};

// A mention is a set of nodes (document order, no duplicates) plus a
// designated head node, which must be one of the nodes. attrs carries the
// opaque bracket attributes from the source annotation (may be empty).
struct Mention {
  std::vector<NodeId> nodes;
  NodeId head;
  std::string attrs;

  NodeId first() const { return nodes.front(); }
  NodeId last() const { return nodes.back(); }

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Entity {
  std::string id;
  std::vector<Mention> mentions;

  friend bool operator==(const Entity&, const Entity&) = default;
};

class Document {
 public:
  std::string doc_id;
  std::vector<Node> nodes;           // document order, empty nodes interleaved
  std::vector<int> sentence_begin;   // index into nodes of each sentence start
  std::vector<Entity> entities;

  // Multiword-token lines (e.g. "1-2\tdel\t...") preserved verbatim, keyed by
  // the id of the first word they cover. Not nodes; round-trip only.
  std::vector<std::pair<NodeId, std::string>> mwt_lines;

  int num_sentences() const { return static_cast<int>(sentence_begin.size()); }

  // Number of regular words (empty nodes excluded).
  int num_words() const;

  // Rebuild the id -> position index. Call after mutating nodes.
  void rebuild_index();

  // Position of id in nodes, or -1. Requires rebuild_index() after edits.
  int index_of(const NodeId& id) const;

  const Node* find(const NodeId& id) const;

  // Node range [begin, end) of a sentence.
  std::pair<int, int> sentence_range(int sentence) const;

  friend bool operator==(const Document& a, const Document& b) {
    return a.doc_id == b.doc_id && a.nodes_equal(b) &&
           a.sentence_begin == b.sentence_begin && a.entities == b.entities;
  }

 private:
  bool nodes_equal(const Document& b) const;
  std::unordered_map<NodeId, int, NodeIdHash> index_;
};

bool operator==(const Node&, const Node&);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

// Checks every structural invariant of the document:
//   - node ids strictly increasing in document order, consistent with
//     sentence_begin, word ids 1..n consecutive per sentence;
//   - every head is the ROOT sentinel or an existing node of the same
//     sentence, and following heads never cycles;
//   - mention nodes exist, are sorted, unique, and contain the head;
//   - entities are non-empty and no two mentions of one entity cover the
//     same node set.
// A mention whose nodes span several sentences is legal but reported as a
// warning. Returns all violations found, not just the first.
ValidationReport validate_document(const Document& doc);

// True iff the mention's node set equals the full subtree (in the dependency
// graph over all nodes, empty nodes included) rooted at the mention node of
// minimal depth. Throws std::invalid_argument if the mention references
// nodes missing from the document.
bool mention_is_single_subtree(const Document& doc, const Mention& mention);

// Sorts every entity's mentions by (first node, last node, full node list)
// and the entities by (key of their first mention, id). Total and
// deterministic for any validated document; used as the canonical order by
// the CoNLL-U writer.
void canonicalize_entities(Document& doc);

}  // namespace coref
