#pragma once

#include <string>
#include <vector>

#include "corefkit/model.hpp"

namespace coref {

struct SyntaxFeatureConfig {
  int max_tree_depth = 5;
  int token_embedding_dim = 16;
  int deprel_embedding_dim = 8;
};

// Number of dependency edges from the node to the sentence ROOT sentinel
// (a word attached to ROOT has depth 1). Throws std::invalid_argument for
// missing nodes or broken head chains.
int node_depth(const Document& doc, const NodeId& id);

// The mention node of minimal depth; ties broken by document order. If the
// mention is a single subtree this is its root. Throws std::invalid_argument
// when nodes is empty or references missing nodes.
NodeId select_head(const Document& doc, const std::vector<NodeId>& nodes);
NodeId select_head(const Document& doc, const Mention& mention);

// The full subtree (empty nodes included) rooted at head, as a mention with
// nodes in document order. Throws std::invalid_argument if head is missing.
Mention reconstruct_span_from_head(const Document& doc, const NodeId& head);

struct TreePathEntry {
  NodeId node;
  std::string deprel;
  bool pad = false;
};

// Path from the node to its sentence root: (node, deprel of its incoming
// edge), then its head, and so on. Truncated to max_tree_depth entries and
// padded with PAD entries when the path is shorter.
std::vector<TreePathEntry> tree_path_to_root(const Document& doc,
                                             const NodeId& id,
                                             const SyntaxFeatureConfig& config);

}  // namespace coref
