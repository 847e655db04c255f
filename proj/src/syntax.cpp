#include "corefkit/syntax.hpp"

#include <algorithm>
#include <stdexcept>

namespace coref {

namespace {

int require_index(const Document& doc, const NodeId& id) {
  int i = doc.index_of(id);
  if (i < 0)
    throw std::invalid_argument("node " + id.to_string() + " not in document");
  return i;
}

}  // namespace

int node_depth(const Document& doc, const NodeId& id) {
  int depth = 0;
  NodeId cur = id;
  int limit = static_cast<int>(doc.nodes.size()) + 1;
  while (true) {
    const NodeId& head = doc.nodes[require_index(doc, cur)].head;
    if (head.is_root()) return depth + 1;
    cur = head;
    if (++depth > limit)
      throw std::invalid_argument("head chain from " + id.to_string() +
                                  " does not reach ROOT");
  }
}

NodeId select_head(const Document& doc, const std::vector<NodeId>& nodes) {
  if (nodes.empty())
    throw std::invalid_argument("select_head on empty node list");
  NodeId best = nodes[0];
  int best_depth = node_depth(doc, best);
  int best_pos = require_index(doc, best);
  for (size_t k = 1; k < nodes.size(); k++) {
    int d = node_depth(doc, nodes[k]);
    int pos = require_index(doc, nodes[k]);
    if (d < best_depth || (d == best_depth && pos < best_pos)) {
      best = nodes[k];
      best_depth = d;
      best_pos = pos;
    }
  }
  return best;
}

NodeId select_head(const Document& doc, const Mention& mention) {
  return select_head(doc, mention.nodes);
}

Mention reconstruct_span_from_head(const Document& doc, const NodeId& head) {
  int root_pos = require_index(doc, head);
  auto [begin, end] = doc.sentence_range(head.sentence);
  std::vector<char> in_subtree(end - begin, 0);
  in_subtree[root_pos - begin] = 1;
  // Heads of empty nodes may point forward, so iterate until stable.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = begin; i < end; i++) {
      if (in_subtree[i - begin]) continue;
      const NodeId& h = doc.nodes[i].head;
      if (h.is_root()) continue;
      int hp = doc.index_of(h);
      if (hp >= begin && hp < end && in_subtree[hp - begin]) {
        in_subtree[i - begin] = 1;
        changed = true;
      }
    }
  }
  Mention m;
  m.head = head;
  for (int i = begin; i < end; i++)
    if (in_subtree[i - begin]) m.nodes.push_back(doc.nodes[i].id);
  return m;
}

std::vector<TreePathEntry> tree_path_to_root(const Document& doc,
                                             const NodeId& id,
                                             const SyntaxFeatureConfig& config) {
  std::vector<TreePathEntry> path;
  path.reserve(config.max_tree_depth);
  NodeId cur = id;
  while (static_cast<int>(path.size()) < config.max_tree_depth) {
    const Node& n = doc.nodes[require_index(doc, cur)];
    path.push_back({n.id, n.deprel, false});
    if (n.head.is_root()) break;
    cur = n.head;
  }
  while (static_cast<int>(path.size()) < config.max_tree_depth)
    path.push_back({NodeId{}, "", true});
  return path;
}

}  // namespace coref
