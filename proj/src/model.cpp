#include "corefkit/model.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace coref {

std::string NodeId::to_string() const {
  std::string s = std::to_string(token);
  if (empty_suffix > 0) s += "." + std::to_string(empty_suffix);
  return s;
}

bool operator==(const Node& a, const Node& b) {
  return a.id == b.id && a.form == b.form && a.head == b.head &&
         a.deprel == b.deprel && a.is_empty == b.is_empty &&
         a.lemma == b.lemma && a.upos == b.upos && a.xpos == b.xpos &&
         a.feats == b.feats && a.deps == b.deps && a.misc == b.misc;
}

bool Document::nodes_equal(const Document& b) const { return nodes == b.nodes; }

int Document::num_words() const {
  int n = 0;
  for (const auto& node : nodes)
    if (!node.is_empty) n++;
  return n;
}

void Document::rebuild_index() {
  index_.clear();
  index_.reserve(nodes.size());
  for (int i = 0; i < static_cast<int>(nodes.size()); i++)
    index_.emplace(nodes[i].id, i);
}

int Document::index_of(const NodeId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

const Node* Document::find(const NodeId& id) const {
  int i = index_of(id);
  return i < 0 ? nullptr : &nodes[i];
}

std::pair<int, int> Document::sentence_range(int sentence) const {
  int begin = sentence_begin[sentence];
  int end = sentence + 1 < num_sentences() ? sentence_begin[sentence + 1]
                                           : static_cast<int>(nodes.size());
  return {begin, end};
}

namespace {

std::string describe(const NodeId& id) {
  return "sentence " + std::to_string(id.sentence) + " node " + id.to_string();
}

std::string describe_mention(const Entity& e, const Mention& m) {
  std::string s = "entity " + e.id + " mention";
  if (!m.nodes.empty()) s += " at " + describe(m.nodes.front());
  return s;
}

}  // namespace

ValidationReport validate_document(const Document& doc) {
  ValidationReport report;
  auto error = [&](std::string msg) { report.errors.push_back(std::move(msg)); };

  // Sentence boundaries and node ordering.
  if (doc.sentence_begin.empty() != doc.nodes.empty())
    error("sentence_begin inconsistent with nodes");
  if (!doc.sentence_begin.empty() && doc.sentence_begin.front() != 0)
    error("first sentence must begin at node 0");
  for (int s = 0; s < doc.num_sentences(); s++) {
    auto [begin, end] = doc.sentence_range(s);
    if (begin >= end) {
      error("sentence " + std::to_string(s) + " is empty");
      continue;
    }
    int prev_word = 0;
    for (int i = begin; i < end; i++) {
      const Node& n = doc.nodes[i];
      if (n.id.sentence != s)
        error(describe(n.id) + ": sentence index disagrees with position");
      if (n.id.is_root()) error(describe(n.id) + ": node uses the ROOT id");
      if ((n.id.empty_suffix > 0) != n.is_empty)
        error(describe(n.id) + ": is_empty disagrees with id");
      if (i > begin && !(doc.nodes[i - 1].id < n.id))
        error(describe(n.id) + ": node ids not increasing");
      if (!n.is_empty) {
        if (n.id.token != prev_word + 1)
          error(describe(n.id) + ": word ids must be consecutive from 1");
        prev_word = n.id.token;
      } else if (n.id.token != prev_word) {
        error(describe(n.id) + ": empty node not anchored at preceding word");
      }
    }
  }

  // Heads: same sentence or ROOT, existing, acyclic.
  for (const Node& n : doc.nodes) {
    if (n.head.is_root()) {
      if (n.head.sentence != n.id.sentence)
        error(describe(n.id) + ": ROOT head must use the node's sentence");
      continue;
    }
    if (n.head.sentence != n.id.sentence) {
      error(describe(n.id) + ": head crosses a sentence boundary");
      continue;
    }
    if (doc.index_of(n.head) < 0)
      error(describe(n.id) + ": head " + n.head.to_string() + " does not exist");
  }
  for (int i = 0; i < static_cast<int>(doc.nodes.size()); i++) {
    // Follow the head chain; a chain longer than the sentence is a cycle.
    NodeId cur = doc.nodes[i].id;
    int steps = 0;
    int limit = static_cast<int>(doc.nodes.size()) + 1;
    while (!cur.is_root() && steps <= limit) {
      int j = doc.index_of(cur);
      if (j < 0) break;  // dangling head, reported above
      cur = doc.nodes[j].head;
      steps++;
    }
    if (steps > limit) {
      error(describe(doc.nodes[i].id) + ": head chain does not reach ROOT (cycle)");
      break;  // one report is enough, every node on the cycle would repeat it
    }
  }

  // Mentions and entities.
  for (const Entity& e : doc.entities) {
    if (e.id.empty()) error("entity with empty id");
    if (e.mentions.empty()) {
      error("entity " + e.id + " has no mentions");
      continue;
    }
    std::set<std::vector<NodeId>> seen_node_sets;
    for (const Mention& m : e.mentions) {
      if (m.nodes.empty()) {
        error(describe_mention(e, m) + " has no nodes");
        continue;
      }
      bool nodes_ok = true;
      for (const NodeId& id : m.nodes) {
        if (doc.index_of(id) < 0) {
          error(describe_mention(e, m) + " references missing node " +
                describe(id));
          nodes_ok = false;
        }
      }
      for (size_t k = 1; k < m.nodes.size(); k++)
        if (!(m.nodes[k - 1] < m.nodes[k])) {
          error(describe_mention(e, m) + " nodes not sorted and unique");
          nodes_ok = false;
          break;
        }
      if (std::find(m.nodes.begin(), m.nodes.end(), m.head) == m.nodes.end())
        error(describe_mention(e, m) + " head " + m.head.to_string() +
              " is not one of its nodes");
      if (!seen_node_sets.insert(m.nodes).second)
        error("entity " + e.id + " has two mentions with identical node sets");
      if (nodes_ok && m.nodes.front().sentence != m.nodes.back().sentence)
        report.warnings.push_back(describe_mention(e, m) +
                                  " spans several sentences");
    }
  }

  return report;
}

bool mention_is_single_subtree(const Document& doc, const Mention& mention) {
  if (mention.nodes.empty())
    throw std::invalid_argument("mention has no nodes");
  std::vector<int> positions;
  positions.reserve(mention.nodes.size());
  for (const NodeId& id : mention.nodes) {
    int i = doc.index_of(id);
    if (i < 0)
      throw std::invalid_argument("mention references missing node " +
                                  id.to_string());
    positions.push_back(i);
  }

  // Depth of each mention node; the minimal-depth node is the candidate root.
  auto depth_of = [&](int pos) {
    int depth = 0;
    NodeId cur = doc.nodes[pos].head;
    while (!cur.is_root()) {
      int j = doc.index_of(cur);
      if (j < 0 || depth > static_cast<int>(doc.nodes.size()))
        throw std::invalid_argument("broken head chain at " +
                                    doc.nodes[pos].id.to_string());
      depth++;
      cur = doc.nodes[j].head;
    }
    return depth;
  };
  int root_pos = positions[0];
  int best_depth = depth_of(root_pos);
  for (size_t k = 1; k < positions.size(); k++) {
    int d = depth_of(positions[k]);
    if (d < best_depth) {
      best_depth = d;
      root_pos = positions[k];
    }
  }

  // Collect the full subtree under root_pos over all nodes of the sentence.
  const NodeId root_id = doc.nodes[root_pos].id;
  auto [begin, end] = doc.sentence_range(root_id.sentence);
  std::vector<char> in_subtree(end - begin, 0);
  in_subtree[root_pos - begin] = 1;
  // Nodes are processed repeatedly until the member set stabilizes; heads may
  // point forward (empty nodes), so one left-to-right pass is not enough.
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

  std::vector<NodeId> subtree;
  for (int i = begin; i < end; i++)
    if (in_subtree[i - begin]) subtree.push_back(doc.nodes[i].id);
  return subtree == mention.nodes;
}

namespace {

using MentionKey = std::tuple<NodeId, NodeId, std::vector<NodeId>, NodeId>;

MentionKey mention_key(const Mention& m) {
  if (m.nodes.empty()) return {};
  return {m.nodes.front(), m.nodes.back(), m.nodes, m.head};
}

}  // namespace

void canonicalize_entities(Document& doc) {
  for (Entity& e : doc.entities)
    std::sort(e.mentions.begin(), e.mentions.end(),
              [](const Mention& a, const Mention& b) {
                return mention_key(a) < mention_key(b);
              });
  std::sort(doc.entities.begin(), doc.entities.end(),
            [](const Entity& a, const Entity& b) {
              auto ka = a.mentions.empty()
                            ? MentionKey{}
                            : mention_key(a.mentions.front());
              auto kb = b.mentions.empty()
                            ? MentionKey{}
                            : mention_key(b.mentions.front());
              return std::tie(ka, a.id) < std::tie(kb, b.id);
            });
}

}  // namespace coref
