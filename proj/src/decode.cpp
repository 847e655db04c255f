#include "corefkit/decode.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "corefkit/syntax.hpp"

namespace coref {

std::string to_string(OverlapMode m) {
  switch (m) {
    case OverlapMode::kNone: return "none";
    case OverlapMode::kMin: return "min";
    case OverlapMode::kMax: return "max";
  }
  return "none";
}

OverlapMode overlap_mode_from_string(const std::string& s) {
  if (s == "none") return OverlapMode::kNone;
  if (s == "min") return OverlapMode::kMin;
  if (s == "max") return OverlapMode::kMax;
  throw ConfigError("unknown overlap mode: " + s);
}

OverlapPlan plan_overlap(int num_segments, int max_segments, OverlapMode mode) {
  if (num_segments < 1) throw ConfigError("plan_overlap: no segments");
  if (max_segments < 1) throw ConfigError("plan_overlap: max_segments < 1");
  if (mode != OverlapMode::kNone && max_segments < 2)
    throw ConfigError("overlap requires max_segments >= 2");

  OverlapPlan plan;
  plan.mode = mode;
  int stride = max_segments;
  if (mode == OverlapMode::kMin) stride = max_segments - 1;
  if (mode == OverlapMode::kMax) stride = 1;

  int start = 0;
  while (true) {
    int end = std::min(start + max_segments, num_segments) - 1;
    plan.windows.emplace_back(start, end);
    if (end >= num_segments - 1) break;
    start += stride;
  }
  return plan;
}

std::vector<AntecedentChoice> select_antecedents(const ScoreTable& table,
                                                 SingletonMode mode) {
  std::vector<AntecedentChoice> choices(table.spans.size());
  for (size_t i = 0; i < table.spans.size(); i++) {
    // The dummy option scores 0 and wins ties.
    double best = 0.0;
    int best_ante = -1;
    bool singleton = false;
    const Eigen::VectorXd& scores = table.pair_scores[i];
    for (long r = 0; r < scores.size(); r++) {
      if (scores[r] > best) {
        best = scores[r];
        best_ante = table.antecedents[i][static_cast<size_t>(r)];
        singleton = false;
      }
    }
    if (table.has_singleton_option && table.singleton_scores[i] > best) {
      best_ante = -1;
      singleton = true;
    }
    choices[i].antecedent = best_ante;
    if (singleton) {
      choices[i].is_mention = true;
    } else if (best_ante < 0 && mode == SingletonMode::kMentions) {
      // Resolved to the dummy: surface iff the mention head says so.
      choices[i].is_mention = table.mention_scores[i] > 0.0;
    }
  }
  return choices;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

Mention materialize(const Document& doc, const ScoreTable& table, size_t row) {
  const SpanCandidate& span = table.spans[row];
  Mention m;
  m.nodes.reserve(static_cast<size_t>(span.width()));
  for (int p = span.start; p <= span.end; p++)
    m.nodes.push_back(doc.nodes[static_cast<size_t>(p)].id);
  if (!table.head_offsets.empty()) {
    m.head = doc.nodes[static_cast<size_t>(span.start + table.head_offsets[row])].id;
  } else if (span.width() == 1) {
    m.head = m.nodes.front();
  } else {
    m.head = select_head(doc, m.nodes);
  }
  return m;
}

}  // namespace

ClusterSet build_clusters(const Document& doc, const ScoreTable& table,
                          const std::vector<AntecedentChoice>& choices,
                          const ScorerConfig& /*config*/, int example_index) {
  const int n = static_cast<int>(table.spans.size());
  UnionFind uf(n);
  std::vector<bool> keep(static_cast<size_t>(n), false);
  for (int i = 0; i < n; i++) {
    const AntecedentChoice& c = choices[static_cast<size_t>(i)];
    if (c.antecedent >= 0) {
      uf.unite(i, c.antecedent);
      keep[static_cast<size_t>(i)] = keep[static_cast<size_t>(c.antecedent)] =
          true;
    } else if (c.is_mention) {
      keep[static_cast<size_t>(i)] = true;
    }
  }

  std::map<int, std::vector<int>> groups;  // root -> rows, ascending
  for (int i = 0; i < n; i++)
    if (keep[static_cast<size_t>(i)]) groups[uf.find(i)].push_back(i);

  // Rows are in document order, so sorting groups by first row orders
  // clusters by first mention.
  std::vector<std::vector<int>> ordered;
  for (auto& [root, rows] : groups) ordered.push_back(std::move(rows));
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  ClusterSet out;
  for (const std::vector<int>& rows : ordered) {
    std::vector<Mention> cluster;
    cluster.reserve(rows.size());
    for (int r : rows)
      cluster.push_back(materialize(doc, table, static_cast<size_t>(r)));
    out.provenance.emplace_back(rows.size(), example_index);
    out.clusters.push_back(std::move(cluster));
  }
  return out;
}

namespace {

// Sort key of a mention inside the full document.
std::tuple<int, int, std::vector<NodeId>> mention_order_key(
    const Document& doc, const Mention& m) {
  return {doc.index_of(m.first()), doc.index_of(m.last()), m.nodes};
}

}  // namespace

ClusterSet merge_overlapping_clusters(
    const Document& doc, const std::vector<ClusterSet>& examples,
    const OverlapPlan& plan, const std::vector<std::pair<int, int>>& segments,
    bool filter_seen) {
  struct Placed {
    Mention mention;
    int example = 0;
  };
  std::map<std::vector<NodeId>, int> uid_of;
  std::vector<Placed> placed;
  std::vector<int> parent;

  auto find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x)
      x = parent[static_cast<size_t>(x)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
    return x;
  };

  int covered_end = -1;  // last segment index covered by earlier windows
  for (size_t e = 0; e < examples.size(); e++) {
    // First node position not seen by any earlier window.
    int new_begin = 0;
    if (e > 0 && covered_end >= 0)
      new_begin = segments[static_cast<size_t>(covered_end)].second;

    for (size_t c = 0; c < examples[e].clusters.size(); c++) {
      const std::vector<Mention>& cluster = examples[e].clusters[c];
      if (filter_seen && e > 0) {
        bool has_new = false;
        for (const Mention& m : cluster)
          if (doc.index_of(m.first()) >= new_begin) {
            has_new = true;
            break;
          }
        if (!has_new) continue;
      }
      int prev_uid = -1;
      for (const Mention& m : cluster) {
        auto [it, inserted] = uid_of.try_emplace(m.nodes, -1);
        if (inserted) {
          it->second = static_cast<int>(placed.size());
          placed.push_back({m, static_cast<int>(e)});
          parent.push_back(it->second);
        }
        int uid = it->second;
        if (prev_uid >= 0)
          parent[static_cast<size_t>(find(uid))] = find(prev_uid);
        prev_uid = uid;
      }
    }
    covered_end = std::max(covered_end, plan.windows[e].second);
  }

  std::map<int, std::vector<int>> groups;
  for (int uid = 0; uid < static_cast<int>(placed.size()); uid++)
    groups[find(uid)].push_back(uid);

  using Key = std::tuple<int, int, std::vector<NodeId>>;
  std::vector<std::pair<Key, std::vector<int>>> ordered;
  for (auto& [root, uids] : groups) {
    std::sort(uids.begin(), uids.end(), [&](int a, int b) {
      return mention_order_key(doc, placed[static_cast<size_t>(a)].mention) <
             mention_order_key(doc, placed[static_cast<size_t>(b)].mention);
    });
    Key key = mention_order_key(
        doc, placed[static_cast<size_t>(uids.front())].mention);
    ordered.emplace_back(std::move(key), std::move(uids));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  ClusterSet out;
  for (auto& [key, uids] : ordered) {
    std::vector<Mention> cluster;
    std::vector<int> prov;
    for (int uid : uids) {
      cluster.push_back(placed[static_cast<size_t>(uid)].mention);
      prov.push_back(placed[static_cast<size_t>(uid)].example);
    }
    out.clusters.push_back(std::move(cluster));
    out.provenance.push_back(std::move(prov));
  }
  return out;
}

namespace {

Document slice_document(const Document& doc, int begin, int end) {
  Document sub;
  sub.doc_id = doc.doc_id;
  sub.nodes.assign(doc.nodes.begin() + begin, doc.nodes.begin() + end);
  for (int sb : doc.sentence_begin)
    if (sb >= begin && sb < end) sub.sentence_begin.push_back(sb - begin);
  sub.rebuild_index();
  return sub;
}

}  // namespace

Document predict_document(const Parameters& params, const ScorerConfig& config,
                          const Vocabulary& vocab, const Document& doc,
                          const PredictOptions& options) {
  Document out = doc;
  out.entities.clear();
  if (doc.nodes.empty()) return out;

  std::vector<std::pair<int, int>> segments =
      plan_segments(doc, config.encoder.segment_length);
  OverlapPlan plan = plan_overlap(static_cast<int>(segments.size()),
                                  options.max_segments, options.overlap);

  std::vector<ClusterSet> examples;
  examples.reserve(plan.windows.size());
  for (size_t e = 0; e < plan.windows.size(); e++) {
    auto [first_seg, last_seg] = plan.windows[e];
    Document sub =
        slice_document(doc, segments[static_cast<size_t>(first_seg)].first,
                       segments[static_cast<size_t>(last_seg)].second);
    ScoreTable table = score_document(params, config, vocab, sub);
    std::vector<AntecedentChoice> choices =
        select_antecedents(table, config.singleton_mode);
    examples.push_back(build_clusters(sub, table, choices, config,
                                      static_cast<int>(e)));
  }

  ClusterSet merged = merge_overlapping_clusters(doc, examples, plan, segments,
                                                 options.filter_seen);

  for (size_t c = 0; c < merged.clusters.size(); c++) {
    Entity entity;
    entity.mentions = merged.clusters[c];
    if (options.reconstruct_spans)
      for (Mention& m : entity.mentions)
        if (m.nodes.size() == 1) m = reconstruct_span_from_head(doc, m.head);
    out.entities.push_back(std::move(entity));
  }
  canonicalize_entities(out);
  for (size_t c = 0; c < out.entities.size(); c++)
    out.entities[c].id = "e" + std::to_string(c + 1);
  return out;
}

}  // namespace coref
