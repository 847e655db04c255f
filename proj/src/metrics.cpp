#include "corefkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "corefkit/scorer.hpp"

namespace coref {

std::string to_string(MatchMode m) {
  return m == MatchMode::kHead ? "head" : "exact";
}

MatchMode match_mode_from_string(const std::string& s) {
  if (s == "head") return MatchMode::kHead;
  if (s == "exact") return MatchMode::kExact;
  throw MetricsError("unknown match mode: " + s);
}

PRF make_prf(double recall_num, double recall_den, double precision_num,
             double precision_den) {
  PRF out;
  out.recall = recall_den > 0 ? recall_num / recall_den : 0.0;
  out.precision = precision_den > 0 ? precision_num / precision_den : 0.0;
  double s = out.precision + out.recall;
  out.f1 = s > 0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

namespace {

// Shared interning of mention keys across both sides of one document pair.
struct KeyInterner {
  MatchMode match;
  std::map<NodeId, int> by_head;
  std::map<std::vector<NodeId>, int> by_nodes;

  int intern(const Mention& m) {
    if (match == MatchMode::kHead) {
      auto [it, inserted] =
          by_head.try_emplace(m.head, static_cast<int>(by_head.size()));
      return it->second;
    }
    auto [it, inserted] =
        by_nodes.try_emplace(m.nodes, static_cast<int>(by_nodes.size()));
    return it->second;
  }
};

std::vector<std::vector<int>> key_entities(const Document& doc,
                                           KeyInterner& interner,
                                           bool keep_singletons,
                                           bool remove_before_collapse) {
  std::vector<std::vector<int>> out;
  std::set<int> claimed;
  for (const Entity& entity : doc.entities) {
    if (remove_before_collapse && !keep_singletons &&
        entity.mentions.size() <= 1)
      continue;
    std::vector<int> keys;
    for (const Mention& m : entity.mentions) {
      int k = interner.intern(m);
      if (claimed.count(k)) continue;  // first occurrence wins
      claimed.insert(k);
      keys.push_back(k);
    }
    if (keys.empty()) continue;
    if (!keep_singletons && !remove_before_collapse && keys.size() <= 1)
      continue;
    out.push_back(std::move(keys));
  }
  return out;
}

}  // namespace

AlignedPair prepare_for_scoring(const Document& gold, const Document& system,
                                MatchMode match, bool keep_singletons,
                                bool remove_before_collapse) {
  KeyInterner interner{match, {}, {}};
  AlignedPair pair;
  pair.gold =
      key_entities(gold, interner, keep_singletons, remove_before_collapse);
  pair.system =
      key_entities(system, interner, keep_singletons, remove_before_collapse);
  return pair;
}

namespace {

std::map<int, int> entity_of(const std::vector<std::vector<int>>& side) {
  std::map<int, int> out;
  for (size_t e = 0; e < side.size(); e++)
    for (int k : side[e]) out[k] = static_cast<int>(e);
  return out;
}

// MUC numerator/denominator for one direction: sum |E| - |partition(E)| over
// left entities, where the partition groups E's keys by right entity and
// unmatched keys form singleton parts.
void muc_direction(const std::vector<std::vector<int>>& left,
                   const std::map<int, int>& right_of, double* num,
                   double* den) {
  for (const std::vector<int>& entity : left) {
    std::set<int> parts;
    int unmatched = 0;
    for (int k : entity) {
      auto it = right_of.find(k);
      if (it == right_of.end())
        unmatched++;
      else
        parts.insert(it->second);
    }
    *num += static_cast<double>(entity.size()) -
            static_cast<double>(parts.size() + static_cast<size_t>(unmatched));
    *den += static_cast<double>(entity.size()) - 1.0;
  }
}

void b3_direction(const std::vector<std::vector<int>>& left,
                  const std::map<int, int>& right_of, double* num,
                  double* den) {
  for (const std::vector<int>& entity : left) {
    std::map<int, int> overlap;  // right entity -> |E * R|
    for (int k : entity) {
      auto it = right_of.find(k);
      if (it != right_of.end()) overlap[it->second]++;
    }
    for (const auto& [r, count] : overlap)
      *num += static_cast<double>(count) * static_cast<double>(count) /
              static_cast<double>(entity.size());
    *den += static_cast<double>(entity.size());
  }
}

struct CeafTotals {
  double phi = 0, gg = 0, ss = 0;
};

CeafTotals ceaf_totals(const AlignedPair& pair, bool entity_based) {
  CeafTotals t;
  const auto& g = pair.gold;
  const auto& s = pair.system;
  auto phi = [&](size_t i, size_t j, int common) {
    if (!entity_based) return static_cast<double>(common);
    double denom = static_cast<double>(g[i].size() + s[j].size());
    return denom > 0 ? 2.0 * static_cast<double>(common) / denom : 0.0;
  };
  std::map<int, int> sys_of = entity_of(s);
  std::vector<std::vector<double>> w(g.size(),
                                     std::vector<double>(s.size(), 0.0));
  for (size_t i = 0; i < g.size(); i++) {
    std::map<int, int> overlap;
    for (int k : g[i]) {
      auto it = sys_of.find(k);
      if (it != sys_of.end()) overlap[it->second]++;
    }
    for (const auto& [j, common] : overlap)
      w[i][static_cast<size_t>(j)] = phi(i, static_cast<size_t>(j), common);
  }
  std::vector<int> assign = max_assignment(w);
  for (size_t i = 0; i < assign.size(); i++)
    if (assign[i] >= 0) t.phi += w[i][static_cast<size_t>(assign[i])];
  for (const auto& e : g)
    t.gg += entity_based ? 1.0 : static_cast<double>(e.size());
  for (const auto& e : s)
    t.ss += entity_based ? 1.0 : static_cast<double>(e.size());
  return t;
}

}  // namespace

PRF muc(const AlignedPair& pair) {
  double rn = 0, rd = 0, pn = 0, pd = 0;
  std::map<int, int> sys_of = entity_of(pair.system);
  std::map<int, int> gold_of = entity_of(pair.gold);
  muc_direction(pair.gold, sys_of, &rn, &rd);
  muc_direction(pair.system, gold_of, &pn, &pd);
  return make_prf(rn, rd, pn, pd);
}

PRF b_cubed(const AlignedPair& pair) {
  double rn = 0, rd = 0, pn = 0, pd = 0;
  std::map<int, int> sys_of = entity_of(pair.system);
  std::map<int, int> gold_of = entity_of(pair.gold);
  b3_direction(pair.gold, sys_of, &rn, &rd);
  b3_direction(pair.system, gold_of, &pn, &pd);
  return make_prf(rn, rd, pn, pd);
}

PRF ceaf_m(const AlignedPair& pair) {
  CeafTotals t = ceaf_totals(pair, false);
  return make_prf(t.phi, t.gg, t.phi, t.ss);
}

PRF ceaf_e(const AlignedPair& pair) {
  CeafTotals t = ceaf_totals(pair, true);
  return make_prf(t.phi, t.gg, t.phi, t.ss);
}

std::vector<int> max_assignment(
    const std::vector<std::vector<double>>& weight) {
  const size_t n = weight.size();
  const size_t m = n > 0 ? weight[0].size() : 0;
  std::vector<int> result(n, -1);
  if (n == 0 || m == 0) return result;
  const size_t k = std::max(n, m);
  const double inf = std::numeric_limits<double>::infinity();

  // Kuhn-Munkres with potentials on the negated, zero-padded square matrix.
  std::vector<std::vector<double>> a(k + 1, std::vector<double>(k + 1, 0.0));
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) a[i + 1][j + 1] = -weight[i][j];

  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
  std::vector<size_t> p(k + 1, 0), way(k + 1, 0);
  for (size_t i = 1; i <= k; i++) {
    p[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<bool> used(k + 1, false);
    do {
      used[j0] = true;
      size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (size_t j = 1; j <= k; j++) {
        if (used[j]) continue;
        double cur = a[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= k; j++) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (size_t j = 1; j <= k; j++) {
    size_t i = p[j];
    if (i >= 1 && i <= n && j <= m && weight[i - 1][j - 1] > 0.0)
      result[i - 1] = static_cast<int>(j - 1);
  }
  return result;
}

void MetricAccumulator::add(const AlignedPair& pair) {
  std::map<int, int> sys_of = entity_of(pair.system);
  std::map<int, int> gold_of = entity_of(pair.gold);
  muc_direction(pair.gold, sys_of, &muc_rn, &muc_rd);
  muc_direction(pair.system, gold_of, &muc_pn, &muc_pd);
  b3_direction(pair.gold, sys_of, &b3_rn, &b3_rd);
  b3_direction(pair.system, gold_of, &b3_pn, &b3_pd);
  CeafTotals m = ceaf_totals(pair, false);
  cm_phi += m.phi;
  cm_gg += m.gg;
  cm_ss += m.ss;
  CeafTotals e = ceaf_totals(pair, true);
  ce_phi += e.phi;
  ce_gg += e.gg;
  ce_ss += e.ss;
}

MetricReport MetricAccumulator::report() const {
  MetricReport out;
  out.muc = make_prf(muc_rn, muc_rd, muc_pn, muc_pd);
  out.b3 = make_prf(b3_rn, b3_rd, b3_pn, b3_pd);
  out.ceaf_m = make_prf(cm_phi, cm_gg, cm_phi, cm_ss);
  out.ceaf_e = make_prf(ce_phi, ce_gg, ce_phi, ce_ss);
  out.primary = (out.muc.f1 + out.b3.f1 + out.ceaf_e.f1) / 3.0;
  return out;
}

namespace {

std::vector<std::pair<const Document*, const Document*>> pair_documents(
    const std::vector<Document>& gold, const std::vector<Document>& system) {
  std::map<std::string, const Document*> sys_by_id;
  for (const Document& d : system) sys_by_id[d.doc_id] = &d;
  std::vector<std::pair<const Document*, const Document*>> out;
  std::string missing;
  for (const Document& g : gold) {
    auto it = sys_by_id.find(g.doc_id);
    if (it == sys_by_id.end()) {
      missing += " " + g.doc_id;
      continue;
    }
    out.emplace_back(&g, it->second);
    sys_by_id.erase(it);
  }
  if (!missing.empty())
    throw MetricsError("documents missing from system:" + missing);
  if (!sys_by_id.empty()) {
    std::string extra;
    for (const auto& [id, d] : sys_by_id) extra += " " + id;
    throw MetricsError("documents missing from gold:" + extra);
  }
  return out;
}

}  // namespace

MetricReport primary_score(const std::vector<Document>& gold,
                           const std::vector<Document>& system,
                           MatchMode match, bool keep_singletons,
                           bool remove_before_collapse) {
  MetricAccumulator acc;
  for (auto [g, s] : pair_documents(gold, system))
    acc.add(prepare_for_scoring(*g, *s, match, keep_singletons,
                                remove_before_collapse));
  return acc.report();
}

double mention_overlap_ratio(const std::vector<Document>& gold,
                             const std::vector<Document>& system) {
  double num = 0, den = 0;
  for (auto [g, s] : pair_documents(gold, system)) {
    std::vector<const Mention*> gold_mentions, sys_mentions;
    for (const Entity& e : g->entities)
      for (const Mention& m : e.mentions) gold_mentions.push_back(&m);
    for (const Entity& e : s->entities)
      for (const Mention& m : e.mentions) sys_mentions.push_back(&m);
    auto order = [&](const Mention* a, const Mention* b) {
      return std::pair(g->index_of(a->first()), a->nodes) <
             std::pair(g->index_of(b->first()), b->nodes);
    };
    std::sort(gold_mentions.begin(), gold_mentions.end(), order);
    std::sort(sys_mentions.begin(), sys_mentions.end(), order);

    std::map<NodeId, std::vector<const Mention*>> sys_by_head;
    for (const Mention* m : sys_mentions) sys_by_head[m->head].push_back(m);
    std::map<NodeId, size_t> next;
    for (const Mention* gm : gold_mentions) {
      den += static_cast<double>(gm->nodes.size());
      auto it = sys_by_head.find(gm->head);
      if (it == sys_by_head.end()) continue;
      size_t& cursor = next[gm->head];
      if (cursor >= it->second.size()) continue;
      const Mention* sm = it->second[cursor++];
      std::vector<NodeId> common;
      std::set_intersection(gm->nodes.begin(), gm->nodes.end(),
                            sm->nodes.begin(), sm->nodes.end(),
                            std::back_inserter(common));
      num += static_cast<double>(common.size());
    }
  }
  return den > 0 ? num / den : 0.0;
}

void CrossSegmentCounts::add(const CrossSegmentCounts& other) {
  links_total += other.links_total;
  links_cross += other.links_cross;
  mentions_total += other.mentions_total;
  nearest_cross += other.nearest_cross;
  segments_total += other.segments_total;
  segments_over += other.segments_over;
}

double CrossSegmentCounts::cross_link_pct() const {
  return links_total > 0
             ? 100.0 * static_cast<double>(links_cross) /
                   static_cast<double>(links_total)
             : 0.0;
}

double CrossSegmentCounts::nearest_cross_pct() const {
  return mentions_total > 0
             ? 100.0 * static_cast<double>(nearest_cross) /
                   static_cast<double>(mentions_total)
             : 0.0;
}

double CrossSegmentCounts::segments_over_pct() const {
  return segments_total > 0
             ? 100.0 * static_cast<double>(segments_over) /
                   static_cast<double>(segments_total)
             : 0.0;
}

namespace {

// Block index (groups of block_segments segments) of every node position.
std::vector<int> block_of_position(const Document& doc, int block_segments,
                                   int segment_length) {
  std::vector<std::pair<int, int>> segments =
      plan_segments(doc, segment_length);
  std::vector<int> out(doc.nodes.size(), 0);
  for (size_t s = 0; s < segments.size(); s++)
    for (int p = segments[s].first; p < segments[s].second; p++)
      out[static_cast<size_t>(p)] = static_cast<int>(s) / block_segments;
  return out;
}

}  // namespace

CrossSegmentCounts cross_segment_stats(const Document& doc, int block_segments,
                                       int segment_length) {
  CrossSegmentCounts c;
  if (doc.nodes.empty()) return c;
  std::vector<std::pair<int, int>> segments =
      plan_segments(doc, segment_length);
  std::vector<int> block = block_of_position(doc, block_segments,
                                             segment_length);
  c.segments_total = static_cast<long>(segments.size());
  c.segments_over =
      std::max<long>(0, static_cast<long>(segments.size()) - block_segments);

  for (const Entity& entity : doc.entities) {
    std::vector<int> blocks;
    for (const Mention& m : entity.mentions)
      blocks.push_back(block[static_cast<size_t>(doc.index_of(m.first()))]);
    c.mentions_total += static_cast<long>(blocks.size());
    for (size_t i = 0; i < blocks.size(); i++) {
      for (size_t j = i + 1; j < blocks.size(); j++) {
        c.links_total++;
        if (blocks[i] != blocks[j]) c.links_cross++;
      }
      if (i > 0 && blocks[i] != blocks[i - 1]) c.nearest_cross++;
    }
  }
  return c;
}

CrossSegmentCounts cross_segment_stats(const std::vector<Document>& docs,
                                       int block_segments,
                                       int segment_length) {
  CrossSegmentCounts c;
  for (const Document& d : docs)
    c.add(cross_segment_stats(d, block_segments, segment_length));
  return c;
}

double cross_block_link_recall(const std::vector<Document>& gold,
                               const std::vector<Document>& system,
                               int block_segments, int segment_length) {
  long total = 0, recalled = 0;
  for (auto [g, s] : pair_documents(gold, system)) {
    std::vector<int> block =
        block_of_position(*g, block_segments, segment_length);
    std::map<NodeId, int> sys_cluster;
    for (size_t e = 0; e < s->entities.size(); e++)
      for (const Mention& m : s->entities[e].mentions)
        sys_cluster.try_emplace(m.head, static_cast<int>(e));

    for (const Entity& entity : g->entities) {
      const auto& ms = entity.mentions;
      for (size_t i = 0; i < ms.size(); i++)
        for (size_t j = i + 1; j < ms.size(); j++) {
          int bi = block[static_cast<size_t>(g->index_of(ms[i].first()))];
          int bj = block[static_cast<size_t>(g->index_of(ms[j].first()))];
          if (bi == bj) continue;
          total++;
          auto a = sys_cluster.find(ms[i].head);
          auto b = sys_cluster.find(ms[j].head);
          if (a != sys_cluster.end() && b != sys_cluster.end() &&
              a->second == b->second)
            recalled++;
        }
    }
  }
  return total > 0 ? static_cast<double>(recalled) /
                         static_cast<double>(total)
                   : 0.0;
}

std::string format_report(const MetricReport& report) {
  char buf[128];
  std::string out = "metric     P        R        F1\n";
  auto row = [&](const char* name, const PRF& prf) {
    std::snprintf(buf, sizeof(buf), "%-8s %8.4f %8.4f %8.4f\n", name,
                  prf.precision, prf.recall, prf.f1);
    out += buf;
  };
  row("muc", report.muc);
  row("b3", report.b3);
  row("ceaf-m", report.ceaf_m);
  row("ceaf-e", report.ceaf_e);
  std::snprintf(buf, sizeof(buf), "primary  %8.4f\n", report.primary);
  out += buf;
  return out;
}

std::string report_rows(const MetricReport& report) {
  char buf[160];
  std::string out;
  auto row = [&](const char* name, const PRF& prf) {
    std::snprintf(buf, sizeof(buf), "%s\t%.17g\t%.17g\t%.17g\n", name,
                  prf.precision, prf.recall, prf.f1);
    out += buf;
  };
  row("muc", report.muc);
  row("b3", report.b3);
  row("ceaf-m", report.ceaf_m);
  row("ceaf-e", report.ceaf_e);
  std::snprintf(buf, sizeof(buf), "primary\t%.17g\n", report.primary);
  out += buf;
  return out;
}

MetricReport parse_report_rows(const std::string& rows) {
  MetricReport out;
  std::istringstream in(rows);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    if (name == "primary") {
      ls >> out.primary;
      continue;
    }
    PRF prf;
    ls >> prf.precision >> prf.recall >> prf.f1;
    if (name == "muc")
      out.muc = prf;
    else if (name == "b3")
      out.b3 = prf;
    else if (name == "ceaf-m")
      out.ceaf_m = prf;
    else if (name == "ceaf-e")
      out.ceaf_e = prf;
    else
      throw MetricsError("unknown report row: " + name);
  }
  return out;
}

}  // namespace coref
