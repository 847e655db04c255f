#pragma once

#include <string>
#include <vector>

#include "corefkit/model.hpp"
#include "corefkit/scorer.hpp"

namespace coref {

// Clusters of mentions in deterministic order: mentions sorted by document
// position, clusters by their first mention. provenance holds, per mention,
// the index of the example (decode window) that first produced it.
struct ClusterSet {
  std::vector<std::vector<Mention>> clusters;
  std::vector<std::vector<int>> provenance;

  bool empty() const { return clusters.empty(); }
};

enum class OverlapMode { kNone, kMin, kMax };

std::string to_string(OverlapMode m);
OverlapMode overlap_mode_from_string(const std::string& s);

// Inclusive segment ranges covering all segments. Window length is capped by
// max_segments; consecutive windows advance by max_segments (none),
// max_segments - 1 (min, one shared segment) or 1 (max).
struct OverlapPlan {
  std::vector<std::pair<int, int>> windows;
  OverlapMode mode = OverlapMode::kNone;
};

// Throws ConfigError when overlap is requested with max_segments < 2.
OverlapPlan plan_overlap(int num_segments, int max_segments, OverlapMode mode);

// Chosen option per kept span. antecedent is a kept-row index, or -1 when
// the span resolved to the dummy or to the singleton option. is_mention marks
// spans that must surface even without links (singleton option taken, or
// mentions mode with sigma(s_m) > 0.5 on an eps resolution).
struct AntecedentChoice {
  int antecedent = -1;
  bool is_mention = false;
};

std::vector<AntecedentChoice> select_antecedents(const ScoreTable& table,
                                                 SingletonMode mode);

// Union-find closure of the chosen links over the kept spans of one scored
// window. Spans resolving to the dummy with no inbound links and not marked
// is_mention are dropped. example_index fills provenance.
ClusterSet build_clusters(const Document& doc, const ScoreTable& table,
                          const std::vector<AntecedentChoice>& choices,
                          const ScorerConfig& config, int example_index);

// Left-to-right merge of independently decoded windows. A mention with the
// same node set as an already placed one joins that mention's cluster and
// pulls the rest of its cluster along (full union-find closure). With
// filter_seen, clusters of a later example whose mentions all lie in
// segments already covered by earlier windows are dropped before merging.
// segments are the node ranges from plan_segments.
ClusterSet merge_overlapping_clusters(
    const Document& doc, const std::vector<ClusterSet>& examples,
    const OverlapPlan& plan,
    const std::vector<std::pair<int, int>>& segments, bool filter_seen);

struct PredictOptions {
  OverlapMode overlap = OverlapMode::kNone;
  bool filter_seen = false;
  int max_segments = 6;
  // Expand single-node mentions to the head's full subtree (useful for
  // heads-only models when downstream tools need extents).
  bool reconstruct_spans = false;
};

// Scores the document window by window, decodes each window independently,
// merges, and returns a copy of doc whose entities are the predictions.
Document predict_document(const Parameters& params, const ScorerConfig& config,
                          const Vocabulary& vocab, const Document& doc,
                          const PredictOptions& options);

}  // namespace coref
