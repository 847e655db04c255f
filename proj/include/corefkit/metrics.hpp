#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "corefkit/model.hpp"

namespace coref {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MatchMode { kHead, kExact };

std::string to_string(MatchMode m);
MatchMode match_mode_from_string(const std::string& s);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Harmonic mean with the usual 0/0 -> 0 conventions.
PRF make_prf(double recall_num, double recall_den, double precision_num,
             double precision_den);

struct MetricReport {
  PRF muc;
  PRF b3;
  PRF ceaf_m;
  PRF ceaf_e;
  double primary = 0.0;  // mean of the MUC, B3 and CEAF-e F1 scores
};

// One document pair reduced to entities over interned mention keys. Keys are
// shared between sides: equal key means matched mention. Head match keys a
// mention by its head node, exact match by its full node set.
struct AlignedPair {
  std::vector<std::vector<int>> gold;
  std::vector<std::vector<int>> system;
};

// Keys both sides, deduplicates (a key claimed twice on one side keeps its
// first, document-order occurrence) and, unless keep_singletons, drops
// entities reduced to a single key from both sides. remove_before_collapse
// flips the order: singleton entities are removed by raw mention count
// before head collapsing instead of after.
AlignedPair prepare_for_scoring(const Document& gold, const Document& system,
                                MatchMode match, bool keep_singletons,
                                bool remove_before_collapse = false);

PRF muc(const AlignedPair& pair);
PRF b_cubed(const AlignedPair& pair);
PRF ceaf_m(const AlignedPair& pair);
PRF ceaf_e(const AlignedPair& pair);

// Kuhn-Munkres: columns assigned to rows maximizing the total weight.
// Returns, per row, the chosen column or -1. All weights must be >= 0.
std::vector<int> max_assignment(const std::vector<std::vector<double>>& weight);

// Micro accumulation across documents: numerators and denominators are
// summed, ratios taken at reporting time.
struct MetricAccumulator {
  double muc_rn = 0, muc_rd = 0, muc_pn = 0, muc_pd = 0;
  double b3_rn = 0, b3_rd = 0, b3_pn = 0, b3_pd = 0;
  double cm_phi = 0, cm_gg = 0, cm_ss = 0;
  double ce_phi = 0, ce_gg = 0, ce_ss = 0;

  void add(const AlignedPair& pair);
  MetricReport report() const;
};

// Corpus-level report. Documents are paired by doc_id; ids present on one
// side only raise MetricsError.
MetricReport primary_score(const std::vector<Document>& gold,
                           const std::vector<Document>& system,
                           MatchMode match = MatchMode::kHead,
                           bool keep_singletons = false,
                           bool remove_before_collapse = false);

// Token-level overlap of system mentions with gold mentions, matched
// greedily by head key in document order: sum |gold * system| / sum |gold|.
double mention_overlap_ratio(const std::vector<Document>& gold,
                             const std::vector<Document>& system);

// Raw counts behind the three long-document statistics for blocks of
// block_segments segments (segmentation as in training).
struct CrossSegmentCounts {
  long links_total = 0;      // same-entity mention pairs
  long links_cross = 0;      // ... whose mentions lie in different blocks
  long mentions_total = 0;   // all mentions
  long nearest_cross = 0;    // mentions whose nearest antecedent is in a
                             // different block
  long segments_total = 0;
  long segments_over = 0;    // segments beyond the first block

  void add(const CrossSegmentCounts& other);
  double cross_link_pct() const;
  double nearest_cross_pct() const;
  double segments_over_pct() const;
};

CrossSegmentCounts cross_segment_stats(const Document& doc, int block_segments,
                                       int segment_length);
CrossSegmentCounts cross_segment_stats(const std::vector<Document>& docs,
                                       int block_segments, int segment_length);

// Recall of gold same-entity mention pairs that span different blocks:
// fraction found in one system cluster, matched by head key. 0 when the
// corpus has no such pairs.
double cross_block_link_recall(const std::vector<Document>& gold,
                               const std::vector<Document>& system,
                               int block_segments, int segment_length);

// Human-readable table and machine rows (metric<TAB>P<TAB>R<TAB>F1 with
// full precision, final row "primary<TAB>value").
std::string format_report(const MetricReport& report);
std::string report_rows(const MetricReport& report);
MetricReport parse_report_rows(const std::string& rows);

}  // namespace coref
