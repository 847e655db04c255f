#pragma once

#include <array>
#include <string>
#include <vector>

#include "corefkit/model.hpp"

namespace coref {

// Corpus-level counts. All fields are plain sums (or a max), so reports
// merge associatively and document order never matters. Mention length
// counts non-empty nodes; a mention holding only empty nodes lands in the
// length-0 bucket and still tallies under with_empty.
struct StatsReport {
  long docs = 0;
  long sentences = 0;
  long words = 0;        // regular words, empty nodes excluded
  long empty_nodes = 0;

  long entities_total = 0;
  long entity_max_length = 0;              // mentions in the largest entity
  std::array<long, 5> entity_length = {};  // 1, 2, 3, 4, 5+ mentions

  long mentions_total = 0;
  std::array<long, 6> mention_length = {};  // 0, 1, 2, 3, 4, 5+ words
  long mentions_with_empty = 0;
  long mentions_with_gap = 0;  // discontinuous in document order
  long mentions_non_tree = 0;  // not a single dependency subtree

  double entities_per_1k() const {
    return words == 0 ? 0.0
                      : 1000.0 * static_cast<double>(entities_total) /
                            static_cast<double>(words);
  }
  double entity_avg_length() const {
    return entities_total == 0 ? 0.0
                               : static_cast<double>(mentions_total) /
                                     static_cast<double>(entities_total);
  }

  void merge(const StatsReport& other);

  friend bool operator==(const StatsReport&, const StatsReport&) = default;
};

StatsReport compute_stats(const Document& doc);
StatsReport compute_stats(const std::vector<Document>& corpus);

// Human-readable table; percentages carry one decimal.
std::string format_stats(const StatsReport& report);

// Machine output: one "key<TAB>raw count" per line, stable key set.
std::string stats_rows(const StatsReport& report);

}  // namespace coref
