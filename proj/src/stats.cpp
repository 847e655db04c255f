#include "corefkit/stats.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace coref {

void StatsReport::merge(const StatsReport& other) {
  docs += other.docs;
  sentences += other.sentences;
  words += other.words;
  empty_nodes += other.empty_nodes;
  entities_total += other.entities_total;
  entity_max_length = std::max(entity_max_length, other.entity_max_length);
  for (size_t i = 0; i < entity_length.size(); i++)
    entity_length[i] += other.entity_length[i];
  mentions_total += other.mentions_total;
  for (size_t i = 0; i < mention_length.size(); i++)
    mention_length[i] += other.mention_length[i];
  mentions_with_empty += other.mentions_with_empty;
  mentions_with_gap += other.mentions_with_gap;
  mentions_non_tree += other.mentions_non_tree;
}

StatsReport compute_stats(const Document& doc) {
  StatsReport r;
  r.docs = 1;
  r.sentences = doc.num_sentences();
  r.words = doc.num_words();
  r.empty_nodes = static_cast<long>(doc.nodes.size()) - r.words;

  for (const Entity& entity : doc.entities) {
    r.entities_total++;
    long len = static_cast<long>(entity.mentions.size());
    r.entity_max_length = std::max(r.entity_max_length, len);
    r.entity_length[static_cast<size_t>(std::min(len, 5L)) - 1]++;

    for (const Mention& mention : entity.mentions) {
      r.mentions_total++;
      long words_in_mention = 0;
      bool has_empty = false;
      bool has_gap = false;
      int prev = -1;
      for (const NodeId& id : mention.nodes) {
        const Node* node = doc.find(id);
        if (node != nullptr && node->is_empty)
          has_empty = true;
        else
          words_in_mention++;
        int pos = doc.index_of(id);
        if (prev >= 0 && pos != prev + 1) has_gap = true;
        prev = pos;
      }
      r.mention_length[static_cast<size_t>(std::min(words_in_mention, 5L))]++;
      if (has_empty) r.mentions_with_empty++;
      if (has_gap) r.mentions_with_gap++;
      if (!mention_is_single_subtree(doc, mention)) r.mentions_non_tree++;
    }
  }
  return r;
}

StatsReport compute_stats(const std::vector<Document>& corpus) {
  StatsReport total;
  for (const Document& doc : corpus) total.merge(compute_stats(doc));
  return total;
}

namespace {

double pct(long part, long whole) {
  return whole == 0 ? 0.0
                    : 100.0 * static_cast<double>(part) /
                          static_cast<double>(whole);
}

}  // namespace

std::string format_stats(const StatsReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  auto row = [&](const std::string& label, long value) {
    out << std::left << std::setw(26) << label << std::right << std::setw(10)
        << value;
  };
  auto pct_row = [&](const std::string& label, long value, long whole) {
    row(label, value);
    out << std::setw(9) << pct(value, whole) << "%\n";
  };

  row("documents", r.docs);
  out << '\n';
  row("sentences", r.sentences);
  out << '\n';
  row("words", r.words);
  out << '\n';
  row("empty nodes", r.empty_nodes);
  out << '\n';

  row("entities", r.entities_total);
  out << "  (" << r.entities_per_1k() << " per 1k words)\n";
  row("  max length", r.entity_max_length);
  out << '\n';
  out << std::left << std::setw(26) << "  avg length" << std::right
      << std::setw(10) << r.entity_avg_length() << '\n';
  for (size_t i = 0; i < r.entity_length.size(); i++) {
    std::string label =
        "  length " + std::to_string(i + 1) + (i == 4 ? "+" : "");
    pct_row(label, r.entity_length[i], r.entities_total);
  }

  row("mentions", r.mentions_total);
  out << '\n';
  for (size_t i = 0; i < r.mention_length.size(); i++) {
    std::string label = "  length " + std::to_string(i) + (i == 5 ? "+" : "");
    pct_row(label, r.mention_length[i], r.mentions_total);
  }
  pct_row("  with empty node", r.mentions_with_empty, r.mentions_total);
  pct_row("  with gap", r.mentions_with_gap, r.mentions_total);
  pct_row("  non-tree", r.mentions_non_tree, r.mentions_total);
  return out.str();
}

std::string stats_rows(const StatsReport& r) {
  std::ostringstream out;
  auto row = [&](const std::string& key, long value) {
    out << key << '\t' << value << '\n';
  };
  row("docs", r.docs);
  row("sentences", r.sentences);
  row("words", r.words);
  row("empty_nodes", r.empty_nodes);
  row("entities", r.entities_total);
  row("entity_max_length", r.entity_max_length);
  for (size_t i = 0; i < r.entity_length.size(); i++)
    row("entity_length_" + std::to_string(i + 1) + (i == 4 ? "_plus" : ""),
        r.entity_length[i]);
  row("mentions", r.mentions_total);
  for (size_t i = 0; i < r.mention_length.size(); i++)
    row("mention_length_" + std::to_string(i) + (i == 5 ? "_plus" : ""),
        r.mention_length[i]);
  row("mentions_with_empty", r.mentions_with_empty);
  row("mentions_with_gap", r.mentions_with_gap);
  row("mentions_non_tree", r.mentions_non_tree);
  return out.str();
}

}  // namespace coref
