#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "corefkit/stats.hpp"

using namespace coref;

namespace {

// Right-branching sentences of regular words.
Document make_doc(const std::vector<int>& sentence_lengths) {
  Document doc;
  doc.doc_id = "doc";
  for (size_t s = 0; s < sentence_lengths.size(); s++) {
    doc.sentence_begin.push_back(static_cast<int>(doc.nodes.size()));
    for (int t = 0; t < sentence_lengths[s]; t++) {
      Node n;
      n.id = {static_cast<int>(s), t + 1, 0};
      n.form = "w";
      n.head = {static_cast<int>(s), t, 0};
      n.deprel = t == 0 ? "root" : "dep";
      doc.nodes.push_back(n);
    }
  }
  doc.rebuild_index();
  return doc;
}

Mention mention_at(const Document& doc, const std::vector<int>& positions) {
  Mention m;
  for (int p : positions) m.nodes.push_back(doc.nodes[static_cast<size_t>(p)].id);
  m.head = m.nodes.front();
  return m;
}

void add_entity(Document& doc, const std::string& id,
                const std::vector<std::vector<int>>& mentions) {
  Entity e;
  e.id = id;
  for (const auto& positions : mentions)
    e.mentions.push_back(mention_at(doc, positions));
  doc.entities.push_back(e);
}

}  // namespace

TEST_CASE("empty corpus is all zeros") {
  StatsReport r = compute_stats(std::vector<Document>{});
  CHECK(r == StatsReport{});
  CHECK(r.entities_per_1k() == 0.0);
  CHECK(r.entity_avg_length() == 0.0);
  CHECK(format_stats(r).find("0.0%") != std::string::npos);
}

TEST_CASE("hand-counted fixture") {
  // One document, two sentences, ten words, one empty node. Entity A has
  // two mentions, entity B one.
  Document doc = make_doc({6, 4});
  Node empty;
  empty.id = {0, 2, 1};
  empty.form = "E";
  empty.head = {0, 2, 0};
  empty.deprel = "dep";
  empty.is_empty = true;
  doc.nodes.insert(doc.nodes.begin() + 2, empty);
  doc.sentence_begin = {0, 7};
  doc.rebuild_index();

  // Positions shift by one past the inserted empty node. A's mentions are
  // the last words of each sentence (leaves of the chains); B covers all of
  // sentence 1, the subtree of its first token.
  add_entity(doc, "A", {{6}, {10}});
  add_entity(doc, "B", {{7, 8, 9, 10}});

  StatsReport r = compute_stats(doc);
  CHECK(r.docs == 1);
  CHECK(r.sentences == 2);
  CHECK(r.words == 10);
  CHECK(r.empty_nodes == 1);
  CHECK(r.entities_total == 2);
  CHECK(r.entities_per_1k() == doctest::Approx(200.0));
  CHECK(r.entity_max_length == 2);
  CHECK(r.entity_avg_length() == doctest::Approx(1.5));
  CHECK(r.entity_length[0] == 1);  // the singleton B
  CHECK(r.entity_length[1] == 1);
  CHECK(r.mentions_total == 3);
  CHECK(r.mention_length[1] == 2);
  CHECK(r.mention_length[4] == 1);
  CHECK(r.mentions_with_empty == 0);
  CHECK(r.mentions_with_gap == 0);
  CHECK(r.mentions_non_tree == 0);

  std::string text = format_stats(r);
  CHECK(text.find("50.0%") != std::string::npos);  // singleton bucket
  CHECK(text.find("200.0 per 1k") != std::string::npos);
  CHECK(text.find("66.7%") != std::string::npos);  // mention length 1

  std::string rows = stats_rows(r);
  CHECK(rows.find("words\t10\n") != std::string::npos);
  CHECK(rows.find("entities\t2\n") != std::string::npos);
  CHECK(rows.find("entity_length_1\t1\n") != std::string::npos);
  CHECK(rows.find("mention_length_1\t2\n") != std::string::npos);
}

TEST_CASE("empty-only mentions tally in length 0 and with_empty") {
  Document doc = make_doc({4});
  Node empty;
  empty.id = {0, 2, 1};
  empty.form = "E";
  empty.head = {0, 2, 0};
  empty.deprel = "dep";
  empty.is_empty = true;
  doc.nodes.insert(doc.nodes.begin() + 2, empty);
  doc.rebuild_index();

  add_entity(doc, "A", {{2}, {4}});  // the empty node, then the last word

  StatsReport r = compute_stats(doc);
  CHECK(r.mention_length[0] == 1);
  CHECK(r.mention_length[1] == 1);
  CHECK(r.mentions_with_empty == 1);  // counted independently of length 0
}

TEST_CASE("gap and non-tree flags") {
  Document doc = make_doc({5});

  // {0, 2}: discontinuous, and token 0 dominates the whole sentence.
  // {1, 2}: contiguous but a strict slice of token 1's subtree.
  // {2, 3, 4}: the full subtree under token 2.
  add_entity(doc, "A", {{0, 2}, {1, 2}});
  add_entity(doc, "B", {{2, 3, 4}});

  StatsReport r = compute_stats(doc);
  CHECK(r.mentions_with_gap == 1);
  CHECK(r.mentions_non_tree == 2);
  CHECK(r.mention_length[2] == 2);
  CHECK(r.mention_length[3] == 1);
}

TEST_CASE("bucket overflow goes to the plus bucket") {
  Document doc = make_doc({8});
  add_entity(doc, "A",
             {{0}, {1}, {2}, {3}, {4}, {5}});    // six mentions -> 5+
  add_entity(doc, "B", {{0, 1, 2, 3, 4, 5, 6}});  // seven words -> 5+

  StatsReport r = compute_stats(doc);
  CHECK(r.entity_length[4] == 1);
  CHECK(r.entity_max_length == 6);
  CHECK(r.mention_length[5] == 1);

  long entity_sum = 0;
  for (long c : r.entity_length) entity_sum += c;
  CHECK(entity_sum == r.entities_total);
  long mention_sum = 0;
  for (long c : r.mention_length) mention_sum += c;
  CHECK(mention_sum == r.mentions_total);
}

TEST_CASE("document order does not matter") {
  Document d1 = make_doc({3, 3});
  add_entity(d1, "A", {{0}, {3}});
  Document d2 = make_doc({5});
  d2.doc_id = "other";
  add_entity(d2, "B", {{1, 2}});

  StatsReport forward = compute_stats({d1, d2});
  StatsReport backward = compute_stats({d2, d1});
  CHECK(forward == backward);
  CHECK(forward.docs == 2);
  CHECK(forward.words == 11);
  CHECK(forward.sentences == 3);
}
