#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "corefkit/syntax.hpp"

using namespace coref;

namespace {

// "the big dog barked" -- barked is root, dog its subject, the/big under dog.
Document np_doc() {
  Document doc;
  doc.sentence_begin = {0};
  const char* forms[] = {"the", "big", "dog", "barked"};
  const char* rels[] = {"det", "amod", "nsubj", "root"};
  int heads[] = {3, 3, 4, 0};
  for (int i = 0; i < 4; i++) {
    Node n;
    n.id = {0, i + 1, 0};
    n.form = forms[i];
    n.head = {0, heads[i], 0};
    n.deprel = rels[i];
    doc.nodes.push_back(n);
  }
  doc.rebuild_index();
  return doc;
}

}  // namespace

TEST_CASE("node depth counts edges to ROOT") {
  Document doc = np_doc();
  CHECK(node_depth(doc, {0, 4, 0}) == 1);
  CHECK(node_depth(doc, {0, 3, 0}) == 2);
  CHECK(node_depth(doc, {0, 1, 0}) == 3);
  CHECK_THROWS_AS(node_depth(doc, {0, 9, 0}), std::invalid_argument);
}

TEST_CASE("select_head picks minimal depth, ties to the left") {
  Document doc = np_doc();
  // Full NP: dog is the shallowest.
  CHECK(select_head(doc, {{0, 1, 0}, {0, 2, 0}, {0, 3, 0}}) ==
        NodeId{0, 3, 0});
  // the/big tie at depth 3: leftmost wins.
  CHECK(select_head(doc, {{0, 1, 0}, {0, 2, 0}}) == NodeId{0, 1, 0});
  CHECK_THROWS_AS(select_head(doc, std::vector<NodeId>{}),
                  std::invalid_argument);
}

TEST_CASE("reconstruct_span_from_head returns the full subtree") {
  Document doc = np_doc();
  Mention m = reconstruct_span_from_head(doc, {0, 3, 0});
  CHECK(m.nodes == std::vector<NodeId>{{0, 1, 0}, {0, 2, 0}, {0, 3, 0}});
  CHECK(m.head == NodeId{0, 3, 0});

  m = reconstruct_span_from_head(doc, {0, 4, 0});
  CHECK(m.nodes.size() == 4);

  m = reconstruct_span_from_head(doc, {0, 1, 0});
  CHECK(m.nodes == std::vector<NodeId>{{0, 1, 0}});

  CHECK_THROWS_AS(reconstruct_span_from_head(doc, {0, 9, 0}),
                  std::invalid_argument);
}

TEST_CASE("reconstruction inverts selection for single-subtree mentions") {
  Document doc = np_doc();
  Mention np{{{0, 1, 0}, {0, 2, 0}, {0, 3, 0}}, {0, 3, 0}, ""};
  REQUIRE(mention_is_single_subtree(doc, np));
  NodeId h = select_head(doc, np);
  CHECK(reconstruct_span_from_head(doc, h).nodes == np.nodes);
}

TEST_CASE("tree path to root with truncation and padding") {
  Document doc = np_doc();
  SyntaxFeatureConfig cfg;
  cfg.max_tree_depth = 5;

  auto path = tree_path_to_root(doc, {0, 1, 0}, cfg);
  REQUIRE(path.size() == 5);
  CHECK(path[0].node == NodeId{0, 1, 0});
  CHECK(path[0].deprel == "det");
  CHECK_FALSE(path[0].pad);
  CHECK(path[1].node == NodeId{0, 3, 0});
  CHECK(path[1].deprel == "nsubj");
  CHECK(path[2].node == NodeId{0, 4, 0});
  CHECK(path[2].deprel == "root");
  CHECK(path[3].pad);
  CHECK(path[4].pad);

  cfg.max_tree_depth = 2;
  path = tree_path_to_root(doc, {0, 1, 0}, cfg);
  REQUIRE(path.size() == 2);
  CHECK(path[0].node == NodeId{0, 1, 0});
  CHECK(path[1].node == NodeId{0, 3, 0});
  CHECK_FALSE(path[1].pad);
}

TEST_CASE("tree path sees empty nodes") {
  Document doc = np_doc();
  Node empty;
  empty.id = {0, 4, 1};
  empty.form = "E";
  empty.head = {0, 4, 0};
  empty.deprel = "expl";
  empty.is_empty = true;
  doc.nodes.push_back(empty);
  doc.rebuild_index();
  SyntaxFeatureConfig cfg;
  auto path = tree_path_to_root(doc, {0, 4, 1}, cfg);
  CHECK(path[0].node == NodeId{0, 4, 1});
  CHECK(path[0].deprel == "expl");
  CHECK(path[1].node == NodeId{0, 4, 0});
}
