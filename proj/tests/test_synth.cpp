#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "corefkit/metrics.hpp"
#include "corefkit/scorer.hpp"
#include "corefkit/synth.hpp"

using namespace coref;

namespace {

// Surface-only reading of a generated document: name tokens start a cluster
// keyed by their form, pronouns join the nearest preceding name's cluster.
Document bigram_oracle(const Document& doc) {
  Document out = doc;
  out.entities.clear();
  std::map<std::string, size_t> cluster_of_name;
  std::vector<std::vector<Mention>> clusters;
  size_t last_name = 0;
  bool seen_name = false;
  for (const Node& n : doc.nodes) {
    bool is_name = !n.form.empty() && n.form[0] == 'n';
    bool is_pronoun = n.form == kSynthPronoun;
    if (!is_name && !is_pronoun) continue;
    size_t c;
    if (is_name) {
      auto [it, fresh] = cluster_of_name.try_emplace(n.form, clusters.size());
      if (fresh) clusters.emplace_back();
      c = it->second;
      last_name = c;
      seen_name = true;
    } else {
      REQUIRE(seen_name);
      c = last_name;
    }
    Mention m;
    m.nodes = {n.id};
    m.head = n.id;
    clusters[c].push_back(m);
  }
  for (size_t c = 0; c < clusters.size(); c++) {
    Entity e;
    e.id = "s" + std::to_string(c + 1);
    e.mentions = clusters[c];
    out.entities.push_back(e);
  }
  canonicalize_entities(out);
  return out;
}

}  // namespace

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.validate();

  SynthSpec bad = spec;
  bad.vocab_size = 2;
  bad.entities_per_doc = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.sentences_per_doc = 5;  // 4 entities x (3 + 1) will not fit
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = spec;
  bad.singleton_rate = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generated documents are valid and deterministic") {
  SynthSpec spec;
  spec.documents = 6;
  spec.singleton_rate = 0.3;
  spec.cross_segment_rate = 0.3;
  spec.seed = 17;

  std::vector<Document> corpus = generate(spec);
  REQUIRE(corpus.size() == 6);
  std::set<std::string> ids;
  for (const Document& doc : corpus) {
    CHECK(validate_document(doc).ok());
    CHECK(doc.num_sentences() == spec.sentences_per_doc);
    CHECK(static_cast<int>(doc.nodes.size()) ==
          spec.sentences_per_doc * spec.sentence_length);
    ids.insert(doc.doc_id);

    // One mention per sentence at most, always the final token, and name
    // forms never repeat across entities.
    std::map<std::string, std::string> entity_of_name;
    for (const Entity& entity : doc.entities) {
      for (const Mention& mention : entity.mentions) {
        REQUIRE(mention.nodes.size() == 1);
        const Node* node = doc.find(mention.nodes.front());
        REQUIRE(node != nullptr);
        CHECK(node->id.token == spec.sentence_length);
        if (node->form[0] == 'n') {
          auto [it, fresh] =
              entity_of_name.try_emplace(node->form, entity.id);
          CHECK(it->second == entity.id);
          (void)fresh;
        }
      }
    }
  }
  CHECK(ids.size() == 6);  // distinct doc ids

  std::vector<Document> again = generate(spec);
  REQUIRE(again.size() == corpus.size());
  for (size_t d = 0; d < corpus.size(); d++) CHECK(corpus[d] == again[d]);

  SynthSpec other = spec;
  other.seed = 18;
  std::vector<Document> different = generate(other);
  bool any = false;
  for (size_t d = 0; d < corpus.size(); d++)
    if (!(corpus[d] == different[d])) any = true;
  CHECK(any);
}

TEST_CASE("singleton rate shapes entity lengths") {
  SynthSpec spec;
  spec.documents = 8;
  spec.seed = 3;

  spec.singleton_rate = 0.0;
  for (const Document& doc : generate(spec))
    for (const Entity& e : doc.entities)
      CHECK(e.mentions.size() == static_cast<size_t>(spec.mentions_per_entity));

  spec.singleton_rate = 1.0;
  bool saw_entity = false;
  for (const Document& doc : generate(spec))
    for (const Entity& e : doc.entities) {
      CHECK(e.mentions.size() == 1);
      saw_entity = true;
    }
  CHECK(saw_entity);

  // Singletons may still be revisited by a cross-segment repeat.
  spec.cross_segment_rate = 1.0;
  for (const Document& doc : generate(spec))
    for (const Entity& e : doc.entities) CHECK(e.mentions.size() == 2);
}

TEST_CASE("bigram oracle reaches primary 1.0") {
  SynthSpec spec;
  spec.documents = 10;
  spec.sentences_per_doc = 24;
  spec.entities_per_doc = 4;
  spec.mentions_per_entity = 3;
  spec.singleton_rate = 0.4;
  spec.cross_segment_rate = 0.3;
  spec.seed = 29;

  std::vector<Document> gold = generate(spec);
  std::vector<Document> system;
  for (const Document& doc : gold) system.push_back(bigram_oracle(doc));

  MetricReport with = primary_score(gold, system, MatchMode::kHead, true);
  CHECK(with.primary == doctest::Approx(1.0));
  MetricReport without = primary_score(gold, system, MatchMode::kHead, false);
  CHECK(without.primary == doctest::Approx(1.0));
}

TEST_CASE("cross-segment chains span distant blocks") {
  SynthSpec spec;
  spec.documents = 3;
  spec.sentences_per_doc = 40;
  spec.sentence_length = 4;
  spec.entities_per_doc = 4;
  spec.mentions_per_entity = 3;
  spec.cross_segment_rate = 1.0;
  spec.seed = 5;

  // 160 nodes in 16-node segments: ten segments of four sentences each.
  std::vector<Document> corpus = generate(spec);
  CrossSegmentCounts counts = cross_segment_stats(corpus, 4, 16);
  CHECK(counts.segments_total == 30);
  CHECK(counts.links_cross > 0);
  CHECK(counts.nearest_cross > 0);

  SynthSpec tame = spec;
  tame.cross_segment_rate = 0.0;
  CrossSegmentCounts none = cross_segment_stats(generate(tame), 4, 16);
  CHECK(none.links_cross < counts.links_cross);
}
