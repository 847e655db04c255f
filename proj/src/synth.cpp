#include "corefkit/synth.hpp"

#include <algorithm>
#include <numeric>

#include "corefkit/rng.hpp"
#include "corefkit/scorer.hpp"

namespace coref {

void SynthSpec::validate() const {
  if (vocab_size < 1 || documents < 0 || sentences_per_doc < 1 ||
      sentence_length < 1 || entities_per_doc < 1 || mentions_per_entity < 1)
    throw ConfigError("synth spec fields must be positive");
  if (singleton_rate < 0 || singleton_rate > 1 || cross_segment_rate < 0 ||
      cross_segment_rate > 1)
    throw ConfigError("synth rates must lie in [0, 1]");
  if (vocab_size < entities_per_doc)
    throw ConfigError("vocab_size must cover entities_per_doc distinct names");
  // Worst case: every entity at full length plus one repeat mention each.
  int worst = entities_per_doc * (mentions_per_entity + 1);
  if (worst > sentences_per_doc)
    throw ConfigError("pattern needs up to " + std::to_string(worst) +
                      " sentences per document, have " +
                      std::to_string(sentences_per_doc));
}

namespace {

struct SentencePlan {
  int entity = -1;   // -1 = filler sentence
  bool name = false; // mention token is the entity's name, not the pronoun
};

Document build_document(const SynthSpec& spec, int doc_index,
                        const std::vector<SentencePlan>& plan,
                        const std::vector<std::string>& names) {
  Document doc;
  doc.doc_id = "synth-" + std::to_string(doc_index + 1);
  std::vector<std::vector<NodeId>> mention_nodes(names.size());

  for (size_t s = 0; s < plan.size(); s++) {
    doc.sentence_begin.push_back(static_cast<int>(doc.nodes.size()));
    for (int t = 0; t < spec.sentence_length; t++) {
      Node n;
      n.id = {static_cast<int>(s), t + 1, 0};
      bool mention_slot =
          plan[s].entity >= 0 && t == spec.sentence_length - 1;
      n.form = mention_slot
                   ? (plan[s].name ? names[static_cast<size_t>(plan[s].entity)]
                                   : kSynthPronoun)
                   : kSynthFiller;
      n.head = {static_cast<int>(s), t, 0};
      n.deprel = t == 0 ? "root" : "dep";
      doc.nodes.push_back(n);
      if (mention_slot)
        mention_nodes[static_cast<size_t>(plan[s].entity)].push_back(n.id);
    }
  }
  doc.rebuild_index();

  for (size_t e = 0; e < mention_nodes.size(); e++) {
    if (mention_nodes[e].empty()) continue;
    Entity entity;
    entity.id = "e" + std::to_string(e + 1);
    for (const NodeId& id : mention_nodes[e]) {
      Mention m;
      m.nodes = {id};
      m.head = id;
      entity.mentions.push_back(m);
    }
    doc.entities.push_back(entity);
  }
  canonicalize_entities(doc);
  return doc;
}

}  // namespace

std::vector<Document> generate(const SynthSpec& spec) {
  spec.validate();
  RandomStream rng(spec.seed);
  std::vector<Document> corpus;
  corpus.reserve(static_cast<size_t>(spec.documents));

  for (int d = 0; d < spec.documents; d++) {
    // Names are drawn per document without replacement, so repeating a name
    // token always means the same entity.
    std::vector<int> pool(static_cast<size_t>(spec.vocab_size));
    std::iota(pool.begin(), pool.end(), 0);
    for (size_t i = pool.size() - 1; i > 0; i--)
      std::swap(pool[i], pool[rng.uniform_int(i + 1)]);
    std::vector<std::string> names;
    for (int e = 0; e < spec.entities_per_doc; e++)
      names.push_back(synth_name_form(pool[static_cast<size_t>(e)]));

    std::vector<SentencePlan> blocks;
    std::vector<int> repeats;
    for (int e = 0; e < spec.entities_per_doc; e++) {
      bool singleton = rng.bernoulli(spec.singleton_rate);
      int mentions = singleton ? 1 : spec.mentions_per_entity;
      blocks.push_back({e, true});
      for (int m = 1; m < mentions; m++) blocks.push_back({e, false});
      if (rng.bernoulli(spec.cross_segment_rate)) repeats.push_back(e);
    }

    std::vector<SentencePlan> plan = blocks;
    int filler =
        spec.sentences_per_doc - static_cast<int>(blocks.size() + repeats.size());
    plan.insert(plan.end(), static_cast<size_t>(filler), SentencePlan{});
    for (int e : repeats) plan.push_back({e, true});

    corpus.push_back(build_document(spec, d, plan, names));
  }
  return corpus;
}

}  // namespace coref
