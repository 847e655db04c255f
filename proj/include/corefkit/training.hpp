#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corefkit/model.hpp"
#include "corefkit/rng.hpp"
#include "corefkit/scorer.hpp"

namespace coref {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  ScorerConfig scorer;
  // 0 picks the mode default: 6 segments, or 8 when scoring heads only.
  int max_segments = 0;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double clip_norm = 5.0;  // global gradient norm cap, <= 0 disables
  int steps = 1000;
  int log_every = 50;
  int eval_every = 0;  // dev evaluation period; 0 = once after the last step
  std::uint64_t seed = 0;

  int effective_max_segments() const {
    if (max_segments > 0) return max_segments;
    return scorer.heads_only ? 8 : 6;
  }
  // Throws ConfigError; also validates the embedded scorer configuration.
  void validate() const;
};

enum class ExclusionMode { kNone, kDatasetZeroShot, kLanguageZeroShot };

std::string to_string(ExclusionMode m);
ExclusionMode exclusion_mode_from_string(const std::string& s);

struct CorpusEntry {
  std::string path;
  bool include = true;
  // Whether the annotation covers singleton entities; gates the mention
  // binary cross-entropy term in mentions mode.
  bool singletons_annotated = false;
};

struct MixtureSpec {
  std::vector<CorpusEntry> corpora;
  ExclusionMode exclusion = ExclusionMode::kNone;
  std::string excluded;  // corpus name or language code, per exclusion mode
  std::vector<std::string> dev_paths;
};

// "fr_democrat.conllu" -> "fr_democrat"; language prefix "fr".
std::string corpus_name(const std::string& path);
std::string corpus_language(const std::string& name);

struct LoadedCorpus {
  std::string name;
  bool singletons_annotated = false;
  std::vector<Document> docs;
};

struct TrainingSet {
  std::vector<LoadedCorpus> corpora;
  std::vector<Document> dev_docs;

  // Flattened (corpus, doc) pairs in load order, the uniform sampling space.
  std::vector<std::pair<int, int>> index() const;
};

// Parses every included corpus and applies the exclusion rule. Throws
// ConfigError when nothing remains to sample from.
TrainingSet load_mixture(const MixtureSpec& mixture);

// Per kept span, the rows of its option vector (ScoreTable layout: pair
// scores then the singleton option) that count as gold, or the dummy when
// eps_gold is set. Exactly one of the two is non-empty per span.
struct GoldAssignment {
  std::vector<std::vector<int>> gold_rows;
  std::vector<bool> eps_gold;
  std::vector<bool> is_gold_mention;     // over all candidates
  std::vector<int> gold_head_offset;     // over all candidates, -1 = none
  int gold_mentions = 0;                 // candidates matched to gold
  int unreachable = 0;                   // gold mentions with no candidate
};

// Matches gold entities to candidate spans (head position in heads-only
// mode, covering [first, last] range otherwise; first claim wins) and
// derives the training target of every kept span. With singleton handling
// off, single-mention entities are skipped as if unannotated.
GoldAssignment map_gold(const Document& doc, const ScorerConfig& config,
                        const std::vector<SpanCandidate>& candidates,
                        const std::vector<int>& kept,
                        const std::vector<std::vector<int>>& antecedents,
                        bool has_singleton_option);

struct LossBreakdown {
  double total = 0.0;
  double marginal = 0.0;
  double mention_bce = 0.0;
  double span2head_bce = 0.0;
};

// Builds the loss on the forward pass's tape: the negated marginal
// log-likelihood of gold antecedents, plus the mention existence BCE in
// mentions mode (when the corpus annotates singletons), plus the head BCE
// in span2head modes. Returns the scalar node and the detached values.
std::pair<nn::Var, LossBreakdown> document_loss(ForwardPass& fp,
                                                const Document& doc,
                                                const ScorerConfig& config,
                                                bool singletons_annotated);

// Loss value plus parameter gradients for one document.
LossBreakdown loss_and_gradients(const Parameters& params,
                                 const ScorerConfig& config,
                                 const Vocabulary& vocab, const Document& doc,
                                 bool singletons_annotated, Parameters& grads);

// Gradient descent with optional momentum and a global norm clip.
class SgdOptimizer {
 public:
  SgdOptimizer(const TrainConfig& cfg, const Parameters& shape);
  void step(Parameters& params, const Parameters& grads);

 private:
  double learning_rate_;
  double momentum_;
  double clip_norm_;
  Parameters velocity_;
};

// A contiguous block of at most cfg.effective_max_segments() segments at a
// uniformly random segment offset, with gold clusters restricted to mentions
// that lie fully inside the window. Documents that fit are returned whole.
Document sample_training_window(const Document& doc, const TrainConfig& cfg,
                                RandomStream& rng);

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  std::string corpus;
  std::string doc_id;
  // Primary dev score; NaN when this step had no evaluation.
  double dev_primary = 0.0;
  bool has_dev = false;
};

struct TrainResult {
  Parameters params;
  ScorerConfig config;  // vocabulary sizes filled in
  Vocabulary vocab;
  std::vector<StepRecord> log;
};

// Runs the optimization loop: each step samples one document uniformly from
// the mixture, one window from the document, and applies one update.
// Deterministic given cfg.seed. Non-finite loss aborts with TrainError.
// resume, when given, supplies the initial parameters and vocabulary
// (fine-tuning); otherwise both are built fresh from the training set.
// log_stream, when given, receives tab-separated step records.
TrainResult train(const TrainingSet& data, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr,
                  std::ostream* log_stream = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_array;
  int worst_row = 0;
  int worst_col = 0;
  int coords_checked = 0;
};

// Compares analytic gradients of the total document loss against central
// finite differences, sampling at least min_coords coordinates per
// parameter array (all of them for small arrays). Relative error is
// |a - n| / max(1, |a|, |n|). corrupt shifts every analytic value as a
// negative control; a working harness then reports an error above 1e-2.
GradCheckResult finite_difference_check(const Parameters& params,
                                        const ScorerConfig& config,
                                        const Vocabulary& vocab,
                                        const Document& doc,
                                        bool singletons_annotated = true,
                                        double epsilon = 1e-4,
                                        int min_coords = 32,
                                        std::uint64_t seed = 0,
                                        bool corrupt = false);

struct TrainFile {
  TrainConfig config;
  MixtureSpec mixture;
};

// Key-value text: one "key = value" per line, '#' comments. Corpus lines
// are "corpus = <path> [singletons]", dev sets "dev = <path>", exclusions
// "exclude_dataset = <name>" / "exclude_language = <code>". Scorer keys
// match the checkpoint sidecar names. Unknown keys throw ConfigError.
TrainFile parse_train_file(const std::string& text);
TrainFile load_train_file(const std::string& path);

}  // namespace coref
