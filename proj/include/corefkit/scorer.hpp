#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "corefkit/model.hpp"
#include "corefkit/nn.hpp"
#include "corefkit/rng.hpp"
#include "corefkit/syntax.hpp"

namespace coref {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncoderConfig {
  int vocab_size = 0;       // filled when the vocabulary is built
  int embedding_dim = 64;
  int context_window = 16;  // positions each token attends to, self included
  int segment_length = 512; // max nodes per independently encoded segment
};

enum class SingletonMode { kOff, kDummy, kMask, kSeparate, kMentions };
enum class Span2HeadMode { kOff, kMulticlass, kBinary };

std::string to_string(SingletonMode m);
std::string to_string(Span2HeadMode m);
SingletonMode singleton_mode_from_string(const std::string& s);
Span2HeadMode span2head_mode_from_string(const std::string& s);

struct ScorerConfig {
  EncoderConfig encoder;
  SyntaxFeatureConfig syntax;
  int deprel_vocab_size = 0;  // filled when the vocabulary is built
  int max_span_width = 30;
  double keep_ratio = 0.4;   // lambda: keep ceil(lambda * T) spans
  int max_antecedents = 50;  // c: antecedent candidates per kept span
  int hidden_dim = 64;       // FFNN hidden layer width
  int feature_dim = 16;      // width and distance embedding size
  bool heads_only = false;
  bool use_tree_features = false;
  SingletonMode singleton_mode = SingletonMode::kOff;
  Span2HeadMode span2head = Span2HeadMode::kOff;

  int token_dim() const {
    int d = encoder.embedding_dim;
    if (use_tree_features)
      d += syntax.max_tree_depth *
           (syntax.token_embedding_dim + syntax.deprel_embedding_dim);
    return d;
  }
  int span_dim() const { return 3 * token_dim() + feature_dim; }
  int pair_feature_dim() const { return 3 * span_dim() + feature_dim; }

  // Throws ConfigError on inconsistent settings (span2head needs full spans,
  // positive dimensions, lambda in (0, 1]).
  void validate() const;
};

// Distance buckets {1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+} -> 0..8.
// Inputs below 1 clamp to bucket 0 (used for pseudo-distances such as the
// singleton pairing).
int distance_bucket(int distance);
inline constexpr int kNumDistanceBuckets = 9;

struct Vocabulary {
  std::vector<std::string> forms;    // index 0 is the <unk> token
  std::vector<std::string> deprels;  // index 0 is the <unk> relation
  std::unordered_map<std::string, int> form_index;
  std::unordered_map<std::string, int> deprel_index;

  int form_id(const std::string& form) const {
    auto it = form_index.find(form);
    return it == form_index.end() ? 0 : it->second;
  }
  int deprel_id(const std::string& rel) const {
    auto it = deprel_index.find(rel);
    return it == deprel_index.end() ? 0 : it->second;
  }

  // Forms and deprels observed in the documents, sorted lexicographically
  // for run-to-run determinism, with <unk> entries prepended.
  static Vocabulary build(const std::vector<Document>& docs);
  void rebuild_maps();
};

// Named parameter arrays in registration order. Values are doubles in
// memory; checkpoints store them as little-endian f32.
class Parameters {
 public:
  nn::Mat& add(const std::string& name, long rows, long cols);
  nn::Mat& operator[](const std::string& name);
  const nn::Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }

  // Registers every array the configuration calls for.
  static Parameters build(const ScorerConfig& config);
  // Fills all arrays with small scaled gaussians (biases included, so no
  // array starts at an exact zero gradient plateau).
  void init_random(RandomStream& rng);
  Parameters zeros_like() const;

  long total_size() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, nn::Mat> store_;
  std::map<std::string, int> index_;
};

// Versioned binary container of all parameter arrays plus the vocabulary;
// the scorer configuration is written alongside as "<path>.cfg" key-value
// text. Shape or version mismatches on load throw CheckpointError.
void save_checkpoint(const std::string& path, const Parameters& params,
                     const ScorerConfig& config, const Vocabulary& vocab);

struct Checkpoint {
  Parameters params;
  ScorerConfig config;
  Vocabulary vocab;
};
Checkpoint load_checkpoint(const std::string& path);

std::map<std::string, std::string> config_to_kv(const ScorerConfig& config);
ScorerConfig config_from_kv(const std::map<std::string, std::string>& kv);

// A candidate span: inclusive node-position range within the document (or
// window) being scored. heads_only mode emits single-node spans.
struct SpanCandidate {
  int start = 0;
  int end = 0;
  friend auto operator<=>(const SpanCandidate&, const SpanCandidate&) = default;
  int width() const { return end - start + 1; }
};

struct CandidateSet {
  std::vector<SpanCandidate> spans;  // all candidates, document order
  std::vector<int> kept;             // indices into spans, document order
};

// Final per-span scores after coarse-to-fine pruning. Option scores for
// span i are laid out as: antecedent pair scores aligned with
// antecedents[i], then (when has_singleton_option) one singleton score.
// The dummy option always scores 0 and is implicit.
struct ScoreTable {
  std::vector<SpanCandidate> spans;  // kept spans, document order
  Eigen::VectorXd mention_scores;
  std::vector<std::vector<int>> antecedents;  // indices into spans
  std::vector<Eigen::VectorXd> pair_scores;
  Eigen::VectorXd singleton_scores;  // empty unless dummy/mask/separate
  bool has_singleton_option = false;
  // Predicted head offset within each span (span2head modes), else empty.
  std::vector<int> head_offsets;
};

// Tape leaves for every parameter array of one forward pass.
struct ParamVars {
  std::map<std::string, nn::Var> vars;

  nn::Var operator[](const std::string& name) const;
  static ParamVars bind(nn::Tape& tape, const Parameters& params);
  // Adds tape gradients into the matching arrays (same registration).
  void accumulate_grads(Parameters& grads) const;
};

// Sentence-respecting segmentation: consecutive sentences are grouped while
// the node count stays within segment_length; an oversized single sentence
// forms its own segment. Returns node ranges [begin, end).
std::vector<std::pair<int, int>> plan_segments(const Document& doc,
                                               int segment_length);

// Contextual token representations for all nodes of the document: learned
// embeddings plus one residual layer of windowed self-attention, encoded
// per segment, plus optional dependency-path features. T x token_dim().
nn::Var encode_tokens(nn::Tape& tape, const ParamVars& pv,
                      const ScorerConfig& config, const Vocabulary& vocab,
                      const Document& doc);

// All candidate spans of the document in (start, end) order.
std::vector<SpanCandidate> enumerate_candidates(const Document& doc,
                                                const ScorerConfig& config);

// g = [x_start, x_end, x_hat, width_embedding] per span. N x span_dim().
nn::Var span_representation(nn::Tape& tape, const ParamVars& pv,
                            const ScorerConfig& config, nn::Var tokens,
                            const std::vector<SpanCandidate>& spans);

// FFNN_m over span representations. N x 1.
nn::Var mention_score(nn::Tape& tape, const ParamVars& pv,
                      const ScorerConfig& config, nn::Var g);

struct PruneResult {
  std::vector<int> kept;  // candidate indices, document order
  // Per kept span: earlier kept spans that survive coarse scoring, ascending.
  std::vector<std::vector<int>> antecedents;
  nn::Var g_kept;    // K x span_dim
  nn::Var s_m_kept;  // K x 1
  nn::Var coarse;    // K x K bilinear scores g_i . W_c . g_j
};

// Keeps the ceil(keep_ratio * T) highest mention scores (T = node count),
// then for each kept span the max_antecedents earlier spans with the best
// coarse score s_m(i) + s_m(j) + g_i.W_c.g_j. Ties break toward earlier
// spans; kept lists stay in document order.
PruneResult coarse_to_fine_prune(nn::Tape& tape, const ParamVars& pv,
                                 const ScorerConfig& config,
                                 const std::vector<SpanCandidate>& spans,
                                 nn::Var g_all, nn::Var s_m_all,
                                 int num_tokens);

// Fine antecedent scores s_a for explicit span pairs: FFNN_a over
// [g_i, g_j, g_i*g_j, distance_embedding]. One row per pair.
nn::Var antecedent_scores(nn::Tape& tape, const ParamVars& pv,
                          const ScorerConfig& config, nn::Var g_kept,
                          const std::vector<std::pair<int, int>>& pairs,
                          const std::vector<int>& distance_buckets);

// Score of the "is a singleton" option per kept span (modes dummy, mask,
// separate). K x 1.
nn::Var singleton_score(nn::Tape& tape, const ParamVars& pv,
                        const ScorerConfig& config, nn::Var g_kept,
                        nn::Var s_m_kept);

struct Span2HeadGraph {
  // Multiclass: K x max_span_width logits (positions past a span's width are
  // meaningless and masked by consumers). Binary: one logit per (span,
  // token) pair, pairs listed per span in token order.
  nn::Var logits;
  std::vector<std::pair<int, int>> pairs;  // binary mode: (kept row, offset)
};
Span2HeadGraph span2head_logits(nn::Tape& tape, const ParamVars& pv,
                                const ScorerConfig& config, nn::Var g_kept,
                                nn::Var tokens,
                                const std::vector<SpanCandidate>& kept_spans);

// Head offset per span from the logits: the highest-probability position
// with sigma > 0.5, falling back to the plain argmax when none clears the
// threshold. Positions outside the span width are ignored.
std::vector<int> span2head_predict(const ScorerConfig& config,
                                   const Span2HeadGraph& graph,
                                   const std::vector<SpanCandidate>& spans);

// Everything one forward pass produces; keeps the tape alive so training
// can attach losses and run backward.
struct ForwardPass {
  std::unique_ptr<nn::Tape> tape;
  ParamVars pv;
  CandidateSet candidates;
  nn::Var tokens;     // T x token_dim
  nn::Var g_all;      // N x span_dim (all candidates)
  nn::Var s_m_all;    // N x 1
  PruneResult prune;
  // Per kept span: option score rows [antecedents..., singleton?], matching
  // ScoreTable layout. Spans with no options have an invalid Var (id -1).
  std::vector<nn::Var> options;
  std::vector<std::vector<int>> antecedents;  // per kept span
  Span2HeadGraph span2head;
  ScoreTable table;
};

ForwardPass forward_document(const Parameters& params,
                             const ScorerConfig& config,
                             const Vocabulary& vocab, const Document& doc);

// Inference-only convenience: forward pass, values extracted, tape dropped.
ScoreTable score_document(const Parameters& params, const ScorerConfig& config,
                          const Vocabulary& vocab, const Document& doc);

}  // namespace coref
