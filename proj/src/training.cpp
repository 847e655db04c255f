#include "corefkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "corefkit/conllu.hpp"
#include "corefkit/decode.hpp"
#include "corefkit/metrics.hpp"

namespace coref {

void TrainConfig::validate() const {
  if (max_segments < 0)
    throw ConfigError("max_segments must be positive (or 0 for the default)");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("momentum must lie in [0, 1)");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  // Vocabulary sizes are only known once the corpora are loaded; stand in
  // for them so every other scorer setting is still checked up front.
  ScorerConfig probe = scorer;
  if (probe.encoder.vocab_size == 0) probe.encoder.vocab_size = 1;
  if (probe.deprel_vocab_size == 0) probe.deprel_vocab_size = 1;
  probe.validate();
}

std::string to_string(ExclusionMode m) {
  switch (m) {
    case ExclusionMode::kNone: return "none";
    case ExclusionMode::kDatasetZeroShot: return "dataset-zero-shot";
    case ExclusionMode::kLanguageZeroShot: return "language-zero-shot";
  }
  return "none";
}

ExclusionMode exclusion_mode_from_string(const std::string& s) {
  if (s == "none") return ExclusionMode::kNone;
  if (s == "dataset-zero-shot") return ExclusionMode::kDatasetZeroShot;
  if (s == "language-zero-shot") return ExclusionMode::kLanguageZeroShot;
  throw ConfigError("unknown exclusion mode \"" + s + "\"");
}

std::string corpus_name(const std::string& path) {
  size_t slash = path.find_last_of("/\\");
  std::string base =
      slash == std::string::npos ? path : path.substr(slash + 1);
  size_t dot = base.find('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

std::string corpus_language(const std::string& name) {
  size_t under = name.find('_');
  return under == std::string::npos ? name : name.substr(0, under);
}

std::vector<std::pair<int, int>> TrainingSet::index() const {
  std::vector<std::pair<int, int>> idx;
  for (size_t c = 0; c < corpora.size(); c++)
    for (size_t d = 0; d < corpora[c].docs.size(); d++)
      idx.emplace_back(static_cast<int>(c), static_cast<int>(d));
  return idx;
}

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TrainingSet load_mixture(const MixtureSpec& mixture) {
  TrainingSet set;
  for (const CorpusEntry& entry : mixture.corpora) {
    if (!entry.include) continue;
    std::string name = corpus_name(entry.path);
    if (mixture.exclusion == ExclusionMode::kDatasetZeroShot &&
        name == mixture.excluded)
      continue;
    if (mixture.exclusion == ExclusionMode::kLanguageZeroShot &&
        corpus_language(name) == mixture.excluded)
      continue;
    LoadedCorpus corpus;
    corpus.name = name;
    corpus.singletons_annotated = entry.singletons_annotated;
    corpus.docs = parse_corpus(read_text_file(entry.path));
    set.corpora.push_back(std::move(corpus));
  }
  if (set.index().empty())
    throw ConfigError("training mixture contains no documents");
  for (const std::string& path : mixture.dev_paths) {
    std::vector<Document> docs = parse_corpus(read_text_file(path));
    set.dev_docs.insert(set.dev_docs.end(), docs.begin(), docs.end());
  }
  return set;
}

// --- Gold assignment --------------------------------------------------------

GoldAssignment map_gold(const Document& doc, const ScorerConfig& config,
                        const std::vector<SpanCandidate>& candidates,
                        const std::vector<int>& kept,
                        const std::vector<std::vector<int>>& antecedents,
                        bool has_singleton_option) {
  GoldAssignment out;
  size_t n = candidates.size();
  out.is_gold_mention.assign(n, false);
  out.gold_head_offset.assign(n, -1);
  std::vector<int> cluster_of(n, -1);

  std::map<std::pair<int, int>, int> by_range;
  for (size_t c = 0; c < n; c++)
    by_range[{candidates[c].start, candidates[c].end}] =
        static_cast<int>(c);

  int cluster = 0;
  for (const Entity& entity : doc.entities) {
    // With no singleton handling, single-mention entities are invisible to
    // the loss, exactly as if the annotation lacked them.
    if (config.singleton_mode == SingletonMode::kOff &&
        entity.mentions.size() < 2) {
      cluster++;
      continue;
    }
    for (const Mention& mention : entity.mentions) {
      int head = doc.index_of(mention.head);
      int first = doc.index_of(mention.first());
      int last = doc.index_of(mention.last());
      std::pair<int, int> key =
          config.heads_only ? std::pair{head, head} : std::pair{first, last};
      auto it = key.first < 0 ? by_range.end() : by_range.find(key);
      if (it == by_range.end() || cluster_of[it->second] >= 0) {
        out.unreachable++;
        continue;
      }
      int c = it->second;
      cluster_of[c] = cluster;
      out.is_gold_mention[c] = true;
      if (head >= candidates[c].start && head <= candidates[c].end)
        out.gold_head_offset[c] = head - candidates[c].start;
      out.gold_mentions++;
    }
    cluster++;
  }

  size_t k = kept.size();
  out.gold_rows.resize(k);
  out.eps_gold.assign(k, false);
  for (size_t r = 0; r < k; r++) {
    int mine = cluster_of[kept[r]];
    if (mine >= 0) {
      for (size_t p = 0; p < antecedents[r].size(); p++)
        if (cluster_of[kept[antecedents[r][p]]] == mine)
          out.gold_rows[r].push_back(static_cast<int>(p));
    }
    if (out.gold_rows[r].empty()) {
      if (mine >= 0 && has_singleton_option)
        out.gold_rows[r].push_back(static_cast<int>(antecedents[r].size()));
      else
        out.eps_gold[r] = true;
    }
  }
  return out;
}

// --- Loss -------------------------------------------------------------------

std::pair<nn::Var, LossBreakdown> document_loss(ForwardPass& fp,
                                                const Document& doc,
                                                const ScorerConfig& config,
                                                bool singletons_annotated) {
  nn::Tape& tape = *fp.tape;
  GoldAssignment gold =
      map_gold(doc, config, fp.candidates.spans, fp.prune.kept,
               fp.prune.antecedents, fp.table.has_singleton_option);

  std::vector<nn::Var> terms;
  LossBreakdown parts;

  nn::Var marginal{nullptr, -1};
  for (size_t r = 0; r < fp.prune.kept.size(); r++) {
    if (fp.options[r].tape == nullptr) continue;  // dummy-only span, term 0
    nn::Var term =
        nn::marginal_nll(fp.options[r], gold.gold_rows[r], gold.eps_gold[r]);
    marginal = marginal.tape == nullptr ? term : nn::add(marginal, term);
  }
  if (marginal.tape != nullptr) {
    parts.marginal = marginal.value()(0, 0);
    terms.push_back(marginal);
  }

  if (config.singleton_mode == SingletonMode::kMentions &&
      singletons_annotated && fp.s_m_all.tape != nullptr &&
      fp.s_m_all.rows() > 0) {
    std::vector<double> targets(gold.is_gold_mention.size());
    for (size_t c = 0; c < targets.size(); c++)
      targets[c] = gold.is_gold_mention[c] ? 1.0 : 0.0;
    nn::Var bce = nn::bce_with_logits(fp.s_m_all, targets);
    parts.mention_bce = bce.value()(0, 0);
    terms.push_back(bce);
  }

  if (config.span2head != Span2HeadMode::kOff &&
      fp.span2head.logits.tape != nullptr) {
    std::vector<double> targets;
    nn::Var supervised{nullptr, -1};
    if (config.span2head == Span2HeadMode::kMulticlass) {
      std::vector<std::pair<int, int>> coords;
      for (size_t r = 0; r < fp.prune.kept.size(); r++) {
        int cand = fp.prune.kept[r];
        int offset = gold.gold_head_offset[cand];
        if (offset < 0) continue;
        int width = fp.candidates.spans[cand].width();
        for (int j = 0; j < width; j++) {
          coords.emplace_back(static_cast<int>(r), j);
          targets.push_back(j == offset ? 1.0 : 0.0);
        }
      }
      if (!coords.empty())
        supervised = nn::gather_elems(fp.span2head.logits, coords);
    } else {
      std::vector<int> rows;
      for (size_t p = 0; p < fp.span2head.pairs.size(); p++) {
        auto [r, j] = fp.span2head.pairs[p];
        int offset = gold.gold_head_offset[fp.prune.kept[r]];
        if (offset < 0) continue;
        rows.push_back(static_cast<int>(p));
        targets.push_back(j == offset ? 1.0 : 0.0);
      }
      if (!rows.empty())
        supervised = nn::gather_rows(fp.span2head.logits, rows);
    }
    if (supervised.tape != nullptr) {
      nn::Var bce = nn::bce_with_logits(supervised, targets);
      parts.span2head_bce = bce.value()(0, 0);
      terms.push_back(bce);
    }
  }

  nn::Var total = terms.empty() ? nn::leaf(tape, nn::Mat::Zero(1, 1))
                                : terms.front();
  for (size_t t = 1; t < terms.size(); t++) total = nn::add(total, terms[t]);
  parts.total = total.value()(0, 0);
  return {total, parts};
}

LossBreakdown loss_and_gradients(const Parameters& params,
                                 const ScorerConfig& config,
                                 const Vocabulary& vocab, const Document& doc,
                                 bool singletons_annotated, Parameters& grads) {
  if (doc.nodes.empty()) return {};
  ForwardPass fp = forward_document(params, config, vocab, doc);
  auto [loss, parts] = document_loss(fp, doc, config, singletons_annotated);
  fp.tape->backward(loss.id);
  fp.pv.accumulate_grads(grads);
  return parts;
}

// --- Optimizer --------------------------------------------------------------

SgdOptimizer::SgdOptimizer(const TrainConfig& cfg, const Parameters& shape)
    : learning_rate_(cfg.learning_rate),
      momentum_(cfg.momentum),
      clip_norm_(cfg.clip_norm),
      velocity_(shape.zeros_like()) {}

void SgdOptimizer::step(Parameters& params, const Parameters& grads) {
  double sq = 0.0;
  for (const std::string& name : params.names())
    sq += grads.at(name).squaredNorm();
  double norm = std::sqrt(sq);
  double scale = 1.0;
  if (clip_norm_ > 0 && norm > clip_norm_) scale = clip_norm_ / norm;
  for (const std::string& name : params.names()) {
    nn::Mat& v = velocity_[name];
    v = momentum_ * v - learning_rate_ * scale * grads.at(name);
    params[name] += v;
  }
}

// --- Windowing --------------------------------------------------------------

namespace {

Document window_of(const Document& doc, int node_begin, int node_end) {
  Document out;
  out.doc_id = doc.doc_id;
  out.nodes.assign(doc.nodes.begin() + node_begin,
                   doc.nodes.begin() + node_end);
  for (int s = 0; s < doc.num_sentences(); s++) {
    auto [b, e] = doc.sentence_range(s);
    if (b >= node_begin && b < node_end)
      out.sentence_begin.push_back(b - node_begin);
  }
  for (const auto& [id, line] : doc.mwt_lines) {
    int pos = doc.index_of(id);
    if (pos >= node_begin && pos < node_end) out.mwt_lines.emplace_back(id, line);
  }
  out.rebuild_index();
  for (const Entity& entity : doc.entities) {
    Entity kept;
    kept.id = entity.id;
    for (const Mention& mention : entity.mentions) {
      bool inside = true;
      for (const NodeId& nid : mention.nodes) {
        int pos = doc.index_of(nid);
        if (pos < node_begin || pos >= node_end) {
          inside = false;
          break;
        }
      }
      if (inside) kept.mentions.push_back(mention);
    }
    if (!kept.mentions.empty()) out.entities.push_back(std::move(kept));
  }
  return out;
}

}  // namespace

Document sample_training_window(const Document& doc, const TrainConfig& cfg,
                                RandomStream& rng) {
  auto segments = plan_segments(doc, cfg.scorer.encoder.segment_length);
  int cap = cfg.effective_max_segments();
  int total = static_cast<int>(segments.size());
  if (total <= cap) return doc;
  int offset = static_cast<int>(rng.uniform_int(
      static_cast<std::uint64_t>(total - cap + 1)));
  return window_of(doc, segments[static_cast<size_t>(offset)].first,
                   segments[static_cast<size_t>(offset + cap - 1)].second);
}

// --- Training loop ----------------------------------------------------------

namespace {

double dev_primary_score(const Parameters& params, const ScorerConfig& config,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const std::vector<Document>& dev) {
  PredictOptions options;
  options.max_segments = cfg.effective_max_segments();
  std::vector<Document> predicted;
  predicted.reserve(dev.size());
  for (const Document& doc : dev)
    predicted.push_back(predict_document(params, config, vocab, doc, options));
  return primary_score(dev, predicted, MatchMode::kHead, false).primary;
}

void write_record(std::ostream* out, const StepRecord& rec) {
  if (out == nullptr) return;
  (*out) << rec.step << '\t' << rec.loss << '\t' << rec.corpus << '\t'
         << rec.doc_id << '\t';
  if (rec.has_dev)
    (*out) << rec.dev_primary;
  else
    (*out) << '-';
  (*out) << '\n';
}

}  // namespace

TrainResult train(const TrainingSet& data, const TrainConfig& cfg,
                  const Checkpoint* resume, std::ostream* log_stream) {
  cfg.validate();
  std::vector<std::pair<int, int>> index = data.index();
  if (index.empty())
    throw ConfigError("training mixture contains no documents");

  TrainResult result;
  RandomStream rng(cfg.seed);
  if (resume != nullptr) {
    result.params = resume->params;
    result.config = resume->config;
    result.vocab = resume->vocab;
  } else {
    std::vector<Document> all;
    for (const LoadedCorpus& corpus : data.corpora)
      all.insert(all.end(), corpus.docs.begin(), corpus.docs.end());
    result.vocab = Vocabulary::build(all);
    result.config = cfg.scorer;
    result.config.encoder.vocab_size =
        static_cast<int>(result.vocab.forms.size());
    result.config.deprel_vocab_size =
        static_cast<int>(result.vocab.deprels.size());
    result.config.validate();
    result.params = Parameters::build(result.config);
    result.params.init_random(rng);
  }

  SgdOptimizer optimizer(cfg, result.params);
  for (int step = 1; step <= cfg.steps; step++) {
    auto [c, d] = index[rng.uniform_int(index.size())];
    const LoadedCorpus& corpus = data.corpora[static_cast<size_t>(c)];
    const Document& doc = corpus.docs[static_cast<size_t>(d)];
    Document window = sample_training_window(doc, cfg, rng);

    Parameters grads = result.params.zeros_like();
    LossBreakdown parts =
        loss_and_gradients(result.params, result.config, result.vocab, window,
                           corpus.singletons_annotated, grads);
    if (!std::isfinite(parts.total))
      throw TrainError("non-finite loss at step " + std::to_string(step) +
                       " on document \"" + doc.doc_id + "\"");
    optimizer.step(result.params, grads);

    bool log_now = (cfg.log_every > 0 && step % cfg.log_every == 0) ||
                   step == cfg.steps;
    bool eval_now =
        !data.dev_docs.empty() &&
        (cfg.eval_every > 0 ? step % cfg.eval_every == 0 : step == cfg.steps);
    if (!log_now && !eval_now) continue;

    StepRecord rec;
    rec.step = step;
    rec.loss = parts.total;
    rec.corpus = corpus.name;
    rec.doc_id = doc.doc_id;
    if (eval_now) {
      rec.dev_primary = dev_primary_score(result.params, result.config,
                                          result.vocab, cfg, data.dev_docs);
      rec.has_dev = true;
    }
    result.log.push_back(rec);
    write_record(log_stream, rec);
  }
  return result;
}

// --- Gradient verification --------------------------------------------------

namespace {

double loss_value(const Parameters& params, const ScorerConfig& config,
                  const Vocabulary& vocab, const Document& doc,
                  bool singletons_annotated) {
  if (doc.nodes.empty()) return 0.0;
  ForwardPass fp = forward_document(params, config, vocab, doc);
  return document_loss(fp, doc, config, singletons_annotated).second.total;
}

}  // namespace

GradCheckResult finite_difference_check(const Parameters& params,
                                        const ScorerConfig& config,
                                        const Vocabulary& vocab,
                                        const Document& doc,
                                        bool singletons_annotated,
                                        double epsilon, int min_coords,
                                        std::uint64_t seed, bool corrupt) {
  Parameters grads = params.zeros_like();
  loss_and_gradients(params, config, vocab, doc, singletons_annotated, grads);

  Parameters work = params;
  RandomStream rng(seed);
  GradCheckResult result;
  for (const std::string& name : params.names()) {
    const nn::Mat& m = params.at(name);
    long size = m.rows() * m.cols();
    std::vector<long> coords;
    if (size <= min_coords) {
      coords.resize(static_cast<size_t>(size));
      for (long i = 0; i < size; i++) coords[static_cast<size_t>(i)] = i;
    } else {
      std::set<long> picked;
      while (static_cast<int>(picked.size()) < min_coords)
        picked.insert(static_cast<long>(
            rng.uniform_int(static_cast<std::uint64_t>(size))));
      coords.assign(picked.begin(), picked.end());
    }
    for (long flat : coords) {
      long r = flat / m.cols();
      long c = flat % m.cols();
      double saved = work[name](r, c);
      work[name](r, c) = saved + epsilon;
      double up = loss_value(work, config, vocab, doc, singletons_annotated);
      work[name](r, c) = saved - epsilon;
      double down = loss_value(work, config, vocab, doc, singletons_annotated);
      work[name](r, c) = saved;
      double numeric = (up - down) / (2 * epsilon);
      double analytic = grads.at(name)(r, c);
      if (corrupt) analytic += 1.0 + 0.1 * std::abs(analytic);
      double rel = std::abs(analytic - numeric) /
                   std::max({1.0, std::abs(analytic), std::abs(numeric)});
      result.coords_checked++;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_array = name;
        result.worst_row = static_cast<int>(r);
        result.worst_col = static_cast<int>(c);
      }
    }
  }
  return result;
}

// --- Config files -----------------------------------------------------------

namespace {

bool parse_bool(const std::string& value, int line) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected boolean, got \"" +
                    value + "\"");
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainFile parse_train_file(const std::string& text) {
  TrainFile out;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    line_no++;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));

    TrainConfig& t = out.config;
    ScorerConfig& s = t.scorer;
    if (key == "corpus") {
      std::istringstream parts(value);
      CorpusEntry entry;
      parts >> entry.path;
      std::string flag;
      while (parts >> flag) {
        if (flag == "singletons")
          entry.singletons_annotated = true;
        else if (flag == "excluded")
          entry.include = false;
        else
          throw ConfigError("line " + std::to_string(line_no) +
                            ": unknown corpus flag \"" + flag + "\"");
      }
      if (entry.path.empty())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": corpus needs a path");
      out.mixture.corpora.push_back(entry);
    } else if (key == "dev") {
      out.mixture.dev_paths.push_back(value);
    } else if (key == "exclude_dataset" || key == "exclude_language") {
      if (out.mixture.exclusion != ExclusionMode::kNone)
        throw ConfigError("line " + std::to_string(line_no) +
                          ": conflicting exclusion settings");
      out.mixture.exclusion = key == "exclude_dataset"
                                  ? ExclusionMode::kDatasetZeroShot
                                  : ExclusionMode::kLanguageZeroShot;
      out.mixture.excluded = value;
    } else if (key == "steps") {
      t.steps = std::stoi(value);
    } else if (key == "learning_rate") {
      t.learning_rate = std::stod(value);
    } else if (key == "momentum") {
      t.momentum = std::stod(value);
    } else if (key == "clip_norm") {
      t.clip_norm = std::stod(value);
    } else if (key == "max_segments") {
      t.max_segments = std::stoi(value);
    } else if (key == "log_every") {
      t.log_every = std::stoi(value);
    } else if (key == "eval_every") {
      t.eval_every = std::stoi(value);
    } else if (key == "seed") {
      t.seed = std::stoull(value);
    } else if (key == "embedding_dim") {
      s.encoder.embedding_dim = std::stoi(value);
    } else if (key == "context_window") {
      s.encoder.context_window = std::stoi(value);
    } else if (key == "segment_length") {
      s.encoder.segment_length = std::stoi(value);
    } else if (key == "max_span_width") {
      s.max_span_width = std::stoi(value);
    } else if (key == "keep_ratio") {
      s.keep_ratio = std::stod(value);
    } else if (key == "max_antecedents") {
      s.max_antecedents = std::stoi(value);
    } else if (key == "hidden_dim") {
      s.hidden_dim = std::stoi(value);
    } else if (key == "feature_dim") {
      s.feature_dim = std::stoi(value);
    } else if (key == "heads_only") {
      s.heads_only = parse_bool(value, line_no);
    } else if (key == "use_tree_features") {
      s.use_tree_features = parse_bool(value, line_no);
    } else if (key == "singleton_mode") {
      s.singleton_mode = singleton_mode_from_string(value);
    } else if (key == "span2head") {
      s.span2head = span2head_mode_from_string(value);
    } else if (key == "max_tree_depth") {
      s.syntax.max_tree_depth = std::stoi(value);
    } else if (key == "tree_token_dim") {
      s.syntax.token_embedding_dim = std::stoi(value);
    } else if (key == "tree_deprel_dim") {
      s.syntax.deprel_embedding_dim = std::stoi(value);
    } else {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": unknown key \"" + key + "\"");
    }
  }
  return out;
}

TrainFile load_train_file(const std::string& path) {
  return parse_train_file(read_text_file(path));
}

}  // namespace coref
