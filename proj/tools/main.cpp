#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "corefkit/conllu.hpp"
#include "corefkit/decode.hpp"
#include "corefkit/metrics.hpp"
#include "corefkit/model.hpp"
#include "corefkit/scorer.hpp"
#include "corefkit/stats.hpp"
#include "corefkit/synth.hpp"
#include "corefkit/training.hpp"

namespace {

int log_level() {
  const char* v = std::getenv("COREFKIT_LOG");
  return v == nullptr ? 0 : std::atoi(v);
}

void info(const std::string& message) {
  if (log_level() > 0) std::cerr << "corefkit: " << message << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write \"" + path + "\"");
  out << text;
  if (!out) throw std::runtime_error("short write to \"" + path + "\"");
}

std::vector<coref::Document> load_corpus(const std::string& path) {
  std::vector<coref::Document> docs = coref::parse_corpus(read_file(path));
  info("parsed " + std::to_string(docs.size()) + " document(s) from " + path);
  return docs;
}

int run_validate(const std::string& input) {
  std::vector<coref::Document> docs = load_corpus(input);
  long warnings = 0;
  for (const coref::Document& doc : docs) {
    coref::ValidationReport report = coref::validate_document(doc);
    for (const std::string& w : report.warnings) {
      std::cout << doc.doc_id << ": warning: " << w << '\n';
      warnings++;
    }
    for (const std::string& e : report.errors)
      std::cout << doc.doc_id << ": error: " << e << '\n';
  }
  std::cout << docs.size() << " document(s), " << warnings
            << " warning(s), 0 error(s)\n";
  return 0;
}

int run_stats(const std::string& input, bool tsv) {
  coref::StatsReport report = coref::compute_stats(load_corpus(input));
  std::cout << (tsv ? coref::stats_rows(report) : coref::format_stats(report));
  return 0;
}

int run_convert(const std::string& input, const std::string& output) {
  std::vector<coref::Document> docs = load_corpus(input);
  write_file(output, coref::write_corpus(docs));
  info("wrote " + output);
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string out_path;
  std::string resume_path;
  std::string log_path;
  std::int64_t seed = -1;
};

int run_train(const TrainArgs& args) {
  coref::TrainFile tf = coref::load_train_file(args.config_path);
  if (args.seed >= 0) tf.config.seed = static_cast<std::uint64_t>(args.seed);
  coref::TrainingSet data = coref::load_mixture(tf.mixture);

  std::ofstream log_file;
  std::ostream* log_stream = &std::cout;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path, std::ios::binary);
    if (!log_file)
      throw std::runtime_error("cannot write \"" + args.log_path + "\"");
    log_stream = &log_file;
  }

  coref::Checkpoint resume;
  const coref::Checkpoint* resume_ptr = nullptr;
  if (!args.resume_path.empty()) {
    resume = coref::load_checkpoint(args.resume_path);
    resume_ptr = &resume;
    info("resuming from " + args.resume_path);
  }

  coref::TrainResult result =
      coref::train(data, tf.config, resume_ptr, log_stream);
  coref::save_checkpoint(args.out_path, result.params, result.config,
                         result.vocab);
  info("wrote checkpoint " + args.out_path);
  return 0;
}

struct PredictArgs {
  std::string model_path;
  std::string input;
  std::string output;
  std::string overlap = "none";
  bool filter_seen = false;
  bool reconstruct_spans = false;
  int max_segments = 0;  // 0 = mode default (6, or 8 for heads-only)
};

int run_predict(const PredictArgs& args) {
  coref::Checkpoint ckpt = coref::load_checkpoint(args.model_path);
  coref::PredictOptions options;
  options.overlap = coref::overlap_mode_from_string(args.overlap);
  options.filter_seen = args.filter_seen;
  options.reconstruct_spans = args.reconstruct_spans;
  options.max_segments = args.max_segments > 0
                             ? args.max_segments
                             : (ckpt.config.heads_only ? 8 : 6);

  std::vector<coref::Document> docs = load_corpus(args.input);
  for (coref::Document& doc : docs)
    doc = coref::predict_document(ckpt.params, ckpt.config, ckpt.vocab, doc,
                                  options);
  write_file(args.output, coref::write_corpus(docs));
  info("wrote " + args.output);
  return 0;
}

struct ScoreArgs {
  std::string gold_path;
  std::string system_path;
  std::string match = "head";
  bool keep_singletons = false;
  bool remove_before_collapse = false;
};

int run_score(const ScoreArgs& args) {
  std::vector<coref::Document> gold = load_corpus(args.gold_path);
  std::vector<coref::Document> system = load_corpus(args.system_path);
  coref::MetricReport report = coref::primary_score(
      gold, system, coref::match_mode_from_string(args.match),
      args.keep_singletons, args.remove_before_collapse);
  if (log_level() > 0) std::cerr << coref::format_report(report);
  std::cout << coref::report_rows(report);
  return 0;
}

struct GradcheckArgs {
  std::string config_path;
  double epsilon = 1e-4;
  int min_coords = 32;
  std::int64_t seed = -1;
};

// The check needs a fixture whose spans never tie exactly: repeated forms
// produce identical representations, and a tie straddling the pruning
// cutoff is a point where the loss jumps, so central differences there
// measure the jump instead of the gradient. All 28 forms are distinct,
// with cross-sentence chains, a width-2 mention, and a singleton.
coref::Document gradcheck_document() {
  coref::Document doc;
  doc.doc_id = "gradcheck";
  const char* deprels[] = {"nsubj", "obj", "nmod", "amod", "det"};
  for (int s = 0; s < 4; s++) {
    doc.sentence_begin.push_back(static_cast<int>(doc.nodes.size()));
    for (int w = 1; w <= 7; w++) {
      coref::Node node;
      node.id = {s, w, 0};
      node.form = "w" + std::to_string(s * 7 + w - 1);
      node.head = w == 1 ? coref::root_of(s) : coref::NodeId{s, w - 1, 0};
      node.deprel = deprels[(s * 7 + w) % 5];
      doc.nodes.push_back(node);
    }
  }
  doc.rebuild_index();
  auto mention = [](std::vector<coref::NodeId> nodes, int head_at) {
    coref::Mention m;
    m.nodes = std::move(nodes);
    m.head = m.nodes[head_at];
    return m;
  };
  doc.entities.push_back(
      {"e1",
       {mention({{0, 3, 0}, {0, 4, 0}}, 1), mention({{1, 4, 0}}, 0),
        mention({{3, 3, 0}}, 0)}});
  doc.entities.push_back(
      {"e2", {mention({{0, 7, 0}}, 0), mention({{2, 3, 0}, {2, 4, 0}}, 0)}});
  doc.entities.push_back({"e3", {mention({{2, 7, 0}}, 0)}});
  return doc;
}

int run_gradcheck(const GradcheckArgs& args) {
  coref::TrainFile tf = coref::load_train_file(args.config_path);
  if (args.seed >= 0) tf.config.seed = static_cast<std::uint64_t>(args.seed);

  coref::Document doc = gradcheck_document();

  coref::Vocabulary vocab = coref::Vocabulary::build({doc});
  coref::ScorerConfig config = tf.config.scorer;
  config.encoder.vocab_size = static_cast<int>(vocab.forms.size());
  config.deprel_vocab_size = static_cast<int>(vocab.deprels.size());
  config.validate();

  coref::Parameters params = coref::Parameters::build(config);
  coref::RandomStream rng(tf.config.seed);
  params.init_random(rng);

  coref::GradCheckResult result = coref::finite_difference_check(
      params, config, vocab, doc, true, args.epsilon, args.min_coords,
      tf.config.seed);
  std::cout << "coords_checked\t" << result.coords_checked << '\n'
            << "max_rel_error\t" << result.max_rel_error << '\n'
            << "worst\t" << result.worst_array << '\t' << result.worst_row
            << '\t' << result.worst_col << '\n';
  bool ok = result.max_rel_error < 1e-4;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 3;
}

struct SynthArgs {
  std::string out_path;
  coref::SynthSpec spec;
};

int run_synth(const SynthArgs& args) {
  std::vector<coref::Document> docs = coref::generate(args.spec);
  write_file(args.out_path, coref::write_corpus(docs));
  info("wrote " + std::to_string(docs.size()) + " document(s) to " +
       args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual coreference resolution toolkit"};
  app.require_subcommand(1);

  std::string validate_in;
  CLI::App* validate = app.add_subcommand("validate", "Check a CorefUD file");
  validate->add_option("input", validate_in, "CorefUD file")->required();

  std::string stats_in;
  bool stats_tsv = false;
  CLI::App* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("input", stats_in, "CorefUD file")->required();
  stats->add_flag("--tsv", stats_tsv, "machine-readable raw counts");

  std::string convert_in, convert_out;
  CLI::App* convert =
      app.add_subcommand("convert", "Parse and rewrite canonically");
  convert->add_option("input", convert_in, "CorefUD file")->required();
  convert->add_option("output", convert_out, "destination path")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", train_args.config_path, "training config file")
      ->required();
  train->add_option("--out", train_args.out_path, "checkpoint to write")
      ->required();
  train->add_option("--resume", train_args.resume_path,
                    "checkpoint to fine-tune from");
  train->add_option("--log", train_args.log_path,
                    "step log file (default: stdout)");
  train->add_option("--seed", train_args.seed, "override the config seed");

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Annotate a file");
  predict->add_option("--model", predict_args.model_path, "checkpoint")
      ->required();
  predict->add_option("input", predict_args.input, "CorefUD file")->required();
  predict->add_option("output", predict_args.output, "destination path")
      ->required();
  predict->add_option("--overlap", predict_args.overlap,
                      "window overlap: none|min|max");
  predict->add_flag("--filter-seen", predict_args.filter_seen,
                    "drop clusters repeated from covered segments");
  predict->add_flag("--reconstruct-spans", predict_args.reconstruct_spans,
                    "expand single-node mentions to subtrees");
  predict->add_option("--max-segments", predict_args.max_segments,
                      "window size in segments (default 6, heads-only 8)");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "Score system output");
  score->add_option("--gold", score_args.gold_path, "gold CorefUD file")
      ->required();
  score->add_option("--system", score_args.system_path, "system CorefUD file")
      ->required();
  score->add_option("--match", score_args.match, "mention matching: head|exact");
  score->add_flag("--keep-singletons", score_args.keep_singletons,
                  "score single-mention entities too");
  score->add_flag("--remove-before-collapse", score_args.remove_before_collapse,
                  "drop raw singletons before head collapsing");

  GradcheckArgs grad_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Verify gradients by finite differences");
  gradcheck->add_option("--config", grad_args.config_path, "training config file")
      ->required();
  gradcheck->add_option("--eps", grad_args.epsilon, "finite-difference step");
  gradcheck->add_option("--coords", grad_args.min_coords,
                        "coordinates sampled per array");
  gradcheck->add_option("--seed", grad_args.seed, "override the config seed");

  SynthArgs synth_args;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", synth_args.out_path, "destination path")
      ->required();
  synth->add_option("--docs", synth_args.spec.documents, "documents");
  synth->add_option("--sentences", synth_args.spec.sentences_per_doc,
                    "sentences per document");
  synth->add_option("--sentence-length", synth_args.spec.sentence_length,
                    "tokens per sentence");
  synth->add_option("--entities", synth_args.spec.entities_per_doc,
                    "entities per document");
  synth->add_option("--mentions", synth_args.spec.mentions_per_entity,
                    "mentions per entity");
  synth->add_option("--vocab", synth_args.spec.vocab_size, "name tokens");
  synth->add_option("--singleton-rate", synth_args.spec.singleton_rate,
                    "singleton entity probability");
  synth->add_option("--cross-rate", synth_args.spec.cross_segment_rate,
                    "cross-segment chain probability");
  synth->add_option("--seed", synth_args.spec.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) return run_validate(validate_in);
    if (*stats) return run_stats(stats_in, stats_tsv);
    if (*convert) return run_convert(convert_in, convert_out);
    if (*train) return run_train(train_args);
    if (*predict) return run_predict(predict_args);
    if (*score) return run_score(score_args);
    if (*gradcheck) return run_gradcheck(grad_args);
    if (*synth) return run_synth(synth_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
