#include "corefkit/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace coref {

std::string to_string(SingletonMode m) {
  switch (m) {
    case SingletonMode::kOff: return "off";
    case SingletonMode::kDummy: return "dummy";
    case SingletonMode::kMask: return "mask";
    case SingletonMode::kSeparate: return "separate";
    case SingletonMode::kMentions: return "mentions";
  }
  return "off";
}

std::string to_string(Span2HeadMode m) {
  switch (m) {
    case Span2HeadMode::kOff: return "off";
    case Span2HeadMode::kMulticlass: return "multiclass";
    case Span2HeadMode::kBinary: return "binary";
  }
  return "off";
}

SingletonMode singleton_mode_from_string(const std::string& s) {
  if (s == "off") return SingletonMode::kOff;
  if (s == "dummy") return SingletonMode::kDummy;
  if (s == "mask") return SingletonMode::kMask;
  if (s == "separate") return SingletonMode::kSeparate;
  if (s == "mentions") return SingletonMode::kMentions;
  throw ConfigError("unknown singleton mode \"" + s + "\"");
}

Span2HeadMode span2head_mode_from_string(const std::string& s) {
  if (s == "off") return Span2HeadMode::kOff;
  if (s == "multiclass") return Span2HeadMode::kMulticlass;
  if (s == "binary") return Span2HeadMode::kBinary;
  throw ConfigError("unknown span2head mode \"" + s + "\"");
}

void ScorerConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(encoder.vocab_size >= 1, "vocab_size must be positive");
  require(encoder.embedding_dim >= 1, "embedding_dim must be positive");
  require(encoder.context_window >= 1, "context_window must be positive");
  require(encoder.segment_length >= 1, "segment_length must be positive");
  require(max_span_width >= 1, "max_span_width must be positive");
  require(keep_ratio > 0.0 && keep_ratio <= 1.0,
          "keep_ratio must be in (0, 1]");
  require(max_antecedents >= 1, "max_antecedents must be positive");
  require(hidden_dim >= 1, "hidden_dim must be positive");
  require(feature_dim >= 1, "feature_dim must be positive");
  if (use_tree_features) {
    require(syntax.max_tree_depth >= 1, "max_tree_depth must be positive");
    require(syntax.token_embedding_dim >= 1,
            "tree token embedding dim must be positive");
    require(syntax.deprel_embedding_dim >= 1,
            "deprel embedding dim must be positive");
    require(deprel_vocab_size >= 1, "deprel_vocab_size must be positive");
  }
  if (span2head != Span2HeadMode::kOff)
    require(!heads_only,
            "span2head requires full spans (heads_only must be off)");
}

int distance_bucket(int distance) {
  if (distance <= 1) return 0;
  if (distance == 2) return 1;
  if (distance == 3) return 2;
  if (distance == 4) return 3;
  if (distance <= 7) return 4;
  if (distance <= 15) return 5;
  if (distance <= 31) return 6;
  if (distance <= 63) return 7;
  return 8;
}

void Vocabulary::rebuild_maps() {
  form_index.clear();
  for (size_t i = 0; i < forms.size(); i++) form_index[forms[i]] = i;
  deprel_index.clear();
  for (size_t i = 0; i < deprels.size(); i++) deprel_index[deprels[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<Document>& docs) {
  std::set<std::string> forms, deprels;
  for (const Document& doc : docs)
    for (const Node& n : doc.nodes) {
      forms.insert(n.form);
      deprels.insert(n.deprel);
    }
  Vocabulary v;
  v.forms.push_back("<unk>");
  for (const std::string& f : forms)
    if (f != "<unk>") v.forms.push_back(f);
  v.deprels.push_back("<unk>");
  for (const std::string& d : deprels)
    if (d != "<unk>") v.deprels.push_back(d);
  v.rebuild_maps();
  return v;
}

nn::Mat& Parameters::add(const std::string& name, long rows, long cols) {
  if (index_.count(name))
    throw std::logic_error("parameter " + name + " registered twice");
  index_[name] = static_cast<int>(order_.size());
  order_.push_back(name);
  return store_[name] = nn::Mat::Zero(rows, cols);
}

nn::Mat& Parameters::operator[](const std::string& name) {
  auto it = store_.find(name);
  if (it == store_.end())
    throw std::logic_error("unknown parameter " + name);
  return it->second;
}

const nn::Mat& Parameters::at(const std::string& name) const {
  auto it = store_.find(name);
  if (it == store_.end())
    throw std::logic_error("unknown parameter " + name);
  return it->second;
}

long Parameters::total_size() const {
  long n = 0;
  for (const auto& [name, m] : store_) n += m.size();
  return n;
}

Parameters Parameters::build(const ScorerConfig& config) {
  config.validate();
  Parameters p;
  const long V = config.encoder.vocab_size;
  const long d = config.encoder.embedding_dim;
  const long td = config.token_dim();
  const long g = config.span_dim();
  const long h = config.hidden_dim;
  const long f = config.feature_dim;

  p.add("tok_emb", V, d);
  p.add("attn_q", d, d);
  p.add("attn_k", d, d);
  p.add("attn_v", d, d);
  if (config.use_tree_features) {
    p.add("tree_tok_emb", V, config.syntax.token_embedding_dim);
    p.add("deprel_emb", config.deprel_vocab_size,
          config.syntax.deprel_embedding_dim);
  }
  p.add("head_score_w", td, 1);
  p.add("width_emb", kNumDistanceBuckets, f);
  p.add("dist_emb", kNumDistanceBuckets, f);
  p.add("ffnn_m_w1", g, h);
  p.add("ffnn_m_b1", 1, h);
  p.add("ffnn_m_w2", h, 1);
  p.add("ffnn_m_b2", 1, 1);
  p.add("coarse_w", g, g);
  p.add("ffnn_a_w1", config.pair_feature_dim(), h);
  p.add("ffnn_a_b1", 1, h);
  p.add("ffnn_a_w2", h, 1);
  p.add("ffnn_a_b2", 1, 1);
  switch (config.singleton_mode) {
    case SingletonMode::kDummy:
    case SingletonMode::kMask:
      p.add("sing_emb", 1, g);
      break;
    case SingletonMode::kSeparate:
      p.add("sing_emb", 1, g);
      p.add("ffnn_s_w1", g, h);
      p.add("ffnn_s_b1", 1, h);
      p.add("ffnn_s_w2", h, 1);
      p.add("ffnn_s_b2", 1, 1);
      break;
    case SingletonMode::kOff:
    case SingletonMode::kMentions:
      break;
  }
  switch (config.span2head) {
    case Span2HeadMode::kMulticlass:
      p.add("s2h_w", g, config.max_span_width);
      p.add("s2h_b", 1, config.max_span_width);
      break;
    case Span2HeadMode::kBinary:
      p.add("s2h_w1", g + td, h);
      p.add("s2h_b1", 1, h);
      p.add("s2h_w2", h, 1);
      p.add("s2h_b2", 1, 1);
      break;
    case Span2HeadMode::kOff:
      break;
  }
  return p;
}

void Parameters::init_random(RandomStream& rng) {
  for (const std::string& name : order_) {
    nn::Mat& m = store_[name];
    double scale;
    if (name.find("_emb") != std::string::npos)
      scale = 0.1;
    else if (name.find("_b") != std::string::npos && m.rows() == 1)
      scale = 0.01;
    else
      scale = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    for (long r = 0; r < m.rows(); r++)
      for (long c = 0; c < m.cols(); c++) m(r, c) = scale * rng.normal();
  }
}

Parameters Parameters::zeros_like() const {
  Parameters p;
  p.order_ = order_;
  p.index_ = index_;
  for (const auto& [name, m] : store_)
    p.store_[name] = nn::Mat::Zero(m.rows(), m.cols());
  return p;
}

// --- Checkpoint I/O ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'K', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& what)
      : data_(data), what_(what) {}

  std::uint32_t u32() {
    if (pos_ + 4 > data_.size())
      throw CheckpointError(what_ + ": truncated file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; i--)
      v = (v << 8) | static_cast<unsigned char>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  float f32() {
    std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }

  std::string str() {
    std::uint32_t n = u32();
    if (pos_ + n > data_.size())
      throw CheckpointError(what_ + ": truncated file");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string what_;
  size_t pos_ = 0;
};

std::string read_file(const std::string& path, const char* kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError(std::string("cannot open ") + kind + " " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw CheckpointError("write failed for " + path);
}

}  // namespace

std::map<std::string, std::string> config_to_kv(const ScorerConfig& c) {
  std::map<std::string, std::string> kv;
  auto put = [&](const std::string& k, auto v) {
    std::ostringstream ss;
    ss << v;
    kv[k] = ss.str();
  };
  put("format_version", kVersion);
  put("vocab_size", c.encoder.vocab_size);
  put("embedding_dim", c.encoder.embedding_dim);
  put("context_window", c.encoder.context_window);
  put("segment_length", c.encoder.segment_length);
  put("deprel_vocab_size", c.deprel_vocab_size);
  put("max_span_width", c.max_span_width);
  put("keep_ratio", c.keep_ratio);
  put("max_antecedents", c.max_antecedents);
  put("hidden_dim", c.hidden_dim);
  put("feature_dim", c.feature_dim);
  put("heads_only", c.heads_only ? 1 : 0);
  put("use_tree_features", c.use_tree_features ? 1 : 0);
  put("singleton_mode", to_string(c.singleton_mode));
  put("span2head", to_string(c.span2head));
  put("max_tree_depth", c.syntax.max_tree_depth);
  put("tree_token_dim", c.syntax.token_embedding_dim);
  put("tree_deprel_dim", c.syntax.deprel_embedding_dim);
  return kv;
}

ScorerConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end())
      throw CheckpointError("config is missing key \"" + k + "\"");
    return it->second;
  };
  auto geti = [&](const std::string& k) { return std::stoi(get(k)); };
  if (geti("format_version") != static_cast<int>(kVersion))
    throw CheckpointError("unsupported config format_version " +
                          get("format_version"));
  ScorerConfig c;
  c.encoder.vocab_size = geti("vocab_size");
  c.encoder.embedding_dim = geti("embedding_dim");
  c.encoder.context_window = geti("context_window");
  c.encoder.segment_length = geti("segment_length");
  c.deprel_vocab_size = geti("deprel_vocab_size");
  c.max_span_width = geti("max_span_width");
  c.keep_ratio = std::stod(get("keep_ratio"));
  c.max_antecedents = geti("max_antecedents");
  c.hidden_dim = geti("hidden_dim");
  c.feature_dim = geti("feature_dim");
  c.heads_only = geti("heads_only") != 0;
  c.use_tree_features = geti("use_tree_features") != 0;
  c.singleton_mode = singleton_mode_from_string(get("singleton_mode"));
  c.span2head = span2head_mode_from_string(get("span2head"));
  c.syntax.max_tree_depth = geti("max_tree_depth");
  c.syntax.token_embedding_dim = geti("tree_token_dim");
  c.syntax.deprel_embedding_dim = geti("tree_deprel_dim");
  return c;
}

void save_checkpoint(const std::string& path, const Parameters& params,
                     const ScorerConfig& config, const Vocabulary& vocab) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.names().size()));
  for (const std::string& name : params.names()) {
    const nn::Mat& m = params.at(name);
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (long r = 0; r < m.rows(); r++)
      for (long c = 0; c < m.cols(); c++)
        put_f32(out, static_cast<float>(m(r, c)));
  }
  put_u32(out, static_cast<std::uint32_t>(vocab.forms.size()));
  for (const std::string& f : vocab.forms) put_str(out, f);
  put_u32(out, static_cast<std::uint32_t>(vocab.deprels.size()));
  for (const std::string& d : vocab.deprels) put_str(out, d);
  write_file(path, out);

  std::string cfg;
  for (const auto& [k, v] : config_to_kv(config)) cfg += k + " = " + v + "\n";
  write_file(path + ".cfg", cfg);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string cfg_text = read_file(path + ".cfg", "config");
  std::map<std::string, std::string> kv;
  std::istringstream lines(cfg_text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    line_no++;
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError(path + ".cfg line " + std::to_string(line_no) +
                            ": expected key = value");
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      size_t e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  Checkpoint ck;
  ck.config = config_from_kv(kv);
  ck.params = Parameters::build(ck.config);

  std::string data = read_file(path, "checkpoint");
  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw CheckpointError(path + ": not a checkpoint file");
  Reader r(data, path);
  r.u32();  // magic, verified above
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError(path + ": unsupported version " +
                          std::to_string(version));
  std::uint32_t n_arrays = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t a = 0; a < n_arrays; a++) {
    std::string name = r.str();
    long rows = r.u32(), cols = r.u32();
    if (!ck.params.has(name))
      throw CheckpointError(path + ": unexpected array \"" + name +
                            "\" for this configuration");
    nn::Mat& m = ck.params[name];
    if (m.rows() != rows || m.cols() != cols)
      throw CheckpointError(path + ": array \"" + name + "\" has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
    for (long rr = 0; rr < rows; rr++)
      for (long cc = 0; cc < cols; cc++) m(rr, cc) = r.f32();
    seen.insert(name);
  }
  for (const std::string& name : ck.params.names())
    if (!seen.count(name))
      throw CheckpointError(path + ": missing array \"" + name + "\"");

  std::uint32_t n_forms = r.u32();
  for (std::uint32_t i = 0; i < n_forms; i++) ck.vocab.forms.push_back(r.str());
  std::uint32_t n_deprels = r.u32();
  for (std::uint32_t i = 0; i < n_deprels; i++)
    ck.vocab.deprels.push_back(r.str());
  if (!r.done()) throw CheckpointError(path + ": trailing bytes");
  ck.vocab.rebuild_maps();
  if (static_cast<int>(ck.vocab.forms.size()) != ck.config.encoder.vocab_size)
    throw CheckpointError(path + ": vocabulary size disagrees with config");
  return ck;
}

// --- Forward pass -----------------------------------------------------------

nn::Var ParamVars::operator[](const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end())
    throw std::logic_error("parameter " + name + " not bound");
  return it->second;
}

ParamVars ParamVars::bind(nn::Tape& tape, const Parameters& params) {
  ParamVars pv;
  for (const std::string& name : params.names())
    pv.vars.emplace(name, nn::leaf(tape, params.at(name)));
  return pv;
}

void ParamVars::accumulate_grads(Parameters& grads) const {
  for (const auto& [name, var] : vars) grads[name] += var.grad();
}

std::vector<std::pair<int, int>> plan_segments(const Document& doc,
                                               int segment_length) {
  std::vector<std::pair<int, int>> segments;
  int seg_begin = 0;
  for (int s = 0; s < doc.num_sentences(); s++) {
    auto [b, e] = doc.sentence_range(s);
    if (b > seg_begin && e - seg_begin > segment_length) {
      segments.emplace_back(seg_begin, b);
      seg_begin = b;
    }
  }
  if (seg_begin < static_cast<int>(doc.nodes.size()) || doc.nodes.empty()) {
    if (!doc.nodes.empty())
      segments.emplace_back(seg_begin, static_cast<int>(doc.nodes.size()));
  }
  return segments;
}

namespace {

// Sinusoidal table for relative positions -window/2 .. window/2-1.
nn::Mat relative_position_table(int window, int dim) {
  nn::Mat table(window, dim);
  int left = window / 2;
  for (int r = 0; r < window; r++) {
    double offset = r - left;
    for (int i = 0; i < dim; i++) {
      double rate = std::pow(10000.0, -2.0 * (i / 2) / dim);
      table(r, i) = (i % 2 == 0) ? std::sin(offset * rate)
                                 : std::cos(offset * rate);
    }
  }
  return table;
}

// FFNN with one tanh hidden layer: (x W1 + b1) -> tanh -> W2 + b2.
nn::Var ffnn(const ParamVars& pv, const std::string& prefix, nn::Var x) {
  nn::Var h = nn::vtanh(nn::add_rowvec(nn::matmul(x, pv[prefix + "_w1"]),
                                       pv[prefix + "_b1"]));
  return nn::add_rowvec(nn::matmul(h, pv[prefix + "_w2"]), pv[prefix + "_b2"]);
}

}  // namespace

nn::Var encode_tokens(nn::Tape& tape, const ParamVars& pv,
                      const ScorerConfig& config, const Vocabulary& vocab,
                      const Document& doc) {
  if (doc.nodes.empty())
    return nn::leaf(tape, nn::Mat::Zero(0, config.token_dim()));
  const int window = config.encoder.context_window;
  const nn::Mat relpos =
      relative_position_table(window, config.encoder.embedding_dim);

  std::vector<int> ids(doc.nodes.size());
  for (size_t i = 0; i < doc.nodes.size(); i++)
    ids[i] = vocab.form_id(doc.nodes[i].form);

  std::vector<nn::Var> segment_outputs;
  for (auto [b, e] : plan_segments(doc, config.encoder.segment_length)) {
    std::vector<int> seg_ids(ids.begin() + b, ids.begin() + e);
    nn::Var x = nn::gather_rows(pv["tok_emb"], seg_ids);
    nn::Var q = nn::matmul(x, pv["attn_q"]);
    nn::Var k = nn::matmul(x, pv["attn_k"]);
    nn::Var v = nn::matmul(x, pv["attn_v"]);
    segment_outputs.push_back(
        nn::add(x, nn::local_attention(q, k, v, relpos, window)));
  }
  nn::Var h = segment_outputs.size() == 1 ? segment_outputs[0]
                                          : nn::concat_rows(segment_outputs);

  if (!config.use_tree_features) return h;

  const int depth = config.syntax.max_tree_depth;
  std::vector<std::vector<int>> anc_tok(depth), anc_rel(depth);
  for (const Node& n : doc.nodes) {
    auto path = tree_path_to_root(doc, n.id, config.syntax);
    for (int s = 0; s < depth; s++) {
      if (path[s].pad) {
        anc_tok[s].push_back(-1);
        anc_rel[s].push_back(-1);
      } else {
        const Node& anc = doc.nodes[doc.index_of(path[s].node)];
        anc_tok[s].push_back(vocab.form_id(anc.form));
        anc_rel[s].push_back(vocab.deprel_id(path[s].deprel));
      }
    }
  }
  std::vector<nn::Var> parts{h};
  for (int s = 0; s < depth; s++) {
    parts.push_back(nn::gather_rows(pv["tree_tok_emb"], anc_tok[s]));
    parts.push_back(nn::gather_rows(pv["deprel_emb"], anc_rel[s]));
  }
  return nn::concat_cols(parts);
}

std::vector<SpanCandidate> enumerate_candidates(const Document& doc,
                                                const ScorerConfig& config) {
  const int T = static_cast<int>(doc.nodes.size());
  std::vector<SpanCandidate> spans;
  if (config.heads_only) {
    spans.reserve(T);
    for (int t = 0; t < T; t++) spans.push_back({t, t});
    return spans;
  }
  for (int s = 0; s < T; s++)
    for (int e = s; e < std::min(T, s + config.max_span_width); e++)
      spans.push_back({s, e});
  return spans;
}

nn::Var span_representation(nn::Tape& /*tape*/, const ParamVars& pv,
                            const ScorerConfig& /*config*/, nn::Var tokens,
                            const std::vector<SpanCandidate>& spans) {
  std::vector<int> starts, ends, widths;
  std::vector<std::pair<int, int>> ranges;
  starts.reserve(spans.size());
  for (const SpanCandidate& s : spans) {
    starts.push_back(s.start);
    ends.push_back(s.end);
    widths.push_back(distance_bucket(s.width()));
    ranges.emplace_back(s.start, s.end);
  }
  nn::Var x_start = nn::gather_rows(tokens, starts);
  nn::Var x_end = nn::gather_rows(tokens, ends);
  nn::Var head_scores = nn::matmul(tokens, pv["head_score_w"]);
  nn::Var x_hat = nn::span_attention(tokens, head_scores, ranges);
  nn::Var width_feat = nn::gather_rows(pv["width_emb"], widths);
  return nn::concat_cols({x_start, x_end, x_hat, width_feat});
}

nn::Var mention_score(nn::Tape& tape, const ParamVars& pv,
                      const ScorerConfig& config, nn::Var g) {
  (void)tape;
  (void)config;
  return ffnn(pv, "ffnn_m", g);
}

PruneResult coarse_to_fine_prune(nn::Tape& /*tape*/, const ParamVars& pv,
                                 const ScorerConfig& config,
                                 const std::vector<SpanCandidate>& spans,
                                 nn::Var g_all, nn::Var s_m_all,
                                 int num_tokens) {
  const int N = static_cast<int>(spans.size());
  const Eigen::VectorXd scores = s_m_all.value().col(0);

  int k = std::min<int>(
      N, static_cast<int>(std::ceil(config.keep_ratio * num_tokens)));
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores(a) > scores(b);
  });
  PruneResult out;
  out.kept.assign(order.begin(), order.begin() + k);
  std::sort(out.kept.begin(), out.kept.end());

  out.g_kept = nn::gather_rows(g_all, out.kept);
  out.s_m_kept = nn::gather_rows(s_m_all, out.kept);
  out.coarse = nn::matmul_nt(nn::matmul(out.g_kept, pv["coarse_w"]),
                             out.g_kept);

  const nn::Mat& C = out.coarse.value();
  const int K = k;
  out.antecedents.resize(K);
  std::vector<int> cand;
  for (int i = 0; i < K; i++) {
    const double smi = scores(out.kept[i]);
    cand.resize(i);
    std::iota(cand.begin(), cand.end(), 0);
    auto coarse_score = [&](int j) {
      return smi + scores(out.kept[j]) + C(i, j);
    };
    int c = std::min<int>(config.max_antecedents, i);
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
      return coarse_score(a) > coarse_score(b);
    });
    cand.resize(c);
    std::sort(cand.begin(), cand.end());
    out.antecedents[i] = cand;
  }
  return out;
}

nn::Var antecedent_scores(nn::Tape& /*tape*/, const ParamVars& pv,
                          const ScorerConfig& /*config*/, nn::Var g_kept,
                          const std::vector<std::pair<int, int>>& pairs,
                          const std::vector<int>& distance_buckets) {
  std::vector<int> is, js;
  is.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    is.push_back(i);
    js.push_back(j);
  }
  nn::Var gi = nn::gather_rows(g_kept, is);
  nn::Var gj = nn::gather_rows(g_kept, js);
  nn::Var prod = nn::hadamard(gi, gj);
  nn::Var dist = nn::gather_rows(pv["dist_emb"], distance_buckets);
  nn::Var features = nn::concat_cols({gi, gj, prod, dist});
  return ffnn(pv, "ffnn_a", features);
}

namespace {

// Pair score of each kept span against the virtual singleton antecedent:
// bilinear coarse term plus FFNN_a on [g_i, sing, g_i*sing, dist bucket 0].
nn::Var singleton_pair_terms(const ParamVars& pv, nn::Var g_kept,
                             nn::Var sing) {
  const int K = static_cast<int>(g_kept.rows());
  nn::Var coarse_sing =
      nn::matmul_nt(nn::matmul(g_kept, pv["coarse_w"]), sing);
  nn::Var sing_rep = nn::repeat_rows(sing, K);
  nn::Var prod = nn::hadamard(g_kept, sing_rep);
  nn::Var dist = nn::gather_rows(pv["dist_emb"], std::vector<int>(K, 0));
  nn::Var features = nn::concat_cols({g_kept, sing_rep, prod, dist});
  return nn::add(coarse_sing, ffnn(pv, "ffnn_a", features));
}

}  // namespace

nn::Var singleton_score(nn::Tape& tape, const ParamVars& pv,
                        const ScorerConfig& config, nn::Var g_kept,
                        nn::Var s_m_kept) {
  const int K = static_cast<int>(g_kept.rows());
  nn::Var sing = pv["sing_emb"];
  switch (config.singleton_mode) {
    case SingletonMode::kDummy: {
      nn::Var s_m_sing = mention_score(tape, pv, config, sing);
      nn::Var base = nn::add(s_m_kept, nn::repeat_rows(s_m_sing, K));
      return nn::add(base, singleton_pair_terms(pv, g_kept, sing));
    }
    case SingletonMode::kMask: {
      nn::Var s_m_sing = mention_score(tape, pv, config, sing);
      return nn::add(s_m_kept, nn::repeat_rows(s_m_sing, K));
    }
    case SingletonMode::kSeparate: {
      nn::Var s_self = ffnn(pv, "ffnn_s", g_kept);
      nn::Var s_sing = ffnn(pv, "ffnn_s", sing);
      nn::Var base = nn::add(s_self, nn::repeat_rows(s_sing, K));
      return nn::add(base, singleton_pair_terms(pv, g_kept, sing));
    }
    default:
      throw std::logic_error("singleton_score called without a singleton mode");
  }
}

Span2HeadGraph span2head_logits(nn::Tape& /*tape*/, const ParamVars& pv,
                                const ScorerConfig& config, nn::Var g_kept,
                                nn::Var tokens,
                                const std::vector<SpanCandidate>& kept_spans) {
  Span2HeadGraph out;
  if (config.span2head == Span2HeadMode::kMulticlass) {
    out.logits = nn::add_rowvec(nn::matmul(g_kept, pv["s2h_w"]), pv["s2h_b"]);
    return out;
  }
  if (config.span2head == Span2HeadMode::kBinary) {
    std::vector<int> span_rows, token_rows;
    for (size_t i = 0; i < kept_spans.size(); i++)
      for (int t = kept_spans[i].start; t <= kept_spans[i].end; t++) {
        out.pairs.emplace_back(static_cast<int>(i), t - kept_spans[i].start);
        span_rows.push_back(static_cast<int>(i));
        token_rows.push_back(t);
      }
    nn::Var gs = nn::gather_rows(g_kept, span_rows);
    nn::Var xt = nn::gather_rows(tokens, token_rows);
    out.logits = ffnn(pv, "s2h", nn::concat_cols({gs, xt}));
    return out;
  }
  throw std::logic_error("span2head_logits called with span2head off");
}

std::vector<int> span2head_predict(const ScorerConfig& config,
                                   const Span2HeadGraph& graph,
                                   const std::vector<SpanCandidate>& spans) {
  std::vector<int> offsets(spans.size(), 0);
  auto pick = [](const std::vector<double>& logits) {
    // Highest-probability position clearing sigma > 0.5 (logit > 0); plain
    // argmax when none does. Sigma is monotone, so compare logits directly.
    int best_pos = 0, best_all = 0;
    bool any = false;
    for (size_t p = 0; p < logits.size(); p++) {
      if (logits[p] > logits[best_all]) best_all = static_cast<int>(p);
      if (logits[p] > 0 && (!any || logits[p] > logits[best_pos])) {
        best_pos = static_cast<int>(p);
        any = true;
      }
    }
    return any ? best_pos : best_all;
  };

  if (config.span2head == Span2HeadMode::kMulticlass) {
    const nn::Mat& L = graph.logits.value();
    for (size_t i = 0; i < spans.size(); i++) {
      std::vector<double> logits(spans[i].width());
      for (int p = 0; p < spans[i].width(); p++) logits[p] = L(i, p);
      offsets[i] = pick(logits);
    }
    return offsets;
  }
  // Binary: rows of logits follow graph.pairs.
  const nn::Mat& L = graph.logits.value();
  std::vector<std::vector<double>> per_span(spans.size());
  for (size_t r = 0; r < graph.pairs.size(); r++)
    per_span[graph.pairs[r].first].push_back(L(static_cast<long>(r), 0));
  for (size_t i = 0; i < spans.size(); i++) offsets[i] = pick(per_span[i]);
  return offsets;
}

ForwardPass forward_document(const Parameters& params,
                             const ScorerConfig& config,
                             const Vocabulary& vocab, const Document& doc) {
  config.validate();
  ForwardPass fp;
  fp.tape = std::make_unique<nn::Tape>();
  nn::Tape& tape = *fp.tape;
  fp.pv = ParamVars::bind(tape, params);

  fp.tokens = encode_tokens(tape, fp.pv, config, vocab, doc);
  fp.candidates.spans = enumerate_candidates(doc, config);
  fp.g_all = span_representation(tape, fp.pv, config, fp.tokens,
                                 fp.candidates.spans);
  fp.s_m_all = mention_score(tape, fp.pv, config, fp.g_all);
  fp.prune = coarse_to_fine_prune(tape, fp.pv, config, fp.candidates.spans,
                                  fp.g_all, fp.s_m_all,
                                  static_cast<int>(doc.nodes.size()));
  fp.candidates.kept = fp.prune.kept;
  fp.antecedents = fp.prune.antecedents;

  const int K = static_cast<int>(fp.prune.kept.size());
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> dist_buckets;
  std::vector<int> pair_offset(K + 1, 0);
  for (int i = 0; i < K; i++) {
    for (int j : fp.prune.antecedents[i]) {
      pairs.emplace_back(i, j);
      dist_buckets.push_back(distance_bucket(i - j));
    }
    pair_offset[i + 1] = static_cast<int>(pairs.size());
  }

  nn::Var pair_total;  // P x 1 final pair scores
  if (!pairs.empty()) {
    nn::Var s_a =
        antecedent_scores(tape, fp.pv, config, fp.prune.g_kept, pairs,
                          dist_buckets);
    std::vector<int> is, js;
    std::vector<std::pair<int, int>> ij;
    for (auto [i, j] : pairs) {
      is.push_back(i);
      js.push_back(j);
      ij.emplace_back(i, j);
    }
    nn::Var smi = nn::gather_rows(fp.prune.s_m_kept, is);
    nn::Var smj = nn::gather_rows(fp.prune.s_m_kept, js);
    nn::Var coarse_ij = nn::gather_elems(fp.prune.coarse, ij);
    pair_total = nn::add(nn::add(smi, smj), nn::add(coarse_ij, s_a));
  }

  bool has_sing = config.singleton_mode == SingletonMode::kDummy ||
                  config.singleton_mode == SingletonMode::kMask ||
                  config.singleton_mode == SingletonMode::kSeparate;
  nn::Var sing_scores;
  if (has_sing && K > 0)
    sing_scores = singleton_score(tape, fp.pv, config, fp.prune.g_kept,
                                  fp.prune.s_m_kept);

  fp.options.resize(K);
  for (int i = 0; i < K; i++) {
    std::vector<nn::Var> parts;
    int len = pair_offset[i + 1] - pair_offset[i];
    if (len > 0) {
      std::vector<int> rows(len);
      std::iota(rows.begin(), rows.end(), pair_offset[i]);
      parts.push_back(nn::gather_rows(pair_total, rows));
    }
    if (has_sing) parts.push_back(nn::gather_rows(sing_scores, {i}));
    if (parts.empty())
      fp.options[i] = nn::Var{};
    else if (parts.size() == 1)
      fp.options[i] = parts[0];
    else
      fp.options[i] = nn::concat_rows(parts);
  }

  // Kept spans in document order for the table.
  ScoreTable& table = fp.table;
  table.has_singleton_option = has_sing;
  table.spans.reserve(K);
  for (int idx : fp.prune.kept) table.spans.push_back(fp.candidates.spans[idx]);
  table.mention_scores = fp.prune.s_m_kept.value().col(0);
  table.antecedents = fp.antecedents;
  table.pair_scores.resize(K);
  for (int i = 0; i < K; i++) {
    int len = pair_offset[i + 1] - pair_offset[i];
    table.pair_scores[i] = Eigen::VectorXd(len);
    for (int p = 0; p < len; p++)
      table.pair_scores[i](p) = pair_total.value()(pair_offset[i] + p, 0);
  }
  if (has_sing && K > 0) table.singleton_scores = sing_scores.value().col(0);

  if (config.span2head != Span2HeadMode::kOff && K > 0) {
    fp.span2head = span2head_logits(tape, fp.pv, config, fp.prune.g_kept,
                                    fp.tokens, table.spans);
    table.head_offsets = span2head_predict(config, fp.span2head, table.spans);
  }
  return fp;
}

ScoreTable score_document(const Parameters& params, const ScorerConfig& config,
                          const Vocabulary& vocab, const Document& doc) {
  ForwardPass fp = forward_document(params, config, vocab, doc);
  return std::move(fp.table);
}

}  // namespace coref
