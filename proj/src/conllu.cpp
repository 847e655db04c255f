#include "corefkit/conllu.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "corefkit/syntax.hpp"

namespace coref {

namespace {

bool is_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

}  // namespace

std::vector<EntityEvent> parse_entity_events(const std::string& value) {
  std::vector<EntityEvent> events;
  size_t pos = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ConlluError(0, "Entity attribute: " + msg + " in \"" + value + "\"");
  };
  auto read_id = [&]() {
    size_t start = pos;
    while (pos < value.size() && value[pos] != '(' && value[pos] != ')' &&
           value[pos] != '[' && value[pos] != '-')
      pos++;
    if (pos == start) fail("empty entity id");
    return value.substr(start, pos - start);
  };
  auto read_subspan = [&](EntityEvent& ev) {
    if (pos >= value.size() || value[pos] != '[') return;
    size_t close = value.find(']', pos);
    if (close == std::string::npos) fail("unterminated subspan marker");
    std::string inner = value.substr(pos + 1, close - pos - 1);
    size_t slash = inner.find('/');
    if (slash == std::string::npos || !is_digits(inner.substr(0, slash)) ||
        !is_digits(inner.substr(slash + 1)))
      fail("malformed subspan marker [" + inner + "]");
    ev.part_k = std::stoi(inner.substr(0, slash));
    ev.part_n = std::stoi(inner.substr(slash + 1));
    if (ev.part_k < 1 || ev.part_k > ev.part_n)
      fail("subspan part out of range");
    pos = close + 1;
  };

  while (pos < value.size()) {
    EntityEvent ev;
    if (value[pos] == '(') {
      pos++;
      ev.entity_id = read_id();
      read_subspan(ev);
      if (pos < value.size() && value[pos] == '-') {
        pos++;
        size_t start = pos;
        while (pos < value.size() && value[pos] != '(' && value[pos] != ')')
          pos++;
        ev.attrs = value.substr(start, pos - start);
      }
      if (pos < value.size() && value[pos] == ')') {
        pos++;
        ev.kind = EntityEvent::Kind::kSingle;
      } else {
        ev.kind = EntityEvent::Kind::kOpen;
      }
    } else {
      ev.kind = EntityEvent::Kind::kClose;
      ev.entity_id = read_id();
      read_subspan(ev);
      if (pos >= value.size() || value[pos] != ')')
        fail("expected ')' after closing event for " + ev.entity_id);
      pos++;
    }
    events.push_back(std::move(ev));
  }
  if (events.empty()) fail("no events");
  return events;
}

std::string format_entity_events(const std::vector<EntityEvent>& events) {
  std::string out;
  for (const auto& ev : events) {
    std::string sub;
    if (ev.part_n > 0)
      sub = "[" + std::to_string(ev.part_k) + "/" + std::to_string(ev.part_n) +
            "]";
    switch (ev.kind) {
      case EntityEvent::Kind::kOpen:
        out += "(" + ev.entity_id + sub;
        if (!ev.attrs.empty()) out += "-" + ev.attrs;
        break;
      case EntityEvent::Kind::kSingle:
        out += "(" + ev.entity_id + sub;
        if (!ev.attrs.empty()) out += "-" + ev.attrs;
        out += ")";
        break;
      case EntityEvent::Kind::kClose:
        out += ev.entity_id + sub + ")";
        break;
    }
  }
  return out;
}

namespace {

struct OpenBracket {
  std::string eid;
  int part_k = 0, part_n = 0;
  int start = 0;  // node position
  std::string attrs;
  int line = 0;
};

struct PartsAccum {
  int n = 0;
  int expected = 1;
  std::vector<int> positions;
  std::string attrs;
  int line = 0;
};

struct RawMention {
  std::string eid;
  std::vector<int> positions;
  std::string attrs;
  int line = 0;
};

// Splits "head:K" off the attribute fields; returns K (0 if absent) and the
// remaining fields rejoined with '-'.
std::pair<int, std::string> take_head_field(const std::string& attrs) {
  if (attrs.empty()) return {0, ""};
  int head_k = 0;
  std::vector<std::string> rest;
  for (const std::string& field : split(attrs, '-')) {
    if (head_k == 0 && field.rfind("head:", 0) == 0 &&
        is_digits(field.substr(5))) {
      head_k = std::stoi(field.substr(5));
    } else {
      rest.push_back(field);
    }
  }
  std::string joined;
  for (size_t i = 0; i < rest.size(); i++)
    joined += (i ? "-" : "") + rest[i];
  return {head_k, joined};
}

struct Builder {
  Document doc;
  std::vector<OpenBracket> open;
  std::map<std::string, PartsAccum> parts;
  std::vector<RawMention> mentions;
  int first_line = 0;

  void complete(const std::string& eid, std::vector<int> positions,
                std::string attrs, int line) {
    mentions.push_back({eid, std::move(positions), std::move(attrs), line});
  }

  void feed_part(const EntityEvent& ev, std::vector<int> positions,
                 std::string attrs, int line) {
    auto it = parts.find(ev.entity_id);
    if (ev.part_k == 1) {
      if (it != parts.end())
        throw ConlluError(line, "discontinuous mention of " + ev.entity_id +
                                    " restarts before part " +
                                    std::to_string(it->second.expected) + "/" +
                                    std::to_string(it->second.n));
      PartsAccum acc{ev.part_n, 2, std::move(positions), std::move(attrs),
                     line};
      if (ev.part_n == 1)
        complete(ev.entity_id, std::move(acc.positions), std::move(acc.attrs),
                 line);
      else
        parts.emplace(ev.entity_id, std::move(acc));
      return;
    }
    if (it == parts.end() || it->second.expected != ev.part_k ||
        it->second.n != ev.part_n)
      throw ConlluError(line, "subspan part " + std::to_string(ev.part_k) +
                                  "/" + std::to_string(ev.part_n) + " of " +
                                  ev.entity_id + " out of order");
    PartsAccum& acc = it->second;
    acc.positions.insert(acc.positions.end(), positions.begin(),
                         positions.end());
    acc.expected++;
    if (ev.part_k == ev.part_n) {
      complete(ev.entity_id, std::move(acc.positions), std::move(acc.attrs),
               line);
      parts.erase(it);
    }
  }

  void apply_events(const std::vector<EntityEvent>& events, int position,
                    int line) {
    for (const EntityEvent& ev : events) {
      switch (ev.kind) {
        case EntityEvent::Kind::kOpen:
          open.push_back(
              {ev.entity_id, ev.part_k, ev.part_n, position, ev.attrs, line});
          break;
        case EntityEvent::Kind::kSingle:
          if (ev.part_n > 0)
            feed_part(ev, {position}, ev.attrs, line);
          else
            complete(ev.entity_id, {position}, ev.attrs, line);
          break;
        case EntityEvent::Kind::kClose: {
          // Innermost open bracket of the same entity and subspan marker.
          auto it = std::find_if(open.rbegin(), open.rend(),
                                 [&](const OpenBracket& ob) {
                                   return ob.eid == ev.entity_id &&
                                          ob.part_k == ev.part_k &&
                                          ob.part_n == ev.part_n;
                                 });
          if (it == open.rend())
            throw ConlluError(line, "unmatched closing bracket for " +
                                        ev.entity_id);
          OpenBracket ob = *it;
          open.erase(std::next(it).base());
          std::vector<int> positions;
          for (int p = ob.start; p <= position; p++) positions.push_back(p);
          if (ev.part_n > 0)
            feed_part(ev, std::move(positions), ob.attrs, ob.line);
          else
            complete(ob.eid, std::move(positions), ob.attrs, ob.line);
          break;
        }
      }
    }
  }

  Document finish() {
    if (!open.empty())
      throw ConlluError(open.back().line,
                        "mention bracket (" + open.back().eid + " never closed");
    if (!parts.empty())
      throw ConlluError(parts.begin()->second.line,
                        "discontinuous mention of " + parts.begin()->first +
                            " is missing parts");
    doc.rebuild_index();

    // Structural validity first: mention resolution walks head chains.
    ValidationReport structure = validate_document(doc);
    if (!structure.ok())
      throw ConlluError(first_line, doc.doc_id + ": " + structure.errors[0]);

    std::vector<std::string> entity_order;
    std::map<std::string, Entity> by_id;
    for (RawMention& rm : mentions) {
      std::sort(rm.positions.begin(), rm.positions.end());
      for (size_t i = 1; i < rm.positions.size(); i++)
        if (rm.positions[i] == rm.positions[i - 1])
          throw ConlluError(rm.line, "discontinuous parts of " + rm.eid +
                                         " overlap");
      Mention m;
      for (int p : rm.positions) m.nodes.push_back(doc.nodes[p].id);
      auto [head_k, rest] = take_head_field(rm.attrs);
      if (head_k > static_cast<int>(m.nodes.size()))
        throw ConlluError(rm.line, "head index " + std::to_string(head_k) +
                                       " exceeds mention length");
      m.head = head_k > 0 ? m.nodes[head_k - 1] : select_head(doc, m.nodes);
      m.attrs = std::move(rest);
      auto [it, inserted] = by_id.try_emplace(rm.eid, Entity{rm.eid, {}});
      if (inserted) entity_order.push_back(rm.eid);
      it->second.mentions.push_back(std::move(m));
    }
    for (const std::string& eid : entity_order)
      doc.entities.push_back(std::move(by_id[eid]));
    canonicalize_entities(doc);

    ValidationReport full = validate_document(doc);
    if (!full.ok())
      throw ConlluError(first_line, doc.doc_id + ": " + full.errors[0]);
    return std::move(doc);
  }
};

// Parses the MISC column into the Entity attribute value (empty when absent)
// and the remaining attributes rejoined with '|' ("_" when none).
std::pair<std::string, std::string> split_misc(const std::string& misc,
                                               int line) {
  if (misc == "_" || misc.empty()) return {"", "_"};
  std::string entity;
  std::vector<std::string> rest;
  for (const std::string& field : split(misc, '|')) {
    if (field.rfind("Entity=", 0) == 0) {
      if (!entity.empty())
        throw ConlluError(line, "MISC has two Entity attributes");
      entity = field.substr(7);
    } else {
      rest.push_back(field);
    }
  }
  std::string joined;
  for (size_t i = 0; i < rest.size(); i++)
    joined += (i ? "|" : "") + rest[i];
  return {entity, joined.empty() ? "_" : joined};
}

// Parses the first "h:rel" pair of a DEPS column for an empty node.
std::pair<NodeId, std::string> deps_head(const std::string& deps, int sentence,
                                         int line) {
  if (deps == "_" || deps.empty()) return {root_of(sentence), "dep"};
  std::string first = split(deps, '|')[0];
  size_t colon = first.find(':');
  if (colon == std::string::npos || colon == 0)
    throw ConlluError(line, "malformed DEPS \"" + deps + "\"");
  std::string hid = first.substr(0, colon);
  std::string rel = first.substr(colon + 1);
  if (rel.empty()) throw ConlluError(line, "empty deprel in DEPS");
  NodeId head{sentence, 0, 0};
  size_t dot = hid.find('.');
  if (dot == std::string::npos) {
    if (!is_digits(hid)) throw ConlluError(line, "malformed DEPS head " + hid);
    head.token = std::stoi(hid);
  } else {
    std::string t = hid.substr(0, dot), k = hid.substr(dot + 1);
    if (!is_digits(t) || !is_digits(k))
      throw ConlluError(line, "malformed DEPS head " + hid);
    head.token = std::stoi(t);
    head.empty_suffix = std::stoi(k);
  }
  return {head, rel};
}

}  // namespace

std::vector<Document> parse_corpus(const std::string& text) {
  std::vector<Document> docs;
  Builder builder;
  bool builder_live = false;  // saw a newdoc line or token content
  bool in_sentence = false;
  int sentence = -1;
  int last_word = 0;
  int last_empty = 0;

  auto finish_builder = [&]() {
    if (builder_live) docs.push_back(builder.finish());
    builder = Builder{};
    in_sentence = false;
    sentence = -1;
  };

  std::vector<std::string> lines = split(text, '\n');
  // A trailing newline yields one final empty fragment, not an extra line.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();

  for (size_t li = 0; li < lines.size(); li++) {
    const int line_no = static_cast<int>(li) + 1;
    std::string line = lines[li];
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line.empty() || line.find_first_not_of(" \t") == std::string::npos) {
      in_sentence = false;
      continue;
    }

    if (line[0] == '#') {
      std::string body = trim(line.substr(1));
      if (body == "newdoc" || body.rfind("newdoc ", 0) == 0) {
        if (in_sentence)
          throw ConlluError(line_no, "newdoc inside a sentence");
        finish_builder();
        builder_live = true;
        builder.first_line = line_no;
        std::string rest = trim(body.substr(6));
        if (!rest.empty()) {
          size_t eq = rest.find('=');
          if (eq == std::string::npos || trim(rest.substr(0, eq)) != "id")
            throw ConlluError(line_no, "malformed newdoc comment");
          builder.doc.doc_id = trim(rest.substr(eq + 1));
        }
      }
      continue;  // other comments carry no structure we keep
    }

    // Token line.
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 10)
      throw ConlluError(line_no, "expected 10 tab-separated columns, got " +
                                     std::to_string(cols.size()));
    if (!builder_live) {
      builder_live = true;
      builder.first_line = line_no;
    }
    if (!in_sentence) {
      in_sentence = true;
      sentence++;
      builder.doc.sentence_begin.push_back(
          static_cast<int>(builder.doc.nodes.size()));
      last_word = 0;
      last_empty = 0;
    }

    const std::string& id_col = cols[0];
    size_t dash = id_col.find('-');
    size_t dot = id_col.find('.');

    if (dash != std::string::npos) {
      // Multiword token range: preserved verbatim, carries no node.
      std::string from = id_col.substr(0, dash), to = id_col.substr(dash + 1);
      if (!is_digits(from) || !is_digits(to))
        throw ConlluError(line_no, "malformed token id \"" + id_col + "\"");
      if (cols[9].find("Entity=") != std::string::npos)
        throw ConlluError(line_no, "Entity annotation on a multiword token");
      builder.doc.mwt_lines.emplace_back(
          NodeId{sentence, std::stoi(from), 0}, line);
      continue;
    }

    Node node;
    node.id.sentence = sentence;
    if (dot != std::string::npos) {
      std::string t = id_col.substr(0, dot), k = id_col.substr(dot + 1);
      if (!is_digits(t) || !is_digits(k))
        throw ConlluError(line_no, "malformed token id \"" + id_col + "\"");
      node.id.token = std::stoi(t);
      node.id.empty_suffix = std::stoi(k);
      node.is_empty = true;
      if (node.id.token != last_word)
        throw ConlluError(line_no, "empty node " + id_col +
                                       " not anchored at the preceding word");
      if (node.id.empty_suffix != last_empty + 1)
        throw ConlluError(line_no, "empty node suffix must increase by 1");
      last_empty = node.id.empty_suffix;
      if (cols[6] != "_")
        throw ConlluError(line_no, "empty node must have HEAD \"_\"");
    } else {
      if (!is_digits(id_col))
        throw ConlluError(line_no, "malformed token id \"" + id_col + "\"");
      node.id.token = std::stoi(id_col);
      if (node.id.token != last_word + 1)
        throw ConlluError(line_no, "word id " + id_col +
                                       " breaks the 1..n sequence");
      last_word = node.id.token;
      last_empty = 0;
      if (!is_digits(cols[6]))
        throw ConlluError(line_no, "malformed HEAD \"" + cols[6] + "\"");
    }

    node.form = cols[1];
    node.lemma = cols[2];
    node.upos = cols[3];
    node.xpos = cols[4];
    node.feats = cols[5];
    node.deps = cols[8];
    if (node.is_empty) {
      auto [head, rel] = deps_head(node.deps, sentence, line_no);
      node.head = head;
      node.deprel = rel;
    } else {
      node.head = NodeId{sentence, std::stoi(cols[6]), 0};
      node.deprel = cols[7];
    }

    auto [entity_value, misc_rest] = split_misc(cols[9], line_no);
    node.misc = misc_rest;
    int position = static_cast<int>(builder.doc.nodes.size());
    builder.doc.nodes.push_back(std::move(node));

    if (!entity_value.empty()) {
      std::vector<EntityEvent> events;
      try {
        events = parse_entity_events(entity_value);
      } catch (const ConlluError& e) {
        throw ConlluError(line_no, e.what());
      }
      builder.apply_events(events, position, line_no);
    }
  }
  finish_builder();
  return docs;
}

namespace {

struct WriteEvent {
  EntityEvent ev;
  int span_start = 0, span_end = 0;  // node positions of the part
};

// Canonical order of simultaneous events: opens by (end desc, id, part),
// then singles by (id, part), then closes by (start desc, id desc, part
// desc). Closing order mirrors opening order so same-entity nesting pairs
// LIFO on re-parse.
void sort_events(std::vector<WriteEvent>& opens,
                 std::vector<WriteEvent>& singles,
                 std::vector<WriteEvent>& closes) {
  std::sort(opens.begin(), opens.end(),
            [](const WriteEvent& a, const WriteEvent& b) {
              return std::tuple(-a.span_end, a.ev.entity_id, a.ev.part_k) <
                     std::tuple(-b.span_end, b.ev.entity_id, b.ev.part_k);
            });
  std::sort(singles.begin(), singles.end(),
            [](const WriteEvent& a, const WriteEvent& b) {
              return std::tuple(a.ev.entity_id, a.ev.part_k) <
                     std::tuple(b.ev.entity_id, b.ev.part_k);
            });
  std::sort(closes.begin(), closes.end(),
            [](const WriteEvent& a, const WriteEvent& b) {
              return std::tuple(-a.span_start, b.ev.entity_id, b.ev.part_k) <
                     std::tuple(-b.span_start, a.ev.entity_id, a.ev.part_k);
            });
}

void write_document(std::string& out, const Document& input) {
  Document doc = input;  // canonical order without mutating the caller's copy
  doc.rebuild_index();
  canonicalize_entities(doc);

  // Entity events per node position.
  std::map<int, std::vector<WriteEvent>> opens_at, singles_at, closes_at;
  for (const Entity& e : doc.entities) {
    for (const Mention& m : e.mentions) {
      std::vector<int> positions;
      positions.reserve(m.nodes.size());
      for (const NodeId& id : m.nodes) {
        int p = doc.index_of(id);
        if (p < 0)
          throw std::invalid_argument("mention of " + e.id +
                                      " references node " + id.to_string() +
                                      " missing from document " + doc.doc_id);
        positions.push_back(p);
      }
      // Maximal contiguous runs of node positions = mention parts.
      std::vector<std::pair<int, int>> runs;
      for (size_t i = 0; i < positions.size(); i++) {
        if (!runs.empty() && positions[i] == runs.back().second + 1)
          runs.back().second = positions[i];
        else
          runs.emplace_back(positions[i], positions[i]);
      }
      int n_parts = static_cast<int>(runs.size());

      std::string attrs;
      NodeId default_head = select_head(doc, m.nodes);
      if (m.head != default_head) {
        auto it = std::find(m.nodes.begin(), m.nodes.end(), m.head);
        attrs = "head:" + std::to_string(it - m.nodes.begin() + 1);
      }
      if (!m.attrs.empty()) attrs += (attrs.empty() ? "" : "-") + m.attrs;

      for (int k = 1; k <= n_parts; k++) {
        auto [s, t] = runs[k - 1];
        WriteEvent we;
        we.span_start = s;
        we.span_end = t;
        we.ev.entity_id = e.id;
        if (n_parts > 1) {
          we.ev.part_k = k;
          we.ev.part_n = n_parts;
        }
        if (k == 1) we.ev.attrs = attrs;
        if (s == t) {
          we.ev.kind = EntityEvent::Kind::kSingle;
          singles_at[s].push_back(we);
        } else {
          we.ev.kind = EntityEvent::Kind::kOpen;
          opens_at[s].push_back(we);
          WriteEvent wc = we;
          wc.ev.kind = EntityEvent::Kind::kClose;
          wc.ev.attrs.clear();
          closes_at[t].push_back(wc);
        }
      }
    }
  }

  // MWT lines grouped by anchor id.
  std::map<NodeId, std::vector<std::string>> mwt;
  for (const auto& [id, raw] : doc.mwt_lines) mwt[id].push_back(raw);

  if (doc.doc_id.empty())
    out += "# newdoc\n";
  else
    out += "# newdoc id = " + doc.doc_id + "\n";

  for (int s = 0; s < doc.num_sentences(); s++) {
    out += "# sent_id = " + std::to_string(s + 1) + "\n";
    auto [begin, end] = doc.sentence_range(s);
    for (int p = begin; p < end; p++) {
      const Node& n = doc.nodes[p];
      if (auto it = mwt.find(n.id); it != mwt.end())
        for (const std::string& raw : it->second) out += raw + "\n";

      std::vector<WriteEvent> empty_list;
      auto events_of = [&](std::map<int, std::vector<WriteEvent>>& m2)
          -> std::vector<WriteEvent>& {
        auto it = m2.find(p);
        return it == m2.end() ? empty_list : it->second;
      };
      std::vector<WriteEvent>& opens = events_of(opens_at);
      std::vector<WriteEvent>& singles = events_of(singles_at);
      std::vector<WriteEvent>& closes = events_of(closes_at);
      sort_events(opens, singles, closes);
      std::vector<EntityEvent> events;
      for (const WriteEvent& we : opens) events.push_back(we.ev);
      for (const WriteEvent& we : singles) events.push_back(we.ev);
      for (const WriteEvent& we : closes) events.push_back(we.ev);

      std::string misc;
      if (!events.empty()) {
        misc = "Entity=" + format_entity_events(events);
        if (!n.misc.empty() && n.misc != "_") misc += "|" + n.misc;
      } else {
        misc = n.misc.empty() ? "_" : n.misc;
      }

      std::string head_col, deprel_col, deps_col = n.deps;
      if (n.is_empty) {
        head_col = "_";
        deprel_col = "_";
        if (deps_col.empty() || deps_col == "_") {
          // Hand-built documents may leave DEPS unset; synthesize the
          // primary parent so head information survives the round trip.
          std::string hid =
              n.head.is_root() ? "0" : n.head.to_string();
          deps_col = hid + ":" + n.deprel;
        }
      } else {
        head_col = std::to_string(n.head.token);
        deprel_col = n.deprel;
        if (deps_col.empty()) deps_col = "_";
      }

      out += n.id.to_string() + "\t" + n.form + "\t" + n.lemma + "\t" +
             n.upos + "\t" + n.xpos + "\t" + n.feats + "\t" + head_col +
             "\t" + deprel_col + "\t" + deps_col + "\t" + misc + "\n";
    }
    out += "\n";
  }
}

}  // namespace

std::string write_corpus(const std::vector<Document>& docs) {
  std::string out;
  for (const Document& d : docs) write_document(out, d);
  return out;
}

}  // namespace coref
