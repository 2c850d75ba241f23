#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "morphparse/common.hpp"
#include "morphparse/log.hpp"

namespace morphparse {
namespace conllu {

/// One syntactic word. `head` uses the file convention: 0 is the artificial
/// root, -1 stands for an unannotated "_" column.
struct Token {
  int id = 0;  // 1-based position within the sentence
  std::string form = "_";
  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::vector<std::pair<std::string, std::string>> feats;  // sorted, see canonical_feats
  int head = -1;
  std::string deprel = "_";
  std::string deps = "_";
  std::string misc = "_";

  // filled by the embedding exporter, never written to the ten columns
  std::map<std::string, std::vector<float>> embeddings;
};

/// Multiword-token ranges and empty nodes pass through verbatim. `anchor`
/// counts the real tokens preceding the row, which pins its position on
/// output.
struct ExtraRow {
  std::size_t anchor = 0;
  std::string line;
};

struct Sentence {
  std::vector<std::string> comments;
  std::vector<Token> tokens;
  std::vector<ExtraRow> extras;

  std::size_t size() const { return tokens.size(); }
};

struct Treebank {
  std::vector<Sentence> sentences;
  std::string source;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
  }
};

struct TreeDiagnosis {
  bool valid = false;
  int root_count = 0;
  std::vector<int> cycle;  // 1-based ids, empty when acyclic
  std::string message;
};

namespace detail {

inline std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

inline std::string head_range_message(const Token& t) {
  return "token " + std::to_string(t.id) + " has head " + std::to_string(t.head) +
         " outside the sentence";
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// FEATS column parsing. Canonical order sorts categories case-insensitively,
/// with the exact spelling as a tie break; a bare attribute without "=" keeps
/// an empty value and is rendered back without one.
inline void sort_feats(std::vector<std::pair<std::string, std::string>>& feats) {
  std::sort(feats.begin(), feats.end(), [](const auto& a, const auto& b) {
    const std::string la = detail::lower_ascii(a.first), lb = detail::lower_ascii(b.first);
    if (la != lb) return la < lb;
    return a.first < b.first;
  });
}

inline std::vector<std::pair<std::string, std::string>> parse_feats(const std::string& col) {
  std::vector<std::pair<std::string, std::string>> feats;
  if (col == "_" || col.empty()) return feats;
  for (const std::string& item : detail::split(col, '|')) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      feats.emplace_back(item, "");
    else
      feats.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  sort_feats(feats);
  return feats;
}

inline std::string render_feats(const std::vector<std::pair<std::string, std::string>>& feats) {
  if (feats.empty()) return "_";
  std::string out;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (i) out += '|';
    out += feats[i].first;
    if (!feats[i].second.empty()) {
      out += '=';
      out += feats[i].second;
    }
  }
  return out;
}

/// Single string key for a full feature bundle, e.g. "Case=Nom|Number=Sing".
inline std::string feats_key(const Token& t) { return render_feats(t.feats); }

/// Reports whether the head annotation forms a tree: every head in range,
/// exactly one token attached to the artificial root, no cycles.
inline TreeDiagnosis validate_tree(const Sentence& s) {
  TreeDiagnosis d;
  const int n = static_cast<int>(s.tokens.size());
  for (const Token& t : s.tokens) {
    if (t.head < 0 || t.head > n) {
      d.message = detail::head_range_message(t);
      return d;
    }
    if (t.head == t.id) {
      d.message = "token " + std::to_string(t.id) + " is its own head";
      return d;
    }
    if (t.head == 0) ++d.root_count;
  }
  if (d.root_count != 1) {
    d.message = std::to_string(d.root_count) + " tokens attached to root";
    return d;
  }
  // walk up from each token; a repeat before reaching root is a cycle
  std::vector<int> state(n + 1, 0);  // 0 unseen, 1 on path, 2 done
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    int v = start;
    std::vector<int> path;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = s.tokens[v - 1].head;
    }
    if (state[v] == 1) {
      // v is on the current path: extract the loop
      auto it = std::find(path.begin(), path.end(), v);
      d.cycle.assign(it, path.end());
      d.message = "cycle through token " + std::to_string(v);
      for (int u : path) state[u] = 2;
      return d;
    }
    for (int u : path) state[u] = 2;
  }
  d.valid = true;
  return d;
}

enum class Format { autodetect, conllu, conllx };

namespace detail {

// CoNLL-X puts PHEAD (an integer or "_") where CoNLL-U keeps DEPS; a bare
// integer in column 9 can only be CoNLL-X.
inline bool looks_like_conllx(const std::vector<std::vector<std::string>>& rows) {
  for (const auto& cols : rows)
    if (cols.size() == 10 && is_integer(cols[8])) return true;
  return false;
}

struct ParseState {
  Treebank tb;
  Sentence current;
  bool strict = true;
  bool conllx = false;
  std::size_t line_no = 0;
  bool skip_sentence = false;

  void flush() {
    if (skip_sentence) {
      log_warn("skipping malformed sentence ending at line ", line_no);
      current = Sentence{};
      skip_sentence = false;
      return;
    }
    if (current.tokens.empty() && current.comments.empty() && current.extras.empty()) {
      current = Sentence{};
      return;
    }
    std::string problem = finish_checks();
    if (!problem.empty()) {
      if (strict) fail("line ", line_no, ": ", problem);
      log_warn("skipping sentence ending at line ", line_no, ": ", problem);
      current = Sentence{};
      return;
    }
    tb.sentences.push_back(std::move(current));
    current = Sentence{};
  }

  std::string finish_checks() const {
    if (current.tokens.empty()) return "sentence has comments but no tokens";
    const int n = static_cast<int>(current.tokens.size());
    for (int i = 0; i < n; ++i)
      if (current.tokens[i].id != i + 1)
        return "token ids are not contiguous from 1 (saw " +
               std::to_string(current.tokens[i].id) + " at position " + std::to_string(i + 1) +
               ")";
    bool annotated = true;
    for (const Token& t : current.tokens) {
      if (t.head > n) return head_range_message(t);
      if (t.head == t.id) return "token " + std::to_string(t.id) + " is its own head";
      if (t.head < 0) annotated = false;
    }
    if (annotated) {
      TreeDiagnosis d = validate_tree(current);
      if (!d.valid) return "heads do not form a tree: " + d.message;
    }
    return "";
  }

  void add_row(const std::vector<std::string>& cols) {
    if (skip_sentence) return;
    auto problem = [&](const std::string& msg) {
      if (strict) fail("line ", line_no, ": ", msg);
      log_warn("line ", line_no, ": ", msg);
      skip_sentence = true;
    };
    if (cols.size() != 10) {
      problem("expected 10 tab-separated columns, got " + std::to_string(cols.size()));
      return;
    }
    for (const std::string& c : cols) {
      if (c.empty()) {
        problem("empty column (use \"_\")");
        return;
      }
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) {
      // multiword range or empty node: opaque pass-through
      std::string line = cols[0];
      for (std::size_t i = 1; i < 10; ++i) {
        line += '\t';
        line += cols[i];
      }
      current.extras.push_back({current.tokens.size(), std::move(line)});
      return;
    }
    if (!is_integer(id)) {
      problem("token id \"" + id + "\" is not an integer");
      return;
    }
    Token t;
    t.id = std::stoi(id);
    t.form = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];  // CPOSTAG and UPOS share the slot across the two formats
    t.xpos = cols[4];
    t.feats = parse_feats(cols[5]);
    if (cols[6] == "_") {
      t.head = -1;
    } else if (is_integer(cols[6])) {
      t.head = std::stoi(cols[6]);
    } else {
      problem("head \"" + cols[6] + "\" is not an integer");
      return;
    }
    t.deprel = cols[7];
    if (conllx) {
      t.deps = "_";  // PHEAD/PDEPREL carry no information the model uses
      t.misc = "_";
    } else {
      t.deps = cols[8];
      t.misc = cols[9];
    }
    current.tokens.push_back(std::move(t));
  }
};

}  // namespace detail

inline Treebank read_conllu_stream(std::istream& in, const std::string& source, bool strict,
                                   Format format = Format::autodetect) {
  // two passes when auto-detecting: the format decides column meanings
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') {
      if (strict) fail(source, ": carriage return line endings are not supported");
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }

  bool conllx = format == Format::conllx;
  if (format == Format::autodetect) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& l : lines)
      if (!l.empty() && l[0] != '#') rows.push_back(detail::split(l, '\t'));
    conllx = detail::looks_like_conllx(rows);
    if (conllx) log_debug(source, ": legacy tab format detected, remapping columns");
  }

  detail::ParseState st;
  st.strict = strict;
  st.conllx = conllx;
  st.tb.source = source;
  for (const std::string& line : lines) {
    ++st.line_no;
    if (line.empty()) {
      st.flush();
    } else if (line[0] == '#') {
      if (!st.skip_sentence) st.current.comments.push_back(line);
    } else {
      st.add_row(detail::split(line, '\t'));
    }
  }
  st.flush();
  if (strict) require(!st.tb.sentences.empty(), source, ": contains no sentences");
  return std::move(st.tb);
}

inline Treebank read_conllu(const std::string& path, bool strict = true,
                            Format format = Format::autodetect) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  return read_conllu_stream(in, path, strict, format);
}

inline void write_conllu_stream(std::ostream& out, const Treebank& tb) {
  for (const Sentence& s : tb.sentences) {
    for (const std::string& c : s.comments) out << c << '\n';
    std::size_t extra = 0;
    for (std::size_t i = 0; i <= s.tokens.size(); ++i) {
      while (extra < s.extras.size() && s.extras[extra].anchor == i)
        out << s.extras[extra++].line << '\n';
      if (i == s.tokens.size()) break;
      const Token& t = s.tokens[i];
      out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t' << t.xpos << '\t'
          << render_feats(t.feats) << '\t';
      if (t.head < 0)
        out << '_';
      else
        out << t.head;
      out << '\t' << t.deprel << '\t' << t.deps << '\t' << t.misc << '\n';
    }
    out << '\n';
  }
}

inline void write_conllu(const Treebank& tb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  write_conllu_stream(out, tb);
  out.flush();
  require(out.good(), "write failed for ", path);
}

/// Whitespace tokenisation with a trailing-punctuation peel, one sentence per
/// input line. A fallback for running the pipeline on raw text.
inline Treebank read_raw_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  Treebank tb;
  tb.source = path;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    Sentence sent;
    std::string w;
    auto push = [&](std::string form) {
      Token t;
      t.id = static_cast<int>(sent.tokens.size()) + 1;
      t.form = std::move(form);
      sent.tokens.push_back(std::move(t));
    };
    while (words >> w) {
      std::string tail;
      while (w.size() > 1) {
        const char c = w.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
          tail.insert(tail.begin(), c);
          w.pop_back();
        } else {
          break;
        }
      }
      push(w);
      for (char c : tail) push(std::string(1, c));
    }
    if (!sent.tokens.empty()) tb.sentences.push_back(std::move(sent));
  }
  return tb;
}

}  // namespace conllu
}  // namespace morphparse
