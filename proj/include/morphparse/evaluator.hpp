#pragma once

#include <array>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "morphparse/conllu.hpp"

namespace morphparse {
namespace eval {

/// Relations whose dependents are treated as function words: excluded from
/// the content-word metrics.
inline const std::set<std::string>& functional_relations() {
  static const std::set<std::string> set{"aux", "case", "cc",  "clf",
                                         "cop", "det",  "mark", "punct"};
  return set;
}

/// Morphological features compared by the morphology-aware metric; treebank
/// specific features outside this list are ignored there.
inline const std::set<std::string>& universal_features() {
  static const std::set<std::string> set{
      "PronType", "NumType", "Poss",   "Reflex",   "Foreign", "Abbr",   "Gender",
      "Animacy",  "Number",  "Case",   "Definite", "Degree",  "VerbForm", "Mood",
      "Tense",    "Aspect",  "Voice",  "Evident",  "Polarity", "Person", "Polite"};
  return set;
}

/// Language-specific subtype is everything after the first ":".
inline std::string deprel_universal(const std::string& deprel) {
  const std::size_t colon = deprel.find(':');
  return colon == std::string::npos ? deprel : deprel.substr(0, colon);
}

inline bool is_content(const std::string& deprel) {
  return functional_relations().count(deprel_universal(deprel)) == 0;
}

/// Canonical key over only the universal feature subset.
inline std::string universal_feats_key(const conllu::Token& t) {
  std::string out;
  for (const auto& [cat, val] : t.feats) {  // already canonically sorted
    if (!universal_features().count(cat)) continue;
    if (!out.empty()) out += '|';
    out += cat;
    out += '=';
    out += val;
  }
  return out;
}

struct F1 {
  double precision = 0, recall = 0, f1 = 0;
  bool available = true;  // false when the gold column is entirely unannotated
};

/// Percent-scale F1 from raw counts; all-zero denominators yield zeros.
inline F1 f1_from_counts(std::size_t pred, std::size_t gold, std::size_t match) {
  F1 r;
  r.precision = pred == 0 ? 0.0 : 100.0 * static_cast<double>(match) / pred;
  r.recall = gold == 0 ? 0.0 : 100.0 * static_cast<double>(match) / gold;
  r.f1 = r.precision + r.recall == 0 ? 0.0
                                     : 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

struct Report {
  F1 upos, xpos, ufeats, lemma, uas, las, clas, mlas, blex;
  std::size_t sentences = 0, tokens = 0;

  struct Row {
    const char* name;
    const F1* value;
  };
  std::array<Row, 9> rows() const {
    return {{{"UPOS", &upos},
             {"XPOS", &xpos},
             {"UFeats", &ufeats},
             {"Lemma", &lemma},
             {"UAS", &uas},
             {"LAS", &las},
             {"CLAS", &clas},
             {"MLAS", &mlas},
             {"BLEX", &blex}}};
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "Metric     | Precision |    Recall |  F1 Score\n";
    out << "-----------+-----------+-----------+----------\n";
    char buf[64];
    for (const Row& row : rows()) {
      if (row.value->available) {
        std::snprintf(buf, sizeof(buf), "%-10s | %9.2f | %9.2f | %9.2f\n", row.name,
                      row.value->precision, row.value->recall, row.value->f1);
      } else {
        std::snprintf(buf, sizeof(buf), "%-10s | %9s | %9s | %9s\n", row.name, "NA", "NA", "NA");
      }
      out << buf;
    }
    return out.str();
  }

  /// key=value block, one F1 per line, parseable back by parse_machine.
  std::string to_machine() const {
    std::ostringstream out;
    char buf[32];
    for (const Row& row : rows()) {
      if (row.value->available) {
        std::snprintf(buf, sizeof(buf), "%.2f", row.value->f1);
        out << row.name << '=' << buf << '\n';
      } else {
        out << row.name << "=NA\n";
      }
    }
    return out.str();
  }
};

/// Reads a to_machine block back into name -> F1 (NaN for NA).
inline std::vector<std::pair<std::string, double>> parse_machine(const std::string& block) {
  std::vector<std::pair<std::string, double>> out;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "malformed metric line: ", line);
    const std::string value = line.substr(eq + 1);
    out.emplace_back(line.substr(0, eq),
                     value == "NA" ? std::numeric_limits<double>::quiet_NaN()
                                   : std::stod(value));
  }
  return out;
}

namespace detail {

struct Counts {
  std::size_t pred = 0, gold = 0, match = 0;
  bool gold_annotated = false;

  void add(bool pred_in, bool gold_in, bool matched) {
    pred += pred_in;
    gold += gold_in;
    match += matched;
    gold_annotated = gold_annotated || gold_in;
  }

  F1 result() const {
    F1 r = f1_from_counts(pred, gold, match);
    r.available = gold_annotated;
    return r;
  }
};

}  // namespace detail

/// Scores a prediction against gold under shared tokenization. Both files
/// must have identical sentence and token counts; anything else means the
/// inputs are misaligned and is reported as an error, not a zero score.
inline Report evaluate(const conllu::Treebank& gold, const conllu::Treebank& pred) {
  require(gold.sentences.size() == pred.sentences.size(), "sentence count mismatch: gold has ",
          gold.sentences.size(), ", prediction has ", pred.sentences.size());
  detail::Counts upos, xpos, ufeats, lemma, uas, las, clas, mlas, blex;
  Report rep;

  for (std::size_t si = 0; si < gold.sentences.size(); ++si) {
    const auto& gs = gold.sentences[si].tokens;
    const auto& ps = pred.sentences[si].tokens;
    require(gs.size() == ps.size(), "token count mismatch in sentence ", si + 1, ": gold has ",
            gs.size(), ", prediction has ", ps.size());
    rep.sentences += 1;
    rep.tokens += gs.size();

    for (std::size_t i = 0; i < gs.size(); ++i) {
      const conllu::Token& g = gs[i];
      const conllu::Token& p = ps[i];

      upos.add(g.upos != "_", g.upos != "_", g.upos != "_" && g.upos == p.upos);
      xpos.add(g.xpos != "_", g.xpos != "_", g.xpos != "_" && g.xpos == p.xpos);
      ufeats.add(!g.feats.empty(), !g.feats.empty(),
                 !g.feats.empty() && conllu::feats_key(g) == conllu::feats_key(p));
      lemma.add(g.lemma != "_", g.lemma != "_", g.lemma != "_" && g.lemma == p.lemma);

      const bool has_head = g.head >= 0;
      const bool head_ok = has_head && g.head == p.head;
      const bool rel_ok = deprel_universal(g.deprel) == deprel_universal(p.deprel);
      uas.add(has_head, has_head, head_ok);
      las.add(has_head, has_head, head_ok && rel_ok);

      // content-word metrics count each side by its own labeling
      const bool gold_content = has_head && is_content(g.deprel);
      const bool pred_content = has_head && is_content(p.deprel);
      const bool attach_ok = gold_content && pred_content && head_ok && rel_ok;
      clas.add(pred_content, gold_content, attach_ok);
      mlas.add(pred_content, gold_content,
               attach_ok && g.upos == p.upos &&
                   universal_feats_key(g) == universal_feats_key(p));
      blex.add(pred_content, gold_content, attach_ok && g.lemma == p.lemma);
    }
  }

  rep.upos = upos.result();
  rep.xpos = xpos.result();
  rep.ufeats = ufeats.result();
  rep.lemma = lemma.result();
  rep.uas = uas.result();
  rep.las = las.result();
  rep.clas = clas.result();
  rep.mlas = mlas.result();
  rep.blex = blex.result();
  return rep;
}

}  // namespace eval
}  // namespace morphparse
