#pragma once

#include <string>
#include <vector>

#include "morphparse/conllu.hpp"
#include "morphparse/rng.hpp"

namespace morphparse {
namespace synthetic {

/// A tiny fully regular agreement language for training sanity checks.
/// Every word marks number with a suffix, adjectives and determiners agree
/// with their noun, the verb agrees with the subject:
///   noun  stem+a / stem+y   lemma stem+a    (kota, koty -> kota)
///   adj   stem+a / stem+e   lemma stem+a    (mala, male -> mala)
///   verb  stem+i / stem+o   lemma stem+ic   (goni, gono -> gonic)
///   det   ta / te           lemma ta
/// Template: [det] adj* noun verb [[det] adj* noun] "."
/// with nsubj/obj/det/amod/punct/root relations, verb at the root.
namespace detail {

inline const std::vector<std::string>& noun_stems() {
  static const std::vector<std::string> v{"kot",  "dom",  "las",  "ryb",  "mysz", "ptak",
                                          "wilk", "lis",  "dab",  "kwiat", "ser",  "nos"};
  return v;
}
inline const std::vector<std::string>& adj_stems() {
  static const std::vector<std::string> v{"mal",    "star",  "now",   "zielon",
                                          "bial",   "czarn", "wesol", "smutn"};
  return v;
}
inline const std::vector<std::string>& verb_stems() {
  static const std::vector<std::string> v{"gon", "lub", "widz", "nios", "kochaj", "slysz"};
  return v;
}

struct Word {
  std::string form, lemma, upos, xpos;
  bool plural = false;
  bool inflected = true;  // punctuation carries no feats
  std::string deprel;
  int head = 0;  // filled by the sentence builder
};

inline Word noun(Rng& rng, bool plural) {
  const std::string& stem = noun_stems()[rng.uniform_index(noun_stems().size())];
  return {stem + (plural ? "y" : "a"), stem + "a", "NOUN", plural ? "N2" : "N1", plural, true,
          "", 0};
}
inline Word adj(Rng& rng, bool plural) {
  const std::string& stem = adj_stems()[rng.uniform_index(adj_stems().size())];
  return {stem + (plural ? "e" : "a"), stem + "a", "ADJ", plural ? "A2" : "A1", plural, true,
          "", 0};
}
inline Word verb(Rng& rng, bool plural) {
  const std::string& stem = verb_stems()[rng.uniform_index(verb_stems().size())];
  return {stem + (plural ? "o" : "i"), stem + "ic", "VERB", plural ? "V2" : "V1", plural, true,
          "", 0};
}
inline Word det(bool plural) {
  return {plural ? std::string("te") : std::string("ta"), "ta", "DET", plural ? "D2" : "D1",
          plural, true, "", 0};
}

/// Appends one noun phrase, returns the index (0-based) of its head noun.
inline std::size_t noun_phrase(Rng& rng, std::vector<Word>& words, bool plural) {
  const bool with_det = rng.uniform() < 0.4;
  std::size_t n_adj = 0;
  while (n_adj < 2 && rng.uniform() < 0.35) ++n_adj;
  const std::size_t first = words.size();
  if (with_det) words.push_back(det(plural));
  for (std::size_t i = 0; i < n_adj; ++i) words.push_back(adj(rng, plural));
  words.push_back(noun(rng, plural));
  const std::size_t head = words.size() - 1;
  for (std::size_t i = first; i < head; ++i) {
    words[i].head = static_cast<int>(head) + 1;  // 1-based
    words[i].deprel = words[i].upos == "DET" ? "det" : "amod";
  }
  return head;
}

}  // namespace detail

inline conllu::Sentence make_sentence(Rng& rng, std::size_t index) {
  std::vector<detail::Word> words;
  const bool subj_plural = rng.uniform() < 0.5;
  const std::size_t subj = detail::noun_phrase(rng, words, subj_plural);
  words.push_back(detail::verb(rng, subj_plural));
  const std::size_t verb_at = words.size() - 1;
  words[subj].head = static_cast<int>(verb_at) + 1;
  words[subj].deprel = "nsubj";
  if (rng.uniform() < 0.7) {
    const std::size_t obj = detail::noun_phrase(rng, words, rng.uniform() < 0.5);
    words[obj].head = static_cast<int>(verb_at) + 1;
    words[obj].deprel = "obj";
  }
  words.push_back({".", ".", "PUNCT", "PCT", false, false,
                   "punct", static_cast<int>(verb_at) + 1});
  words[verb_at].head = 0;
  words[verb_at].deprel = "root";

  conllu::Sentence s;
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const detail::Word& w = words[i];
    conllu::Token t;
    t.id = static_cast<int>(i) + 1;
    t.form = w.form;
    t.lemma = w.lemma;
    t.upos = w.upos;
    t.xpos = w.xpos;
    if (w.inflected) t.feats = {{"Number", w.plural ? "Plur" : "Sing"}};
    t.head = w.head;
    t.deprel = w.deprel;
    if (!text.empty() && w.upos != "PUNCT") text += ' ';
    text += w.form;
    s.tokens.push_back(std::move(t));
  }
  s.comments.push_back("# sent_id = synth-" + std::to_string(index));
  s.comments.push_back("# text = " + text);
  return s;
}

inline conllu::Treebank generate(std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  conllu::Treebank tb;
  tb.source = "synthetic";
  for (std::size_t i = 0; i < sentences; ++i)
    tb.sentences.push_back(make_sentence(rng, i + 1));
  return tb;
}

}  // namespace synthetic
}  // namespace morphparse
