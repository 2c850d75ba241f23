#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "morphparse/config.hpp"
#include "morphparse/conllu.hpp"
#include "morphparse/vocab.hpp"

namespace morphparse {

/// Every symbol table the model needs, built from training data only.
struct Vocabularies {
  // char tables share the PAD/UNK/BEGIN/END layout of CharVocab
  CharVocab form_chars;   // characters seen at least twice in training forms
  CharVocab lemma_chars;  // every character of training lemmata

  Vocab upos;    // target labels; no UNK (an unseen gold label aborts training)
  Vocab xpos;
  Vocab deprel;

  std::vector<std::string> feat_categories;  // sorted for determinism
  std::vector<Vocab> feat_values;            // per category; NA class = size(c)
  Vocab feat_pairs;                          // "Cat=Val" strings for the input channel

  // categorical input tables prepend UNK and EMPTY rows
  static constexpr int kInputUnk = 0;
  static constexpr int kInputEmpty = 1;
  static constexpr int kInputOffset = 2;

  int category_index(const std::string& cat) const {
    auto it = std::lower_bound(feat_categories.begin(), feat_categories.end(), cat);
    if (it == feat_categories.end() || *it != cat) return -1;
    return static_cast<int>(it - feat_categories.begin());
  }

  int na_class(std::size_t category) const {
    return static_cast<int>(feat_values[category].size());
  }

  void build(const conllu::Treebank& tb) {
    std::unordered_map<char32_t, std::size_t> form_char_freq;
    std::map<std::string, Vocab> cat_values;
    for (const auto& s : tb.sentences) {
      for (const auto& t : s.tokens) {
        for (char32_t c : utf8_decode(t.form, false)) ++form_char_freq[c];
        if (t.lemma != "_")
          for (char32_t c : utf8_decode(t.lemma, false)) lemma_chars.add(c);
        // "_" means unannotated in every label column, never a label
        if (t.upos != "_") upos.add(t.upos);
        if (t.xpos != "_") xpos.add(t.xpos);
        if (t.deprel != "_") deprel.add(t.deprel);
        for (const auto& [cat, val] : t.feats) {
          cat_values[cat].add(val);
          feat_pairs.add(cat + "=" + val);
        }
      }
    }
    // deterministic order: first-seen for chars, frequency filter applied on
    // a second pass so ids do not depend on map iteration order
    for (const auto& s : tb.sentences)
      for (const auto& t : s.tokens)
        for (char32_t c : utf8_decode(t.form, false))
          if (form_char_freq[c] >= 2) form_chars.add(c);

    for (auto& [cat, vocab] : cat_values) {
      feat_categories.push_back(cat);
      feat_values.push_back(std::move(vocab));
    }
    // std::map already iterates sorted; keep the explicit guarantee
    require(std::is_sorted(feat_categories.begin(), feat_categories.end()),
            "feature categories must be sorted");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["form_chars"] = form_chars.to_json();
    j["lemma_chars"] = lemma_chars.to_json();
    j["upos"] = upos.to_json();
    j["xpos"] = xpos.to_json();
    j["deprel"] = deprel.to_json();
    j["feat_categories"] = feat_categories;
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : feat_values) values.push_back(v.to_json());
    j["feat_values"] = values;
    j["feat_pairs"] = feat_pairs.to_json();
    return j;
  }

  static Vocabularies from_json(const nlohmann::json& j) {
    Vocabularies v;
    v.form_chars = CharVocab::from_json(j.at("form_chars"));
    v.lemma_chars = CharVocab::from_json(j.at("lemma_chars"));
    v.upos = Vocab::from_json(j.at("upos"));
    v.xpos = Vocab::from_json(j.at("xpos"));
    v.deprel = Vocab::from_json(j.at("deprel"));
    v.feat_categories = j.at("feat_categories").get<std::vector<std::string>>();
    for (const auto& jv : j.at("feat_values")) v.feat_values.push_back(Vocab::from_json(jv));
    v.feat_pairs = Vocab::from_json(j.at("feat_pairs"));
    require(v.feat_categories.size() == v.feat_values.size(),
            "vocabulary JSON: category/value arity mismatch");
    return v;
  }
};

/// Index-space view of one token: everything the network consumes or is
/// supervised with. -1 marks absent gold annotation.
struct EncodedToken {
  std::vector<int> form_char_ids;   // BEGIN .. END wrapped
  std::vector<int> lemma_char_ids;  // BEGIN .. END wrapped, lemma input channel
  int upos_input = Vocabularies::kInputUnk;
  std::vector<int> feat_pair_ids;   // input rows; {EMPTY} when no feats

  int gold_upos = -1;
  int gold_xpos = -1;
  int gold_deprel = -1;
  int gold_head = -1;                // 0 = root
  std::vector<int> gold_feat_values; // per category; NA for absent
  std::vector<int> gold_lemma_ids;   // bare lemma chars, no structural symbols
};

struct EncodedSentence {
  std::vector<EncodedToken> tokens;
  const conllu::Sentence* source = nullptr;

  std::size_t size() const { return tokens.size(); }
};

namespace detail {

inline std::vector<int> wrap_chars(const std::string& text, const CharVocab& vocab) {
  std::vector<int> ids;
  const auto cps = utf8_decode(text, false);
  ids.reserve(cps.size() + 2);
  ids.push_back(CharVocab::kBegin);
  for (char32_t c : cps) ids.push_back(vocab.lookup(c));
  ids.push_back(CharVocab::kEnd);
  return ids;
}

}  // namespace detail

/// Turns a parsed sentence into model indices. With `training` set, unknown
/// gold labels abort; otherwise gold fields stay -1 where annotation is
/// absent and prediction fills them later.
inline EncodedSentence encode_sentence(const conllu::Sentence& s, const Vocabularies& v,
                                       const ModelConfig& config, bool training) {
  EncodedSentence out;
  out.source = &s;
  out.tokens.reserve(s.tokens.size());
  for (const auto& t : s.tokens) {
    EncodedToken e;
    e.form_char_ids = detail::wrap_chars(t.form, v.form_chars);
    if (config.has_feature(Feature::lemma))
      e.lemma_char_ids = detail::wrap_chars(t.lemma == "_" ? t.form : t.lemma, v.lemma_chars);
    if (config.has_feature(Feature::upos)) {
      if (t.upos == "_") {
        e.upos_input = Vocabularies::kInputEmpty;
      } else {
        const int id = v.upos.lookup(t.upos);
        e.upos_input = id < 0 ? Vocabularies::kInputUnk : id + Vocabularies::kInputOffset;
      }
    }
    if (config.has_feature(Feature::ufeats)) {
      if (t.feats.empty()) {
        e.feat_pair_ids.push_back(Vocabularies::kInputEmpty);
      } else {
        for (const auto& [cat, val] : t.feats) {
          const int id = v.feat_pairs.lookup(cat + "=" + val);
          e.feat_pair_ids.push_back(id < 0 ? Vocabularies::kInputUnk
                                           : id + Vocabularies::kInputOffset);
        }
      }
    }

    // tokens with "_" in a label column are simply not supervised for it
    if (config.has_target(Target::upos) && t.upos != "_") {
      e.gold_upos = v.upos.lookup(t.upos);
      if (training)
        require(e.gold_upos >= 0, "upos label \"", t.upos, "\" missing from the vocabulary");
    }
    if (config.has_target(Target::xpos) && t.xpos != "_") {
      e.gold_xpos = v.xpos.lookup(t.xpos);
      if (training)
        require(e.gold_xpos >= 0, "xpos label \"", t.xpos, "\" missing from the vocabulary");
    }
    if (config.has_target(Target::deprel) && t.deprel != "_") {
      e.gold_deprel = v.deprel.lookup(t.deprel);
      if (training)
        require(e.gold_deprel >= 0, "deprel label \"", t.deprel,
                "\" missing from the vocabulary");
    }
    if (config.has_target(Target::head)) e.gold_head = t.head;
    if (config.has_target(Target::ufeats)) {
      e.gold_feat_values.assign(v.feat_categories.size(), 0);
      for (std::size_t c = 0; c < v.feat_categories.size(); ++c)
        e.gold_feat_values[c] = v.na_class(c);  // absent category trains as NA
      for (const auto& [cat, val] : t.feats) {
        const int c = v.category_index(cat);
        if (c < 0) {
          require(!training, "feats category \"", cat, "\" missing from the vocabulary");
          continue;
        }
        const int id = v.feat_values[static_cast<std::size_t>(c)].lookup(val);
        if (training)
          require(id >= 0, "feats value \"", cat, "=", val, "\" missing from the vocabulary");
        if (id >= 0) e.gold_feat_values[static_cast<std::size_t>(c)] = id;
      }
    }
    if (config.has_target(Target::lemma) && t.lemma != "_") {
      // unseen gold characters become UNK targets rather than aborting
      for (char32_t c : utf8_decode(t.lemma, false))
        e.gold_lemma_ids.push_back(v.lemma_chars.lookup(c));
    }
    out.tokens.push_back(std::move(e));
  }
  return out;
}

}  // namespace morphparse
