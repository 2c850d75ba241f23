#pragma once

#include <utility>
#include <vector>

#include "morphparse/encoder.hpp"
#include "morphparse/extractors.hpp"
#include "morphparse/lemmatizer.hpp"
#include "morphparse/parser.hpp"
#include "morphparse/tagger.hpp"

namespace morphparse {

/// Drops targets the training data cannot supervise (entirely "_" columns),
/// so degenerate treebanks train cleanly. Label prediction depends on the
/// arc distributions, so losing heads also loses labels.
inline void disable_unsupported_targets(ModelConfig& config, const Vocabularies& v,
                                        const conllu::Treebank& tb) {
  auto drop = [&config](Target t, const char* why) {
    auto& ts = config.targets;
    auto it = std::find(ts.begin(), ts.end(), t);
    if (it == ts.end()) return;
    ts.erase(it);
    log_warn("disabling target ", target_name(t), ": ", why);
  };
  if (v.upos.size() == 0) drop(Target::upos, "no annotated UPOS in the training data");
  if (v.xpos.size() == 0) drop(Target::xpos, "no annotated XPOS in the training data");
  if (v.feat_categories.empty()) drop(Target::ufeats, "no annotated FEATS in the training data");
  if (v.lemma_chars.size() <= CharVocab::kFirstChar)
    drop(Target::lemma, "no annotated lemmata in the training data");
  bool any_head = false;
  for (const auto& s : tb.sentences)
    for (const auto& t : s.tokens) any_head = any_head || t.head >= 0;
  if (!any_head) drop(Target::head, "no annotated heads in the training data");
  if (!config.has_target(Target::head))
    drop(Target::deprel, "label prediction requires head supervision");
  else if (v.deprel.size() == 0)
    drop(Target::deprel, "no annotated DEPREL in the training data");
  require(!config.targets.empty(), "every requested target is unsupported by the training data");
}

/// The full analyser: local features, biLSTM context, and all prediction
/// heads over one parameter store. Scalar type S switches the whole model
/// between f32 training speed and f64 verification precision.
template <class S>
struct JointModel {
  ModelConfig config;
  Vocabularies vocabs;
  nn::ParameterStore<S> store;
  LocalExtractor<S> extractor;
  Encoder<S> encoder;
  Tagger<S> tagger;
  Lemmatizer<S> lemmatizer;
  Parser<S> parser;

  // submodules hold pointers into this object; pin it in place
  JointModel() = default;
  JointModel(const JointModel&) = delete;
  JointModel& operator=(const JointModel&) = delete;

  bool tagging() const {
    return config.has_target(Target::upos) || config.has_target(Target::xpos) ||
           config.has_target(Target::ufeats);
  }
  bool parsing() const {
    return config.has_target(Target::head) || config.has_target(Target::deprel);
  }

  static std::unique_ptr<JointModel> create(ModelConfig cfg, Vocabularies v, Rng& rng) {
    cfg.validate();
    auto m = std::make_unique<JointModel>();
    m->config = std::move(cfg);
    m->vocabs = std::move(v);
    m->extractor = LocalExtractor<S>::create(m->store, m->config, m->vocabs, rng);
    m->encoder = Encoder<S>::create(m->store, m->config.local_dim(), m->config.lstm_hidden,
                                    m->config.lstm_layers, rng, m->config.l2_network);
    if (m->tagging()) m->tagger = Tagger<S>::create(m->store, m->config, m->vocabs, rng);
    if (m->config.has_target(Target::lemma))
      m->lemmatizer = Lemmatizer<S>::create(m->store, m->config, m->vocabs, rng);
    if (m->parsing()) m->parser = Parser<S>::create(m->store, m->config, m->vocabs, rng);
    return m;
  }

  struct Forward {
    std::vector<const EncodedSentence*> batch;
    std::vector<std::size_t> lengths;
    Node<S>* global = nullptr;
    typename Tagger<S>::Output tags;
    typename Lemmatizer<S>::Forward lemma;
    typename Parser<S>::Forward parse;
  };

  Forward forward(nn::Workspace<S>& ws, const std::vector<const EncodedSentence*>& batch,
                  const WordVectors* vectors,
                  const std::vector<std::size_t>& sentence_indices) const {
    Forward f;
    f.batch = batch;
    for (const auto* s : batch) f.lengths.push_back(s->size());
    Node<S>* locals = extractor.assemble(ws, batch, vectors, sentence_indices);
    f.global = encoder.encode(ws, locals, f.lengths, config.variational_dropout);
    if (tagging()) f.tags = tagger.forward(ws, f.global);
    if (config.has_target(Target::lemma)) f.lemma = lemmatizer.forward(ws, batch, f.global);
    if (parsing()) f.parse = parser.forward(ws, f.global, f.lengths);
    return f;
  }

  struct TaskLoss {
    Target target;
    Node<S>* node = nullptr;    // mean loss over supervised units
    std::size_t count = 0;      // supervised tokens (grid cells for lemma)
  };
  struct Losses {
    std::vector<TaskLoss> tasks;
    Node<S>* total = nullptr;   // weighted sum; null when nothing is supervised
  };

  Losses losses(nn::Workspace<S>& ws, const Forward& f, const TrainConfig& tc) const {
    Graph<S>& g = ws.g;
    Losses out;

    auto add_task = [&](Target t, Node<S>* mean_node, std::size_t count) {
      if (!mean_node || count == 0) return;
      out.tasks.push_back({t, mean_node, count});
      Node<S>* weighted = ops::scale(g, mean_node, static_cast<S>(tc.weight_for(t)));
      out.total = out.total ? ops::add(g, out.total, weighted) : weighted;
    };

    if (config.has_target(Target::upos))
      add_simple_ce(g, f, Target::upos, f.tags.upos_logits,
                    [](const EncodedToken& t) { return t.gold_upos; }, add_task);
    if (config.has_target(Target::xpos))
      add_simple_ce(g, f, Target::xpos, f.tags.xpos_logits,
                    [](const EncodedToken& t) { return t.gold_xpos; }, add_task);

    if (config.has_target(Target::ufeats) && !f.tags.feat_logits.empty()) {
      // all tokens are supervised: absent categories train toward NA
      std::size_t total_tokens = 0;
      for (const auto* s : f.batch) total_tokens += s->size();
      Node<S>* sum = nullptr;
      for (std::size_t c = 0; c < f.tags.feat_logits.size(); ++c) {
        std::vector<std::size_t> targets;
        targets.reserve(total_tokens);
        for (const auto* s : f.batch)
          for (const auto& t : s->tokens)
            targets.push_back(static_cast<std::size_t>(t.gold_feat_values[c]));
        Node<S>* ce = ops::cross_entropy_sum(g, f.tags.feat_logits[c], targets);
        sum = sum ? ops::add(g, sum, ce) : ce;
      }
      add_task(Target::ufeats, ops::scale(g, sum, S(1) / static_cast<S>(total_tokens)),
               total_tokens);
    }

    if (config.has_target(Target::lemma) && f.lemma.logits) {
      std::vector<std::int64_t> cells;
      std::vector<std::size_t> targets;
      std::size_t tok = 0;
      bool all = true;
      for (const auto* s : f.batch) {
        for (const auto& t : s->tokens) {
          const std::size_t begin = f.lemma.offsets[tok], end = f.lemma.offsets[tok + 1];
          if (t.gold_lemma_ids.empty()) {
            all = false;
          } else {
            const auto& gold = t.gold_lemma_ids;
            for (std::size_t j = begin; j < end; ++j) {
              const std::size_t p = j - begin;
              cells.push_back(static_cast<std::int64_t>(j));
              if (p < gold.size())
                targets.push_back(static_cast<std::size_t>(gold[p]));
              else
                targets.push_back(p == gold.size() ? CharVocab::kEnd : CharVocab::kPad);
            }
          }
          ++tok;
        }
      }
      if (!targets.empty()) {
        Node<S>* logits = all ? f.lemma.logits : ops::rows(g, f.lemma.logits, cells);
        Node<S>* ce = ops::cross_entropy_sum(g, logits, targets);
        add_task(Target::lemma, ops::scale(g, ce, S(1) / static_cast<S>(targets.size())),
                 targets.size());
      }
    }

    if (config.has_target(Target::head) && !f.parse.scores.empty()) {
      Node<S>* sum = nullptr;
      std::size_t supervised = 0;
      for (std::size_t si = 0; si < f.batch.size(); ++si) {
        const EncodedSentence* s = f.batch[si];
        std::vector<std::int64_t> rows;
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < s->size(); ++i)
          if (s->tokens[i].gold_head >= 0) {
            rows.push_back(static_cast<std::int64_t>(i));
            targets.push_back(static_cast<std::size_t>(s->tokens[i].gold_head));
          }
        if (targets.empty()) continue;
        supervised += targets.size();
        Node<S>* ce;
        if (rows.size() == s->size()) {
          ce = ops::cross_entropy_sum(g, f.parse.scores[si], targets,
                                      &f.parse.self_masks[si]);
        } else {
          const Tensor<S>& full = f.parse.self_masks[si];
          Tensor<S> mask(rows.size(), full.cols());
          for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < full.cols(); ++c)
              mask(r, c) = full(static_cast<std::size_t>(rows[r]), c);
          ce = ops::cross_entropy_sum(g, ops::rows(g, f.parse.scores[si], rows), targets,
                                      &mask);
        }
        sum = sum ? ops::add(g, sum, ce) : ce;
      }
      if (sum)
        add_task(Target::head, ops::scale(g, sum, S(1) / static_cast<S>(supervised)),
                 supervised);
    }

    if (config.has_target(Target::deprel) && f.parse.label_logits)
      add_simple_ce(g, f, Target::deprel, f.parse.label_logits,
                    [](const EncodedToken& t) { return t.gold_deprel; }, add_task);

    return out;
  }

  /// One annotated copy of each input sentence plus the hidden vectors the
  /// embedding exporter reads.
  struct Prediction {
    std::vector<conllu::Sentence> sentences;
    Tensor<S> upos_vectors;    // [total_tokens, upos hidden dim]
    Tensor<S> deprel_vectors;  // [total_tokens, label dim]
  };

  Prediction predict(const std::vector<const EncodedSentence*>& batch,
                     const WordVectors* vectors,
                     const std::vector<std::size_t>& sentence_indices, Rng& rng) const {
    Graph<S> g;
    nn::Workspace<S> ws(g, rng, false);
    const Forward f = forward(ws, batch, vectors, sentence_indices);

    Prediction out;
    std::vector<int> upos_ids, xpos_ids, deprel_ids;
    std::vector<std::vector<int>> feat_ids;
    if (f.tags.upos_logits) upos_ids = argmax_rows(f.tags.upos_logits->value);
    if (f.tags.xpos_logits) xpos_ids = argmax_rows(f.tags.xpos_logits->value);
    for (const auto* logits : f.tags.feat_logits) feat_ids.push_back(argmax_rows(logits->value));
    if (f.parse.label_logits) deprel_ids = argmax_rows(f.parse.label_logits->value);
    if (f.tags.upos_hidden) out.upos_vectors = f.tags.upos_hidden->value;
    if (f.parse.label_dep) out.deprel_vectors = f.parse.label_dep->value;

    std::size_t flat = 0;
    for (std::size_t si = 0; si < batch.size(); ++si) {
      conllu::Sentence sent = *batch[si]->source;  // keeps comments and extra rows
      std::vector<int> heads;
      if (config.has_target(Target::head))
        heads = decode_tree(f.parse.adjacency[si]->value);
      for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
        conllu::Token& t = sent.tokens[i];
        const std::size_t row = flat + i;
        if (config.has_target(Target::upos)) t.upos = vocabs.upos.symbol(upos_ids[row]);
        if (config.has_target(Target::xpos)) t.xpos = vocabs.xpos.symbol(xpos_ids[row]);
        if (config.has_target(Target::ufeats)) {
          std::vector<std::pair<std::string, std::string>> feats;
          for (std::size_t c = 0; c < feat_ids.size(); ++c)
            if (feat_ids[c][row] != vocabs.na_class(c))
              feats.emplace_back(vocabs.feat_categories[c],
                                 vocabs.feat_values[c].symbol(feat_ids[c][row]));
          conllu::sort_feats(feats);
          t.feats = std::move(feats);
        }
        if (config.has_target(Target::lemma))
          t.lemma = decode_lemma(f.lemma.logits->value, f.lemma.offsets[row],
                                 f.lemma.offsets[row + 1], vocabs.lemma_chars);
        if (config.has_target(Target::head)) t.head = heads[i];
        if (config.has_target(Target::deprel))
          t.deprel = vocabs.deprel.symbol(deprel_ids[row]);
      }
      out.sentences.push_back(std::move(sent));
      flat += batch[si]->size();
    }
    return out;
  }

 private:
  template <class GetGold, class AddTask>
  void add_simple_ce(Graph<S>& g, const Forward& f, Target target, Node<S>* logits,
                     GetGold get_gold, AddTask add_task) const {
    if (!logits) return;
    std::vector<std::int64_t> rows;
    std::vector<std::size_t> targets;
    std::int64_t row = 0;
    for (const auto* s : f.batch)
      for (const auto& t : s->tokens) {
        const int gold = get_gold(t);
        if (gold >= 0) {
          rows.push_back(row);
          targets.push_back(static_cast<std::size_t>(gold));
        }
        ++row;
      }
    if (targets.empty()) return;
    Node<S>* x = targets.size() == static_cast<std::size_t>(row)
                     ? logits
                     : ops::rows(g, logits, rows);
    Node<S>* ce = ops::cross_entropy_sum(g, x, targets);
    add_task(target, ops::scale(g, ce, S(1) / static_cast<S>(targets.size())), targets.size());
  }
};

}  // namespace morphparse
