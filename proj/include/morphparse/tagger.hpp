#pragma once

#include <string>
#include <vector>

#include "morphparse/features.hpp"
#include "morphparse/nn.hpp"

namespace morphparse {

/// Two-layer classification head over global vectors: dense + tanh, then a
/// dense output layer. Logits feed a softmax cross-entropy or an argmax.
template <class S>
struct TagHead {
  nn::Dense<S> hidden;
  nn::Dense<S> out;

  static TagHead create(nn::ParameterStore<S>& store, const std::string& name, std::size_t in,
                        std::size_t hidden_dim, std::size_t classes, Rng& rng) {
    TagHead h;
    h.hidden = nn::Dense<S>::create(store, name + ".hidden", in, hidden_dim, rng);
    h.out = nn::Dense<S>::create(store, name + ".out", hidden_dim, classes, rng);
    return h;
  }

  Node<S>* hidden_activation(nn::Workspace<S>& ws, Node<S>* x, double fc_dropout) const {
    return ops::tanh(ws.g, hidden.apply(ws, ws.maybe_dropout(x, fc_dropout)));
  }

  Node<S>* logits_from_hidden(nn::Workspace<S>& ws, Node<S>* h, double fc_dropout) const {
    return out.apply(ws, ws.maybe_dropout(h, fc_dropout));
  }

  Node<S>* logits(nn::Workspace<S>& ws, Node<S>* x, double fc_dropout) const {
    return logits_from_hidden(ws, hidden_activation(ws, x, fc_dropout), fc_dropout);
  }
};

/// UPOS / XPOS / UFeats prediction. UFeats runs one head per category; a
/// token without a value for a category is supervised with that category's
/// NA class.
template <class S>
struct Tagger {
  const ModelConfig* config = nullptr;
  TagHead<S> upos_head;
  TagHead<S> xpos_head;
  std::vector<TagHead<S>> feat_heads;  // aligned with Vocabularies::feat_categories

  static Tagger create(nn::ParameterStore<S>& store, const ModelConfig& config,
                       const Vocabularies& vocabs, Rng& rng) {
    Tagger t;
    t.config = &config;
    const std::size_t in = config.global_dim();
    if (config.has_target(Target::upos))
      t.upos_head = TagHead<S>::create(store, "tagger.upos", in, config.upos_hidden,
                                       vocabs.upos.size(), rng);
    if (config.has_target(Target::xpos))
      t.xpos_head = TagHead<S>::create(store, "tagger.xpos", in, config.xpos_hidden,
                                       vocabs.xpos.size(), rng);
    if (config.has_target(Target::ufeats))
      for (std::size_t c = 0; c < vocabs.feat_categories.size(); ++c)
        t.feat_heads.push_back(TagHead<S>::create(
            store, "tagger.feats." + vocabs.feat_categories[c], in, config.feats_hidden,
            vocabs.feat_values[c].size() + 1, rng));  // + NA class
    return t;
  }

  struct Output {
    Node<S>* upos_hidden = nullptr;  // tanh activation, reused as the token embedding
    Node<S>* upos_logits = nullptr;
    Node<S>* xpos_logits = nullptr;
    std::vector<Node<S>*> feat_logits;
  };

  /// `global` is [total_tokens, 2H]; every enabled head scores all tokens.
  Output forward(nn::Workspace<S>& ws, Node<S>* global) const {
    Output out;
    const double fd = config->fc_dropout;
    if (config->has_target(Target::upos)) {
      out.upos_hidden = upos_head.hidden_activation(ws, global, fd);
      out.upos_logits = upos_head.logits_from_hidden(ws, out.upos_hidden, fd);
    }
    if (config->has_target(Target::xpos)) out.xpos_logits = xpos_head.logits(ws, global, fd);
    for (const auto& head : feat_heads) out.feat_logits.push_back(head.logits(ws, global, fd));
    return out;
  }
};

/// Argmax class per row of a logits matrix.
template <class S>
inline std::vector<int> argmax_rows(const Tensor<S>& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace morphparse
