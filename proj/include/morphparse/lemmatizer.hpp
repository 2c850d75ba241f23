#pragma once

#include <string>
#include <vector>

#include "morphparse/features.hpp"
#include "morphparse/nn.hpp"

namespace morphparse {

/// Character-level lemma generation: each grid position of the input word
/// (BEGIN, form chars, END, pad slack) is classified into the lemma char
/// vocabulary, conditioned on a projection of the token's global vector.
template <class S>
struct Lemmatizer {
  const ModelConfig* config = nullptr;
  nn::Parameter<S>* char_embed = nullptr;  // over the form char vocabulary
  nn::Dense<S> ctx_proj;                   // global vector -> small context slice
  std::vector<nn::Conv1d<S>> convs;
  nn::Conv1d<S> out_conv;                  // kernel 1, classes = lemma char vocabulary

  static Lemmatizer create(nn::ParameterStore<S>& store, const ModelConfig& config,
                           const Vocabularies& vocabs, Rng& rng) {
    Lemmatizer lm;
    lm.config = &config;
    lm.char_embed = store.create("lemmatizer.char_embed", vocabs.form_chars.size(),
                                 config.lemma_char_dim, nn::Init::normal, rng,
                                 config.l2_embeddings);
    lm.ctx_proj = nn::Dense<S>::create(store, "lemmatizer.ctx_proj", config.global_dim(),
                                       config.lemma_ctx_dim, rng);
    std::size_t in = config.lemma_char_dim + config.lemma_ctx_dim;
    for (std::size_t i = 0; i < config.lemma_filters.size(); ++i) {
      lm.convs.push_back(nn::Conv1d<S>::create(store, "lemmatizer.conv" + std::to_string(i), in,
                                               config.lemma_filters[i], config.lemma_kernel,
                                               config.lemma_dilations[i], rng,
                                               config.l2_network));
      in = config.lemma_filters[i];
    }
    lm.out_conv = nn::Conv1d<S>::create(store, "lemmatizer.out_conv", in,
                                        vocabs.lemma_chars.size(), 1, 1, rng,
                                        config.l2_network);
    return lm;
  }

  struct Forward {
    Node<S>* logits = nullptr;          // [total_cells, |lemma chars|]
    std::vector<std::size_t> offsets;   // per-token grid bounds, tokens in batch order
  };

  /// `global` is [total_tokens, 2H] with rows in batch order.
  Forward forward(nn::Workspace<S>& ws, const std::vector<const EncodedSentence*>& batch,
                  Node<S>* global) const {
    Graph<S>& g = ws.g;
    std::vector<std::int64_t> grid_ids;
    std::vector<std::int64_t> cell_token;  // owning token row per grid cell
    std::vector<std::size_t> offsets{0};
    std::int64_t token_row = 0;
    for (const auto* s : batch) {
      for (const auto& t : s->tokens) {
        for (int id : t.form_char_ids) {
          grid_ids.push_back(id);
          cell_token.push_back(token_row);
        }
        for (std::size_t p = 0; p < config->lemma_pad_slack; ++p) {
          grid_ids.push_back(CharVocab::kPad);
          cell_token.push_back(token_row);
        }
        offsets.push_back(grid_ids.size());
        ++token_row;
      }
    }
    require(static_cast<std::size_t>(token_row) == global->value.rows(),
            "lemmatizer: batch has ", token_row, " tokens but global matrix has ",
            global->value.rows(), " rows");

    Node<S>* chars = ops::rows(g, ws.use(char_embed), std::move(grid_ids));
    Node<S>* ctx = ops::tanh(
        g, ctx_proj.apply(ws, ws.maybe_dropout(global, config->fc_dropout)));
    Node<S>* ctx_cells = ops::rows(g, ctx, std::move(cell_token));
    Node<S>* x = ops::concat_cols(g, {chars, ctx_cells});
    for (const auto& conv : convs) x = ops::relu(g, conv.apply(ws, x, offsets));
    return {out_conv.apply(ws, x, offsets), std::move(offsets)};
  }

  /// Gold targets aligned to the grid: lemma chars from position 0, then
  /// END, then PAD; truncated when the lemma outgrows the grid.
  static std::vector<std::size_t> grid_targets(const std::vector<const EncodedSentence*>& batch,
                                               const std::vector<std::size_t>& offsets) {
    std::vector<std::size_t> targets;
    targets.reserve(offsets.back());
    std::size_t tok = 0;
    for (const auto* s : batch) {
      for (const auto& t : s->tokens) {
        const std::size_t cells = offsets[tok + 1] - offsets[tok];
        const auto& gold = t.gold_lemma_ids;
        for (std::size_t j = 0; j < cells; ++j) {
          if (j < gold.size())
            targets.push_back(static_cast<std::size_t>(gold[j]));
          else
            targets.push_back(j == gold.size() ? CharVocab::kEnd : CharVocab::kPad);
        }
        ++tok;
      }
    }
    return targets;
  }
};

/// Mean per-position cross-entropy of grid logits against target ids.
template <class S>
Node<S>* lemma_loss(Graph<S>& g, Node<S>* logits, const std::vector<std::size_t>& targets) {
  require(logits->value.rows() == targets.size(), "lemma_loss: ", logits->value.rows(),
          " grid rows vs ", targets.size(), " targets");
  Node<S>* total = ops::cross_entropy_sum(g, logits, targets);
  return ops::scale(g, total, S(1) / static_cast<S>(targets.size()));
}

/// Argmax decode of one token's grid rows. END and PAD stop the lemma,
/// BEGIN is skipped, UNK prints as '?'. An empty decode falls back to "_".
template <class S>
std::string decode_lemma(const Tensor<S>& logits, std::size_t begin, std::size_t end,
                         const CharVocab& lemma_chars) {
  std::string out;
  for (std::size_t r = begin; r < end; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    if (best == CharVocab::kEnd || best == CharVocab::kPad) break;
    if (best == CharVocab::kBegin) continue;
    out += lemma_chars.text(static_cast<int>(best));
  }
  return out.empty() ? "_" : out;
}

}  // namespace morphparse
