#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "morphparse/features.hpp"
#include "morphparse/nn.hpp"

namespace morphparse {

/// Frozen word vectors, either keyed by surface form (fastText-style text
/// file) or by (sentence, token) position for pre-computed contextual
/// vectors. Never updated by training.
class WordVectors {
 public:
  /// Text format: optional "count dim" header, then one word per line
  /// followed by its values, whitespace separated.
  static WordVectors load_words(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open word vectors: ", path);
    WordVectors wv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      if (first) {
        first = false;
        // a two-integer first line is a header
        std::string a, b, c;
        row >> a >> b;
        if (!(row >> c) && conllu::detail::is_integer(a) && conllu::detail::is_integer(b)) {
          wv.dim_ = static_cast<std::size_t>(std::stoul(b));
          continue;
        }
        row.clear();
        row.seekg(0);
      }
      std::string word;
      row >> word;
      std::vector<float> vec;
      for (float v; row >> v;) vec.push_back(v);
      if (wv.dim_ == 0) wv.dim_ = vec.size();
      require(vec.size() == wv.dim_, path, ": vector for \"", word, "\" has ", vec.size(),
              " values, expected ", wv.dim_);
      wv.by_word_.emplace(std::move(word), std::move(vec));
    }
    require(wv.dim_ > 0 && !wv.by_word_.empty(), path, ": no vectors loaded");
    return wv;
  }

  /// Positional format: "<sentence_index> <token_id> v1 .. vd" per line,
  /// sentence index 0-based, token id 1-based as in the data file.
  static WordVectors load_positional(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open token vectors: ", path);
    WordVectors wv;
    wv.positional_ = true;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream row(line);
      std::size_t sent;
      int tok;
      require(static_cast<bool>(row >> sent >> tok), path, " line ", line_no,
              ": expected sentence index and token id");
      std::vector<float> vec;
      for (float v; row >> v;) vec.push_back(v);
      if (wv.dim_ == 0) wv.dim_ = vec.size();
      require(vec.size() == wv.dim_, path, " line ", line_no, ": vector has ", vec.size(),
              " values, expected ", wv.dim_);
      wv.by_position_.emplace(key(sent, tok), std::move(vec));
    }
    require(wv.dim_ > 0 && !wv.by_position_.empty(), path, ": no vectors loaded");
    return wv;
  }

  std::size_t dim() const { return dim_; }
  bool positional() const { return positional_; }
  std::size_t size() const { return positional_ ? by_position_.size() : by_word_.size(); }

  /// Exact match, then an ASCII-lowercased fallback; misses get nullptr and
  /// the caller embeds a zero vector.
  const std::vector<float>* find_word(const std::string& word) const {
    auto it = by_word_.find(word);
    if (it != by_word_.end()) return &it->second;
    std::string lower = word;
    bool changed = false;
    for (char& c : lower) {
      if (c >= 'A' && c <= 'Z') {
        c = static_cast<char>(c - 'A' + 'a');
        changed = true;
      }
    }
    if (changed) {
      it = by_word_.find(lower);
      if (it != by_word_.end()) return &it->second;
    }
    return nullptr;
  }

  const std::vector<float>* find_position(std::size_t sentence, int token) const {
    auto it = by_position_.find(key(sentence, token));
    return it == by_position_.end() ? nullptr : &it->second;
  }

  /// Stable digest of the stored floats; the trainer asserts it is unchanged
  /// after training (frozen-vector contract).
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::vector<float>& v) {
      for (float f : v) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        h = (h ^ bits) * 1099511628211ull;
      }
    };
    if (positional_) {
      for (const auto& [k, v] : by_position_) mix(v);
    } else {
      for (const auto& [k, v] : by_word_) mix(v);
    }
    return h;
  }

 private:
  static std::uint64_t key(std::size_t sent, int tok) {
    return (static_cast<std::uint64_t>(sent) << 20) | static_cast<std::uint64_t>(tok);
  }

  bool positional_ = false;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> by_word_;
  std::unordered_map<std::uint64_t, std::vector<float>> by_position_;
};

/// Dilated char CNN producing one vector per segment: embed the id grid,
/// run the conv stack with relu, max-pool each segment.
template <class S>
struct CharCnn {
  nn::Parameter<S>* embed = nullptr;
  std::vector<nn::Conv1d<S>> convs;

  static CharCnn create(nn::ParameterStore<S>& store, const std::string& name,
                        std::size_t vocab_size, std::size_t embed_dim,
                        const std::vector<std::size_t>& filters,
                        const std::vector<std::size_t>& dilations, std::size_t kernel, Rng& rng,
                        double l2_embed, double l2_conv) {
    require(filters.size() == dilations.size(), name, ": filters/dilations arity mismatch");
    CharCnn cnn;
    cnn.embed = store.create(name + ".embed", vocab_size, embed_dim, nn::Init::normal, rng,
                             l2_embed);
    std::size_t in = embed_dim;
    for (std::size_t i = 0; i < filters.size(); ++i) {
      cnn.convs.push_back(nn::Conv1d<S>::create(store, name + ".conv" + std::to_string(i), in,
                                                filters[i], kernel, dilations[i], rng, l2_conv));
      in = filters[i];
    }
    return cnn;
  }

  std::size_t out_dim() const { return convs.back().out_dim(); }

  /// `ids` concatenates the per-segment character ids; `offsets` (n_seg + 1)
  /// delimits them. Returns [n_seg, out_dim].
  Node<S>* apply(nn::Workspace<S>& ws, const std::vector<std::int64_t>& ids,
                 const std::vector<std::size_t>& offsets) const {
    Node<S>* x = ops::rows(ws.g, ws.use(embed), ids);
    for (const auto& conv : convs) x = ops::relu(ws.g, conv.apply(ws, x, offsets));
    return ops::segment_max(ws.g, x, offsets);
  }
};

/// All enabled local feature channels concatenated per token, in the fixed
/// order [char, word, lemma, upos, ufeats].
template <class S>
struct LocalExtractor {
  const ModelConfig* config = nullptr;
  CharCnn<S> form_cnn;
  CharCnn<S> lemma_cnn;
  nn::Dense<S> ext_proj;
  nn::Parameter<S>* upos_table = nullptr;
  nn::Parameter<S>* feats_table = nullptr;

  static LocalExtractor create(nn::ParameterStore<S>& store, const ModelConfig& config,
                               const Vocabularies& vocabs, Rng& rng) {
    LocalExtractor ex;
    ex.config = &config;
    if (config.has_feature(Feature::chars))
      ex.form_cnn = CharCnn<S>::create(store, "extractor.form_cnn", vocabs.form_chars.size(),
                                       config.char_embed_dim, config.char_filters,
                                       config.char_dilations, config.char_kernel, rng,
                                       config.l2_embeddings, config.l2_network);
    if (config.has_feature(Feature::word)) {
      require(config.ext_source_dim > 0, "word feature enabled but no vectors loaded");
      ex.ext_proj = nn::Dense<S>::create(store, "extractor.ext_proj", config.ext_source_dim,
                                         config.ext_proj_dim, rng, 0.0);
    }
    if (config.has_feature(Feature::lemma))
      ex.lemma_cnn = CharCnn<S>::create(store, "extractor.lemma_cnn", vocabs.lemma_chars.size(),
                                        config.char_embed_dim, config.char_filters,
                                        config.char_dilations, config.char_kernel, rng,
                                        config.l2_embeddings, config.l2_network);
    if (config.has_feature(Feature::upos))
      ex.upos_table = store.create("extractor.upos_table",
                                   vocabs.upos.size() + Vocabularies::kInputOffset,
                                   config.upos_input_dim, nn::Init::normal, rng,
                                   config.l2_embeddings);
    if (config.has_feature(Feature::ufeats))
      ex.feats_table = store.create("extractor.feats_table",
                                    vocabs.feat_pairs.size() + Vocabularies::kInputOffset,
                                    config.feats_input_dim, nn::Init::normal, rng,
                                    config.l2_embeddings);
    return ex;
  }

  /// Batch-wide forward: all sentences' tokens flattened in order.
  /// `sentence_indices` gives each sentence's position in the original file
  /// (positional vector lookup). Returns [total_tokens, local_dim].
  Node<S>* assemble(nn::Workspace<S>& ws, const std::vector<const EncodedSentence*>& batch,
                    const WordVectors* vectors,
                    const std::vector<std::size_t>& sentence_indices) const {
    std::size_t total = 0;
    for (const auto* s : batch) total += s->size();
    require(total > 0, "empty batch");

    std::vector<Node<S>*> channels;
    if (config->has_feature(Feature::chars))
      channels.push_back(char_channel(ws, batch, /*use_lemma=*/false));
    if (config->has_feature(Feature::word))
      channels.push_back(word_channel(ws, batch, vectors, sentence_indices, total));
    if (config->has_feature(Feature::lemma))
      channels.push_back(char_channel(ws, batch, /*use_lemma=*/true));
    if (config->has_feature(Feature::upos)) {
      std::vector<std::int64_t> ids;
      ids.reserve(total);
      for (const auto* s : batch)
        for (const auto& t : s->tokens) ids.push_back(t.upos_input);
      channels.push_back(ops::rows(ws.g, ws.use(upos_table), std::move(ids)));
    }
    if (config->has_feature(Feature::ufeats)) {
      std::vector<std::int64_t> ids;
      std::vector<std::size_t> offsets{0};
      for (const auto* s : batch) {
        for (const auto& t : s->tokens) {
          for (int id : t.feat_pair_ids) ids.push_back(id);
          offsets.push_back(ids.size());
        }
      }
      Node<S>* rows = ops::rows(ws.g, ws.use(feats_table), std::move(ids));
      channels.push_back(ops::segment_mean(ws.g, rows, offsets));
    }
    Node<S>* locals = channels.size() == 1 ? channels[0] : ops::concat_cols(ws.g, channels);
    require(locals->value.cols() == config->local_dim(), "local feature width ",
            locals->value.cols(), " does not match configured ", config->local_dim());
    return locals;
  }

 private:
  Node<S>* char_channel(nn::Workspace<S>& ws, const std::vector<const EncodedSentence*>& batch,
                        bool use_lemma) const {
    std::vector<std::int64_t> ids;
    std::vector<std::size_t> offsets{0};
    for (const auto* s : batch) {
      for (const auto& t : s->tokens) {
        const auto& src = use_lemma ? t.lemma_char_ids : t.form_char_ids;
        for (int id : src) ids.push_back(id);
        offsets.push_back(ids.size());
      }
    }
    const CharCnn<S>& cnn = use_lemma ? lemma_cnn : form_cnn;
    return cnn.apply(ws, ids, offsets);
  }

  Node<S>* word_channel(nn::Workspace<S>& ws, const std::vector<const EncodedSentence*>& batch,
                        const WordVectors* vectors,
                        const std::vector<std::size_t>& sentence_indices,
                        std::size_t total) const {
    require(vectors != nullptr, "word feature enabled but no vectors supplied");
    require(vectors->dim() == config->ext_source_dim, "vector file dimension ", vectors->dim(),
            " does not match the model's ", config->ext_source_dim);
    Tensor<S> src(total, config->ext_source_dim);
    std::size_t row = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const EncodedSentence* s = batch[b];
      for (std::size_t i = 0; i < s->size(); ++i, ++row) {
        const std::vector<float>* vec =
            vectors->positional()
                ? vectors->find_position(sentence_indices[b], static_cast<int>(i) + 1)
                : vectors->find_word(s->source->tokens[i].form);
        if (!vec) continue;  // out of vocabulary: zero vector
        for (std::size_t j = 0; j < vec->size(); ++j) src(row, j) = static_cast<S>((*vec)[j]);
      }
    }
    // the source stays a constant: gradients reach only the projection
    Node<S>* x = ws.g.input(std::move(src), false);
    x = ws.maybe_dropout(x, config->fc_dropout);
    return ops::tanh(ws.g, ext_proj.apply(ws, x));
  }
};

}  // namespace morphparse
