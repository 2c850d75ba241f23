#pragma once

#include <array>
#include <string>
#include <vector>

#include "morphparse/nn.hpp"

namespace morphparse {

/// Stacked bidirectional LSTM over a batch of variable-length sentences.
/// Input is the flat [total_tokens, in_dim] local-feature matrix with rows
/// grouped by sentence; output is the flat [total_tokens, 2 * hidden] matrix
/// of global vectors in the same order.
///
/// Dropout is variational: one mask per sentence (or per batch lane), reused
/// across all timesteps. Masks cover the local features, each layer's
/// recurrent state and output, and the top of the stack.
template <class S>
struct Encoder {
  struct Direction {
    nn::Parameter<S>* w_ih = nullptr;  // [in, 4H]
    nn::Parameter<S>* w_hh = nullptr;  // [H, 4H]
    nn::Parameter<S>* b = nullptr;     // [1, 4H]
  };

  std::vector<std::array<Direction, 2>> layers;  // [layer][0 = forward, 1 = backward]
  std::size_t hidden = 0;

  static Encoder create(nn::ParameterStore<S>& store, std::size_t input_dim, std::size_t hidden,
                        std::size_t num_layers, Rng& rng, double l2) {
    require(num_layers > 0 && hidden > 0, "encoder needs at least one layer and one unit");
    Encoder enc;
    enc.hidden = hidden;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < num_layers; ++l) {
      std::array<Direction, 2> pair;
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string name =
            "encoder.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
        Direction dir;
        dir.w_ih = store.create(name + ".w_ih", in, 4 * hidden, nn::Init::xavier_uniform, rng, l2);
        dir.w_hh = store.create(name + ".w_hh", hidden, 4 * hidden, nn::Init::xavier_uniform, rng,
                                l2);
        dir.b = store.create(name + ".b", 1, 4 * hidden, nn::Init::lstm_bias, rng, 0.0);
        pair[d] = dir;
      }
      enc.layers.push_back(pair);
      in = 2 * hidden;
    }
    return enc;
  }

  std::size_t out_dim() const { return 2 * hidden; }

  Node<S>* encode(nn::Workspace<S>& ws, Node<S>* locals,
                  const std::vector<std::size_t>& lengths, double vdrop) const {
    Graph<S>& g = ws.g;
    const std::size_t B = lengths.size();
    require(B > 0, "encoder: empty batch");
    std::vector<std::size_t> offsets{0};
    std::size_t T = 0;
    for (std::size_t len : lengths) {
      require(len > 0, "encoder: zero-length sentence");
      offsets.push_back(offsets.back() + len);
      T = std::max(T, len);
    }
    const std::size_t N = offsets.back();
    require(locals->value.rows() == N, "encoder: ", locals->value.rows(), " rows for ", N,
            " tokens");

    const bool drop = ws.training && vdrop > 0.0;
    if (drop) locals = ops::mul(g, locals, ws.constant(sentence_mask(lengths, locals->value.cols(),
                                                                     vdrop, ws.rng)));

    // lane masks: (b, t) -> row in the flat matrix, -1 beyond sentence end
    std::vector<std::vector<std::int64_t>> gather(T, std::vector<std::int64_t>(B, -1));
    std::vector<Tensor<S>> step_mask(T, Tensor<S>(B, 1));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < B; ++b)
        if (t < lengths[b]) {
          gather[t][b] = static_cast<std::int64_t>(offsets[b] + t);
          step_mask[t](b, 0) = S(1);
        }

    // layer input per timestep, [B, in_dim] each
    std::vector<Node<S>*> steps(T);
    for (std::size_t t = 0; t < T; ++t) steps[t] = ops::rows(g, locals, gather[t]);

    for (const auto& layer : layers) {
      std::array<std::vector<Node<S>*>, 2> out;
      for (std::size_t d = 0; d < 2; ++d) {
        const Direction& dir = layer[d];
        Node<S>* w_ih = ws.use(dir.w_ih);
        Node<S>* w_hh = ws.use(dir.w_hh);
        Node<S>* bias = ws.use(dir.b);
        Node<S>* rec_mask = drop ? ws.constant(lane_mask(B, hidden, vdrop, ws.rng)) : nullptr;
        Node<S>* out_mask = drop ? ws.constant(lane_mask(B, hidden, vdrop, ws.rng)) : nullptr;

        Node<S>* h = ws.constant(Tensor<S>(B, hidden));
        Node<S>* c = ws.constant(Tensor<S>(B, hidden));
        out[d].resize(T);
        for (std::size_t step = 0; step < T; ++step) {
          const std::size_t t = d == 0 ? step : T - 1 - step;
          Node<S>* h_rec = drop ? ops::mul(g, h, rec_mask) : h;
          nn::LstmState<S> next = nn::lstm_cell(ws, steps[t], {h_rec, c}, w_ih, w_hh, bias);
          // lanes past their sentence end carry the previous state
          h = ops::mask_lerp(g, next.h, h, step_mask[t]);
          c = ops::mask_lerp(g, next.c, c, step_mask[t]);
          out[d][t] = drop ? ops::mul(g, h, out_mask) : h;
        }
      }
      for (std::size_t t = 0; t < T; ++t)
        steps[t] = ops::concat_cols(g, {out[0][t], out[1][t]});
    }

    Node<S>* stacked = T == 1 ? steps[0] : ops::concat_rows(g, steps);  // [T * B, 2H]
    std::vector<std::int64_t> flat(N);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lengths[b]; ++t)
        flat[offsets[b] + t] = static_cast<std::int64_t>(t * B + b);
    Node<S>* global = ops::rows(g, stacked, std::move(flat));
    if (drop)
      global = ops::mul(g, global,
                        ws.constant(sentence_mask(lengths, out_dim(), vdrop, ws.rng)));
    return global;
  }

 private:
  /// One dropout row per sentence, replicated over its tokens.
  static Tensor<S> sentence_mask(const std::vector<std::size_t>& lengths, std::size_t cols,
                                 double rate, Rng& rng) {
    std::size_t total = 0;
    for (std::size_t len : lengths) total += len;
    Tensor<S> mask(total, cols);
    std::size_t row = 0;
    for (std::size_t len : lengths) {
      Tensor<S> one = ops::sample_dropout_row<S>(cols, rate, rng);
      for (std::size_t i = 0; i < len; ++i, ++row)
        for (std::size_t j = 0; j < cols; ++j) mask(row, j) = one(0, j);
    }
    return mask;
  }

  /// One dropout row per batch lane.
  static Tensor<S> lane_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Tensor<S> mask(rows, cols);
    for (std::size_t b = 0; b < rows; ++b) {
      Tensor<S> one = ops::sample_dropout_row<S>(cols, rate, rng);
      for (std::size_t j = 0; j < cols; ++j) mask(b, j) = one(0, j);
    }
    return mask;
  }
};

}  // namespace morphparse
