#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "morphparse/ops.hpp"

namespace morphparse {
namespace nn {

enum class Init {
  zeros,
  xavier_uniform,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out))
  normal,          // N(0, 1)
  uniform_half,    // U(-0.5, 0.5)
  lstm_bias,       // zeros with the forget-gate quarter set to 1
};

/// A named persistent weight. Graphs bind it per forward pass; the optimizer
/// writes updates back into `value`. `l2` is the weight-decay coefficient
/// added to the gradient as l2 * value.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  double l2 = 0.0;
  std::size_t index = 0;  // creation order, aligns optimizer state
};

template <class S>
class ParameterStore {
 public:
  Parameter<S>* create(const std::string& name, std::size_t rows, std::size_t cols, Init init,
                       Rng& rng, double l2 = 0.0) {
    require(by_name_.find(name) == by_name_.end(), "duplicate parameter name: ", name);
    auto p = std::make_unique<Parameter<S>>();
    p->name = name;
    p->value = Tensor<S>(rows, cols);
    p->l2 = l2;
    p->index = params_.size();
    initialize(p->value, init, rng);
    Parameter<S>* raw = p.get();
    by_name_.emplace(name, raw);
    params_.push_back(std::move(p));
    return raw;
  }

  Parameter<S>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  Parameter<S>* get(const std::string& name) const {
    Parameter<S>* p = find(name);
    require(p != nullptr, "unknown parameter: ", name);
    return p;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<S>& at(std::size_t i) { return *params_[i]; }
  const Parameter<S>& at(std::size_t i) const { return *params_[i]; }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  /// Names in archive order (sorted, so files are stable across runs).
  std::vector<std::string> sorted_names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [k, v] : by_name_) out.push_back(k);
    return out;
  }

  template <class S2>
  void copy_values_into(ParameterStore<S2>& other) const {
    require(other.size() == size(), "parameter stores differ in size: ", other.size(), " vs ",
            size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      require(other.at(i).name == params_[i]->name, "parameter order mismatch at ", i);
      other.at(i).value = params_[i]->value.template cast<S2>();
    }
  }

 private:
  static void initialize(Tensor<S>& t, Init init, Rng& rng) {
    switch (init) {
      case Init::zeros:
        break;
      case Init::xavier_uniform: {
        const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
        for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<S>(rng.uniform(-a, a));
        break;
      }
      case Init::normal:
        for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<S>(rng.normal());
        break;
      case Init::uniform_half:
        for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<S>(rng.uniform(-0.5, 0.5));
        break;
      case Init::lstm_bias: {
        require(t.rows() == 1 && t.cols() % 4 == 0, "lstm_bias init needs a [1, 4H] tensor");
        const std::size_t H = t.cols() / 4;
        for (std::size_t j = H; j < 2 * H; ++j) t.at(j) = S(1);
        break;
      }
    }
  }

  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::map<std::string, Parameter<S>*> by_name_;
};

/// Per-forward-pass context: the graph, the bound parameter nodes (each
/// parameter binds once, fan-out shares the node), and the dropout RNG.
template <class S>
struct Workspace {
  Graph<S>& g;
  Rng& rng;
  bool training = false;

  std::unordered_map<const Parameter<S>*, Node<S>*> cache;
  std::vector<std::pair<Parameter<S>*, Node<S>*>> bound;

  Workspace(Graph<S>& graph, Rng& r, bool train) : g(graph), rng(r), training(train) {}

  Node<S>* use(Parameter<S>* p) {
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
    Node<S>* n = g.input(p->value, true);
    cache.emplace(p, n);
    bound.emplace_back(p, n);
    return n;
  }

  Node<S>* constant(Tensor<S> t) { return g.input(std::move(t), false); }

  Node<S>* maybe_dropout(Node<S>* x, double rate) {
    return training && rate > 0.0 ? ops::dropout(g, x, rate, rng) : x;
  }
};

/// Fully connected layer; activation is applied by the caller.
template <class S>
struct Dense {
  Parameter<S>* W = nullptr;  // [in, out]
  Parameter<S>* b = nullptr;  // [1, out]

  static Dense create(ParameterStore<S>& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng, double l2 = 0.0) {
    Dense d;
    d.W = store.create(name + ".W", in, out, Init::xavier_uniform, rng, l2);
    d.b = store.create(name + ".b", 1, out, Init::zeros, rng, 0.0);
    return d;
  }

  Node<S>* apply(Workspace<S>& ws, Node<S>* x) const {
    return ops::add_rows(ws.g, ops::matmul(ws.g, x, ws.use(W)), ws.use(b));
  }

  std::size_t in_dim() const { return W->value.rows(); }
  std::size_t out_dim() const { return W->value.cols(); }
};

/// One LSTM step over a batch of rows. Gate layout along the 4H axis is
/// [input, forget, cell, output].
///   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
///   h' = sigmoid(o) * tanh(c')
template <class S>
struct LstmState {
  Node<S>* h;
  Node<S>* c;
};

template <class S>
LstmState<S> lstm_cell(Workspace<S>& ws, Node<S>* x, LstmState<S> prev, Node<S>* w_ih,
                       Node<S>* w_hh, Node<S>* bias) {
  Graph<S>& g = ws.g;
  const std::size_t H4 = w_ih->value.cols();
  require(H4 % 4 == 0 && w_hh->value.cols() == H4 && bias->value.cols() == H4,
          "lstm_cell: gate width mismatch");
  const std::size_t H = H4 / 4;
  Node<S>* gates = ops::add_rows(
      g, ops::add(g, ops::matmul(g, x, w_ih), ops::matmul(g, prev.h, w_hh)), bias);
  Node<S>* i = ops::sigmoid(g, ops::slice_cols(g, gates, 0, H));
  Node<S>* f = ops::sigmoid(g, ops::slice_cols(g, gates, H, H));
  Node<S>* cand = ops::tanh(g, ops::slice_cols(g, gates, 2 * H, H));
  Node<S>* o = ops::sigmoid(g, ops::slice_cols(g, gates, 3 * H, H));
  Node<S>* c = ops::add(g, ops::mul(g, f, prev.c), ops::mul(g, i, cand));
  Node<S>* h = ops::mul(g, o, ops::tanh(g, c));
  return {h, c};
}

/// Dilated same-padding 1-D convolution over concatenated segments.
/// Kernel is stored as [kernel * in, out].
template <class S>
struct Conv1d {
  Parameter<S>* W = nullptr;
  Parameter<S>* b = nullptr;
  std::size_t kernel = 0;
  std::size_t dilation = 1;

  static Conv1d create(ParameterStore<S>& store, const std::string& name, std::size_t in,
                       std::size_t out, std::size_t kernel, std::size_t dilation, Rng& rng,
                       double l2 = 0.0) {
    Conv1d c;
    c.W = store.create(name + ".W", kernel * in, out, Init::xavier_uniform, rng, l2);
    c.b = store.create(name + ".b", 1, out, Init::zeros, rng, 0.0);
    c.kernel = kernel;
    c.dilation = dilation;
    return c;
  }

  Node<S>* apply(Workspace<S>& ws, Node<S>* x, const std::vector<std::size_t>& offsets) const {
    Node<S>* cols = ops::im2col_seg(ws.g, x, offsets, kernel, dilation);
    return ops::add_rows(ws.g, ops::matmul(ws.g, cols, ws.use(W)), ws.use(b));
  }

  std::size_t out_dim() const { return W->value.cols(); }
};

}  // namespace nn
}  // namespace morphparse
