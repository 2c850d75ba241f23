#pragma once

#include <cstdint>
#include <vector>

#include "morphparse/nn.hpp"
#include "morphparse/serialize.hpp"

namespace morphparse {
namespace nn {

/// ADAM with bias correction. Weight decay is applied as
/// grad += l2 * value before the moment update, per parameter group.
template <class S>
class Adam {
 public:
  Adam(ParameterStore<S>& store, double lr = 0.002, double beta1 = 0.9, double beta2 = 0.9,
       double eps = 1e-8)
      : store_(&store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(store.size());
    v_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto& p = store.at(i);
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t step_count() const { return step_; }

  /// One update from the gradients accumulated in a finished graph.
  /// Parameters not bound in this pass keep their value and moments.
  void apply(const std::vector<std::pair<Parameter<S>*, Node<S>*>>& bound) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    const S alpha = static_cast<S>(lr_ * std::sqrt(bc2) / bc1);
    const S b1 = static_cast<S>(beta1_);
    const S b2 = static_cast<S>(beta2_);
    const S eps = static_cast<S>(eps_);
    for (const auto& [param, node] : bound) {
      if (node->grad.empty()) continue;  // parameter did not reach the loss
      require(node->grad.same_shape(param->value), "adam: gradient shape mismatch for ",
              param->name);
      const S l2 = static_cast<S>(param->l2);
      Tensor<S>& m = m_[param->index];
      Tensor<S>& v = v_[param->index];
      S* pv = param->value.data();
      const S* gv = node->grad.data();
      S* mv = m.data();
      S* vv = v.data();
      for (std::size_t k = 0; k < param->value.size(); ++k) {
        const S grad = gv[k] + l2 * pv[k];
        mv[k] = b1 * mv[k] + (S(1) - b1) * grad;
        vv[k] = b2 * vv[k] + (S(1) - b2) * grad * grad;
        pv[k] -= alpha * mv[k] / (std::sqrt(vv[k]) + eps);
      }
    }
  }

  void save(std::ostream& out) const {
    io::write_u64(out, step_);
    io::write_f64(out, lr_);
    io::write_u64(out, m_.size());
    for (std::size_t i = 0; i < m_.size(); ++i) {
      io::write_tensor(out, m_[i]);
      io::write_tensor(out, v_[i]);
    }
  }

  void load(std::istream& in) {
    step_ = io::read_u64(in);
    lr_ = io::read_f64(in);
    const std::uint64_t n = io::read_u64(in);
    require(n == m_.size(), "optimizer state holds ", n, " slots, store has ", m_.size());
    for (std::size_t i = 0; i < m_.size(); ++i) {
      m_[i] = io::read_tensor<S>(in);
      v_[i] = io::read_tensor<S>(in);
      require(m_[i].same_shape(store_->at(i).value), "optimizer slot ", i, " shape mismatch");
    }
  }

 private:
  ParameterStore<S>* store_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<S>> m_, v_;
};

}  // namespace nn
}  // namespace morphparse
