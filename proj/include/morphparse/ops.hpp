#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "morphparse/graph.hpp"
#include "morphparse/rng.hpp"

namespace morphparse {
namespace ops {

namespace detail {

template <class S>
bool any_grad(const std::vector<Node<S>*>& parents) {
  for (auto* p : parents)
    if (p->requires_grad) return true;
  return false;
}

template <class S>
void check_same_shape(const Node<S>* a, const Node<S>* b, const char* op) {
  require(a->value.same_shape(b->value), op, ": shape mismatch [", a->value.rows(), " x ",
          a->value.cols(), "] vs [", b->value.rows(), " x ", b->value.cols(), "]");
}

}  // namespace detail

/// C = A * B
template <class S>
Node<S>* matmul(Graph<S>& g, Node<S>* a, Node<S>* b) {
  const auto& A = a->value;
  const auto& B = b->value;
  require(A.cols() == B.rows(), "matmul: inner dimensions differ, [", A.rows(), " x ", A.cols(),
          "] * [", B.rows(), " x ", B.cols(), "]");
  Tensor<S> out(A.rows(), B.cols());
  morphparse::detail::gemm_nn(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.cols(), false);
  return g.make(std::move(out), {a, b}, a->requires_grad || b->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    Node<S>* b = n.parents[1];
    const std::size_t M = a->value.rows(), K = a->value.cols(), N = b->value.cols();
    if (a->requires_grad)
      morphparse::detail::gemm_nt(n.grad.data(), b->value.data(), a->ensure_grad().data(), M, N, K, true);
    if (b->requires_grad)
      morphparse::detail::gemm_tn(a->value.data(), n.grad.data(), b->ensure_grad().data(), M, K, N, true);
  });
}

/// C = A * B^T  (B given row-major as [N, K])
template <class S>
Node<S>* matmul_nt(Graph<S>& g, Node<S>* a, Node<S>* b) {
  const auto& A = a->value;
  const auto& B = b->value;
  require(A.cols() == B.cols(), "matmul_nt: inner dimensions differ, [", A.rows(), " x ", A.cols(),
          "] * [", B.rows(), " x ", B.cols(), "]^T");
  Tensor<S> out(A.rows(), B.rows());
  morphparse::detail::gemm_nt(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.rows(), false);
  return g.make(std::move(out), {a, b}, a->requires_grad || b->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    Node<S>* b = n.parents[1];
    const std::size_t M = a->value.rows(), K = a->value.cols(), N = b->value.rows();
    // dA = dC * B ; dB = dC^T * A
    if (a->requires_grad)
      morphparse::detail::gemm_nn(n.grad.data(), b->value.data(), a->ensure_grad().data(), M, N, K, true);
    if (b->requires_grad)
      morphparse::detail::gemm_tn(n.grad.data(), a->value.data(), b->ensure_grad().data(), M, N, K, true);
  });
}

template <class S>
Node<S>* add(Graph<S>& g, Node<S>* a, Node<S>* b) {
  detail::check_same_shape(a, b, "add");
  Tensor<S> out = a->value;
  const S* bp = b->value.data();
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] += bp[i];
  return g.make(std::move(out), {a, b}, a->requires_grad || b->requires_grad, [](Node<S>& n) {
    for (Node<S>* p : n.parents) {
      if (!p->requires_grad) continue;
      S* gp = p->ensure_grad().data();
      const S* up = n.grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i];
    }
  });
}

/// Broadcast-add a [1, N] row to every row of a [M, N] matrix.
template <class S>
Node<S>* add_rows(Graph<S>& g, Node<S>* m, Node<S>* r) {
  require(r->value.rows() == 1 && r->value.cols() == m->value.cols(), "add_rows: shape mismatch [",
          m->value.rows(), " x ", m->value.cols(), "] + [", r->value.rows(), " x ", r->value.cols(), "]");
  Tensor<S> out = m->value;
  const S* rp = r->value.data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    S* orow = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += rp[j];
  }
  return g.make(std::move(out), {m, r}, m->requires_grad || r->requires_grad, [](Node<S>& n) {
    Node<S>* m = n.parents[0];
    Node<S>* r = n.parents[1];
    if (m->requires_grad) {
      S* gp = m->ensure_grad().data();
      const S* up = n.grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i];
    }
    if (r->requires_grad) {
      S* gr = r->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.rows(); ++i) {
        const S* urow = n.grad.row(i);
        for (std::size_t j = 0; j < n.grad.cols(); ++j) gr[j] += urow[j];
      }
    }
  });
}

template <class S>
Node<S>* mul(Graph<S>& g, Node<S>* a, Node<S>* b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<S> out = a->value;
  const S* bp = b->value.data();
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] *= bp[i];
  return g.make(std::move(out), {a, b}, a->requires_grad || b->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    Node<S>* b = n.parents[1];
    const S* up = n.grad.data();
    if (a->requires_grad) {
      S* gp = a->ensure_grad().data();
      const S* bv = b->value.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i] * bv[i];
    }
    if (b->requires_grad) {
      S* gp = b->ensure_grad().data();
      const S* av = a->value.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i] * av[i];
    }
  });
}

/// Broadcast-multiply every row of a [M, N] matrix by a [1, N] row.
template <class S>
Node<S>* mul_rows(Graph<S>& g, Node<S>* m, Node<S>* r) {
  require(r->value.rows() == 1 && r->value.cols() == m->value.cols(), "mul_rows: shape mismatch [",
          m->value.rows(), " x ", m->value.cols(), "] * [", r->value.rows(), " x ", r->value.cols(), "]");
  Tensor<S> out = m->value;
  const S* rp = r->value.data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    S* orow = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] *= rp[j];
  }
  return g.make(std::move(out), {m, r}, m->requires_grad || r->requires_grad, [](Node<S>& n) {
    Node<S>* m = n.parents[0];
    Node<S>* r = n.parents[1];
    const S* rp = r->value.data();
    if (m->requires_grad) {
      Tensor<S>& gm = m->ensure_grad();
      for (std::size_t i = 0; i < n.grad.rows(); ++i) {
        const S* urow = n.grad.row(i);
        S* grow = gm.row(i);
        for (std::size_t j = 0; j < n.grad.cols(); ++j) grow[j] += urow[j] * rp[j];
      }
    }
    if (r->requires_grad) {
      S* gr = r->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.rows(); ++i) {
        const S* urow = n.grad.row(i);
        const S* mrow = m->value.row(i);
        for (std::size_t j = 0; j < n.grad.cols(); ++j) gr[j] += urow[j] * mrow[j];
      }
    }
  });
}

/// Per-row interpolation out = m*a + (1-m)*b with a constant [M, 1] mask.
/// Used to carry LSTM state across padded batch positions.
template <class S>
Node<S>* mask_lerp(Graph<S>& g, Node<S>* a, Node<S>* b, Tensor<S> mask) {
  detail::check_same_shape(a, b, "mask_lerp");
  require(mask.rows() == a->value.rows() && mask.cols() == 1, "mask_lerp: mask shape [", mask.rows(),
          " x ", mask.cols(), "] does not match [", a->value.rows(), " x 1]");
  Tensor<S> out(a->value.rows(), a->value.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const S m = mask(i, 0);
    const S* ar = a->value.row(i);
    const S* br = b->value.row(i);
    S* orow = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] = m * ar[j] + (S(1) - m) * br[j];
  }
  return g.make(std::move(out), {a, b}, a->requires_grad || b->requires_grad,
                [mask = std::move(mask)](Node<S>& n) {
                  Node<S>* a = n.parents[0];
                  Node<S>* b = n.parents[1];
                  for (std::size_t i = 0; i < n.grad.rows(); ++i) {
                    const S m = mask(i, 0);
                    const S* urow = n.grad.row(i);
                    if (a->requires_grad) {
                      S* ga = a->ensure_grad().row(i);
                      for (std::size_t j = 0; j < n.grad.cols(); ++j) ga[j] += m * urow[j];
                    }
                    if (b->requires_grad) {
                      S* gb = b->ensure_grad().row(i);
                      for (std::size_t j = 0; j < n.grad.cols(); ++j) gb[j] += (S(1) - m) * urow[j];
                    }
                  }
                });
}

template <class S>
Node<S>* scale(Graph<S>& g, Node<S>* a, S c) {
  Tensor<S> out = a->value;
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] *= c;
  return g.make(std::move(out), {a}, a->requires_grad, [c](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    S* gp = a->ensure_grad().data();
    const S* up = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += c * up[i];
  });
}

template <class S>
Node<S>* concat_cols(Graph<S>& g, const std::vector<Node<S>*>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0]->value.rows();
  std::size_t cols = 0;
  for (auto* p : parts) {
    require(p->value.rows() == rows, "concat_cols: row mismatch ", p->value.rows(), " vs ", rows);
    cols += p->value.cols();
  }
  Tensor<S> out(rows, cols);
  std::size_t off = 0;
  for (auto* p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      const S* src = p->value.row(i);
      S* dst = out.row(i) + off;
      std::copy(src, src + p->value.cols(), dst);
    }
    off += p->value.cols();
  }
  return g.make(std::move(out), parts, detail::any_grad(parts), [](Node<S>& n) {
    std::size_t off = 0;
    for (Node<S>* p : n.parents) {
      const std::size_t pc = p->value.cols();
      if (p->requires_grad) {
        Tensor<S>& gp = p->ensure_grad();
        for (std::size_t i = 0; i < n.grad.rows(); ++i) {
          const S* urow = n.grad.row(i) + off;
          S* grow = gp.row(i);
          for (std::size_t j = 0; j < pc; ++j) grow[j] += urow[j];
        }
      }
      off += pc;
    }
  });
}

template <class S>
Node<S>* concat_rows(Graph<S>& g, const std::vector<Node<S>*>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts[0]->value.cols();
  std::size_t rows = 0;
  for (auto* p : parts) {
    require(p->value.cols() == cols, "concat_rows: column mismatch ", p->value.cols(), " vs ", cols);
    rows += p->value.rows();
  }
  Tensor<S> out(rows, cols);
  std::size_t off = 0;
  for (auto* p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.size(), out.data() + off);
    off += p->value.size();
  }
  return g.make(std::move(out), parts, detail::any_grad(parts), [](Node<S>& n) {
    std::size_t off = 0;
    for (Node<S>* p : n.parents) {
      if (p->requires_grad) {
        S* gp = p->ensure_grad().data();
        const S* up = n.grad.data() + off;
        for (std::size_t i = 0; i < p->value.size(); ++i) gp[i] += up[i];
      }
      off += p->value.size();
    }
  });
}

template <class S>
Node<S>* slice_cols(Graph<S>& g, Node<S>* a, std::size_t off, std::size_t len) {
  require(off + len <= a->value.cols(), "slice_cols: range [", off, ", ", off + len,
          ") exceeds width ", a->value.cols());
  Tensor<S> out(a->value.rows(), len);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const S* src = a->value.row(i) + off;
    std::copy(src, src + len, out.row(i));
  }
  return g.make(std::move(out), {a}, a->requires_grad, [off, len](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    Tensor<S>& gp = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.rows(); ++i) {
      const S* urow = n.grad.row(i);
      S* grow = gp.row(i) + off;
      for (std::size_t j = 0; j < len; ++j) grow[j] += urow[j];
    }
  });
}

/// Row gather; index -1 yields a zero row (padding). Doubles as the
/// embedding lookup (table rows indexed by symbol ids).
template <class S>
Node<S>* rows(Graph<S>& g, Node<S>* a, std::vector<std::int64_t> indices) {
  const std::size_t cols = a->value.cols();
  Tensor<S> out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t r = indices[i];
    if (r < 0) continue;  // already zero
    require(static_cast<std::size_t>(r) < a->value.rows(), "rows: index ", r, " out of range ",
            a->value.rows());
    std::copy(a->value.row(r), a->value.row(r) + cols, out.row(i));
  }
  return g.make(std::move(out), {a}, a->requires_grad, [idx = std::move(indices)](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    Tensor<S>& gp = a->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      const S* urow = n.grad.row(i);
      S* grow = gp.row(static_cast<std::size_t>(idx[i]));
      for (std::size_t j = 0; j < n.grad.cols(); ++j) grow[j] += urow[j];
    }
  });
}

/// Windowed gather for 1-D convolution over concatenated segments.
/// Input rows hold per-position feature vectors; `offsets` (size n_seg + 1)
/// delimits the segments. For kernel k and dilation d, the output row at
/// position p contains the k taps p + (t - (k-1)/2) * d restricted to p's own
/// segment, zero-padded outside it ("same" padding, so every segment keeps
/// its length).
template <class S>
Node<S>* im2col_seg(Graph<S>& g, Node<S>* a, const std::vector<std::size_t>& offsets,
                    std::size_t kernel, std::size_t dilation) {
  require(kernel % 2 == 1, "im2col_seg: kernel must be odd, got ", kernel);
  require(!offsets.empty() && offsets.back() == a->value.rows(),
          "im2col_seg: segment offsets do not cover the input");
  const std::size_t C = a->value.cols();
  const std::size_t N = a->value.rows();
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(dilation);

  // per-position source index for each tap, -1 = zero pad
  std::vector<std::int64_t> src(N * kernel, -1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(offsets[s]);
    const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(offsets[s + 1]);
    for (std::ptrdiff_t p = lo; p < hi; ++p) {
      for (std::size_t t = 0; t < kernel; ++t) {
        const std::ptrdiff_t q = p + (static_cast<std::ptrdiff_t>(t) - r) * d;
        if (q >= lo && q < hi) src[static_cast<std::size_t>(p) * kernel + t] = q;
      }
    }
  }

  Tensor<S> out(N, kernel * C);
  for (std::size_t p = 0; p < N; ++p) {
    S* orow = out.row(p);
    for (std::size_t t = 0; t < kernel; ++t) {
      const std::int64_t q = src[p * kernel + t];
      if (q < 0) continue;
      std::copy(a->value.row(q), a->value.row(q) + C, orow + t * C);
    }
  }
  return g.make(std::move(out), {a}, a->requires_grad,
                [src = std::move(src), kernel, C](Node<S>& n) {
                  Node<S>* a = n.parents[0];
                  if (!a->requires_grad) return;
                  Tensor<S>& gp = a->ensure_grad();
                  for (std::size_t p = 0; p < n.grad.rows(); ++p) {
                    const S* urow = n.grad.row(p);
                    for (std::size_t t = 0; t < kernel; ++t) {
                      const std::int64_t q = src[p * kernel + t];
                      if (q < 0) continue;
                      S* grow = gp.row(static_cast<std::size_t>(q));
                      for (std::size_t j = 0; j < C; ++j) grow[j] += urow[t * C + j];
                    }
                  }
                });
}

/// Column-wise max over each row segment (max pooling over time).
template <class S>
Node<S>* segment_max(Graph<S>& g, Node<S>* a, const std::vector<std::size_t>& offsets) {
  require(!offsets.empty() && offsets.back() == a->value.rows(),
          "segment_max: segment offsets do not cover the input");
  const std::size_t n_seg = offsets.size() - 1;
  const std::size_t C = a->value.cols();
  Tensor<S> out(n_seg, C);
  std::vector<std::size_t> argmax(n_seg * C);
  for (std::size_t s = 0; s < n_seg; ++s) {
    require(offsets[s] < offsets[s + 1], "segment_max: empty segment ", s);
    S* orow = out.row(s);
    for (std::size_t j = 0; j < C; ++j) {
      std::size_t best = offsets[s];
      S bv = a->value(best, j);
      for (std::size_t p = offsets[s] + 1; p < offsets[s + 1]; ++p) {
        if (a->value(p, j) > bv) {
          bv = a->value(p, j);
          best = p;
        }
      }
      orow[j] = bv;
      argmax[s * C + j] = best;
    }
  }
  return g.make(std::move(out), {a}, a->requires_grad, [am = std::move(argmax), C](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    Tensor<S>& gp = a->ensure_grad();
    for (std::size_t s = 0; s < n.grad.rows(); ++s) {
      const S* urow = n.grad.row(s);
      for (std::size_t j = 0; j < C; ++j) gp(am[s * C + j], j) += urow[j];
    }
  });
}

/// Column-wise mean over each row segment.
template <class S>
Node<S>* segment_mean(Graph<S>& g, Node<S>* a, const std::vector<std::size_t>& offsets) {
  require(!offsets.empty() && offsets.back() == a->value.rows(),
          "segment_mean: segment offsets do not cover the input");
  const std::size_t n_seg = offsets.size() - 1;
  const std::size_t C = a->value.cols();
  Tensor<S> out(n_seg, C);
  for (std::size_t s = 0; s < n_seg; ++s) {
    require(offsets[s] < offsets[s + 1], "segment_mean: empty segment ", s);
    const S inv = S(1) / static_cast<S>(offsets[s + 1] - offsets[s]);
    S* orow = out.row(s);
    for (std::size_t p = offsets[s]; p < offsets[s + 1]; ++p) {
      const S* arow = a->value.row(p);
      for (std::size_t j = 0; j < C; ++j) orow[j] += arow[j];
    }
    for (std::size_t j = 0; j < C; ++j) orow[j] *= inv;
  }
  return g.make(std::move(out), {a}, a->requires_grad, [offs = offsets](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    Tensor<S>& gp = a->ensure_grad();
    for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
      const S inv = S(1) / static_cast<S>(offs[s + 1] - offs[s]);
      const S* urow = n.grad.row(s);
      for (std::size_t p = offs[s]; p < offs[s + 1]; ++p) {
        S* grow = gp.row(p);
        for (std::size_t j = 0; j < n.grad.cols(); ++j) grow[j] += inv * urow[j];
      }
    }
  });
}

template <class S>
Node<S>* tanh(Graph<S>& g, Node<S>* a) {
  Tensor<S> out = a->value;
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] = std::tanh(op[i]);
  return g.make(std::move(out), {a}, a->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    S* gp = a->ensure_grad().data();
    const S* up = n.grad.data();
    const S* y = n.value.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i] * (S(1) - y[i] * y[i]);
  });
}

template <class S>
Node<S>* sigmoid(Graph<S>& g, Node<S>* a) {
  Tensor<S> out = a->value;
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] = S(1) / (S(1) + std::exp(-op[i]));
  return g.make(std::move(out), {a}, a->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    S* gp = a->ensure_grad().data();
    const S* up = n.grad.data();
    const S* y = n.value.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i] * y[i] * (S(1) - y[i]);
  });
}

template <class S>
Node<S>* relu(Graph<S>& g, Node<S>* a) {
  Tensor<S> out = a->value;
  S* op = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) op[i] = op[i] > S(0) ? op[i] : S(0);
  return g.make(std::move(out), {a}, a->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    S* gp = a->ensure_grad().data();
    const S* up = n.grad.data();
    const S* y = n.value.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += y[i] > S(0) ? up[i] : S(0);
  });
}

/// Row-wise softmax. An optional 0/1 mask excludes entries entirely: they get
/// probability exactly 0 and pass no gradient, avoiding -inf arithmetic.
template <class S>
Node<S>* softmax_rows(Graph<S>& g, Node<S>* a, const Tensor<S>* mask = nullptr) {
  if (mask)
    require(mask->same_shape(a->value), "softmax_rows: mask shape [", mask->rows(), " x ",
            mask->cols(), "] does not match input");
  Tensor<S> out(a->value.rows(), a->value.cols());
  const std::size_t C = a->value.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const S* x = a->value.row(i);
    S* y = out.row(i);
    S mx = -std::numeric_limits<S>::infinity();
    for (std::size_t j = 0; j < C; ++j)
      if ((!mask || (*mask)(i, j) != S(0)) && x[j] > mx) mx = x[j];
    require(mx > -std::numeric_limits<S>::infinity(), "softmax_rows: row ", i, " fully masked");
    S sum = S(0);
    for (std::size_t j = 0; j < C; ++j) {
      if (mask && (*mask)(i, j) == S(0)) {
        y[j] = S(0);
      } else {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
      }
    }
    const S inv = S(1) / sum;
    for (std::size_t j = 0; j < C; ++j) y[j] *= inv;
  }
  return g.make(std::move(out), {a}, a->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    Tensor<S>& gp = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.rows(); ++i) {
      const S* u = n.grad.row(i);
      const S* y = n.value.row(i);
      S dot = S(0);
      for (std::size_t j = 0; j < n.grad.cols(); ++j) dot += u[j] * y[j];
      S* grow = gp.row(i);
      for (std::size_t j = 0; j < n.grad.cols(); ++j) grow[j] += y[j] * (u[j] - dot);
    }
  });
}

/// Sum over rows of -log softmax(x)[target]. Targets index columns; masked
/// entries (0 in the optional 0/1 mask) are excluded from the partition sum.
template <class S>
Node<S>* cross_entropy_sum(Graph<S>& g, Node<S>* a, const std::vector<std::size_t>& targets,
                           const Tensor<S>* mask = nullptr) {
  require(targets.size() == a->value.rows(), "cross_entropy_sum: ", targets.size(),
          " targets for ", a->value.rows(), " rows");
  if (mask)
    require(mask->same_shape(a->value), "cross_entropy_sum: mask shape mismatch");
  const std::size_t C = a->value.cols();
  Tensor<S> probs(a->value.rows(), C);
  S loss = S(0);
  for (std::size_t i = 0; i < a->value.rows(); ++i) {
    require(targets[i] < C, "cross_entropy_sum: target ", targets[i], " out of range ", C);
    require(!mask || (*mask)(i, targets[i]) != S(0), "cross_entropy_sum: target ", targets[i],
            " is masked in row ", i);
    const S* x = a->value.row(i);
    S* p = probs.row(i);
    S mx = -std::numeric_limits<S>::infinity();
    for (std::size_t j = 0; j < C; ++j)
      if ((!mask || (*mask)(i, j) != S(0)) && x[j] > mx) mx = x[j];
    S sum = S(0);
    for (std::size_t j = 0; j < C; ++j) {
      if (mask && (*mask)(i, j) == S(0)) {
        p[j] = S(0);
      } else {
        p[j] = std::exp(x[j] - mx);
        sum += p[j];
      }
    }
    const S inv = S(1) / sum;
    for (std::size_t j = 0; j < C; ++j) p[j] *= inv;
    loss += std::log(sum) + mx - x[targets[i]];
  }
  return g.make(Tensor<S>::scalar(loss), {a}, a->requires_grad,
                [probs = std::move(probs), tgt = targets](Node<S>& n) {
                  Node<S>* a = n.parents[0];
                  if (!a->requires_grad) return;
                  const S u = n.grad(0, 0);
                  Tensor<S>& gp = a->ensure_grad();
                  for (std::size_t i = 0; i < probs.rows(); ++i) {
                    const S* p = probs.row(i);
                    S* grow = gp.row(i);
                    for (std::size_t j = 0; j < probs.cols(); ++j) grow[j] += u * p[j];
                    grow[tgt[i]] -= u;
                  }
                });
}

/// Inverted dropout: keeps elements with probability 1-rate, scaled by
/// 1/(1-rate). Callers skip the op entirely at inference.
template <class S>
Node<S>* dropout(Graph<S>& g, Node<S>* a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  require(rate < 1.0, "dropout: rate must be < 1, got ", rate);
  Tensor<S> mask(a->value.rows(), a->value.cols());
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i) mask.at(i) = rng.bernoulli(rate) ? S(0) : keep;
  Tensor<S> out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= mask.at(i);
  return g.make(std::move(out), {a}, a->requires_grad, [mask = std::move(mask)](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    S* gp = a->ensure_grad().data();
    const S* up = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) gp[i] += up[i] * mask.at(i);
  });
}

/// Variational dropout mask: one [1, cols] row sampled per sequence and
/// broadcast over all time steps via mul_rows.
template <class S>
Tensor<S> sample_dropout_row(std::size_t cols, double rate, Rng& rng) {
  Tensor<S> mask(1, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (std::size_t j = 0; j < cols; ++j) mask.at(j) = rng.bernoulli(rate) ? S(0) : keep;
  return mask;
}

template <class S>
Node<S>* sum_all(Graph<S>& g, Node<S>* a) {
  S total = S(0);
  for (std::size_t i = 0; i < a->value.size(); ++i) total += a->value.at(i);
  return g.make(Tensor<S>::scalar(total), {a}, a->requires_grad, [](Node<S>& n) {
    Node<S>* a = n.parents[0];
    if (!a->requires_grad) return;
    const S u = n.grad(0, 0);
    S* gp = a->ensure_grad().data();
    for (std::size_t i = 0; i < a->value.size(); ++i) gp[i] += u;
  });
}

}  // namespace ops
}  // namespace morphparse
