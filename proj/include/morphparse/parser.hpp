#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "morphparse/features.hpp"
#include "morphparse/nn.hpp"

namespace morphparse {

namespace cle {

constexpr double kBanned = -1e30;  // finite stand-in for log(0); avoids inf-inf

/// Maximum spanning arborescence rooted at node 0 by recursive cycle
/// contraction. `w[d][h]` is the weight of arc h -> d; row 0 is unused.
/// Returns head[d] for d in 1..n (head[0] = -1). Argmax ties go to the
/// lowest head index.
inline std::vector<int> max_arborescence(const std::vector<std::vector<double>>& w) {
  const int m = static_cast<int>(w.size());
  std::vector<int> best(m, -1);
  for (int d = 1; d < m; ++d) {
    double bw = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < m; ++h)
      if (h != d && w[d][h] > bw) {
        bw = w[d][h];
        best[d] = h;
      }
  }
  if (m <= 2) return best;

  // find one cycle in the greedy functional graph
  std::vector<int> color(m, 0);  // 0 new, 1 on path, 2 settled
  color[0] = 2;
  std::vector<int> cycle;
  for (int s = 1; s < m && cycle.empty(); ++s) {
    if (color[s]) continue;
    std::vector<int> path;
    int v = s;
    while (v > 0 && color[v] == 0) {
      color[v] = 1;
      path.push_back(v);
      v = best[v];
    }
    if (v > 0 && color[v] == 1)
      cycle.assign(std::find(path.begin(), path.end(), v), path.end());
    for (int p : path) color[p] = 2;
  }
  if (cycle.empty()) return best;

  std::vector<char> in_cycle(m, 0);
  for (int v : cycle) in_cycle[v] = 1;

  // contract the cycle into one supernode, keeping enough bookkeeping to
  // expand the recursive solution back to original arcs
  std::vector<int> to_new(m, -1), from_new;
  from_new.push_back(0);
  to_new[0] = 0;
  for (int v = 1; v < m; ++v)
    if (!in_cycle[v]) {
      to_new[v] = static_cast<int>(from_new.size());
      from_new.push_back(v);
    }
  const int c = static_cast<int>(from_new.size());  // supernode id
  const int m2 = c + 1;

  std::vector<std::vector<double>> w2(m2, std::vector<double>(m2, kBanned));
  std::vector<int> enter_d(m2, -1);  // arc h2 -> c enters the cycle at this node
  std::vector<int> leave_h(m2, -1);  // arc c -> d2 leaves the cycle from this node
  for (int d = 1; d < m; ++d) {
    for (int h = 0; h < m; ++h) {
      if (h == d) continue;
      if (!in_cycle[d] && !in_cycle[h]) {
        w2[to_new[d]][to_new[h]] = w[d][h];
      } else if (!in_cycle[d] && in_cycle[h]) {
        if (w[d][h] > w2[to_new[d]][c]) {
          w2[to_new[d]][c] = w[d][h];
          leave_h[to_new[d]] = h;
        }
      } else if (in_cycle[d] && !in_cycle[h]) {
        const double gain = w[d][h] - w[d][best[d]];  // swap cost of breaking the cycle at d
        if (gain > w2[c][to_new[h]]) {
          w2[c][to_new[h]] = gain;
          enter_d[to_new[h]] = d;
        }
      }
    }
  }

  const std::vector<int> sub = max_arborescence(w2);
  std::vector<int> heads(m, -1);
  for (int d2 = 1; d2 < m2; ++d2) {
    if (d2 == c) continue;
    heads[from_new[d2]] = sub[d2] == c ? leave_h[d2] : from_new[sub[d2]];
  }
  const int entry = enter_d[sub[c]];  // cycle node whose arc is replaced
  for (int v : cycle) heads[v] = v == entry ? from_new[sub[c]] : best[v];
  return heads;
}

inline double tree_weight(const std::vector<std::vector<double>>& w,
                          const std::vector<int>& heads) {
  double total = 0;
  for (std::size_t d = 1; d < heads.size(); ++d) total += w[d][heads[d]];
  return total;
}

/// True when every node reaches the root and the root has exactly one child.
inline bool valid_single_root(const std::vector<int>& heads) {
  const int m = static_cast<int>(heads.size());
  int root_children = 0;
  for (int d = 1; d < m; ++d) root_children += heads[d] == 0;
  if (root_children != 1) return false;
  for (int d = 1; d < m; ++d) {
    int v = d, hops = 0;
    while (v != 0 && hops <= m) v = heads[v], ++hops;
    if (v != 0) return false;
  }
  return true;
}

}  // namespace cle

/// Highest-probability single-rooted dependency tree from a row-softmaxed
/// adjacency matrix. Row i is the head distribution of token i+1 over
/// candidates 0..n (0 = root). Returns heads for tokens 1..n.
template <class S>
std::vector<int> decode_tree(const Tensor<S>& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  require(n >= 1 && adjacency.cols() == adjacency.rows() + 1, "decode_tree: adjacency is [",
          adjacency.rows(), " x ", adjacency.cols(), "], expected [n x n+1]");
  std::vector<std::vector<double>> w(n + 1, std::vector<double>(n + 1, cle::kBanned));
  for (int d = 1; d <= n; ++d)
    for (int h = 0; h <= n; ++h) {
      if (h == d) continue;
      const double p = static_cast<double>(adjacency(d - 1, h));
      w[d][h] = p > 0 ? std::log(p) : cle::kBanned;
    }

  // row argmax is the unconstrained optimum; keep it when already a tree
  std::vector<int> greedy(n + 1, -1);
  for (int d = 1; d <= n; ++d) {
    double bw = -std::numeric_limits<double>::infinity();
    for (int h = 0; h <= n; ++h)
      if (h != d && w[d][h] > bw) {
        bw = w[d][h];
        greedy[d] = h;
      }
  }
  std::vector<int> best_heads;
  if (cle::valid_single_root(greedy)) {
    best_heads = greedy;
  } else {
    double best_weight = -std::numeric_limits<double>::infinity();
    for (int r = 1; r <= n; ++r) {
      auto wr = w;
      for (int d = 1; d <= n; ++d)
        if (d != r) wr[d][0] = cle::kBanned;
      const std::vector<int> heads = cle::max_arborescence(wr);
      if (!cle::valid_single_root(heads)) continue;
      const double weight = cle::tree_weight(wr, heads);
      if (weight > best_weight) {
        best_weight = weight;
        best_heads = heads;
      }
    }
    require(!best_heads.empty(), "decode_tree: no valid tree found");
  }
  return {best_heads.begin() + 1, best_heads.end()};
}

/// Arc and label scoring. Every sentence is augmented with a trainable root
/// vector at position 0; arc scores are dot products of projected dependent
/// and head-candidate vectors, and labels are classified from the dependent
/// projection concatenated with the adjacency-weighted average of head
/// projections (soft heads in training and inference alike).
template <class S>
struct Parser {
  const ModelConfig* config = nullptr;
  nn::Parameter<S>* root = nullptr;  // [1, 2H]
  nn::Dense<S> head_proj;
  nn::Dense<S> dep_proj;
  nn::Dense<S> label_head_proj;
  nn::Dense<S> label_dep_proj;
  nn::Dense<S> label_out;

  static Parser create(nn::ParameterStore<S>& store, const ModelConfig& config,
                       const Vocabularies& vocabs, Rng& rng) {
    Parser p;
    p.config = &config;
    const std::size_t in = config.global_dim();
    p.root = store.create("parser.root", 1, in, nn::Init::normal, rng, config.l2_embeddings);
    p.head_proj = nn::Dense<S>::create(store, "parser.head_proj", in, config.arc_dim, rng);
    p.dep_proj = nn::Dense<S>::create(store, "parser.dep_proj", in, config.arc_dim, rng);
    if (config.has_target(Target::deprel)) {
      p.label_head_proj =
          nn::Dense<S>::create(store, "parser.label_head_proj", in, config.label_dim, rng);
      p.label_dep_proj =
          nn::Dense<S>::create(store, "parser.label_dep_proj", in, config.label_dim, rng);
      p.label_out = nn::Dense<S>::create(store, "parser.label_out", 2 * config.label_dim,
                                         vocabs.deprel.size(), rng);
    }
    return p;
  }

  struct Forward {
    std::vector<Node<S>*> scores;     // per sentence [n, n+1] raw arc logits
    std::vector<Node<S>*> adjacency;  // per sentence row-softmaxed, self-arcs exactly 0
    std::vector<Tensor<S>> self_masks;
    Node<S>* label_logits = nullptr;  // [total_tokens, |deprel|]
    Node<S>* label_dep = nullptr;     // [total_tokens, label_dim], exported embeddings
  };

  Forward forward(nn::Workspace<S>& ws, Node<S>* global,
                  const std::vector<std::size_t>& lengths) const {
    Graph<S>& g = ws.g;
    const double fd = config->fc_dropout;
    const bool labels = config->has_target(Target::deprel);

    // position 0 of every sentence's candidate list is the shared root row
    Node<S>* aug = ops::concat_rows(g, {ws.use(root), global});
    Node<S>* head_all = ops::tanh(g, head_proj.apply(ws, ws.maybe_dropout(aug, fd)));
    Node<S>* dep_all = ops::tanh(g, dep_proj.apply(ws, ws.maybe_dropout(global, fd)));
    Node<S>* lhead_all =
        labels ? ops::tanh(g, label_head_proj.apply(ws, ws.maybe_dropout(aug, fd))) : nullptr;
    Node<S>* ldep_all =
        labels ? ops::tanh(g, label_dep_proj.apply(ws, ws.maybe_dropout(global, fd))) : nullptr;

    Forward out;
    std::vector<Node<S>*> label_inputs;
    std::size_t offset = 0;
    for (std::size_t n : lengths) {
      std::vector<std::int64_t> cand(n + 1), toks(n);
      cand[0] = 0;  // shared root, then this sentence's tokens shifted past it
      for (std::size_t i = 0; i < n; ++i) {
        cand[i + 1] = static_cast<std::int64_t>(1 + offset + i);
        toks[i] = static_cast<std::int64_t>(offset + i);
      }
      Node<S>* H = ops::rows(g, head_all, cand);
      Node<S>* D = ops::rows(g, dep_all, toks);
      Node<S>* scores = ops::matmul_nt(g, D, H);

      Tensor<S> mask(n, n + 1);
      mask.fill(S(1));
      for (std::size_t i = 0; i < n; ++i) mask(i, i + 1) = S(0);  // token is not its own head
      Node<S>* adj = ops::softmax_rows(g, scores, &mask);
      out.scores.push_back(scores);
      out.adjacency.push_back(adj);
      out.self_masks.push_back(std::move(mask));

      if (labels) {
        Node<S>* LH = ops::rows(g, lhead_all, cand);
        Node<S>* soft_head = ops::matmul(g, adj, LH);
        Node<S>* LD = ops::rows(g, ldep_all, toks);
        label_inputs.push_back(ops::concat_cols(g, {LD, soft_head}));
      }
      offset += n;
    }
    if (labels) {
      Node<S>* cat = label_inputs.size() == 1 ? label_inputs[0]
                                              : ops::concat_rows(g, label_inputs);
      out.label_logits = label_out.apply(ws, ws.maybe_dropout(cat, fd));
      out.label_dep = ldep_all;
    }
    return out;
  }
};

}  // namespace morphparse
