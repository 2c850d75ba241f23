#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "morphparse/adam.hpp"
#include "morphparse/archive.hpp"
#include "morphparse/model.hpp"

namespace morphparse {

struct EpochStats {
  std::size_t epoch = 0;              // 1-based
  double lr = 0;
  double train_loss = 0;              // mean weighted batch loss
  std::map<std::string, double> task_losses;
  double valid_score = 0;             // mean of enabled-target accuracies
  std::map<std::string, double> accuracies;
  bool improved = false;
  double seconds = 0;
};

/// Joint multi-task training: weighted loss, plateau-halved learning rate
/// (at most twice), early stop, best-checkpoint selection. All randomness
/// flows through one seeded generator, so a fixed seed fixes the run.
template <class S>
class Trainer {
 public:
  Trainer(JointModel<S>& model, TrainConfig config, const WordVectors* vectors = nullptr)
      : model_(model),
        tc_(config),
        vectors_(vectors),
        adam_(model.store, config.lr, config.beta1, config.beta2, config.eps),
        rng_(config.seed) {}

  struct Result {
    double best_score = 0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<double> lr_history;  // lr in effect each epoch
    std::vector<EpochStats> history;
    nlohmann::json record;           // manifest block for the archive
  };

  using EpochCallback = std::function<void(const EpochStats&)>;

  /// Runs until the schedule stops, then restores the best weights.
  Result train(const conllu::Treebank& train_tb, const conllu::Treebank& valid_tb,
               const EpochCallback& on_epoch = {}) {
    require(!train_tb.sentences.empty(), "training data is empty");
    require(!valid_tb.sentences.empty(), "validation data is empty");
    const std::uint64_t frozen = vectors_ ? vectors_->checksum() : 0;

    std::vector<EncodedSentence> train_enc, valid_enc;
    std::vector<std::size_t> train_idx, valid_idx;
    encode(train_tb, true, train_enc, train_idx);
    encode(valid_tb, false, valid_enc, valid_idx);

    Result result;
    while (!stopped_ && epoch_ < tc_.max_epochs) {
      const EpochStats stats = run_epoch(train_enc, train_idx, valid_enc, valid_idx, valid_tb);
      result.lr_history.push_back(stats.lr);
      result.history.push_back(stats);
      if (on_epoch) on_epoch(stats);
    }
    restore_best();
    require(!vectors_ || vectors_->checksum() == frozen, "frozen word vectors were modified");

    result.best_score = best_score_;
    result.best_epoch = best_epoch_;
    result.epochs_run = epoch_;
    result.record["loss_weights"] = tc_.to_json().at("loss_weights");
    result.record["lr_history"] = result.lr_history;
    result.record["best_epoch"] = best_epoch_;
    result.record["best_score"] = best_score_;
    result.record["epochs"] = epoch_;
    result.record["seed"] = tc_.seed;
    return result;
  }

  /// One full pass: optimize, validate, update the plateau schedule.
  EpochStats run_epoch(const std::vector<EncodedSentence>& train_enc,
                       const std::vector<std::size_t>& train_idx,
                       const std::vector<EncodedSentence>& valid_enc,
                       const std::vector<std::size_t>& valid_idx,
                       const conllu::Treebank& valid_tb) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = ++epoch_;
    stats.lr = adam_.learning_rate();

    auto batches = make_batches(train_enc);
    rng_.shuffle(batches);

    std::map<std::string, double> task_sums;
    std::map<std::string, std::size_t> task_batches;
    double loss_sum = 0;
    std::size_t n_batches = 0;
    for (const auto& batch_ids : batches) {
      std::vector<const EncodedSentence*> batch;
      std::vector<std::size_t> source_ids;
      for (std::size_t id : batch_ids) {
        batch.push_back(&train_enc[id]);
        source_ids.push_back(train_idx[id]);
      }
      Graph<S> g;
      nn::Workspace<S> ws(g, rng_, true);
      const auto fwd = model_.forward(ws, batch, vectors_, source_ids);
      const auto losses = model_.losses(ws, fwd, tc_);
      if (!losses.total) continue;
      const double loss = static_cast<double>(losses.total->value(0, 0));
      require(std::isfinite(loss), "training diverged: loss ", loss, " in epoch ", epoch_,
              " after ", n_batches, " batches (lr ", adam_.learning_rate(), ")");
      loss_sum += loss;
      ++n_batches;
      for (const auto& task : losses.tasks) {
        task_sums[target_name(task.target)] += static_cast<double>(task.node->value(0, 0));
        task_batches[target_name(task.target)] += 1;
      }
      g.backward(*losses.total);
      adam_.apply(ws.bound);
    }
    require(n_batches > 0, "no supervised batches in the training data");
    stats.train_loss = loss_sum / static_cast<double>(n_batches);
    for (const auto& [name, sum] : task_sums)
      stats.task_losses[name] = sum / static_cast<double>(task_batches[name]);

    stats.accuracies = validate(valid_enc, valid_idx, valid_tb);
    double score = 0;
    for (const auto& [name, acc] : stats.accuracies) score += acc;
    stats.valid_score = stats.accuracies.empty() ? 0 : score / stats.accuracies.size();

    stats.improved = stats.valid_score > best_score_ + tc_.min_improvement;
    if (stats.improved) {
      best_score_ = stats.valid_score;
      best_epoch_ = epoch_;
      snapshot_best();
      plateau_count_ = 0;
    } else if (++plateau_count_ >= tc_.patience) {
      if (reductions_ < tc_.max_lr_reductions) {
        ++reductions_;
        adam_.set_learning_rate(adam_.learning_rate() / 2);
        plateau_count_ = 0;
        log_info("validation plateau: lr halved to ", adam_.learning_rate(), " (reduction ",
                 reductions_, "/", tc_.max_lr_reductions, ")");
      } else {
        stopped_ = true;
      }
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  /// Exact-match accuracy per enabled target on the validation set; heads
  /// score as attachment, labels as labeled attachment.
  std::map<std::string, double> validate(const std::vector<EncodedSentence>& enc,
                                         const std::vector<std::size_t>& idx,
                                         const conllu::Treebank& tb) {
    std::map<std::string, std::size_t> hit, total;
    for (std::size_t begin = 0; begin < enc.size(); begin += tc_.batch_size) {
      const std::size_t end = std::min(enc.size(), begin + tc_.batch_size);
      std::vector<const EncodedSentence*> batch;
      std::vector<std::size_t> source_ids;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&enc[i]);
        source_ids.push_back(idx[i]);
      }
      const auto pred = model_.predict(batch, vectors_, source_ids, rng_);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const conllu::Sentence& gold = *batch[b]->source;
        const conllu::Sentence& sys = pred.sentences[b];
        for (std::size_t i = 0; i < gold.tokens.size(); ++i) {
          const conllu::Token& g = gold.tokens[i];
          const conllu::Token& p = sys.tokens[i];
          if (model_.config.has_target(Target::upos) && g.upos != "_") {
            total["upos"] += 1;
            hit["upos"] += g.upos == p.upos;
          }
          if (model_.config.has_target(Target::xpos) && g.xpos != "_") {
            total["xpos"] += 1;
            hit["xpos"] += g.xpos == p.xpos;
          }
          if (model_.config.has_target(Target::ufeats)) {
            total["ufeats"] += 1;
            hit["ufeats"] += conllu::feats_key(g) == conllu::feats_key(p);
          }
          if (model_.config.has_target(Target::lemma) && g.lemma != "_") {
            total["lemma"] += 1;
            hit["lemma"] += g.lemma == p.lemma;
          }
          if (model_.config.has_target(Target::head) && g.head >= 0) {
            total["uas"] += 1;
            hit["uas"] += g.head == p.head;
            if (model_.config.has_target(Target::deprel)) {
              total["las"] += 1;
              hit["las"] += g.head == p.head && g.deprel == p.deprel;
            }
          }
        }
      }
    }
    std::map<std::string, double> acc;
    for (const auto& [name, n] : total)
      acc[name] = n == 0 ? 0.0 : static_cast<double>(hit[name]) / static_cast<double>(n);
    return acc;
  }

  /// Everything needed to continue training bit-identically: counters, RNG,
  /// optimizer moments, live weights, and the best snapshot.
  void save_state(std::ostream& out) const {
    io::write_u32(out, 0x4d505453);  // "MPTS"
    io::write_u32(out, 1);
    io::write_u64(out, epoch_);
    io::write_u64(out, best_epoch_);
    io::write_u64(out, plateau_count_);
    io::write_u64(out, reductions_);
    io::write_u64(out, stopped_ ? 1 : 0);
    io::write_f64(out, best_score_);
    rng_.save(out);
    adam_.save(out);
    io::write_u64(out, model_.store.size());
    for (std::size_t i = 0; i < model_.store.size(); ++i)
      io::write_tensor(out, model_.store.at(i).value);
    io::write_u64(out, best_params_.size());
    for (const auto& t : best_params_) io::write_tensor(out, t);
    require(out.good(), "training state write failed");
  }

  void load_state(std::istream& in) {
    require(io::read_u32(in) == 0x4d505453, "not a training state file");
    require(io::read_u32(in) == 1, "unsupported training state version");
    epoch_ = io::read_u64(in);
    best_epoch_ = io::read_u64(in);
    plateau_count_ = io::read_u64(in);
    reductions_ = io::read_u64(in);
    stopped_ = io::read_u64(in) != 0;
    best_score_ = io::read_f64(in);
    rng_.load(in);
    require(in.get() == '\n', "training state: generator block is unterminated");
    adam_.load(in);
    const std::uint64_t n = io::read_u64(in);
    require(n == model_.store.size(), "training state holds ", n, " parameters, model needs ",
            model_.store.size());
    for (std::size_t i = 0; i < n; ++i) {
      Tensor<S> t = io::read_tensor<S>(in);
      require(t.same_shape(model_.store.at(i).value), "training state parameter ", i,
              " shape mismatch");
      model_.store.at(i).value = std::move(t);
    }
    best_params_.clear();
    const std::uint64_t nb = io::read_u64(in);
    for (std::size_t i = 0; i < nb; ++i) best_params_.push_back(io::read_tensor<S>(in));
  }

  void restore_best() {
    if (best_params_.empty()) return;
    require(best_params_.size() == model_.store.size(), "best snapshot is incomplete");
    for (std::size_t i = 0; i < best_params_.size(); ++i)
      model_.store.at(i).value = best_params_[i];
  }

  std::size_t epoch() const { return epoch_; }
  double best_score() const { return best_score_; }
  std::size_t best_epoch() const { return best_epoch_; }
  bool stopped() const { return stopped_; }
  double learning_rate() const { return adam_.learning_rate(); }
  Rng& rng() { return rng_; }

  void encode(const conllu::Treebank& tb, bool training, std::vector<EncodedSentence>& enc,
              std::vector<std::size_t>& idx) const {
    enc.clear();
    idx.clear();
    for (std::size_t i = 0; i < tb.sentences.size(); ++i) {
      if (tb.sentences[i].tokens.empty()) continue;
      enc.push_back(encode_sentence(tb.sentences[i], model_.vocabs, model_.config, training));
      idx.push_back(i);
    }
    require(!enc.empty(), "no usable sentences in ", tb.source);
  }

 private:
  /// Groups sentences of similar length, then cuts fixed-size batches. The
  /// batch list order is shuffled per epoch; membership is stable.
  std::vector<std::vector<std::size_t>> make_batches(
      const std::vector<EncodedSentence>& enc) const {
    const std::size_t n = enc.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&enc](std::size_t a, std::size_t b) {
      return enc[a].size() < enc[b].size();
    });
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < n; at += tc_.batch_size) {
      const std::size_t end = std::min(n, at + tc_.batch_size);
      batches.emplace_back(order.begin() + at, order.begin() + end);
    }
    return batches;
  }

  void snapshot_best() {
    best_params_.clear();
    best_params_.reserve(model_.store.size());
    for (std::size_t i = 0; i < model_.store.size(); ++i)
      best_params_.push_back(model_.store.at(i).value);
  }

  JointModel<S>& model_;
  TrainConfig tc_;
  const WordVectors* vectors_;
  nn::Adam<S> adam_;
  Rng rng_;

  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t plateau_count_ = 0;
  std::size_t reductions_ = 0;
  bool stopped_ = false;
  double best_score_ = -1;
  std::vector<Tensor<S>> best_params_;
};

}  // namespace morphparse
