#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "morphparse/tagger.hpp"

using namespace morphparse;

namespace {

conllu::Treebank parse(const std::string& text) {
  std::istringstream in(text);
  return conllu::read_conllu_stream(in, "inline", true);
}

const char* kTiny =
    "1\tKot\tkot\tNOUN\tN1\tGender=Masc|Number=Sing\t2\tnsubj\t_\t_\n"
    "2\tgoni\tgonic\tVERB\tV1\tNumber=Sing\t0\troot\t_\t_\n"
    "3\t.\t.\tPUNCT\tPCT\t_\t2\tpunct\t_\t_\n"
    "\n";

Tensor<double> random_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor<double> t(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(i, j) = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("tag head applies dense, tanh, dense") {
  Rng rng(31);
  nn::ParameterStore<double> store;
  auto head = TagHead<double>::create(store, "head", 6, 4, 3, rng);

  Graph<double> g;
  Rng drng(0);
  nn::Workspace<double> ws(g, drng, false);
  Node<double>* x = g.input(random_rows(5, 6, rng), false);
  Node<double>* hidden = head.hidden_activation(ws, x, 0.25);
  Node<double>* logits = head.logits_from_hidden(ws, hidden, 0.25);

  REQUIRE(hidden->value.rows() == 5);
  REQUIRE(hidden->value.cols() == 4);
  REQUIRE(logits->value.rows() == 5);
  REQUIRE(logits->value.cols() == 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      REQUIRE(hidden->value(i, j) > -1.0);
      REQUIRE(hidden->value(i, j) < 1.0);
    }

  // hand-check one logit row against the two dense layers
  const auto& W1 = head.hidden.W->value;
  const auto& W2 = head.out.W->value;
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      double pre = 0;
      for (std::size_t d = 0; d < 6; ++d) pre += x->value(2, d) * W1(d, k);
      acc += std::tanh(pre) * W2(k, c);
    }
    REQUIRE_THAT(logits->value(2, c), Catch::Matchers::WithinAbs(acc, 1e-12));
  }
}

TEST_CASE("tagger builds one head per enabled target plus one per feats category") {
  const auto tb = parse(kTiny);
  Vocabularies v;
  v.build(tb);

  ModelConfig cfg;
  cfg.features = {Feature::chars};
  cfg.targets = {Target::upos, Target::xpos, Target::ufeats};
  cfg.lstm_hidden = 8;
  cfg.upos_hidden = 5;
  cfg.xpos_hidden = 6;
  cfg.feats_hidden = 4;

  Rng rng(32);
  nn::ParameterStore<double> store;
  auto tagger = Tagger<double>::create(store, cfg, v, rng);
  REQUIRE(tagger.feat_heads.size() == 2);  // Gender, Number

  Graph<double> g;
  Rng drng(0);
  nn::Workspace<double> ws(g, drng, false);
  Node<double>* global = g.input(random_rows(3, 16, rng), false);
  const auto out = tagger.forward(ws, global);

  REQUIRE(out.upos_hidden->value.cols() == 5);
  REQUIRE(out.upos_logits->value.cols() == v.upos.size());
  REQUIRE(out.xpos_logits->value.cols() == v.xpos.size());
  // class count per category: its values plus the NA class
  REQUIRE(out.feat_logits[0]->value.cols() == v.feat_values[0].size() + 1);
  REQUIRE(out.feat_logits[1]->value.cols() == v.feat_values[1].size() + 1);
  for (const auto* logits : out.feat_logits) REQUIRE(logits->value.rows() == 3);
}

TEST_CASE("disabled targets leave their logits null") {
  const auto tb = parse(kTiny);
  Vocabularies v;
  v.build(tb);

  ModelConfig cfg;
  cfg.features = {Feature::chars};
  cfg.targets = {Target::upos};
  cfg.lstm_hidden = 8;
  cfg.upos_hidden = 5;

  Rng rng(33);
  nn::ParameterStore<double> store;
  auto tagger = Tagger<double>::create(store, cfg, v, rng);

  Graph<double> g;
  Rng drng(0);
  nn::Workspace<double> ws(g, drng, false);
  const auto out = tagger.forward(ws, g.input(random_rows(2, 16, rng), false));
  REQUIRE(out.upos_logits != nullptr);
  REQUIRE(out.xpos_logits == nullptr);
  REQUIRE(out.feat_logits.empty());
}

TEST_CASE("row argmax picks the first maximum on ties") {
  Tensor<double> logits(3, 4);
  logits(0, 2) = 5.0;
  logits(1, 0) = 1.0;
  logits(1, 3) = 1.0;  // tie with column 0
  logits(2, 1) = -2.0;
  logits(2, 0) = -3.0;
  logits(2, 2) = -3.0;
  logits(2, 3) = -3.0;

  REQUIRE(argmax_rows(logits) == std::vector<int>{2, 0, 1});
}
