#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphparse/common.hpp"

namespace morphparse {

/// Input feature channels, in their fixed concatenation order.
enum class Feature { chars, word, lemma, upos, ufeats };

/// Prediction targets.
enum class Target { upos, xpos, ufeats, lemma, head, deprel };

inline const char* feature_name(Feature f) {
  switch (f) {
    case Feature::chars: return "char";
    case Feature::word: return "word";
    case Feature::lemma: return "lemma";
    case Feature::upos: return "upos";
    case Feature::ufeats: return "ufeats";
  }
  return "?";
}

inline const char* target_name(Target t) {
  switch (t) {
    case Target::upos: return "upos";
    case Target::xpos: return "xpos";
    case Target::ufeats: return "ufeats";
    case Target::lemma: return "lemma";
    case Target::head: return "head";
    case Target::deprel: return "deprel";
  }
  return "?";
}

inline std::vector<Feature> parse_features(const std::string& csv) {
  std::vector<Feature> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "char" || item == "chars") out.push_back(Feature::chars);
    else if (item == "word") out.push_back(Feature::word);
    else if (item == "lemma") out.push_back(Feature::lemma);
    else if (item == "upos" || item == "upostag") out.push_back(Feature::upos);
    else if (item == "ufeats" || item == "feats") out.push_back(Feature::ufeats);
    else fail("unknown feature \"", item, "\" (choices: char, word, lemma, upos, ufeats)");
  }
  return out;
}

inline std::vector<Target> parse_targets(const std::string& csv) {
  std::vector<Target> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "upos" || item == "upostag") out.push_back(Target::upos);
    else if (item == "xpos" || item == "xpostag") out.push_back(Target::xpos);
    else if (item == "ufeats" || item == "feats") out.push_back(Target::ufeats);
    else if (item == "lemma") out.push_back(Target::lemma);
    else if (item == "head") out.push_back(Target::head);
    else if (item == "deprel") out.push_back(Target::deprel);
    else
      fail("unknown target \"", item,
           "\" (choices: upos, xpos, ufeats, lemma, head, deprel)");
  }
  return out;
}

/// Architecture hyperparameters. Defaults reproduce the published
/// configuration; tests assert against these numbers.
struct ModelConfig {
  std::vector<Feature> features{Feature::chars, Feature::word};
  std::vector<Target> targets{Target::upos,  Target::xpos, Target::ufeats,
                              Target::lemma, Target::head, Target::deprel};

  // char-based word embedding
  std::size_t char_embed_dim = 64;
  std::vector<std::size_t> char_filters{512, 256, 64};
  std::vector<std::size_t> char_dilations{1, 2, 4};
  std::size_t char_kernel = 3;

  // external word vectors
  std::size_t ext_source_dim = 0;  // fixed when the vector file is loaded
  std::size_t ext_proj_dim = 100;
  bool positional_vectors = false;  // word channel keyed by position, not form

  // categorical input embeddings
  std::size_t upos_input_dim = 32;
  std::size_t feats_input_dim = 32;

  // encoder
  std::size_t lstm_layers = 2;
  std::size_t lstm_hidden = 512;

  // prediction heads
  std::size_t upos_hidden = 64;
  std::size_t xpos_hidden = 128;
  std::size_t feats_hidden = 128;
  std::size_t lemma_char_dim = 256;
  std::size_t lemma_ctx_dim = 32;
  std::vector<std::size_t> lemma_filters{256, 256, 256};
  std::vector<std::size_t> lemma_dilations{1, 2, 4};
  std::size_t lemma_kernel = 3;
  std::size_t lemma_pad_slack = 8;
  std::size_t arc_dim = 512;
  std::size_t label_dim = 128;

  // regularisation
  double variational_dropout = 0.33;
  double fc_dropout = 0.25;
  double l2_network = 1e-6;     // biLSTM and convolutional weights
  double l2_embeddings = 1e-5;  // trainable embedding tables

  bool has_feature(Feature f) const {
    for (Feature x : features)
      if (x == f) return true;
    return false;
  }
  bool has_target(Target t) const {
    for (Target x : targets)
      if (x == t) return true;
    return false;
  }

  std::size_t global_dim() const { return 2 * lstm_hidden; }

  std::size_t local_dim() const {
    std::size_t d = 0;
    if (has_feature(Feature::chars)) d += char_filters.back();
    if (has_feature(Feature::word)) d += ext_proj_dim;
    if (has_feature(Feature::lemma)) d += char_filters.back();
    if (has_feature(Feature::upos)) d += upos_input_dim;
    if (has_feature(Feature::ufeats)) d += feats_input_dim;
    return d;
  }

  /// A target cannot double as an input feature.
  void validate() const {
    require(!features.empty(), "at least one input feature is required");
    require(!targets.empty(), "at least one prediction target is required");
    for (Target t : targets) {
      const std::string tn = target_name(t);
      for (Feature f : features)
        require(tn != feature_name(f), "\"", tn, "\" cannot be both a feature and a target");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    std::vector<std::string> fs, ts;
    for (Feature f : features) fs.push_back(feature_name(f));
    for (Target t : targets) ts.push_back(target_name(t));
    j["features"] = fs;
    j["targets"] = ts;
    j["char_embed_dim"] = char_embed_dim;
    j["char_filters"] = char_filters;
    j["char_dilations"] = char_dilations;
    j["char_kernel"] = char_kernel;
    j["ext_source_dim"] = ext_source_dim;
    j["ext_proj_dim"] = ext_proj_dim;
    j["positional_vectors"] = positional_vectors;
    j["upos_input_dim"] = upos_input_dim;
    j["feats_input_dim"] = feats_input_dim;
    j["lstm_layers"] = lstm_layers;
    j["lstm_hidden"] = lstm_hidden;
    j["upos_hidden"] = upos_hidden;
    j["xpos_hidden"] = xpos_hidden;
    j["feats_hidden"] = feats_hidden;
    j["lemma_char_dim"] = lemma_char_dim;
    j["lemma_ctx_dim"] = lemma_ctx_dim;
    j["lemma_filters"] = lemma_filters;
    j["lemma_dilations"] = lemma_dilations;
    j["lemma_kernel"] = lemma_kernel;
    j["lemma_pad_slack"] = lemma_pad_slack;
    j["arc_dim"] = arc_dim;
    j["label_dim"] = label_dim;
    j["variational_dropout"] = variational_dropout;
    j["fc_dropout"] = fc_dropout;
    j["l2_network"] = l2_network;
    j["l2_embeddings"] = l2_embeddings;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.features.clear();
    for (const auto& s : j.at("features")) {
      auto fs = parse_features(s.get<std::string>());
      c.features.insert(c.features.end(), fs.begin(), fs.end());
    }
    c.targets.clear();
    for (const auto& s : j.at("targets")) {
      auto ts = parse_targets(s.get<std::string>());
      c.targets.insert(c.targets.end(), ts.begin(), ts.end());
    }
    c.char_embed_dim = j.at("char_embed_dim").get<std::size_t>();
    c.char_filters = j.at("char_filters").get<std::vector<std::size_t>>();
    c.char_dilations = j.at("char_dilations").get<std::vector<std::size_t>>();
    c.char_kernel = j.at("char_kernel").get<std::size_t>();
    c.ext_source_dim = j.at("ext_source_dim").get<std::size_t>();
    c.ext_proj_dim = j.at("ext_proj_dim").get<std::size_t>();
    c.positional_vectors = j.at("positional_vectors").get<bool>();
    c.upos_input_dim = j.at("upos_input_dim").get<std::size_t>();
    c.feats_input_dim = j.at("feats_input_dim").get<std::size_t>();
    c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    c.upos_hidden = j.at("upos_hidden").get<std::size_t>();
    c.xpos_hidden = j.at("xpos_hidden").get<std::size_t>();
    c.feats_hidden = j.at("feats_hidden").get<std::size_t>();
    c.lemma_char_dim = j.at("lemma_char_dim").get<std::size_t>();
    c.lemma_ctx_dim = j.at("lemma_ctx_dim").get<std::size_t>();
    c.lemma_filters = j.at("lemma_filters").get<std::vector<std::size_t>>();
    c.lemma_dilations = j.at("lemma_dilations").get<std::vector<std::size_t>>();
    c.lemma_kernel = j.at("lemma_kernel").get<std::size_t>();
    c.lemma_pad_slack = j.at("lemma_pad_slack").get<std::size_t>();
    c.arc_dim = j.at("arc_dim").get<std::size_t>();
    c.label_dim = j.at("label_dim").get<std::size_t>();
    c.variational_dropout = j.at("variational_dropout").get<double>();
    c.fc_dropout = j.at("fc_dropout").get<double>();
    c.l2_network = j.at("l2_network").get<double>();
    c.l2_embeddings = j.at("l2_embeddings").get<double>();
    return c;
  }
};

/// Optimisation schedule. Defaults reproduce the published recipe; fields the
/// recipe leaves open (batch size, patience) carry this artifact's choices.
struct TrainConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::size_t max_epochs = 400;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  double min_improvement = 1e-4;
  int max_lr_reductions = 2;
  std::uint64_t seed = 42;

  double weight_upos = 0.05;
  double weight_xpos = 0.05;
  double weight_ufeats = 0.2;
  double weight_lemma = 0.05;
  double weight_head = 0.2;
  double weight_deprel = 0.8;

  double weight_for(Target t) const {
    switch (t) {
      case Target::upos: return weight_upos;
      case Target::xpos: return weight_xpos;
      case Target::ufeats: return weight_ufeats;
      case Target::lemma: return weight_lemma;
      case Target::head: return weight_head;
      case Target::deprel: return weight_deprel;
    }
    return 0.0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["eps"] = eps;
    j["max_epochs"] = max_epochs;
    j["batch_size"] = batch_size;
    j["patience"] = patience;
    j["min_improvement"] = min_improvement;
    j["max_lr_reductions"] = max_lr_reductions;
    j["seed"] = seed;
    j["loss_weights"] = {{"upos", weight_upos},     {"xpos", weight_xpos},
                         {"ufeats", weight_ufeats}, {"lemma", weight_lemma},
                         {"head", weight_head},     {"deprel", weight_deprel}};
    return j;
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.min_improvement = j.at("min_improvement").get<double>();
    c.max_lr_reductions = j.at("max_lr_reductions").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& w = j.at("loss_weights");
    c.weight_upos = w.at("upos").get<double>();
    c.weight_xpos = w.at("xpos").get<double>();
    c.weight_ufeats = w.at("ufeats").get<double>();
    c.weight_lemma = w.at("lemma").get<double>();
    c.weight_head = w.at("head").get<double>();
    c.weight_deprel = w.at("deprel").get<double>();
    return c;
  }
};

}  // namespace morphparse
