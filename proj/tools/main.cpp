#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "morphparse/archive.hpp"
#include "morphparse/evaluator.hpp"
#include "morphparse/synthetic.hpp"
#include "morphparse/trainer.hpp"
#include "morphparse/vectorizer.hpp"

namespace mp = morphparse;

namespace {

struct Options {
  std::string mode;
  std::string training_data;
  std::string validation_data;
  std::string model_path;
  std::string input_file;
  std::string output_file;
  std::string gold_file;
  std::string pred_file;
  std::string features;
  std::string targets;
  std::string config_path;
  std::string word_vectors;
  std::string token_vectors;
  std::string export_embeddings;
  std::string embeddings_format = "text";
  std::string precision = "f32";
  std::uint64_t seed = 42;
  std::size_t batch_size = 32;
  std::size_t workers = 1;
  std::size_t max_epochs = 0;  // 0 keeps the configured default
  bool raw_text = false;
  bool lax = false;
  bool machine = false;
};

mp::conllu::Treebank read_input(const std::string& path, bool strict) {
  if (path == "-") return mp::conllu::read_conllu_stream(std::cin, "stdin", strict);
  return mp::conllu::read_conllu(path, strict);
}

std::unique_ptr<mp::WordVectors> load_vectors(const Options& opt) {
  if (!opt.word_vectors.empty() && !opt.token_vectors.empty())
    mp::fail("--word_vectors and --token_vectors are mutually exclusive");
  if (!opt.word_vectors.empty())
    return std::make_unique<mp::WordVectors>(mp::WordVectors::load_words(opt.word_vectors));
  if (!opt.token_vectors.empty())
    return std::make_unique<mp::WordVectors>(
        mp::WordVectors::load_positional(opt.token_vectors));
  return nullptr;
}

nlohmann::json read_config_file(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  mp::require(in.good(), "cannot open config file: ", path);
  const auto j = nlohmann::json::parse(in);

  // Typos in override keys must not pass silently.
  auto check_keys = [&](const char* block, const nlohmann::json& known) {
    if (!j.contains(block)) return;
    for (const auto& [key, value] : j.at(block).items()) {
      mp::require(known.contains(key), path, ": unknown key \"", key, "\" in the \"", block,
                  "\" block");
      if (!known.at(key).is_object() || !value.is_object()) continue;
      for (const auto& [sub, _] : value.items())
        mp::require(known.at(key).contains(sub), path, ": unknown key \"", key, ".", sub,
                    "\" in the \"", block, "\" block");
    }
  };
  check_keys("model", mp::ModelConfig().to_json());
  check_keys("train", mp::TrainConfig().to_json());
  for (const auto& [key, _] : j.items())
    mp::require(key == "model" || key == "train", path, ": unknown top-level key \"", key,
                "\" (expected \"model\" or \"train\")");
  return j;
}

/// Defaults, overlaid with the "model" block of the config file, overlaid
/// with the command-line feature/target lists.
mp::ModelConfig resolve_model_config(const Options& opt, const nlohmann::json& file,
                                     const mp::WordVectors* vectors) {
  nlohmann::json j = mp::ModelConfig().to_json();
  if (file.contains("model")) j.update(file.at("model"), true);
  mp::ModelConfig config = mp::ModelConfig::from_json(j);
  const bool explicit_features =
      !opt.features.empty() || (file.contains("model") && file["model"].contains("features"));

  if (!opt.features.empty()) config.features = mp::parse_features(opt.features);
  if (!opt.targets.empty()) config.targets = mp::parse_targets(opt.targets);

  if (vectors) {
    config.ext_source_dim = vectors->dim();
    config.positional_vectors = vectors->positional();
    if (!config.has_feature(mp::Feature::word)) {
      if (explicit_features)
        mp::log_warn("vectors were loaded but \"word\" is not among the requested features");
      else
        config.features.push_back(mp::Feature::word);
    }
  } else if (config.has_feature(mp::Feature::word)) {
    if (explicit_features)
      mp::fail("the \"word\" feature needs --word_vectors or --token_vectors");
    std::erase(config.features, mp::Feature::word);
    mp::log_info("no external vectors given, reading characters only");
  }
  return config;
}

mp::TrainConfig resolve_train_config(const Options& opt, const nlohmann::json& file) {
  nlohmann::json j = mp::TrainConfig().to_json();
  if (file.contains("train")) j.update(file.at("train"), true);
  mp::TrainConfig tc = mp::TrainConfig::from_json(j);
  tc.seed = opt.seed;
  tc.batch_size = opt.batch_size;
  if (opt.max_epochs > 0) tc.max_epochs = opt.max_epochs;
  return tc;
}

/// Holds out every tenth sentence when no validation file is given.
void split_validation(mp::conllu::Treebank& train, mp::conllu::Treebank& valid) {
  mp::conllu::Treebank kept;
  kept.source = train.source;
  valid.source = train.source + " (held out)";
  for (std::size_t i = 0; i < train.sentences.size(); ++i) {
    if (i % 10 == 9)
      valid.sentences.push_back(std::move(train.sentences[i]));
    else
      kept.sentences.push_back(std::move(train.sentences[i]));
  }
  if (valid.sentences.empty() && kept.sentences.size() > 1) {
    valid.sentences.push_back(kept.sentences.back());
    kept.sentences.pop_back();
  }
  mp::require(!valid.sentences.empty(), "too little data to hold out a validation set");
  train = std::move(kept);
}

template <class S>
int run_train_typed(const Options& opt, mp::conllu::Treebank train, mp::conllu::Treebank valid,
                    mp::ModelConfig config, const mp::TrainConfig& tc,
                    const mp::WordVectors* vectors) {
  mp::Vocabularies vocabs;
  vocabs.build(train);
  mp::disable_unsupported_targets(config, vocabs, train);

  mp::Rng init_rng(tc.seed);
  auto model = mp::JointModel<S>::create(std::move(config), std::move(vocabs), init_rng);
  mp::log_info("model has ", model->store.size(), " parameter tensors, ",
               model->store.total_values(), " weights");

  mp::Trainer<S> trainer(*model, tc, vectors);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = trainer.train(train, valid, [](const mp::EpochStats& e) {
    std::string detail;
    for (const auto& [name, acc] : e.accuracies)
      detail += mp::detail::str(" ", name, "=", static_cast<int>(acc * 100 + 0.5), "%");
    mp::log_info("epoch ", e.epoch, ": lr ", e.lr, ", loss ", e.train_loss, ", score ",
                 e.valid_score, detail, e.improved ? " *" : "");
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double tokens =
      static_cast<double>(train.token_count()) * static_cast<double>(result.epochs_run);
  mp::log_info("finished after ", result.epochs_run, " epochs in ", seconds, "s (",
               static_cast<std::size_t>(tokens / std::max(seconds, 1e-9)),
               " train tokens/s), best score ", result.best_score, " at epoch ",
               result.best_epoch);

  nlohmann::json manifest;
  manifest["training"] = result.record;
  mp::archive::save_file(opt.model_path, *model, manifest);
  mp::log_info("model written to ", opt.model_path);
  return 0;
}

int run_train(const Options& opt) {
  mp::require(!opt.training_data.empty(), "--mode train needs --training_data");
  mp::require(!opt.model_path.empty(), "--mode train needs --model_path");
  mp::require(opt.precision == "f32" || opt.precision == "f64",
              "--precision must be f32 or f64");

  mp::conllu::Treebank train = read_input(opt.training_data, !opt.lax);
  mp::conllu::Treebank valid;
  if (opt.validation_data.empty()) {
    mp::log_info("no validation file given, holding out every tenth sentence");
    split_validation(train, valid);
  } else {
    valid = read_input(opt.validation_data, !opt.lax);
  }
  mp::log_info("training on ", train.sentences.size(), " sentences, validating on ",
               valid.sentences.size());

  const nlohmann::json file = read_config_file(opt.config_path);
  const auto vectors = load_vectors(opt);
  mp::ModelConfig config = resolve_model_config(opt, file, vectors.get());
  const mp::TrainConfig tc = resolve_train_config(opt, file);

  if (opt.precision == "f64")
    return run_train_typed<double>(opt, std::move(train), std::move(valid), std::move(config),
                                   tc, vectors.get());
  return run_train_typed<float>(opt, std::move(train), std::move(valid), std::move(config), tc,
                                vectors.get());
}

std::string peek_dtype(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  mp::require(in.good(), "cannot open archive: ", path);
  mp::require(mp::io::read_u32(in) == mp::archive::kMagic, "not a model archive (bad magic)");
  mp::require(mp::io::read_u32(in) == mp::archive::kVersion, "unsupported archive version");
  return nlohmann::json::parse(mp::io::read_string(in)).at("dtype").get<std::string>();
}

template <class S>
int run_predict_typed(const Options& opt) {
  const auto model = mp::archive::load_file<S>(opt.model_path);
  const auto vectors = load_vectors(opt);
  if (model->config.has_feature(mp::Feature::word)) {
    mp::require(vectors != nullptr,
                "this model reads word vectors; pass --word_vectors or --token_vectors");
    mp::require(vectors->dim() == model->config.ext_source_dim, "vector width ",
                vectors->dim(), " does not match the model's ", model->config.ext_source_dim);
    mp::require(vectors->positional() == model->config.positional_vectors,
                "vector keying (by form vs by position) does not match the model");
  }

  mp::conllu::Treebank input = opt.raw_text ? mp::conllu::read_raw_text(opt.input_file)
                                            : read_input(opt.input_file, !opt.lax);
  mp::require(!input.sentences.empty(), opt.input_file, ": nothing to predict");

  std::vector<mp::EncodedSentence> enc;
  std::vector<std::size_t> src;
  for (std::size_t i = 0; i < input.sentences.size(); ++i) {
    if (input.sentences[i].tokens.empty()) continue;
    enc.push_back(mp::encode_sentence(input.sentences[i], model->vocabs, model->config, false));
    src.push_back(i);
  }

  struct Slot {
    std::size_t begin = 0, end = 0;  // encoded-sentence range
    std::vector<mp::conllu::Sentence> sentences;
  };
  std::vector<Slot> slots;
  for (std::size_t at = 0; at < enc.size(); at += opt.batch_size) {
    Slot s;
    s.begin = at;
    s.end = std::min(enc.size(), at + opt.batch_size);
    slots.push_back(s);
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t k = next.fetch_add(1); k < slots.size(); k = next.fetch_add(1)) {
      if (failed.load()) return;
      Slot& slot = slots[k];
      try {
        std::vector<const mp::EncodedSentence*> batch;
        std::vector<std::size_t> indices;
        for (std::size_t i = slot.begin; i < slot.end; ++i) {
          batch.push_back(&enc[i]);
          indices.push_back(src[i]);
        }
        mp::Rng rng(k);  // inference draws nothing; seeded for reproducibility
        auto pred = model->predict(batch, vectors.get(), indices, rng);
        mp::vectorizer::attach_embeddings(pred.sentences, pred.upos_vectors,
                                          pred.deprel_vectors);
        slot.sentences = std::move(pred.sentences);
      } catch (const std::exception& e) {
        failed.store(true);
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure.empty()) failure = e.what();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(opt.workers, slots.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  mp::require(!failed.load(), "prediction failed: ", failure);

  mp::conllu::Treebank output = std::move(input);  // keeps empty sentences in place
  std::size_t flat = 0;
  for (const Slot& slot : slots)
    for (std::size_t i = 0; i < slot.sentences.size(); ++i)
      output.sentences[src[slot.begin + i]] = slot.sentences[i];
  for (const auto& s : output.sentences) flat += s.tokens.size();

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  mp::log_info("analysed ", flat, " tokens in ", seconds, "s (",
               static_cast<std::size_t>(static_cast<double>(flat) / std::max(seconds, 1e-9)),
               " tokens/s)");

  if (opt.output_file == "-") {
    mp::conllu::write_conllu_stream(std::cout, output);
  } else {
    mp::conllu::write_conllu(output, opt.output_file);
    mp::log_info("annotated file written to ", opt.output_file);
  }

  if (!opt.export_embeddings.empty()) {
    std::ofstream out(opt.export_embeddings, std::ios::binary);
    mp::require(out.good(), "cannot write embeddings: ", opt.export_embeddings);
    if (opt.embeddings_format == "binary")
      mp::vectorizer::export_binary(output.sentences, out);
    else
      mp::vectorizer::export_text(output.sentences, out);
    mp::log_info("hidden-layer embeddings written to ", opt.export_embeddings);
  }
  return 0;
}

int run_predict(const Options& opt) {
  mp::require(!opt.model_path.empty(), "--mode predict needs --model_path");
  mp::require(!opt.input_file.empty(), "--mode predict needs --input_file");
  mp::require(!opt.output_file.empty(), "--mode predict needs --output_file");
  mp::require(opt.embeddings_format == "text" || opt.embeddings_format == "binary",
              "--embeddings_format must be text or binary");
  const std::string dtype = peek_dtype(opt.model_path);
  if (dtype == "f64") return run_predict_typed<double>(opt);
  return run_predict_typed<float>(opt);
}

int run_eval(const Options& opt) {
  mp::require(!opt.gold_file.empty(), "--mode eval needs --gold_file");
  mp::require(!opt.pred_file.empty(), "--mode eval needs --pred_file");
  const auto gold = mp::conllu::read_conllu(opt.gold_file, !opt.lax);
  const auto pred = mp::conllu::read_conllu(opt.pred_file, !opt.lax);
  const auto report = mp::eval::evaluate(gold, pred);
  if (opt.machine)
    std::cout << report.to_machine();
  else
    std::cout << report.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphparse: joint morphosyntactic tagging, lemmatisation, and dependency parsing"};
  Options opt;

  app.add_option("--mode", opt.mode, "train, predict, or eval")
      ->required()
      ->check(CLI::IsMember({"train", "predict", "eval"}));
  app.add_option("--training_data", opt.training_data, "training treebank (.conllu)");
  app.add_option("--validation_data", opt.validation_data,
                 "validation treebank; default holds out a slice of the training data");
  app.add_option("--model_path", opt.model_path, "model archive to write (train) or read");
  app.add_option("--input_file", opt.input_file, "file to annotate, \"-\" for stdin");
  app.add_option("--output_file", opt.output_file, "annotated output, \"-\" for stdout");
  app.add_option("--gold_file", opt.gold_file, "reference treebank for scoring");
  app.add_option("--pred_file", opt.pred_file, "system output for scoring");
  app.add_option("--features", opt.features,
                 "comma list of input channels: char,word,lemma,upos,ufeats");
  app.add_option("--targets", opt.targets,
                 "comma list of outputs: upos,xpos,ufeats,lemma,head,deprel");
  app.add_option("--config", opt.config_path,
                 "JSON file with partial \"model\" and \"train\" blocks");
  app.add_option("--word_vectors", opt.word_vectors, "frozen vectors keyed by surface form");
  app.add_option("--token_vectors", opt.token_vectors,
                 "frozen vectors keyed by (sentence, token) position");
  app.add_option("--export_embeddings", opt.export_embeddings,
                 "also write hidden-layer token embeddings to this file (predict)");
  app.add_option("--embeddings_format", opt.embeddings_format, "text (default) or binary");
  app.add_option("--precision", opt.precision, "training float width: f32 (default) or f64");
  app.add_option("--seed", opt.seed, "random seed for training");
  app.add_option("--batch_size", opt.batch_size, "sentences per optimisation step");
  app.add_option("--workers", opt.workers, "parallel prediction threads");
  app.add_option("--max_epochs", opt.max_epochs, "cap on training epochs");
  app.add_flag("--raw_text", opt.raw_text,
               "treat the prediction input as plain text, one sentence per line");
  app.add_flag("--lax", opt.lax, "skip malformed input sentences instead of stopping");
  app.add_flag("--machine", opt.machine, "print evaluation as key=value lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (opt.mode == "train") return run_train(opt);
    if (opt.mode == "predict") return run_predict(opt);
    return run_eval(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
