#pragma once

#include <fstream>
#include <memory>
#include <string>

#include "morphparse/model.hpp"
#include "morphparse/serialize.hpp"

namespace morphparse {
namespace archive {

constexpr std::uint32_t kMagic = 0x4d504152;  // "MPAR"
constexpr std::uint32_t kVersion = 1;

/// Container layout (all integers little-endian):
///   u32 magic, u32 version,
///   string manifest (JSON: config, vocabularies, dtype, training record),
///   u64 parameter count,
///   per parameter in name order: string name, f64 l2, tensor block.
/// Saving a freshly loaded archive reproduces it byte for byte.
template <class S>
void save(std::ostream& out, const JointModel<S>& model, nlohmann::json manifest = {}) {
  if (!manifest.is_object()) manifest = nlohmann::json::object();
  manifest["config"] = model.config.to_json();
  manifest["vocabularies"] = model.vocabs.to_json();
  manifest["dtype"] = io::dtype_name<S>();
  io::write_u32(out, kMagic);
  io::write_u32(out, kVersion);
  io::write_string(out, manifest.dump());

  const std::vector<std::string> names = model.store.sorted_names();
  io::write_u64(out, names.size());
  for (const std::string& name : names) {
    const nn::Parameter<S>* p = model.store.get(name);
    io::write_string(out, name);
    io::write_f64(out, p->l2);
    io::write_tensor(out, p->value);
  }
  require(out.good(), "archive write failed");
}

template <class S>
void save_file(const std::string& path, const JointModel<S>& model,
               const nlohmann::json& manifest = {}) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write archive: ", path);
  save(out, model, manifest);
}

/// Rebuilds the model from an archive. The manifest (with the training
/// record and dtype of the stored weights) is returned through
/// `manifest_out` when given.
template <class S>
std::unique_ptr<JointModel<S>> load(std::istream& in, nlohmann::json* manifest_out = nullptr) {
  require(io::read_u32(in) == kMagic, "not a model archive (bad magic)");
  const std::uint32_t version = io::read_u32(in);
  require(version == kVersion, "archive format version ", version, " is not supported (want ",
          kVersion, ")");
  const nlohmann::json manifest = nlohmann::json::parse(io::read_string(in));
  if (manifest_out) *manifest_out = manifest;

  ModelConfig config = ModelConfig::from_json(manifest.at("config"));
  Vocabularies vocabs = Vocabularies::from_json(manifest.at("vocabularies"));
  Rng rng(1);  // initialization is overwritten below
  auto model = JointModel<S>::create(std::move(config), std::move(vocabs), rng);

  const std::uint64_t count = io::read_u64(in);
  require(count == model->store.size(), "archive holds ", count, " parameters, model needs ",
          model->store.size());
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = io::read_string(in);
    nn::Parameter<S>* p = model->store.find(name);
    require(p != nullptr, "archive parameter \"", name, "\" does not exist in this model");
    const double l2 = io::read_f64(in);
    require(l2 == p->l2, "archive parameter \"", name, "\" carries l2 ", l2,
            ", the configuration says ", p->l2);
    Tensor<S> value = io::read_tensor<S>(in);
    require(value.rows() == p->value.rows() && value.cols() == p->value.cols(),
            "archive parameter \"", name, "\" is [", value.rows(), " x ", value.cols(),
            "], the model expects [", p->value.rows(), " x ", p->value.cols(), "]");
    p->value = std::move(value);
  }
  return model;
}

template <class S>
std::unique_ptr<JointModel<S>> load_file(const std::string& path,
                                         nlohmann::json* manifest_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open archive: ", path);
  return load<S>(in, manifest_out);
}

}  // namespace archive
}  // namespace morphparse
