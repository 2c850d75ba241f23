#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "morphparse/conllu.hpp"
#include "morphparse/serialize.hpp"
#include "morphparse/tensor.hpp"

namespace morphparse {
namespace vectorizer {

/// Copies hidden-layer rows into each token's embedding map. Row order is
/// the flat token order of `sentences`. Empty tensors mean the matching
/// target is disabled and are skipped.
template <class S>
void attach_embeddings(std::vector<conllu::Sentence>& sentences, const Tensor<S>& upos_vectors,
                       const Tensor<S>& deprel_vectors) {
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.tokens.size();
  require(upos_vectors.size() == 0 || upos_vectors.rows() == total, "upostag vectors: ",
          upos_vectors.rows(), " rows for ", total, " tokens");
  require(deprel_vectors.size() == 0 || deprel_vectors.rows() == total, "deprel vectors: ",
          deprel_vectors.rows(), " rows for ", total, " tokens");
  std::size_t row = 0;
  for (auto& s : sentences) {
    for (auto& t : s.tokens) {
      if (upos_vectors.size() > 0) {
        auto& v = t.embeddings["upostag"];
        v.resize(upos_vectors.cols());
        for (std::size_t j = 0; j < upos_vectors.cols(); ++j)
          v[j] = static_cast<float>(upos_vectors(row, j));
      }
      if (deprel_vectors.size() > 0) {
        auto& v = t.embeddings["deprel"];
        v.resize(deprel_vectors.cols());
        for (std::size_t j = 0; j < deprel_vectors.cols(); ++j)
          v[j] = static_cast<float>(deprel_vectors(row, j));
      }
      ++row;
    }
  }
}

struct Record {
  std::size_t sentence = 0;  // 0-based index in the file
  int token = 0;             // 1-based CoNLL-U id
  std::string name;
  std::vector<float> values;
};

/// Tab-separated text: header line, then
/// sentence <TAB> token <TAB> name <TAB> v1 <TAB> v2 ...
/// Values keep 9 significant digits, enough to round-trip f32.
inline void export_text(const std::vector<conllu::Sentence>& sentences, std::ostream& out) {
  out << "sentence\ttoken\tname\tvalues\n";
  char buf[32];
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    for (const auto& t : sentences[si].tokens) {
      for (const auto& [name, values] : t.embeddings) {
        out << si << '\t' << t.id << '\t' << name;
        for (float v : values) {
          std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
          out << '\t' << buf;
        }
        out << '\n';
      }
    }
  }
  require(out.good(), "embedding text export failed");
}

/// Binary block: u32 magic "MPEV", u32 version, u64 record count, then per
/// record: u64 sentence, u64 token, string name, tensor-free f32 payload
/// (u64 dim + raw little-endian floats).
constexpr std::uint32_t kEmbedMagic = 0x4d504556;

inline void export_binary(const std::vector<conllu::Sentence>& sentences, std::ostream& out) {
  std::uint64_t count = 0;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) count += t.embeddings.size();
  io::write_u32(out, kEmbedMagic);
  io::write_u32(out, 1);
  io::write_u64(out, count);
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    for (const auto& t : sentences[si].tokens) {
      for (const auto& [name, values] : t.embeddings) {
        io::write_u64(out, si);
        io::write_u64(out, static_cast<std::uint64_t>(t.id));
        io::write_string(out, name);
        io::write_u64(out, values.size());
        for (float v : values) io::write_f32(out, v);
      }
    }
  }
  require(out.good(), "embedding binary export failed");
}

inline std::vector<Record> read_binary(std::istream& in) {
  require(io::read_u32(in) == kEmbedMagic, "not an embedding export (bad magic)");
  require(io::read_u32(in) == 1, "unsupported embedding export version");
  const std::uint64_t count = io::read_u64(in);
  std::vector<Record> records(count);
  for (auto& r : records) {
    r.sentence = io::read_u64(in);
    r.token = static_cast<int>(io::read_u64(in));
    r.name = io::read_string(in);
    const std::uint64_t dim = io::read_u64(in);
    r.values.resize(dim);
    for (auto& v : r.values) v = io::read_f32(in);
  }
  return records;
}

/// Text-format reader for the round-trip tests and downstream consumers.
inline std::vector<Record> read_text(std::istream& in) {
  std::vector<Record> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      require(line.rfind("sentence\t", 0) == 0, "embedding text export: missing header");
      continue;
    }
    if (line.empty()) continue;
    const auto cols = conllu::detail::split(line, '\t');
    require(cols.size() >= 3, "embedding text export: short row: ", line);
    Record r;
    r.sentence = static_cast<std::size_t>(std::stoull(cols[0]));
    r.token = std::stoi(cols[1]);
    r.name = cols[2];
    for (std::size_t i = 3; i < cols.size(); ++i) r.values.push_back(std::stof(cols[i]));
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace vectorizer
}  // namespace morphparse
