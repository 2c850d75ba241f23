#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphparse/common.hpp"
#include "morphparse/utf8.hpp"

namespace morphparse {

/// Append-only symbol table. Ids are dense and reflect insertion order, so
/// building from the same data always yields the same mapping.
class Vocab {
 public:
  int add(const std::string& s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(symbols_.size());
    index_.emplace(s, id);
    symbols_.push_back(s);
    return id;
  }

  int lookup(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? -1 : it->second;
  }

  const std::string& symbol(int id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < symbols_.size(), "symbol id ", id,
            " out of range ", symbols_.size());
    return symbols_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return symbols_.size(); }
  bool empty() const { return symbols_.empty(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  nlohmann::json to_json() const { return nlohmann::json(symbols_); }

  static Vocab from_json(const nlohmann::json& j) {
    Vocab v;
    for (const auto& s : j) v.add(s.get<std::string>());
    require(v.size() == j.size(), "vocabulary JSON contains duplicate symbols");
    return v;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

/// Character table over Unicode scalar values with the four structural
/// symbols every char-level component shares.
class CharVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBegin = 2;
  static constexpr int kEnd = 3;
  static constexpr int kFirstChar = 4;

  int add(char32_t c) {
    auto it = index_.find(c);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(chars_.size()) + kFirstChar;
    index_.emplace(c, id);
    chars_.push_back(c);
    return id;
  }

  /// Unknown characters share the UNK row.
  int lookup(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(char32_t c) const { return index_.count(c) != 0; }

  /// Total row count including the structural symbols.
  std::size_t size() const { return chars_.size() + kFirstChar; }

  /// Rendering for decoded ids: structural symbols have no text form, UNK
  /// prints as '?'.
  std::string text(int id) const {
    if (id < kFirstChar) return id == kUnk ? "?" : "";
    require(static_cast<std::size_t>(id - kFirstChar) < chars_.size(), "char id ", id,
            " out of range");
    return utf8_encode({chars_[static_cast<std::size_t>(id - kFirstChar)]});
  }

  nlohmann::json to_json() const {
    std::vector<std::uint32_t> cps;
    cps.reserve(chars_.size());
    for (char32_t c : chars_) cps.push_back(static_cast<std::uint32_t>(c));
    return nlohmann::json(cps);
  }

  static CharVocab from_json(const nlohmann::json& j) {
    CharVocab v;
    for (const auto& cp : j) v.add(static_cast<char32_t>(cp.get<std::uint32_t>()));
    return v;
  }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> index_;
};

}  // namespace morphparse
