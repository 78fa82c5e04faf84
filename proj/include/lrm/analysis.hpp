#pragma once

// Text → token stream, and the vocabulary that maps tokens to term ids.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lrm/reprs.hpp"

namespace lrm {

using TokenList = std::vector<std::string>;

inline constexpr std::size_t kMaxTokenChars = 64;

/// Splits text into maximal runs of Unicode letters/digits. Stateless and
/// deterministic.
class Analyzer {
 public:
  Analyzer() = default;
  Analyzer(bool lowercase, std::unordered_set<std::string> stopwords)
      : lowercase_(lowercase), stopwords_(std::move(stopwords)) {}

  TokenList tokenize(std::string_view text) const;

  bool lowercase() const { return lowercase_; }
  const std::unordered_set<std::string>& stopwords() const { return stopwords_; }

 private:
  bool lowercase_ = true;
  std::unordered_set<std::string> stopwords_;
};

/// One term per line, UTF-8; blank lines ignored. Terms go through the same
/// case folding the analyzer applies.
std::unordered_set<std::string> load_stopwords(const std::string& path, bool lowercase = true);

/// Dense bijection term ↔ id. Single writer until freeze(); read-only after.
class TermDictionary {
 public:
  TermDictionary() = default;
  explicit TermDictionary(std::vector<std::string> terms);

  /// Existing id, or the next dense id. Throws std::logic_error once frozen.
  TermId intern(std::string_view term);
  std::optional<TermId> lookup(std::string_view term) const;
  const std::string& term(TermId id) const { return terms_.at(id); }

  std::size_t size() const { return terms_.size(); }
  std::span<const std::string> terms() const { return terms_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, TermId, Hash, std::equal_to<>> ids_;
  std::vector<std::string> terms_;
  bool frozen_ = false;
};

}  // namespace lrm
