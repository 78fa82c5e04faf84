#pragma once

// Impact-carrying inverted index: per-term postings with delta + varint
// encoded document ordinals and a parallel weight stream (varint impacts or
// 32-bit float weights), traversed document-at-a-time.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrm/analysis.hpp"
#include "lrm/encoders_sparse.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

struct SearchBudget {
  std::size_t k = 10;
  std::size_t ef_search = 100;  // HNSW only

  /// k ≥ 1 and ef_search ≥ k, else std::invalid_argument.
  void validate() const;
};

struct SearchStats {
  std::uint64_t postings_scored = 0;
  std::uint64_t docs_scored = 0;
};

struct Posting {
  std::uint32_t ordinal;
  double weight;

  friend bool operator==(const Posting&, const Posting&) = default;
};

enum class WeightKind : std::uint8_t { real = 0, impact = 1 };

class InvertedIndex {
 public:
  /// Sequential reader over one postings list.
  class Cursor {
   public:
    bool done() const { return index_ >= count_; }
    std::uint32_t doc() const { return doc_; }
    double weight() const { return weight_; }
    void next();
    /// Advances to the first posting with ordinal ≥ target.
    void next_geq(std::uint32_t target);

   private:
    friend class InvertedIndex;
    void load();

    const InvertedIndex* index_owner_ = nullptr;
    std::string_view docs_;
    std::string_view weights_;
    std::size_t doc_pos_ = 0;
    std::size_t weight_pos_ = 0;
    std::uint32_t count_ = 0;
    std::uint32_t index_ = 0;
    std::uint32_t doc_ = 0;
    double weight_ = 0.0;
  };

  InvertedIndex() = default;

  /// Real-valued postings, stored as 32-bit floats. Duplicate ids throw
  /// DataError.
  static InvertedIndex build(std::span<const NamedSparse> docs);
  /// Integer impact postings; `quantization` carries the w_max and bit width.
  static InvertedIndex build(std::span<const std::string> ids, const Quantization& quantization);

  WeightKind kind() const { return kind_; }
  std::size_t num_docs() const { return doc_ids_.size(); }
  std::size_t num_terms() const { return terms_.size(); }
  std::span<const std::string> doc_ids() const { return doc_ids_; }

  std::uint32_t df(TermId t) const { return t < terms_.size() ? terms_[t].df : 0; }
  double max_weight(TermId t) const { return terms_.at(t).max_weight; }
  double min_weight(TermId t) const { return terms_.at(t).min_weight; }

  Cursor cursor(TermId t) const;
  std::vector<Posting> decode(TermId t) const;

  /// Quantization constants when kind() == impact.
  double impact_scale() const { return impact_scale_; }
  int impact_bits() const { return impact_bits_; }

  /// Bytes of encoded postings (ordinals + weights).
  std::size_t postings_bytes() const { return doc_bytes_.size() + weight_bytes_.size(); }

  // Carried through persistence for query-time encoding.
  std::optional<TermDictionary> dictionary;
  std::optional<CorpusStats> stats;
  std::map<std::string, std::string> metadata;

  friend std::string encode_inverted_index(const InvertedIndex& index);
  friend InvertedIndex decode_inverted_index(std::string_view bytes);

 private:
  struct TermInfo {
    std::uint64_t doc_offset = 0;
    std::uint64_t doc_len = 0;
    std::uint64_t weight_offset = 0;
    std::uint64_t weight_len = 0;
    std::uint32_t df = 0;
    double max_weight = 0.0;
    double min_weight = 0.0;
  };

  class Builder;

  WeightKind kind_ = WeightKind::real;
  std::vector<std::string> doc_ids_;
  std::vector<TermInfo> terms_;
  std::string doc_bytes_;
  std::string weight_bytes_;
  double impact_scale_ = 0.0;
  int impact_bits_ = 0;
};

/// Exhaustive document-at-a-time union traversal. Only documents sharing at
/// least one term with the query are scored.
RankedList daat_search(const InvertedIndex& index, const SparseVector& query,
                       const SearchBudget& budget, SearchStats* stats = nullptr);

/// MaxScore dynamic pruning; returns exactly what daat_search returns.
RankedList max_score_prune(const InvertedIndex& index, const SparseVector& query,
                           const SearchBudget& budget, SearchStats* stats = nullptr);

/// "SIDX" file image: magic, version, body, FNV-1a checksum of the body.
std::string encode_inverted_index(const InvertedIndex& index);
InvertedIndex decode_inverted_index(std::string_view bytes);

void persist_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_inverted_index(const std::string& path);

}  // namespace lrm
