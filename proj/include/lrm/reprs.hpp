#pragma once

// Representation types produced by query/document encoders and the comparison
// functions that score a (query, document) pair.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace lrm {

using TermId = std::uint32_t;

struct SparseEntry {
  TermId term;
  double weight;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Term-id → weight mapping with strictly ascending term ids, finite nonzero
/// weights.
class SparseVector {
 public:
  SparseVector() = default;

  /// Entries in any order. Zero weights are dropped; duplicate ids or
  /// non-finite weights throw std::invalid_argument.
  static SparseVector from_entries(std::vector<SparseEntry> entries);

  std::span<const SparseEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Weight of `term`, 0 when absent.
  double weight(TermId term) const;

  /// Largest term id + 1, 0 for the empty vector.
  std::size_t dimension_hint() const { return empty() ? 0 : entries_.back().term + 1; }

  /// Weights rounded through 32-bit floats, the precision every index stores.
  SparseVector rounded_to_float() const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<SparseEntry> entries_;
};

using DenseVector = Eigen::VectorXd;

/// Builds a DenseVector, rejecting empty or non-finite input.
DenseVector make_dense(std::span<const double> values);

/// Per-token rows (one row per token), every row unit-normalized.
class MultiVector {
 public:
  /// Normalizes each row; zero rows or an empty matrix throw.
  explicit MultiVector(Eigen::MatrixXd rows);

  const Eigen::MatrixXd& rows() const { return rows_; }
  Eigen::Index num_rows() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }

 private:
  Eigen::MatrixXd rows_;
};

enum class Comparison { inner_product, cosine, max_sim };

std::string_view to_string(Comparison c);
Comparison parse_comparison(std::string_view name);

using Representation = std::variant<SparseVector, DenseVector, MultiVector>;

struct ScoredDoc {
  std::string doc_id;
  double score;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Ranking order: score descending, then doc_id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> hits;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Per-query ranked lists in query order.
using Run = std::vector<RankedList>;

double inner_product(const SparseVector& a, const SparseVector& b);

/// Dot product accumulated in double precision regardless of the operands'
/// scalar types.
template <typename DerivedA, typename DerivedB>
double inner_product(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("inner_product: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  return a.template cast<double>().dot(b.template cast<double>());
}

template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
  return inner_product(a, b) / (na * nb);
}

double cosine(const SparseVector& a, const SparseVector& b);

/// Sum over query rows of the best dot product against any document row.
double max_sim(const MultiVector& q, const MultiVector& d);

/// φ(q, d) for a compatible pair; incompatible kinds throw std::invalid_argument.
double compare(Comparison phi, const Representation& q, const Representation& d);

/// k best of `scored` in ranking order. k = 0 throws std::invalid_argument.
RankedList top_k_select(std::span<const ScoredDoc> scored, std::size_t k);

/// Bounded selection over document ordinals, with ties broken by the
/// external ids the ordinals refer to.
class TopKCollector {
 public:
  TopKCollector(std::size_t k, std::span<const std::string> ids);

  /// True when (score, ordinal) would be retained if pushed now.
  bool would_enter(double score, std::uint32_t ordinal) const;
  void push(double score, std::uint32_t ordinal);

  bool full() const { return heap_.size() == k_; }
  /// Worst retained score once full, -inf before.
  double threshold() const {
    return full() ? heap_.front().first : -std::numeric_limits<double>::infinity();
  }

  RankedList finish(std::string query_id = {}) &&;

 private:
  using Item = std::pair<double, std::uint32_t>;
  bool better(const Item& a, const Item& b) const {
    if (a.first != b.first) return a.first > b.first;
    return ids_[a.second] < ids_[b.second];
  }

  std::size_t k_;
  std::span<const std::string> ids_;
  std::vector<Item> heap_;  // worst item at front
};

}  // namespace lrm
