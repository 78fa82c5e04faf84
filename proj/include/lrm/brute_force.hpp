#pragma once

// Exhaustive scoring of every stored document: the exact reference every
// other backend is measured against.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrm/encoders_dense.hpp"
#include "lrm/inverted_index.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

class BruteForceIndex {
 public:
  BruteForceIndex(std::span<const NamedSparse> docs, Comparison phi);
  BruteForceIndex(DenseStore store, Comparison phi);
  BruteForceIndex(std::vector<std::string> ids, std::vector<MultiVector> docs);

  Comparison comparison() const { return phi_; }
  std::size_t size() const { return ids_.size(); }
  std::span<const std::string> ids() const { return ids_; }

  /// φ(query, doc) for the document at `ordinal`.
  double score(const Representation& query, std::size_t ordinal) const;

  /// Approximate in-memory footprint of the stored representations.
  std::size_t bytes() const;

 private:
  using Docs = std::variant<std::vector<SparseVector>, DenseStore, std::vector<MultiVector>>;

  std::vector<std::string> ids_;
  Docs docs_;
  Comparison phi_;
};

/// Exact top-k over every document (zero-scoring documents included).
/// Incompatible query representations throw std::invalid_argument.
RankedList brute_force_search(const BruteForceIndex& index, const Representation& query,
                              const SearchBudget& budget);

}  // namespace lrm
