#include "lrm/brute_force.hpp"

#include <unordered_set>

#include "lrm/error.hpp"

namespace lrm {
namespace {

void check_unique(std::span<const std::string> ids) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw DataError("duplicate doc_id " + id);
}

}  // namespace

BruteForceIndex::BruteForceIndex(std::span<const NamedSparse> docs, Comparison phi) : phi_(phi) {
  if (phi == Comparison::max_sim) throw std::invalid_argument("max_sim needs multi-vector documents");
  std::vector<SparseVector> vecs;
  for (const auto& [id, v] : docs) {
    ids_.push_back(id);
    vecs.push_back(v);
  }
  check_unique(ids_);
  docs_ = std::move(vecs);
}

BruteForceIndex::BruteForceIndex(DenseStore store, Comparison phi) : phi_(phi) {
  if (phi == Comparison::max_sim) throw std::invalid_argument("max_sim needs multi-vector documents");
  ids_ = store.ids;
  check_unique(ids_);
  docs_ = std::move(store);
}

BruteForceIndex::BruteForceIndex(std::vector<std::string> ids, std::vector<MultiVector> docs)
    : ids_(std::move(ids)), phi_(Comparison::max_sim) {
  if (ids_.size() != docs.size()) throw std::invalid_argument("ids/docs length mismatch");
  check_unique(ids_);
  docs_ = std::move(docs);
}

double BruteForceIndex::score(const Representation& query, std::size_t ordinal) const {
  return std::visit(
      [&](const auto& docs) -> double {
        using T = std::decay_t<decltype(docs)>;
        if constexpr (std::is_same_v<T, DenseStore>) {
          const auto* q = std::get_if<DenseVector>(&query);
          if (q == nullptr) throw std::invalid_argument("dense index needs a dense query");
          const auto row = docs.vectors.row(static_cast<Eigen::Index>(ordinal)).transpose();
          return phi_ == Comparison::inner_product ? inner_product(*q, row) : cosine(*q, row);
        } else if constexpr (std::is_same_v<T, std::vector<SparseVector>>) {
          const auto* q = std::get_if<SparseVector>(&query);
          if (q == nullptr) throw std::invalid_argument("sparse index needs a sparse query");
          return phi_ == Comparison::inner_product ? inner_product(*q, docs[ordinal])
                                                   : cosine(*q, docs[ordinal]);
        } else {
          const auto* q = std::get_if<MultiVector>(&query);
          if (q == nullptr) throw std::invalid_argument("max_sim index needs a multi-vector query");
          return max_sim(*q, docs[ordinal]);
        }
      },
      docs_);
}

std::size_t BruteForceIndex::bytes() const {
  std::size_t total = 0;
  for (const auto& id : ids_) total += id.size();
  std::visit(
      [&](const auto& docs) {
        using T = std::decay_t<decltype(docs)>;
        if constexpr (std::is_same_v<T, DenseStore>) {
          total += static_cast<std::size_t>(docs.vectors.size()) * sizeof(float);
        } else if constexpr (std::is_same_v<T, std::vector<SparseVector>>) {
          for (const auto& v : docs) total += v.size() * (sizeof(TermId) + sizeof(float));
        } else {
          for (const auto& m : docs) total += static_cast<std::size_t>(m.rows().size()) * sizeof(float);
        }
      },
      docs_);
  return total;
}

RankedList brute_force_search(const BruteForceIndex& index, const Representation& query,
                              const SearchBudget& budget) {
  budget.validate();
  TopKCollector top(budget.k, index.ids());
  for (std::size_t d = 0; d < index.size(); ++d)
    top.push(index.score(query, d), static_cast<std::uint32_t>(d));
  return std::move(top).finish();
}

}  // namespace lrm
