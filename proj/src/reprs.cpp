#include "lrm/reprs.hpp"

#include <algorithm>
#include <cmath>

namespace lrm {

SparseVector SparseVector::from_entries(std::vector<SparseEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.term < b.term; });
  SparseVector out;
  out.entries_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].term == entries[i - 1].term)
      throw std::invalid_argument("SparseVector: duplicate term id " +
                                  std::to_string(entries[i].term));
    if (!std::isfinite(entries[i].weight))
      throw std::invalid_argument("SparseVector: non-finite weight");
    if (entries[i].weight != 0.0) out.entries_.push_back(entries[i]);
  }
  return out;
}

double SparseVector::weight(TermId term) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                             [](const SparseEntry& e, TermId t) { return e.term < t; });
  return (it != entries_.end() && it->term == term) ? it->weight : 0.0;
}

SparseVector SparseVector::rounded_to_float() const {
  SparseVector out;
  out.entries_.reserve(entries_.size());
  for (const auto& e : entries_) {
    auto w = static_cast<double>(static_cast<float>(e.weight));
    if (w != 0.0) out.entries_.push_back({e.term, w});
  }
  return out;
}

DenseVector make_dense(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("DenseVector: dim must be > 0");
  DenseVector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("DenseVector: non-finite value");
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return v;
}

MultiVector::MultiVector(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.cols() == 0)
    throw std::invalid_argument("MultiVector: needs at least one nonempty row");
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    const double n = rows_.row(r).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("MultiVector: zero or non-finite row");
    rows_.row(r) /= n;
  }
}

std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::inner_product: return "inner_product";
    case Comparison::cosine: return "cosine";
    case Comparison::max_sim: return "max_sim";
  }
  return "?";
}

Comparison parse_comparison(std::string_view name) {
  if (name == "inner_product") return Comparison::inner_product;
  if (name == "cosine") return Comparison::cosine;
  if (name == "max_sim") return Comparison::max_sim;
  throw std::invalid_argument("unknown comparison function: " + std::string(name));
}

double inner_product(const SparseVector& a, const SparseVector& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].term < eb[j].term) {
      ++i;
    } else if (eb[j].term < ea[i].term) {
      ++j;
    } else {
      sum += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    }
  }
  return sum;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  auto norm = [](const SparseVector& v) {
    double s = 0.0;
    for (const auto& e : v.entries()) s += e.weight * e.weight;
    return std::sqrt(s);
  };
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
  return inner_product(a, b) / (na * nb);
}

double max_sim(const MultiVector& q, const MultiVector& d) {
  if (q.dim() != d.dim()) throw std::invalid_argument("max_sim: dimension mismatch");
  const Eigen::MatrixXd sims = q.rows() * d.rows().transpose();
  return sims.rowwise().maxCoeff().sum();
}

double compare(Comparison phi, const Representation& q, const Representation& d) {
  if (phi == Comparison::max_sim) {
    auto* mq = std::get_if<MultiVector>(&q);
    auto* md = std::get_if<MultiVector>(&d);
    if (mq == nullptr || md == nullptr)
      throw std::invalid_argument("max_sim requires multi-vector representations");
    return max_sim(*mq, *md);
  }
  if (auto* sq = std::get_if<SparseVector>(&q)) {
    auto* sd = std::get_if<SparseVector>(&d);
    if (sd == nullptr) throw std::invalid_argument("sparse query against non-sparse document");
    return phi == Comparison::inner_product ? inner_product(*sq, *sd) : cosine(*sq, *sd);
  }
  if (auto* dq = std::get_if<DenseVector>(&q)) {
    auto* dd = std::get_if<DenseVector>(&d);
    if (dd == nullptr) throw std::invalid_argument("dense query against non-dense document");
    return phi == Comparison::inner_product ? inner_product(*dq, *dd) : cosine(*dq, *dd);
  }
  throw std::invalid_argument(std::string(to_string(phi)) +
                              " does not accept multi-vector representations");
}

RankedList top_k_select(std::span<const ScoredDoc> scored, std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_k_select: k must be >= 1");
  std::vector<ScoredDoc> hits(scored.begin(), scored.end());
  const auto keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    ranks_before);
  hits.resize(keep);
  for (std::size_t i = 1; i < hits.size(); ++i)
    if (hits[i].doc_id == hits[i - 1].doc_id)
      throw std::invalid_argument("top_k_select: duplicate doc_id " + hits[i].doc_id);
  return {{}, std::move(hits)};
}

TopKCollector::TopKCollector(std::size_t k, std::span<const std::string> ids) : k_(k), ids_(ids) {
  if (k == 0) throw std::invalid_argument("top-k: k must be >= 1");
  heap_.reserve(k);
}

bool TopKCollector::would_enter(double score, std::uint32_t ordinal) const {
  return !full() || better({score, ordinal}, heap_.front());
}

void TopKCollector::push(double score, std::uint32_t ordinal) {
  auto worse_first = [this](const Item& a, const Item& b) { return better(a, b); };
  if (!full()) {
    heap_.emplace_back(score, ordinal);
    std::push_heap(heap_.begin(), heap_.end(), worse_first);
    return;
  }
  if (!better({score, ordinal}, heap_.front())) return;
  std::pop_heap(heap_.begin(), heap_.end(), worse_first);
  heap_.back() = {score, ordinal};
  std::push_heap(heap_.begin(), heap_.end(), worse_first);
}

RankedList TopKCollector::finish(std::string query_id) && {
  std::sort(heap_.begin(), heap_.end(), [this](const Item& a, const Item& b) { return better(a, b); });
  RankedList out{std::move(query_id), {}};
  out.hits.reserve(heap_.size());
  for (const auto& [score, ord] : heap_) out.hits.push_back({ids_[ord], score});
  return out;
}

}  // namespace lrm
