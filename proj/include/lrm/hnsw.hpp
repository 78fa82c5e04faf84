#pragma once

// Hierarchical navigable small-world graph over a DenseStore.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrm/encoders_dense.hpp"
#include "lrm/inverted_index.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

enum class Metric : std::uint8_t { inner_product = 0, cosine = 1 };

struct HnswParams {
  std::size_t m = 16;
  std::size_t ef_construction = 200;
  Metric metric = Metric::inner_product;
  std::uint64_t seed = 42;

  double level_multiplier() const;  // 1 / ln(M)
};

class HnswIndex {
 public:
  /// Inserts rows in store order. An empty store throws DataError.
  static HnswIndex build(DenseStore store, const HnswParams& params);

  /// Greedy descent from the entry point, then a beam of width
  /// max(ef_search, k) on layer 0.
  RankedList search(const DenseVector& query, const SearchBudget& budget) const;

  std::size_t size() const { return store_.size(); }
  Eigen::Index dim() const { return store_.dim(); }
  const DenseStore& store() const { return store_; }
  const HnswParams& params() const { return params_; }

  std::uint32_t entry_point() const { return entry_; }
  int max_level() const { return max_level_; }
  int level(std::uint32_t node) const { return static_cast<int>(links_[node].size()) - 1; }
  std::span<const std::uint32_t> neighbors(std::uint32_t node, int layer) const {
    return links_[node][static_cast<std::size_t>(layer)];
  }
  std::size_t max_degree(int layer) const { return layer == 0 ? 2 * params_.m : params_.m; }

  friend std::string encode_hnsw_index(const HnswIndex& index);
  friend HnswIndex decode_hnsw_index(std::string_view bytes);

 private:
  using Candidate = std::pair<double, std::uint32_t>;  // (similarity, node)

  double similarity(std::uint32_t node, const DenseVector& q) const;
  std::uint32_t greedy_closest(const DenseVector& q, std::uint32_t start, int layer) const;
  std::vector<Candidate> search_layer(const DenseVector& q, std::span<const Candidate> entry,
                                      std::size_t ef, int layer) const;
  void insert(std::uint32_t node, int node_level);
  void shrink(std::uint32_t node, int layer);
  void finalize_vectors();
  DenseVector prepare_query(const DenseVector& q) const;

  DenseStore store_;
  HnswParams params_;
  RowMatrix<double> data_;  // metric-ready rows (unit norm under cosine)
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node → layer → neighbors
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

RankedList hnsw_search(const HnswIndex& index, const DenseVector& query, const SearchBudget& budget);

/// "HIDX" file image with trailing checksum.
std::string encode_hnsw_index(const HnswIndex& index);
HnswIndex decode_hnsw_index(std::string_view bytes);

void persist_index(const HnswIndex& index, const std::string& path);
HnswIndex load_hnsw_index(const std::string& path);

}  // namespace lrm
