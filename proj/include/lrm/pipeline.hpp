#pragma once

// Composition of retrieval stages: two-way score fusion and reranking of a
// first-stage candidate list.

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lrm/eval.hpp"
#include "lrm/logical.hpp"

namespace lrm {

enum class Normalization { none, min_max };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

struct FusionConfig {
  double alpha = 0.5;
  Normalization normalization = Normalization::min_max;

  void validate() const;
};

/// alpha·a + (1 − alpha)·b over the union of both hit sets. Each run is
/// normalized on its own; a document missing from one run takes that run's
/// per-query minimum. Mismatched query ids throw std::invalid_argument.
RankedList fuse(const RankedList& run_a, const RankedList& run_b, const FusionConfig& cfg);

/// Query-wise fusion; queries are matched by id and emitted in run_a order,
/// then run_b-only queries.
Run fuse_runs(const Run& run_a, const Run& run_b, const FusionConfig& cfg);

/// Lookup of analyzed documents by id.
class TextStore {
 public:
  TextStore() = default;
  explicit TextStore(std::vector<Text> texts);

  const Text* find(std::string_view id) const;
  std::size_t size() const { return texts_.size(); }
  std::span<const Text> texts() const { return texts_; }

 private:
  std::vector<Text> texts_;
  std::unordered_map<std::string_view, std::size_t> by_id_;
};

struct RerankConfig {
  std::size_t depth = 100;
  LogicalScoringModel reranker;
  bool carry_first_stage_score = false;  // add the first-stage score to the reranker's
};

struct RerankResult {
  RankedList list;
  std::vector<std::string> unscored;  // candidates the reranker could not encode
};

/// Rescores the top `depth` candidates and drops the rest. Candidates that
/// fail to encode keep their first-stage order below every rescored document.
RerankResult rerank(const RankedList& candidates, const Text& query, const RerankConfig& cfg,
                    const TextStore& corpus);

struct DepthRow {
  std::size_t depth;
  double metric;  // MRR@k
};

/// Reranks `first_stage` at each depth and evaluates MRR@metric_k. `queries`
/// supplies the query texts by id.
std::vector<DepthRow> depth_sweep(const RerankConfig& cfg_template, std::span<const std::size_t> depths,
                                  const Run& first_stage, const TextStore& queries, const Qrels& qrels,
                                  const TextStore& corpus, std::size_t metric_k = 10);

}  // namespace lrm
