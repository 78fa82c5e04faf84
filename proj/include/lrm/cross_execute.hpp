#pragma once

// Runs any logical scoring model on any physical backend that supports its
// comparison function, and profiles quality, space and time.

#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lrm/hnsw.hpp"
#include "lrm/inverted_index.hpp"
#include "lrm/logical.hpp"

namespace lrm {

enum class Backend { brute_force, inverted, maxscore, hnsw };

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view name);

/// Inner product and cosine run everywhere; MaxSim only on brute force.
bool supports(Backend backend, Comparison phi);

struct Profile {
  std::string model;
  std::string backend;
  std::string corpus;
  std::size_t docs = 0;
  std::size_t queries = 0;
  std::size_t k = 0;
  std::size_t index_bytes = 0;
  double encode_ms = 0.0;
  double build_ms = 0.0;
  double mean_query_ms = 0.0;
  double recall = 0.0;  // mean recall@k against the brute-force run
  std::uint64_t postings_scored = 0;

  nlohmann::ordered_json to_json() const;
};

struct CrossOptions {
  SearchBudget budget;
  HnswParams hnsw;
  std::string corpus_name = "corpus";
};

struct CrossResult {
  Run run;
  Profile profile;
};

/// Encodes the corpus, builds the backend, answers every query, and measures
/// recall against exact brute force under the same model. Document
/// representations are held at 32-bit precision in every backend. An
/// unsupported (φ, backend) pair throws std::invalid_argument naming both.
CrossResult cross_execute(const LogicalScoringModel& model, Backend backend,
                          std::span<const Text> corpus, std::span<const Text> queries,
                          const CrossOptions& options = {});

/// Fraction of `exact`'s nonzero-scored hits that `approx` also returns;
/// 1.0 when there are none.
double recall_against(const RankedList& approx, const RankedList& exact);

/// Dense vector as sparse entries over its nonzero dimensions.
SparseVector sparsify(const DenseVector& v);
/// Sparse vector materialized over `dim` dimensions (terms ≥ dim dropped).
DenseVector densify(const SparseVector& v, Eigen::Index dim);

}  // namespace lrm
