#pragma once

// Ranking metrics over TREC-style runs and relevance judgments.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "lrm/reprs.hpp"

namespace lrm {

/// (query_id, doc_id) → grade ≥ 0.
class Qrels {
 public:
  /// Duplicate pairs and negative grades throw DataError.
  void add(const std::string& query_id, const std::string& doc_id, int grade);

  bool has_query(std::string_view query_id) const { return judgments_.contains(std::string(query_id)); }
  /// Grade of the pair, 0 when unjudged.
  int grade(std::string_view query_id, std::string_view doc_id) const;
  /// Number of documents with grade ≥ 1.
  std::size_t relevant_count(std::string_view query_id) const;
  /// Grades of all judged documents for the query.
  const std::map<std::string, int>* judgments(std::string_view query_id) const;

  std::size_t num_queries() const { return judgments_.size(); }

 private:
  std::map<std::string, std::map<std::string, int>, std::less<>> judgments_;
};

/// Whitespace-separated "query_id 0 doc_id grade".
Qrels read_qrels(const std::string& path);

struct MetricResult {
  double value = 0.0;         // mean over evaluated queries
  std::size_t evaluated = 0;  // queries contributing to the mean
  std::size_t skipped = 0;    // queries excluded (no judgments / nothing relevant)
};

/// Queries without any judgments are skipped. No evaluated query throws
/// DataError.
MetricResult mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k = 10);
/// Queries with no relevant document are skipped.
MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k);
/// Gain 2^grade − 1, discount 1/log2(rank + 1). Zero ideal DCG is skipped.
MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k);
/// Queries with no relevant document are skipped.
MetricResult average_precision(const Run& run, const Qrels& qrels);

/// Per-query values, in run order (nullopt where the query is skipped).
std::optional<double> reciprocal_rank(const RankedList& list, const Qrels& qrels, std::size_t k);
std::optional<double> query_recall(const RankedList& list, const Qrels& qrels, std::size_t k);
std::optional<double> query_ndcg(const RankedList& list, const Qrels& qrels, std::size_t k);
std::optional<double> query_average_precision(const RankedList& list, const Qrels& qrels);

/// "query_id Q0 doc_id rank score tag" lines, ranks from 1, six-decimal
/// scores. `header`, when nonempty, is written first as a '#' comment line.
std::string format_run(const Run& run, std::string_view tag, std::string_view header = {});
void write_run(const std::string& path, const Run& run, std::string_view tag,
               std::string_view header = {});

/// Parses a run file; '#' lines are comments. Queries keep first-appearance
/// order, hits are ordered by rank.
Run read_run(const std::string& path);
Run parse_run(std::string_view text, const std::string& source = "<run>");

const RankedList* find_query(const Run& run, std::string_view query_id);

}  // namespace lrm
