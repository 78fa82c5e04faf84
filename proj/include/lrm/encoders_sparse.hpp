#pragma once

// Sparse query/document encoders: BM25 and tf-idf document weighting,
// multi-hot queries, document expansion, impact quantization, and ingestion
// of externally learned sparse weights.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lrm/analysis.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

struct Document {
  std::string id;
  TokenList tokens;
};

/// Raw corpus record: {"id": ..., "contents": ...}.
struct RawDocument {
  std::string id;
  std::string contents;
};

/// Reads the JSONL corpus (also used for query files). Duplicate ids throw
/// DataError.
std::vector<RawDocument> read_corpus(const std::string& path);

/// {"id": ..., "expansion": [...]} per line.
std::unordered_map<std::string, std::vector<std::string>> read_expansions(const std::string& path);

struct CorpusStats {
  std::size_t num_docs = 0;
  double avgdl = 0.0;
  std::vector<std::uint32_t> df;  // indexed by term id
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> doc_len;  // parallel to doc_ids

  std::uint32_t document_frequency(TermId t) const { return t < df.size() ? df[t] : 0; }
};

/// Single pass over the corpus, interning every token. Empty corpus throws
/// DataError.
CorpusStats compute_corpus_stats(std::span<const Document> corpus, TermDictionary& dict);

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every df ≤ N.
double bm25_idf(std::uint32_t df, std::size_t num_docs);

/// Per distinct term: idf · tf(k1+1) / (tf + k1(1 - b + b·dl/avgdl)). Every
/// token must already be in `dict` with df ≥ 1.
SparseVector bm25_encode_document(std::span<const std::string> tokens, const CorpusStats& stats,
                                  const Bm25Params& params, const TermDictionary& dict);

/// tf · ln(N/df); terms with df = N get weight 0 and are not stored.
SparseVector tfidf_encode_document(std::span<const std::string> tokens, const CorpusStats& stats,
                                   const TermDictionary& dict);

/// Weight 1 per distinct in-vocabulary token; unknown tokens are dropped.
SparseVector multi_hot_encode_query(std::span<const std::string> tokens, const TermDictionary& dict);

/// Original tokens, then each expansion term not already present (once).
TokenList apply_expansion(std::span<const std::string> tokens,
                          std::span<const std::string> expansion_terms);

struct ImpactEntry {
  TermId term;
  std::uint32_t impact;

  friend bool operator==(const ImpactEntry&, const ImpactEntry&) = default;
};

struct ImpactVector {
  std::vector<ImpactEntry> entries;  // ascending term ids, impacts in [1, 2^bits - 1]
  int bits = 8;

  SparseVector as_sparse() const;
};

struct Quantization {
  std::vector<ImpactVector> vectors;
  double max_weight = 0.0;  // the global w_max each impact is scaled against
  int bits = 8;

  /// Impact back to the weight scale it was quantized from.
  double dequantize(std::uint32_t impact) const {
    return impact * max_weight / static_cast<double>((1u << bits) - 1);
  }
};

/// Global linear quantization: max(1, round(w / w_max · (2^bits − 1))).
/// Nonpositive weights, an empty collection or bits outside [1, 16] throw.
Quantization quantize_impacts(std::span<const SparseVector> vectors, int bits = 8);

using NamedSparse = std::pair<std::string, SparseVector>;

/// {"id": ..., "vector": {term: weight, ...}} per line. Terms are interned
/// verbatim into `dict`; negative weights and malformed lines throw DataError.
std::vector<NamedSparse> load_learned_sparse(const std::string& path, TermDictionary& dict);

void save_learned_sparse(const std::string& path, std::span<const NamedSparse> vectors,
                         const TermDictionary& dict);

}  // namespace lrm
