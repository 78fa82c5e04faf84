#include "lrm/encoders_sparse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "jsonl.hpp"
#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"

namespace lrm {

std::vector<RawDocument> read_corpus(const std::string& path) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
    RawDocument doc{detail::require_string(obj, "id"), detail::require_string(obj, "contents")};
    if (!seen.insert(doc.id).second) throw DataError("duplicate id " + doc.id);
    docs.push_back(std::move(doc));
  });
  return docs;
}

std::unordered_map<std::string, std::vector<std::string>> read_expansions(const std::string& path) {
  std::unordered_map<std::string, std::vector<std::string>> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
    auto id = detail::require_string(obj, "id");
    const auto& terms = detail::require_field(obj, "expansion");
    if (!terms.is_array()) throw DataError("\"expansion\" must be an array");
    std::vector<std::string> list;
    for (const auto& t : terms) {
      if (!t.is_string()) throw DataError("expansion terms must be strings");
      list.push_back(t.get<std::string>());
    }
    if (!out.emplace(std::move(id), std::move(list)).second)
      throw DataError("duplicate expansion id");
  });
  return out;
}

CorpusStats compute_corpus_stats(std::span<const Document> corpus, TermDictionary& dict) {
  if (corpus.empty()) throw DataError("corpus statistics need at least one document");
  CorpusStats stats;
  stats.num_docs = corpus.size();
  std::uint64_t total_len = 0;
  std::vector<std::uint64_t> last_seen;  // 1 + doc index that last counted the term
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& doc = corpus[d];
    stats.doc_ids.push_back(doc.id);
    stats.doc_len.push_back(static_cast<std::uint32_t>(doc.tokens.size()));
    total_len += doc.tokens.size();
    for (const auto& token : doc.tokens) {
      const TermId t = dict.intern(token);
      if (t >= stats.df.size()) {
        stats.df.resize(t + 1, 0);
        last_seen.resize(t + 1, 0);
      }
      if (last_seen[t] != d + 1) {
        last_seen[t] = d + 1;
        ++stats.df[t];
      }
    }
  }
  stats.avgdl = static_cast<double>(total_len) / static_cast<double>(corpus.size());
  if (!(stats.avgdl > 0.0)) throw DataError("corpus has no tokens");
  return stats;
}

double bm25_idf(std::uint32_t df, std::size_t num_docs) {
  const double n = static_cast<double>(num_docs);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

namespace {

// term id → tf, in ascending id order.
std::map<TermId, std::uint32_t> term_frequencies(std::span<const std::string> tokens,
                                                 const CorpusStats& stats,
                                                 const TermDictionary& dict) {
  std::map<TermId, std::uint32_t> tf;
  for (const auto& token : tokens) {
    auto id = dict.lookup(token);
    if (!id || stats.document_frequency(*id) == 0)
      throw std::invalid_argument("term \"" + token + "\" missing from corpus statistics");
    ++tf[*id];
  }
  return tf;
}

}  // namespace

SparseVector bm25_encode_document(std::span<const std::string> tokens, const CorpusStats& stats,
                                  const Bm25Params& params, const TermDictionary& dict) {
  const double dl = static_cast<double>(tokens.size());
  const double norm = params.k1 * (1.0 - params.b + params.b * dl / stats.avgdl);
  std::vector<SparseEntry> entries;
  for (const auto& [term, tf] : term_frequencies(tokens, stats, dict)) {
    const double idf = bm25_idf(stats.df[term], stats.num_docs);
    entries.push_back({term, idf * tf * (params.k1 + 1.0) / (tf + norm)});
  }
  return SparseVector::from_entries(std::move(entries));
}

SparseVector tfidf_encode_document(std::span<const std::string> tokens, const CorpusStats& stats,
                                   const TermDictionary& dict) {
  const double n = static_cast<double>(stats.num_docs);
  std::vector<SparseEntry> entries;
  for (const auto& [term, tf] : term_frequencies(tokens, stats, dict))
    entries.push_back({term, tf * std::log(n / stats.df[term])});
  return SparseVector::from_entries(std::move(entries));
}

SparseVector multi_hot_encode_query(std::span<const std::string> tokens,
                                    const TermDictionary& dict) {
  std::vector<SparseEntry> entries;
  std::unordered_set<TermId> seen;
  for (const auto& token : tokens) {
    auto id = dict.lookup(token);
    if (id && seen.insert(*id).second) entries.push_back({*id, 1.0});
  }
  return SparseVector::from_entries(std::move(entries));
}

TokenList apply_expansion(std::span<const std::string> tokens,
                          std::span<const std::string> expansion_terms) {
  TokenList out(tokens.begin(), tokens.end());
  std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  for (const auto& term : expansion_terms)
    if (present.insert(term).second) out.push_back(term);
  return out;
}

SparseVector ImpactVector::as_sparse() const {
  std::vector<SparseEntry> e;
  e.reserve(entries.size());
  for (const auto& [term, impact] : entries) e.push_back({term, static_cast<double>(impact)});
  return SparseVector::from_entries(std::move(e));
}

Quantization quantize_impacts(std::span<const SparseVector> vectors, int bits) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("quantize_impacts: bits must be in [1, 16]");
  if (vectors.empty()) throw std::invalid_argument("quantize_impacts: empty collection");
  double w_max = 0.0;
  for (const auto& v : vectors)
    for (const auto& e : v.entries()) {
      if (!(e.weight > 0.0))
        throw std::invalid_argument("quantize_impacts: nonpositive weight for term " +
                                    std::to_string(e.term));
      w_max = std::max(w_max, e.weight);
    }
  if (w_max == 0.0) throw std::invalid_argument("quantize_impacts: no weights to quantize");

  const double top = static_cast<double>((1u << bits) - 1);
  Quantization q;
  q.max_weight = w_max;
  q.bits = bits;
  q.vectors.reserve(vectors.size());
  for (const auto& v : vectors) {
    ImpactVector iv;
    iv.bits = bits;
    iv.entries.reserve(v.size());
    for (const auto& e : v.entries()) {
      const double code = std::max(1.0, std::round(e.weight / w_max * top));
      iv.entries.push_back({e.term, static_cast<std::uint32_t>(code)});
    }
    q.vectors.push_back(std::move(iv));
  }
  return q;
}

std::vector<NamedSparse> load_learned_sparse(const std::string& path, TermDictionary& dict) {
  std::vector<NamedSparse> out;
  std::unordered_set<std::string> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
    auto id = detail::require_string(obj, "id");
    if (!seen.insert(id).second) throw DataError("duplicate id " + id);
    const auto& vec = detail::require_field(obj, "vector");
    if (!vec.is_object()) throw DataError("\"vector\" must be an object");
    std::vector<SparseEntry> entries;
    for (const auto& [term, w] : vec.items()) {
      if (!w.is_number()) throw DataError("weight for \"" + term + "\" is not a number");
      const double weight = w.get<double>();
      if (!std::isfinite(weight)) throw DataError("non-finite weight for \"" + term + "\"");
      if (weight < 0.0) throw DataError("negative weight for \"" + term + "\"");
      entries.push_back({dict.intern(term), weight});
    }
    out.emplace_back(std::move(id), SparseVector::from_entries(std::move(entries)));
  });
  return out;
}

void save_learned_sparse(const std::string& path, std::span<const NamedSparse> vectors,
                         const TermDictionary& dict) {
  std::ostringstream out;
  for (const auto& [id, vec] : vectors) {
    nlohmann::ordered_json obj;
    obj["id"] = id;
    obj["vector"] = nlohmann::ordered_json::object();
    for (const auto& e : vec.entries()) obj["vector"][dict.term(e.term)] = e.weight;
    out << obj.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace lrm
