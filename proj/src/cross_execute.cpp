#include "lrm/cross_execute.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "lrm/brute_force.hpp"
#include "lrm/error.hpp"

namespace lrm {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::brute_force: return "brute_force";
    case Backend::inverted: return "inverted";
    case Backend::maxscore: return "maxscore";
    case Backend::hnsw: return "hnsw";
  }
  return "?";
}

Backend parse_backend(std::string_view name) {
  if (name == "brute_force") return Backend::brute_force;
  if (name == "inverted") return Backend::inverted;
  if (name == "maxscore") return Backend::maxscore;
  if (name == "hnsw") return Backend::hnsw;
  throw std::invalid_argument("unknown backend: " + std::string(name));
}

bool supports(Backend backend, Comparison phi) {
  return phi != Comparison::max_sim || backend == Backend::brute_force;
}

nlohmann::ordered_json Profile::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["backend"] = backend;
  j["corpus"] = corpus;
  j["docs"] = docs;
  j["queries"] = queries;
  j["k"] = k;
  j["index_bytes"] = index_bytes;
  j["encode_ms"] = encode_ms;
  j["build_ms"] = build_ms;
  j["mean_query_ms"] = mean_query_ms;
  j["recall"] = recall;
  j["postings_scored"] = postings_scored;
  return j;
}

double recall_against(const RankedList& approx, const RankedList& exact) {
  std::unordered_set<std::string_view> got;
  for (const auto& h : approx.hits) got.insert(h.doc_id);
  std::size_t relevant = 0, found = 0;
  for (const auto& h : exact.hits) {
    if (h.score == 0.0) continue;
    ++relevant;
    if (got.contains(h.doc_id)) ++found;
  }
  return relevant == 0 ? 1.0 : static_cast<double>(found) / static_cast<double>(relevant);
}

SparseVector sparsify(const DenseVector& v) {
  std::vector<SparseEntry> e;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) e.push_back({static_cast<TermId>(i), v[i]});
  return SparseVector::from_entries(std::move(e));
}

DenseVector densify(const SparseVector& v, Eigen::Index dim) {
  DenseVector out = DenseVector::Zero(dim);
  for (const auto& e : v.entries())
    if (static_cast<Eigen::Index>(e.term) < dim) out[e.term] = e.weight;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Representation to_storage_precision(Representation r) {
  if (auto* s = std::get_if<SparseVector>(&r)) return s->rounded_to_float();
  if (auto* d = std::get_if<DenseVector>(&r)) return DenseVector(d->cast<float>().cast<double>());
  return r;
}

SparseVector as_sparse(const Representation& r, bool normalize) {
  SparseVector v;
  if (auto* s = std::get_if<SparseVector>(&r)) {
    v = *s;
  } else if (auto* d = std::get_if<DenseVector>(&r)) {
    v = sparsify(*d);
  } else {
    throw std::invalid_argument("multi-vector representation on an inverted index");
  }
  if (!normalize) return v;
  double norm = 0.0;
  for (const auto& e : v.entries()) norm += e.weight * e.weight;
  norm = std::sqrt(norm);
  if (norm == 0.0) return v;
  std::vector<SparseEntry> scaled(v.entries().begin(), v.entries().end());
  for (auto& e : scaled) e.weight /= norm;
  return SparseVector::from_entries(std::move(scaled));
}

DenseVector as_dense(const Representation& r, Eigen::Index dim) {
  if (auto* d = std::get_if<DenseVector>(&r)) return *d;
  if (auto* s = std::get_if<SparseVector>(&r)) return densify(*s, dim);
  throw std::invalid_argument("multi-vector representation on an HNSW index");
}

// Brute-force index over already-encoded documents.
BruteForceIndex make_brute_force(std::span<const Text> corpus, const std::vector<Representation>& reps,
                                 Comparison phi) {
  std::vector<std::string> ids;
  for (const auto& t : corpus) ids.push_back(t.id);
  if (reps.empty() || std::holds_alternative<SparseVector>(reps.front())) {
    std::vector<NamedSparse> docs;
    for (std::size_t i = 0; i < reps.size(); ++i)
      docs.emplace_back(ids[i], std::get<SparseVector>(reps[i]));
    return BruteForceIndex(docs, phi);
  }
  if (std::holds_alternative<DenseVector>(reps.front())) {
    std::vector<DenseVector> rows;
    for (const auto& r : reps) rows.push_back(std::get<DenseVector>(r));
    return BruteForceIndex(DenseStore::from_rows(std::move(ids), rows), phi);
  }
  std::vector<MultiVector> multi;
  for (const auto& r : reps) multi.push_back(std::get<MultiVector>(r));
  return BruteForceIndex(std::move(ids), std::move(multi));
}

}  // namespace

CrossResult cross_execute(const LogicalScoringModel& model, Backend backend,
                          std::span<const Text> corpus, std::span<const Text> queries,
                          const CrossOptions& options) {
  if (!supports(backend, model.phi))
    throw std::invalid_argument("unsupported (" + std::string(to_string(model.phi)) + ", " +
                                std::string(to_string(backend)) + ") pair");
  options.budget.validate();
  if (corpus.empty()) throw DataError("cross_execute: empty corpus");

  CrossResult result;
  auto& prof = result.profile;
  prof.model = model.name;
  prof.backend = std::string(to_string(backend));
  prof.corpus = options.corpus_name;
  prof.docs = corpus.size();
  prof.queries = queries.size();
  prof.k = options.budget.k;

  auto t0 = Clock::now();
  std::vector<Representation> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus) {
    docs.push_back(to_storage_precision(model.doc_encoder(d)));
    if (docs.back().index() != docs.front().index())
      throw DataError("documents encode to mixed representation kinds");
  }
  std::vector<std::optional<Representation>> qreps;
  for (const auto& q : queries) {
    try {
      qreps.emplace_back(model.query_encoder(q));
    } catch (const DataError&) {
      qreps.emplace_back(std::nullopt);
    }
  }
  prof.encode_ms = ms_since(t0);

  const bool cosine_phi = model.phi == Comparison::cosine;
  const auto oracle = make_brute_force(corpus, docs, model.phi);
  std::function<RankedList(const Representation&)> search;

  // Backend-specific state kept alive for the search closure.
  std::optional<InvertedIndex> inverted;
  std::optional<HnswIndex> hnsw;
  Eigen::Index dense_dim = 0;

  t0 = Clock::now();
  switch (backend) {
    case Backend::brute_force:
      prof.index_bytes = oracle.bytes();
      search = [&](const Representation& q) { return brute_force_search(oracle, q, options.budget); };
      break;
    case Backend::inverted:
    case Backend::maxscore: {
      std::vector<NamedSparse> sparse;
      for (std::size_t i = 0; i < docs.size(); ++i)
        sparse.emplace_back(corpus[i].id, as_sparse(docs[i], cosine_phi));
      inverted = InvertedIndex::build(sparse);
      prof.index_bytes = encode_inverted_index(*inverted).size();
      search = [&, pruned = backend == Backend::maxscore](const Representation& q) {
        SearchStats st;
        auto sq = as_sparse(q, cosine_phi);
        auto list = pruned ? max_score_prune(*inverted, sq, options.budget, &st)
                           : daat_search(*inverted, sq, options.budget, &st);
        prof.postings_scored += st.postings_scored;
        return list;
      };
      break;
    }
    case Backend::hnsw: {
      for (const auto& d : docs)
        if (auto* s = std::get_if<SparseVector>(&d))
          dense_dim = std::max<Eigen::Index>(dense_dim, static_cast<Eigen::Index>(s->dimension_hint()));
      std::vector<DenseVector> rows;
      for (const auto& d : docs) {
        if (auto* v = std::get_if<DenseVector>(&d)) dense_dim = v->size();
        rows.push_back(as_dense(d, std::max<Eigen::Index>(dense_dim, 1)));
      }
      dense_dim = rows.front().size();
      std::vector<std::string> ids;
      for (const auto& t : corpus) ids.push_back(t.id);
      auto params = options.hnsw;
      params.metric = cosine_phi ? Metric::cosine : Metric::inner_product;
      hnsw = HnswIndex::build(DenseStore::from_rows(std::move(ids), rows), params);
      prof.index_bytes = encode_hnsw_index(*hnsw).size();
      search = [&](const Representation& q) {
        return hnsw->search(as_dense(q, dense_dim), options.budget);
      };
      break;
    }
  }
  prof.build_ms = ms_since(t0);

  double query_ms = 0.0, recall_sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    RankedList list;
    RankedList exact;
    if (qreps[i]) {
      const auto start = Clock::now();
      list = search(*qreps[i]);
      query_ms += ms_since(start);
      exact = brute_force_search(oracle, *qreps[i], options.budget);
    }
    recall_sum += recall_against(list, exact);
    list.query_id = queries[i].id;
    result.run.push_back(std::move(list));
  }
  if (!queries.empty()) {
    prof.mean_query_ms = query_ms / static_cast<double>(queries.size());
    prof.recall = recall_sum / static_cast<double>(queries.size());
  }
  return result;
}

}  // namespace lrm
