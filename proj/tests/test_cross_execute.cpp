#include <memory>

#include "doctest.h"
#include "lrm/cross_execute.hpp"
#include "lrm/error.hpp"
#include "support/synthetic.hpp"

using namespace lrm;
using namespace lrm::testing;

namespace {

struct SparseTask {
  std::vector<Text> corpus, queries;
  LogicalScoringModel model;
};

SparseTask bm25_task(std::uint64_t seed, std::size_t docs, std::size_t vocab, std::size_t queries) {
  Rng rng(seed);
  SparseTask t;
  const auto corpus = zipf_corpus(rng, docs, vocab);
  for (const auto& d : corpus) t.corpus.push_back({d.id, d.tokens});
  auto dict = std::make_shared<TermDictionary>();
  auto stats = std::make_shared<CorpusStats>(compute_corpus_stats(corpus, *dict));
  Zipf zipf(vocab);
  for (std::size_t i = 0; i < queries; ++i) t.queries.push_back({"q" + std::to_string(i), zipf_query(rng, zipf)});
  t.model.name = "bm25";
  t.model.doc_encoder = [dict, stats](const Text& d) -> Representation {
    return bm25_encode_document(d.tokens, *stats, {}, *dict);
  };
  t.model.query_encoder = [dict](const Text& q) -> Representation { return multi_hot_encode_query(q.tokens, *dict); };
  return t;
}

struct DenseTask {
  std::vector<Text> corpus, queries;
  LogicalScoringModel model;
};

// Vectors looked up by text id.
DenseTask dense_task(std::uint64_t seed, std::size_t docs, Eigen::Index dim, std::size_t queries) {
  Rng rng(seed);
  auto table = std::make_shared<std::map<std::string, DenseVector>>();
  DenseTask t;
  const auto rows = gaussian_rows(rng, docs + queries, dim);
  for (std::size_t i = 0; i < docs; ++i) {
    t.corpus.push_back({doc_name(i), {}});
    (*table)[doc_name(i)] = rows[i];
  }
  for (std::size_t i = 0; i < queries; ++i) {
    t.queries.push_back({"q" + std::to_string(i), {}});
    (*table)["q" + std::to_string(i)] = rows[docs + i];
  }
  t.model.name = "lookup";
  t.model.doc_encoder = [table](const Text& x) -> Representation { return table->at(x.id); };
  t.model.query_encoder = t.model.doc_encoder;
  return t;
}

}  // namespace

TEST_CASE("support matrix") {
  for (auto b : {Backend::brute_force, Backend::inverted, Backend::maxscore, Backend::hnsw}) {
    CHECK(supports(b, Comparison::inner_product));
    CHECK(supports(b, Comparison::cosine));
    CHECK(supports(b, Comparison::max_sim) == (b == Backend::brute_force));
    CHECK(parse_backend(to_string(b)) == b);
  }
  CHECK_THROWS_AS(parse_backend("faiss"), std::invalid_argument);
}

TEST_CASE("unsupported pair names both sides") {
  auto t = bm25_task(1, 20, 50, 2);
  t.model.phi = Comparison::max_sim;
  try {
    cross_execute(t.model, Backend::inverted, t.corpus, t.queries);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    CHECK(what.find("max_sim") != std::string::npos);
    CHECK(what.find("inverted") != std::string::npos);
  }
}

TEST_CASE("bm25 on the inverted index equals brute force") {
  const auto t = bm25_task(2, 800, 1500, 100);
  CrossOptions opt;
  opt.budget = {10, 10};
  const auto exact = cross_execute(t.model, Backend::brute_force, t.corpus, t.queries, opt);
  for (auto b : {Backend::inverted, Backend::maxscore}) {
    const auto r = cross_execute(t.model, b, t.corpus, t.queries, opt);
    CHECK(r.profile.recall == 1.0);
    REQUIRE(r.run.size() == exact.run.size());
    for (std::size_t i = 0; i < r.run.size(); ++i) {
      CHECK(r.run[i].query_id == exact.run[i].query_id);
      // The inverted index never returns zero-overlap fillers.
      std::vector<ScoredDoc> nonzero;
      for (const auto& h : exact.run[i].hits)
        if (h.score != 0.0) nonzero.push_back(h);
      CHECK(r.run[i].hits == nonzero);
    }
  }
}

TEST_CASE("dense vectors on the inverted index are exact but touch every posting") {
  const auto t = dense_task(3, 500, 16, 30);
  CrossOptions opt;
  opt.budget = {10, 10};
  const auto r = cross_execute(t.model, Backend::inverted, t.corpus, t.queries, opt);
  CHECK(r.profile.recall == 1.0);
  CHECK(r.profile.postings_scored == 30u * 500u * 16u);
  const auto exact = cross_execute(t.model, Backend::brute_force, t.corpus, t.queries, opt);
  for (std::size_t i = 0; i < r.run.size(); ++i) CHECK(r.run[i] == exact.run[i]);

  opt.budget = {10, 200};
  const auto g = cross_execute(t.model, Backend::hnsw, t.corpus, t.queries, opt);
  CHECK(g.profile.recall > 0.9);
}

TEST_CASE("sparse vectors on hnsw lose recall") {
  const auto t = bm25_task(4, 2000, 3000, 100);
  CrossOptions opt;
  opt.budget = {10, 10};
  opt.hnsw.m = 4;
  opt.hnsw.ef_construction = 10;
  const auto r = cross_execute(t.model, Backend::hnsw, t.corpus, t.queries, opt);
  CHECK(r.profile.recall < 1.0);
  CHECK(r.profile.recall > 0.0);
}

TEST_CASE("cosine on the inverted index") {
  const auto t = dense_task(5, 300, 8, 20);
  auto model = t.model;
  model.phi = Comparison::cosine;
  CrossOptions opt;
  opt.budget = {5, 5};
  const auto a = cross_execute(model, Backend::maxscore, t.corpus, t.queries, opt);
  const auto b = cross_execute(model, Backend::brute_force, t.corpus, t.queries, opt);
  CHECK(a.profile.recall == 1.0);
  // Unit-normalized postings are stored as float32 a second time.
  for (std::size_t i = 0; i < a.run.size(); ++i)
    for (std::size_t j = 0; j < a.run[i].hits.size(); ++j) {
      CHECK(a.run[i].hits[j].doc_id == b.run[i].hits[j].doc_id);
      CHECK(a.run[i].hits[j].score == doctest::Approx(b.run[i].hits[j].score).epsilon(1e-6));
    }
}

TEST_CASE("profile record") {
  const auto t = bm25_task(6, 50, 100, 5);
  CrossOptions opt;
  opt.corpus_name = "toy";
  const auto r = cross_execute(t.model, Backend::maxscore, t.corpus, t.queries, opt);
  const auto j = r.profile.to_json();
  std::vector<std::string> keys;
  for (const auto& [key, _] : j.items()) keys.push_back(key);
  CHECK(keys == std::vector<std::string>{"model", "backend", "corpus", "docs", "queries", "k", "index_bytes",
                                         "encode_ms", "build_ms", "mean_query_ms", "recall", "postings_scored"});
  CHECK(j["backend"] == "maxscore");
  CHECK(j["corpus"] == "toy");
  CHECK(j["docs"] == 50);
  CHECK(j["queries"] == 5);
  CHECK(j["index_bytes"].get<std::size_t>() > 0);
  CHECK_THROWS_AS(cross_execute(t.model, Backend::inverted, {}, t.queries, opt), DataError);
}

TEST_CASE("recall and conversions") {
  RankedList exact{"q", {{"a", 2.0}, {"b", 1.0}, {"c", 0.0}}};
  CHECK(recall_against(RankedList{"q", {{"a", 2.0}}}, exact) == 0.5);
  CHECK(recall_against(RankedList{}, RankedList{"q", {{"c", 0.0}}}) == 1.0);
  DenseVector v(4);
  v << 0.0, 1.5, 0.0, -2.0;
  const auto s = sparsify(v);
  CHECK(s.size() == 2);
  CHECK(densify(s, 4) == v);
  CHECK(densify(s, 2).size() == 2);
}
