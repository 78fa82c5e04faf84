#include "doctest.h"
#include "lrm/brute_force.hpp"
#include "lrm/error.hpp"
#include "support/synthetic.hpp"

using namespace lrm;
using namespace lrm::testing;

TEST_CASE("scores every document, zeros included") {
  std::vector<NamedSparse> docs = {{"b", SparseVector::from_entries({{0, 2.0}})},
                                   {"a", SparseVector::from_entries({{1, 1.0}})},
                                   {"c", SparseVector::from_entries({{0, 1.0}, {1, 1.0}})}};
  const BruteForceIndex index(docs, Comparison::inner_product);
  CHECK(index.size() == 3);
  const Representation q = SparseVector::from_entries({{0, 1.0}});
  const auto r = brute_force_search(index, q, {3, 3});
  REQUIRE(r.hits.size() == 3);
  CHECK(r.hits[0] == ScoredDoc{"b", 2.0});
  CHECK(r.hits[1] == ScoredDoc{"c", 1.0});
  CHECK(r.hits[2] == ScoredDoc{"a", 0.0});
  CHECK(brute_force_search(index, q, {10, 10}).hits.size() == 3);
  CHECK(index.score(q, 2) == 1.0);
}

TEST_CASE("ties break by document id") {
  std::vector<NamedSparse> docs;
  for (const char* id : {"z", "m", "a", "q"}) docs.push_back({id, SparseVector::from_entries({{0, 1.0}})});
  const BruteForceIndex index(docs, Comparison::inner_product);
  const auto r = brute_force_search(index, Representation(SparseVector::from_entries({{0, 1.0}})), {2, 2});
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].doc_id == "a");
  CHECK(r.hits[1].doc_id == "m");
}

TEST_CASE("dense scoring matches a direct evaluation") {
  Rng rng(1);
  auto store = gaussian_store(rng, 300, 12);
  const auto queries = gaussian_rows(rng, 20, 12);
  for (auto phi : {Comparison::inner_product, Comparison::cosine}) {
    const BruteForceIndex index(store, phi);
    for (const auto& q : queries) {
      std::vector<ScoredDoc> want;
      for (std::size_t i = 0; i < store.size(); ++i) {
        const DenseVector d = store.vectors.row(Eigen::Index(i)).cast<double>().transpose();
        const double s = phi == Comparison::cosine ? q.dot(d) / (q.norm() * d.norm()) : q.dot(d);
        want.push_back({store.ids[i], s});
      }
      std::sort(want.begin(), want.end(), ranks_before);
      const auto r = brute_force_search(index, Representation(q), {10, 10});
      REQUIRE(r.hits.size() == 10);
      for (std::size_t j = 0; j < 10; ++j) {
        CHECK(r.hits[j].doc_id == want[j].doc_id);
        CHECK(r.hits[j].score == doctest::Approx(want[j].score).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("max_sim over multi-vectors") {
  Eigen::MatrixXd d1(2, 2), d2(1, 2), q(2, 2);
  d1 << 1, 0, 0, 1;
  d2 << 1, 1;
  q << 1, 0, 0, 1;
  const BruteForceIndex index({"d1", "d2"}, {MultiVector(d1), MultiVector(d2)});
  CHECK(index.comparison() == Comparison::max_sim);
  const auto r = brute_force_search(index, Representation(MultiVector(q)), {2, 2});
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].doc_id == "d1");
  CHECK(r.hits[0].score == doctest::Approx(2.0));
  CHECK(r.hits[1].score == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("mismatched queries are rejected") {
  Rng rng(2);
  const BruteForceIndex dense(gaussian_store(rng, 5, 4), Comparison::inner_product);
  CHECK_THROWS_AS(brute_force_search(dense, Representation(SparseVector{}), {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_search(dense, Representation(DenseVector(DenseVector::Ones(3))), {1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(brute_force_search(dense, Representation(DenseVector(DenseVector::Ones(4))), {0, 0}),
                  std::invalid_argument);
  CHECK(dense.bytes() >= 5 * 4 * sizeof(float));
}
