#include <set>

#include "doctest.h"
#include "lrm/binary_io.hpp"
#include "lrm/brute_force.hpp"
#include "lrm/error.hpp"
#include "lrm/inverted_index.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace lrm;
using namespace lrm::testing;

namespace {

NamedSparse doc(std::string id, std::vector<SparseEntry> e) { return {std::move(id), SparseVector::from_entries(std::move(e))}; }

// Exact top-k over documents sharing a term with the query.
RankedList overlap_oracle(std::span<const NamedSparse> docs, const SparseVector& q, std::size_t k) {
  std::vector<ScoredDoc> scored;
  for (const auto& [id, v] : docs) {
    bool overlap = false;
    for (const auto& e : q.entries()) overlap |= v.weight(e.term) != 0.0;
    if (overlap) scored.push_back({id, inner_product(q, v)});
  }
  if (scored.empty()) return {};
  return top_k_select(scored, k);
}

}  // namespace

TEST_CASE("postings round trip") {
  Rng rng(1);
  const auto docs = zipf_corpus(rng, 10000, 3000, 5, 30);
  const auto c = bm25_corpus(docs);
  const auto index = InvertedIndex::build(c.docs);
  CHECK(index.num_docs() == 10000);
  CHECK(index.kind() == WeightKind::real);
  std::vector<std::map<TermId, double>> rebuilt(index.num_docs());
  for (TermId t = 0; t < index.num_terms(); ++t) {
    const auto postings = index.decode(t);
    CHECK(postings.size() == index.df(t));
    for (std::size_t i = 1; i < postings.size(); ++i) REQUIRE(postings[i - 1].ordinal < postings[i].ordinal);
    for (const auto& p : postings) rebuilt[p.ordinal][t] = p.weight;
  }
  for (std::size_t d = 0; d < c.docs.size(); ++d) {
    REQUIRE(rebuilt[d].size() == c.docs[d].second.size());
    for (const auto& e : c.docs[d].second.entries()) REQUIRE(rebuilt[d][e.term] == e.weight);
  }
}

TEST_CASE("impact postings round trip") {
  Rng rng(2);
  const auto docs = zipf_corpus(rng, 2000, 1000);
  const auto c = bm25_corpus(docs);
  std::vector<SparseVector> raw;
  std::vector<std::string> ids;
  for (const auto& [id, v] : c.docs) {
    raw.push_back(v);
    ids.push_back(id);
  }
  const auto q = quantize_impacts(raw, 8);
  const auto index = InvertedIndex::build(ids, q);
  CHECK(index.kind() == WeightKind::impact);
  CHECK(index.impact_bits() == 8);
  CHECK(index.impact_scale() == q.max_weight);
  for (std::size_t d = 0; d < ids.size(); ++d)
    for (const auto& e : q.vectors[d].entries) {
      bool found = false;
      for (const auto& p : index.decode(e.term))
        if (p.ordinal == d) found = p.weight == double(e.impact);
      REQUIRE(found);
    }
}

TEST_CASE("cursor navigation") {
  std::vector<NamedSparse> docs = {doc("a", {{0, 1.0}}), doc("b", {{1, 2.0}}), doc("c", {{0, 3.0}}),
                                   doc("d", {{0, 4.0}, {1, 1.0}})};
  const auto index = InvertedIndex::build(docs);
  auto cur = index.cursor(0);
  CHECK(cur.doc() == 0);
  cur.next_geq(1);
  CHECK(cur.doc() == 2);
  CHECK(cur.weight() == 3.0);
  cur.next_geq(2);
  CHECK(cur.doc() == 2);
  cur.next();
  CHECK(cur.doc() == 3);
  cur.next();
  CHECK(cur.done());
  CHECK(index.max_weight(0) == 4.0);
  CHECK(index.min_weight(0) == 1.0);
  CHECK(index.df(99) == 0);
}

TEST_CASE("duplicate ids are rejected") {
  std::vector<NamedSparse> docs = {doc("a", {{0, 1.0}}), doc("a", {{1, 1.0}})};
  CHECK_THROWS_AS(InvertedIndex::build(docs), DataError);
}

TEST_CASE("daat and maxscore agree with the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto docs = zipf_corpus(rng, 1000, 2000);
    const auto c = bm25_corpus(docs);
    const auto index = InvertedIndex::build(c.docs);
    Zipf zipf(2000);
    for (int i = 0; i < 100; ++i) {
      const auto q = multi_hot_encode_query(zipf_query(rng, zipf, 1, 6), c.dict);
      for (std::size_t k : {1, 10, 50}) {
        const auto want = overlap_oracle(c.docs, q, k);
        const auto a = daat_search(index, q, {k, k});
        const auto b = max_score_prune(index, q, {k, k});
        REQUIRE(a.hits.size() == want.hits.size());
        REQUIRE(a == b);
        for (std::size_t j = 0; j < want.hits.size(); ++j) {
          REQUIRE(a.hits[j].doc_id == want.hits[j].doc_id);
          REQUIRE(a.hits[j].score == doctest::Approx(want.hits[j].score).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("weighted and negative query weights stay exact") {
  Rng rng(3);
  const auto docs = zipf_corpus(rng, 500, 300);
  const auto c = bm25_corpus(docs);
  const auto index = InvertedIndex::build(c.docs);
  for (int i = 0; i < 200; ++i) {
    std::map<TermId, double> m;
    while (m.size() < 4) m[TermId(uniform_index(rng, c.dict.size()))] = normal(rng);
    std::vector<SparseEntry> e;
    for (auto [t, w] : m) e.push_back({t, w});
    const auto q = SparseVector::from_entries(e);
    REQUIRE(daat_search(index, q, {10, 10}) == max_score_prune(index, q, {10, 10}));
    const auto want = overlap_oracle(c.docs, q, 10);
    const auto got = daat_search(index, q, {10, 10});
    for (std::size_t j = 0; j < want.hits.size(); ++j) REQUIRE(got.hits[j].doc_id == want.hits[j].doc_id);
  }
}

TEST_CASE("maxscore skips work on a skewed query") {
  // One rare heavy term, one term in every document with a tiny weight.
  std::vector<NamedSparse> docs;
  for (int i = 0; i < 2000; ++i) {
    std::vector<SparseEntry> e = {{0, 0.001 + 1e-6 * i}};
    if (i % 100 == 0) e.push_back({1, 5.0 + i * 1e-3});
    docs.push_back(doc(doc_name(std::size_t(i)), e));
  }
  const auto index = InvertedIndex::build(docs);
  const auto q = SparseVector::from_entries({{0, 1.0}, {1, 1.0}});
  SearchStats full, pruned;
  const auto a = daat_search(index, q, {5, 5}, &full);
  const auto b = max_score_prune(index, q, {5, 5}, &pruned);
  CHECK(a == b);
  CHECK(full.postings_scored == 2020);
  CHECK(pruned.postings_scored < full.postings_scored);
}

TEST_CASE("search edge cases") {
  std::vector<NamedSparse> docs = {doc("b", {{0, 1.0}}), doc("a", {{0, 1.0}}), doc("c", {{1, 2.0}})};
  const auto index = InvertedIndex::build(docs);
  CHECK(daat_search(index, SparseVector{}, {10, 10}).hits.empty());
  CHECK(max_score_prune(index, SparseVector{}, {10, 10}).hits.empty());
  const auto unknown = SparseVector::from_entries({{42, 1.0}});
  CHECK(daat_search(index, unknown, {10, 10}).hits.empty());
  const auto tie = daat_search(index, SparseVector::from_entries({{0, 1.0}}), {1, 1});
  REQUIRE(tie.hits.size() == 1);
  CHECK(tie.hits[0].doc_id == "a");
  CHECK_THROWS_AS(daat_search(index, unknown, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(SearchBudget({10, 5}).validate(), std::invalid_argument);
}

TEST_CASE("index files") {
  TempDir tmp;
  Rng rng(4);
  const auto docs = zipf_corpus(rng, 200, 300);
  auto c = bm25_corpus(docs);
  auto index = InvertedIndex::build(c.docs);
  index.dictionary = c.dict;
  index.stats = c.stats;
  index.metadata["encoder"] = "bm25";
  persist_index(index, tmp.file("i.sidx"));
  const auto back = load_inverted_index(tmp.file("i.sidx"));
  CHECK(back.metadata.at("encoder") == "bm25");
  REQUIRE(back.dictionary);
  CHECK(back.dictionary->size() == c.dict.size());
  REQUIRE(back.stats);
  CHECK(back.stats->df == c.stats.df);
  CHECK(back.stats->avgdl == c.stats.avgdl);
  Zipf zipf(300);
  for (int i = 0; i < 50; ++i) {
    const auto q = multi_hot_encode_query(zipf_query(rng, zipf), c.dict);
    CHECK(daat_search(index, q, {10, 10}) == daat_search(back, q, {10, 10}));
  }

  const auto image = read_file(tmp.file("i.sidx"));
  CHECK(image.substr(0, 4) == "SIDX");
  for (std::size_t cut = 0; cut < image.size(); cut += std::max<std::size_t>(1, image.size() / 97))
    CHECK_THROWS_AS(decode_inverted_index(std::string_view(image).substr(0, cut)), DataError);
  auto bad = image;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_inverted_index(bad), FormatError);
  bad = image;
  bad[4] = 9;  // version
  CHECK_THROWS_AS(decode_inverted_index(bad), FormatError);
  bad = image;
  bad[image.size() / 2] ^= 1;
  CHECK_THROWS_AS(decode_inverted_index(bad), FormatError);
  CHECK_THROWS_AS(load_inverted_index(tmp.file("missing")), DataError);
}
