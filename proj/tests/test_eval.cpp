#include <cmath>

#include "doctest.h"
#include "lrm/error.hpp"
#include "lrm/eval.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace lrm;
using namespace lrm::testing;

namespace {

RankedList ranked(std::string qid, std::vector<std::string> docs) {
  RankedList l{std::move(qid), {}};
  for (std::size_t i = 0; i < docs.size(); ++i) l.hits.push_back({docs[i], double(docs.size() - i)});
  return l;
}

}  // namespace

TEST_CASE("ndcg of a single relevant document at rank two") {
  Qrels q;
  q.add("q", "b", 1);
  const Run run = {ranked("q", {"a", "b", "c"})};
  CHECK(ndcg_at_k(run, q, 10).value == doctest::Approx(1.0 / std::log2(3.0)));
  CHECK(ndcg_at_k(run, q, 10).value == doctest::Approx(0.63093).epsilon(1e-5));
  CHECK(ndcg_at_k(run, q, 1).value == 0.0);
}

TEST_CASE("graded ndcg against a direct sum") {
  Qrels q;
  q.add("q", "a", 1);
  q.add("q", "b", 3);
  q.add("q", "c", 2);
  const Run run = {ranked("q", {"a", "x", "c", "b"})};
  const double dcg = 1.0 / std::log2(2.0) + 3.0 / std::log2(4.0) + 7.0 / std::log2(5.0);
  const double idcg = 7.0 / std::log2(2.0) + 3.0 / std::log2(3.0) + 1.0 / std::log2(4.0);
  CHECK(ndcg_at_k(run, q, 10).value == doctest::Approx(dcg / idcg));
}

TEST_CASE("average precision and reciprocal rank") {
  Qrels q;
  q.add("q", "a", 1);
  q.add("q", "c", 1);
  const Run run = {ranked("q", {"a", "b", "c"})};
  CHECK(average_precision(run, q).value == doctest::Approx(5.0 / 6.0));
  CHECK(average_precision(run, q).value == doctest::Approx(0.83333).epsilon(1e-5));
  CHECK(mrr_at_k(run, q, 10).value == 1.0);
  const Run late = {ranked("q", {"x", "y", "c"})};
  CHECK(mrr_at_k(late, q, 10).value == doctest::Approx(1.0 / 3.0));
  CHECK(mrr_at_k(late, q, 2).value == 0.0);
  // Relevant documents never retrieved still count in the denominator.
  CHECK(average_precision(late, q).value == doctest::Approx((1.0 / 3.0) / 2.0));
  CHECK(recall_at_k(run, q, 1).value == 0.5);
  CHECK(recall_at_k(run, q, 3).value == 1.0);
}

TEST_CASE("skip rules") {
  Qrels q;
  q.add("q1", "a", 1);
  q.add("q2", "a", 0);
  const Run run = {ranked("q1", {"a"}), ranked("q2", {"a"}), ranked("q3", {"a"})};
  const auto mrr = mrr_at_k(run, q, 10);
  CHECK(mrr.evaluated == 2);
  CHECK(mrr.skipped == 1);
  CHECK(mrr.value == 0.5);
  const auto rec = recall_at_k(run, q, 10);
  CHECK(rec.evaluated == 1);
  CHECK(rec.skipped == 2);
  CHECK(average_precision(run, q).evaluated == 1);
  CHECK(ndcg_at_k(run, q, 10).evaluated == 1);
  CHECK_FALSE(query_recall(run[1], q, 10).has_value());
  CHECK_THROWS_AS(mrr_at_k({ranked("zz", {"a"})}, q, 10), DataError);
}

TEST_CASE("metrics agree with an independent evaluation on random runs") {
  Rng rng(3);
  Qrels q;
  Run run;
  std::vector<std::map<std::string, int>> grades;
  for (int i = 0; i < 50; ++i) {
    const std::string qid = "q" + std::to_string(i);
    std::map<std::string, int> g;
    for (int d = 0; d < 30; ++d)
      if (uniform_index(rng, 4) == 0) g[doc_name(std::size_t(d))] = int(uniform_index(rng, 3)) + 1;
    g[doc_name(99)] = 1;  // at least one relevant, never retrieved
    for (auto& [d, v] : g) q.add(qid, d, v);
    std::vector<std::string> docs;
    for (int d = 0; d < 30; ++d) docs.push_back(doc_name(std::size_t(d)));
    std::shuffle(docs.begin(), docs.end(), rng);
    docs.resize(20);
    run.push_back(ranked(qid, docs));
    grades.push_back(g);
  }
  double mrr = 0, rec = 0, ap = 0;
  for (std::size_t i = 0; i < run.size(); ++i) {
    const auto& g = grades[i];
    double rr = 0, hits = 0, prec_sum = 0;
    for (std::size_t r = 0; r < run[i].hits.size(); ++r) {
      const auto it = g.find(run[i].hits[r].doc_id);
      if (it == g.end() || it->second < 1) continue;
      if (rr == 0 && r < 10) rr = 1.0 / double(r + 1);
      ++hits;
      prec_sum += hits / double(r + 1);
    }
    double found10 = 0;
    for (std::size_t r = 0; r < 10; ++r) found10 += g.contains(run[i].hits[r].doc_id);
    mrr += rr;
    rec += found10 / double(g.size());
    ap += prec_sum / double(g.size());
  }
  CHECK(mrr_at_k(run, q, 10).value == doctest::Approx(mrr / 50));
  CHECK(recall_at_k(run, q, 10).value == doctest::Approx(rec / 50));
  CHECK(average_precision(run, q).value == doctest::Approx(ap / 50));
}

TEST_CASE("run file lines") {
  const auto run = parse_run("# header\nq1 Q0 d7 1 12.500000 tag\nq1 Q0 d3 2 1.0 tag\nq0 Q0 d1 1 3 tag\n");
  REQUIRE(run.size() == 2);
  CHECK(run[0].query_id == "q1");
  REQUIRE(run[0].hits.size() == 2);
  CHECK(run[0].hits[0] == ScoredDoc{"d7", 12.5});
  CHECK(run[1].query_id == "q0");
  CHECK(format_run({RankedList{"q1", {{"d7", 12.5}}}}, "tag") == "q1 Q0 d7 1 12.500000 tag\n");
  CHECK(format_run({RankedList{"q1", {}}}, "t", "config: x") == "# config: x\n");
  CHECK_THROWS_AS(parse_run("q1 Q0 d7 1\n"), DataError);
  CHECK_THROWS_AS(parse_run("q1 Q0 d7 zero 1.0 t\n"), DataError);
  CHECK_THROWS_AS(parse_run("q1 Q0 d7 1 nan t\n"), DataError);
  CHECK_THROWS_AS(parse_run("q1 Q0 d7 1 1 t\nq1 Q0 d7 2 0 t\n"), DataError);
}

TEST_CASE("run and qrels files") {
  TempDir tmp;
  const Run run = {RankedList{"q1", {{"a", 2.25}, {"b", -1.0}}}, RankedList{"q2", {{"c", 0.5}}}};
  write_run(tmp.file("r.trec"), run, "exp", "note");
  CHECK(read_run(tmp.file("r.trec")) == run);
  CHECK(find_query(run, "q2") == &run[1]);
  CHECK(find_query(run, "q9") == nullptr);

  tmp.write("ok.qrels", "q1 0 a 2\nq1 0 b 0\n\nq2 0 c 1\n");
  const auto q = read_qrels(tmp.file("ok.qrels"));
  CHECK(q.num_queries() == 2);
  CHECK(q.grade("q1", "a") == 2);
  CHECK(q.grade("q1", "z") == 0);
  CHECK(q.relevant_count("q1") == 1);
  tmp.write("dup.qrels", "q1 0 a 1\nq1 0 a 2\n");
  CHECK_THROWS_AS(read_qrels(tmp.file("dup.qrels")), DataError);
  tmp.write("neg.qrels", "q1 0 a -1\n");
  CHECK_THROWS_AS(read_qrels(tmp.file("neg.qrels")), DataError);
  tmp.write("short.qrels", "q1 0 a\n");
  CHECK_THROWS_AS(read_qrels(tmp.file("short.qrels")), DataError);
  tmp.write("bad.qrels", "q1 0 a 1x\n");
  CHECK_THROWS_AS(read_qrels(tmp.file("bad.qrels")), DataError);
  CHECK_THROWS_AS(read_qrels(tmp.file("absent")), DataError);
  CHECK_THROWS_AS(read_run(tmp.file("absent")), DataError);
}
