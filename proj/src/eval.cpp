#include "lrm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"

namespace lrm {

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) throw DataError("negative relevance grade for " + query_id + "/" + doc_id);
  auto& docs = judgments_[query_id];
  if (!docs.emplace(doc_id, grade).second)
    throw DataError("duplicate judgment for " + query_id + "/" + doc_id);
}

int Qrels::grade(std::string_view query_id, std::string_view doc_id) const {
  const auto* docs = judgments(query_id);
  if (docs == nullptr) return 0;
  auto it = docs->find(std::string(doc_id));
  return it == docs->end() ? 0 : it->second;
}

std::size_t Qrels::relevant_count(std::string_view query_id) const {
  const auto* docs = judgments(query_id);
  if (docs == nullptr) return 0;
  return static_cast<std::size_t>(
      std::count_if(docs->begin(), docs->end(), [](const auto& kv) { return kv.second >= 1; }));
}

const std::map<std::string, int>* Qrels::judgments(std::string_view query_id) const {
  auto it = judgments_.find(query_id);
  return it == judgments_.end() ? nullptr : &it->second;
}

Qrels read_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open qrels " + path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, iter, doc, grade_text, extra;
    if (!(fields >> qid)) continue;
    const auto where = path + ":" + std::to_string(line_no);
    if (!(fields >> iter >> doc >> grade_text) || (fields >> extra))
      throw DataError(where + ": expected \"query_id 0 doc_id grade\"");
    int grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stoi(grade_text, &used);
      if (used != grade_text.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(where + ": bad grade \"" + grade_text + "\"");
    }
    try {
      qrels.add(qid, doc, grade);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return qrels;
}

std::optional<double> reciprocal_rank(const RankedList& list, const Qrels& qrels, std::size_t k) {
  if (!qrels.has_query(list.query_id)) return std::nullopt;
  const auto n = std::min(k, list.hits.size());
  for (std::size_t i = 0; i < n; ++i)
    if (qrels.grade(list.query_id, list.hits[i].doc_id) >= 1) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

std::optional<double> query_recall(const RankedList& list, const Qrels& qrels, std::size_t k) {
  const auto relevant = qrels.relevant_count(list.query_id);
  if (relevant == 0) return std::nullopt;
  const auto n = std::min(k, list.hits.size());
  std::size_t found = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (qrels.grade(list.query_id, list.hits[i].doc_id) >= 1) ++found;
  return static_cast<double>(found) / static_cast<double>(relevant);
}

namespace {

double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }
double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

std::optional<double> query_ndcg(const RankedList& list, const Qrels& qrels, std::size_t k) {
  const auto* judged = qrels.judgments(list.query_id);
  if (judged == nullptr) return std::nullopt;
  std::vector<int> grades;
  for (const auto& [doc, g] : *judged) grades.push_back(g);
  std::sort(grades.rbegin(), grades.rend());
  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) ideal += gain(grades[i]) * discount(i + 1);
  if (ideal == 0.0) return std::nullopt;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, list.hits.size()); ++i)
    dcg += gain(qrels.grade(list.query_id, list.hits[i].doc_id)) * discount(i + 1);
  return dcg / ideal;
}

std::optional<double> query_average_precision(const RankedList& list, const Qrels& qrels) {
  const auto relevant = qrels.relevant_count(list.query_id);
  if (relevant == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < list.hits.size(); ++i) {
    if (qrels.grade(list.query_id, list.hits[i].doc_id) >= 1) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant);
}

namespace {

template <typename PerQuery>
MetricResult aggregate(const Run& run, PerQuery&& per_query) {
  MetricResult r;
  double sum = 0.0;
  for (const auto& list : run) {
    if (auto v = per_query(list)) {
      sum += *v;
      ++r.evaluated;
    } else {
      ++r.skipped;
    }
  }
  if (r.evaluated > 0) r.value = sum / static_cast<double>(r.evaluated);
  return r;
}

}  // namespace

MetricResult mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  auto r = aggregate(run, [&](const RankedList& l) { return reciprocal_rank(l, qrels, k); });
  if (r.evaluated == 0) throw DataError("mrr: no query in the run has judgments");
  return r;
}

MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  return aggregate(run, [&](const RankedList& l) { return query_recall(l, qrels, k); });
}

MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  return aggregate(run, [&](const RankedList& l) { return query_ndcg(l, qrels, k); });
}

MetricResult average_precision(const Run& run, const Qrels& qrels) {
  return aggregate(run, [&](const RankedList& l) { return query_average_precision(l, qrels); });
}

std::string format_run(const Run& run, std::string_view tag, std::string_view header) {
  std::string out;
  if (!header.empty()) {
    out += "# ";
    out += header;
    out += '\n';
  }
  char score[64];
  for (const auto& list : run) {
    for (std::size_t i = 0; i < list.hits.size(); ++i) {
      std::snprintf(score, sizeof score, "%.6f", list.hits[i].score);
      out += list.query_id;
      out += " Q0 ";
      out += list.hits[i].doc_id;
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += score;
      out += ' ';
      out += tag;
      out += '\n';
    }
  }
  return out;
}

void write_run(const std::string& path, const Run& run, std::string_view tag, std::string_view header) {
  write_file_atomic(path, format_run(run, tag, header));
}

Run parse_run(std::string_view text, const std::string& source) {
  struct Row {
    long rank;
    ScoredDoc hit;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, rank_text, score_text, tag, extra;
    const auto where = source + ":" + std::to_string(line_no);
    if (!(fields >> qid >> q0 >> doc >> rank_text >> score_text >> tag) || (fields >> extra))
      throw DataError(where + ": expected \"query_id Q0 doc_id rank score tag\"");
    long rank = 0;
    double score = 0.0;
    try {
      std::size_t used = 0;
      rank = std::stol(rank_text, &used);
      if (used != rank_text.size() || rank < 1) throw std::invalid_argument("rank");
      score = std::stod(score_text, &used);
      if (used != score_text.size() || !std::isfinite(score)) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw DataError(where + ": bad rank or score");
    }
    auto [it, inserted] = rows.try_emplace(qid);
    if (inserted) order.push_back(qid);
    it->second.push_back({rank, {doc, score}});
  }
  Run run;
  for (const auto& qid : order) {
    auto& list = rows[qid];
    std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList ranked{qid, {}};
    std::unordered_set<std::string> seen;
    for (auto& r : list) {
      if (!seen.insert(r.hit.doc_id).second)
        throw DataError(source + ": duplicate doc " + r.hit.doc_id + " for query " + qid);
      ranked.hits.push_back(std::move(r.hit));
    }
    run.push_back(std::move(ranked));
  }
  return run;
}

Run read_run(const std::string& path) { return parse_run(read_file(path), path); }

const RankedList* find_query(const Run& run, std::string_view query_id) {
  for (const auto& l : run)
    if (l.query_id == query_id) return &l;
  return nullptr;
}

}  // namespace lrm
