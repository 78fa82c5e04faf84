#include "lrm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "lrm/error.hpp"

namespace lrm {

std::string_view to_string(Normalization n) {
  return n == Normalization::none ? "none" : "min_max";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::none;
  if (name == "min_max") return Normalization::min_max;
  throw std::invalid_argument("unknown normalization: " + std::string(name));
}

void FusionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fusion alpha must be in [0, 1]");
}

namespace {

// doc_id → normalized score, plus the run's minimum after normalization.
struct Normalized {
  std::unordered_map<std::string, double> scores;
  double minimum = 0.0;
};

Normalized normalize(const RankedList& run, Normalization mode) {
  Normalized out;
  if (run.hits.empty()) return out;
  double lo = run.hits.front().score, hi = lo;
  for (const auto& h : run.hits) {
    lo = std::min(lo, h.score);
    hi = std::max(hi, h.score);
  }
  for (const auto& h : run.hits) {
    double s = h.score;
    if (mode == Normalization::min_max) s = hi > lo ? (h.score - lo) / (hi - lo) : 0.0;
    out.scores[h.doc_id] = s;
  }
  out.minimum = mode == Normalization::min_max ? 0.0 : lo;
  return out;
}

}  // namespace

RankedList fuse(const RankedList& run_a, const RankedList& run_b, const FusionConfig& cfg) {
  cfg.validate();
  if (run_a.query_id != run_b.query_id)
    throw std::invalid_argument("fuse: query ids differ (" + run_a.query_id + " vs " + run_b.query_id + ")");
  const auto a = normalize(run_a, cfg.normalization);
  const auto b = normalize(run_b, cfg.normalization);
  std::vector<ScoredDoc> fused;
  auto lookup = [](const Normalized& n, const std::string& id) {
    auto it = n.scores.find(id);
    return it == n.scores.end() ? n.minimum : it->second;
  };
  auto add = [&](const std::string& id) {
    fused.push_back({id, cfg.alpha * lookup(a, id) + (1.0 - cfg.alpha) * lookup(b, id)});
  };
  for (const auto& h : run_a.hits) add(h.doc_id);
  for (const auto& h : run_b.hits)
    if (!a.scores.contains(h.doc_id)) add(h.doc_id);
  std::sort(fused.begin(), fused.end(), ranks_before);
  return {run_a.query_id, std::move(fused)};
}

Run fuse_runs(const Run& run_a, const Run& run_b, const FusionConfig& cfg) {
  Run out;
  for (const auto& la : run_a) {
    const auto* lb = find_query(run_b, la.query_id);
    out.push_back(fuse(la, lb ? *lb : RankedList{la.query_id, {}}, cfg));
  }
  for (const auto& lb : run_b)
    if (find_query(run_a, lb.query_id) == nullptr) out.push_back(fuse({lb.query_id, {}}, lb, cfg));
  return out;
}

TextStore::TextStore(std::vector<Text> texts) : texts_(std::move(texts)) {
  for (std::size_t i = 0; i < texts_.size(); ++i)
    if (!by_id_.emplace(texts_[i].id, i).second) throw DataError("duplicate id " + texts_[i].id);
}

const Text* TextStore::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &texts_[it->second];
}

RerankResult rerank(const RankedList& candidates, const Text& query, const RerankConfig& cfg,
                    const TextStore& corpus) {
  if (cfg.depth == 0) throw std::invalid_argument("rerank: depth must be >= 1");
  RerankResult result;
  result.list.query_id = candidates.query_id;
  const auto n = std::min(cfg.depth, candidates.hits.size());

  std::optional<Representation> q;
  try {
    q = cfg.reranker.query_encoder(query);
  } catch (const DataError&) {
  }

  std::vector<ScoredDoc> rescored;
  std::vector<const ScoredDoc*> failed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cand = candidates.hits[i];
    const Text* doc = corpus.find(cand.doc_id);
    if (!q || doc == nullptr) {
      failed.push_back(&cand);
      continue;
    }
    try {
      double s = compare(cfg.reranker.phi, *q, cfg.reranker.doc_encoder(*doc));
      if (cfg.carry_first_stage_score) s += cand.score;
      rescored.push_back({cand.doc_id, s});
    } catch (const DataError&) {
      failed.push_back(&cand);
    }
  }
  std::sort(rescored.begin(), rescored.end(), ranks_before);
  // Unscored candidates sit strictly below the lowest rescored score, in
  // first-stage order.
  double floor = rescored.empty() ? 0.0 : rescored.back().score;
  for (std::size_t i = 0; i < failed.size(); ++i) {
    rescored.push_back({failed[i]->doc_id, floor - 1.0 - static_cast<double>(i)});
    result.unscored.push_back(failed[i]->doc_id);
  }
  result.list.hits = std::move(rescored);
  return result;
}

std::vector<DepthRow> depth_sweep(const RerankConfig& cfg_template, std::span<const std::size_t> depths,
                                  const Run& first_stage, const TextStore& queries, const Qrels& qrels,
                                  const TextStore& corpus, std::size_t metric_k) {
  std::vector<DepthRow> rows;
  for (auto depth : depths) {
    auto cfg = cfg_template;
    cfg.depth = depth;
    Run reranked;
    for (const auto& list : first_stage) {
      const Text* q = queries.find(list.query_id);
      if (q == nullptr) throw DataError("depth_sweep: no text for query " + list.query_id);
      reranked.push_back(rerank(list, *q, cfg, corpus).list);
    }
    rows.push_back({depth, mrr_at_k(reranked, qrels, metric_k).value});
  }
  return rows;
}

}  // namespace lrm
