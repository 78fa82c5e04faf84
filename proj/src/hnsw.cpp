#include "lrm/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"
#include "lrm/random.hpp"

namespace lrm {

double HnswParams::level_multiplier() const { return 1.0 / std::log(static_cast<double>(m)); }

namespace {

// Higher similarity first, then lower node id.
struct CloserFirst {
  bool operator()(const std::pair<double, std::uint32_t>& a,
                  const std::pair<double, std::uint32_t>& b) const {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  }
};

}  // namespace

void HnswIndex::finalize_vectors() {
  data_ = store_.vectors.cast<double>();
  if (params_.metric == Metric::cosine) {
    for (Eigen::Index r = 0; r < data_.rows(); ++r) {
      const double n = data_.row(r).norm();
      if (n > 0.0) data_.row(r) /= n;
    }
  }
}

DenseVector HnswIndex::prepare_query(const DenseVector& q) const {
  if (q.size() != dim())
    throw std::invalid_argument("hnsw: query dim " + std::to_string(q.size()) + " != index dim " +
                                std::to_string(dim()));
  if (params_.metric == Metric::cosine) return l2_normalize(q);
  return q;
}

double HnswIndex::similarity(std::uint32_t node, const DenseVector& q) const {
  return data_.row(node).dot(q.transpose());
}

std::uint32_t HnswIndex::greedy_closest(const DenseVector& q, std::uint32_t start, int layer) const {
  std::uint32_t best = start;
  double best_sim = similarity(start, q);
  for (bool moved = true; moved;) {
    moved = false;
    for (auto n : neighbors(best, layer)) {
      const double s = similarity(n, q);
      if (s > best_sim || (s == best_sim && n < best)) {
        best = n;
        best_sim = s;
        moved = true;
      }
    }
  }
  return best;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const DenseVector& q,
                                                          std::span<const Candidate> entry,
                                                          std::size_t ef, int layer) const {
  std::vector<char> visited(size(), 0);
  // candidates: best on top; results: worst on top.
  auto closer = CloserFirst{};
  auto farther_on_top = [&](const Candidate& a, const Candidate& b) { return closer(a, b); };
  auto closer_on_top = [&](const Candidate& a, const Candidate& b) { return closer(b, a); };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(closer_on_top)> candidates(closer_on_top);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(farther_on_top)> results(farther_on_top);
  for (const auto& e : entry) {
    if (visited[e.second]) continue;
    visited[e.second] = 1;
    candidates.push(e);
    results.push(e);
    if (results.size() > ef) results.pop();
  }
  while (!candidates.empty()) {
    const auto c = candidates.top();
    if (results.size() >= ef && closer(results.top(), c)) break;
    candidates.pop();
    for (auto n : neighbors(c.second, layer)) {
      if (visited[n]) continue;
      visited[n] = 1;
      const Candidate cand{similarity(n, q), n};
      if (results.size() < ef || closer(cand, results.top())) {
        candidates.push(cand);
        results.push(cand);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());  // closest first
  return out;
}

void HnswIndex::shrink(std::uint32_t node, int layer) {
  auto& adj = links_[node][static_cast<std::size_t>(layer)];
  const auto cap = max_degree(layer);
  if (adj.size() <= cap) return;
  const DenseVector v = data_.row(node).transpose();
  std::vector<Candidate> scored;
  scored.reserve(adj.size());
  for (auto n : adj) scored.push_back({similarity(n, v), n});
  std::sort(scored.begin(), scored.end(), CloserFirst{});
  adj.clear();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (i < cap) {
      adj.push_back(scored[i].second);
    } else {
      // Drop the reverse edge as well so adjacency stays symmetric.
      auto& back = links_[scored[i].second][static_cast<std::size_t>(layer)];
      back.erase(std::remove(back.begin(), back.end(), node), back.end());
    }
  }
}

void HnswIndex::insert(std::uint32_t node, int node_level) {
  links_[node].assign(static_cast<std::size_t>(node_level) + 1, {});
  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = node_level;
    return;
  }
  const DenseVector q = data_.row(node).transpose();
  std::uint32_t ep = entry_;
  for (int layer = max_level_; layer > node_level; --layer) ep = greedy_closest(q, ep, layer);

  std::vector<Candidate> entry{{similarity(ep, q), ep}};
  for (int layer = std::min(node_level, max_level_); layer >= 0; --layer) {
    auto found = search_layer(q, entry, params_.ef_construction, layer);
    auto& adj = links_[node][static_cast<std::size_t>(layer)];
    // Candidates are offered in closeness order until the new node's list is
    // full. A candidate that immediately prunes the new node away (it already
    // holds max_degree closer neighbors) does not use up a slot.
    for (std::size_t i = 0; i < found.size() && adj.size() < max_degree(layer); ++i) {
      const auto n = found[i].second;
      adj.push_back(n);
      links_[n][static_cast<std::size_t>(layer)].push_back(node);
      shrink(n, layer);
    }
    entry = std::move(found);
  }
  if (node_level > max_level_) {
    entry_ = node;
    max_level_ = node_level;
  }
}

HnswIndex HnswIndex::build(DenseStore store, const HnswParams& params) {
  if (store.size() == 0) throw DataError("hnsw: cannot build over an empty store");
  if (params.m < 2) throw std::invalid_argument("hnsw: M must be >= 2");
  if (params.ef_construction < 1) throw std::invalid_argument("hnsw: ef_construction must be >= 1");
  HnswIndex index;
  index.store_ = std::move(store);
  index.params_ = params;
  index.finalize_vectors();
  index.links_.resize(index.size());
  Rng rng(params.seed);
  const double ml = params.level_multiplier();
  for (std::uint32_t node = 0; node < index.size(); ++node) {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    const int lvl = static_cast<int>(std::floor(-std::log(u) * ml));
    index.insert(node, lvl);
  }
  return index;
}

RankedList HnswIndex::search(const DenseVector& query, const SearchBudget& budget) const {
  budget.validate();
  const DenseVector q = prepare_query(query);
  std::uint32_t ep = entry_;
  for (int layer = max_level_; layer > 0; --layer) ep = greedy_closest(q, ep, layer);
  const Candidate start{similarity(ep, q), ep};
  auto found = search_layer(q, std::span<const Candidate>(&start, 1),
                            std::max(budget.ef_search, budget.k), 0);
  TopKCollector top(budget.k, store_.ids);
  for (const auto& [sim, node] : found) top.push(sim, node);
  return std::move(top).finish();
}

RankedList hnsw_search(const HnswIndex& index, const DenseVector& query, const SearchBudget& budget) {
  return index.search(query, budget);
}

namespace {
constexpr std::uint32_t kHidxVersion = 1;
}

std::string encode_hnsw_index(const HnswIndex& index) {
  BinaryWriter w;
  const auto& p = index.params_;
  w.put_u8(static_cast<std::uint8_t>(p.metric));
  w.put_u64(p.m);
  w.put_u64(p.ef_construction);
  w.put_u64(p.seed);
  w.put_f64(p.level_multiplier());
  w.put_u32(static_cast<std::uint32_t>(index.dim()));
  w.put_u64(index.size());
  for (const auto& id : index.store_.ids) w.put_string(id);
  for (Eigen::Index r = 0; r < index.store_.vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < index.store_.vectors.cols(); ++c) w.put_f32(index.store_.vectors(r, c));
  w.put_u32(index.entry_);
  w.put_u32(static_cast<std::uint32_t>(index.max_level_));
  for (const auto& layers : index.links_) {
    w.put_u32(static_cast<std::uint32_t>(layers.size() - 1));
    for (const auto& adj : layers) {
      w.put_u32(static_cast<std::uint32_t>(adj.size()));
      for (auto n : adj) w.put_u32(n);
    }
  }
  return frame_with_checksum("HIDX", kHidxVersion, w.bytes());
}

HnswIndex decode_hnsw_index(std::string_view bytes) {
  BinaryReader r(unframe_with_checksum(bytes, "HIDX", kHidxVersion));
  HnswIndex index;
  auto& p = index.params_;
  const auto metric = r.get_u8();
  if (metric > 1) throw FormatError("unknown metric");
  p.metric = static_cast<Metric>(metric);
  p.m = r.get_u64();
  p.ef_construction = r.get_u64();
  p.seed = r.get_u64();
  r.get_f64();  // mL, derived from M
  if (p.m < 2) throw FormatError("invalid M");
  const auto dim = r.get_u32();
  const auto n = r.get_count(4);
  if (n == 0 || dim == 0) throw FormatError("empty hnsw index");
  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < n; ++i) ids.push_back(r.get_string());
  if (n * dim > r.remaining() / 4) throw FormatError("truncated file");
  std::vector<DenseVector> rows;
  for (std::uint64_t i = 0; i < n; ++i) {
    DenseVector v(dim);
    for (std::uint32_t c = 0; c < dim; ++c) v[c] = r.get_f32();
    rows.push_back(std::move(v));
  }
  index.store_ = DenseStore::from_rows(std::move(ids), rows);
  index.finalize_vectors();
  index.entry_ = r.get_u32();
  index.max_level_ = static_cast<int>(r.get_u32());
  index.links_.resize(n);
  for (auto& layers : index.links_) {
    const auto lvl = r.get_u32();
    if (lvl > static_cast<std::uint32_t>(index.max_level_)) throw FormatError("node level above max level");
    layers.resize(lvl + 1);
    for (std::size_t layer = 0; layer < layers.size(); ++layer) {
      const auto deg = r.get_u32();
      if (deg > index.max_degree(static_cast<int>(layer))) throw FormatError("node degree above bound");
      for (std::uint32_t j = 0; j < deg; ++j) {
        const auto nb = r.get_u32();
        if (nb >= n) throw FormatError("neighbor out of range");
        layers[layer].push_back(nb);
      }
    }
  }
  r.expect_end();
  if (index.entry_ >= n || index.level(index.entry_) != index.max_level_)
    throw FormatError("invalid entry point");
  return index;
}

void persist_index(const HnswIndex& index, const std::string& path) {
  write_file_atomic(path, encode_hnsw_index(index));
}

HnswIndex load_hnsw_index(const std::string& path) { return decode_hnsw_index(read_file(path)); }

}  // namespace lrm
