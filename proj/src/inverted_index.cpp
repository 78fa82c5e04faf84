#include "lrm/inverted_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"

namespace lrm {

void SearchBudget::validate() const {
  if (k == 0) throw std::invalid_argument("search budget: k must be >= 1");
  if (ef_search < k) throw std::invalid_argument("search budget: ef_search must be >= k");
}

namespace {

std::uint64_t read_varint(std::string_view bytes, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64 && pos < bytes.size(); shift += 7) {
    const auto byte = static_cast<std::uint8_t>(bytes[pos++]);
    v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) return v;
  }
  throw FormatError("corrupt varint in postings");
}

float read_f32(std::string_view bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  return std::bit_cast<float>(v);
}

}  // namespace

void InvertedIndex::Cursor::load() {
  if (done()) return;
  doc_ += static_cast<std::uint32_t>(read_varint(docs_, doc_pos_));
  if (index_owner_->kind_ == WeightKind::impact) {
    weight_ = static_cast<double>(read_varint(weights_, weight_pos_));
  } else {
    weight_ = read_f32(weights_, weight_pos_);
    weight_pos_ += 4;
  }
}

void InvertedIndex::Cursor::next() {
  ++index_;
  load();
}

void InvertedIndex::Cursor::next_geq(std::uint32_t target) {
  while (!done() && doc_ < target) next();
}

class InvertedIndex::Builder {
 public:
  explicit Builder(WeightKind kind) { index_.kind_ = kind; }

  void add_doc(std::string id) {
    if (!seen_.insert(id).second) throw DataError("duplicate doc_id " + id);
    index_.doc_ids_.push_back(std::move(id));
  }

  // Postings must arrive in ordinal order per term.
  void add(TermId term, std::uint32_t ordinal, double weight) {
    if (term >= lists_.size()) lists_.resize(term + 1);
    lists_[term].push_back({ordinal, weight});
  }

  InvertedIndex finish() && {
    BinaryWriter docs, weights;
    index_.terms_.resize(lists_.size());
    for (std::size_t t = 0; t < lists_.size(); ++t) {
      auto& info = index_.terms_[t];
      info.doc_offset = docs.size();
      info.weight_offset = weights.size();
      info.df = static_cast<std::uint32_t>(lists_[t].size());
      info.max_weight = -std::numeric_limits<double>::infinity();
      info.min_weight = std::numeric_limits<double>::infinity();
      std::uint32_t prev = 0;
      for (const auto& [ord, w] : lists_[t]) {
        docs.put_varint(ord - prev);
        prev = ord;
        if (index_.kind_ == WeightKind::impact)
          weights.put_varint(static_cast<std::uint64_t>(w));
        else
          weights.put_f32(static_cast<float>(w));
        info.max_weight = std::max(info.max_weight, w);
        info.min_weight = std::min(info.min_weight, w);
      }
      if (info.df == 0) info.max_weight = info.min_weight = 0.0;
      info.doc_len = docs.size() - info.doc_offset;
      info.weight_len = weights.size() - info.weight_offset;
    }
    index_.doc_bytes_ = docs.release();
    index_.weight_bytes_ = weights.release();
    return std::move(index_);
  }

 private:
  InvertedIndex index_;
  std::unordered_set<std::string> seen_;
  std::vector<std::vector<Posting>> lists_;
};

InvertedIndex InvertedIndex::build(std::span<const NamedSparse> docs) {
  Builder b(WeightKind::real);
  for (std::uint32_t ord = 0; ord < docs.size(); ++ord) {
    b.add_doc(docs[ord].first);
    for (const auto& e : docs[ord].second.entries()) {
      const double stored = static_cast<float>(e.weight);
      if (stored != 0.0) b.add(e.term, ord, stored);
    }
  }
  return std::move(b).finish();
}

InvertedIndex InvertedIndex::build(std::span<const std::string> ids, const Quantization& quantization) {
  if (ids.size() != quantization.vectors.size())
    throw std::invalid_argument("InvertedIndex::build: ids/vectors length mismatch");
  Builder b(WeightKind::impact);
  for (std::uint32_t ord = 0; ord < ids.size(); ++ord) {
    b.add_doc(ids[ord]);
    for (const auto& e : quantization.vectors[ord].entries) {
      if (e.impact == 0) throw std::invalid_argument("impact must be >= 1");
      b.add(e.term, ord, e.impact);
    }
  }
  auto index = std::move(b).finish();
  index.impact_scale_ = quantization.max_weight;
  index.impact_bits_ = quantization.bits;
  return index;
}

InvertedIndex::Cursor InvertedIndex::cursor(TermId t) const {
  Cursor c;
  c.index_owner_ = this;
  if (t >= terms_.size()) return c;
  const auto& info = terms_[t];
  c.docs_ = std::string_view(doc_bytes_).substr(info.doc_offset, info.doc_len);
  c.weights_ = std::string_view(weight_bytes_).substr(info.weight_offset, info.weight_len);
  c.count_ = info.df;
  c.load();
  return c;
}

std::vector<Posting> InvertedIndex::decode(TermId t) const {
  std::vector<Posting> out;
  for (auto c = cursor(t); !c.done(); c.next()) out.push_back({c.doc(), c.weight()});
  return out;
}

namespace {

struct QueryTerm {
  InvertedIndex::Cursor cursor;
  double query_weight;
  double upper_bound;   // best possible contribution, never below 0
  std::size_t canonical;  // position in ascending term order
};

std::vector<QueryTerm> open_terms(const InvertedIndex& index, const SparseVector& query) {
  std::vector<QueryTerm> terms;
  for (const auto& e : query.entries()) {
    if (index.df(e.term) == 0) continue;
    const double hi = std::max(e.weight * index.max_weight(e.term), e.weight * index.min_weight(e.term));
    terms.push_back({index.cursor(e.term), e.weight, std::max(0.0, hi), terms.size()});
  }
  return terms;
}

// True when `bound` cannot reach `threshold`, with slack for summation-order
// rounding between the bound and the exact score.
bool definitely_below(double bound, double threshold) {
  if (std::isinf(threshold)) return false;
  return bound < threshold - 1e-9 * (std::abs(bound) + std::abs(threshold));
}

}  // namespace

RankedList daat_search(const InvertedIndex& index, const SparseVector& query,
                       const SearchBudget& budget, SearchStats* stats) {
  budget.validate();
  auto terms = open_terms(index, query);
  TopKCollector top(budget.k, index.doc_ids());
  SearchStats local;
  constexpr auto kEnd = std::numeric_limits<std::uint32_t>::max();
  while (true) {
    std::uint32_t current = kEnd;
    for (const auto& t : terms)
      if (!t.cursor.done()) current = std::min(current, t.cursor.doc());
    if (current == kEnd) break;
    double score = 0.0;
    for (auto& t : terms) {
      if (t.cursor.done() || t.cursor.doc() != current) continue;
      score += t.query_weight * t.cursor.weight();
      ++local.postings_scored;
      t.cursor.next();
    }
    ++local.docs_scored;
    top.push(score, current);
  }
  if (stats) *stats = local;
  return std::move(top).finish();
}

RankedList max_score_prune(const InvertedIndex& index, const SparseVector& query,
                           const SearchBudget& budget, SearchStats* stats) {
  budget.validate();
  auto terms = open_terms(index, query);
  std::stable_sort(terms.begin(), terms.end(),
                   [](const QueryTerm& a, const QueryTerm& b) { return a.upper_bound < b.upper_bound; });
  const std::size_t n = terms.size();
  std::vector<double> prefix(n);
  for (std::size_t i = 0; i < n; ++i) prefix[i] = terms[i].upper_bound + (i > 0 ? prefix[i - 1] : 0.0);

  TopKCollector top(budget.k, index.doc_ids());
  SearchStats local;
  std::vector<double> contrib(n);  // by canonical position
  std::size_t first_essential = 0;
  double threshold = -std::numeric_limits<double>::infinity();
  constexpr auto kEnd = std::numeric_limits<std::uint32_t>::max();

  while (true) {
    std::uint32_t current = kEnd;
    for (std::size_t i = first_essential; i < n; ++i)
      if (!terms[i].cursor.done()) current = std::min(current, terms[i].cursor.doc());
    if (current == kEnd) break;

    std::fill(contrib.begin(), contrib.end(), 0.0);
    double bound = first_essential > 0 ? prefix[first_essential - 1] : 0.0;
    for (std::size_t i = first_essential; i < n; ++i) {
      auto& t = terms[i];
      if (t.cursor.done() || t.cursor.doc() != current) continue;
      const double c = t.query_weight * t.cursor.weight();
      contrib[t.canonical] = c;
      bound += c;
      ++local.postings_scored;
      t.cursor.next();
    }
    bool pruned = false;
    for (std::size_t i = first_essential; i-- > 0;) {
      if (definitely_below(bound, threshold)) {
        pruned = true;
        break;
      }
      auto& t = terms[i];
      t.cursor.next_geq(current);
      bound -= t.upper_bound;
      if (!t.cursor.done() && t.cursor.doc() == current) {
        const double c = t.query_weight * t.cursor.weight();
        contrib[t.canonical] = c;
        bound += c;
        ++local.postings_scored;
      }
    }
    if (pruned || definitely_below(bound, threshold)) continue;

    // Same summation order as the exhaustive traversal.
    double score = 0.0;
    for (double c : contrib) score += c;
    ++local.docs_scored;
    top.push(score, current);
    if (top.full()) {
      threshold = top.threshold();
      while (first_essential < n && definitely_below(prefix[first_essential], threshold))
        ++first_essential;
    }
  }
  if (stats) *stats = local;
  return std::move(top).finish();
}

namespace {
constexpr std::uint32_t kSidxVersion = 1;

void put_stats(BinaryWriter& w, const CorpusStats& s) {
  w.put_u64(s.num_docs);
  w.put_f64(s.avgdl);
  w.put_u64(s.df.size());
  for (auto v : s.df) w.put_u32(v);
  w.put_u64(s.doc_ids.size());
  for (std::size_t i = 0; i < s.doc_ids.size(); ++i) {
    w.put_string(s.doc_ids[i]);
    w.put_u32(s.doc_len[i]);
  }
}

CorpusStats get_stats(BinaryReader& r) {
  CorpusStats s;
  s.num_docs = r.get_u64();
  s.avgdl = r.get_f64();
  const auto terms = r.get_count(4);
  s.df.resize(terms);
  for (auto& v : s.df) v = r.get_u32();
  const auto docs = r.get_count(8);
  for (std::uint64_t i = 0; i < docs; ++i) {
    s.doc_ids.push_back(r.get_string());
    s.doc_len.push_back(r.get_u32());
  }
  return s;
}
}  // namespace

std::string encode_inverted_index(const InvertedIndex& index) {
  BinaryWriter w;
  w.put_u8(static_cast<std::uint8_t>(index.kind_));
  w.put_u32(static_cast<std::uint32_t>(index.impact_bits_));
  w.put_f64(index.impact_scale_);
  w.put_u64(index.doc_ids_.size());
  for (const auto& id : index.doc_ids_) w.put_string(id);
  w.put_u64(index.metadata.size());
  for (const auto& [k, v] : index.metadata) {
    w.put_string(k);
    w.put_string(v);
  }
  w.put_u8(index.dictionary ? 1 : 0);
  if (index.dictionary) {
    w.put_u64(index.dictionary->size());
    for (const auto& t : index.dictionary->terms()) w.put_string(t);
  }
  w.put_u8(index.stats ? 1 : 0);
  if (index.stats) put_stats(w, *index.stats);
  w.put_u64(index.terms_.size());
  for (const auto& t : index.terms_) {
    w.put_u32(t.df);
    w.put_f64(t.max_weight);
    w.put_f64(t.min_weight);
    w.put_u64(t.doc_len);
    w.put_u64(t.weight_len);
  }
  w.put_string(index.doc_bytes_);
  w.put_string(index.weight_bytes_);
  return frame_with_checksum("SIDX", kSidxVersion, w.bytes());
}

InvertedIndex decode_inverted_index(std::string_view bytes) {
  BinaryReader r(unframe_with_checksum(bytes, "SIDX", kSidxVersion));
  InvertedIndex index;
  const auto kind = r.get_u8();
  if (kind > 1) throw FormatError("unknown weight kind");
  index.kind_ = static_cast<WeightKind>(kind);
  index.impact_bits_ = static_cast<int>(r.get_u32());
  index.impact_scale_ = r.get_f64();
  const auto docs = r.get_count(4);
  for (std::uint64_t i = 0; i < docs; ++i) index.doc_ids_.push_back(r.get_string());
  const auto meta = r.get_count(8);
  for (std::uint64_t i = 0; i < meta; ++i) {
    auto k = r.get_string();
    index.metadata[k] = r.get_string();
  }
  if (r.get_u8()) {
    const auto n = r.get_count(4);
    std::vector<std::string> terms;
    for (std::uint64_t i = 0; i < n; ++i) terms.push_back(r.get_string());
    index.dictionary = TermDictionary(std::move(terms));
    index.dictionary->freeze();
  }
  if (r.get_u8()) index.stats = get_stats(r);
  const auto nterms = r.get_count(36);
  index.terms_.resize(nterms);
  std::uint64_t doc_off = 0, weight_off = 0;
  for (auto& t : index.terms_) {
    t.df = r.get_u32();
    t.max_weight = r.get_f64();
    t.min_weight = r.get_f64();
    t.doc_len = r.get_u64();
    t.weight_len = r.get_u64();
    t.doc_offset = doc_off;
    t.weight_offset = weight_off;
    doc_off += t.doc_len;
    weight_off += t.weight_len;
  }
  index.doc_bytes_ = r.get_string();
  index.weight_bytes_ = r.get_string();
  r.expect_end();
  if (doc_off != index.doc_bytes_.size() || weight_off != index.weight_bytes_.size())
    throw FormatError("postings sizes do not match term table");

  // Every list must decode to exactly df strictly ascending in-range ordinals.
  for (TermId t = 0; t < nterms; ++t) {
    const auto& info = index.terms_[t];
    if (index.kind_ == WeightKind::real && info.weight_len != 4ull * info.df)
      throw FormatError("weight stream size mismatch");
    std::size_t seen = 0;
    std::int64_t prev = -1;
    for (auto c = index.cursor(t); !c.done(); c.next()) {
      if (static_cast<std::int64_t>(c.doc()) <= prev || c.doc() >= index.doc_ids_.size())
        throw FormatError("postings ordinals out of order or range");
      prev = c.doc();
      ++seen;
    }
    if (seen != info.df) throw FormatError("postings count mismatch");
  }
  return index;
}

void persist_index(const InvertedIndex& index, const std::string& path) {
  write_file_atomic(path, encode_inverted_index(index));
}

InvertedIndex load_inverted_index(const std::string& path) {
  return decode_inverted_index(read_file(path));
}

}  // namespace lrm
