#include "lrm/encoders_dense.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "jsonl.hpp"
#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"

namespace lrm {

DenseStore DenseStore::from_rows(std::vector<std::string> ids, std::span<const DenseVector> rows) {
  if (ids.size() != rows.size()) throw DataError("dense store: ids/rows length mismatch");
  DenseStore store;
  const Eigen::Index dim = rows.empty() ? 0 : rows.front().size();
  store.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw DataError("dense store: row " + ids[i] + " has dim " + std::to_string(rows[i].size()) +
                      ", expected " + std::to_string(dim));
    if (!seen.insert(ids[i]).second) throw DataError("dense store: duplicate id " + ids[i]);
    const auto row = rows[i].cast<float>();
    if (!row.allFinite()) throw DataError("dense store: non-finite value in row " + ids[i]);
    store.vectors.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  store.ids = std::move(ids);
  return store;
}

DenseStore load_dense(const std::string& path, std::optional<Eigen::Index> expected_dim) {
  std::vector<std::string> ids;
  std::vector<DenseVector> rows;
  detail::for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
    auto id = detail::require_string(obj, "id");
    const auto& vec = detail::require_field(obj, "vector");
    if (!vec.is_array() || vec.empty()) throw DataError("\"vector\" must be a nonempty array");
    std::vector<double> values;
    values.reserve(vec.size());
    for (const auto& x : vec) {
      if (!x.is_number()) throw DataError("vector entries must be numbers");
      values.push_back(x.get<double>());
    }
    if (!rows.empty() && static_cast<Eigen::Index>(values.size()) != rows.front().size())
      throw DataError("ragged dimensions: " + std::to_string(values.size()) + " vs " +
                      std::to_string(rows.front().size()));
    if (expected_dim && static_cast<Eigen::Index>(values.size()) != *expected_dim)
      throw DataError("dimension " + std::to_string(values.size()) + " but expected " +
                      std::to_string(*expected_dim));
    ids.push_back(std::move(id));
    rows.push_back(make_dense(values));
  });
  return DenseStore::from_rows(std::move(ids), rows);
}

void save_dense(const std::string& path, const DenseStore& store) {
  std::ostringstream out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    nlohmann::ordered_json obj;
    obj["id"] = store.ids[i];
    auto& arr = obj["vector"] = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < store.dim(); ++c)
      arr.push_back(static_cast<double>(store.vectors(static_cast<Eigen::Index>(i), c)));
    out << obj.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

namespace {
constexpr std::uint32_t kDvecVersion = 1;
}

std::string encode_dense_binary(const DenseStore& store) {
  BinaryWriter w;
  w.put_bytes("DVEC");
  w.put_u32(kDvecVersion);
  w.put_u64(store.size());
  w.put_u32(static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.ids) w.put_string(id);
  for (Eigen::Index r = 0; r < store.vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < store.vectors.cols(); ++c) w.put_f32(store.vectors(r, c));
  return w.release();
}

DenseStore decode_dense_binary(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.get_bytes(4) != "DVEC") throw FormatError("bad magic: expected DVEC");
  if (auto v = r.get_u32(); v != kDvecVersion)
    throw FormatError("unsupported DVEC version " + std::to_string(v));
  const auto rows = r.get_u64();
  const auto dim = r.get_u32();
  if (rows > r.remaining() / 4) throw FormatError("truncated file");
  std::vector<std::string> ids;
  ids.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) ids.push_back(r.get_string());
  if (dim == 0 ? rows != 0 : rows * dim > r.remaining() / 4) throw FormatError("truncated file");
  std::vector<DenseVector> vecs;
  vecs.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    DenseVector v(dim);
    for (std::uint32_t c = 0; c < dim; ++c) v[c] = r.get_f32();
    vecs.push_back(std::move(v));
  }
  r.expect_end();
  return DenseStore::from_rows(std::move(ids), vecs);
}

ToyEncoder::ToyEncoder(TermDictionary vocab, Eigen::Index dim, bool shared, Rng& rng)
    : vocab_(std::move(vocab)) {
  if (dim < 2) throw std::invalid_argument("ToyEncoder: dim must be >= 2");
  const double half = 0.5 / static_cast<double>(dim);
  auto init = [&] {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(vocab_.size()), dim);
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = (2.0 * uniform01(rng) - 1.0) * half;
    return t;
  };
  query_table_ = init();
  if (!shared) doc_table_ = init();
}

ToyEncoder::ToyEncoder(TermDictionary vocab, Eigen::MatrixXd query_table,
                       std::optional<Eigen::MatrixXd> doc_table)
    : vocab_(std::move(vocab)), query_table_(std::move(query_table)), doc_table_(std::move(doc_table)) {
  auto check = [&](const Eigen::MatrixXd& t) {
    if (t.rows() != static_cast<Eigen::Index>(vocab_.size()) || t.cols() < 2)
      throw std::invalid_argument("ToyEncoder: table shape does not match vocabulary");
    if (!t.allFinite()) throw std::invalid_argument("ToyEncoder: non-finite embedding");
  };
  check(query_table_);
  if (doc_table_) {
    check(*doc_table_);
    if (doc_table_->cols() != query_table_.cols())
      throw std::invalid_argument("ToyEncoder: query/doc table dims differ");
  }
}

std::vector<TermId> ToyEncoder::known_ids(std::span<const std::string> tokens) const {
  std::vector<TermId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto id = vocab_.lookup(t)) ids.push_back(*id);
  return ids;
}

DenseVector toy_encode(const ToyEncoder& enc, std::span<const std::string> tokens, Side side) {
  const auto ids = enc.known_ids(tokens);
  if (ids.empty()) throw DataError("toy encoder: no in-vocabulary tokens");
  const auto& table = enc.table(side);
  DenseVector sum = DenseVector::Zero(enc.dim());
  for (auto id : ids) sum += table.row(id).transpose();
  return sum / static_cast<double>(ids.size());
}

MultiVector toy_encode_tokens(const ToyEncoder& enc, std::span<const std::string> tokens, Side side) {
  const auto ids = enc.known_ids(tokens);
  if (ids.empty()) throw DataError("toy encoder: no in-vocabulary tokens");
  const auto& table = enc.table(side);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(ids.size()), enc.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return MultiVector(std::move(rows));
}

}  // namespace lrm
