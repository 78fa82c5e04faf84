#pragma once

// Dense encoders: externally produced vectors loaded from files, and a small
// trainable bag-of-embeddings encoder.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrm/analysis.hpp"
#include "lrm/random.hpp"
#include "lrm/reprs.hpp"

namespace lrm {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One 32-bit float row per document id.
struct DenseStore {
  std::vector<std::string> ids;
  RowMatrix<float> vectors;

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return ids.size(); }

  /// Validates equal dims, finite values (after narrowing to float) and
  /// unique ids; throws DataError otherwise.
  static DenseStore from_rows(std::vector<std::string> ids, std::span<const DenseVector> rows);
};

/// {"id": ..., "vector": [...]} per line.
DenseStore load_dense(const std::string& path, std::optional<Eigen::Index> expected_dim = {});
void save_dense(const std::string& path, const DenseStore& store);

/// "DVEC" | version u32 | rows u64 | dim u32 | ids | row-major float32.
std::string encode_dense_binary(const DenseStore& store);
DenseStore decode_dense_binary(std::string_view bytes);

/// Scales to unit L2 norm; zero vectors throw std::invalid_argument.
template <typename Derived>
DenseVector l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const DenseVector d = v.template cast<double>();
  const double n = d.norm();
  if (!(n > 0.0)) throw std::invalid_argument("l2_normalize: zero vector");
  return d / n;
}

enum class Side { query, document };

/// Mean-pooled word embeddings. With `shared` set, queries and documents use
/// one table; otherwise each side has its own.
class ToyEncoder {
 public:
  /// Tables initialized uniform in (−0.5/dim, 0.5/dim) from `rng`.
  ToyEncoder(TermDictionary vocab, Eigen::Index dim, bool shared, Rng& rng);
  ToyEncoder(TermDictionary vocab, Eigen::MatrixXd query_table, std::optional<Eigen::MatrixXd> doc_table);

  Eigen::Index dim() const { return query_table_.cols(); }
  bool shared() const { return !doc_table_.has_value(); }
  const TermDictionary& vocab() const { return vocab_; }

  const Eigen::MatrixXd& table(Side side) const {
    return side == Side::document && doc_table_ ? *doc_table_ : query_table_;
  }
  Eigen::MatrixXd& table(Side side) {
    return side == Side::document && doc_table_ ? *doc_table_ : query_table_;
  }

  /// Term ids of in-vocabulary tokens, repeats kept.
  std::vector<TermId> known_ids(std::span<const std::string> tokens) const;

 private:
  TermDictionary vocab_;
  Eigen::MatrixXd query_table_;
  std::optional<Eigen::MatrixXd> doc_table_;
};

/// Mean of the embedding rows of the in-vocabulary tokens. No known token
/// throws lrm::DataError.
DenseVector toy_encode(const ToyEncoder& enc, std::span<const std::string> tokens,
                       Side side = Side::document);

/// One normalized row per in-vocabulary token, for MaxSim.
MultiVector toy_encode_tokens(const ToyEncoder& enc, std::span<const std::string> tokens,
                              Side side = Side::document);

}  // namespace lrm
