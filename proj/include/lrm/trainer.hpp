#pragma once

// Contrastive training of the toy encoder: softmax loss over one positive and
// in-batch (plus optional explicit) negatives, analytic gradients, plain SGD.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrm/analysis.hpp"
#include "lrm/encoders_dense.hpp"

namespace lrm {

struct TrainInstance {
  TokenList query;
  TokenList positive;
  std::vector<TokenList> negatives;  // explicit (e.g. hard) negatives
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 1;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool shared_encoder = true;
  Eigen::Index dim = 16;

  /// Throws ConfigError on violated bounds.
  void validate() const;
};

/// −log softmax of the positive score against the negatives, with inner
/// product scores.
double dpr_loss(const DenseVector& query, const DenseVector& positive,
                std::span<const DenseVector> negatives);

/// Same loss from precomputed scores; scores[0] is the positive.
double softmax_loss(std::span<const double> scores);

struct NegativeAssignment {
  std::vector<std::size_t> in_batch;  // indices of other instances whose positives are negatives
  std::size_t explicit_count = 0;     // the instance's own explicit negatives, all used
};

/// Negatives of query i: positives of every j ≠ i, plus its explicit
/// negatives. A query left with none throws std::invalid_argument.
std::vector<NegativeAssignment> in_batch_negatives(std::span<const TrainInstance> batch);

struct BatchGradient {
  double loss = 0.0;  // mean over the batch
  Eigen::MatrixXd query_table;
  std::optional<Eigen::MatrixXd> doc_table;  // set when the encoder is not shared

  Eigen::MatrixXd& table(Side side) {
    return side == Side::document && doc_table ? *doc_table : query_table;
  }
};

/// Mean batch loss only.
double batch_loss(const ToyEncoder& enc, std::span<const TrainInstance> batch,
                  std::span<const NegativeAssignment> assignments);

/// Mean batch loss and its exact gradient with respect to every table entry.
BatchGradient loss_gradient(const ToyEncoder& enc, std::span<const TrainInstance> batch,
                            std::span<const NegativeAssignment> assignments);

struct TrainReport {
  double initial_loss = 0.0;  // fixed-order pass before any update
  std::vector<double> epoch_losses;
  double final_loss = 0.0;  // same fixed-order pass after training
};

/// Seeded mini-batch SGD. Deterministic given (config, data order). When `log`
/// is set, one line per epoch is written to it.
ToyEncoder train(const TrainConfig& config, std::span<const TrainInstance> data,
                 const TermDictionary& vocab, TrainReport* report = nullptr,
                 std::ostream* log = nullptr);

/// {"query": ..., "positive": ..., "negatives": [...]} per line, analyzed
/// with `analyzer`. Empty query or positive after analysis throws DataError.
std::vector<TrainInstance> read_training_data(const std::string& path, const Analyzer& analyzer);

/// Vocabulary of every token in the training data, first-seen order.
TermDictionary training_vocabulary(std::span<const TrainInstance> data);

/// "TENC" | version u32 | |V| u64 | dim u32 | shared u8 | terms | f64 tables.
std::string encode_model(const ToyEncoder& enc);
ToyEncoder decode_model(std::string_view bytes);
void save_model(const std::string& path, const ToyEncoder& enc);
ToyEncoder load_model(const std::string& path);

}  // namespace lrm
