#include "lrm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "jsonl.hpp"
#include "lrm/binary_io.hpp"
#include "lrm/error.hpp"

namespace lrm {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a finite value >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (dim < 2) throw ConfigError("dim must be >= 2");
}

double softmax_loss(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("softmax_loss: need at least one negative");
  const double top = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s - top);
  return std::log(denom) + top - scores[0];
}

double dpr_loss(const DenseVector& query, const DenseVector& positive,
                std::span<const DenseVector> negatives) {
  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(inner_product(query, positive));
  for (const auto& n : negatives) scores.push_back(inner_product(query, n));
  return softmax_loss(scores);
}

std::vector<NegativeAssignment> in_batch_negatives(std::span<const TrainInstance> batch) {
  std::vector<NegativeAssignment> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < batch.size(); ++j)
      if (j != i) out[i].in_batch.push_back(j);
    out[i].explicit_count = batch[i].negatives.size();
    if (out[i].in_batch.empty() && out[i].explicit_count == 0)
      throw std::invalid_argument("in_batch_negatives: query without negatives (batch of size 1)");
  }
  return out;
}

namespace {

// Token ids and mean-pooled vector of one text.
struct Encoded {
  std::vector<TermId> ids;
  DenseVector vec;
};

Encoded encode(const ToyEncoder& enc, std::span<const std::string> tokens, Side side) {
  Encoded e{enc.known_ids(tokens), {}};
  if (e.ids.empty()) throw DataError("training text has no in-vocabulary tokens");
  const auto& table = enc.table(side);
  e.vec = DenseVector::Zero(enc.dim());
  for (auto id : e.ids) e.vec += table.row(id).transpose();
  e.vec /= static_cast<double>(e.ids.size());
  return e;
}

void scatter(Eigen::MatrixXd& grad, const Encoded& e, const DenseVector& dvec) {
  const double scale = 1.0 / static_cast<double>(e.ids.size());
  for (auto id : e.ids) grad.row(id) += scale * dvec.transpose();
}

// Walks the batch once. `grad` may be null for loss-only evaluation.
double run_batch(const ToyEncoder& enc, std::span<const TrainInstance> batch,
                 std::span<const NegativeAssignment> assignments, BatchGradient* grad) {
  if (assignments.size() != batch.size())
    throw std::invalid_argument("loss_gradient: assignments do not match batch");
  std::vector<Encoded> queries, positives;
  queries.reserve(batch.size());
  positives.reserve(batch.size());
  for (const auto& inst : batch) {
    queries.push_back(encode(enc, inst.query, Side::query));
    positives.push_back(encode(enc, inst.positive, Side::document));
  }
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& a = assignments[i];
    std::vector<Encoded> explicit_negs;
    for (std::size_t n = 0; n < a.explicit_count; ++n)
      explicit_negs.push_back(encode(enc, batch[i].negatives.at(n), Side::document));

    // candidate 0 is the positive
    std::vector<const Encoded*> cands{&positives[i]};
    for (auto j : a.in_batch) cands.push_back(&positives.at(j));
    for (const auto& e : explicit_negs) cands.push_back(&e);

    std::vector<double> scores;
    scores.reserve(cands.size());
    for (const auto* c : cands) scores.push_back(queries[i].vec.dot(c->vec));
    total += softmax_loss(scores);
    if (grad == nullptr) continue;

    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double denom = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) denom += (p[c] = std::exp(scores[c] - top));
    DenseVector dq = DenseVector::Zero(enc.dim());
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double g = (p[c] / denom - (c == 0 ? 1.0 : 0.0)) * inv_batch;
      dq += g * cands[c]->vec;
      scatter(grad->table(Side::document), *cands[c], g * queries[i].vec);
    }
    scatter(grad->table(Side::query), queries[i], dq);
  }
  return total * inv_batch;
}

// Shuffled (or identity) order cut into batches; a trailing single instance
// without explicit negatives joins the previous batch.
std::vector<std::vector<TrainInstance>> make_batches(std::span<const TrainInstance> data,
                                                     std::span<const std::size_t> order,
                                                     std::size_t batch_size) {
  std::vector<std::vector<TrainInstance>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    std::vector<TrainInstance> batch;
    for (auto i = start; i < end; ++i) batch.push_back(data[order[i]]);
    if (batch.size() == 1 && batch[0].negatives.empty() && !batches.empty())
      batches.back().push_back(std::move(batch[0]));
    else
      batches.push_back(std::move(batch));
  }
  return batches;
}

double mean_loss(const ToyEncoder& enc, const std::vector<std::vector<TrainInstance>>& batches) {
  double sum = 0.0;
  for (const auto& b : batches) sum += batch_loss(enc, b, in_batch_negatives(b));
  return sum / static_cast<double>(batches.size());
}

}  // namespace

double batch_loss(const ToyEncoder& enc, std::span<const TrainInstance> batch,
                  std::span<const NegativeAssignment> assignments) {
  return run_batch(enc, batch, assignments, nullptr);
}

BatchGradient loss_gradient(const ToyEncoder& enc, std::span<const TrainInstance> batch,
                            std::span<const NegativeAssignment> assignments) {
  BatchGradient grad;
  grad.query_table = Eigen::MatrixXd::Zero(enc.table(Side::query).rows(), enc.dim());
  if (!enc.shared())
    grad.doc_table = Eigen::MatrixXd::Zero(enc.table(Side::document).rows(), enc.dim());
  grad.loss = run_batch(enc, batch, assignments, &grad);
  return grad;
}

ToyEncoder train(const TrainConfig& config, std::span<const TrainInstance> data,
                 const TermDictionary& vocab, TrainReport* report, std::ostream* log) {
  config.validate();
  if (data.empty()) throw DataError("training data is empty");
  Rng rng(config.seed);
  ToyEncoder enc(vocab, config.dim, config.shared_encoder, rng);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto fixed_batches = make_batches(data, order, config.batch_size);
  TrainReport local;
  local.initial_loss = mean_loss(enc, fixed_batches);
  if (log) *log << "epoch 0 loss " << local.initial_loss << '\n';

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double sum = 0.0;
    const auto batches = make_batches(data, order, config.batch_size);
    for (const auto& batch : batches) {
      auto grad = loss_gradient(enc, batch, in_batch_negatives(batch));
      sum += grad.loss;
      enc.table(Side::query) -= config.learning_rate * grad.query_table;
      if (grad.doc_table) enc.table(Side::document) -= config.learning_rate * *grad.doc_table;
    }
    local.epoch_losses.push_back(sum / static_cast<double>(batches.size()));
    if (log) *log << "epoch " << epoch << " loss " << local.epoch_losses.back() << '\n';
  }
  local.final_loss = mean_loss(enc, fixed_batches);
  if (report) *report = std::move(local);
  return enc;
}

std::vector<TrainInstance> read_training_data(const std::string& path, const Analyzer& analyzer) {
  std::vector<TrainInstance> data;
  detail::for_each_jsonl(path, [&](const nlohmann::json& obj, std::size_t) {
    TrainInstance inst{analyzer.tokenize(detail::require_string(obj, "query")),
                       analyzer.tokenize(detail::require_string(obj, "positive")),
                       {}};
    if (inst.query.empty() || inst.positive.empty())
      throw DataError("query and positive must be nonempty after analysis");
    if (auto it = obj.find("negatives"); it != obj.end()) {
      if (!it->is_array()) throw DataError("\"negatives\" must be an array");
      for (const auto& n : *it) {
        if (!n.is_string()) throw DataError("negatives must be strings");
        auto toks = analyzer.tokenize(n.get<std::string>());
        if (toks.empty()) throw DataError("negative is empty after analysis");
        inst.negatives.push_back(std::move(toks));
      }
    }
    data.push_back(std::move(inst));
  });
  return data;
}

TermDictionary training_vocabulary(std::span<const TrainInstance> data) {
  TermDictionary dict;
  for (const auto& inst : data) {
    for (const auto& t : inst.query) dict.intern(t);
    for (const auto& t : inst.positive) dict.intern(t);
    for (const auto& n : inst.negatives)
      for (const auto& t : n) dict.intern(t);
  }
  return dict;
}

namespace {
constexpr std::uint32_t kModelVersion = 1;
}

std::string encode_model(const ToyEncoder& enc) {
  BinaryWriter w;
  w.put_bytes("TENC");
  w.put_u32(kModelVersion);
  w.put_u64(enc.vocab().size());
  w.put_u32(static_cast<std::uint32_t>(enc.dim()));
  w.put_u8(enc.shared() ? 1 : 0);
  for (const auto& t : enc.vocab().terms()) w.put_string(t);
  auto put_table = [&](const Eigen::MatrixXd& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) w.put_f64(t(r, c));
  };
  put_table(enc.table(Side::query));
  if (!enc.shared()) put_table(enc.table(Side::document));
  return w.release();
}

ToyEncoder decode_model(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.get_bytes(4) != "TENC") throw FormatError("bad magic: expected TENC");
  if (auto v = r.get_u32(); v != kModelVersion)
    throw FormatError("unsupported TENC version " + std::to_string(v));
  const auto vocab_size = r.get_u64();
  const auto dim = r.get_u32();
  const auto shared = r.get_u8();
  if (shared > 1) throw FormatError("bad shared flag");
  if (vocab_size > r.remaining() / 4) throw FormatError("truncated file");
  std::vector<std::string> terms;
  terms.reserve(vocab_size);
  for (std::uint64_t i = 0; i < vocab_size; ++i) terms.push_back(r.get_string());
  const std::uint64_t tables = shared ? 1 : 2;
  if (dim == 0 || vocab_size * dim * tables > r.remaining() / 8) throw FormatError("truncated file");
  auto get_table = [&] {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(vocab_size), dim);
    for (Eigen::Index row = 0; row < t.rows(); ++row)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(row, c) = r.get_f64();
    return t;
  };
  auto query_table = get_table();
  std::optional<Eigen::MatrixXd> doc_table;
  if (!shared) doc_table = get_table();
  r.expect_end();
  try {
    return ToyEncoder(TermDictionary(std::move(terms)), std::move(query_table), std::move(doc_table));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
}

void save_model(const std::string& path, const ToyEncoder& enc) {
  write_file_atomic(path, encode_model(enc));
}

ToyEncoder load_model(const std::string& path) { return decode_model(read_file(path)); }

}  // namespace lrm
