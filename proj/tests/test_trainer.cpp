#include <cmath>

#include "doctest.h"
#include "lrm/error.hpp"
#include "lrm/trainer.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace lrm;

namespace {

DenseVector vec(std::initializer_list<double> v) {
  DenseVector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d[i++] = x;
  return d;
}

std::vector<TrainInstance> tiny_batch() {
  return {{{"q1"}, {"a", "b"}, {}}, {{"q2", "b"}, {"c"}, {{"a", "c"}}}, {{"q3"}, {"b", "b", "c"}, {}}};
}

TermDictionary tiny_vocab() { return TermDictionary({"q1", "q2", "q3", "a", "b", "c", "unused"}); }

}  // namespace

TEST_CASE("softmax loss") {
  for (int n : {1, 3, 7}) {
    std::vector<double> s(static_cast<std::size_t>(n + 1), 2.5);
    CHECK(softmax_loss(s) == doctest::Approx(std::log(n + 1.0)).epsilon(1e-12));
  }
  const std::vector<double> one = {1.0, 0.0};
  CHECK(softmax_loss(one) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(softmax_loss(one) == doctest::Approx(0.31326).epsilon(1e-5));
  double prev = 1e9;
  for (double p = -5; p <= 30; p += 5) {
    const std::vector<double> s = {p, 0.0, 1.0};
    const double l = softmax_loss(s);
    CHECK(l >= 0.0);
    CHECK(l < prev);
    prev = l;
  }
  const std::vector<double> huge = {1000.0, 999.0};
  CHECK(std::isfinite(softmax_loss(huge)));
}

TEST_CASE("dpr loss") {
  const std::vector<DenseVector> neg = {vec({0.0, 0.0})};
  CHECK(dpr_loss(vec({1.0, 0.0}), vec({1.0, 0.0}), neg) == doctest::Approx(0.31326).epsilon(1e-5));
  CHECK_THROWS_AS(dpr_loss(vec({1.0, 0.0}), vec({1.0}), neg), std::invalid_argument);
  CHECK_THROWS_AS(dpr_loss(vec({1.0}), vec({1.0}), std::vector<DenseVector>{}), std::invalid_argument);
}

TEST_CASE("in-batch negatives") {
  std::vector<TrainInstance> two = {{{"q1"}, {"d1"}, {}}, {{"q2"}, {"d2"}, {}}};
  auto a = in_batch_negatives(two);
  CHECK(a[0].in_batch == std::vector<std::size_t>{1});
  CHECK(a[1].in_batch == std::vector<std::size_t>{0});
  std::vector<TrainInstance> four(4, TrainInstance{{"q"}, {"d"}, {}});
  for (const auto& x : in_batch_negatives(four)) CHECK(x.in_batch.size() == 3);
  two[0].negatives.push_back({"x"});
  a = in_batch_negatives(two);
  CHECK(a[0].in_batch == std::vector<std::size_t>{1});
  CHECK(a[0].explicit_count == 1);
  std::vector<TrainInstance> single = {{{"q"}, {"d"}, {}}};
  CHECK_THROWS_AS(in_batch_negatives(single), std::invalid_argument);
  single[0].negatives.push_back({"x"});
  CHECK_NOTHROW(in_batch_negatives(single));
}

TEST_CASE("gradient at the symmetric point") {
  // Zero table: every score is 0 and the softmax is uniform, so the loss is
  // ln(n+1) and the gradient of each score is (p - onehot) = (1/(n+1) - [pos]).
  // Every term of dL/dE is a product with a zero embedding, hence exactly 0.
  const auto vocab = tiny_vocab();
  const ToyEncoder enc(vocab, Eigen::MatrixXd::Zero(7, 3), std::nullopt);
  const auto batch = tiny_batch();
  const auto neg = in_batch_negatives(batch);
  const auto g = loss_gradient(enc, batch, neg);
  const double expected = (std::log(3.0) + std::log(4.0) + std::log(3.0)) / 3.0;
  CHECK(g.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(g.query_table.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient with a one-hot document side") {
  // Query q1 has embedding e and every document encodes to zero except
  // through a, so dL/d row(q1) follows the hand-derived softmax expression.
  TermDictionary vocab({"q", "a", "b"});
  Eigen::MatrixXd qt = Eigen::MatrixXd::Zero(3, 2), dt = Eigen::MatrixXd::Zero(3, 2);
  dt(1, 0) = 1.0;  // a = e1
  dt(2, 1) = 2.0;  // b = 2·e2
  const ToyEncoder enc(vocab, qt, dt);
  std::vector<TrainInstance> batch = {{{"q"}, {"a"}, {{"b"}}}};
  const auto g = loss_gradient(enc, batch, in_batch_negatives(batch));
  // Scores are 0 and 0, p = (1/2, 1/2); dL/dq = p_a·a + p_b·b − a = (−1/2, 1).
  CHECK(g.query_table(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(g.query_table(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.doc_table->cwiseAbs().maxCoeff() == 0.0);  // q = 0, so documents get no gradient
}

TEST_CASE("gradient matches central differences") {
  for (std::uint64_t draw = 0; draw < 5; ++draw) {
    Rng rng(100 + draw);
    const auto vocab = tiny_vocab();
    ToyEncoder enc(vocab, 3, draw % 2 == 1, rng);
    for (Side s : {Side::query, Side::document})
      for (Eigen::Index i = 0; i < enc.table(s).size(); ++i) enc.table(s).data()[i] = 2.0 * uniform01(rng) - 1.0;
    const auto batch = tiny_batch();
    const auto neg = in_batch_negatives(batch);
    auto g = loss_gradient(enc, batch, neg);
    CHECK(g.loss == doctest::Approx(batch_loss(enc, batch, neg)).epsilon(1e-14));
    double worst = 0.0;
    for (Side s : {Side::query, Side::document}) {
      if (s == Side::document && enc.shared()) continue;
      auto& t = enc.table(s);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double keep = t.data()[i];
        t.data()[i] = keep + 1e-5;
        const double up = batch_loss(enc, batch, neg);
        t.data()[i] = keep - 1e-5;
        const double down = batch_loss(enc, batch, neg);
        t.data()[i] = keep;
        const double fd = (up - down) / 2e-5;
        const double an = g.table(s).data()[i];
        const double scale = std::max(std::abs(fd), std::abs(an));
        if (scale > 1e-10) worst = std::max(worst, std::abs(fd - an) / scale);
      }
    }
    CHECK(worst < 1e-4);
    // "unused" never appears in the batch.
    CHECK(g.query_table.row(6).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("training determinism and lr = 0") {
  const auto data = tiny_batch();
  const auto vocab = tiny_vocab();
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  cfg.seed = 11;
  const auto a = train(cfg, data, vocab);
  const auto b = train(cfg, data, vocab);
  CHECK(encode_model(a) == encode_model(b));

  cfg.learning_rate = 0.0;
  const auto frozen = train(cfg, data, vocab);
  Rng rng(cfg.seed);
  const ToyEncoder init(vocab, cfg.dim, cfg.shared_encoder, rng);
  CHECK(frozen.table(Side::query) == init.table(Side::query));

  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train(cfg, data, vocab), ConfigError);
  cfg.learning_rate = 0.1;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.batch_size = 2;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(cfg, std::vector<TrainInstance>{}, vocab), DataError);
}

TEST_CASE("shared encoder scores identical texts symmetrically") {
  const auto vocab = tiny_vocab();
  Rng rng(5);
  const ToyEncoder enc(vocab, 4, true, rng);
  const TokenList x = {"a", "b"}, y = {"c", "q1"};
  const double xy = toy_encode(enc, x, Side::query).dot(toy_encode(enc, y, Side::document));
  const double yx = toy_encode(enc, y, Side::query).dot(toy_encode(enc, x, Side::document));
  CHECK(xy == yx);
}

TEST_CASE("training lowers the loss on a separable task") {
  Rng rng(7);
  std::vector<TrainInstance> data;
  for (int i = 0; i < 200; ++i) {
    const int m = static_cast<int>(uniform_index(rng, 10));
    const std::string marker = "m" + std::to_string(m);
    data.push_back({{marker, "n" + std::to_string(uniform_index(rng, 50))},
                    {marker, "n" + std::to_string(uniform_index(rng, 50)), "n" + std::to_string(uniform_index(rng, 50))},
                    {}});
  }
  const auto vocab = training_vocabulary(data);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 5.0;
  TrainReport report;
  std::ostringstream log;
  train(cfg, data, vocab, &report, &log);
  CHECK(report.final_loss < report.initial_loss);
  CHECK(report.epoch_losses.size() == 5);
  CHECK(log.str().find("epoch 5 loss") != std::string::npos);
}

TEST_CASE("training data and model files") {
  lrm::testing::TempDir tmp;
  const auto path = tmp.write("t.jsonl",
                              R"({"query":"What is BM25?","positive":"BM25 ranks documents","negatives":["cats"]})" "\n"
                              R"({"query":"dense","positive":"vectors"})" "\n");
  const auto data = read_training_data(path, Analyzer{});
  REQUIRE(data.size() == 2);
  CHECK(data[0].query == TokenList{"what", "is", "bm25"});
  CHECK(data[0].negatives.size() == 1);
  CHECK(data[1].negatives.empty());
  CHECK_THROWS_AS(read_training_data(tmp.write("e.jsonl", R"({"query":"!!","positive":"x"})" "\n"), Analyzer{}), DataError);

  const auto vocab = training_vocabulary(data);
  CHECK(vocab.term(0) == "what");
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.shared_encoder = false;
  const auto enc = train(cfg, data, vocab);
  save_model(tmp.file("m.tenc"), enc);
  const auto back = load_model(tmp.file("m.tenc"));
  CHECK(back.table(Side::query) == enc.table(Side::query));
  CHECK(back.table(Side::document) == enc.table(Side::document));
  CHECK(back.vocab().size() == vocab.size());
  const auto image = encode_model(enc);
  CHECK(image.substr(0, 4) == "TENC");
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, image.size() - 1})
    CHECK_THROWS_AS(decode_model(image.substr(0, cut)), DataError);
  CHECK_THROWS_AS(load_model(tmp.file("nope")), DataError);
}
