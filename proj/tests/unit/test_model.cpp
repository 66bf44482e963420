#include <doctest.h>

#include <cmath>
#include <sstream>

#include "finsent/model.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace finsent;
using namespace finsent::model;

namespace {

CnnConfig tiny_config() {
  CnnConfig cfg;
  cfg.feature_dim = 3;
  cfg.max_len = 6;
  cfg.filter_widths = {2, 3};
  cfg.filters_per_width = 2;
  cfg.hidden = 4;
  cfg.dropout_pooled = 0.0;
  cfg.dropout_hidden = 0.0;
  return cfg;
}

EmbeddedDoc random_doc(const CnnConfig& cfg, Rng& rng, std::size_t content) {
  EmbeddedDoc d;
  d.rows = cfg.max_len;
  d.cols = cfg.feature_dim;
  d.matrix.assign(d.rows * d.cols, 0.0f);
  d.mask.assign(d.rows, embeddings::TokenSlot::pad);
  for (std::size_t r = 0; r < content; ++r) {
    d.mask[r] = embeddings::TokenSlot::known;
    for (std::size_t c = 0; c < d.cols; ++c) {
      d.matrix[r * d.cols + c] = static_cast<float>(rng.normal());
    }
  }
  d.doc_features.assign(cfg.doc_feature_dim, 0.0f);
  for (auto& f : d.doc_features) f = static_cast<float>(rng.uniform(-1, 1));
  return d;
}

// Every tensor gets small random values, biases included, so the gradient
// check exercises every path.
CnnParams randomized(const CnnConfig& cfg, std::uint64_t seed) {
  auto p = init_params(cfg, seed);
  Rng rng(seed + 1);
  for (auto& t : p.tensors) {
    for (auto& v : t.values) v += static_cast<float>(0.1 * rng.normal());
  }
  return p;
}

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> test;
};

Dataset separable(std::size_t per_class, std::size_t dim, std::size_t max_len) {
  const auto c = testing::make_cue_corpus(per_class, 9);
  const auto table = testing::make_embeddings(c.vocab, dim, 10);
  const auto pipeline = corpus::PipelineConfig::preset(corpus::Preset::m4);
  Dataset ds;
  for (std::size_t i = 0; i < c.articles.size(); ++i) {
    const auto doc = corpus::preprocess(c.articles[i], pipeline);
    Example ex{embeddings::embed_tokens(table, doc.tokens, {.max_len = max_len}), c.labels[i].label};
    (i % 5 == 0 ? ds.test : ds.train).push_back(std::move(ex));
  }
  return ds;
}

CnnConfig separable_config(std::size_t dim, std::size_t max_len) {
  CnnConfig cfg;
  cfg.feature_dim = dim;
  cfg.max_len = max_len;
  cfg.filter_widths = {1, 2};
  cfg.filters_per_width = 32;
  cfg.hidden = 16;
  cfg.dropout_pooled = 0.2;
  cfg.dropout_hidden = 0.2;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 16;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(CnnConfig{}.validate());
  auto cfg = tiny_config();
  cfg.filter_widths = {7};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = tiny_config();
  cfg.dropout_hidden = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = tiny_config();
  cfg.hidden = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = tiny_config();
  cfg.classes = 2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("parameter shapes and initialization") {
  const CnnConfig cfg;  // default sizes
  const auto p = init_params(cfg, 42);
  REQUIRE(p.tensors.size() == 10);
  CHECK(p.conv_w(0).shape == std::vector<std::size_t>{128, 3, 301});
  CHECK(p.conv_w(2).shape == std::vector<std::size_t>{128, 5, 301});
  CHECK(p.dense1_w().shape == std::vector<std::size_t>{256, 384});
  CHECK(p.dense2_w().shape == std::vector<std::size_t>{3, 256});
  CHECK(p.parameter_count() ==
        128 * 301 * (3 + 4 + 5) + 3 * 128 + 384 * 256 + 256 + 256 * 3 + 3);
  for (float b : p.dense1_b().values) CHECK(b == 0.0f);
  const double limit = std::sqrt(6.0 / (384 + 256));
  for (float w : p.dense1_w().values) CHECK(std::abs(w) <= limit);
  CHECK(init_params(cfg, 42) == p);
  CHECK_FALSE(init_params(cfg, 43) == p);
}

TEST_CASE("zero weights give the uniform distribution and argmax ties go negative") {
  const auto cfg = tiny_config();
  const CnnParams zero(cfg);
  Rng rng(1);
  const std::vector<EmbeddedDoc> docs{random_doc(cfg, rng, 4), random_doc(cfg, rng, 2)};
  for (const auto& probs : forward(zero, cfg, std::span<const EmbeddedDoc>(docs))) {
    for (double q : probs) CHECK(q == doctest::Approx(1.0 / 3.0));
  }
  const std::vector<std::size_t> labels{0, 2};
  CHECK(loss_and_grad(zero, cfg, std::span<const EmbeddedDoc>(docs), labels).loss ==
        doctest::Approx(std::log(3.0)));
  for (auto l : predict(zero, cfg, docs)) CHECK(l == SentimentLabel::negative);
}

TEST_CASE("forward pass on a hand-sized network") {
  CnnConfig cfg;
  cfg.feature_dim = 1;
  cfg.max_len = 2;
  cfg.filter_widths = {1};
  cfg.filters_per_width = 1;
  cfg.hidden = 1;
  cfg.dropout_pooled = 0.0;
  cfg.dropout_hidden = 0.0;
  CnnParams p(cfg);
  p.conv_w(0).values = {2.0f};
  p.conv_b(0).values = {0.5f};
  p.dense1_w().values = {1.0f};
  p.dense1_b().values = {-0.5f};
  p.dense2_w().values = {1.0f, 0.0f, -1.0f};
  EmbeddedDoc d;
  d.rows = 2;
  d.cols = 1;
  d.matrix = {1.0f, -1.0f};
  d.mask = {embeddings::TokenSlot::known, embeddings::TokenSlot::known};
  // conv: 2.5, -1.5 -> pool 2.5 -> hidden relu(2.0) -> logits 2, 0, -2
  const auto probs = forward(p, cfg, std::span<const EmbeddedDoc>(&d, 1))[0];
  const double z = std::exp(2.0) + 1.0 + std::exp(-2.0);
  CHECK(probs[0] == doctest::Approx(std::exp(2.0) / z));
  CHECK(probs[1] == doctest::Approx(1.0 / z));
  CHECK(probs[2] == doctest::Approx(std::exp(-2.0) / z));
}

TEST_CASE("analytic gradient matches central differences") {
  auto cfg = tiny_config();
  cfg.doc_feature_dim = 2;
  Rng rng(4);
  std::vector<EmbeddedDoc> docs;
  for (std::size_t n : {6, 3, 5, 2}) docs.push_back(random_doc(cfg, rng, n));
  const std::vector<std::size_t> labels{0, 1, 2, 1};
  const auto params = randomized(cfg, 8).cast<double>();
  const auto analytic = loss_and_grad(params, cfg, std::span<const EmbeddedDoc>(docs), labels);
  const auto numeric = testing::numeric_gradient(params, cfg, docs, labels, 1e-4);
  CHECK(analytic.loss ==
        doctest::Approx(testing::cross_entropy(params, cfg, docs, labels)).epsilon(1e-12));
  double worst = 0.0;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    const auto& a = analytic.grad.tensors[t].values;
    const auto& n = numeric.tensors[t].values;
    REQUIRE(a.size() == n.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, testing::relative_error(a[i], n[i]));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("forward properties") {
  const auto cfg = tiny_config();
  const auto params = randomized(cfg, 2);
  Rng rng(6);
  std::vector<EmbeddedDoc> docs;
  for (int i = 0; i < 12; ++i) docs.push_back(random_doc(cfg, rng, 1 + rng.below(cfg.max_len)));

  const auto batch = forward(params, cfg, std::span<const EmbeddedDoc>(docs));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double sum = 0.0;
    for (double q : batch[i]) {
      CHECK(q >= 0.0);
      sum += q;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto single = forward(params, cfg, std::span<const EmbeddedDoc>(&docs[i], 1))[0];
    CHECK(single == batch[i]);
  }
  CHECK(forward(params, cfg, std::span<const EmbeddedDoc>(docs), false, nullptr, 4) == batch);

  // extra trailing padding changes nothing once an all-padding window exists
  auto longer = cfg;
  longer.max_len = 14;
  auto short_doc = random_doc(cfg, rng, 2);
  auto long_doc = short_doc;
  long_doc.rows = longer.max_len;
  long_doc.matrix.resize(long_doc.rows * long_doc.cols, 0.0f);
  long_doc.mask.resize(long_doc.rows, embeddings::TokenSlot::pad);
  CHECK(forward(params, cfg, std::span<const EmbeddedDoc>(&short_doc, 1)) ==
        forward(params, longer, std::span<const EmbeddedDoc>(&long_doc, 1)));

  EmbeddedDoc wrong = docs[0];
  wrong.rows = 5;
  CHECK_THROWS_AS(forward(params, cfg, std::span<const EmbeddedDoc>(&wrong, 1)), ValidationError);
}

TEST_CASE("gradients do not depend on the thread count") {
  auto cfg = tiny_config();
  cfg.dropout_pooled = 0.3;
  cfg.dropout_hidden = 0.3;
  const auto params = randomized(cfg, 3);
  Rng rng(8);
  std::vector<EmbeddedDoc> docs;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 20; ++i) {
    docs.push_back(random_doc(cfg, rng, 1 + rng.below(cfg.max_len)));
    labels.push_back(rng.below(3));
  }
  Rng r1(99);
  Rng r4(99);
  const auto one = loss_and_grad(params, cfg, std::span<const EmbeddedDoc>(docs), labels, &r1, 1);
  const auto four = loss_and_grad(params, cfg, std::span<const EmbeddedDoc>(docs), labels, &r4, 4);
  CHECK(one.loss == four.loss);
  CHECK(one.grad == four.grad);
}

TEST_CASE("adam moves parameters against the gradient") {
  const auto cfg = tiny_config();
  auto p = init_params(cfg, 1);
  const auto before = p;
  auto g = p.zeros_like();
  g.dense2_b().values = {1.0f, -1.0f, 0.0f};
  AdamState st;
  adam_step(p, g, st, 0.01);
  CHECK(st.step == 1);
  CHECK(p.dense2_b().values[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(p.dense2_b().values[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(p.dense2_b().values[2] == 0.0f);
  CHECK(p.dense1_w() == before.dense1_w());
}

TEST_CASE("training") {
  const std::size_t dim = 32;
  const std::size_t max_len = 24;
  const auto ds = separable(200, dim, max_len);
  auto cfg = separable_config(dim, max_len);

  SUBCASE("zero epochs reports nothing and keeps the initial weights") {
    cfg.epochs = 0;
    const auto r = train(cfg, ds.train, ds.test);
    CHECK(r.report.epochs.empty());
    CHECK_FALSE(r.report.best_weighted_epoch.has_value());
    CHECK(r.state.params == init_params(cfg, cfg.seed));
  }
  SUBCASE("separable corpus is learned, identically for any thread count") {
    cfg.epochs = 30;
    const auto one = train(cfg, ds.train, ds.test);
    TrainOptions threaded;
    threaded.threads = 3;
    const auto three = train(cfg, ds.train, ds.test, default_eval_fn(), threaded);
    CHECK(one.report == three.report);
    CHECK(one.state.params == three.state.params);
    CHECK(one.report.max_weighted_f1 >= 0.9);
    CHECK(one.report.epochs.back().train_loss < one.report.epochs.front().train_loss);
    CHECK(one.state.params.all_finite());
    CHECK(one.report.reported_weighted_f1() == one.report.max_weighted_f1);

    std::ostringstream rep;
    write_train_report_csv(rep, one.report);
    CHECK(rep.str().rfind("epoch,train_loss,test_macro_f1,test_weighted_f1\n1,", 0) == 0);
    std::ostringstream sum;
    write_train_summary_csv(sum, one.report);
    CHECK(sum.str().find("seed,5\n") != std::string::npos);
  }
  SUBCASE("checkpoint round trip and resume") {
    cfg.epochs = 4;
    const auto full = train(cfg, ds.train, ds.test);

    auto half = cfg;
    half.epochs = 2;
    const auto first = train(half, ds.train, ds.test);
    std::stringstream buf;
    write_checkpoint(buf, {half, first.state, {{"pipeline.preset", "M4"}}});
    const auto loaded = read_checkpoint(buf);
    CHECK(loaded.config == half);
    CHECK(loaded.state.params == first.state.params);
    CHECK(loaded.state.optimizer.step == first.state.optimizer.step);
    CHECK(loaded.metadata.at("pipeline.preset") == "M4");

    TrainOptions resumed;
    resumed.resume = &loaded.state;
    const auto second = train(half, ds.train, ds.test, default_eval_fn(), resumed);
    CHECK(second.state.epochs_done == 4);
    CHECK(second.state.params == full.state.params);
    REQUIRE(second.report.epochs.size() == 2);
    CHECK(second.report.epochs[0] == full.report.epochs[2]);
    CHECK(second.report.epochs[1] == full.report.epochs[3]);
  }
  CHECK_THROWS_AS(train(cfg, {}, ds.test), ValidationError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto cfg = tiny_config();
  std::stringstream buf;
  write_checkpoint(buf, {cfg, {init_params(cfg, 1), {}, 0}, {}});
  const auto bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), Error);
  std::stringstream garbage("not a checkpoint at all");
  CHECK_THROWS_AS(read_checkpoint(garbage), Error);
}

TEST_CASE("split and baseline") {
  const auto s = train_test_split(100, 0.2, 7);
  CHECK(s.test.size() == 20);
  CHECK(s.train.size() == 80);
  CHECK(train_test_split(100, 0.2, 7).test == s.test);
  CHECK_FALSE(train_test_split(100, 0.2, 8).test == s.test);
  CHECK_THROWS_AS(train_test_split(10, 1.0, 1), ValidationError);
  const auto b = allneutral_predict(3);
  CHECK(b == std::vector<SentimentLabel>(3, SentimentLabel::neutral));
}
