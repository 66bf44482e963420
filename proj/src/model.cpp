#include "finsent/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "finsent/eval.hpp"

namespace finsent::model {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Eight independent partial sums; fixed order, so results are reproducible
// and the loop vectorizes without -ffast-math.
template <typename Real, typename In>
Real dot(const Real* a, const In* b, std::size_t n) {
  Real acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * static_cast<Real>(b[i + k]);
  }
  Real sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) sum += a[i] * static_cast<Real>(b[i]);
  return sum;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(n, (t + 1) * chunk);
        for (std::size_t i = t * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Inverted-dropout scale factors (0 or 1/(1-p)); empty means no dropout.
struct DropoutMasks {
  std::vector<double> pooled;
  std::vector<double> hidden;
};

std::vector<double> draw_mask(std::size_t n, double rate, Rng& rng) {
  std::vector<double> mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

DropoutMasks draw_masks(const CnnConfig& cfg, Rng& rng) {
  DropoutMasks masks;
  masks.pooled = draw_mask(cfg.pooled_dim(), cfg.dropout_pooled, rng);
  masks.hidden = draw_mask(cfg.hidden, cfg.dropout_hidden, rng);
  return masks;
}

template <typename Real>
struct Trace {
  std::vector<std::size_t> argmax;  // window start per conv filter
  std::vector<Real> pooled;         // ReLU(max) per filter, then doc features
  std::vector<Real> pooled_in;      // after dropout
  std::vector<Real> hidden;         // after ReLU
  std::vector<Real> hidden_in;      // after dropout
  Probabilities probs{};
  double log_sum_exp = 0.0;
  std::array<double, kNumClasses> logits{};
};

void check_input(const CnnConfig& cfg, const EmbeddedDoc& doc) {
  if (doc.rows != cfg.max_len || doc.cols != cfg.feature_dim ||
      doc.matrix.size() != doc.rows * doc.cols) {
    throw ValidationError("model input is " + std::to_string(doc.rows) + "x" +
                          std::to_string(doc.cols) + ", expected " + std::to_string(cfg.max_len) +
                          "x" + std::to_string(cfg.feature_dim));
  }
  if (doc.doc_features.size() != cfg.doc_feature_dim) {
    throw ValidationError("model input has " + std::to_string(doc.doc_features.size()) +
                          " document features, expected " + std::to_string(cfg.doc_feature_dim));
  }
}

template <typename Real>
void forward_one(const BasicCnnParams<Real>& p, const CnnConfig& cfg, const EmbeddedDoc& doc,
                 const DropoutMasks* masks, Trace<Real>& tr) {
  const std::size_t cols = cfg.feature_dim;
  const std::size_t len = cfg.max_len;
  const std::size_t filters = cfg.filters_per_width;
  const std::size_t conv_dim = cfg.filter_widths.size() * filters;
  const std::size_t pooled_dim = cfg.pooled_dim();

  // Rows outside [content_begin, content_end) are padding, hence zero.
  std::size_t content_begin = 0;
  std::size_t content_end = len;
  if (doc.mask.size() == len) {
    content_begin = len;
    content_end = 0;
    for (std::size_t r = 0; r < len; ++r) {
      if (doc.mask[r] != embeddings::TokenSlot::pad) {
        content_begin = std::min(content_begin, r);
        content_end = r + 1;
      }
    }
  }

  tr.pooled.assign(pooled_dim, Real(0));
  tr.argmax.assign(conv_dim, 0);
  std::vector<Real> best(filters);
  std::vector<std::size_t> best_t(filters);
  const float* x = doc.matrix.data();
  for (std::size_t g = 0; g < cfg.filter_widths.size(); ++g) {
    const std::size_t width = cfg.filter_widths[g];
    const std::size_t span = width * cols;
    const Real* kernel = p.conv_w(g).values.data();
    const Real* bias = p.conv_b(g).values.data();
    std::fill(best.begin(), best.end(), -std::numeric_limits<Real>::infinity());
    std::fill(best_t.begin(), best_t.end(), 0);
    for (std::size_t t = 0; t + width <= len; ++t) {
      const bool touches_content = t < content_end && t + width > content_begin;
      for (std::size_t f = 0; f < filters; ++f) {
        const Real z = touches_content ? bias[f] + dot(kernel + f * span, x + t * cols, span)
                                       : bias[f];
        if (z > best[f]) {
          best[f] = z;
          best_t[f] = t;
        }
      }
    }
    for (std::size_t f = 0; f < filters; ++f) {
      tr.pooled[g * filters + f] = std::max(best[f], Real(0));
      tr.argmax[g * filters + f] = best_t[f];
    }
  }
  for (std::size_t i = 0; i < cfg.doc_feature_dim; ++i) {
    tr.pooled[conv_dim + i] = static_cast<Real>(doc.doc_features[i]);
  }

  tr.pooled_in = tr.pooled;
  if (masks) {
    for (std::size_t i = 0; i < pooled_dim; ++i) {
      tr.pooled_in[i] = static_cast<Real>(tr.pooled_in[i] * masks->pooled[i]);
    }
  }

  const Real* w1 = p.dense1_w().values.data();
  const Real* b1 = p.dense1_b().values.data();
  tr.hidden.resize(cfg.hidden);
  for (std::size_t j = 0; j < cfg.hidden; ++j) {
    tr.hidden[j] = std::max(Real(0), b1[j] + dot(w1 + j * pooled_dim, tr.pooled_in.data(), pooled_dim));
  }
  tr.hidden_in = tr.hidden;
  if (masks) {
    for (std::size_t j = 0; j < cfg.hidden; ++j) {
      tr.hidden_in[j] = static_cast<Real>(tr.hidden_in[j] * masks->hidden[j]);
    }
  }

  const Real* w2 = p.dense2_w().values.data();
  const Real* b2 = p.dense2_b().values.data();
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    tr.logits[c] = static_cast<double>(b2[c] + dot(w2 + c * cfg.hidden, tr.hidden_in.data(), cfg.hidden));
    peak = std::max(peak, tr.logits[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    tr.probs[c] = std::exp(tr.logits[c] - peak);
    total += tr.probs[c];
  }
  for (auto& pr : tr.probs) pr /= total;
  tr.log_sum_exp = peak + std::log(total);
}

// Backward deltas for one example, scaled by `scale` (1 / batch size).
template <typename Real>
struct Deltas {
  std::array<Real, kNumClasses> logits{};
  std::vector<Real> hidden;  // w.r.t. dense-1 pre-activation
  std::vector<Real> pooled;  // w.r.t. pooled vector (pre-dropout)
};

template <typename Real>
void backward_one(const BasicCnnParams<Real>& p, const CnnConfig& cfg, const Trace<Real>& tr,
                  const DropoutMasks* masks, std::size_t label, double scale, Deltas<Real>& d) {
  const std::size_t pooled_dim = cfg.pooled_dim();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    d.logits[c] = static_cast<Real>((tr.probs[c] - (c == label ? 1.0 : 0.0)) * scale);
  }
  const Real* w2 = p.dense2_w().values.data();
  d.hidden.assign(cfg.hidden, Real(0));
  for (std::size_t j = 0; j < cfg.hidden; ++j) {
    if (tr.hidden[j] <= Real(0)) continue;
    Real g = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) g += w2[c * cfg.hidden + j] * d.logits[c];
    if (masks) g = static_cast<Real>(g * masks->hidden[j]);
    d.hidden[j] = g;
  }
  const Real* w1 = p.dense1_w().values.data();
  d.pooled.assign(pooled_dim, Real(0));
  for (std::size_t j = 0; j < cfg.hidden; ++j) {
    const Real dh = d.hidden[j];
    if (dh == Real(0)) continue;
    const Real* row = w1 + j * pooled_dim;
    for (std::size_t i = 0; i < pooled_dim; ++i) d.pooled[i] += row[i] * dh;
  }
  if (masks) {
    for (std::size_t i = 0; i < pooled_dim; ++i) {
      d.pooled[i] = static_cast<Real>(d.pooled[i] * masks->pooled[i]);
    }
  }
}

template <typename Real>
void accumulate(BasicCnnParams<Real>& grad, const CnnConfig& cfg, const EmbeddedDoc& doc,
                const Trace<Real>& tr, const Deltas<Real>& d) {
  const std::size_t pooled_dim = cfg.pooled_dim();
  Real* gw2 = grad.dense2_w().values.data();
  Real* gb2 = grad.dense2_b().values.data();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    gb2[c] += d.logits[c];
    for (std::size_t j = 0; j < cfg.hidden; ++j) gw2[c * cfg.hidden + j] += d.logits[c] * tr.hidden_in[j];
  }
  Real* gw1 = grad.dense1_w().values.data();
  Real* gb1 = grad.dense1_b().values.data();
  for (std::size_t j = 0; j < cfg.hidden; ++j) {
    const Real dh = d.hidden[j];
    if (dh == Real(0)) continue;
    gb1[j] += dh;
    Real* row = gw1 + j * pooled_dim;
    for (std::size_t i = 0; i < pooled_dim; ++i) row[i] += dh * tr.pooled_in[i];
  }
  const std::size_t filters = cfg.filters_per_width;
  const float* x = doc.matrix.data();
  for (std::size_t g = 0; g < cfg.filter_widths.size(); ++g) {
    const std::size_t span = cfg.filter_widths[g] * cfg.feature_dim;
    Real* gk = grad.conv_w(g).values.data();
    Real* gb = grad.conv_b(g).values.data();
    for (std::size_t f = 0; f < filters; ++f) {
      const std::size_t idx = g * filters + f;
      if (tr.pooled[idx] <= Real(0)) continue;
      const Real dz = d.pooled[idx];
      gb[f] += dz;
      const float* window = x + tr.argmax[idx] * cfg.feature_dim;
      Real* k = gk + f * span;
      for (std::size_t i = 0; i < span; ++i) k[i] += dz * static_cast<Real>(window[i]);
    }
  }
}

template <typename Real>
std::vector<Probabilities> forward_impl(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                        std::span<const EmbeddedDoc* const> batch, Rng* rng,
                                        std::size_t threads) {
  for (const auto* doc : batch) check_input(cfg, *doc);
  std::vector<DropoutMasks> masks;
  if (rng) {
    masks.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) masks.push_back(draw_masks(cfg, *rng));
  }
  std::vector<Probabilities> out(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    Trace<Real> tr;
    forward_one(params, cfg, *batch[i], rng ? &masks[i] : nullptr, tr);
    out[i] = tr.probs;
  });
  return out;
}

template <typename Real>
LossAndGrad<Real> loss_and_grad_impl(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                     std::span<const EmbeddedDoc* const> batch,
                                     std::span<const std::size_t> labels, Rng* rng,
                                     std::size_t threads) {
  if (batch.size() != labels.size()) {
    throw ValidationError("loss_and_grad: " + std::to_string(batch.size()) + " inputs but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (batch.empty()) throw ValidationError("loss_and_grad: empty batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_input(cfg, *batch[i]);
    if (labels[i] >= kNumClasses) throw ValidationError("loss_and_grad: label index out of range");
  }
  std::vector<DropoutMasks> masks;
  if (rng) {
    masks.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) masks.push_back(draw_masks(cfg, *rng));
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<Trace<Real>> traces(batch.size());
  std::vector<Deltas<Real>> deltas(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const DropoutMasks* m = rng ? &masks[i] : nullptr;
    forward_one(params, cfg, *batch[i], m, traces[i]);
    backward_one(params, cfg, traces[i], m, labels[i], scale, deltas[i]);
  });

  LossAndGrad<Real> result{0.0, params.zeros_like()};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    result.loss += traces[i].log_sum_exp - traces[i].logits[labels[i]];
    accumulate(result.grad, cfg, *batch[i], traces[i], deltas[i]);
  }
  result.loss *= scale;
  return result;
}

std::vector<const EmbeddedDoc*> pointers(std::span<const EmbeddedDoc> docs) {
  std::vector<const EmbeddedDoc*> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(&d);
  return out;
}

SentimentLabel argmax_label(const Probabilities& probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return label_from_index(best);
}

std::vector<SentimentLabel> predict_impl(const CnnParams& params, const CnnConfig& cfg,
                                         std::span<const EmbeddedDoc* const> docs,
                                         std::size_t threads) {
  const auto probs = forward_impl(params, cfg, docs, nullptr, threads);
  std::vector<SentimentLabel> labels;
  labels.reserve(probs.size());
  for (const auto& p : probs) labels.push_back(argmax_label(p));
  return labels;
}

}  // namespace

// ---------------------------------------------------------------------------

void CnnConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid CNN config: " + what); };
  if (feature_dim == 0) fail("feature_dim must be >= 1");
  if (max_len == 0) fail("max_len must be >= 1");
  if (filter_widths.empty()) fail("at least one filter width required");
  for (auto w : filter_widths) {
    if (w == 0) fail("filter widths must be >= 1");
    if (w > max_len) fail("filter width " + std::to_string(w) + " exceeds max_len");
  }
  if (filters_per_width == 0) fail("filters_per_width must be >= 1");
  if (hidden == 0) fail("hidden must be >= 1");
  if (!(dropout_pooled >= 0.0 && dropout_pooled < 1.0) ||
      !(dropout_hidden >= 0.0 && dropout_hidden < 1.0)) {
    fail("dropout rates must lie in [0, 1)");
  }
  if (classes != kNumClasses) fail("classes must be 3");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
}

template <typename Real>
BasicCnnParams<Real>::BasicCnnParams(const CnnConfig& cfg) {
  cfg.validate();
  const std::size_t filters = cfg.filters_per_width;
  for (std::size_t g = 0; g < cfg.filter_widths.size(); ++g) {
    const std::size_t w = cfg.filter_widths[g];
    const std::string suffix = std::to_string(g);
    tensors.push_back({"conv_w" + suffix, {filters, w, cfg.feature_dim},
                       std::vector<Real>(filters * w * cfg.feature_dim)});
    tensors.push_back({"conv_b" + suffix, {filters}, std::vector<Real>(filters)});
  }
  const std::size_t pooled = cfg.pooled_dim();
  tensors.push_back({"dense1_w", {cfg.hidden, pooled}, std::vector<Real>(cfg.hidden * pooled)});
  tensors.push_back({"dense1_b", {cfg.hidden}, std::vector<Real>(cfg.hidden)});
  tensors.push_back({"dense2_w", {cfg.classes, cfg.hidden}, std::vector<Real>(cfg.classes * cfg.hidden)});
  tensors.push_back({"dense2_b", {cfg.classes}, std::vector<Real>(cfg.classes)});
}

template <typename Real>
std::size_t BasicCnnParams<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

template <typename Real>
bool BasicCnnParams<Real>::all_finite() const {
  for (const auto& t : tensors) {
    for (auto v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <typename Real>
BasicCnnParams<Real> BasicCnnParams<Real>::zeros_like() const {
  BasicCnnParams out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back({t.name, t.shape, std::vector<Real>(t.values.size())});
  return out;
}

template class BasicCnnParams<float>;
template class BasicCnnParams<double>;

CnnParams init_params(const CnnConfig& cfg, std::uint64_t seed) {
  CnnParams params(cfg);
  Rng rng(seed);
  auto fill = [&](Tensor<float>& t, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.values) v = static_cast<float>(rng.uniform(-limit, limit));
  };
  for (std::size_t g = 0; g < cfg.filter_widths.size(); ++g) {
    const auto w = static_cast<double>(cfg.filter_widths[g]);
    fill(params.conv_w(g), w * static_cast<double>(cfg.feature_dim),
         w * static_cast<double>(cfg.filters_per_width));
  }
  fill(params.dense1_w(), static_cast<double>(cfg.pooled_dim()), static_cast<double>(cfg.hidden));
  fill(params.dense2_w(), static_cast<double>(cfg.hidden), static_cast<double>(cfg.classes));
  return params;
}

template <typename Real>
std::vector<Probabilities> forward(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                   std::span<const EmbeddedDoc> batch, bool train_mode, Rng* rng,
                                   std::size_t threads) {
  if (train_mode && rng == nullptr) throw ValidationError("forward: train mode needs an rng");
  const auto ptrs = pointers(batch);
  return forward_impl(params, cfg, std::span<const EmbeddedDoc* const>(ptrs),
                      train_mode ? rng : nullptr, threads);
}

template <typename Real>
LossAndGrad<Real> loss_and_grad(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                std::span<const EmbeddedDoc> batch,
                                std::span<const std::size_t> labels, Rng* dropout_rng,
                                std::size_t threads) {
  const auto ptrs = pointers(batch);
  return loss_and_grad_impl(params, cfg, std::span<const EmbeddedDoc* const>(ptrs), labels,
                            dropout_rng, threads);
}

template std::vector<Probabilities> forward<float>(const BasicCnnParams<float>&, const CnnConfig&,
                                                   std::span<const EmbeddedDoc>, bool, Rng*,
                                                   std::size_t);
template std::vector<Probabilities> forward<double>(const BasicCnnParams<double>&,
                                                    const CnnConfig&, std::span<const EmbeddedDoc>,
                                                    bool, Rng*, std::size_t);
template LossAndGrad<float> loss_and_grad<float>(const BasicCnnParams<float>&, const CnnConfig&,
                                                 std::span<const EmbeddedDoc>,
                                                 std::span<const std::size_t>, Rng*, std::size_t);
template LossAndGrad<double> loss_and_grad<double>(const BasicCnnParams<double>&,
                                                   const CnnConfig&, std::span<const EmbeddedDoc>,
                                                   std::span<const std::size_t>, Rng*, std::size_t);

std::vector<SentimentLabel> predict(const CnnParams& params, const CnnConfig& cfg,
                                    std::span<const EmbeddedDoc> docs, std::size_t threads) {
  if (!params.all_finite()) throw ValidationError("predict: parameters are not finite");
  const auto ptrs = pointers(docs);
  return predict_impl(params, cfg, ptrs, threads);
}

std::vector<SentimentLabel> allneutral_predict(std::size_t n) {
  return std::vector<SentimentLabel>(n, SentimentLabel::neutral);
}

// ---------------------------------------------------------------------------

void adam_step(CnnParams& params, const CnnParams& grad, AdamState& state, double learning_rate) {
  if (state.m.tensors.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double lr_t = learning_rate * std::sqrt(1.0 - std::pow(state.beta2, t)) /
                      (1.0 - std::pow(state.beta1, t));
  const auto b1 = static_cast<float>(state.beta1);
  const auto b2 = static_cast<float>(state.beta2);
  const auto eps = static_cast<float>(state.epsilon);
  const auto step = static_cast<float>(lr_t);
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    auto& p = params.tensors[k].values;
    const auto& g = grad.tensors[k].values;
    auto& m = state.m.tensors[k].values;
    auto& v = state.v.tensors[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
}

double TrainReport::reported_macro_f1() const {
  if (epochs.empty()) return 0.0;
  return selection == Selection::max_over_epochs ? max_macro_f1 : epochs.back().test_macro_f1;
}

double TrainReport::reported_weighted_f1() const {
  if (epochs.empty()) return 0.0;
  return selection == Selection::max_over_epochs ? max_weighted_f1
                                                 : epochs.back().test_weighted_f1;
}

EvalFn default_eval_fn() {
  return [](std::span<const SentimentLabel> truth, std::span<const SentimentLabel> predicted) {
    const auto report = eval::f1_report(eval::confusion(truth, predicted));
    return std::pair{report.macro.f1, report.weighted.f1};
  };
}

TrainResult train(const CnnConfig& cfg, std::span<const Example> train_set,
                  std::span<const Example> test_set, const EvalFn& eval_fn,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training split");
  if (test_set.empty()) throw ValidationError("train: empty test split");

  TrainResult result;
  if (options.resume) {
    result.state = *options.resume;
  } else {
    result.state.params = init_params(cfg, cfg.seed);
  }
  auto& state = result.state;
  auto& report = result.report;
  report.selection = options.selection;
  report.seed = cfg.seed;

  std::vector<const EmbeddedDoc*> test_docs;
  std::vector<SentimentLabel> test_truth;
  for (const auto& ex : test_set) {
    test_docs.push_back(&ex.doc);
    test_truth.push_back(ex.label);
  }

  std::vector<std::size_t> order(train_set.size());
  std::vector<const EmbeddedDoc*> batch_docs;
  std::vector<std::size_t> batch_labels;
  const std::uint64_t first_epoch = state.epochs_done + 1;
  for (std::uint64_t epoch = first_epoch; epoch < first_epoch + cfg.epochs; ++epoch) {
    Rng rng(splitmix64(cfg.seed ^ splitmix64(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_docs.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_docs.push_back(&train_set[order[i]].doc);
        batch_labels.push_back(class_index(train_set[order[i]].label));
      }
      auto lg = loss_and_grad_impl(state.params, cfg, std::span<const EmbeddedDoc* const>(batch_docs),
                                   batch_labels, &rng, options.threads);
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(state.params, lg.grad, state.optimizer, cfg.learning_rate);
    }
    state.epochs_done = epoch;

    const auto predicted = predict_impl(state.params, cfg, test_docs, options.threads);
    const auto [macro, weighted] = eval_fn(test_truth, predicted);
    EpochRecord record{static_cast<std::size_t>(epoch),
                       loss_sum / static_cast<double>(train_set.size()), macro, weighted};
    if (!report.best_macro_epoch || macro > report.max_macro_f1) {
      report.max_macro_f1 = macro;
      report.best_macro_epoch = record.epoch;
    }
    if (!report.best_weighted_epoch || weighted > report.max_weighted_f1) {
      report.max_weighted_f1 = weighted;
      report.best_weighted_epoch = record.epoch;
    }
    report.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  return result;
}

void write_train_report_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,train_loss,test_macro_f1,test_weighted_f1\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_real(e.train_loss) << ',' << format_real(e.test_macro_f1)
        << ',' << format_real(e.test_weighted_f1) << '\n';
  }
}

void write_train_summary_csv(std::ostream& out, const TrainReport& report) {
  auto epoch = [](const std::optional<std::size_t>& e) {
    return e ? std::to_string(*e) : std::string();
  };
  out << "key,value\n";
  out << "seed," << report.seed << '\n';
  out << "selection,"
      << (report.selection == Selection::max_over_epochs ? "max_over_epochs" : "final_epoch")
      << '\n';
  out << "epochs," << report.epochs.size() << '\n';
  out << "max_macro_f1," << format_real(report.max_macro_f1) << '\n';
  out << "best_macro_epoch," << epoch(report.best_macro_epoch) << '\n';
  out << "max_weighted_f1," << format_real(report.max_weighted_f1) << '\n';
  out << "best_weighted_epoch," << epoch(report.best_weighted_epoch) << '\n';
  out << "reported_macro_f1," << format_real(report.reported_macro_f1()) << '\n';
  out << "reported_weighted_f1," << format_real(report.reported_weighted_f1()) << '\n';
}

SplitIndices train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace finsent::model
