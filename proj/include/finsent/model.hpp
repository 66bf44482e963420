#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finsent/common.hpp"
#include "finsent/embeddings.hpp"
#include "finsent/random.hpp"

namespace finsent::model {

using embeddings::EmbeddedDoc;

/// Sentence CNN: per-width 1-D convolutions -> ReLU -> global max pool ->
/// concat (+ document features) -> dropout -> dense + ReLU -> dropout ->
/// dense -> softmax.
struct CnnConfig {
  std::size_t feature_dim = 301;
  std::size_t max_len = 40;
  std::vector<std::size_t> filter_widths{3, 4, 5};
  std::size_t filters_per_width = 128;
  std::size_t hidden = 256;
  double dropout_pooled = 0.5;
  double dropout_hidden = 0.5;
  std::size_t doc_feature_dim = 0;  // appended to the pooled vector
  std::size_t classes = kNumClasses;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 42;

  /// Throws ValidationError when any size is zero, a filter is wider than
  /// max_len, a dropout rate is outside [0, 1), or classes != 3.
  void validate() const;

  std::size_t pooled_dim() const {
    return filter_widths.size() * filters_per_width + doc_feature_dim;
  }

  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

template <typename Real>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<Real> values;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// All trainable tensors, in the fixed order
///   conv_w[g], conv_b[g] for each filter width g, dense1_w, dense1_b,
///   dense2_w, dense2_b.
/// conv_w[g] is filters x (width * feature_dim), i.e. a row-major
/// [filters][width][feature_dim] kernel.
template <typename Real>
class BasicCnnParams {
 public:
  BasicCnnParams() = default;
  /// Zero-filled tensors shaped for `cfg`.
  explicit BasicCnnParams(const CnnConfig& cfg);

  std::vector<Tensor<Real>> tensors;

  std::size_t group_count() const { return (tensors.size() - 4) / 2; }
  Tensor<Real>& conv_w(std::size_t g) { return tensors[2 * g]; }
  const Tensor<Real>& conv_w(std::size_t g) const { return tensors[2 * g]; }
  Tensor<Real>& conv_b(std::size_t g) { return tensors[2 * g + 1]; }
  const Tensor<Real>& conv_b(std::size_t g) const { return tensors[2 * g + 1]; }
  Tensor<Real>& dense1_w() { return tensors[tensors.size() - 4]; }
  const Tensor<Real>& dense1_w() const { return tensors[tensors.size() - 4]; }
  Tensor<Real>& dense1_b() { return tensors[tensors.size() - 3]; }
  const Tensor<Real>& dense1_b() const { return tensors[tensors.size() - 3]; }
  Tensor<Real>& dense2_w() { return tensors[tensors.size() - 2]; }
  const Tensor<Real>& dense2_w() const { return tensors[tensors.size() - 2]; }
  Tensor<Real>& dense2_b() { return tensors[tensors.size() - 1]; }
  const Tensor<Real>& dense2_b() const { return tensors[tensors.size() - 1]; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Same shapes, every value zero.
  BasicCnnParams zeros_like() const;

  template <typename To>
  BasicCnnParams<To> cast() const {
    BasicCnnParams<To> out;
    for (const auto& t : tensors) {
      out.tensors.push_back({t.name, t.shape, std::vector<To>(t.values.begin(), t.values.end())});
    }
    return out;
  }

  friend bool operator==(const BasicCnnParams&, const BasicCnnParams&) = default;
};

using CnnParams = BasicCnnParams<float>;

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out)); a conv kernel
/// of width w has fan_in = w * feature_dim and fan_out = w * filters), zero
/// biases. Deterministic in `seed`.
CnnParams init_params(const CnnConfig& cfg, std::uint64_t seed);

using Probabilities = std::array<double, kNumClasses>;

/// Class probabilities per document. `train_mode` enables dropout and then
/// requires `rng`.
template <typename Real>
std::vector<Probabilities> forward(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                   std::span<const EmbeddedDoc> batch, bool train_mode = false,
                                   Rng* rng = nullptr, std::size_t threads = 1);

template <typename Real>
struct LossAndGrad {
  double loss = 0.0;  // mean cross-entropy
  BasicCnnParams<Real> grad;
};

/// Mean cross-entropy over the batch and its gradient. `labels` are class
/// indices (0 negative, 1 neutral, 2 positive). Dropout is applied only when
/// `dropout_rng` is non-null. Per-example gradients are summed in example
/// order, so results do not depend on `threads`.
template <typename Real>
LossAndGrad<Real> loss_and_grad(const BasicCnnParams<Real>& params, const CnnConfig& cfg,
                                std::span<const EmbeddedDoc> batch,
                                std::span<const std::size_t> labels, Rng* dropout_rng = nullptr,
                                std::size_t threads = 1);

/// Argmax class per document, dropout off; ties go to the lowest class index.
std::vector<SentimentLabel> predict(const CnnParams& params, const CnnConfig& cfg,
                                    std::span<const EmbeddedDoc> docs, std::size_t threads = 1);

std::vector<SentimentLabel> allneutral_predict(std::size_t n);

// ---------------------------------------------------------------------------
// Training

struct AdamState {
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  CnnParams m;
  CnnParams v;
};

/// One Adam update of `params` with `grad`; `state` moments are created on
/// first use.
void adam_step(CnnParams& params, const CnnParams& grad, AdamState& state, double learning_rate);

struct Example {
  EmbeddedDoc doc;
  SentimentLabel label = SentimentLabel::neutral;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean mini-batch loss during the epoch
  double test_macro_f1 = 0.0;
  double test_weighted_f1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class Selection {
  max_over_epochs,  // best test-set F1 over all epochs (peeks at the test set)
  final_epoch,      // F1 after the last epoch
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double max_macro_f1 = 0.0;
  double max_weighted_f1 = 0.0;
  std::optional<std::size_t> best_macro_epoch;
  std::optional<std::size_t> best_weighted_epoch;
  Selection selection = Selection::max_over_epochs;
  std::uint64_t seed = 0;

  /// The pair reported under `selection`.
  double reported_macro_f1() const;
  double reported_weighted_f1() const;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Returns (macro F1, weighted F1).
using EvalFn = std::function<std::pair<double, double>(std::span<const SentimentLabel> truth,
                                                       std::span<const SentimentLabel> predicted)>;

EvalFn default_eval_fn();

struct TrainState {
  CnnParams params;
  AdamState optimizer;
  std::uint64_t epochs_done = 0;
};

struct TrainOptions {
  std::size_t threads = 1;
  Selection selection = Selection::max_over_epochs;
  /// Continue from a previous state (e.g. a loaded checkpoint).
  const TrainState* resume = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  TrainReport report;
};

/// Mini-batch Adam for cfg.epochs epochs (counting from the resumed epoch).
/// Epoch e shuffles and draws dropout masks from an Rng seeded by
/// (cfg.seed, e), so resumed runs reproduce uninterrupted ones.
TrainResult train(const CnnConfig& cfg, std::span<const Example> train_set,
                  std::span<const Example> test_set, const EvalFn& eval_fn = default_eval_fn(),
                  const TrainOptions& options = {});

/// `epoch,train_loss,test_macro_f1,test_weighted_f1`, one row per epoch.
void write_train_report_csv(std::ostream& out, const TrainReport& report);
/// `key,value` rows: seed, selection, maxima, their epochs, reported pair.
void write_train_summary_csv(std::ostream& out, const TrainReport& report);

/// Deterministic split: shuffles indices with `seed` and assigns the first
/// round(test_fraction * n) to the test set.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
SplitIndices train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints (layout documented in docs/checkpoint-format.md)

struct Checkpoint {
  CnnConfig config;
  TrainState state;
  std::map<std::string, std::string> metadata;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace finsent::model
