#pragma once

#include <array>
#include <ostream>
#include <span>

#include "finsent/common.hpp"

namespace finsent::eval {

/// Rows are true classes, columns predicted, both by class_index().
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t at(SentimentLabel truth, SentimentLabel predicted) const {
    return counts[class_index(truth)][class_index(predicted)];
  }
  std::size_t total() const;
  std::size_t support(std::size_t true_class) const;
};

ConfusionMatrix confusion(std::span<const SentimentLabel> truth,
                          std::span<const SentimentLabel> predicted);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  std::array<Scores, kNumClasses> per_class;
  std::array<std::size_t, kNumClasses> support{};
  Scores macro;
  Scores weighted;
};

/// Zero-division yields 0 for the affected precision/recall/F1.
F1Report f1_report(const ConfusionMatrix& cm);

/// Ordinal error buckets on the negative < neutral < positive scale.
struct ErrorDecomposition {
  std::size_t correct = 0;
  // off by one
  std::size_t pred_neutral_true_negative = 0;  // acceptable
  std::size_t pred_neutral_true_positive = 0;  // acceptable
  std::size_t pred_negative_true_neutral = 0;  // unacceptable
  std::size_t pred_positive_true_neutral = 0;  // unacceptable
  // clear mispredictions
  std::size_t pred_positive_true_negative = 0;
  std::size_t pred_negative_true_positive = 0;

  std::size_t off_by_one() const {
    return pred_neutral_true_negative + pred_neutral_true_positive +
           pred_negative_true_neutral + pred_positive_true_neutral;
  }
  std::size_t acceptable() const { return pred_neutral_true_negative + pred_neutral_true_positive; }
  std::size_t unacceptable() const {
    return pred_negative_true_neutral + pred_positive_true_neutral;
  }
  std::size_t clear() const { return pred_positive_true_negative + pred_negative_true_positive; }
  std::size_t total() const { return correct + off_by_one() + clear(); }
};

ErrorDecomposition off_by_one(std::span<const SentimentLabel> truth,
                              std::span<const SentimentLabel> predicted);

/// `scope,class,precision,recall,f1,support`
void write_metrics_csv(std::ostream& out, const F1Report& report);
void write_metrics_text(std::ostream& out, const F1Report& report);
/// `true\predicted,negative,neutral,positive`
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
/// `bucket,count,fraction`
void write_errors_csv(std::ostream& out, const ErrorDecomposition& errors);

}  // namespace finsent::eval
