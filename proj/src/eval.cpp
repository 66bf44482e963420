#include "finsent/eval.hpp"

#include <cstdio>
#include <string>

namespace finsent::eval {

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("label vectors differ in length (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t true_class) const {
  std::size_t n = 0;
  for (auto c : counts[true_class]) n += c;
  return n;
}

ConfusionMatrix confusion(std::span<const SentimentLabel> truth,
                          std::span<const SentimentLabel> predicted) {
  check_lengths(truth.size(), predicted.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cm.counts[class_index(truth[i])][class_index(predicted[i])];
  }
  return cm;
}

F1Report f1_report(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw ValidationError("f1_report: empty confusion matrix");
  F1Report report;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < kNumClasses; ++t) predicted += cm.counts[t][k];
    const auto tp = static_cast<double>(cm.counts[k][k]);
    report.support[k] = cm.support(k);
    auto& s = report.per_class[k];
    s.precision = safe_div(tp, static_cast<double>(predicted));
    s.recall = safe_div(tp, static_cast<double>(report.support[k]));
    s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);

    const double w = static_cast<double>(report.support[k]) / static_cast<double>(total);
    report.macro.precision += s.precision / kNumClasses;
    report.macro.recall += s.recall / kNumClasses;
    report.macro.f1 += s.f1 / kNumClasses;
    report.weighted.precision += w * s.precision;
    report.weighted.recall += w * s.recall;
    report.weighted.f1 += w * s.f1;
  }
  return report;
}

ErrorDecomposition off_by_one(std::span<const SentimentLabel> truth,
                              std::span<const SentimentLabel> predicted) {
  check_lengths(truth.size(), predicted.size());
  using L = SentimentLabel;
  ErrorDecomposition d;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const L t = truth[i];
    const L p = predicted[i];
    if (t == p) {
      ++d.correct;
    } else if (p == L::neutral) {
      ++(t == L::negative ? d.pred_neutral_true_negative : d.pred_neutral_true_positive);
    } else if (t == L::neutral) {
      ++(p == L::negative ? d.pred_negative_true_neutral : d.pred_positive_true_neutral);
    } else if (p == L::positive) {
      ++d.pred_positive_true_negative;
    } else {
      ++d.pred_negative_true_positive;
    }
  }
  return d;
}

void write_metrics_csv(std::ostream& out, const F1Report& r) {
  out << "scope,class,precision,recall,f1,support\n";
  std::size_t total = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto& s = r.per_class[k];
    total += r.support[k];
    out << "class," << to_string(label_from_index(k)) << ',' << format_real(s.precision) << ','
        << format_real(s.recall) << ',' << format_real(s.f1) << ',' << r.support[k] << '\n';
  }
  out << "macro,all," << format_real(r.macro.precision) << ',' << format_real(r.macro.recall)
      << ',' << format_real(r.macro.f1) << ',' << total << '\n';
  out << "weighted,all," << format_real(r.weighted.precision) << ','
      << format_real(r.weighted.recall) << ',' << format_real(r.weighted.f1) << ',' << total
      << '\n';
}

void write_metrics_text(std::ostream& out, const F1Report& r) {
  char buf[128];
  out << "            precision  recall      f1  support\n";
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto& s = r.per_class[k];
    std::snprintf(buf, sizeof buf, "%-10s %10.3f %7.3f %7.3f %8zu\n",
                  std::string(to_string(label_from_index(k))).c_str(), s.precision, s.recall,
                  s.f1, r.support[k]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %10.3f %7.3f %7.3f\n", "macro", r.macro.precision,
                r.macro.recall, r.macro.f1);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s %10.3f %7.3f %7.3f\n", "weighted", r.weighted.precision,
                r.weighted.recall, r.weighted.f1);
  out << buf;
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\predicted,negative,neutral,positive\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    out << to_string(label_from_index(t));
    for (std::size_t p = 0; p < kNumClasses; ++p) out << ',' << cm.counts[t][p];
    out << '\n';
  }
}

void write_errors_csv(std::ostream& out, const ErrorDecomposition& d) {
  const auto total = static_cast<double>(d.total());
  auto row = [&](std::string_view name, std::size_t count) {
    out << name << ',' << count << ',' << format_real(total > 0 ? count / total : 0.0) << '\n';
  };
  out << "bucket,count,fraction\n";
  row("correct", d.correct);
  row("off_by_one", d.off_by_one());
  row("pred_neutral_true_negative", d.pred_neutral_true_negative);
  row("pred_neutral_true_positive", d.pred_neutral_true_positive);
  row("pred_negative_true_neutral", d.pred_negative_true_neutral);
  row("pred_positive_true_neutral", d.pred_positive_true_neutral);
  row("acceptable", d.acceptable());
  row("unacceptable", d.unacceptable());
  row("clear", d.clear());
  row("pred_positive_true_negative", d.pred_positive_true_negative);
  row("pred_negative_true_positive", d.pred_negative_true_positive);
}

}  // namespace finsent::eval
