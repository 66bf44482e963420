#include "finsent/annotation.hpp"

#include <cstdio>
#include <map>
#include <unordered_map>

#include "finsent/csv.hpp"

namespace finsent::annotation {

AnnotationSet::AnnotationSet(std::vector<corpus::GoldLabel> records,
                             const std::set<std::string>& extra_annotators)
    : records_(std::move(records)), annotators_(extra_annotators) {
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, std::size_t> per_article;
  for (const auto& r : records_) {
    if (!seen.emplace(r.article_id, r.annotator).second) {
      throw ValidationError("duplicate label for (" + r.article_id + ", " + r.annotator + ")");
    }
    annotators_.insert(r.annotator);
    ++per_article[r.article_id];
  }
  for (const auto& [id, count] : per_article) {
    if (count == annotators_.size()) shared_ids_.insert(id);
  }
}

std::optional<SentimentLabel> AnnotationSet::label(const std::string& article_id,
                                                   const std::string& annotator) const {
  for (const auto& r : records_) {
    if (r.article_id == article_id && r.annotator == annotator) return r.label;
  }
  return std::nullopt;
}

double cohens_kappa(std::span<const SentimentLabel> a, std::span<const SentimentLabel> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cohens_kappa: label vectors differ in length (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("cohens_kappa: empty label vectors");
  std::array<std::size_t, kNumClasses> count_a{};
  std::array<std::size_t, kNumClasses> count_b{};
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++count_a[class_index(a[i])];
    ++count_b[class_index(b[i])];
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<double>(a.size());
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p_e += (static_cast<double>(count_a[k]) / n) * (static_cast<double>(count_b[k]) / n);
  }
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

KappaMatrix kappa_matrix(const AnnotationSet& set) {
  if (set.annotators().size() < 2) {
    throw ValidationError("kappa_matrix: need at least two annotators");
  }
  if (set.shared_ids().empty()) {
    throw ValidationError("kappa_matrix: no articles are shared by all annotators");
  }
  // annotator -> labels over shared ids, in shared-id order
  std::unordered_map<std::string, std::map<std::string, SentimentLabel>> by_annotator;
  for (const auto& r : set.records()) {
    if (set.shared_ids().count(r.article_id)) by_annotator[r.annotator][r.article_id] = r.label;
  }
  KappaMatrix m;
  m.annotators.assign(set.annotators().begin(), set.annotators().end());
  m.shared_count = set.shared_ids().size();
  std::vector<std::vector<SentimentLabel>> vectors;
  for (const auto& name : m.annotators) {
    std::vector<SentimentLabel> v;
    for (const auto& [id, label] : by_annotator[name]) v.push_back(label);
    vectors.push_back(std::move(v));
  }
  const auto k = m.annotators.size();
  m.values.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double kappa = cohens_kappa(vectors[i], vectors[j]);
      m.values[i][j] = kappa;
      m.values[j][i] = kappa;
    }
  }
  return m;
}

AgreementBand agreement_band(double kappa) {
  if (!(kappa >= -1.0 && kappa <= 1.0)) {
    throw ValidationError("agreement_band: kappa " + format_real(kappa) + " outside [-1, 1]");
  }
  if (kappa < 0.0) return AgreementBand::poor;
  if (kappa <= 0.20) return AgreementBand::slight;
  if (kappa <= 0.40) return AgreementBand::fair;
  if (kappa <= 0.60) return AgreementBand::moderate;
  if (kappa <= 0.80) return AgreementBand::substantial;
  return AgreementBand::almost_perfect;
}

std::string_view to_string(AgreementBand band) noexcept {
  switch (band) {
    case AgreementBand::poor:
      return "poor";
    case AgreementBand::slight:
      return "slight";
    case AgreementBand::fair:
      return "fair";
    case AgreementBand::moderate:
      return "moderate";
    case AgreementBand::substantial:
      return "substantial";
    case AgreementBand::almost_perfect:
      return "almost-perfect";
  }
  return "poor";
}

LabelCounts label_distribution(const AnnotationSet& set, const std::string& annotator) {
  if (!set.annotators().count(annotator)) {
    throw ValidationError("unknown annotator '" + annotator + "'");
  }
  LabelCounts counts{};
  for (const auto& r : set.records()) {
    if (r.annotator == annotator) ++counts[class_index(r.label)];
  }
  return counts;
}

std::vector<GoldItem> assemble_gold(const AnnotationSet& set,
                                    const std::set<std::string>& excluded_annotators) {
  std::size_t remaining = 0;
  for (const auto& a : set.annotators()) {
    if (!excluded_annotators.count(a)) ++remaining;
  }
  if (remaining == 0) throw ValidationError("assemble_gold: every annotator is excluded");

  std::vector<std::string> order;
  std::unordered_map<std::string, LabelCounts> votes;
  for (const auto& r : set.records()) {
    if (excluded_annotators.count(r.annotator)) continue;
    auto [it, inserted] = votes.try_emplace(r.article_id, LabelCounts{});
    if (inserted) order.push_back(r.article_id);
    ++it->second[class_index(r.label)];
  }
  std::vector<GoldItem> gold;
  gold.reserve(order.size());
  for (const auto& id : order) {
    const auto& c = votes[id];
    std::size_t best = 0;
    bool tie = false;
    for (std::size_t k = 1; k < kNumClasses; ++k) {
      if (c[k] > c[best]) {
        best = k;
        tie = false;
      } else if (c[k] == c[best]) {
        tie = true;
      }
    }
    gold.push_back({id, tie ? SentimentLabel::neutral : label_from_index(best)});
  }
  return gold;
}

void write_agreement_csv(std::ostream& out, const KappaMatrix& m) {
  out << "annotator_a,annotator_b,kappa,band,n_shared\n";
  for (std::size_t i = 0; i < m.annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < m.annotators.size(); ++j) {
      const double kappa = *m.values[i][j];
      out << csv::escape(m.annotators[i]) << ',' << csv::escape(m.annotators[j]) << ','
          << format_real(kappa) << ',' << to_string(agreement_band(kappa)) << ','
          << m.shared_count << '\n';
    }
  }
}

void write_agreement_text(std::ostream& out, const KappaMatrix& m) {
  char buf[64];
  out << "Pairwise Cohen's kappa over " << m.shared_count << " shared articles\n\n";
  out << "        ";
  for (const auto& name : m.annotators) {
    std::snprintf(buf, sizeof buf, "%8.8s", name.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < m.annotators.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-8.8s", m.annotators[i].c_str());
    out << buf;
    for (std::size_t j = 0; j < m.annotators.size(); ++j) {
      if (j <= i) {
        out << "       -";
      } else {
        std::snprintf(buf, sizeof buf, "%8.3f", *m.values[i][j]);
        out << buf;
      }
    }
    out << '\n';
  }
  out << '\n';
  for (std::size_t i = 0; i < m.annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < m.annotators.size(); ++j) {
      const double kappa = *m.values[i][j];
      std::snprintf(buf, sizeof buf, "%.3f", kappa);
      out << '(' << m.annotators[i] << ", " << m.annotators[j] << ") " << buf << ' '
          << to_string(agreement_band(kappa)) << '\n';
    }
  }
}

void write_distribution_csv(std::ostream& out, const AnnotationSet& set) {
  out << "annotator,negative,neutral,positive,total\n";
  for (const auto& name : set.annotators()) {
    const auto c = label_distribution(set, name);
    out << csv::escape(name) << ',' << c[0] << ',' << c[1] << ',' << c[2] << ','
        << c[0] + c[1] + c[2] << '\n';
  }
}

void write_gold_csv(std::ostream& out, const std::vector<GoldItem>& gold) {
  out << "article_id,label\n";
  for (const auto& item : gold) {
    out << csv::escape(item.article_id) << ',' << to_int(item.label) << '\n';
  }
}

}  // namespace finsent::annotation
