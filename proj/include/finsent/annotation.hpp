#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "finsent/common.hpp"
#include "finsent/corpus.hpp"

namespace finsent::annotation {

/// Multi-annotator labels. `shared_ids` holds the articles labeled by every
/// annotator on the roster.
class AnnotationSet {
 public:
  /// `extra_annotators` adds roster entries that may have no records.
  /// Throws ValidationError on duplicate (article_id, annotator) pairs.
  explicit AnnotationSet(std::vector<corpus::GoldLabel> records,
                         const std::set<std::string>& extra_annotators = {});

  const std::vector<corpus::GoldLabel>& records() const noexcept { return records_; }
  const std::set<std::string>& annotators() const noexcept { return annotators_; }
  const std::set<std::string>& shared_ids() const noexcept { return shared_ids_; }

  std::optional<SentimentLabel> label(const std::string& article_id,
                                      const std::string& annotator) const;

 private:
  std::vector<corpus::GoldLabel> records_;
  std::set<std::string> annotators_;
  std::set<std::string> shared_ids_;
};

/// kappa = (p_o - p_e) / (1 - p_e) over the three sentiment classes. When
/// p_e == 1 the result is 1 if p_o == 1, else 0.
double cohens_kappa(std::span<const SentimentLabel> a, std::span<const SentimentLabel> b);

struct KappaMatrix {
  std::vector<std::string> annotators;  // sorted
  std::vector<std::vector<std::optional<double>>> values;  // diagonal empty
  std::size_t shared_count = 0;
};

KappaMatrix kappa_matrix(const AnnotationSet& set);

enum class AgreementBand { poor, slight, fair, moderate, substantial, almost_perfect };

/// Landis-Koch bands: <0 poor, [0,.2] slight, (.2,.4] fair, (.4,.6] moderate,
/// (.6,.8] substantial, (.8,1] almost perfect.
AgreementBand agreement_band(double kappa);
std::string_view to_string(AgreementBand band) noexcept;

/// Counts indexed by class_index().
using LabelCounts = std::array<std::size_t, kNumClasses>;

LabelCounts label_distribution(const AnnotationSet& set, const std::string& annotator);

struct GoldItem {
  std::string article_id;
  SentimentLabel label = SentimentLabel::neutral;

  friend bool operator==(const GoldItem&, const GoldItem&) = default;
};

/// One label per article from the non-excluded annotators, in order of first
/// appearance. Multiple labels are resolved by majority vote; ties go to
/// neutral.
std::vector<GoldItem> assemble_gold(const AnnotationSet& set,
                                    const std::set<std::string>& excluded_annotators = {});

/// `annotator_a,annotator_b,kappa,band,n_shared`
void write_agreement_csv(std::ostream& out, const KappaMatrix& matrix);
/// Human-readable matrix + bands.
void write_agreement_text(std::ostream& out, const KappaMatrix& matrix);
/// `annotator,negative,neutral,positive,total`
void write_distribution_csv(std::ostream& out, const AnnotationSet& set);
/// `article_id,label`
void write_gold_csv(std::ostream& out, const std::vector<GoldItem>& gold);

}  // namespace finsent::annotation
