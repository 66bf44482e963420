#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finsent/common.hpp"

namespace finsent::lexicon {

/// Word-level valence scores (VADER-style, roughly [-4, +4]).
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::string name) : name_(std::move(name)) {}

  /// Inserts or replaces. Throws ValidationError for non-finite scores.
  /// Returns true when an existing entry was replaced.
  bool set(const std::string& token, double score);

  std::optional<double> find(const std::string& token) const;
  std::size_t size() const noexcept { return scores_.size(); }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::unordered_map<std::string, double> scores_;
};

/// Lines of `token<TAB>score[<TAB>...]`; extra columns (as in the VADER
/// distribution file) are ignored. Later duplicates win and are reported
/// in `warnings` when given.
Lexicon load_lexicon(const std::filesystem::path& path,
                     std::vector<std::string>* warnings = nullptr);

/// Per-token valence, 0.0 for tokens not in the lexicon.
std::vector<double> score_tokens(const Lexicon& lexicon, std::span<const std::string> tokens);

/// Decides by the hit of largest absolute valence: neutral if none exceeds
/// `neutral_band`, or if equal-magnitude hits of both signs tie for largest.
SentimentLabel vadermax_predict(const Lexicon& lexicon, std::span<const std::string> tokens,
                                double neutral_band = 0.0);

inline constexpr std::size_t kSummaryFeatureCount = 4;

/// Document-level summary: fraction of tokens with positive, negative and
/// zero valence, and the normalized valence sum s / sqrt(s^2 + 15).
/// An empty token list gives all zeros.
std::array<float, kSummaryFeatureCount> summary_features(const Lexicon& lexicon,
                                                         std::span<const std::string> tokens);

}  // namespace finsent::lexicon
