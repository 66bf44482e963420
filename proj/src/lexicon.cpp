#include "finsent/lexicon.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "finsent/csv.hpp"

namespace finsent::lexicon {

bool Lexicon::set(const std::string& token, double score) {
  if (!std::isfinite(score)) {
    throw ValidationError("lexicon score for '" + token + "' is not finite");
  }
  auto [it, inserted] = scores_.insert_or_assign(token, score);
  return !inserted;
}

std::optional<double> Lexicon::find(const std::string& token) const {
  auto it = scores_.find(token);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

Lexicon load_lexicon(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Lexicon lexicon(path.filename().string());
  std::string line;
  std::size_t line_no = 0;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(path.string(), line_no, "expected 'token<TAB>score'");
    }
    const std::string token = line.substr(0, tab);
    const auto end = line.find('\t', tab + 1);
    std::string field = line.substr(tab + 1, end == std::string::npos ? end : end - tab - 1);
    while (!field.empty() && field.back() == ' ') field.pop_back();
    double score = 0.0;
    const char* first = field.data();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), score);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
        !std::isfinite(score)) {
      throw ParseError(path.string(), line_no, "non-numeric score '" + field + "'");
    }
    if (lexicon.set(token, score) && warnings) {
      warnings->push_back(path.string() + ":" + std::to_string(line_no) +
                          ": duplicate token '" + token + "', keeping later value");
    }
  }
  return lexicon;
}

std::vector<double> score_tokens(const Lexicon& lexicon, std::span<const std::string> tokens) {
  std::vector<double> scores;
  scores.reserve(tokens.size());
  for (const auto& token : tokens) scores.push_back(lexicon.find(token).value_or(0.0));
  return scores;
}

SentimentLabel vadermax_predict(const Lexicon& lexicon, std::span<const std::string> tokens,
                                double neutral_band) {
  if (neutral_band < 0.0) throw ValidationError("vadermax_predict: neutral_band must be >= 0");
  double best = 0.0;
  bool positive = false;
  bool negative = false;
  for (const auto& token : tokens) {
    const auto score = lexicon.find(token);
    if (!score || *score == 0.0) continue;
    const double magnitude = std::abs(*score);
    if (magnitude > best) {
      best = magnitude;
      positive = *score > 0;
      negative = *score < 0;
    } else if (magnitude == best) {
      positive = positive || *score > 0;
      negative = negative || *score < 0;
    }
  }
  if (best <= neutral_band || (positive && negative)) return SentimentLabel::neutral;
  return positive ? SentimentLabel::positive : SentimentLabel::negative;
}

std::array<float, kSummaryFeatureCount> summary_features(const Lexicon& lexicon,
                                                         std::span<const std::string> tokens) {
  std::array<float, kSummaryFeatureCount> out{};
  if (tokens.empty()) return out;
  std::size_t pos = 0;
  std::size_t neg = 0;
  double sum = 0.0;
  for (const auto& token : tokens) {
    const double s = lexicon.find(token).value_or(0.0);
    sum += s;
    if (s > 0) ++pos;
    if (s < 0) ++neg;
  }
  const auto n = static_cast<double>(tokens.size());
  out[0] = static_cast<float>(static_cast<double>(pos) / n);
  out[1] = static_cast<float>(static_cast<double>(neg) / n);
  out[2] = static_cast<float>(static_cast<double>(tokens.size() - pos - neg) / n);
  out[3] = static_cast<float>(sum / std::sqrt(sum * sum + 15.0));
  return out;
}

}  // namespace finsent::lexicon
