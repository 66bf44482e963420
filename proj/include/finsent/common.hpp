#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace finsent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input at a known location (file + 1-based line number).
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& detail);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Well-formed input that violates a domain invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kNumClasses = 3;

/// Categorical sentiment. The underlying value is the numeric label used in
/// label files and in daily aggregation.
enum class SentimentLabel : int { negative = -1, neutral = 0, positive = 1 };

inline constexpr std::array<SentimentLabel, kNumClasses> kAllLabels{
    SentimentLabel::negative, SentimentLabel::neutral, SentimentLabel::positive};

constexpr int to_int(SentimentLabel label) noexcept {
  return static_cast<int>(label);
}

/// Dense class index: negative=0, neutral=1, positive=2.
constexpr std::size_t class_index(SentimentLabel label) noexcept {
  return static_cast<std::size_t>(static_cast<int>(label) + 1);
}

constexpr SentimentLabel label_from_index(std::size_t index) noexcept {
  return static_cast<SentimentLabel>(static_cast<int>(index) - 1);
}

/// Throws ValidationError unless value is -1, 0 or 1.
SentimentLabel label_from_int(int value);

/// Parses "-1", "0", "1" (surrounding blanks allowed).
SentimentLabel parse_label(std::string_view text);

std::string_view to_string(SentimentLabel label) noexcept;

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

/// Strict YYYY-MM-DD.
Date parse_date(std::string_view text);
std::string format_date(Date date);
bool is_weekend(Date date) noexcept;

/// Shortest round-trippable decimal rendering, locale independent.
std::string format_real(double value);

}  // namespace finsent
