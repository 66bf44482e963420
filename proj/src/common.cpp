#include "finsent/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace finsent {

ParseError::ParseError(std::string source, std::size_t line,
                       const std::string& detail)
    : Error(source + ":" + std::to_string(line) + ": " + detail),
      source_(std::move(source)),
      line_(line) {}

SentimentLabel label_from_int(int value) {
  if (value < -1 || value > 1) {
    throw ValidationError("sentiment label must be -1, 0 or 1, got " +
                          std::to_string(value));
  }
  return static_cast<SentimentLabel>(value);
}

SentimentLabel parse_label(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' ||
                           text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ValidationError("not a sentiment label: '" + std::string(text) + "'");
  }
  return label_from_int(value);
}

std::string_view to_string(SentimentLabel label) noexcept {
  switch (label) {
    case SentimentLabel::negative:
      return "negative";
    case SentimentLabel::neutral:
      return "neutral";
    case SentimentLabel::positive:
      return "positive";
  }
  return "neutral";
}

Date parse_date(std::string_view text) {
  auto fail = [&] {
    return ValidationError("invalid date '" + std::string(text) +
                           "', expected YYYY-MM-DD");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
  auto number = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || ptr != text.data() + pos + len) throw fail();
    return v;
  };
  const std::chrono::year_month_day ymd{
      std::chrono::year{number(0, 4)},
      std::chrono::month{static_cast<unsigned>(number(5, 2))},
      std::chrono::day{static_cast<unsigned>(number(8, 2))}};
  if (!ymd.ok()) throw fail();
  return Date{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

bool is_weekend(Date date) noexcept {
  const std::chrono::weekday wd{date};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace finsent
