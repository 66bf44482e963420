#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "finsent/common.hpp"

namespace finsent {

struct DatedValue {
  Date date;
  double value = 0.0;

  friend bool operator==(const DatedValue&, const DatedValue&) = default;
};

/// Date-indexed real series with strictly increasing dates and finite values.
class DailySeries {
 public:
  DailySeries() = default;

  /// Throws ValidationError on unordered/duplicate dates or non-finite values.
  explicit DailySeries(std::vector<DatedValue> points);

  std::span<const DatedValue> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const DatedValue& operator[](std::size_t i) const { return points_[i]; }

  std::vector<Date> dates() const;
  std::vector<double> values() const;
  std::optional<double> at(Date date) const;

  friend bool operator==(const DailySeries&, const DailySeries&) = default;

 private:
  std::vector<DatedValue> points_;
};

/// Writes `date,<value_header>` rows.
void write_series_csv(std::ostream& out, const DailySeries& series,
                      std::string_view value_header = "value");

}  // namespace finsent
