#include "finsent/series.hpp"

#include <algorithm>
#include <cmath>

namespace finsent {

DailySeries::DailySeries(std::vector<DatedValue> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].value)) {
      throw ValidationError("non-finite series value on " + format_date(points_[i].date));
    }
    if (i > 0 && points_[i].date <= points_[i - 1].date) {
      throw ValidationError("series dates must strictly increase; " +
                            format_date(points_[i].date) + " follows " +
                            format_date(points_[i - 1].date));
    }
  }
}

std::vector<Date> DailySeries::dates() const {
  std::vector<Date> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.date);
  return out;
}

std::vector<double> DailySeries::values() const {
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.value);
  return out;
}

std::optional<double> DailySeries::at(Date date) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), date,
                             [](const DatedValue& p, Date d) { return p.date < d; });
  if (it == points_.end() || it->date != date) return std::nullopt;
  return it->value;
}

void write_series_csv(std::ostream& out, const DailySeries& series,
                      std::string_view value_header) {
  out << "date," << value_header << '\n';
  for (const auto& p : series.points()) {
    out << format_date(p.date) << ',' << format_real(p.value) << '\n';
  }
}

}  // namespace finsent
