#include "finsent/marketcorr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "finsent/csv.hpp"

namespace finsent::marketcorr {

namespace {

constexpr std::string_view kMarketHeader = "Date,Open,High,Low,Close,Adj Close,Volume";

double parse_price(const std::string& field, const std::string& source, std::size_t line,
                   const char* column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError(source, line, std::string("bad ") + column + " value '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<MarketBar> parse_market_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!csv::read_line(in, line)) throw ParseError(source, 1, "empty market file");
  if (!line.empty() && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != kMarketHeader) {
    throw ParseError(source, 1, "expected header '" + std::string(kMarketHeader) + "'");
  }
  std::vector<MarketBar> bars;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 7) {
      throw ParseError(source, line_no, "expected 7 fields, got " + std::to_string(f.size()));
    }
    MarketBar bar;
    try {
      bar.date = parse_date(f[0]);
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
    bar.open = parse_price(f[1], source, line_no, "Open");
    bar.high = parse_price(f[2], source, line_no, "High");
    bar.low = parse_price(f[3], source, line_no, "Low");
    bar.close = parse_price(f[4], source, line_no, "Close");
    bar.adj_close = parse_price(f[5], source, line_no, "Adj Close");
    auto [ptr, ec] = std::from_chars(f[6].data(), f[6].data() + f[6].size(), bar.volume);
    if (f[6].empty() || ec != std::errc{} || ptr != f[6].data() + f[6].size()) {
      throw ParseError(source, line_no, "bad Volume value '" + f[6] + "'");
    }
    if (bar.low > bar.open || bar.low > bar.close || bar.open > bar.high || bar.close > bar.high) {
      throw ValidationError(source + ":" + std::to_string(line_no) +
                            ": prices violate low <= open, close <= high");
    }
    if (!bars.empty() && bar.date <= bars.back().date) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": date " + f[0] +
                            " does not follow " + format_date(bars.back().date));
    }
    bars.push_back(bar);
  }
  return bars;
}

std::vector<MarketBar> load_market_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return parse_market_csv(in, path.string());
}

PriceField parse_price_field(std::string_view name) {
  if (name == "close") return PriceField::close;
  if (name == "adj_close") return PriceField::adj_close;
  if (name == "volume") return PriceField::volume;
  if (name == "open") return PriceField::open;
  if (name == "high") return PriceField::high;
  if (name == "low") return PriceField::low;
  throw ValidationError("unknown price field '" + std::string(name) +
                        "', expected close|adj_close|volume|open|high|low");
}

DailySeries bar_series(std::span<const MarketBar> bars, PriceField field) {
  std::vector<DatedValue> points;
  points.reserve(bars.size());
  for (const auto& b : bars) {
    double v = 0.0;
    switch (field) {
      case PriceField::close: v = b.close; break;
      case PriceField::adj_close: v = b.adj_close; break;
      case PriceField::volume: v = static_cast<double>(b.volume); break;
      case PriceField::open: v = b.open; break;
      case PriceField::high: v = b.high; break;
      case PriceField::low: v = b.low; break;
    }
    points.push_back({b.date, v});
  }
  return DailySeries(std::move(points));
}

DailySeries daily_sentiment(std::span<const Date> dates, std::span<const SentimentLabel> labels) {
  if (dates.size() != labels.size()) {
    throw ValidationError("daily_sentiment: " + std::to_string(dates.size()) + " dates but " +
                          std::to_string(labels.size()) + " labels");
  }
  std::map<Date, std::pair<long long, std::size_t>> per_day;
  for (std::size_t i = 0; i < dates.size(); ++i) {
    auto& [sum, count] = per_day[dates[i]];
    sum += to_int(labels[i]);
    ++count;
  }
  std::vector<DatedValue> points;
  for (const auto& [date, acc] : per_day) {
    points.push_back({date, static_cast<double>(acc.first) / static_cast<double>(acc.second)});
  }
  return DailySeries(std::move(points));
}

DailySeries daily_sentiment(std::span<const corpus::Article> articles,
                            std::span<const SentimentLabel> predictions,
                            const corpus::TimeZone& zone) {
  if (articles.size() != predictions.size()) {
    throw ValidationError("daily_sentiment: need one prediction per article");
  }
  std::vector<Date> dates;
  dates.reserve(articles.size());
  for (const auto& a : articles) dates.push_back(zone.local_date(a.published_at));
  return daily_sentiment(dates, predictions);
}

DailySeries rolling_mean(const DailySeries& series, std::size_t window, WarmUp warm_up) {
  if (window == 0) throw ValidationError("rolling_mean: window must be >= 1");
  std::vector<DatedValue> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (warm_up == WarmUp::drop && i + 1 < window) continue;
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = first; k <= i; ++k) sum += series[k].value;
    out.push_back({series[i].date, sum / static_cast<double>(i - first + 1)});
  }
  return DailySeries(std::move(out));
}

DailySeries rolling_mean_calendar(const DailySeries& series, std::size_t window) {
  if (window == 0) throw ValidationError("rolling_mean_calendar: window must be >= 1");
  std::vector<DatedValue> out;
  out.reserve(series.size());
  std::size_t first = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Date cutoff = series[i].date - std::chrono::days{static_cast<int>(window)};
    while (series[first].date <= cutoff) ++first;
    double sum = 0.0;
    for (std::size_t k = first; k <= i; ++k) sum += series[k].value;
    out.push_back({series[i].date, sum / static_cast<double>(i - first + 1)});
  }
  return DailySeries(std::move(out));
}

DailySeries drop_non_trading(const DailySeries& series) {
  std::vector<DatedValue> out;
  for (const auto& p : series.points()) {
    if (!is_weekend(p.date)) out.push_back(p);
  }
  return DailySeries(std::move(out));
}

AlignedPair align(const DailySeries& a, const DailySeries& b) {
  AlignedPair out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].date < b[j].date) {
      ++i;
    } else if (b[j].date < a[i].date) {
      ++j;
    } else {
      out.dates.push_back(a[i].date);
      out.a.push_back(a[i].value);
      out.b.push_back(b[j].value);
      ++i;
      ++j;
    }
  }
  if (out.dates.empty()) throw ValidationError("align: series share no dates (empty intersection)");
  return out;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson_r: inputs differ in length");
  if (x.size() < 2) throw ValidationError("pearson_r: need at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw ValidationError("pearson_r: correlation undefined for a constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport correlation_report(const DailySeries& sentiment,
                                     std::span<const NamedSeries> market,
                                     const CorrelationOptions& options) {
  CorrelationReport report;
  report.raw_sentiment = drop_non_trading(sentiment);
  if (options.basis == SmoothingBasis::trading_days) {
    report.smoothed_sentiment = rolling_mean(report.raw_sentiment, options.window, options.warm_up);
  } else {
    auto smoothed = drop_non_trading(rolling_mean_calendar(sentiment, options.window));
    if (options.warm_up == WarmUp::drop && !sentiment.empty()) {
      const Date ready = sentiment[0].date + std::chrono::days{static_cast<int>(options.window) - 1};
      std::vector<DatedValue> kept;
      for (const auto& p : smoothed.points()) {
        if (p.date >= ready) kept.push_back(p);
      }
      smoothed = DailySeries(std::move(kept));
    }
    report.smoothed_sentiment = std::move(smoothed);
  }

  auto correlate = [&](const std::string& name, const DailySeries& a, const DailySeries& b) {
    const auto pair = align(a, b);
    report.rows.push_back({name, pearson_r(pair.a, pair.b), pair.dates.size()});
  };

  std::map<std::string, DailySeries> by_name;
  for (const auto& m : market) {
    const auto trading = drop_non_trading(m.series);
    if (!by_name.emplace(m.name, trading).second) {
      throw ValidationError("duplicate market series name '" + m.name + "'");
    }
    correlate(m.name + " vs sentiment_raw", trading, report.raw_sentiment);
    correlate(m.name + " vs sentiment_smoothed", trading, report.smoothed_sentiment);
  }
  for (const auto& [a, b] : options.market_pairs) {
    auto ia = by_name.find(a);
    auto ib = by_name.find(b);
    if (ia == by_name.end() || ib == by_name.end()) {
      throw ValidationError("market pair refers to unknown series '" +
                            (ia == by_name.end() ? a : b) + "'");
    }
    correlate(a + " vs " + b, ia->second, ib->second);
  }
  return report;
}

void write_correlation_csv(std::ostream& out, const CorrelationReport& report) {
  out << "pair,r,n_days\n";
  for (const auto& row : report.rows) {
    out << csv::escape(row.pair) << ',' << format_real(row.r) << ',' << row.n_days << '\n';
  }
}

TickerSubset filter_by_tickers(std::span<const corpus::Article> articles,
                               const std::set<std::string>& tickers) {
  if (tickers.empty()) throw ValidationError("filter_by_tickers: empty ticker set");
  std::set<std::string> wanted;
  for (const auto& t : tickers) {
    std::string upper = t;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    wanted.insert(upper);
  }
  TickerSubset subset;
  for (const auto& a : articles) {
    const bool hit = std::any_of(a.tickers.begin(), a.tickers.end(),
                                 [&](const std::string& t) { return wanted.count(t) != 0; });
    if (hit) subset.articles.push_back(a);
  }
  subset.count = subset.articles.size();
  subset.percent = articles.empty()
                       ? 0.0
                       : 100.0 * static_cast<double>(subset.count) / static_cast<double>(articles.size());
  return subset;
}

}  // namespace finsent::marketcorr
