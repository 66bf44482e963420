#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "finsent/common.hpp"
#include "finsent/corpus.hpp"
#include "finsent/series.hpp"

namespace finsent::marketcorr {

struct MarketBar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  std::uint64_t volume = 0;
};

/// Yahoo Finance daily download: header exactly
/// `Date,Open,High,Low,Close,Adj Close,Volume`, dates strictly increasing.
std::vector<MarketBar> load_market_csv(const std::filesystem::path& path);
std::vector<MarketBar> parse_market_csv(std::istream& in, const std::string& source);

enum class PriceField { close, adj_close, volume, open, high, low };

PriceField parse_price_field(std::string_view name);
DailySeries bar_series(std::span<const MarketBar> bars, PriceField field = PriceField::close);

/// Mean numeric label (-1/0/+1) per local calendar day.
DailySeries daily_sentiment(std::span<const corpus::Article> articles,
                            std::span<const SentimentLabel> predictions,
                            const corpus::TimeZone& zone = corpus::TimeZone::market_default());

/// Same, from already-dated labels.
DailySeries daily_sentiment(std::span<const Date> dates, std::span<const SentimentLabel> labels);

enum class WarmUp {
  expanding,  // position i averages the last min(i + 1, window) entries
  drop,       // the first window - 1 entries are removed
};

/// Trailing mean over `window` series entries.
DailySeries rolling_mean(const DailySeries& series, std::size_t window,
                         WarmUp warm_up = WarmUp::expanding);

/// Trailing mean over the `window` calendar days ending at each entry's date
/// (entries dated within (d - window, d]).
DailySeries rolling_mean_calendar(const DailySeries& series, std::size_t window);

/// Removes Saturday and Sunday entries.
DailySeries drop_non_trading(const DailySeries& series);

struct AlignedPair {
  std::vector<Date> dates;
  std::vector<double> a;
  std::vector<double> b;
};

/// Inner join on date. Throws ValidationError on an empty intersection.
AlignedPair align(const DailySeries& a, const DailySeries& b);

/// Sample Pearson correlation. Throws ValidationError on length mismatch,
/// fewer than two points, or a constant input.
double pearson_r(std::span<const double> x, std::span<const double> y);

struct NamedSeries {
  std::string name;
  DailySeries series;
};

enum class SmoothingBasis {
  trading_days,   // weekends removed first, window counts remaining entries
  calendar_days,  // smoothed over calendar days, weekends removed afterwards
};

struct CorrelationOptions {
  std::size_t window = 10;
  WarmUp warm_up = WarmUp::expanding;
  SmoothingBasis basis = SmoothingBasis::trading_days;
  /// Market-vs-market pairs by series name, e.g. {"sp500_volume", "vix_close"}.
  std::vector<std::pair<std::string, std::string>> market_pairs;
};

struct CorrelationRow {
  std::string pair;
  double r = 0.0;
  std::size_t n_days = 0;
};

struct CorrelationReport {
  DailySeries raw_sentiment;       // weekdays only
  DailySeries smoothed_sentiment;  // weekdays only
  std::vector<CorrelationRow> rows;
};

/// For each market series: `<name> vs sentiment_raw` and
/// `<name> vs sentiment_smoothed`, then the requested market pairs as
/// `<a> vs <b>`.
CorrelationReport correlation_report(const DailySeries& sentiment,
                                     std::span<const NamedSeries> market,
                                     const CorrelationOptions& options = {});

/// `pair,r,n_days`
void write_correlation_csv(std::ostream& out, const CorrelationReport& report);

struct TickerSubset {
  std::vector<corpus::Article> articles;
  std::size_t count = 0;
  double percent = 0.0;  // of the input corpus
};

/// Articles tagged with at least one of `tickers` (case-insensitive).
TickerSubset filter_by_tickers(std::span<const corpus::Article> articles,
                               const std::set<std::string>& tickers);

}  // namespace finsent::marketcorr
