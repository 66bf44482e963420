#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <absl/time/time.h>

#include "finsent/common.hpp"
#include "finsent/series.hpp"

namespace finsent::corpus {

struct Article {
  std::string id;
  std::string title;
  std::string description;
  std::string publisher;
  Timestamp published_at{};
  std::vector<std::string> tickers;  // uppercase
};

struct GoldLabel {
  std::string article_id;
  SentimentLabel label = SentimentLabel::neutral;
  std::string annotator;
};

/// Named time zone used to map publication instants to calendar dates.
class TimeZone {
 public:
  /// Throws ValidationError for names missing from the zoneinfo database.
  static TimeZone load(const std::string& name);
  static TimeZone utc();
  /// US/Eastern, so that article dates line up with NYSE trading days.
  static TimeZone market_default();

  Date local_date(Timestamp instant) const;
  const std::string& name() const noexcept { return name_; }

 private:
  TimeZone(std::string name, absl::TimeZone zone)
      : name_(std::move(name)), zone_(zone) {}

  std::string name_;
  absl::TimeZone zone_;
};

/// ISO-8601 with a 'Z' or numeric offset; fractional seconds optional.
Timestamp parse_timestamp(std::string_view text);

/// One JSON record per line with keys id, title, description, publisherName,
/// publishedAt and symbols. Blank lines are skipped, unknown keys ignored.
std::vector<Article> load_articles(const std::filesystem::path& path);
std::vector<Article> parse_articles(std::istream& in, const std::string& source);

/// CSV with header `article_id,annotator,label`.
std::vector<GoldLabel> load_labels(const std::filesystem::path& path);
std::vector<GoldLabel> parse_labels(std::istream& in, const std::string& source);

// ---------------------------------------------------------------------------
// Preprocessing

enum class Preset { m1, m2, m3, m4, m5 };

struct PipelineConfig {
  bool dash_removal = false;
  bool covid_embeddings = false;  // consumed by the embedding stage
  bool stopword_removal = false;
  bool percent_replacement = false;
  bool punctuation_removal = false;
  int description_word_cap = 25;

  /// Cumulative flag sets: M1 none; M2 dash + covid embeddings; M3 adds
  /// stopwords; M4 adds percent replacement; M5 adds punctuation removal.
  static PipelineConfig preset(Preset preset);

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Accepts "M1".."M5" (case-insensitive).
Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset preset);

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::vector<std::string> words);

  /// The 179-word English list shipped in data/stopwords_en.txt.
  static const StopwordList& english();

  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// One token per line; blank lines ignored; entries lowercased.
StopwordList load_stopwords(const std::filesystem::path& path);

struct TokenizedDoc {
  std::string article_id;
  std::vector<std::string> tokens;

  friend bool operator==(const TokenizedDoc&, const TokenizedDoc&) = default;
};

/// The characters removed by punctuation stripping. Note there is no comma.
inline constexpr std::string_view kPunctuationChars =
    "!\"#$%&'()*+\\-./:;<=>?@[]^_`{|}~";

/// Lowercases ASCII letters; other bytes are passed through.
std::string to_lower(std::string_view text);

/// Splits on ASCII and Unicode whitespace (UTF-8 encoded).
std::vector<std::string_view> split_whitespace(std::string_view text);

/// Keeps the first `cap` whitespace-delimited words (original spacing between
/// them preserved). A negative cap disables truncation.
std::string truncate_description(std::string_view description, int cap);

/// Lowercase + whitespace split.
std::vector<std::string> tokenize(std::string_view text);

/// Drops dash-only tokens and splits tokens at embedded runs of two or more
/// hyphens (and at en/em dashes). Single hyphens inside words are kept.
std::vector<std::string> remove_dashes(const std::vector<std::string>& tokens);

/// Rewrites [+|-]digits[.digits]% as {plus|minus,} number, "percent".
std::vector<std::string> replace_percentages(const std::vector<std::string>& tokens);

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& stopwords);

/// Removes every kPunctuationChars byte; tokens left empty are dropped.
std::vector<std::string> strip_punctuation(const std::vector<std::string>& tokens);

TokenizedDoc preprocess(std::string_view title, std::string_view description,
                        const PipelineConfig& cfg,
                        const StopwordList& stopwords = StopwordList::english());

TokenizedDoc preprocess(const Article& article, const PipelineConfig& cfg,
                        const StopwordList& stopwords = StopwordList::english());

// ---------------------------------------------------------------------------
// Statistics

struct LengthSummary {
  double mean = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
  std::size_t count = 0;  // number of texts summarized
};

struct WordCount {
  std::string word;
  std::size_t count = 0;
};

struct CorpusStats {
  std::size_t article_count = 0;
  std::size_t title_word_count = 0;
  std::size_t title_word_count_no_stopwords = 0;
  std::size_t vocab_size = 0;  // unique lowercase title tokens
  LengthSummary title_len;
  LengthSummary desc_len;  // over non-empty descriptions only
  std::vector<WordCount> top_words;  // no stopwords, no punctuation-only tokens
};

CorpusStats corpus_stats(const std::vector<Article>& articles,
                         const StopwordList& stopwords = StopwordList::english(),
                         std::size_t top_k = 20);

void write_stats_csv(std::ostream& out, const CorpusStats& stats);
void write_top_words_csv(std::ostream& out, const CorpusStats& stats);

enum class QueryMatch { token, substring };

struct QueryOptions {
  QueryMatch match = QueryMatch::token;
  /// Applied to title + full description before matching.
  PipelineConfig pipeline = {.description_word_cap = -1};
  TimeZone zone = TimeZone::market_default();
  const StopwordList* stopwords = nullptr;  // null: the built-in English list
};

struct QueryFrequency {
  DailySeries percent;  // 100 * matching / total, per day with posts
  DailySeries volume;   // total posts per day
};

QueryFrequency query_frequency(const std::vector<Article>& articles,
                               const std::set<std::string>& query_terms,
                               const QueryOptions& options = {});

/// `date,percent,volume`
void write_frequency_csv(std::ostream& out, const QueryFrequency& freq);

/// Maps a continuous score in [-1, 1] to a category; both cutoffs inclusive
/// (score <= lo is negative, score >= hi is positive).
SentimentLabel threshold_continuous(double score, double lo = -0.33, double hi = 0.33);

}  // namespace finsent::corpus
