#include "finsent/corpus.hpp"

#include <absl/time/civil_time.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "finsent/csv.hpp"

namespace finsent::corpus {

namespace {

constexpr const char* kEnglishStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
    "you're", "you've", "you'll", "you'd", "your", "yours", "yourself",
    "yourselves", "he", "him", "his", "himself", "she", "she's", "her", "hers",
    "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being",
    "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of",
    "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "to", "from", "up", "down",
    "in", "out", "on", "off", "over", "under", "again", "further", "then",
    "once", "here", "there", "when", "where", "why", "how", "all", "any",
    "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor",
    "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can",
    "will", "just", "don", "don't", "should", "should've", "now", "d", "ll",
    "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't",
    "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't",
    "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn",
    "mustn't", "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't",
    "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't",
};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string to_upper(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Length in bytes of the whitespace sequence starting at text[i], or 0.
std::size_t whitespace_length(std::string_view text, std::size_t i) {
  const auto byte = [&](std::size_t k) -> unsigned char {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0;
  };
  const unsigned char b0 = byte(0);
  if (b0 == ' ' || (b0 >= 0x09 && b0 <= 0x0D)) return 1;
  if (b0 == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
  if (b0 == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;  // U+1680
  if (b0 == 0xE2 && byte(1) == 0x80) {
    const unsigned char b2 = byte(2);
    // U+2000..U+200A, U+2028, U+2029, U+202F
    if ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF) return 3;
  }
  if (b0 == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (b0 == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

// Length of an en dash (U+2013) or em dash (U+2014) at text[i], or 0.
std::size_t long_dash_length(std::string_view text, std::size_t i) {
  if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
      static_cast<unsigned char>(text[i + 1]) == 0x80) {
    const auto b2 = static_cast<unsigned char>(text[i + 2]);
    if (b2 == 0x93 || b2 == 0x94) return 3;
  }
  return 0;
}

bool is_dash_only(std::string_view token) {
  if (token.empty()) return false;
  std::size_t i = 0;
  while (i < token.size()) {
    if (token[i] == '-') {
      ++i;
    } else if (auto n = long_dash_length(token, i)) {
      i += n;
    } else {
      return false;
    }
  }
  return true;
}

bool is_ascii_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_punctuation(char c) {
  return kPunctuationChars.find(c) != std::string_view::npos;
}

bool is_punctuation_only(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

// Appends the percent-expanded pieces of `token` to `out`.
void expand_percent(std::string_view token, std::vector<std::string>& out) {
  for (std::size_t start = 0; start < token.size(); ++start) {
    const bool boundary = start == 0 || !is_ascii_alnum(token[start - 1]);
    if (!boundary) continue;
    std::size_t pos = start;
    std::string_view sign;
    if (token[pos] == '+' || token[pos] == '-') {
      sign = token[pos] == '+' ? "plus" : "minus";
      ++pos;
    } else if (start > 0 && token[start - 1] == '.') {
      continue;  // fractional tail of an unmatched number
    }
    const std::size_t digits_begin = pos;
    while (pos < token.size() && is_digit(token[pos])) ++pos;
    if (pos == digits_begin) continue;
    if (pos + 1 < token.size() && token[pos] == '.' && is_digit(token[pos + 1])) {
      ++pos;
      while (pos < token.size() && is_digit(token[pos])) ++pos;
    }
    if (pos >= token.size() || token[pos] != '%') continue;

    if (start > 0) out.emplace_back(token.substr(0, start));
    if (!sign.empty()) out.emplace_back(sign);
    out.emplace_back(token.substr(digits_begin, pos - digits_begin));
    out.emplace_back("percent");
    if (pos + 1 < token.size()) expand_percent(token.substr(pos + 1), out);
    return;
  }
  out.emplace_back(token);
}

Date to_date(absl::CivilDay day) {
  return Date{std::chrono::year_month_day{
      std::chrono::year{static_cast<int>(day.year())},
      std::chrono::month{static_cast<unsigned>(day.month())},
      std::chrono::day{static_cast<unsigned>(day.day())}}};
}

std::string json_string_field(const nlohmann::json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw Error(std::string("field '") + key + "' must be a string");
}

}  // namespace

// ---------------------------------------------------------------------------

TimeZone TimeZone::load(const std::string& name) {
  absl::TimeZone zone;
  if (!absl::LoadTimeZone(name, &zone)) {
    throw ValidationError("unknown time zone '" + name + "'");
  }
  return TimeZone(name, zone);
}

TimeZone TimeZone::utc() { return TimeZone("UTC", absl::UTCTimeZone()); }

TimeZone TimeZone::market_default() {
  static const TimeZone eastern = [] {
    absl::TimeZone zone;
    if (absl::LoadTimeZone("America/New_York", &zone)) {
      return TimeZone("America/New_York", zone);
    }
    // No zoneinfo database: fall back to EST without DST.
    return TimeZone("EST", absl::FixedTimeZone(-5 * 3600));
  }();
  return eastern;
}

Date TimeZone::local_date(Timestamp instant) const {
  const absl::Time t = absl::FromUnixMicros(instant.time_since_epoch().count());
  return to_date(absl::ToCivilDay(t, zone_));
}

Timestamp parse_timestamp(std::string_view text) {
  const std::string input(trim(text));
  static constexpr const char* kFormats[] = {
      "%Y-%m-%dT%H:%M:%E*S%Ez", "%Y-%m-%d %H:%M:%E*S%Ez", "%Y-%m-%dT%H:%M%Ez",
      "%Y-%m-%dT%H:%M:%E*S",    "%Y-%m-%d %H:%M:%E*S",    "%Y-%m-%d"};
  for (const char* format : kFormats) {
    absl::Time t;
    std::string err;
    if (absl::ParseTime(format, input, absl::UTCTimeZone(), &t, &err)) {
      return Timestamp{std::chrono::microseconds{absl::ToUnixMicros(t)}};
    }
  }
  throw ValidationError("invalid ISO-8601 timestamp '" + input + "'");
}

std::vector<Article> parse_articles(std::istream& in, const std::string& source) {
  std::vector<Article> articles;
  std::unordered_map<std::string, std::size_t> seen;  // id -> line
  std::string line;
  std::size_t line_no = 0;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(source, line_no, "record is not a JSON object");

    Article article;
    try {
      if (!record.contains("id")) throw Error("missing 'id'");
      article.id = json_string_field(record, "id");
      if (!record.contains("title")) throw Error("missing 'title'");
      article.title = json_string_field(record, "title");
      if (trim(article.title).empty()) throw Error("empty 'title'");
      article.description = json_string_field(record, "description");
      article.publisher = json_string_field(record, "publisherName");
      if (!record.contains("publishedAt")) throw Error("missing 'publishedAt'");
      article.published_at = parse_timestamp(json_string_field(record, "publishedAt"));
      if (auto it = record.find("symbols"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) throw Error("'symbols' must be an array");
        for (const auto& sym : *it) {
          if (!sym.is_string()) throw Error("'symbols' entries must be strings");
          article.tickers.push_back(to_upper(trim(sym.get<std::string>())));
        }
      }
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (article.id.empty()) throw ParseError(source, line_no, "empty 'id'");

    auto [it, inserted] = seen.emplace(article.id, line_no);
    if (!inserted) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate article id '" +
                            article.id + "' (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    articles.push_back(std::move(article));
  }
  return articles;
}

std::vector<Article> load_articles(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_articles(in, path.string());
}

std::vector<GoldLabel> parse_labels(std::istream& in, const std::string& source) {
  std::string line;
  if (!csv::read_line(in, line) || trim(line) != "article_id,annotator,label") {
    throw ParseError(source, 1, "expected header 'article_id,annotator,label'");
  }
  std::vector<GoldLabel> labels;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != 3) {
      throw ParseError(source, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    }
    GoldLabel label;
    label.article_id = std::string(trim(fields[0]));
    label.annotator = std::string(trim(fields[1]));
    if (label.article_id.empty() || label.annotator.empty()) {
      throw ParseError(source, line_no, "empty article_id or annotator");
    }
    try {
      label.label = parse_label(fields[2]);
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!seen.emplace(label.article_id, label.annotator).second) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate label for (" +
                            label.article_id + ", " + label.annotator + ")");
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

std::vector<GoldLabel> load_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_labels(in, path.string());
}

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::preset(Preset preset) {
  PipelineConfig cfg;
  const int level = static_cast<int>(preset);  // 0 == M1
  cfg.dash_removal = level >= 1;
  cfg.covid_embeddings = level >= 1;
  cfg.stopword_removal = level >= 2;
  cfg.percent_replacement = level >= 3;
  cfg.punctuation_removal = level >= 4;
  return cfg;
}

Preset parse_preset(std::string_view name) {
  if (name.size() == 2 && (name[0] == 'M' || name[0] == 'm') && name[1] >= '1' &&
      name[1] <= '5') {
    return static_cast<Preset>(name[1] - '1');
  }
  throw ValidationError("unknown preprocessing preset '" + std::string(name) +
                        "', expected M1..M5");
}

std::string_view preset_name(Preset preset) {
  static constexpr std::string_view kNames[] = {"M1", "M2", "M3", "M4", "M5"};
  return kNames[static_cast<int>(preset)];
}

StopwordList::StopwordList(std::vector<std::string> words) {
  for (auto& w : words) words_.insert(to_lower(w));
}

const StopwordList& StopwordList::english() {
  static const StopwordList list(
      std::vector<std::string>(std::begin(kEnglishStopwords), std::end(kEnglishStopwords)));
  return list;
}

bool StopwordList::contains(std::string_view token) const {
  return words_.find(std::string(token)) != words_.end();
}

StopwordList load_stopwords(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> words;
  std::string line;
  while (csv::read_line(in, line)) {
    auto word = trim(line);
    if (!word.empty()) words.emplace_back(word);
  }
  return StopwordList(std::move(words));
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  std::size_t word_start = std::string_view::npos;
  while (i < text.size()) {
    if (const auto ws = whitespace_length(text, i)) {
      if (word_start != std::string_view::npos) {
        words.push_back(text.substr(word_start, i - word_start));
        word_start = std::string_view::npos;
      }
      i += ws;
    } else {
      if (word_start == std::string_view::npos) word_start = i;
      ++i;
    }
  }
  if (word_start != std::string_view::npos) words.push_back(text.substr(word_start));
  return words;
}

std::string truncate_description(std::string_view description, int cap) {
  const auto words = split_whitespace(description);
  if (cap < 0 || words.size() <= static_cast<std::size_t>(cap)) {
    return std::string(description);
  }
  if (cap == 0) return {};
  const char* begin = words.front().data();
  const char* end = words[static_cast<std::size_t>(cap) - 1].data() +
                    words[static_cast<std::size_t>(cap) - 1].size();
  return std::string(begin, end);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (auto word : split_whitespace(text)) tokens.push_back(to_lower(word));
  return tokens;
}

std::vector<std::string> remove_dashes(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (is_dash_only(token)) continue;
    std::string piece;
    auto flush = [&] {
      if (!piece.empty() && !is_dash_only(piece)) out.push_back(piece);
      piece.clear();
    };
    std::size_t i = 0;
    while (i < token.size()) {
      if (auto n = long_dash_length(token, i)) {
        flush();
        i += n;
      } else if (token[i] == '-' && i + 1 < token.size() && token[i + 1] == '-') {
        flush();
        while (i < token.size() && token[i] == '-') ++i;
      } else {
        piece.push_back(token[i]);
        ++i;
      }
    }
    flush();
  }
  return out;
}

std::vector<std::string> replace_percentages(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (token.find('%') == std::string::npos) {
      out.push_back(token);
    } else {
      expand_percent(token, out);
    }
  }
  return out;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (!stopwords.contains(token)) out.push_back(token);
  }
  return out;
}

std::vector<std::string> strip_punctuation(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    std::string kept;
    kept.reserve(token.size());
    for (char c : token) {
      if (!is_punctuation(c)) kept.push_back(c);
    }
    if (!kept.empty()) out.push_back(std::move(kept));
  }
  return out;
}

TokenizedDoc preprocess(std::string_view title, std::string_view description,
                        const PipelineConfig& cfg, const StopwordList& stopwords) {
  std::string text(title);
  const std::string truncated = truncate_description(description, cfg.description_word_cap);
  if (!truncated.empty()) {
    text.push_back(' ');
    text += truncated;
  }
  auto tokens = tokenize(text);
  if (cfg.dash_removal) tokens = remove_dashes(tokens);
  if (cfg.percent_replacement) {
    tokens = replace_percentages(tokens);
    // Splitting can expose a bare sign prefix such as "-" in "-+5%".
    if (cfg.dash_removal) tokens = remove_dashes(tokens);
  }
  if (cfg.stopword_removal) tokens = remove_stopwords(tokens, stopwords);
  if (cfg.punctuation_removal) {
    tokens = strip_punctuation(tokens);
    // "i." only becomes a stopword once its period is gone.
    if (cfg.stopword_removal) tokens = remove_stopwords(tokens, stopwords);
  }
  return TokenizedDoc{{}, std::move(tokens)};
}

TokenizedDoc preprocess(const Article& article, const PipelineConfig& cfg,
                        const StopwordList& stopwords) {
  auto doc = preprocess(article.title, article.description, cfg, stopwords);
  doc.article_id = article.id;
  return doc;
}

// ---------------------------------------------------------------------------

CorpusStats corpus_stats(const std::vector<Article>& articles, const StopwordList& stopwords,
                         std::size_t top_k) {
  if (articles.empty()) throw ValidationError("corpus_stats: empty corpus");
  CorpusStats stats;
  stats.article_count = articles.size();
  std::unordered_map<std::string, std::size_t> vocab;
  std::unordered_map<std::string, std::size_t> content_counts;

  auto accumulate = [](LengthSummary& s, std::size_t n) {
    if (s.count == 0 || n < s.min) s.min = n;
    if (s.count == 0 || n > s.max) s.max = n;
    s.mean += static_cast<double>(n);
    ++s.count;
  };

  for (const auto& article : articles) {
    const auto tokens = tokenize(article.title);
    accumulate(stats.title_len, tokens.size());
    stats.title_word_count += tokens.size();
    for (const auto& token : tokens) {
      ++vocab[token];
      if (stopwords.contains(token)) continue;
      ++stats.title_word_count_no_stopwords;
      if (!is_punctuation_only(token)) ++content_counts[token];
    }
    const auto desc_words = split_whitespace(article.description).size();
    if (desc_words > 0) accumulate(stats.desc_len, desc_words);
  }
  if (stats.title_len.count) stats.title_len.mean /= static_cast<double>(stats.title_len.count);
  if (stats.desc_len.count) stats.desc_len.mean /= static_cast<double>(stats.desc_len.count);
  stats.vocab_size = vocab.size();

  stats.top_words.reserve(content_counts.size());
  for (auto& [word, count] : content_counts) stats.top_words.push_back({word, count});
  std::sort(stats.top_words.begin(), stats.top_words.end(),
            [](const WordCount& a, const WordCount& b) {
              return a.count != b.count ? a.count > b.count : a.word < b.word;
            });
  if (stats.top_words.size() > top_k) stats.top_words.resize(top_k);
  return stats;
}

void write_stats_csv(std::ostream& out, const CorpusStats& s) {
  out << "metric,value\n";
  auto row = [&](std::string_view name, const std::string& value) {
    out << name << ',' << value << '\n';
  };
  row("article_count", std::to_string(s.article_count));
  row("title_word_count", std::to_string(s.title_word_count));
  row("title_word_count_no_stopwords", std::to_string(s.title_word_count_no_stopwords));
  row("vocab_size", std::to_string(s.vocab_size));
  row("title_len_mean", format_real(s.title_len.mean));
  row("title_len_min", std::to_string(s.title_len.min));
  row("title_len_max", std::to_string(s.title_len.max));
  row("desc_count", std::to_string(s.desc_len.count));
  row("desc_len_mean", format_real(s.desc_len.mean));
  row("desc_len_min", std::to_string(s.desc_len.min));
  row("desc_len_max", std::to_string(s.desc_len.max));
}

void write_top_words_csv(std::ostream& out, const CorpusStats& stats) {
  out << "rank,word,count\n";
  for (std::size_t i = 0; i < stats.top_words.size(); ++i) {
    out << i + 1 << ',' << csv::escape(stats.top_words[i].word) << ','
        << stats.top_words[i].count << '\n';
  }
}

QueryFrequency query_frequency(const std::vector<Article>& articles,
                               const std::set<std::string>& query_terms,
                               const QueryOptions& options) {
  if (query_terms.empty()) throw ValidationError("query_frequency: empty query term set");
  std::set<std::string> terms;
  for (const auto& t : query_terms) terms.insert(to_lower(t));

  auto matches = [&](const std::vector<std::string>& tokens) {
    for (const auto& token : tokens) {
      if (options.match == QueryMatch::token) {
        if (terms.count(token)) return true;
      } else {
        for (const auto& term : terms) {
          if (token.find(term) != std::string::npos) return true;
        }
      }
    }
    return false;
  };

  std::map<Date, std::pair<std::size_t, std::size_t>> per_day;  // (matching, total)
  for (const auto& article : articles) {
    const auto doc = preprocess(article.title, article.description, options.pipeline,
                                options.stopwords ? *options.stopwords : StopwordList::english());
    auto& [hit, total] = per_day[options.zone.local_date(article.published_at)];
    ++total;
    if (matches(doc.tokens)) ++hit;
  }

  std::vector<DatedValue> percent;
  std::vector<DatedValue> volume;
  for (const auto& [date, counts] : per_day) {
    percent.push_back({date, 100.0 * static_cast<double>(counts.first) /
                                 static_cast<double>(counts.second)});
    volume.push_back({date, static_cast<double>(counts.second)});
  }
  return {DailySeries(std::move(percent)), DailySeries(std::move(volume))};
}

void write_frequency_csv(std::ostream& out, const QueryFrequency& freq) {
  out << "date,percent,volume\n";
  for (std::size_t i = 0; i < freq.percent.size(); ++i) {
    out << format_date(freq.percent[i].date) << ',' << format_real(freq.percent[i].value) << ','
        << static_cast<long long>(freq.volume[i].value) << '\n';
  }
}

SentimentLabel threshold_continuous(double score, double lo, double hi) {
  if (!(lo < hi)) throw ValidationError("threshold_continuous: requires lo < hi");
  if (!(score >= -1.0 && score <= 1.0)) {
    throw ValidationError("continuous score " + format_real(score) + " outside [-1, 1]");
  }
  if (score <= lo) return SentimentLabel::negative;
  if (score >= hi) return SentimentLabel::positive;
  return SentimentLabel::neutral;
}

}  // namespace finsent::corpus
