#include <doctest.h>

#include <fstream>
#include <sstream>

#include "finsent/corpus.hpp"
#include "finsent/random.hpp"
#include "print.hpp"

using namespace finsent;
using namespace finsent::corpus;
using Tokens = std::vector<std::string>;

namespace {

std::vector<Article> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_articles(in, "mem.jsonl");
}

std::string record(const std::string& id, const std::string& title,
                   const std::string& when = "2020-03-09T14:30:00Z") {
  return R"({"id":")" + id + R"(","title":")" + title +
         R"(","description":"","publisherName":"P","publishedAt":")" + when +
         R"(","symbols":["aapl"]})";
}

Tokens pre(const std::string& title, const PipelineConfig& cfg, const std::string& desc = "") {
  return preprocess(title, desc, cfg).tokens;
}

}  // namespace

TEST_CASE("articles load in file order") {
  const auto articles = parse(record("x", "One") + "\n" + record("y", "Two") + "\n\n" +
                              record("z", "Three") + "\n");
  REQUIRE(articles.size() == 3);
  CHECK(articles[0].id == "x");
  CHECK(articles[2].title == "Three");
  CHECK(articles[0].tickers == std::vector<std::string>{"AAPL"});
  CHECK(parse("").empty());
}

TEST_CASE("article errors carry line numbers") {
  SUBCASE("missing title names line 2") {
    const std::string bad =
        R"({"id":"b","description":"","publisherName":"P","publishedAt":"2020-03-09T14:30:00Z"})";
    try {
      parse(record("a", "Fine") + "\n" + bad + "\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("title") != std::string::npos);
    }
  }
  SUBCASE("malformed JSON") {
    CHECK_THROWS_AS(parse("{not json}\n"), ParseError);
  }
  SUBCASE("blank title") {
    CHECK_THROWS_AS(parse(record("a", "   ") + "\n"), ParseError);
  }
  SUBCASE("duplicate id") {
    CHECK_THROWS_AS(parse(record("a", "One") + "\n" + record("a", "Two") + "\n"), ValidationError);
  }
  SUBCASE("bad timestamp") {
    CHECK_THROWS(parse(record("a", "One", "yesterday") + "\n"));
  }
}

TEST_CASE("fixture articles load") {
  const auto articles = load_articles(FINSENT_FIXTURE_DIR "/articles.jsonl");
  CHECK(articles.size() == 10);
  CHECK(articles[2].description.empty());
}

TEST_CASE("timestamps map to Eastern dates") {
  const auto zone = TimeZone::market_default();
  CHECK(zone.name() == "America/New_York");
  // 03:30 UTC on a Monday is still Sunday evening in New York.
  CHECK(format_date(zone.local_date(parse_timestamp("2020-03-09T03:30:00Z"))) == "2020-03-08");
  CHECK(format_date(TimeZone::utc().local_date(parse_timestamp("2020-03-09T03:30:00Z"))) ==
        "2020-03-09");
  CHECK(parse_timestamp("2020-03-09T10:30:00-04:00") == parse_timestamp("2020-03-09T14:30:00Z"));
  CHECK(parse_timestamp("2020-03-09T14:30:00.250Z") - parse_timestamp("2020-03-09T14:30:00Z") ==
        std::chrono::milliseconds(250));
  CHECK_THROWS_AS(TimeZone::load("Mars/Olympus"), ValidationError);
}

TEST_CASE("labels file") {
  const auto labels = load_labels(FINSENT_FIXTURE_DIR "/labels.csv");
  CHECK(labels.size() == 20);
  CHECK(labels[0].article_id == "a1");
  CHECK(labels[0].label == SentimentLabel::negative);
  std::istringstream dup("article_id,annotator,label\na,X,1\na,X,0\n");
  CHECK_THROWS_AS(parse_labels(dup, "dup.csv"), ValidationError);
  std::istringstream bad("article_id,annotator,label\na,X,2\n");
  CHECK_THROWS_AS(parse_labels(bad, "bad.csv"), ParseError);
  std::istringstream header("id,label\n");
  CHECK_THROWS_AS(parse_labels(header, "h.csv"), ParseError);
}

TEST_CASE("presets are the cumulative flag sets") {
  const auto m1 = PipelineConfig::preset(Preset::m1);
  const auto m2 = PipelineConfig::preset(Preset::m2);
  const auto m3 = PipelineConfig::preset(Preset::m3);
  const auto m4 = PipelineConfig::preset(Preset::m4);
  const auto m5 = PipelineConfig::preset(Preset::m5);
  CHECK(m1 == PipelineConfig{});
  CHECK(m2 == PipelineConfig{.dash_removal = true, .covid_embeddings = true});
  CHECK(m3 == PipelineConfig{.dash_removal = true, .covid_embeddings = true, .stopword_removal = true});
  CHECK(m4 == PipelineConfig{.dash_removal = true,
                             .covid_embeddings = true,
                             .stopword_removal = true,
                             .percent_replacement = true});
  CHECK(m5 == PipelineConfig{.dash_removal = true,
                             .covid_embeddings = true,
                             .stopword_removal = true,
                             .percent_replacement = true,
                             .punctuation_removal = true});
  for (auto p : {m1, m2, m3, m4, m5}) CHECK(p.description_word_cap == 25);
  CHECK(parse_preset("m4") == Preset::m4);
  CHECK(preset_name(Preset::m5) == "M5");
  CHECK_THROWS_AS(parse_preset("M6"), ValidationError);
}

TEST_CASE("stopword list") {
  const auto& en = StopwordList::english();
  CHECK(en.size() == 179);
  for (const char* w : {"the", "a", "of", "i", "mightn't", "wouldn", "y"}) CHECK(en.contains(w));
  CHECK_FALSE(en.contains("market"));
  CHECK_FALSE(en.contains("The"));
  const auto file = load_stopwords(FINSENT_DATA_DIR "/stopwords_en.txt");
  CHECK(file.size() == en.size());
  std::ifstream in(FINSENT_DATA_DIR "/stopwords_en.txt");
  std::string w;
  while (std::getline(in, w)) CHECK(en.contains(w));
}

TEST_CASE("description truncation") {
  std::string thirty;
  for (int i = 1; i <= 30; ++i) thirty += "w" + std::to_string(i) + (i < 30 ? " " : "");
  const auto cut = truncate_description(thirty, 25);
  CHECK(split_whitespace(cut).size() == 25);
  CHECK(cut.substr(cut.size() - 3) == "w25");
  CHECK(truncate_description("", 25).empty());
  const std::string ten = "one two three four five six seven eight nine ten";
  CHECK(truncate_description(ten, 25) == ten);
  CHECK(truncate_description(ten, 0).empty());
  CHECK(truncate_description(thirty, -1) == thirty);
}

TEST_CASE("tokenizer splits on unicode whitespace and lowercases ASCII") {
  CHECK(tokenize("Stocks Fall\tHard Now") == Tokens{"stocks", "fall", "hard", "now"});
  CHECK(tokenize("   ").empty());
  CHECK(to_lower("ÉA") == "Éa");
}

TEST_CASE("percent replacement") {
  CHECK(replace_percentages({"+5%"}) == Tokens{"plus", "5", "percent"});
  CHECK(replace_percentages({"-5%"}) == Tokens{"minus", "5", "percent"});
  CHECK(replace_percentages({"5%"}) == Tokens{"5", "percent"});
  CHECK(replace_percentages({"2.5%"}) == Tokens{"2.5", "percent"});
  CHECK(replace_percentages({"(+2.5%)"}) == Tokens{"(", "plus", "2.5", "percent", ")"});
  // A sign directly after a non-alphanumeric boundary counts as a sign.
  CHECK(replace_percentages({"5%-10%"}) == Tokens{"5", "percent", "minus", "10", "percent"});
  CHECK(replace_percentages({"100%,"}) == Tokens{"100", "percent", ","});
  CHECK(replace_percentages({"%"}) == Tokens{"%"});
  CHECK(replace_percentages({"abc%"}) == Tokens{"abc%"});
  CHECK(replace_percentages({"market"}) == Tokens{"market"});
  const auto m4 = PipelineConfig::preset(Preset::m4);
  CHECK(pre("+5%", m4) == Tokens{"plus", "5", "percent"});
}

TEST_CASE("dash removal") {
  CHECK(remove_dashes({"stocks", "---", "fall"}) == Tokens{"stocks", "fall"});
  CHECK(remove_dashes({"-", "--", "—", "–"}).empty());
  CHECK(remove_dashes({"covid-19"}) == Tokens{"covid-19"});
  CHECK(remove_dashes({"up--down"}) == Tokens{"up", "down"});
  CHECK(remove_dashes({"2008—investors"}) == Tokens{"2008", "investors"});
  CHECK(remove_dashes({"-5%"}) == Tokens{"-5%"});
}

TEST_CASE("punctuation stripping uses the exact character set") {
  CHECK(kPunctuationChars.size() == 31);
  CHECK(kPunctuationChars.find(',') == std::string_view::npos);
  const std::string all(kPunctuationChars);
  CHECK(strip_punctuation({all}).empty());
  CHECK(strip_punctuation({"100,000"}) == Tokens{"100,000"});
  CHECK(strip_punctuation({"u.s.", "fall;", "(nyse:aapl)"}) == Tokens{"us", "fall", "nyseaapl"});
  CHECK(strip_punctuation({"café!"}) == Tokens{"café"});
}

TEST_CASE("stopword removal") {
  const auto& en = StopwordList::english();
  CHECK(remove_stopwords({"the", "market", "is", "higher"}, en) == Tokens{"market", "higher"});
}

TEST_CASE("preprocess golden outputs") {
  const auto m1 = PipelineConfig::preset(Preset::m1);
  const auto m5 = PipelineConfig::preset(Preset::m5);
  CHECK(pre("", m5).empty());
  CHECK(pre("Stocks --- fall; the U.S. market", m5) == Tokens{"stocks", "fall", "us", "market"});
  CHECK(pre("Stocks --- fall; the U.S. market", m1) ==
        Tokens{"stocks", "---", "fall;", "the", "u.s.", "market"});
  CHECK(pre("Stocks --- fall; the U.S. market", PipelineConfig::preset(Preset::m2)) ==
        Tokens{"stocks", "fall;", "the", "u.s.", "market"});
  CHECK(pre("Stocks --- fall; the U.S. market", PipelineConfig::preset(Preset::m3)) ==
        Tokens{"stocks", "fall;", "u.s.", "market"});
  CHECK(pre("Apple shares rise +2.5% after strong iPhone sales", m5, "The company beat expectations.") ==
        Tokens{"apple", "shares", "rise", "plus", "25", "percent", "strong", "iphone", "sales",
               "company", "beat", "expectations"});
  // Truncation counts raw words before any removal.
  PipelineConfig capped = m5;
  capped.description_word_cap = 2;
  CHECK(pre("Title", capped, "the the market") == Tokens{"title"});
}

TEST_CASE("preprocess is idempotent on random token strings") {
  static const std::vector<std::string> pieces = {
      "Stocks", "the", "U.S.", "+5%", "-3.2%", "5%", "%", "--", "---", "-", "—", "covid-19",
      "I.", "a", "(", ")", ";", "$AAPL", "100,000", "rise", "fall!", "don't", "x--y", "5%-10%",
      "+", "...", " ", "Ünï", "7", "'s", "e-mail", "q&a", "-+5%", "%%", "9%%", "up.down"};
  Rng rng(20240601);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string title;
    const auto n = rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string piece = pieces[rng.below(pieces.size())];
      if (rng.uniform() < 0.3) piece += pieces[rng.below(pieces.size())];
      title += piece + (rng.uniform() < 0.9 ? " " : "\t");
    }
    for (auto preset : {Preset::m1, Preset::m2, Preset::m3, Preset::m4, Preset::m5}) {
      const auto cfg = PipelineConfig::preset(preset);
      const auto once = pre(title, cfg);
      std::string joined;
      for (const auto& t : once) joined += t + " ";
      const auto twice = pre(joined, cfg);
      INFO("input: " << title << " preset " << preset_name(preset));
      CHECK(once == twice);
      for (const auto& t : once) {
        CHECK(!t.empty());
        CHECK(split_whitespace(t).size() == 1);
        if (cfg.percent_replacement && cfg.punctuation_removal) CHECK(t.find('%') == std::string::npos);
      }
    }
  }
}

TEST_CASE("corpus statistics") {
  SUBCASE("single article") {
    Article a;
    a.id = "1";
    a.title = "a a b";
    const auto s = corpus_stats({a});
    CHECK(s.vocab_size == 2);
    CHECK(s.title_word_count == 3);
    CHECK(s.title_word_count_no_stopwords == 1);  // "a" is a stopword
    CHECK(s.desc_len.count == 0);
  }
  SUBCASE("fixture counts") {
    const auto articles = load_articles(FINSENT_FIXTURE_DIR "/articles.jsonl");
    const auto s = corpus_stats(articles, StopwordList::english(), 5);
    // Title lengths: 12, 8, 5, 7, 7, 5, 5, 4, 7, 6.
    CHECK(s.article_count == 10);
    CHECK(s.title_word_count == 66);
    CHECK(s.title_len.min == 4);
    CHECK(s.title_len.max == 12);
    CHECK(s.title_len.mean == doctest::Approx(6.6));
    CHECK(s.desc_len.count == 9);
    CHECK(s.desc_len.min == 4);
    CHECK(s.desc_len.max == 13);  // the em dash in a1 is its own word
    REQUIRE(s.top_words.size() == 5);
    CHECK(s.top_words[0].word == "sales");
    CHECK(s.top_words[0].count == 2);
    // Remaining words appear once; ties sort bytewise.
    CHECK(s.top_words[1].word == "+2.5%");
    CHECK(s.top_words[1].count == 1);
  }
  CHECK_THROWS_AS(corpus_stats({}), ValidationError);
}

TEST_CASE("query frequency") {
  auto at = [](const std::string& id, const std::string& title, const std::string& day) {
    Article a;
    a.id = id;
    a.title = title;
    a.published_at = parse_timestamp(day + "T15:00:00Z");
    return a;
  };
  SUBCASE("10 posts, 6 matching") {
    std::vector<Article> articles;
    for (int i = 0; i < 10; ++i) {
      articles.push_back(at(std::to_string(i), i < 6 ? "Covid cases rise" : "Markets rise", "2020-03-10"));
    }
    const auto f = query_frequency(articles, {"covid"});
    REQUIRE(f.percent.size() == 1);
    CHECK(f.percent[0].value == 60.0);
    CHECK(f.volume[0].value == 10.0);
  }
  SUBCASE("three-day fixture") {
    const std::vector<Article> articles{
        at("1", "Coronavirus spreads", "2020-03-01"), at("2", "Stocks fall", "2020-03-01"),
        at("3", "COVID-19 update", "2020-03-02"),     at("4", "covid relief bill", "2020-03-03"),
        at("5", "Oil slides", "2020-03-03"),          at("6", "Fed acts", "2020-03-03"),
        at("7", "Covid-19 vaccines", "2020-03-03")};
    const auto token = query_frequency(articles, {"coronavirus", "covid"});
    REQUIRE(token.percent.size() == 3);
    CHECK(token.percent[0].value == 50.0);
    CHECK(token.percent[1].value == 0.0);  // "covid-19" is not the token "covid"
    CHECK(token.percent[2].value == 25.0);
    QueryOptions sub;
    sub.match = QueryMatch::substring;
    const auto loose = query_frequency(articles, {"coronavirus", "covid"}, sub);
    CHECK(loose.percent[1].value == 100.0);
    CHECK(loose.percent[2].value == 50.0);
  }
  SUBCASE("absent term") {
    const auto f = query_frequency({at("1", "a b", "2020-03-01"), at("2", "c", "2020-03-02")}, {"zzz"});
    for (const auto& p : f.percent.points()) CHECK(p.value == 0.0);
    std::ostringstream out;
    write_frequency_csv(out, f);
    CHECK(out.str() == "date,percent,volume\n2020-03-01,0,1\n2020-03-02,0,1\n");
  }
  CHECK_THROWS_AS(query_frequency({}, {}), ValidationError);
}

TEST_CASE("continuous threshold") {
  CHECK(threshold_continuous(0.0) == SentimentLabel::neutral);
  CHECK(threshold_continuous(-0.9) == SentimentLabel::negative);
  CHECK(threshold_continuous(0.9) == SentimentLabel::positive);
  CHECK(threshold_continuous(-0.33) == SentimentLabel::negative);
  CHECK(threshold_continuous(0.33) == SentimentLabel::positive);
  CHECK(threshold_continuous(0.3299) == SentimentLabel::neutral);
  CHECK_THROWS_AS(threshold_continuous(1.5), ValidationError);
  CHECK_THROWS_AS(threshold_continuous(0.0, 0.5, 0.5), ValidationError);
  // The three intervals partition [-1, 1].
  for (int i = -1000; i <= 1000; ++i) {
    const double s = i / 1000.0;
    const auto l = threshold_continuous(s);
    CHECK((l == SentimentLabel::negative) == (s <= -0.33));
    CHECK((l == SentimentLabel::positive) == (s >= 0.33));
  }
}
