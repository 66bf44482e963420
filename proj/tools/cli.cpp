#include "finsent/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finsent/annotation.hpp"
#include "finsent/common.hpp"
#include "finsent/corpus.hpp"
#include "finsent/csv.hpp"
#include "finsent/embeddings.hpp"
#include "finsent/eval.hpp"
#include "finsent/lexicon.hpp"
#include "finsent/marketcorr.hpp"
#include "finsent/model.hpp"

namespace finsent::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOutEnv = "FINSENT_OUT_DIR";
constexpr const char* kBuiltinStopwords = "builtin";

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

/// Output directory, input digests and the list of written artifacts for one
/// invocation.
class Run {
 public:
  Run(fs::path out_dir, std::ostream& out, std::ostream& err)
      : out_dir_(std::move(out_dir)), out_(out), err_(err) {}

  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  /// Checks the input exists and records its digest. Call before any work so
  /// a missing path fails fast.
  fs::path input(const std::string& role, const std::string& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
      throw ValidationError(role + " file not found: " + path);
    }
    inputs_.push_back({role, path, sha256_file(path)});
    return path;
  }

  void prepare_output() {
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec || !fs::is_directory(out_dir_)) {
      throw Error("cannot create output directory " + out_dir_.string());
    }
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = out_dir_ / name;
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write " + path.string());
    body(file);
    file.flush();
    if (!file) throw Error("write failed: " + path.string());
    outputs_.push_back(name);
  }

  void save_checkpoint(const std::string& name, const model::Checkpoint& ckpt) {
    write(name, [&](std::ostream& o) { model::write_checkpoint(o, ckpt); });
  }

  void warn(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err_ << "warning: " << w << '\n';
  }

  void write_manifest(const std::string& command, std::uint64_t seed, std::size_t threads,
                      const ordered_json& options) {
    ordered_json manifest;
    manifest["command"] = command;
    manifest["seed"] = seed;
    manifest["threads"] = threads;
    manifest["options"] = options;
    manifest["inputs"] = ordered_json::array();
    for (const auto& in : inputs_) {
      manifest["inputs"].push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.sha256}});
    }
    manifest["outputs"] = outputs_;
    const auto text = manifest.dump(2) + "\n";
    write("manifest.json", [&](std::ostream& o) { o << text; });
  }

 private:
  struct Input {
    std::string role;
    std::string path;
    std::string sha256;
  };

  fs::path out_dir_;
  std::ostream& out_;
  std::ostream& err_;
  std::vector<Input> inputs_;
  std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Option structs

struct Globals {
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::string out = "out";
};

struct PipelineOpts {
  std::string preset = "M4";
  int description_cap = 25;
  std::string stopwords;
};

struct EmbeddingOpts {
  std::string path;
  std::size_t dim = 300;
  float covid_fill = embeddings::kDefaultSyntheticFill;
  std::vector<std::string> covid_tokens{embeddings::default_covid_tokens().begin(),
                                        embeddings::default_covid_tokens().end()};
};

struct StatsOpts {
  std::string articles;
  std::size_t top_k = 20;
  PipelineOpts pipeline;
  EmbeddingOpts emb;
};

struct FreqOpts {
  std::string articles;
  std::vector<std::string> query;
  std::string match = "token";
  std::string preset;
  std::string stopwords;
  std::string timezone = "America/New_York";
};

struct AgreementOpts {
  std::string labels;
  std::vector<std::string> exclude;
  std::vector<std::string> annotators;
};

struct TrainOpts {
  std::string articles;
  std::string labels;
  std::vector<std::string> exclude;
  PipelineOpts pipeline;
  EmbeddingOpts emb;
  std::string lexicon;
  std::string lexicon_features = "per_token";
  std::string pad = "post";
  double test_fraction = 0.15;
  std::string selection = "max_over_epochs";
  std::string resume;
  std::string timezone = "America/New_York";
  model::CnnConfig cnn;
};

struct PredictOpts {
  std::string checkpoint;
  std::string articles;
  std::string embeddings;
  std::string lexicon;
  std::string timezone = "America/New_York";
};

struct EvalOpts {
  std::string labels;
  std::vector<std::string> exclude;
  std::string predictions;
  std::string baseline;
  std::string articles;
  std::string lexicon;
  double neutral_band = 0.0;
  PipelineOpts pipeline;
};

struct CorrelateOpts {
  std::string predictions;
  std::vector<std::string> series;
  std::vector<std::string> pairs;
  std::size_t window = 10;
  std::string warm_up = "expanding";
  std::string basis = "trading";
  std::string price_field = "close";
  std::vector<std::string> tickers;
  std::string articles;
};

// ---------------------------------------------------------------------------
// Shared helpers

corpus::PipelineConfig resolve_pipeline(const PipelineOpts& o) {
  auto cfg = corpus::PipelineConfig::preset(corpus::parse_preset(o.preset));
  cfg.description_word_cap = o.description_cap;
  return cfg;
}

corpus::StopwordList resolve_stopwords(Run& run, const std::string& path) {
  if (path.empty() || path == kBuiltinStopwords) return corpus::StopwordList::english();
  return corpus::load_stopwords(run.input("stopwords", path));
}

embeddings::EmbeddingTable load_table(Run& run, const std::string& path, std::size_t dim,
                                      bool covid, float fill,
                                      const std::vector<std::string>& covid_tokens) {
  std::vector<std::string> warnings;
  auto table = embeddings::load_embedding_table(path, dim, &warnings);
  if (covid) {
    const std::set<std::string> tokens(covid_tokens.begin(), covid_tokens.end());
    table = embeddings::add_synthetic_covid_embeddings(std::move(table), tokens, fill, &warnings);
  }
  run.warn(warnings);
  return table;
}

lexicon::Lexicon load_lex(Run& run, const std::string& path) {
  std::vector<std::string> warnings;
  auto lex = lexicon::load_lexicon(path, &warnings);
  run.warn(warnings);
  return lex;
}

embeddings::LexiconFeatures parse_lexicon_features(const std::string& s) {
  if (s == "none") return embeddings::LexiconFeatures::none;
  if (s == "per_token") return embeddings::LexiconFeatures::per_token;
  if (s == "summary") return embeddings::LexiconFeatures::summary;
  throw ValidationError("unknown lexicon feature mode '" + s + "'");
}

embeddings::PadPolicy parse_pad(const std::string& s) {
  if (s == "post") return embeddings::PadPolicy::post;
  if (s == "pre") return embeddings::PadPolicy::pre;
  throw ValidationError("unknown pad policy '" + s + "'");
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<corpus::GoldLabel> load_label_records(Run& run, const std::string& path) {
  return corpus::load_labels(run.input("labels", path));
}

std::vector<annotation::GoldItem> gold_from(const std::vector<corpus::GoldLabel>& records,
                                            const std::vector<std::string>& exclude) {
  annotation::AnnotationSet set(records);
  const std::set<std::string> excluded(exclude.begin(), exclude.end());
  for (const auto& name : excluded) {
    if (!set.annotators().count(name)) {
      throw ValidationError("excluded annotator '" + name + "' does not appear in the labels");
    }
  }
  if (excluded.size() >= set.annotators().size()) {
    throw ValidationError("annotator exclusion leaves no labels");
  }
  return annotation::assemble_gold(set, excluded);
}

std::unordered_map<std::string, std::size_t> index_articles(
    const std::vector<corpus::Article>& articles) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < articles.size(); ++i) index.emplace(articles[i].id, i);
  return index;
}

struct PredictionRow {
  std::string article_id;
  Date date;
  SentimentLabel label = SentimentLabel::neutral;
};

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "article_id,date,label\n";
  for (const auto& r : rows) {
    out << csv::escape(r.article_id) << ',' << format_date(r.date) << ',' << to_int(r.label) << '\n';
  }
}

std::vector<PredictionRow> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!csv::read_line(in, line) || line != "article_id,date,label") {
    throw ParseError(path, 1, "expected header 'article_id,date,label'");
  }
  std::vector<PredictionRow> rows;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw ParseError(path, line_no, "expected 3 fields");
    PredictionRow row;
    row.article_id = f[0];
    try {
      row.date = parse_date(f[1]);
      row.label = parse_label(f[2]);
    } catch (const ValidationError& e) {
      throw ParseError(path, line_no, e.what());
    }
    if (!seen.insert(row.article_id).second) {
      throw ParseError(path, line_no, "duplicate article id '" + row.article_id + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_eval_reports(Run& run, std::span<const SentimentLabel> truth,
                        std::span<const SentimentLabel> predicted) {
  const auto cm = eval::confusion(truth, predicted);
  const auto report = eval::f1_report(cm);
  const auto errors = eval::off_by_one(truth, predicted);
  run.write("metrics.csv", [&](std::ostream& o) { eval::write_metrics_csv(o, report); });
  run.write("metrics.txt", [&](std::ostream& o) { eval::write_metrics_text(o, report); });
  run.write("confusion.csv", [&](std::ostream& o) { eval::write_confusion_csv(o, cm); });
  run.write("errors.csv", [&](std::ostream& o) { eval::write_errors_csv(o, errors); });
  run.out() << "n=" << truth.size() << " macro_f1=" << format_real(report.macro.f1)
            << " weighted_f1=" << format_real(report.weighted.f1) << '\n';
}

// Checkpoint metadata carries everything predict needs to rebuild inputs.
std::map<std::string, std::string> pipeline_metadata(const corpus::PipelineConfig& p,
                                                     const TrainOpts& o) {
  auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  return {
      {"pipeline.preset", o.pipeline.preset},
      {"pipeline.dash_removal", flag(p.dash_removal)},
      {"pipeline.covid_embeddings", flag(p.covid_embeddings)},
      {"pipeline.stopword_removal", flag(p.stopword_removal)},
      {"pipeline.percent_replacement", flag(p.percent_replacement)},
      {"pipeline.punctuation_removal", flag(p.punctuation_removal)},
      {"pipeline.description_word_cap", std::to_string(p.description_word_cap)},
      {"pipeline.stopwords", o.pipeline.stopwords.empty() ? kBuiltinStopwords : o.pipeline.stopwords},
      {"embeddings.dim", std::to_string(o.emb.dim)},
      {"embeddings.covid_fill", format_real(o.emb.covid_fill)},
      {"embeddings.covid_tokens", join(o.emb.covid_tokens, ',')},
      {"embeddings.pad", o.pad},
      {"lexicon.features", o.lexicon_features},
  };
}

const std::string& meta(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw ValidationError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

std::size_t to_size(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("bad " + what + " '" + s + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_stats(Run& run, const StatsOpts& o) {
  run.input("articles", o.articles);
  const auto stopwords = resolve_stopwords(run, o.pipeline.stopwords);
  if (!o.emb.path.empty()) run.input("embeddings", o.emb.path);
  run.prepare_output();

  const auto articles = corpus::load_articles(o.articles);
  const auto stats = corpus::corpus_stats(articles, stopwords, o.top_k);
  run.write("stats.csv", [&](std::ostream& out) { corpus::write_stats_csv(out, stats); });
  run.write("top_words.csv", [&](std::ostream& out) { corpus::write_top_words_csv(out, stats); });
  run.out() << "articles=" << stats.article_count << " vocab=" << stats.vocab_size << '\n';

  if (!o.emb.path.empty()) {
    const auto pipeline = resolve_pipeline(o.pipeline);
    const auto table = load_table(run, o.emb.path, o.emb.dim, pipeline.covid_embeddings,
                                  o.emb.covid_fill, o.emb.covid_tokens);
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(articles.size());
    for (const auto& a : articles) tokens.push_back(corpus::preprocess(a, pipeline, stopwords).tokens);
    const auto coverage = embeddings::coverage_report(table, tokens);
    run.write("coverage.csv", [&](std::ostream& out) { embeddings::write_coverage_csv(out, coverage); });
    run.out() << "words_missing_percent=" << format_real(coverage.missing_percent) << '\n';
  }
}

void cmd_freq(Run& run, const FreqOpts& o) {
  run.input("articles", o.articles);
  const auto stopwords = resolve_stopwords(run, o.stopwords);
  run.prepare_output();

  corpus::QueryOptions q{.match = o.match == "substring" ? corpus::QueryMatch::substring
                                                         : corpus::QueryMatch::token,
                         .zone = corpus::TimeZone::load(o.timezone)};
  if (!o.preset.empty()) {
    q.pipeline = corpus::PipelineConfig::preset(corpus::parse_preset(o.preset));
    q.pipeline.description_word_cap = -1;
  }
  q.stopwords = &stopwords;
  std::set<std::string> terms;
  for (const auto& t : o.query) terms.insert(corpus::to_lower(t));
  if (q.pipeline.stopword_removal) {
    for (const auto& t : terms) {
      if (stopwords.contains(t)) {
        throw ValidationError("query term '" + t + "' is a stopword and is removed by the pipeline");
      }
    }
  }
  const auto articles = corpus::load_articles(o.articles);
  const auto freq = corpus::query_frequency(articles, terms, q);
  run.write("frequency.csv", [&](std::ostream& out) { corpus::write_frequency_csv(out, freq); });
  run.out() << "days=" << freq.volume.size() << '\n';
}

void cmd_agreement(Run& run, const AgreementOpts& o) {
  const auto records = load_label_records(run, o.labels);
  run.prepare_output();
  const std::set<std::string> roster(o.annotators.begin(), o.annotators.end());
  const annotation::AnnotationSet set(records, roster);
  const auto matrix = annotation::kappa_matrix(set);
  const auto gold = gold_from(records, o.exclude);
  run.write("agreement.csv", [&](std::ostream& out) { annotation::write_agreement_csv(out, matrix); });
  run.write("agreement.txt", [&](std::ostream& out) { annotation::write_agreement_text(out, matrix); });
  run.write("distribution.csv", [&](std::ostream& out) { annotation::write_distribution_csv(out, set); });
  run.write("gold.csv", [&](std::ostream& out) { annotation::write_gold_csv(out, gold); });
  annotation::write_agreement_text(run.out(), matrix);
}

void cmd_train(Run& run, const TrainOpts& o, std::uint64_t seed, std::size_t threads) {
  run.input("articles", o.articles);
  const auto records = load_label_records(run, o.labels);
  run.input("embeddings", o.emb.path);
  const auto stopwords = resolve_stopwords(run, o.pipeline.stopwords);
  const auto features = parse_lexicon_features(o.lexicon_features);
  if (features != embeddings::LexiconFeatures::none && o.lexicon.empty()) {
    throw ValidationError("--lexicon is required unless --lexicon-features none");
  }
  if (!o.lexicon.empty()) run.input("lexicon", o.lexicon);
  std::optional<model::Checkpoint> resume;
  if (!o.resume.empty()) resume = model::load_checkpoint(run.input("resume", o.resume));
  const auto zone = corpus::TimeZone::load(o.timezone);
  run.prepare_output();

  const auto pipeline = resolve_pipeline(o.pipeline);
  const auto articles = corpus::load_articles(o.articles);
  const auto index = index_articles(articles);
  const auto gold = gold_from(records, o.exclude);
  const auto table = load_table(run, o.emb.path, o.emb.dim, pipeline.covid_embeddings,
                                o.emb.covid_fill, o.emb.covid_tokens);
  lexicon::Lexicon lex;
  if (!o.lexicon.empty()) lex = load_lex(run, o.lexicon);

  model::CnnConfig cfg = o.cnn;
  cfg.seed = seed;
  cfg.feature_dim = embeddings::feature_dim(o.emb.dim, features);
  cfg.doc_feature_dim = embeddings::doc_feature_dim(features);
  cfg.validate();

  const embeddings::EmbedOptions embed{.max_len = cfg.max_len,
                                       .pad = parse_pad(o.pad),
                                       .lexicon_features = features,
                                       .lexicon = &lex};
  std::vector<model::Example> examples;
  std::vector<std::size_t> article_of;
  examples.reserve(gold.size());
  for (const auto& item : gold) {
    auto it = index.find(item.article_id);
    if (it == index.end()) {
      throw ValidationError("label refers to unknown article id '" + item.article_id + "'");
    }
    const auto tokens = corpus::preprocess(articles[it->second], pipeline, stopwords).tokens;
    examples.push_back({embeddings::embed_tokens(table, tokens, embed), item.label});
    article_of.push_back(it->second);
  }

  const auto split = model::train_test_split(examples.size(), o.test_fraction, seed);
  std::vector<model::Example> train_set;
  std::vector<model::Example> test_set;
  for (auto i : split.train) train_set.push_back(examples[i]);
  for (auto i : split.test) test_set.push_back(examples[i]);

  auto metadata = pipeline_metadata(pipeline, o);
  model::TrainOptions topts;
  topts.threads = threads;
  topts.selection =
      o.selection == "final_epoch" ? model::Selection::final_epoch : model::Selection::max_over_epochs;
  if (resume) {
    auto expected = resume->config;
    expected.epochs = cfg.epochs;
    if (!(expected == cfg)) {
      throw ValidationError("resume checkpoint was trained with a different model configuration");
    }
    for (const auto& [key, value] : metadata) {
      if (meta(resume->metadata, key) != value) {
        throw ValidationError("resume checkpoint differs in '" + key + "' (" +
                              meta(resume->metadata, key) + " vs " + value + ")");
      }
    }
    topts.resume = &resume->state;
  }
  topts.on_epoch = [&](const model::EpochRecord& r) {
    run.out() << "epoch " << r.epoch << " loss=" << format_real(r.train_loss)
              << " macro_f1=" << format_real(r.test_macro_f1)
              << " weighted_f1=" << format_real(r.test_weighted_f1) << '\n';
  };
  const auto result = model::train(cfg, train_set, test_set, model::default_eval_fn(), topts);

  metadata["train.seed"] = std::to_string(seed);
  metadata["train.selection"] = o.selection;
  metadata["train.test_fraction"] = format_real(o.test_fraction);
  run.save_checkpoint("model.ckpt", {cfg, result.state, metadata});
  run.write("train_report.csv",
            [&](std::ostream& out) { model::write_train_report_csv(out, result.report); });
  run.write("train_summary.csv",
            [&](std::ostream& out) { model::write_train_summary_csv(out, result.report); });
  run.write("split.csv", [&](std::ostream& out) {
    out << "article_id,set\n";
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool test = std::binary_search(split.test.begin(), split.test.end(), i);
      out << csv::escape(gold[i].article_id) << ',' << (test ? "test" : "train") << '\n';
    }
  });

  std::vector<embeddings::EmbeddedDoc> test_docs;
  for (const auto& ex : test_set) test_docs.push_back(ex.doc);
  const auto predicted = model::predict(result.state.params, cfg, test_docs, threads);
  std::vector<PredictionRow> rows;
  for (std::size_t k = 0; k < split.test.size(); ++k) {
    const auto& a = articles[article_of[split.test[k]]];
    rows.push_back({a.id, zone.local_date(a.published_at), predicted[k]});
  }
  run.write("test_predictions.csv", [&](std::ostream& out) { write_predictions(out, rows); });
  run.out() << "reported_macro_f1=" << format_real(result.report.reported_macro_f1())
            << " reported_weighted_f1=" << format_real(result.report.reported_weighted_f1()) << '\n';
}

void cmd_predict(Run& run, const PredictOpts& o, std::size_t threads) {
  const auto ckpt = model::load_checkpoint(run.input("checkpoint", o.checkpoint));
  run.input("articles", o.articles);
  run.input("embeddings", o.embeddings);
  const auto& m = ckpt.metadata;
  const auto features = parse_lexicon_features(meta(m, "lexicon.features"));
  if (features != embeddings::LexiconFeatures::none && o.lexicon.empty()) {
    throw ValidationError("this checkpoint uses lexicon features; --lexicon is required");
  }
  if (!o.lexicon.empty()) run.input("lexicon", o.lexicon);
  const auto stopwords = resolve_stopwords(run, meta(m, "pipeline.stopwords"));
  const auto zone = corpus::TimeZone::load(o.timezone);
  run.prepare_output();

  corpus::PipelineConfig pipeline;
  pipeline.dash_removal = meta(m, "pipeline.dash_removal") == "1";
  pipeline.covid_embeddings = meta(m, "pipeline.covid_embeddings") == "1";
  pipeline.stopword_removal = meta(m, "pipeline.stopword_removal") == "1";
  pipeline.percent_replacement = meta(m, "pipeline.percent_replacement") == "1";
  pipeline.punctuation_removal = meta(m, "pipeline.punctuation_removal") == "1";
  pipeline.description_word_cap = std::stoi(meta(m, "pipeline.description_word_cap"));

  const auto dim = to_size(meta(m, "embeddings.dim"), "embedding dim");
  const float fill = std::stof(meta(m, "embeddings.covid_fill"));
  const auto table = load_table(run, o.embeddings, dim, pipeline.covid_embeddings, fill,
                                split(meta(m, "embeddings.covid_tokens"), ','));
  lexicon::Lexicon lex;
  if (!o.lexicon.empty()) lex = load_lex(run, o.lexicon);
  const embeddings::EmbedOptions embed{.max_len = ckpt.config.max_len,
                                       .pad = parse_pad(meta(m, "embeddings.pad")),
                                       .lexicon_features = features,
                                       .lexicon = &lex};
  if (embeddings::feature_dim(dim, features) != ckpt.config.feature_dim) {
    throw ValidationError("checkpoint feature dimension does not match its embedding metadata");
  }

  const auto articles = corpus::load_articles(o.articles);
  std::vector<embeddings::EmbeddedDoc> docs;
  docs.reserve(articles.size());
  for (const auto& a : articles) {
    docs.push_back(embeddings::embed_tokens(table, corpus::preprocess(a, pipeline, stopwords).tokens, embed));
  }
  const auto labels = model::predict(ckpt.state.params, ckpt.config, docs, threads);
  std::vector<PredictionRow> rows;
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i = 0; i < articles.size(); ++i) {
    rows.push_back({articles[i].id, zone.local_date(articles[i].published_at), labels[i]});
    ++counts[class_index(labels[i])];
  }
  run.write("predictions.csv", [&](std::ostream& out) { write_predictions(out, rows); });
  run.out() << "predicted=" << rows.size() << " negative=" << counts[0] << " neutral=" << counts[1]
            << " positive=" << counts[2] << '\n';
}

void cmd_eval(Run& run, const EvalOpts& o) {
  const auto records = load_label_records(run, o.labels);
  if (o.predictions.empty() == o.baseline.empty()) {
    throw ValidationError("give exactly one of --predictions or --baseline");
  }
  if (!o.predictions.empty()) run.input("predictions", o.predictions);
  std::optional<corpus::StopwordList> stopwords;
  if (o.baseline == "vadermax") {
    if (o.articles.empty() || o.lexicon.empty()) {
      throw ValidationError("the vadermax baseline needs --articles and --lexicon");
    }
    run.input("articles", o.articles);
    run.input("lexicon", o.lexicon);
    stopwords = resolve_stopwords(run, o.pipeline.stopwords);
  }
  run.prepare_output();

  const auto gold = gold_from(records, o.exclude);
  std::vector<SentimentLabel> truth;
  std::vector<SentimentLabel> predicted;
  if (!o.predictions.empty()) {
    std::unordered_map<std::string, SentimentLabel> by_id;
    for (const auto& row : read_predictions(o.predictions)) by_id.emplace(row.article_id, row.label);
    for (const auto& item : gold) {
      auto it = by_id.find(item.article_id);
      if (it == by_id.end()) continue;
      truth.push_back(item.label);
      predicted.push_back(it->second);
    }
    if (truth.empty()) throw ValidationError("no predicted article has a gold label");
  } else if (o.baseline == "allneutral") {
    for (const auto& item : gold) truth.push_back(item.label);
    predicted = model::allneutral_predict(truth.size());
  } else {
    const auto articles = corpus::load_articles(o.articles);
    const auto index = index_articles(articles);
    const auto lex = load_lex(run, o.lexicon);
    const auto pipeline = resolve_pipeline(o.pipeline);
    for (const auto& item : gold) {
      auto it = index.find(item.article_id);
      if (it == index.end()) {
        throw ValidationError("label refers to unknown article id '" + item.article_id + "'");
      }
      const auto tokens = corpus::preprocess(articles[it->second], pipeline, *stopwords).tokens;
      truth.push_back(item.label);
      predicted.push_back(lexicon::vadermax_predict(lex, tokens, o.neutral_band));
    }
  }
  write_eval_reports(run, truth, predicted);
}

struct SeriesArg {
  std::string name;
  std::string path;
  marketcorr::PriceField field;
};

SeriesArg parse_series_arg(const std::string& arg, marketcorr::PriceField default_field) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
    throw ValidationError("--series expects name=path[:field], got '" + arg + "'");
  }
  SeriesArg s{arg.substr(0, eq), arg.substr(eq + 1), default_field};
  for (char c : s.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      throw ValidationError("series name '" + s.name + "' may only use letters, digits, '_' and '-'");
    }
  }
  if (const auto colon = s.path.rfind(':'); colon != std::string::npos) {
    const auto tail = s.path.substr(colon + 1);
    s.field = marketcorr::parse_price_field(tail);
    s.path.erase(colon);
  }
  return s;
}

void cmd_correlate(Run& run, const CorrelateOpts& o) {
  run.input("predictions", o.predictions);
  const auto default_field = marketcorr::parse_price_field(o.price_field);
  std::vector<SeriesArg> parsed;
  for (const auto& s : o.series) {
    parsed.push_back(parse_series_arg(s, default_field));
    run.input("market:" + parsed.back().name, parsed.back().path);
  }
  if (!o.tickers.empty()) {
    if (o.articles.empty()) throw ValidationError("--tickers needs --articles");
    run.input("articles", o.articles);
  }
  marketcorr::CorrelationOptions copts;
  copts.window = o.window;
  copts.warm_up = o.warm_up == "drop" ? marketcorr::WarmUp::drop : marketcorr::WarmUp::expanding;
  copts.basis = o.basis == "calendar" ? marketcorr::SmoothingBasis::calendar_days
                                      : marketcorr::SmoothingBasis::trading_days;
  for (const auto& p : o.pairs) {
    const auto colon = p.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == p.size()) {
      throw ValidationError("--pair expects a:b, got '" + p + "'");
    }
    copts.market_pairs.emplace_back(p.substr(0, colon), p.substr(colon + 1));
  }
  run.prepare_output();

  auto rows = read_predictions(o.predictions);
  if (!o.tickers.empty()) {
    const auto articles = corpus::load_articles(o.articles);
    const std::set<std::string> tickers(o.tickers.begin(), o.tickers.end());
    const auto subset = marketcorr::filter_by_tickers(articles, tickers);
    std::set<std::string> keep;
    for (const auto& a : subset.articles) keep.insert(a.id);
    std::erase_if(rows, [&](const PredictionRow& r) { return !keep.count(r.article_id); });
    run.write("ticker_subset.csv", [&](std::ostream& out) {
      out << "key,value\n";
      out << "tickers," << csv::escape(join(std::vector<std::string>(tickers.begin(), tickers.end()), ' '))
          << '\n';
      out << "articles," << subset.count << '\n';
      out << "total_articles," << articles.size() << '\n';
      out << "percent," << format_real(subset.percent) << '\n';
      out << "predictions_kept," << rows.size() << '\n';
    });
    run.out() << "ticker_subset=" << subset.count << " (" << format_real(subset.percent) << "%)\n";
    if (rows.empty()) throw ValidationError("no predictions remain after ticker filtering");
  }

  std::vector<Date> dates;
  std::vector<SentimentLabel> labels;
  for (const auto& r : rows) {
    dates.push_back(r.date);
    labels.push_back(r.label);
  }
  const auto sentiment = marketcorr::daily_sentiment(dates, labels);
  std::vector<marketcorr::NamedSeries> market;
  for (const auto& s : parsed) {
    market.push_back({s.name, marketcorr::bar_series(marketcorr::load_market_csv(s.path), s.field)});
  }
  const auto report = marketcorr::correlation_report(sentiment, market, copts);
  run.write("correlation.csv", [&](std::ostream& out) { marketcorr::write_correlation_csv(out, report); });
  run.write("series_sentiment_raw.csv",
            [&](std::ostream& out) { write_series_csv(out, report.raw_sentiment); });
  run.write("series_sentiment_smoothed.csv",
            [&](std::ostream& out) { write_series_csv(out, report.smoothed_sentiment); });
  for (const auto& m : market) {
    run.write("series_" + m.name + ".csv",
              [&](std::ostream& out) { write_series_csv(out, marketcorr::drop_non_trading(m.series)); });
  }
  for (const auto& row : report.rows) {
    run.out() << row.pair << ": r=" << format_real(row.r) << " (n=" << row.n_days << ")\n";
  }
}

// ---------------------------------------------------------------------------
// Option wiring

void add_pipeline_options(CLI::App* sub, PipelineOpts& p) {
  sub->add_option("--preset", p.preset, "Preprocessing preset M1..M5")
      ->check(CLI::IsMember({"M1", "M2", "M3", "M4", "M5"}, CLI::ignore_case));
  sub->add_option("--description-cap", p.description_cap,
                  "Description words kept after the title (negative keeps all)");
  sub->add_option("--stopwords", p.stopwords, "Stopword list, one per line (default: built-in English)");
}

void add_embedding_options(CLI::App* sub, EmbeddingOpts& e, bool required) {
  auto* opt = sub->add_option("--embeddings", e.path, "Text word vectors (token v1 ... vN)");
  if (required) opt->required();
  sub->add_option("--embedding-dim", e.dim, "Expected vector length")->check(CLI::PositiveNumber);
  sub->add_option("--covid-fill", e.covid_fill, "Constant for synthetic COVID-19 vectors");
  sub->add_option("--covid-tokens", e.covid_tokens, "Tokens given synthetic vectors")->delimiter(',');
}

ordered_json collect_options(const CLI::App* app) {
  static const std::set<std::string> kSkip{"help", "out", "config", "seed", "threads"};
  std::map<std::string, std::string> sorted;
  for (const auto* opt : app->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || kSkip.count(name)) continue;
    std::string value;
    if (opt->count() > 0) {
      value = join(opt->results(), ',');
    } else {
      value = opt->get_default_str();
    }
    sorted[name] = value;
  }
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : sorted) j[k] = v;
  return j;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"finsent: financial news sentiment pipeline", "finsent"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Config file (TOML-style; [subcommand] sections)");
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));
  app.add_option("--out", g.out, "Output directory")->envname(kOutEnv);

  StatsOpts stats;
  auto* s_stats = app.add_subcommand("stats", "Corpus statistics and embedding coverage");
  s_stats->add_option("--articles", stats.articles, "Articles JSONL")->required();
  s_stats->add_option("--top-k", stats.top_k, "Most frequent title words to list");
  add_pipeline_options(s_stats, stats.pipeline);
  add_embedding_options(s_stats, stats.emb, false);

  FreqOpts freq;
  auto* s_freq = app.add_subcommand("freq", "Daily frequency of query words");
  s_freq->add_option("--articles", freq.articles, "Articles JSONL")->required();
  s_freq->add_option("--query", freq.query, "Query term (repeatable)")->required();
  s_freq->add_option("--match", freq.match, "token or substring")
      ->check(CLI::IsMember({"token", "substring"}));
  s_freq->add_option("--preset", freq.preset, "Optional preprocessing preset before matching")
      ->check(CLI::IsMember({"M1", "M2", "M3", "M4", "M5"}, CLI::ignore_case));
  s_freq->add_option("--stopwords", freq.stopwords, "Stopword list (default: built-in English)");
  s_freq->add_option("--timezone", freq.timezone, "Zone used to assign publication dates");

  AgreementOpts agree;
  auto* s_agree = app.add_subcommand("agreement", "Inter-annotator agreement and gold labels");
  s_agree->add_option("--labels", agree.labels, "Labels CSV (article_id,annotator,label)")->required();
  s_agree->add_option("--exclude", agree.exclude, "Annotator left out of the gold set (repeatable)");
  s_agree->add_option("--annotators", agree.annotators, "Extra roster entries (repeatable)");

  TrainOpts train;
  auto* s_train = app.add_subcommand("train", "Train the CNN classifier");
  s_train->add_option("--articles", train.articles, "Articles JSONL")->required();
  s_train->add_option("--labels", train.labels, "Labels CSV (article_id,annotator,label)")->required();
  s_train->add_option("--exclude", train.exclude, "Annotator left out of the gold set (repeatable)");
  add_pipeline_options(s_train, train.pipeline);
  add_embedding_options(s_train, train.emb, true);
  s_train->add_option("--lexicon", train.lexicon, "Valence lexicon TSV");
  s_train->add_option("--lexicon-features", train.lexicon_features, "none, per_token or summary")
      ->check(CLI::IsMember({"none", "per_token", "summary"}));
  s_train->add_option("--pad", train.pad, "post or pre")->check(CLI::IsMember({"post", "pre"}));
  s_train->add_option("--test-fraction", train.test_fraction, "Held-out fraction")
      ->check(CLI::Range(0.0, 1.0));
  s_train->add_option("--selection", train.selection, "max_over_epochs or final_epoch")
      ->check(CLI::IsMember({"max_over_epochs", "final_epoch"}));
  s_train->add_option("--resume", train.resume, "Continue from this checkpoint");
  s_train->add_option("--timezone", train.timezone, "Zone used to date test predictions");
  s_train->add_option("--max-len", train.cnn.max_len, "Tokens per document")->check(CLI::PositiveNumber);
  s_train->add_option("--filter-widths", train.cnn.filter_widths, "Convolution widths")->delimiter(',');
  s_train->add_option("--filters", train.cnn.filters_per_width, "Filters per width")
      ->check(CLI::PositiveNumber);
  s_train->add_option("--hidden", train.cnn.hidden, "Dense hidden units")->check(CLI::PositiveNumber);
  s_train->add_option("--dropout-pooled", train.cnn.dropout_pooled, "Dropout after pooling");
  s_train->add_option("--dropout-hidden", train.cnn.dropout_hidden, "Dropout after the hidden layer");
  s_train->add_option("--lr", train.cnn.learning_rate, "Adam learning rate");
  s_train->add_option("--batch-size", train.cnn.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  s_train->add_option("--epochs", train.cnn.epochs, "Epochs to run");

  PredictOpts pred;
  auto* s_pred = app.add_subcommand("predict", "Label articles with a trained checkpoint");
  s_pred->add_option("--checkpoint", pred.checkpoint, "Checkpoint written by train")->required();
  s_pred->add_option("--articles", pred.articles, "Articles JSONL")->required();
  s_pred->add_option("--embeddings", pred.embeddings, "Word vectors used in training")->required();
  s_pred->add_option("--lexicon", pred.lexicon, "Valence lexicon TSV");
  s_pred->add_option("--timezone", pred.timezone, "Zone used to assign publication dates");

  EvalOpts ev;
  auto* s_eval = app.add_subcommand("eval", "Score predictions or a baseline against gold labels");
  s_eval->add_option("--labels", ev.labels, "Labels CSV (article_id,annotator,label)")->required();
  s_eval->add_option("--exclude", ev.exclude, "Annotator left out of the gold set (repeatable)");
  s_eval->add_option("--predictions", ev.predictions, "Predictions CSV (article_id,date,label)");
  s_eval->add_option("--baseline", ev.baseline, "allneutral or vadermax")
      ->check(CLI::IsMember({"allneutral", "vadermax"}));
  s_eval->add_option("--articles", ev.articles, "Articles JSONL (vadermax)");
  s_eval->add_option("--lexicon", ev.lexicon, "Valence lexicon TSV (vadermax)");
  s_eval->add_option("--neutral-band", ev.neutral_band, "|score| at or below this is neutral")
      ->check(CLI::NonNegativeNumber);
  add_pipeline_options(s_eval, ev.pipeline);

  CorrelateOpts corr;
  auto* s_corr = app.add_subcommand("correlate", "Correlate daily sentiment with market series");
  s_corr->add_option("--predictions", corr.predictions, "Predictions CSV (article_id,date,label)")
      ->required();
  s_corr->add_option("--series", corr.series, "Market series name=path[:field] (repeatable)")
      ->required();
  s_corr->add_option("--pair", corr.pairs, "Market-vs-market pair a:b (repeatable)");
  s_corr->add_option("--window", corr.window, "Smoothing window")->check(CLI::PositiveNumber);
  s_corr->add_option("--warm-up", corr.warm_up, "expanding or drop")
      ->check(CLI::IsMember({"expanding", "drop"}));
  s_corr->add_option("--basis", corr.basis, "trading or calendar")
      ->check(CLI::IsMember({"trading", "calendar"}));
  s_corr->add_option("--price-field", corr.price_field, "Default market column")
      ->check(CLI::IsMember({"close", "adj_close", "volume", "open", "high", "low"}));
  s_corr->add_option("--tickers", corr.tickers, "Keep articles tagged with these tickers")
      ->delimiter(',');
  s_corr->add_option("--articles", corr.articles, "Articles JSONL (needed for --tickers)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  Run ctx(g.out, out, err);
  try {
    const auto name = active->get_name();
    if (name == "stats") {
      cmd_stats(ctx, stats);
    } else if (name == "freq") {
      cmd_freq(ctx, freq);
    } else if (name == "agreement") {
      cmd_agreement(ctx, agree);
    } else if (name == "train") {
      cmd_train(ctx, train, g.seed, g.threads);
    } else if (name == "predict") {
      cmd_predict(ctx, pred, g.threads);
    } else if (name == "eval") {
      cmd_eval(ctx, ev);
    } else {
      cmd_correlate(ctx, corr);
    }
    if (const auto cfg = app.get_config_ptr(); cfg && cfg->count() > 0) {
      ctx.input("config", cfg->as<std::string>());
    }
    ctx.write_manifest(name, g.seed, g.threads, collect_options(active));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace finsent::cli
