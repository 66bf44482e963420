#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "cli_runner.hpp"
#include "synthetic.hpp"

using namespace finsent;
using testing::read_file;
using testing::run_cli;
namespace fs = std::filesystem;

namespace {

const std::string kFix = FINSENT_FIXTURE_DIR;

nlohmann::json manifest(const fs::path& dir) {
  return nlohmann::json::parse(read_file(dir / "manifest.json"));
}

// A small separable corpus on disk, shared by the training tests.
struct TrainFiles {
  fs::path dir = testing::make_temp_dir("cli-train");
  fs::path articles = dir / "articles.jsonl";
  fs::path labels = dir / "labels.csv";
  fs::path vectors = dir / "vectors.txt";
  fs::path lexicon = dir / "lexicon.tsv";

  TrainFiles() {
    const auto c = testing::make_cue_corpus(30, 1);
    testing::write_articles_jsonl(articles, c.articles);
    testing::write_labels_csv(labels, c.labels);
    testing::write_embeddings_txt(vectors, testing::make_embeddings(c.vocab, 8, 2));
    testing::write_lexicon_tsv(lexicon, c);
  }
};

const TrainFiles& train_files() {
  static const TrainFiles files;
  return files;
}

std::vector<std::string> train_args(const fs::path& out) {
  const auto& f = train_files();
  return {"--out", out.string(), "train", "--articles", f.articles.string(), "--labels",
          f.labels.string(), "--embeddings", f.vectors.string(), "--embedding-dim", "8",
          "--lexicon", f.lexicon.string(), "--max-len", "20", "--filter-widths", "1,2",
          "--filters", "4", "--hidden", "8", "--epochs", "2"};
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli({"--help"}).code == 0);
  for (const char* sub : {"stats", "freq", "agreement", "train", "predict", "eval", "correlate"}) {
    const auto r = run_cli({sub, "--help"});
    CHECK_MESSAGE(r.code == 0, sub);
    CHECK(r.out.find("--") != std::string::npos);
  }
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"stats", "--articles", kFix + "/articles.jsonl", "--bogus"}).code == 2);
  CHECK(run_cli({"stats"}).code == 2);  // required option
  CHECK(run_cli({"stats", "--articles", kFix + "/articles.jsonl", "--preset", "M9"}).code == 2);
}

TEST_CASE("stats on the fixtures") {
  const auto out = testing::make_temp_dir("cli-stats");
  const auto r = run_cli({"--out", out.string(), "stats", "--articles", kFix + "/articles.jsonl",
                          "--embeddings", kFix + "/embeddings.txt", "--embedding-dim", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(out / "stats.csv"));
  CHECK(fs::exists(out / "top_words.csv"));
  CHECK(read_file(out / "coverage.csv").rfind("token,count\n", 0) == 0);
  const auto m = manifest(out);
  CHECK(m["command"] == "stats");
  CHECK(m["seed"] == 42);
  CHECK(m["inputs"][0]["role"] == "articles");
  CHECK(m["inputs"][0]["sha256"].get<std::string>().size() == 64);
  CHECK(m["options"]["preset"] == "M4");
  CHECK_FALSE(m["options"].contains("out"));
  CHECK(m["outputs"].size() == 3);
}

TEST_CASE("missing inputs are data errors") {
  const auto out = testing::make_temp_dir("cli-missing");
  const auto r = run_cli({"--out", out.string(), "stats", "--articles", "/nonexistent.jsonl"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("agreement and eval on the fixtures") {
  const auto out = testing::make_temp_dir("cli-agree");
  const auto r = run_cli({"--out", out.string(), "agreement", "--labels", kFix + "/labels.csv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_file(out / "agreement.csv").find("A,C,0.666") != std::string::npos);
  CHECK(read_file(out / "gold.csv").find("a2,1\n") != std::string::npos);

  const auto base = testing::make_temp_dir("cli-eval");
  const auto e = run_cli({"--out", base.string(), "eval", "--labels", kFix + "/labels.csv",
                          "--baseline", "allneutral"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(read_file(base / "confusion.csv").find("neutral,0,4,0") != std::string::npos);
  CHECK(fs::exists(base / "errors.csv"));

  const auto vm = testing::make_temp_dir("cli-vader");
  const auto v = run_cli({"--out", vm.string(), "eval", "--labels", kFix + "/labels.csv",
                          "--baseline", "vadermax", "--articles", kFix + "/articles.jsonl",
                          "--lexicon", kFix + "/lexicon.tsv"});
  CHECK_MESSAGE(v.code == 0, v.err);
  CHECK(run_cli({"--out", vm.string(), "eval", "--labels", kFix + "/labels.csv", "--baseline",
                 "vadermax"})
            .code == 1);
}

TEST_CASE("freq on the fixtures") {
  const auto out = testing::make_temp_dir("cli-freq");
  const auto r = run_cli({"--out", out.string(), "freq", "--articles", kFix + "/articles.jsonl",
                          "--query", "oil", "--query", "coronavirus"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(out / "frequency.csv"));
  const auto s = run_cli({"--out", out.string(), "freq", "--articles", kFix + "/articles.jsonl",
                          "--query", "the", "--preset", "M3"});
  CHECK(s.code == 1);
}

TEST_CASE("output directory precedence") {
  const auto env_dir = testing::make_temp_dir("cli-env");
  const auto flag_dir = testing::make_temp_dir("cli-flag");
  const auto cfg_dir = testing::make_temp_dir("cli-cfg");
  ::setenv("FINSENT_OUT_DIR", env_dir.string().c_str(), 1);
  const std::vector<std::string> cmd{"agreement", "--labels", kFix + "/labels.csv"};

  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), cmd.begin(), cmd.end());
    return run_cli(head);
  };
  CHECK(with({}).code == 0);
  CHECK(fs::exists(env_dir / "agreement.csv"));

  const auto config = cfg_dir / "run.toml";
  std::ofstream(config) << "out = \"" << (cfg_dir / "o").string() << "\"\n";
  CHECK(with({"--config", config.string()}).code == 0);
  CHECK(fs::exists(cfg_dir / "o" / "agreement.csv"));

  CHECK(with({"--config", config.string(), "--out", flag_dir.string()}).code == 0);
  CHECK(fs::exists(flag_dir / "agreement.csv"));
  ::unsetenv("FINSENT_OUT_DIR");

  std::ofstream(cfg_dir / "bad.toml") << "[agreement]\nno_such_option = 1\n";
  CHECK(with({"--config", (cfg_dir / "bad.toml").string()}).code == 2);
}

TEST_CASE("train, predict, eval and correlate") {
  const auto& f = train_files();
  const auto work = testing::make_temp_dir("cli-pipeline");
  const auto trained = work / "train";
  const auto r = run_cli(train_args(trained));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* name : {"model.ckpt", "train_report.csv", "train_summary.csv", "split.csv",
                           "test_predictions.csv", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(trained / name), name);
  }
  CHECK(manifest(trained)["options"]["epochs"] == "2");

  SUBCASE("config file with a subcommand section") {
    const auto cfg_out = work / "cfg";
    const auto config = work / "train.toml";
    std::ofstream(config) << "seed = 7\n[train]\nepochs = 1\nhidden = 4\n";
    auto args = train_args(cfg_out);
    // drop "--epochs 2" and "--hidden 8" so the file supplies them
    args.resize(args.size() - 4);
    args.insert(args.begin(), {"--config", config.string()});
    const auto c = run_cli(args);
    REQUIRE_MESSAGE(c.code == 0, c.err);
    const auto m = manifest(cfg_out);
    CHECK(m["seed"] == 7);
    CHECK(m["options"]["epochs"] == "1");
    CHECK(m["options"]["hidden"] == "4");
    CHECK(read_file(cfg_out / "train_report.csv").find("\n2,") == std::string::npos);
  }
  SUBCASE("resume continues the epoch count") {
    const auto more = work / "more";
    auto args = train_args(more);
    args.insert(args.end(), {"--resume", (trained / "model.ckpt").string()});
    const auto c = run_cli(args);
    REQUIRE_MESSAGE(c.code == 0, c.err);
    CHECK(read_file(more / "train_report.csv").find("\n4,") != std::string::npos);
    // a different epoch count is fine, a different network shape is not
    auto changed = args;
    const auto at = std::find(changed.begin(), changed.end(), "--filters");
    REQUIRE(at != changed.end());
    *(at + 1) = "5";
    const auto mismatch = run_cli(changed);
    CHECK(mismatch.code == 1);
    CHECK(mismatch.err.find("error: ") == 0);
  }
  SUBCASE("predict, eval, correlate") {
    const auto pred = work / "pred";
    const auto p = run_cli({"--out", pred.string(), "predict", "--checkpoint",
                            (trained / "model.ckpt").string(), "--articles", f.articles.string(),
                            "--embeddings", f.vectors.string(), "--lexicon", f.lexicon.string()});
    REQUIRE_MESSAGE(p.code == 0, p.err);
    const auto preds = read_file(pred / "predictions.csv");
    CHECK(preds.rfind("article_id,date,label\nsyn-0000,", 0) == 0);
    CHECK(std::count(preds.begin(), preds.end(), '\n') == 91);

    const auto ev = work / "eval";
    const auto e = run_cli({"--out", ev.string(), "eval", "--labels", f.labels.string(),
                            "--predictions", (pred / "predictions.csv").string()});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    CHECK(read_file(ev / "metrics.csv").find("weighted,all,") != std::string::npos);

    const auto market = work / "market.csv";
    testing::write_market_csv(market, testing::make_random_walk(parse_date("2020-01-02"), 300,
                                                                3000, 20, 3));
    const auto co = work / "corr";
    const auto c = run_cli({"--out", co.string(), "correlate", "--predictions",
                            (pred / "predictions.csv").string(), "--series",
                            "spx=" + market.string(), "--window", "5", "--tickers", "aapl",
                            "--articles", f.articles.string()});
    REQUIRE_MESSAGE(c.code == 0, c.err);
    CHECK(read_file(co / "correlation.csv").find("spx vs sentiment_smoothed,") != std::string::npos);
    CHECK(fs::exists(co / "series_spx.csv"));
    CHECK(fs::exists(co / "ticker_subset.csv"));

    const auto late = work / "late.csv";
    testing::write_market_csv(late, testing::make_random_walk(parse_date("2030-01-02"), 20,
                                                              3000, 20, 3));
    const auto bad = run_cli({"--out", co.string(), "correlate", "--predictions",
                              (pred / "predictions.csv").string(), "--series",
                              "spx=" + late.string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("empty intersection") != std::string::npos);
  }
}
