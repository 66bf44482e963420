#pragma once

// Synthetic corpora and market data with known ground truth.

#include <filesystem>
#include <string>
#include <vector>

#include "finsent/corpus.hpp"
#include "finsent/embeddings.hpp"
#include "finsent/lexicon.hpp"
#include "finsent/marketcorr.hpp"

namespace finsent::testing {

/// Articles whose class is fully determined by planted cue words; every
/// other word is class-independent filler.
struct CueCorpus {
  std::vector<corpus::Article> articles;
  std::vector<corpus::GoldLabel> labels;  // annotator "A"
  std::vector<std::string> vocab;         // fillers + cues, lowercase
  std::vector<std::vector<std::string>> cues;  // by class_index
};

CueCorpus make_cue_corpus(std::size_t per_class, std::uint64_t seed);

/// Random normal vectors (scale 0.5) for every vocabulary word.
embeddings::EmbeddingTable make_embeddings(const std::vector<std::string>& vocab, std::size_t dim,
                                           std::uint64_t seed);

/// Negative cues -2, positive cues +2, nothing else.
lexicon::Lexicon make_cue_lexicon(const CueCorpus& corpus);

/// Weekday close prices from a seeded random walk, `Date,Open,...` layout.
std::vector<marketcorr::MarketBar> make_random_walk(Date first, std::size_t trading_days,
                                                   double start, double step_sd,
                                                   std::uint64_t seed);

/// Sentiment articles over ~250 trading days plus a market series built so
/// that, after weekend removal and a `window`-entry trailing mean, the
/// smoothed daily sentiment correlates with the close at exactly `rho`.
struct PlantedCorrelation {
  std::vector<corpus::Article> articles;
  std::vector<SentimentLabel> labels;
  std::vector<marketcorr::MarketBar> bars;
  std::vector<double> smoothed_oracle;  // per trading day, built by the test oracle
  std::vector<double> close;            // per trading day
};

PlantedCorrelation make_planted_correlation(double rho, std::size_t trading_days,
                                            std::size_t window, std::uint64_t seed);

void write_articles_jsonl(const std::filesystem::path& path,
                          const std::vector<corpus::Article>& articles);
void write_labels_csv(const std::filesystem::path& path,
                      const std::vector<corpus::GoldLabel>& labels);
void write_embeddings_txt(const std::filesystem::path& path, const embeddings::EmbeddingTable& table);
void write_lexicon_tsv(const std::filesystem::path& path, const CueCorpus& corpus);
void write_market_csv(const std::filesystem::path& path,
                      const std::vector<marketcorr::MarketBar>& bars);

/// Fresh empty directory under the system temp dir.
std::filesystem::path make_temp_dir(const std::string& tag);

/// Whole file as bytes.
std::string read_file(const std::filesystem::path& path);

}  // namespace finsent::testing
