#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finsent/common.hpp"
#include "finsent/lexicon.hpp"

namespace finsent::embeddings {

/// Token -> fixed-length float32 vector. Tokens keep insertion order so a
/// table written back to text reproduces its source layout.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  /// Throws ValidationError when values.size() != dim(). Returns true if an
  /// existing vector was overwritten.
  bool insert(const std::string& token, std::span<const float> values);

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  /// Empty span when the token is absent.
  std::span<const float> find(const std::string& token) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::set<std::string>& synthetic_tokens() const noexcept { return synthetic_; }
  void mark_synthetic(const std::string& token);

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> storage_;  // row-major, one row per token
  std::set<std::string> synthetic_;
};

/// Text vectors, `token v1 ... vN` per line. A leading `count dim` header
/// line is detected and skipped. Duplicates keep the last vector.
EmbeddingTable load_embedding_table(const std::filesystem::path& path, std::size_t expected_dim,
                                    std::vector<std::string>* warnings = nullptr);

/// Writes the table in the text format above (no header), exact float32
/// round trip.
void write_embedding_table(std::ostream& out, const EmbeddingTable& table);

inline constexpr float kDefaultSyntheticFill = -5.99f;

/// {coronavirus, covid19, 2019ncov, covid, sarscov2}
const std::set<std::string>& default_covid_tokens();

/// Maps each token to the constant vector [fill_value] * dim and records it
/// as synthetic. Existing tokens are overwritten with a warning.
EmbeddingTable add_synthetic_covid_embeddings(EmbeddingTable table,
                                              const std::set<std::string>& tokens,
                                              float fill_value = kDefaultSyntheticFill,
                                              std::vector<std::string>* warnings = nullptr);

enum class PadPolicy { post, pre };
enum class TokenSlot : std::uint8_t { known, unknown, pad };
enum class LexiconFeatures { none, per_token, summary };

struct EmbedOptions {
  std::size_t max_len = 40;
  PadPolicy pad = PadPolicy::post;
  LexiconFeatures lexicon_features = LexiconFeatures::none;
  const lexicon::Lexicon* lexicon = nullptr;  // required unless features are none
};

/// Row-major max_len x feature_dim matrix. Unknown tokens and padding rows
/// are zero (the lexicon channel of an unknown token still carries its score).
struct EmbeddedDoc {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> matrix;
  std::vector<TokenSlot> mask;
  double missing_fraction = 0.0;  // unknown / non-pad positions
  std::vector<float> doc_features;  // appended after pooling by the model

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(matrix).subspan(i * cols, cols);
  }
};

std::size_t feature_dim(std::size_t embedding_dim, LexiconFeatures features);
std::size_t doc_feature_dim(LexiconFeatures features);

EmbeddedDoc embed_tokens(const EmbeddingTable& table, std::span<const std::string> tokens,
                         const EmbedOptions& options = {});

struct TokenCount {
  std::string token;
  std::size_t count = 0;
};

struct CoverageReport {
  double missing_percent = 0.0;
  std::size_t unique_tokens = 0;
  std::size_t missing_unique = 0;
  std::vector<TokenCount> missing_tokens_ranked;  // by corpus frequency, desc
};

CoverageReport coverage_report(const EmbeddingTable& table,
                               const std::vector<std::vector<std::string>>& corpus_tokens);

void write_coverage_csv(std::ostream& out, const CoverageReport& report);

}  // namespace finsent::embeddings
