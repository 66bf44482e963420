#include "finsent/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "finsent/corpus.hpp"
#include "finsent/csv.hpp"

namespace finsent::embeddings {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
}

bool EmbeddingTable::insert(const std::string& token, std::span<const float> values) {
  if (values.size() != dim_) {
    throw ValidationError("vector for '" + token + "' has " + std::to_string(values.size()) +
                          " values, expected " + std::to_string(dim_));
  }
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) {
    tokens_.push_back(token);
    storage_.insert(storage_.end(), values.begin(), values.end());
  } else {
    std::copy(values.begin(), values.end(), storage_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
  }
  return !inserted;
}

std::span<const float> EmbeddingTable::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return {};
  return std::span<const float>(storage_).subspan(it->second * dim_, dim_);
}

void EmbeddingTable::mark_synthetic(const std::string& token) {
  if (!contains(token)) throw ValidationError("cannot mark unknown token '" + token + "' synthetic");
  synthetic_.insert(token);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path, std::size_t expected_dim,
                                    std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  EmbeddingTable table(expected_dim);
  std::vector<float> values;
  values.reserve(expected_dim);
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (csv::read_line(in, line)) {
    ++line_no;
    const auto fields = corpus::split_whitespace(line);
    if (fields.empty()) continue;

    auto is_integer = [](std::string_view s) {
      return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (first_content && expected_dim != 1 && fields.size() == 2 && is_integer(fields[0]) &&
        is_integer(fields[1])) {
      first_content = false;
      continue;  // word2vec `count dim` header
    }
    first_content = false;

    const std::string token(fields[0]);
    if (fields.size() - 1 != expected_dim) {
      throw ParseError(path.string(), line_no,
                       "token '" + token + "' has " + std::to_string(fields.size() - 1) +
                           " values, expected " + std::to_string(expected_dim));
    }
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
      if (ec != std::errc{} || ptr != fields[i].data() + fields[i].size() || !std::isfinite(v)) {
        throw ParseError(path.string(), line_no,
                         "token '" + token + "': bad value '" + std::string(fields[i]) + "'");
      }
      values.push_back(v);
    }
    if (table.insert(token, values) && warnings) {
      warnings->push_back(path.string() + ":" + std::to_string(line_no) + ": duplicate token '" +
                          token + "', keeping later vector");
    }
  }
  return table;
}

void write_embedding_table(std::ostream& out, const EmbeddingTable& table) {
  char buf[32];
  for (const auto& token : table.tokens()) {
    out << token;
    for (float v : table.find(token)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

const std::set<std::string>& default_covid_tokens() {
  static const std::set<std::string> tokens{"coronavirus", "covid19", "2019ncov", "covid",
                                            "sarscov2"};
  return tokens;
}

EmbeddingTable add_synthetic_covid_embeddings(EmbeddingTable table,
                                              const std::set<std::string>& tokens,
                                              float fill_value, std::vector<std::string>* warnings) {
  const std::vector<float> constant(table.dim(), fill_value);
  for (const auto& token : tokens) {
    if (table.insert(token, constant) && warnings) {
      warnings->push_back("synthetic embedding overwrites existing vector for '" + token + "'");
    }
    table.mark_synthetic(token);
  }
  return table;
}

std::size_t feature_dim(std::size_t embedding_dim, LexiconFeatures features) {
  return embedding_dim + (features == LexiconFeatures::per_token ? 1 : 0);
}

std::size_t doc_feature_dim(LexiconFeatures features) {
  return features == LexiconFeatures::summary ? lexicon::kSummaryFeatureCount : 0;
}

EmbeddedDoc embed_tokens(const EmbeddingTable& table, std::span<const std::string> tokens,
                         const EmbedOptions& options) {
  if (options.max_len == 0) throw ValidationError("embed_tokens: max_len must be >= 1");
  if (options.lexicon_features != LexiconFeatures::none && options.lexicon == nullptr) {
    throw ValidationError("embed_tokens: lexicon features requested without a lexicon");
  }
  const bool lexicon_channel = options.lexicon_features == LexiconFeatures::per_token;

  EmbeddedDoc doc;
  doc.rows = options.max_len;
  doc.cols = feature_dim(table.dim(), options.lexicon_features);
  doc.matrix.assign(doc.rows * doc.cols, 0.0f);
  doc.mask.assign(doc.rows, TokenSlot::pad);

  const auto used = std::min(tokens.size(), options.max_len);
  const auto offset = options.pad == PadPolicy::pre ? options.max_len - used : 0;
  std::size_t unknown = 0;
  for (std::size_t i = 0; i < used; ++i) {
    const auto r = offset + i;
    float* dst = doc.matrix.data() + r * doc.cols;
    const auto vec = table.find(tokens[i]);
    if (vec.empty()) {
      doc.mask[r] = TokenSlot::unknown;
      ++unknown;
    } else {
      doc.mask[r] = TokenSlot::known;
      std::copy(vec.begin(), vec.end(), dst);
    }
    if (lexicon_channel) {
      dst[table.dim()] = static_cast<float>(options.lexicon->find(tokens[i]).value_or(0.0));
    }
  }
  doc.missing_fraction = used ? static_cast<double>(unknown) / static_cast<double>(used) : 0.0;
  if (options.lexicon_features == LexiconFeatures::summary) {
    const auto summary = lexicon::summary_features(*options.lexicon, tokens.first(used));
    doc.doc_features.assign(summary.begin(), summary.end());
  }
  return doc;
}

CoverageReport coverage_report(const EmbeddingTable& table,
                               const std::vector<std::vector<std::string>>& corpus_tokens) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : corpus_tokens) {
    for (const auto& token : doc) ++counts[token];
  }
  if (counts.empty()) throw ValidationError("coverage_report: corpus has no tokens");
  CoverageReport report;
  report.unique_tokens = counts.size();
  for (const auto& [token, count] : counts) {
    if (!table.contains(token)) report.missing_tokens_ranked.push_back({token, count});
  }
  report.missing_unique = report.missing_tokens_ranked.size();
  report.missing_percent = 100.0 * static_cast<double>(report.missing_unique) /
                           static_cast<double>(report.unique_tokens);
  std::sort(report.missing_tokens_ranked.begin(), report.missing_tokens_ranked.end(),
            [](const TokenCount& a, const TokenCount& b) {
              return a.count != b.count ? a.count > b.count : a.token < b.token;
            });
  return report;
}

void write_coverage_csv(std::ostream& out, const CoverageReport& report) {
  out << "token,count\n";
  for (const auto& entry : report.missing_tokens_ranked) {
    out << csv::escape(entry.token) << ',' << entry.count << '\n';
  }
}

}  // namespace finsent::embeddings
