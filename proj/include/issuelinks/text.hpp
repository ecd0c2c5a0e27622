#pragma once

// Word tokenization, smoothed TF-IDF, cosine similarity and text-length
// measures over issue pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "json.hpp"

#include "issuelinks/detail/unicode.hpp"
#include "issuelinks/error.hpp"

namespace issuelinks {

struct TokenizerOptions {
  std::size_t min_token_length = 2;  // in code points
};

/// Lowercased NFC tokens split on runs of non-alphanumeric characters.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {}) {
  std::vector<std::string> tokens;
  if (text.empty()) return tokens;
  icu::UnicodeString s = detail::to_nfc_unicode(text);
  s.toLower(icu::Locale::getRoot());

  icu::UnicodeString current;
  std::size_t current_len = 0;
  auto flush = [&] {
    if (current_len >= opts.min_token_length && current_len > 0) {
      tokens.push_back(detail::to_utf8(current));
    }
    current.remove();
    current_len = 0;
  };
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    if (u_isalnum(c)) {
      current.append(c);
      ++current_len;
    } else {
      flush();
    }
    i += U16_LENGTH(c);
  }
  flush();
  return tokens;
}

/// Sparse vector with strictly increasing indices and no stored zeros.
struct SparseVector {
  std::size_t dimension = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
  }

  double norm() const { return std::sqrt(squared_norm()); }

  bool operator==(const SparseVector&) const = default;
};

inline double dot(const SparseVector& u, const SparseVector& v) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < u.indices.size() && j < v.indices.size()) {
    if (u.indices[i] == v.indices[j]) {
      s += u.values[i++] * v.values[j++];
    } else if (u.indices[i] < v.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

/// dot(u,v) / (|u| |v|), or 0 when either vector is zero.
inline double cosine_similarity(const SparseVector& u, const SparseVector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

struct TfidfOptions {
  TokenizerOptions tokenizer;
  std::size_t min_document_frequency = 2;
};

/// Smoothed TF-IDF: idf(t) = ln((1 + N) / (1 + df(t))) + 1, raw term counts,
/// L2-normalized output. Vocabulary indices follow lexicographic token order.
class TfidfModel {
 public:
  TfidfModel() = default;

  static TfidfModel fit(std::span<const std::string> documents, const TfidfOptions& opts = {}) {
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(documents.size());
    for (const auto& d : documents) tokenized.push_back(tokenize(d, opts.tokenizer));
    return fit_tokens(tokenized, opts);
  }

  static TfidfModel fit_tokens(std::span<const std::vector<std::string>> documents,
                               const TfidfOptions& opts = {}) {
    if (documents.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot fit TF-IDF on zero documents");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : documents) {
      std::vector<std::string> unique(doc.begin(), doc.end());
      std::sort(unique.begin(), unique.end());
      unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
      for (auto& t : unique) ++df[t];
    }
    TfidfModel m;
    m.options_ = opts;
    m.document_count_ = documents.size();
    const double n = static_cast<double>(documents.size());
    for (const auto& [token, freq] : df) {
      if (freq < opts.min_document_frequency) continue;
      m.vocabulary_.emplace(token, static_cast<std::uint32_t>(m.terms_.size()));
      m.terms_.push_back(token);
      m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(freq))) + 1.0);
    }
    return m;
  }

  std::size_t dimension() const { return terms_.size(); }
  std::size_t document_count() const { return document_count_; }
  const TfidfOptions& options() const { return options_; }
  std::span<const std::string> terms() const { return terms_; }
  std::span<const double> idf_values() const { return idf_; }

  std::optional<double> idf(std::string_view token) const {
    auto it = vocabulary_.find(std::string(token));
    if (it == vocabulary_.end()) return std::nullopt;
    return idf_[it->second];
  }

  std::optional<std::uint32_t> index_of(std::string_view token) const {
    auto it = vocabulary_.find(std::string(token));
    if (it == vocabulary_.end()) return std::nullopt;
    return it->second;
  }

  SparseVector transform_tokens(std::span<const std::string> tokens) const {
    std::map<std::uint32_t, double> counts;
    for (const auto& t : tokens) {
      if (auto it = vocabulary_.find(t); it != vocabulary_.end()) counts[it->second] += 1.0;
    }
    SparseVector v;
    v.dimension = dimension();
    v.indices.reserve(counts.size());
    v.values.reserve(counts.size());
    double sq = 0.0;
    for (const auto& [idx, tf] : counts) {
      const double w = tf * idf_[idx];
      v.indices.push_back(idx);
      v.values.push_back(w);
      sq += w * w;
    }
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& w : v.values) w *= inv;
    }
    return v;
  }

  SparseVector transform(std::string_view document) const {
    return transform_tokens(tokenize(document, options_.tokenizer));
  }

  nlohmann::json to_json() const {
    nlohmann::json vocab = nlohmann::json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i) vocab.push_back({terms_[i], idf_[i]});
    return {{"document_count", document_count_},
            {"min_token_length", options_.tokenizer.min_token_length},
            {"min_document_frequency", options_.min_document_frequency},
            {"vocabulary", vocab}};
  }

  static TfidfModel from_json(const nlohmann::json& j) {
    TfidfModel m;
    m.document_count_ = j.at("document_count").get<std::size_t>();
    m.options_.tokenizer.min_token_length = j.at("min_token_length").get<std::size_t>();
    m.options_.min_document_frequency = j.at("min_document_frequency").get<std::size_t>();
    for (const auto& entry : j.at("vocabulary")) {
      m.vocabulary_.emplace(entry.at(0).get<std::string>(), static_cast<std::uint32_t>(m.terms_.size()));
      m.terms_.push_back(entry.at(0).get<std::string>());
      m.idf_.push_back(entry.at(1).get<double>());
    }
    return m;
  }

 private:
  TfidfOptions options_;
  std::size_t document_count_ = 0;
  std::unordered_map<std::string, std::uint32_t> vocabulary_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
};

struct IssueText {
  std::string title;
  std::string description;

  // Title and description joined by a single space.
  std::string document() const {
    if (description.empty()) return title;
    if (title.empty()) return description;
    return title + " " + description;
  }

  bool operator==(const IssueText&) const = default;
};

inline std::size_t issue_length(const IssueText& issue, const TokenizerOptions& opts = {}) {
  return tokenize(issue.title, opts).size() + tokenize(issue.description, opts).size();
}

struct PairLength {
  std::size_t total = 0;       // length_a + length_b
  std::size_t difference = 0;  // |length_a - length_b|
};

inline PairLength pair_length(const IssueText& a, const IssueText& b, const TokenizerOptions& opts = {}) {
  const std::size_t la = issue_length(a, opts);
  const std::size_t lb = issue_length(b, opts);
  return {la + lb, la > lb ? la - lb : lb - la};
}

inline double pair_cosine(const TfidfModel& model, const IssueText& a, const IssueText& b) {
  return cosine_similarity(model.transform(a.document()), model.transform(b.document()));
}

}  // namespace issuelinks
