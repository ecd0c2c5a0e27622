#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace issuelinks;

namespace {

TfidfOptions loose() {
  TfidfOptions o;
  o.tokenizer.min_token_length = 1;
  o.min_document_frequency = 1;
  return o;
}

SparseVector raw(std::size_t dim, std::vector<std::uint32_t> idx, std::vector<double> val) {
  SparseVector v;
  v.dimension = dim;
  v.indices = std::move(idx);
  v.values = std::move(val);
  return v;
}

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Fix NPE in Parser!"), (std::vector<std::string>{"fix", "npe", "in", "parser"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("a1-b2_c3"), (std::vector<std::string>{"a1", "b2", "c3"}));
  EXPECT_EQ(tokenize("a b cd"), (std::vector<std::string>{"cd"}));
  TokenizerOptions one;
  one.min_token_length = 1;
  EXPECT_EQ(tokenize("a b cd", one), (std::vector<std::string>{"a", "b", "cd"}));
}

TEST(Tokenize, UnicodeLowercaseAndNfc) {
  // Decomposed "É" (E + U+0301) lowercases and composes to "é".
  EXPECT_EQ(tokenize("CAFE\xCC\x81 Stra\xC3\x9F" "e"), (std::vector<std::string>{"caf\xC3\xA9", "stra\xC3\x9F" "e"}));
  // Non-Latin letters count as alphanumeric; length is in code points.
  EXPECT_EQ(tokenize("\xE6\x97\xA5\xE6\x9C\xAC x"), (std::vector<std::string>{"\xE6\x97\xA5\xE6\x9C\xAC"}));
}

TEST(Tfidf, IdfWorkedExample) {
  const std::vector<std::string> docs{"a", "a", "b"};
  const auto m = TfidfModel::fit(docs, loose());
  EXPECT_NEAR(*m.idf("a"), std::log(4.0 / 3.0) + 1.0, 1e-12);
  EXPECT_NEAR(*m.idf("b"), std::log(2.0) + 1.0, 1e-12);
  EXPECT_NEAR(*m.idf("a"), 1.2877, 1e-4);
  EXPECT_NEAR(*m.idf("b"), 1.6931, 1e-4);
  EXPECT_EQ(m.dimension(), 2u);
  EXPECT_EQ(*m.index_of("a"), 0u);
  EXPECT_EQ(*m.index_of("b"), 1u);
}

TEST(Tfidf, TransformSupportAndNorm) {
  const std::vector<std::string> docs{"a b", "a c"};
  const auto m = TfidfModel::fit(docs, loose());
  const auto v = m.transform("a b");
  ASSERT_EQ(v.nnz(), 2u);
  EXPECT_EQ(v.indices[0], *m.index_of("a"));
  EXPECT_EQ(v.indices[1], *m.index_of("b"));
  EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  EXPECT_TRUE(m.transform("zzz qqq").empty());
}

TEST(Tfidf, EmptyCorpusAndMinDf) {
  EXPECT_THROW(TfidfModel::fit(std::vector<std::string>{}), Error);
  const std::vector<std::string> docs{"alpha beta", "alpha gamma", "delta"};
  const auto m = TfidfModel::fit(docs);
  EXPECT_EQ(m.dimension(), 1u);  // only "alpha" reaches df 2
  EXPECT_TRUE(m.idf("alpha").has_value());
  EXPECT_FALSE(m.idf("beta").has_value());
}

TEST(Tfidf, InvariantsAndPermutationIndependence) {
  std::mt19937_64 rng(7);
  std::vector<std::string> words{"net", "disk", "cpu", "gpu", "ram", "io", "db", "ui", "api", "log"};
  std::vector<std::string> docs;
  for (int d = 0; d < 40; ++d) {
    std::string doc;
    for (int w = 0; w < 6; ++w) doc += words[rng() % words.size()] + " ";
    docs.push_back(doc);
  }
  const auto m1 = TfidfModel::fit(docs);
  auto shuffled = docs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto m2 = TfidfModel::fit(shuffled);
  ASSERT_EQ(m1.dimension(), m2.dimension());
  for (const auto& t : m1.terms()) {
    EXPECT_GT(*m1.idf(t), 0.0);
    EXPECT_DOUBLE_EQ(*m1.idf(t), *m2.idf(t));
  }
  for (const auto& d : docs) {
    const auto v = m1.transform(d);
    for (std::size_t q = 0; q < v.nnz(); ++q) {
      EXPECT_NE(v.values[q], 0.0);
      EXPECT_TRUE(std::isfinite(v.values[q]));
      if (q > 0) {
        EXPECT_LT(v.indices[q - 1], v.indices[q]);
      }
      EXPECT_LT(v.indices[q], m1.dimension());
    }
    EXPECT_EQ(v, m2.transform(d));
  }
}

TEST(Tfidf, JsonRoundTrip) {
  const std::vector<std::string> docs{"one two three", "two three four", "three four five"};
  const auto m = TfidfModel::fit(docs);
  const auto back = TfidfModel::from_json(m.to_json());
  EXPECT_EQ(back.dimension(), m.dimension());
  EXPECT_EQ(back.transform("two three four four"), m.transform("two three four four"));
}

TEST(Cosine, Examples) {
  const auto u = raw(3, {0, 1}, {1, 1});
  const auto v = raw(3, {0, 2}, {1, 1});
  EXPECT_NEAR(cosine_similarity(u, v), 0.5, 1e-12);
  EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-12);
  EXPECT_EQ(cosine_similarity(raw(3, {0}, {2}), raw(3, {1}, {3})), 0.0);
  EXPECT_EQ(cosine_similarity(u, SparseVector{3, {}, {}}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(u, v), cosine_similarity(v, u));
}

TEST(PairLength, Examples) {
  EXPECT_EQ(pair_length({"", ""}, {"", ""}).total, 0u);
  EXPECT_EQ(pair_length({"", ""}, {"", ""}).difference, 0u);
  std::string a, b;
  for (int i = 0; i < 100; ++i) a += "word ";
  for (int i = 0; i < 60; ++i) b += "token ";
  const auto pl = pair_length({a.substr(0, 250), a.substr(250)}, {b, ""});
  EXPECT_EQ(pl.total, 160u);
  EXPECT_EQ(pl.difference, 40u);
  EXPECT_LE(pl.difference, pl.total);
  EXPECT_EQ(issue_length({"Fix NPE", "in parser x"}), 4u);
}

TEST(PairCosine, DocumentJoinsTitleAndDescription) {
  EXPECT_EQ((IssueText{"title", "desc"}).document(), "title desc");
  EXPECT_EQ((IssueText{"title", ""}).document(), "title");
  const std::vector<std::string> docs{"crash on start", "crash on exit", "slow ui"};
  const auto m = TfidfModel::fit(docs);
  EXPECT_NEAR(pair_cosine(m, {"crash", "on start"}, {"crash on", "start"}), 1.0, 1e-12);
}
