#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "issuelinks.hpp"

namespace testutil {

using namespace issuelinks;

inline Issue make_issue(const std::string& repo, const std::string& key, const std::string& title,
                        const std::string& description = "", const std::string& status = "Closed",
                        std::optional<std::string> resolution = std::nullopt, bool is_private = false) {
  Issue i;
  i.repo_id = repo;
  i.issue_key = key;
  i.project_key = derive_project_key(key);
  i.title = title;
  i.description = description;
  i.issue_type = "Bug";
  i.status = status;
  i.resolution = std::move(resolution);
  i.created = "2015-03-01T10:00:00Z";
  i.is_private = is_private;
  return i;
}

inline Link make_link(const std::string& repo, const std::string& a, const std::string& b,
                      const std::string& type) {
  auto [x, y] = canonical_pair(a, b);
  return Link{repo, x, y, type};
}

inline std::string key(const std::string& project, int n) { return project + "-" + std::to_string(n); }

/// Synthetic repository: `per_type` links for each type over fresh issues,
/// plus `spare` extra closed issues that carry no link. Titles carry a
/// type-specific vocabulary so that classifiers have a signal.
inline RepositorySnapshot synthetic_snapshot(const std::string& repo,
                                             const std::vector<std::pair<std::string, int>>& per_type,
                                             int spare = 200, std::uint64_t seed = 1) {
  std::vector<Issue> issues;
  std::vector<Link> links;
  std::mt19937_64 rng(seed);
  int next = 1;
  for (const auto& [type, count] : per_type) {
    for (int i = 0; i < count; ++i) {
      const std::string a = key("PRJ", next++);
      const std::string b = key("PRJ", next++);
      const std::string word = "w" + type;
      issues.push_back(make_issue(repo, a, word + " alpha " + std::to_string(rng() % 50), "text " + word));
      issues.push_back(make_issue(repo, b, word + " beta " + std::to_string(rng() % 50), "more " + word));
      links.push_back(make_link(repo, a, b, type));
    }
  }
  for (int i = 0; i < spare; ++i) {
    issues.push_back(make_issue(repo, key("PRJ", next++), "spare issue " + std::to_string(i), "nothing"));
  }
  return build_snapshot(repo, std::move(issues), std::move(links));
}

/// Pair examples whose issues draw words from a per-class vocabulary that no
/// other class uses. With `shuffle_labels` the labels are permuted afterwards,
/// which removes every signal.
inline std::vector<LinkExample> separable_examples(int classes, int per_class, std::uint64_t seed,
                                                   bool shuffle_labels = false) {
  std::mt19937_64 rng(seed);
  std::vector<LinkExample> out;
  int next = 0;
  auto text = [&](int c) {
    std::string s;
    for (int w = 0; w < 8; ++w) s += "c" + std::to_string(c) + "w" + std::to_string(rng() % 30) + " ";
    return s;
  };
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      LinkExample e;
      e.repo_id = "syn";
      e.key_a = key("S", next++);
      e.key_b = key("S", next++);
      e.example_id = example_id(e.repo_id, e.key_a, e.key_b);
      e.a = {text(c), text(c)};
      e.b = {text(c), ""};
      e.label = "T" + std::to_string(c);
      e.split = Split::Train;
      out.push_back(std::move(e));
    }
  }
  if (shuffle_labels) {
    std::vector<std::string> labels;
    for (const auto& e : out) labels.push_back(e.label);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
  }
  return out;
}

inline std::vector<std::string> class_labels(int classes) {
  std::vector<std::string> out;
  for (int c = 0; c < classes; ++c) out.push_back("T" + std::to_string(c));
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("issuelinks_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
