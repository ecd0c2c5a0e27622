#pragma once

// Labeled link-type datasets: label selection, non-link sampling and the
// stratified 64/16/20 train/validation/test split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "issuelinks/corpus.hpp"
#include "issuelinks/detail/hash.hpp"
#include "issuelinks/detail/random.hpp"
#include "issuelinks/error.hpp"
#include "issuelinks/text.hpp"

namespace issuelinks {

inline constexpr std::string_view kNonLink = "NON_LINK";

enum class Split { Train, Val, Test, Unassigned };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "TRAIN";
    case Split::Val: return "VAL";
    case Split::Test: return "TEST";
    case Split::Unassigned: return "UNASSIGNED";
  }
  return "UNASSIGNED";
}

inline Split parse_split(std::string_view s) {
  if (s == "TRAIN") return Split::Train;
  if (s == "VAL") return Split::Val;
  if (s == "TEST") return Split::Test;
  if (s == "UNASSIGNED") return Split::Unassigned;
  throw Error(ErrorKind::SchemaError, "unknown split '" + std::string(s) + "'");
}

struct LinkExample {
  std::string example_id;
  std::string repo_id;
  std::string key_a;
  std::string key_b;
  IssueText a;
  IssueText b;
  std::string label;
  Split split = Split::Unassigned;

  bool operator==(const LinkExample&) const = default;
};

struct DatasetSpec {
  double min_repo_share = 0.01;
  double global_common_share = 0.02;
  std::int64_t min_repo_links = 50;
  std::uint64_t seed = 0;
  std::set<std::string> closed_statuses = {"Closed", "Resolved", "Done"};
  bool same_project_non_links = false;

  void validate() const {
    if (!(min_repo_share > 0.0 && min_repo_share < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "min_repo_share must lie in (0, 1)");
    }
    if (!(global_common_share >= 0.0 && global_common_share < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "global_common_share must lie in [0, 1)");
    }
  }
};

/// Stable across runs and platforms; depends only on the repository and the
/// unordered pair.
inline std::string example_id(std::string_view repo_id, std::string_view key_a, std::string_view key_b) {
  if (key_b < key_a) std::swap(key_a, key_b);
  std::string buf;
  buf.reserve(repo_id.size() + key_a.size() + key_b.size() + 2);
  buf.append(repo_id).push_back('\x1f');
  buf.append(key_a).push_back('\x1f');
  buf.append(key_b);
  return detail::to_hex(detail::fnv1a(buf));
}

inline std::map<std::string, std::int64_t> link_type_counts(const RepositorySnapshot& snap) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& l : snap.links) ++counts[l.link_type];
  return counts;
}

namespace detail {

// Descending count, ties alphabetical.
inline std::vector<std::string> by_descending_count(const std::map<std::string, std::int64_t>& counts) {
  std::vector<std::pair<std::string, std::int64_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  std::vector<std::string> out;
  for (auto& [k, v] : items) out.push_back(k);
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return ascii_lower(trim(a)) == ascii_lower(trim(b));
}

// Round half to even.
inline std::int64_t round_even(double x) { return static_cast<std::int64_t>(std::nearbyint(x)); }

}  // namespace detail

/// Link types with at least `min_repo_share` of the repository's links, by
/// descending count, followed by NON_LINK.
inline std::vector<std::string> select_label_set(const RepositorySnapshot& snap, const DatasetSpec& spec) {
  spec.validate();
  const auto total = static_cast<std::int64_t>(snap.links.size());
  if (total < spec.min_repo_links) {
    throw Error(ErrorKind::RepoTooSmall, "repository '" + snap.repo_id + "' has " +
                                             std::to_string(total) + " links, fewer than " +
                                             std::to_string(spec.min_repo_links));
  }
  std::map<std::string, std::int64_t> kept;
  for (const auto& [type, count] : link_type_counts(snap)) {
    if (static_cast<double>(count) / static_cast<double>(total) >= spec.min_repo_share) kept[type] = count;
  }
  auto labels = detail::by_descending_count(kept);
  labels.emplace_back(kNonLink);
  return labels;
}

/// Types whose share of all links across every repository reaches the global
/// threshold, by descending global count.
inline std::vector<std::string> common_types(std::span<const std::map<std::string, std::int64_t>> per_repo_counts,
                                             const DatasetSpec& spec) {
  std::map<std::string, std::int64_t> global;
  std::int64_t total = 0;
  for (const auto& counts : per_repo_counts) {
    for (const auto& [type, n] : counts) {
      global[type] += n;
      total += n;
    }
  }
  std::map<std::string, std::int64_t> kept;
  if (total == 0) return {};
  for (const auto& [type, n] : global) {
    if (static_cast<double>(n) / static_cast<double>(total) >= spec.global_common_share) kept[type] = n;
  }
  return detail::by_descending_count(kept);
}

inline std::vector<std::string> common_types(std::span<const RepositorySnapshot> snapshots,
                                             const DatasetSpec& spec) {
  std::vector<std::map<std::string, std::int64_t>> counts;
  for (const auto& s : snapshots) counts.push_back(link_type_counts(s));
  return common_types(counts, spec);
}

inline bool is_non_link_eligible(const Issue& issue, const DatasetSpec& spec) {
  if (issue.is_private) return false;
  if (issue.resolution && detail::iequals(*issue.resolution, "duplicate")) return false;
  for (const auto& status : spec.closed_statuses) {
    if (detail::iequals(status, issue.status)) return true;
  }
  return false;
}

/// Number of NON_LINK examples to draw: the mean of the per-label link counts,
/// rounded half to even.
inline std::int64_t non_link_target(const RepositorySnapshot& snap, std::span<const std::string> labels) {
  const auto counts = link_type_counts(snap);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& label : labels) {
    if (label == kNonLink) continue;
    auto it = counts.find(label);
    sum += it == counts.end() ? 0.0 : static_cast<double>(it->second);
    ++n;
  }
  if (n == 0) return 0;
  return detail::round_even(sum / static_cast<double>(n));
}

/// Rejection-samples unordered pairs of eligible (closed, not resolved as
/// duplicate) issues that share no link of any type, including pairs removed
/// as multi-links. Gives up after 100x the requested number of draws.
inline std::vector<LinkExample> sample_non_links(const RepositorySnapshot& snap,
                                                 std::span<const std::string> labels,
                                                 const DatasetSpec& spec) {
  const std::int64_t target = non_link_target(snap, labels);
  std::vector<LinkExample> out;
  if (target <= 0) return out;

  std::vector<const Issue*> eligible;
  for (const auto& [key, issue] : snap.issues) {
    if (is_non_link_eligible(issue, spec)) eligible.push_back(&issue);
  }
  std::map<std::string, std::uint64_t> position;
  for (std::size_t i = 0; i < eligible.size(); ++i) position.emplace(eligible[i]->issue_key, i);

  // Candidate groups: the whole repository, or one group per project.
  std::vector<std::vector<std::uint64_t>> groups;
  if (spec.same_project_non_links) {
    std::map<std::string, std::vector<std::uint64_t>> by_project;
    for (std::size_t i = 0; i < eligible.size(); ++i) by_project[eligible[i]->project_key].push_back(i);
    for (auto& [p, members] : by_project) groups.push_back(std::move(members));
  } else {
    std::vector<std::uint64_t> all(eligible.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    groups.push_back(std::move(all));
  }

  const std::uint64_t n = eligible.size();
  auto code = [n](std::uint64_t i, std::uint64_t j) { return i < j ? i * n + j : j * n + i; };

  std::unordered_set<std::uint64_t> forbidden;
  auto forbid = [&](const std::string& a, const std::string& b) {
    auto ia = position.find(a);
    auto ib = position.find(b);
    if (ia == position.end() || ib == position.end()) return;
    if (spec.same_project_non_links &&
        eligible[ia->second]->project_key != eligible[ib->second]->project_key) {
      return;
    }
    forbidden.insert(code(ia->second, ib->second));
  };
  for (const auto& l : snap.links) forbid(l.key_a, l.key_b);
  for (const auto& [a, b] : snap.multilink_pairs) forbid(a, b);

  // Cumulative pair counts per group for weighted group selection.
  std::vector<std::uint64_t> cumulative;
  std::uint64_t total_pairs = 0;
  for (const auto& g : groups) {
    const std::uint64_t m = g.size();
    total_pairs += m < 2 ? 0 : m * (m - 1) / 2;
    cumulative.push_back(total_pairs);
  }
  const auto requested = static_cast<std::uint64_t>(target);
  if (total_pairs < forbidden.size() + requested) {
    throw Error(ErrorKind::InsufficientCandidates,
                "repository '" + snap.repo_id + "' has " + std::to_string(total_pairs - forbidden.size()) +
                    " eligible unlinked pairs, " + std::to_string(requested) + " requested");
  }

  detail::Rng rng(detail::derive_seed(spec.seed, snap.repo_id + "/non-links"));
  std::unordered_set<std::uint64_t> taken;
  const std::uint64_t max_draws = 100 * requested;
  std::uint64_t draws = 0;
  out.reserve(requested);
  while (out.size() < requested) {
    if (draws++ >= max_draws) {
      throw Error(ErrorKind::InsufficientCandidates,
                  "non-link sampling for '" + snap.repo_id + "' exceeded " + std::to_string(max_draws) +
                      " draws with " + std::to_string(out.size()) + " of " + std::to_string(requested) +
                      " pairs found");
    }
    const std::uint64_t r = rng.below(total_pairs);
    const auto g = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const auto& members = groups[g];
    const std::uint64_t i = members[rng.below(members.size())];
    const std::uint64_t j = members[rng.below(members.size())];
    if (i == j) continue;
    const std::uint64_t c = code(i, j);
    if (forbidden.contains(c) || !taken.insert(c).second) continue;

    const Issue& x = *eligible[i];
    const Issue& y = *eligible[j];
    const auto [ka, kb] = canonical_pair(x.issue_key, y.issue_key);
    const Issue& ia = x.issue_key == ka ? x : y;
    const Issue& ib = x.issue_key == ka ? y : x;
    LinkExample e;
    e.example_id = example_id(snap.repo_id, ka, kb);
    e.repo_id = snap.repo_id;
    e.key_a = ka;
    e.key_b = kb;
    e.a = {ia.title, ia.description};
    e.b = {ib.title, ib.description};
    e.label = std::string(kNonLink);
    out.push_back(std::move(e));
  }
  return out;
}

struct SplitCounts {
  std::int64_t train = 0;
  std::int64_t val = 0;
  std::int64_t test = 0;
};

/// Per-class split sizes: validation and test take the nearest integer to
/// 16% and 20% (at least one each), training takes the remainder.
inline SplitCounts split_counts(std::int64_t n) {
  if (n < 3) {
    throw Error(ErrorKind::StratificationImpossible,
                "a class with " + std::to_string(n) + " examples cannot be split three ways");
  }
  SplitCounts c;
  c.test = std::max<std::int64_t>(1, detail::round_even(0.20 * static_cast<double>(n)));
  c.val = std::max<std::int64_t>(1, detail::round_even(0.16 * static_cast<double>(n)));
  c.train = n - c.test - c.val;
  return c;
}

/// Assigns TRAIN/VAL/TEST within each label by a seeded shuffle. Examples are
/// ordered by example_id before shuffling, so the result does not depend on
/// input order.
inline void stratified_split(std::vector<LinkExample>& examples, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < examples.size(); ++i) by_label[examples[i].label].push_back(i);
  for (auto& [label, idx] : by_label) {
    const SplitCounts c = split_counts(static_cast<std::int64_t>(idx.size()));
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t x, std::size_t y) { return examples[x].example_id < examples[y].example_id; });
    detail::Rng rng(detail::derive_seed(seed, "split/" + label));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto pos = static_cast<std::int64_t>(k);
      examples[idx[k]].split = pos < c.test ? Split::Test : pos < c.test + c.val ? Split::Val : Split::Train;
    }
  }
}

struct Dataset {
  std::string repo_id;
  std::vector<std::string> labels;
  std::uint64_t seed = 0;
  std::vector<LinkExample> examples;

  std::map<std::string, std::map<std::string, std::int64_t>> counts_by_split() const {
    std::map<std::string, std::map<std::string, std::int64_t>> out;
    for (const auto& e : examples) ++out[std::string(to_string(e.split))][e.label];
    return out;
  }
};

/// Full pipeline for one repository: selected labels, their links, sampled
/// non-links, then the stratified split.
inline Dataset build_dataset(const RepositorySnapshot& snap, const DatasetSpec& spec) {
  Dataset ds;
  ds.repo_id = snap.repo_id;
  ds.seed = spec.seed;
  ds.labels = select_label_set(snap, spec);
  const std::set<std::string> wanted(ds.labels.begin(), ds.labels.end());
  for (const auto& l : snap.links) {
    if (!wanted.contains(l.link_type)) continue;
    const Issue& ia = snap.issues.at(l.key_a);
    const Issue& ib = snap.issues.at(l.key_b);
    ds.examples.push_back(LinkExample{example_id(snap.repo_id, l.key_a, l.key_b), snap.repo_id, l.key_a,
                                      l.key_b, {ia.title, ia.description}, {ib.title, ib.description},
                                      l.link_type, Split::Unassigned});
  }
  auto non_links = sample_non_links(snap, ds.labels, spec);
  std::move(non_links.begin(), non_links.end(), std::back_inserter(ds.examples));
  stratified_split(ds.examples, detail::derive_seed(spec.seed, snap.repo_id));
  std::sort(ds.examples.begin(), ds.examples.end(), [](const LinkExample& x, const LinkExample& y) {
    if (x.split != y.split) return x.split < y.split;
    return x.example_id < y.example_id;
  });
  return ds;
}

inline nlohmann::json to_json(const LinkExample& e) {
  return {{"example_id", e.example_id}, {"repo_id", e.repo_id},
          {"key_a", e.key_a},           {"key_b", e.key_b},
          {"title_a", e.a.title},       {"description_a", e.a.description},
          {"title_b", e.b.title},       {"description_b", e.b.description},
          {"label", e.label},           {"split", to_string(e.split)}};
}

inline LinkExample example_from_json(const nlohmann::json& j) {
  try {
    LinkExample e;
    e.example_id = j.at("example_id").get<std::string>();
    e.repo_id = j.at("repo_id").get<std::string>();
    e.key_a = j.at("key_a").get<std::string>();
    e.key_b = j.at("key_b").get<std::string>();
    e.a = {j.at("title_a").get<std::string>(), j.value("description_a", std::string{})};
    e.b = {j.at("title_b").get<std::string>(), j.value("description_b", std::string{})};
    e.label = j.at("label").get<std::string>();
    e.split = parse_split(j.value("split", std::string("UNASSIGNED")));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::SchemaError, std::string("dataset record: ") + ex.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& e : ds.examples) out << to_json(e).dump() << '\n';
}

/// Sidecar metadata for a dataset file.
inline nlohmann::json dataset_metadata(const Dataset& ds, const nlohmann::json& run_meta = nlohmann::json::object()) {
  return {{"repo_id", ds.repo_id},
          {"labels", ds.labels},
          {"seed", ds.seed},
          {"example_count", ds.examples.size()},
          {"counts", ds.counts_by_split()},
          {"meta", run_meta}};
}

inline std::vector<LinkExample> read_examples(std::istream& in) {
  std::vector<LinkExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::SchemaError, "dataset line " + std::to_string(line_no) + " is not a JSON object");
    }
    out.push_back(example_from_json(j));
  }
  return out;
}

/// Labels present in a set of examples: descending count, NON_LINK last.
inline std::vector<std::string> infer_labels(std::span<const LinkExample> examples) {
  std::map<std::string, std::int64_t> counts;
  bool has_non_link = false;
  for (const auto& e : examples) {
    if (e.label == kNonLink) {
      has_non_link = true;
    } else {
      ++counts[e.label];
    }
  }
  auto labels = detail::by_descending_count(counts);
  if (has_non_link) labels.emplace_back(kNonLink);
  return labels;
}

/// Reads `path` and, when present, its `<path>.meta.json` sidecar.
inline Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset " + path);
  Dataset ds;
  ds.examples = read_examples(in);
  std::ifstream meta_in(path + ".meta.json");
  if (meta_in) {
    auto meta = nlohmann::json::parse(meta_in, nullptr, false);
    if (meta.is_discarded()) throw Error(ErrorKind::SchemaError, "dataset metadata is not valid JSON");
    ds.repo_id = meta.value("repo_id", std::string{});
    ds.labels = meta.value("labels", std::vector<std::string>{});
    ds.seed = meta.value("seed", std::uint64_t{0});
  }
  if (ds.labels.empty()) ds.labels = infer_labels(ds.examples);
  if (ds.repo_id.empty() && !ds.examples.empty()) ds.repo_id = ds.examples.front().repo_id;
  return ds;
}

}  // namespace issuelinks
