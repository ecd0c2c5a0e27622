#pragma once

// Issue/link export ingestion and the cleaned per-repository snapshot.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "issuelinks/detail/unicode.hpp"
#include "issuelinks/error.hpp"

namespace issuelinks {

using json = nlohmann::json;

struct Issue {
  std::string repo_id;
  std::string project_key;
  std::string issue_key;
  std::string title;
  std::string description;
  std::string issue_type;
  std::string status;
  std::optional<std::string> resolution;
  std::string created;
  std::optional<std::string> reporter_id;
  std::optional<std::string> creator_id;
  std::optional<std::string> assignee_id;
  bool is_private = false;

  bool operator==(const Issue&) const = default;
};

/// Undirected typed link in canonical form: key_a < key_b.
struct Link {
  std::string repo_id;
  std::string key_a;
  std::string key_b;
  std::string link_type;

  auto operator<=>(const Link&) const = default;
};

using IssuePair = std::pair<std::string, std::string>;

inline IssuePair canonical_pair(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

struct RepositorySnapshot {
  std::string repo_id;
  int creation_year = 0;
  std::map<std::string, Issue> issues;  // keyed by issue_key, private issues excluded
  std::vector<Link> links;              // sorted, one per unordered pair
  std::vector<IssuePair> multilink_pairs;
  std::int64_t dropped_private_link_count = 0;
  std::int64_t dropped_multilink_count = 0;  // counts pairs, not link records
  std::int64_t dropped_private_issue_count = 0;
  std::int64_t collapsed_duplicate_link_count = 0;

  bool operator==(const RepositorySnapshot&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string location(std::size_t line_no) {
  return line_no == 0 ? std::string{} : " (line " + std::to_string(line_no) + ")";
}

inline const json* field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

inline std::string required_string(const json& obj, const char* name, std::size_t line_no) {
  const json* v = field(obj, name);
  if (v == nullptr) {
    throw Error(ErrorKind::MalformedRecord,
                std::string("missing required field '") + name + "'" + location(line_no));
  }
  if (!v->is_string()) {
    throw Error(ErrorKind::MalformedRecord,
                std::string("field '") + name + "' must be a string" + location(line_no));
  }
  return v->get<std::string>();
}

inline std::optional<std::string> optional_string(const json& obj, const char* name,
                                                  std::size_t line_no) {
  const json* v = field(obj, name);
  if (v == nullptr) return std::nullopt;
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number_integer()) return std::to_string(v->get<std::int64_t>());
  throw Error(ErrorKind::MalformedRecord,
              std::string("field '") + name + "' must be a string" + location(line_no));
}

inline json parse_object(std::string_view line, std::size_t line_no) {
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded()) {
    throw Error(ErrorKind::MalformedRecord, "invalid JSON" + location(line_no));
  }
  if (!obj.is_object()) {
    throw Error(ErrorKind::MalformedRecord, "record is not a JSON object" + location(line_no));
  }
  return obj;
}

}  // namespace detail

/// "ZOOKEEPER-3920" -> "ZOOKEEPER". Empty when the key has no numeric suffix.
inline std::string derive_project_key(std::string_view issue_key) {
  const auto dash = issue_key.rfind('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == issue_key.size()) return {};
  for (char c : issue_key.substr(dash + 1)) {
    if (std::isdigit(static_cast<unsigned char>(c)) == 0) return {};
  }
  return std::string(issue_key.substr(0, dash));
}

/// Year of an ISO-8601 timestamp, if it starts with four digits.
inline std::optional<int> timestamp_year(std::string_view ts) {
  if (ts.size() < 4) return std::nullopt;
  int year = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::isdigit(static_cast<unsigned char>(ts[i])) == 0) return std::nullopt;
    year = year * 10 + (ts[i] - '0');
  }
  return year;
}

inline Issue parse_issue_record(std::string_view line, std::size_t line_no = 0) {
  const json obj = detail::parse_object(line, line_no);
  Issue issue;
  issue.repo_id = detail::required_string(obj, "repo_id", line_no);
  issue.issue_key = detail::trim(detail::required_string(obj, "issue_key", line_no));
  issue.title = detail::nfc(detail::required_string(obj, "title", line_no));
  if (issue.issue_key.empty()) {
    throw Error(ErrorKind::MalformedRecord, "empty issue_key" + detail::location(line_no));
  }
  issue.description = detail::nfc(detail::optional_string(obj, "description", line_no).value_or(""));
  issue.issue_type = detail::optional_string(obj, "issue_type", line_no).value_or("");
  issue.status = detail::optional_string(obj, "status", line_no).value_or("");
  issue.resolution = detail::optional_string(obj, "resolution", line_no);
  issue.created = detail::optional_string(obj, "created", line_no).value_or("");
  issue.reporter_id = detail::optional_string(obj, "reporter_id", line_no);
  issue.creator_id = detail::optional_string(obj, "creator_id", line_no);
  issue.assignee_id = detail::optional_string(obj, "assignee_id", line_no);

  if (const json* p = detail::field(obj, "is_private")) {
    if (!p->is_boolean()) {
      throw Error(ErrorKind::MalformedRecord,
                  "field 'is_private' must be a boolean" + detail::location(line_no));
    }
    issue.is_private = p->get<bool>();
  }

  const std::string derived = derive_project_key(issue.issue_key);
  auto explicit_key = detail::optional_string(obj, "project_key", line_no);
  if (explicit_key && !explicit_key->empty()) {
    if (!derived.empty() && derived != *explicit_key) {
      throw Error(ErrorKind::MalformedRecord, "project_key '" + *explicit_key +
                                                  "' inconsistent with issue_key '" +
                                                  issue.issue_key + "'" + detail::location(line_no));
    }
    issue.project_key = *explicit_key;
  } else if (!derived.empty()) {
    issue.project_key = derived;
  } else {
    throw Error(ErrorKind::MalformedRecord,
                "project_key not derivable from '" + issue.issue_key + "'" +
                    detail::location(line_no));
  }
  return issue;
}

inline json to_json(const Issue& issue) {
  json j = {{"repo_id", issue.repo_id},       {"project_key", issue.project_key},
            {"issue_key", issue.issue_key},   {"title", issue.title},
            {"description", issue.description}, {"issue_type", issue.issue_type},
            {"status", issue.status},         {"created", issue.created},
            {"is_private", issue.is_private}};
  if (issue.resolution) j["resolution"] = *issue.resolution;
  if (issue.reporter_id) j["reporter_id"] = *issue.reporter_id;
  if (issue.creator_id) j["creator_id"] = *issue.creator_id;
  if (issue.assignee_id) j["assignee_id"] = *issue.assignee_id;
  return j;
}

inline json to_json(const Link& link) {
  return {{"repo_id", link.repo_id},
          {"key_a", link.key_a},
          {"key_b", link.key_b},
          {"link_type", link.link_type}};
}

/// Maps raw tracker link names onto canonical labels. Lookup tries the exact
/// name first, then a case-insensitive match; unknown names pass through trimmed.
class TypeNormalizer {
 public:
  TypeNormalizer() = default;

  static TypeNormalizer defaults() {
    TypeNormalizer n;
    static const std::pair<const char*, const char*> kTable[] = {
        {"Relate", "Relate"},           {"Relates", "Relate"},
        {"Related", "Relate"},          {"Relation", "Relate"},
        {"Duplicate", "Duplicate"},     {"Duplicates", "Duplicate"},
        {"Duplicated", "Duplicate"},    {"Block", "Block"},
        {"Blocks", "Block"},            {"Blocked", "Block"},
        {"Blocker", "Block"},           {"Clone", "Clone"},
        {"Clones", "Clone"},            {"Cloned", "Clone"},
        {"Cloners", "Clone"},           {"Depend", "Depend"},
        {"Depends", "Depend"},          {"Dependent", "Depend"},
        {"Dependency", "Depend"},       {"Incorporate", "Incorporate"},
        {"Incorporates", "Incorporate"}, {"Incorporated", "Incorporate"},
        {"Cause", "Cause"},             {"Causes", "Cause"},
        {"Caused", "Cause"},            {"Subtask", "Subtask"},
        {"Sub-task", "Subtask"},        {"Subtasks", "Subtask"},
        {"Epic", "Epic"},               {"Epic-Relation", "Epic"},
        {"Split", "Split"},             {"Splits", "Split"},
        {"Supercede", "Supercede"},     {"Supercedes", "Supercede"},
        {"Superceded", "Supercede"},    {"Supersede", "Supercede"},
        {"Supersedes", "Supercede"},    {"Superseded", "Supercede"},
        {"Replace", "Replace"},         {"Replaces", "Replace"},
        {"Replaced", "Replace"},
    };
    for (const auto& [raw, canonical] : kTable) n.add(raw, canonical);
    return n;
  }

  /// Flat {"raw_name": "canonical_name"} object. Entries override existing ones.
  void merge(const json& table) {
    if (!table.is_object()) throw Error(ErrorKind::SchemaError, "type map must be a JSON object");
    for (const auto& [raw, canonical] : table.items()) {
      if (!canonical.is_string()) {
        throw Error(ErrorKind::SchemaError, "type map value for '" + raw + "' must be a string");
      }
      add(raw, canonical.get<std::string>());
    }
  }

  static TypeNormalizer from_file(const std::string& path, bool with_defaults = true) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open type map " + path);
    json table = json::parse(in, nullptr, false);
    if (table.is_discarded()) throw Error(ErrorKind::SchemaError, "type map is not valid JSON");
    TypeNormalizer n = with_defaults ? defaults() : TypeNormalizer{};
    n.merge(table);
    return n;
  }

  void add(std::string_view raw, std::string_view canonical) {
    exact_[detail::trim(raw)] = detail::trim(canonical);
    folded_[detail::ascii_lower(detail::trim(raw))] = detail::trim(canonical);
  }

  std::string normalize(std::string_view raw) const {
    const std::string key = detail::trim(raw);
    if (auto it = exact_.find(key); it != exact_.end()) return it->second;
    if (auto it = folded_.find(detail::ascii_lower(key)); it != folded_.end()) return it->second;
    return key;
  }

  json to_json() const { return json(exact_); }

 private:
  std::map<std::string, std::string> exact_;
  std::map<std::string, std::string> folded_;
};

inline Link parse_link_record(std::string_view line, const TypeNormalizer& normalizer,
                              std::size_t line_no = 0) {
  const json obj = detail::parse_object(line, line_no);
  Link link;
  link.repo_id = detail::required_string(obj, "repo_id", line_no);
  std::string a = detail::trim(detail::required_string(obj, "key_a", line_no));
  std::string b = detail::trim(detail::required_string(obj, "key_b", line_no));
  const std::string raw_type = detail::required_string(obj, "link_type", line_no);
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::MalformedRecord, "empty issue key" + detail::location(line_no));
  }
  if (a == b) {
    throw Error(ErrorKind::SelfLink, "issue '" + a + "' linked to itself" + detail::location(line_no));
  }
  link.link_type = normalizer.normalize(raw_type);
  if (link.link_type.empty()) {
    throw Error(ErrorKind::MalformedRecord, "empty link_type" + detail::location(line_no));
  }
  auto [ka, kb] = canonical_pair(std::move(a), std::move(b));
  link.key_a = std::move(ka);
  link.key_b = std::move(kb);
  return link;
}

/// Bookkeeping for a lenient or strict JSONL pass.
struct ParseReport {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t malformed = 0;
  std::size_t self_links = 0;
  std::size_t duplicate_issue_keys = 0;
  std::vector<std::string> messages;

  bool has_anomalies() const { return malformed + self_links + duplicate_issue_keys > 0; }
};

namespace detail {

template <typename Parse, typename Sink>
void read_jsonl(std::istream& in, bool strict, ParseReport& report, Parse&& parse, Sink&& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++report.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      sink(parse(line, line_no));
      ++report.records;
    } catch (const Error& e) {
      if (strict) throw;
      if (e.kind() == ErrorKind::SelfLink) {
        ++report.self_links;
      } else {
        ++report.malformed;
      }
      report.messages.emplace_back(e.what());
    }
  }
}

}  // namespace detail

inline std::vector<Issue> read_issues(std::istream& in, bool strict, ParseReport& report) {
  std::vector<Issue> out;
  detail::read_jsonl(
      in, strict, report, [](std::string_view l, std::size_t n) { return parse_issue_record(l, n); },
      [&](Issue&& issue) { out.push_back(std::move(issue)); });
  return out;
}

inline std::vector<Link> read_links(std::istream& in, const TypeNormalizer& normalizer, bool strict,
                                    ParseReport& report) {
  std::vector<Link> out;
  detail::read_jsonl(
      in, strict, report,
      [&](std::string_view l, std::size_t n) { return parse_link_record(l, normalizer, n); },
      [&](Link&& link) { out.push_back(std::move(link)); });
  return out;
}

/// Applies the cleaning rules in order: drop links touching private or absent
/// issues, collapse exact duplicates, then remove every pair that carries two
/// or more distinct types. Nothing here is fatal; anomalies are counted.
inline RepositorySnapshot build_snapshot(std::string repo_id, std::vector<Issue> issues,
                                         std::vector<Link> links,
                                         std::optional<int> creation_year = std::nullopt) {
  RepositorySnapshot snap;
  snap.repo_id = std::move(repo_id);

  std::set<std::string> private_keys;
  std::optional<int> earliest;
  for (auto& issue : issues) {
    if (issue.repo_id != snap.repo_id) continue;
    if (issue.is_private) {
      private_keys.insert(issue.issue_key);
      ++snap.dropped_private_issue_count;
      continue;
    }
    if (auto y = timestamp_year(issue.created)) earliest = earliest ? std::min(*earliest, *y) : *y;
    const std::string key = issue.issue_key;
    snap.issues.try_emplace(key, std::move(issue));
  }
  snap.creation_year = creation_year.value_or(earliest.value_or(0));

  std::map<IssuePair, std::set<std::string>> types_by_pair;
  std::int64_t kept_records = 0;
  for (auto& link : links) {
    if (link.repo_id != snap.repo_id) continue;
    auto [a, b] = canonical_pair(link.key_a, link.key_b);
    if (a == b) continue;
    if (!snap.issues.contains(a) || !snap.issues.contains(b)) {
      ++snap.dropped_private_link_count;
      continue;
    }
    ++kept_records;
    types_by_pair[{std::move(a), std::move(b)}].insert(link.link_type);
  }

  std::int64_t distinct_records = 0;
  for (auto& [pair, types] : types_by_pair) {
    distinct_records += static_cast<std::int64_t>(types.size());
    if (types.size() >= 2) {
      snap.multilink_pairs.push_back(pair);
      ++snap.dropped_multilink_count;
      continue;
    }
    snap.links.push_back(Link{snap.repo_id, pair.first, pair.second, *types.begin()});
  }
  snap.collapsed_duplicate_link_count = kept_records - distinct_records;
  return snap;
}

struct RepoStats {
  std::string repo_id;
  std::int64_t issue_count = 0;
  std::int64_t link_count = 0;
  std::int64_t link_type_count = 0;
  std::int64_t project_count = 0;
  double coverage = 0.0;
  std::optional<double> cross_project_share;
  std::int64_t unique_creators = 0;
  std::int64_t unique_reporters = 0;
  std::int64_t unique_assignees = 0;
  std::int64_t total_users = 0;
  std::optional<double> assignee_issue_ratio;
  int creation_year = 0;
  int age = 0;
};

inline RepoStats repo_stats(const RepositorySnapshot& snap, int reference_year = 2021) {
  RepoStats s;
  s.repo_id = snap.repo_id;
  s.creation_year = snap.creation_year;
  s.age = reference_year - snap.creation_year;
  s.issue_count = static_cast<std::int64_t>(snap.issues.size());
  s.link_count = static_cast<std::int64_t>(snap.links.size());

  std::set<std::string> projects, creators, reporters, assignees, users;
  for (const auto& [key, issue] : snap.issues) {
    projects.insert(issue.project_key);
    if (issue.creator_id) { creators.insert(*issue.creator_id); users.insert(*issue.creator_id); }
    if (issue.reporter_id) { reporters.insert(*issue.reporter_id); users.insert(*issue.reporter_id); }
    if (issue.assignee_id) { assignees.insert(*issue.assignee_id); users.insert(*issue.assignee_id); }
  }
  s.project_count = static_cast<std::int64_t>(projects.size());
  s.unique_creators = static_cast<std::int64_t>(creators.size());
  s.unique_reporters = static_cast<std::int64_t>(reporters.size());
  s.unique_assignees = static_cast<std::int64_t>(assignees.size());
  s.total_users = static_cast<std::int64_t>(users.size());
  if (s.unique_assignees > 0) {
    s.assignee_issue_ratio = static_cast<double>(s.issue_count) / static_cast<double>(s.unique_assignees);
  }

  std::set<std::string> types, linked;
  std::int64_t cross = 0;
  for (const auto& link : snap.links) {
    types.insert(link.link_type);
    linked.insert(link.key_a);
    linked.insert(link.key_b);
    if (snap.issues.at(link.key_a).project_key != snap.issues.at(link.key_b).project_key) ++cross;
  }
  s.link_type_count = static_cast<std::int64_t>(types.size());
  if (s.issue_count > 0) {
    s.coverage = static_cast<double>(linked.size()) / static_cast<double>(s.issue_count);
  }
  if (s.link_count > 0) {
    s.cross_project_share = static_cast<double>(cross) / static_cast<double>(s.link_count);
  }
  return s;
}

inline json to_json(const RepoStats& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"repo_id", s.repo_id},
          {"issues", s.issue_count},
          {"links", s.link_count},
          {"link_types", s.link_type_count},
          {"projects", s.project_count},
          {"coverage", s.coverage},
          {"cross_project_share", opt(s.cross_project_share)},
          {"creators", s.unique_creators},
          {"reporters", s.unique_reporters},
          {"assignees", s.unique_assignees},
          {"total_users", s.total_users},
          {"assignee_issue_ratio", opt(s.assignee_issue_ratio)},
          {"creation_year", s.creation_year},
          {"age", s.age}};
}

// Snapshot artifact: JSON lines. The first record is a header with the
// counters; issues, links and removed multi-link pairs follow, each sorted.
inline void write_snapshot(std::ostream& out, const RepositorySnapshot& snap,
                           const json& metadata = json::object()) {
  json pairs = json::array();
  for (const auto& [a, b] : snap.multilink_pairs) pairs.push_back({a, b});
  json header = {{"kind", "snapshot"},
                 {"repo_id", snap.repo_id},
                 {"creation_year", snap.creation_year},
                 {"issue_count", snap.issues.size()},
                 {"link_count", snap.links.size()},
                 {"dropped_private_link_count", snap.dropped_private_link_count},
                 {"dropped_multilink_pair_count", snap.dropped_multilink_count},
                 {"dropped_private_issue_count", snap.dropped_private_issue_count},
                 {"collapsed_duplicate_link_count", snap.collapsed_duplicate_link_count},
                 {"multilink_pairs", pairs},
                 {"meta", metadata}};
  out << header.dump() << '\n';
  for (const auto& [key, issue] : snap.issues) {
    json j = to_json(issue);
    j["kind"] = "issue";
    out << j.dump() << '\n';
  }
  for (const auto& link : snap.links) {
    json j = to_json(link);
    j["kind"] = "link";
    out << j.dump() << '\n';
  }
}

inline RepositorySnapshot read_snapshot(std::istream& in) {
  RepositorySnapshot snap;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  const TypeNormalizer identity;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const json obj = detail::parse_object(line, line_no);
    const std::string kind = obj.value("kind", "");
    if (kind == "snapshot") {
      have_header = true;
      snap.repo_id = obj.at("repo_id").get<std::string>();
      snap.creation_year = obj.at("creation_year").get<int>();
      snap.dropped_private_link_count = obj.at("dropped_private_link_count").get<std::int64_t>();
      snap.dropped_multilink_count = obj.at("dropped_multilink_pair_count").get<std::int64_t>();
      snap.dropped_private_issue_count = obj.at("dropped_private_issue_count").get<std::int64_t>();
      snap.collapsed_duplicate_link_count =
          obj.at("collapsed_duplicate_link_count").get<std::int64_t>();
      for (const auto& p : obj.at("multilink_pairs")) {
        snap.multilink_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    } else if (kind == "issue") {
      Issue issue = parse_issue_record(line, line_no);
      const std::string key = issue.issue_key;
      snap.issues.emplace(key, std::move(issue));
    } else if (kind == "link") {
      snap.links.push_back(parse_link_record(line, identity, line_no));
    } else {
      throw Error(ErrorKind::SchemaError, "unknown snapshot record kind" + detail::location(line_no));
    }
  }
  if (!have_header) throw Error(ErrorKind::SchemaError, "snapshot header missing");
  return snap;
}

inline RepositorySnapshot read_snapshot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open snapshot " + path);
  return read_snapshot(in);
}

}  // namespace issuelinks
