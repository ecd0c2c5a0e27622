#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "issuelinks/baseline.hpp"
#include "issuelinks/dataset.hpp"
#include "issuelinks/detail/hash.hpp"
#include "issuelinks/detail/parallel.hpp"
#include "issuelinks/error.hpp"

namespace issuelinks {

inline constexpr const char* kToolName = "issuelinks";
inline constexpr const char* kToolVersion = "1.0.0";

/// Everything that determines a run's outputs. The global seed is pushed into
/// the dataset and baseline configs by `resolved()`.
struct RunConfig {
  std::string corpus_dir;
  std::string output_dir;
  std::string type_map;  // optional path to a {"raw": "canonical"} table
  DatasetSpec dataset;
  BaselineConfig baseline;
  std::uint64_t seed = 42;
  int reference_year = 2021;
  std::string log_level = "info";
  bool strict = false;
  std::size_t topk = 0;
  std::size_t cv_folds = 5;
  std::vector<std::string> exclude_per_type;
  std::size_t jobs = 0;  // 0: logical CPU count

  RunConfig resolved() const {
    RunConfig c = *this;
    c.dataset.seed = seed;
    c.baseline.seed = seed;
    if (c.jobs == 0) c.jobs = detail::default_jobs();
    c.baseline.jobs = c.jobs;
    return c;
  }
};

/// Canonical JSON. `jobs` and `log_level` are excluded: neither changes any
/// output byte, so they do not belong in the hash either.
inline nlohmann::json to_json(const RunConfig& c) {
  return {{"corpus_dir", c.corpus_dir},
          {"output_dir", c.output_dir},
          {"type_map", c.type_map},
          {"dataset",
           {{"min_repo_share", c.dataset.min_repo_share},
            {"global_common_share", c.dataset.global_common_share},
            {"min_repo_links", c.dataset.min_repo_links},
            {"closed_statuses", c.dataset.closed_statuses},
            {"same_project_non_links", c.dataset.same_project_non_links}}},
          {"baseline", to_json(c.baseline)},
          {"seed", c.seed},
          {"reference_year", c.reference_year},
          {"strict", c.strict},
          {"topk", c.topk},
          {"cv_folds", c.cv_folds},
          {"exclude_per_type", c.exclude_per_type}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "config must be a JSON object");
  try {
    c.corpus_dir = j.value("corpus_dir", c.corpus_dir);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.type_map = j.value("type_map", c.type_map);
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      c.dataset.min_repo_share = d.value("min_repo_share", c.dataset.min_repo_share);
      c.dataset.global_common_share = d.value("global_common_share", c.dataset.global_common_share);
      c.dataset.min_repo_links = d.value("min_repo_links", c.dataset.min_repo_links);
      c.dataset.closed_statuses = d.value("closed_statuses", c.dataset.closed_statuses);
      c.dataset.same_project_non_links = d.value("same_project_non_links", c.dataset.same_project_non_links);
    }
    if (j.contains("baseline")) c.baseline = baseline_config_from_json(j["baseline"], c.baseline);
    c.seed = j.value("seed", c.seed);
    c.reference_year = j.value("reference_year", c.reference_year);
    c.log_level = j.value("log_level", c.log_level);
    c.strict = j.value("strict", c.strict);
    c.topk = j.value("topk", c.topk);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.exclude_per_type = j.value("exclude_per_type", c.exclude_per_type);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::SchemaError, "config " + path + " is not valid JSON");
  return run_config_from_json(j);
}

inline std::string config_hash(const RunConfig& c) { return detail::to_hex(detail::fnv1a(to_json(c).dump())); }

/// Provenance block embedded in every artifact this tool writes.
inline nlohmann::json metadata_header(const RunConfig& c, std::string_view command) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"command", command},
          {"config", to_json(c)},
          {"config_hash", config_hash(c)}};
}

}  // namespace issuelinks
