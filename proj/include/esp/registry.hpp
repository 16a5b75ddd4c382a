#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "esp/core.hpp"
#include "esp/llm_gateway.hpp"

namespace esp {

// The fixed ranking metric set. Each metric keeps its own ordered list per
// task type, rank 1 first.
inline const std::vector<std::string> kRankMetrics = {"downloads", "likes", "trending"};

struct RankedCatalog {
  std::map<std::string, ModelDescriptor> models;
  // task_type -> metric -> ordered model ids
  std::map<std::string, std::map<std::string, std::vector<std::string>>> rankings;
  bool stale = false;  // loaded from a fallback snapshot after a sync failure

  /// Throws SchemaViolation when a ranking references a missing model, lists
  /// a duplicate, or ranks a model under the wrong task type.
  void validate() const;
};

Json catalog_to_json(const RankedCatalog& catalog);
RankedCatalog catalog_from_json(const Json& j);

RankedCatalog load_snapshot(const std::string& path);
void save_snapshot(const RankedCatalog& catalog, const std::string& path);

struct SelectionPolicy {
  int k = 3;
  std::vector<std::string> metric_order = kRankMetrics;
};

/// Picks min(k, available) distinct models by round-robin over the policy's
/// metrics; when a metric's top model is already chosen the walk continues
/// downwards to the next unchosen entry. Deterministic for fixed inputs.
std::vector<ModelDescriptor> select_models(const std::string& task_type,
                                           const RankedCatalog& catalog,
                                           const SelectionPolicy& policy);

/// Confirms or remaps the planner's task type by showing the model the
/// subtask plus the top model descriptions for its current type. The reply
/// contract is "TASK_TYPE: <type>". Remaps outside the vocabulary throw
/// VocabularyViolation.
std::string assign_task_type(const Subtask& subtask, const RankedCatalog& catalog,
                             LlmGateway& llm, const std::set<std::string>& vocabulary);

struct SyncOptions {
  std::set<std::string> task_types;
  int limit = 20;
  int timeout_ms = 30000;
  // Invocation URI assigned to fetched models; "{hub}" and "{id}" expand.
  std::string endpoint_template = "{hub}/models/{id}/invoke";
  std::string snapshot_path;  // optional persistence + offline fallback
};

/// Fetches per-task-type rankings from a hub-style REST API
/// (GET <hub>/api/models?pipeline_tag=<type>&sort=<metric>&limit=N) and
/// persists a snapshot. On network failure falls back to the last snapshot
/// with the stale flag set, or throws Unavailable when none exists.
RankedCatalog sync_catalog(const std::string& hub_endpoint, const SyncOptions& options);

}  // namespace esp
