#include "esp/registry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "http_support.hpp"

namespace esp {

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

void RankedCatalog::validate() const {
  for (const auto& [task_type, by_metric] : rankings) {
    for (const auto& [metric, ids] : by_metric) {
      std::set<std::string> seen;
      for (const std::string& id : ids) {
        auto it = models.find(id);
        if (it == models.end()) {
          throw Error(ErrorCode::SchemaViolation,
                      fmt::format("ranking {}/{} references unknown model '{}'", task_type,
                                  metric, id));
        }
        if (it->second.task_type != task_type) {
          throw Error(ErrorCode::SchemaViolation,
                      fmt::format("model '{}' ranked under '{}' but typed '{}'", id, task_type,
                                  it->second.task_type));
        }
        if (!seen.insert(id).second) {
          throw Error(ErrorCode::SchemaViolation,
                      fmt::format("duplicate model '{}' in ranking {}/{}", id, task_type,
                                  metric));
        }
      }
    }
  }
}

Json catalog_to_json(const RankedCatalog& catalog) {
  Json models = Json::object();
  for (const auto& [id, model] : catalog.models) models[id] = to_json(model);
  return Json{{"models", models}, {"rankings", catalog.rankings}};
}

RankedCatalog catalog_from_json(const Json& j) {
  RankedCatalog catalog;
  if (!j.is_object() || !j.contains("models") || !j.contains("rankings")) {
    throw Error(ErrorCode::SchemaViolation, "catalog needs 'models' and 'rankings'");
  }
  for (const auto& [id, value] : j.at("models").items()) {
    catalog.models[id] = model_descriptor_from_json(value, "/models/" + id);
  }
  catalog.rankings =
      j.at("rankings")
          .get<std::map<std::string, std::map<std::string, std::vector<std::string>>>>();
  catalog.validate();
  return catalog;
}

RankedCatalog load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open snapshot " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseFailure, fmt::format("snapshot {}: {}", path, e.what()));
  }
  return catalog_from_json(j);
}

void save_snapshot(const RankedCatalog& catalog, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write snapshot " + path);
  out << catalog_to_json(catalog).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

std::vector<ModelDescriptor> select_models(const std::string& task_type,
                                           const RankedCatalog& catalog,
                                           const SelectionPolicy& policy) {
  if (policy.k < 1) throw Error(ErrorCode::Precondition, "policy.k must be >= 1");
  if (policy.metric_order.empty()) {
    throw Error(ErrorCode::Precondition, "policy.metric_order must be nonempty");
  }

  auto type_it = catalog.rankings.find(task_type);
  if (type_it == catalog.rankings.end()) {
    throw Error(ErrorCode::NoModelsAvailable, "no rankings for task type " + task_type);
  }
  const auto& by_metric = type_it->second;

  std::size_t available = 0;
  {
    std::set<std::string> distinct;
    for (const std::string& metric : policy.metric_order) {
      auto it = by_metric.find(metric);
      if (it == by_metric.end()) continue;
      distinct.insert(it->second.begin(), it->second.end());
    }
    available = distinct.size();
  }
  if (available == 0) {
    throw Error(ErrorCode::NoModelsAvailable, "no ranked models for task type " + task_type);
  }

  std::vector<std::string> chosen;
  std::set<std::string> taken;
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(policy.k), available);
  // Round-robin: one pick per metric, walking each list downwards past
  // already-chosen models.
  while (chosen.size() < want) {
    bool progressed = false;
    for (const std::string& metric : policy.metric_order) {
      if (chosen.size() >= want) break;
      auto it = by_metric.find(metric);
      if (it == by_metric.end()) continue;
      for (const std::string& id : it->second) {
        if (taken.insert(id).second) {
          chosen.push_back(id);
          progressed = true;
          break;
        }
      }
    }
    if (!progressed) break;
  }

  std::vector<ModelDescriptor> result;
  result.reserve(chosen.size());
  for (const std::string& id : chosen) result.push_back(catalog.models.at(id));
  return result;
}

// ---------------------------------------------------------------------------
// Task-type assignment
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> parse_task_type_reply(const std::string& reply) {
  auto pos = reply.find("TASK_TYPE:");
  if (pos == std::string::npos) return std::nullopt;
  pos += 10;
  while (pos < reply.size() && reply[pos] == ' ') ++pos;
  std::size_t end = pos;
  while (end < reply.size() && !std::isspace(static_cast<unsigned char>(reply[end]))) ++end;
  if (end == pos) return std::nullopt;
  return reply.substr(pos, end - pos);
}

}  // namespace

std::string assign_task_type(const Subtask& subtask, const RankedCatalog& catalog,
                             LlmGateway& llm, const std::set<std::string>& vocabulary) {
  // Model descriptions are the language interface: show the top-ranked
  // descriptions for the current type and let the model confirm or remap.
  std::string descriptions;
  auto type_it = catalog.rankings.find(subtask.task_type);
  if (type_it != catalog.rankings.end()) {
    std::set<std::string> listed;
    for (const std::string& metric : kRankMetrics) {
      auto metric_it = type_it->second.find(metric);
      if (metric_it == type_it->second.end() || metric_it->second.empty()) continue;
      const std::string& id = metric_it->second.front();
      if (!listed.insert(id).second) continue;
      const ModelDescriptor& m = catalog.models.at(id);
      descriptions += fmt::format("- {}: {}\n", m.model_id, m.description);
    }
  }

  std::string vocab_line;
  for (const std::string& t : vocabulary) {
    if (!vocab_line.empty()) vocab_line += ", ";
    vocab_line += t;
  }

  std::vector<ChatMessage> messages{
      {Role::User,
       fmt::format("A subtask is currently typed '{}'.\nSubtask args: {}\n"
                   "Top models for that type:\n{}"
                   "Valid task types: {}\n"
                   "Confirm or remap the task type. Answer with exactly "
                   "\"TASK_TYPE: <type>\".",
                   subtask.task_type, to_json(subtask)["args"].dump(), descriptions,
                   vocab_line)}};

  const std::string reply = llm.complete(messages);
  auto parsed = parse_task_type_reply(reply);
  if (!parsed) {
    throw Error(ErrorCode::ProtocolError, "task-type reply missing TASK_TYPE: line");
  }
  if (vocabulary.count(*parsed) == 0) {
    throw Error(ErrorCode::VocabularyViolation,
                fmt::format("remap to '{}' is outside the vocabulary", *parsed));
  }
  return *parsed;
}

// ---------------------------------------------------------------------------
// Hub sync
// ---------------------------------------------------------------------------

namespace {

std::string expand_endpoint(const std::string& tmpl, const std::string& hub,
                            const std::string& id) {
  std::string out = tmpl;
  auto replace = [&out](const std::string& slot, const std::string& value) {
    std::size_t pos;
    while ((pos = out.find(slot)) != std::string::npos) out.replace(pos, slot.size(), value);
  };
  replace("{hub}", hub);
  replace("{id}", id);
  return out;
}

}  // namespace

RankedCatalog sync_catalog(const std::string& hub_endpoint, const SyncOptions& options) {
  RankedCatalog catalog;
  try {
    auto [base, prefix] = detail::split_url(hub_endpoint);
    auto client = detail::make_client(base, options.timeout_ms);
    const std::string root = prefix == "/" ? "" : prefix;

    for (const std::string& task_type : options.task_types) {
      for (const std::string& metric : kRankMetrics) {
        const std::string path = fmt::format("{}/api/models?pipeline_tag={}&sort={}&limit={}",
                                             root, task_type, metric, options.limit);
        auto result = client.Get(path);
        if (!result || result->status != 200) {
          throw Error(ErrorCode::Unavailable,
                      fmt::format("hub request {} failed", hub_endpoint + path));
        }
        Json body = Json::parse(result->body, nullptr, false);
        if (body.is_discarded() || !body.is_array()) {
          throw Error(ErrorCode::ProtocolError, "hub reply is not a JSON array");
        }
        auto& ranking = catalog.rankings[task_type][metric];
        int rank = 0;
        for (const auto& item : body) {
          const std::string id = item.value("id", "");
          if (id.empty()) continue;
          ++rank;
          ranking.push_back(id);
          auto [it, inserted] = catalog.models.try_emplace(id);
          ModelDescriptor& m = it->second;
          if (inserted) {
            m.model_id = id;
            m.task_type = item.value("pipeline_tag", task_type);
            m.description = item.value("description", "");
            m.endpoint = expand_endpoint(options.endpoint_template, hub_endpoint, id);
          }
          m.downloads = item.value("downloads", m.downloads);
          m.likes = item.value("likes", m.likes);
          if (metric == "trending") m.trending_rank = rank;
        }
      }
    }
    catalog.validate();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unavailable) throw;
    if (!options.snapshot_path.empty() && std::filesystem::exists(options.snapshot_path)) {
      RankedCatalog fallback = load_snapshot(options.snapshot_path);
      fallback.stale = true;
      return fallback;
    }
    throw;
  }

  if (!options.snapshot_path.empty()) {
    save_snapshot(catalog, options.snapshot_path);
  }
  return catalog;
}

}  // namespace esp
