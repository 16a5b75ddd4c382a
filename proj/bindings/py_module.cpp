#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "esp/core.hpp"
#include "esp/evaluator.hpp"
#include "esp/hash.hpp"
#include "esp/integrator.hpp"
#include "esp/llm_gateway.hpp"
#include "esp/planner.hpp"
#include "esp/registry.hpp"

namespace py = pybind11;

namespace {

// Plans, catalogs, and payloads cross the boundary as JSON strings; the
// bindings stay thin and the wire schema stays the single contract.

esp::TaskPlan parse_plan_arg(const std::string& plan_json) {
  return esp::plan_from_json(esp::Json::parse(plan_json));
}

std::vector<std::pair<int, std::string>> py_validate_plan(
    const std::string& plan_json, const std::vector<std::string>& vocabulary) {
  auto verdict = esp::validate_plan(parse_plan_arg(plan_json),
                                    std::set<std::string>(vocabulary.begin(), vocabulary.end()));
  std::vector<std::pair<int, std::string>> out;
  for (const auto& v : verdict.violations) out.emplace_back(v.subtask_id, v.reason);
  return out;
}

std::vector<std::vector<int>> py_topological_order(const std::string& plan_json) {
  return esp::topological_order(parse_plan_arg(plan_json));
}

std::string py_parse_plan_json(const std::string& text) {
  auto outcome = esp::parse_plan_json(text);
  if (!outcome.ok()) {
    throw py::value_error(outcome.diagnostics->message);
  }
  return esp::to_json(*outcome.plan).dump();
}

std::vector<std::string> py_select_models(const std::string& catalog_json,
                                          const std::string& task_type, int k,
                                          const std::vector<std::string>& metric_order) {
  esp::RankedCatalog catalog = esp::catalog_from_json(esp::Json::parse(catalog_json));
  esp::SelectionPolicy policy;
  policy.k = k;
  if (!metric_order.empty()) policy.metric_order = metric_order;
  std::vector<std::string> ids;
  for (const auto& model : esp::select_models(task_type, catalog, policy)) {
    ids.push_back(model.model_id);
  }
  return ids;
}

std::vector<std::vector<double>> py_hash_tf_embed(const std::vector<std::string>& texts,
                                                  int dimension) {
  esp::EmbeddingProvider provider;
  provider.mode = esp::EmbeddingMode::DeterministicHashTf;
  provider.dimension = dimension;
  return esp::embed(provider, texts);
}

py::tuple py_task_set_prf(const std::string& pred_json, const std::string& gold_json) {
  auto prf = esp::task_set_prf(parse_plan_arg(pred_json), parse_plan_arg(gold_json));
  return py::make_tuple(prf.precision, prf.recall, prf.f1);
}

int py_single_accuracy(const std::string& pred_json, const std::string& gold_json) {
  return esp::single_accuracy(parse_plan_arg(pred_json), parse_plan_arg(gold_json));
}

std::string py_canonical_text(const std::string& payload_json) {
  return esp::canonical_text(esp::Json::parse(payload_json));
}

std::string py_fingerprint(const std::vector<std::pair<std::string, std::string>>& messages) {
  std::vector<esp::ChatMessage> msgs;
  for (const auto& [role, content] : messages) {
    esp::Role r = esp::Role::User;
    if (role == "system") r = esp::Role::System;
    else if (role == "assistant") r = esp::Role::Assistant;
    else if (role != "user") throw py::value_error("role must be system/user/assistant");
    msgs.push_back({r, content});
  }
  return esp::fingerprint(msgs);
}

}  // namespace

PYBIND11_MODULE(_esp, m) {
  m.doc() = "Core operations of the esp orchestrator";

  m.def("validate_plan", &py_validate_plan, py::arg("plan_json"), py::arg("vocabulary"),
        "Validate a plan against the task-type vocabulary; returns (subtask_id, reason) "
        "violations, empty when the plan is valid.");
  m.def("topological_order", &py_topological_order, py::arg("plan_json"),
        "Layered topological order of a valid plan: lists of subtask ids.");
  m.def("parse_plan_json", &py_parse_plan_json, py::arg("text"),
        "Extract and strict-parse the first JSON plan object from model output; returns "
        "the canonical plan JSON.");
  m.def("select_models", &py_select_models, py::arg("catalog_json"), py::arg("task_type"),
        py::arg("k") = 3, py::arg("metric_order") = std::vector<std::string>{},
        "Pick min(k, available) distinct model ids by round-robin over ranking metrics.");
  m.def("hash_tf_embed", &py_hash_tf_embed, py::arg("texts"), py::arg("dimension") = 256,
        "Deterministic hash-TF embeddings (L2-normalized token counts in hashed buckets).");
  m.def("similarity_matrix", &esp::similarity_matrix, py::arg("vectors"),
        "Pairwise cosine similarity matrix.");
  m.def("medoid_select", &esp::medoid_select, py::arg("matrix"),
        "Index with the maximum off-diagonal row sum; ties break to the lowest index.");
  m.def("levenshtein", &esp::levenshtein, py::arg("a"), py::arg("b"));
  m.def("normalized_edit_distance", &esp::normalized_edit_distance, py::arg("pred_seq"),
        py::arg("gold_seq"), "Levenshtein / max(len); gold must be nonempty.");
  m.def("task_set_prf", &py_task_set_prf, py::arg("pred_json"), py::arg("gold_json"),
        "(precision, recall, f1) over task-type multisets.");
  m.def("single_accuracy", &py_single_accuracy, py::arg("pred_json"), py::arg("gold_json"));
  m.def("canonical_text", &py_canonical_text, py::arg("payload_json"),
        "Deterministic one-line rendering of a structured model output.");
  m.def("fingerprint", &py_fingerprint, py::arg("messages"),
        "Stable fingerprint of a chat message list: SHA-256 over role:content lines.");
  m.def("sha256_hex", [](const std::string& s) { return esp::sha256_hex(s); }, py::arg("data"));

  m.attr("__version__") = "0.1.0";
}
