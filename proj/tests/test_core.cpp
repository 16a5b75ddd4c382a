#include <doctest.h>

#include <random>

#include "esp/core.hpp"
#include "test_support.hpp"

using namespace esp;
using namespace esp::test;

namespace {

const std::set<std::string> kVocab(kTestTypes.begin(), kTestTypes.end());

}  // namespace

TEST_CASE("validate_plan accepts a minimal valid chain") {
  auto plan = make_plan({make_subtask(0, "image-to-text"),
                         make_subtask(1, "summarization", {0})});
  auto verdict = validate_plan(plan, kVocab);
  CHECK(verdict.ok());
}

TEST_CASE("validate_plan flags a self-dependency") {
  auto plan = make_plan({make_subtask(0, "image-to-text", {0})});
  auto verdict = validate_plan(plan, kVocab);
  REQUIRE_FALSE(verdict.ok());
  bool found = false;
  for (const auto& v : verdict.violations) {
    if (v.reason.find("self-dependency at 0") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("validate_plan detects the 0->1->0 cycle") {
  auto plan = make_plan({make_subtask(0, "image-to-text", {1}),
                         make_subtask(1, "summarization", {0})});
  auto verdict = validate_plan(plan, kVocab);
  REQUIRE_FALSE(verdict.ok());
  bool found = false;
  for (const auto& v : verdict.violations) {
    if (v.reason.find("cycle detected") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("validate_plan cycle verdicts agree with the reachability oracle") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    auto plan = random_digraph_plan(rng, 2 + static_cast<int>(rng() % 11));
    auto verdict = validate_plan(plan, kVocab);
    bool reported_cycle = false;
    for (const auto& v : verdict.violations) {
      if (v.reason.find("cycle detected") != std::string::npos) reported_cycle = true;
    }
    CHECK(reported_cycle == oracle_has_cycle(plan));
  }
}

TEST_CASE("validate_plan reports vocabulary and arg violations") {
  Subtask bad_arg = make_subtask(1, "summarization", {});
  bad_arg.args["text"] = ResourceRef{RefKind::SubtaskOutput, "", 0};
  auto plan = make_plan({make_subtask(0, "frobnicate"), bad_arg});
  auto verdict = validate_plan(plan, kVocab);
  REQUIRE_FALSE(verdict.ok());

  bool vocab_violation = false;
  bool dep_violation = false;
  for (const auto& v : verdict.violations) {
    if (v.subtask_id == 0 && v.reason.find("not in vocabulary") != std::string::npos) {
      vocab_violation = true;
    }
    if (v.subtask_id == 1 && v.reason.find("missing from deps") != std::string::npos) {
      dep_violation = true;
    }
  }
  CHECK(vocab_violation);
  CHECK(dep_violation);
}

TEST_CASE("validate_plan flags non-dense ids") {
  auto plan = make_plan({make_subtask(0, "image-to-text"), make_subtask(2, "summarization")});
  CHECK_FALSE(validate_plan(plan, kVocab).ok());
}

TEST_CASE("validate_plan is pure and idempotent") {
  std::mt19937_64 rng(77);
  auto plan = random_digraph_plan(rng, 6);
  auto first = validate_plan(plan, kVocab);
  auto second = validate_plan(plan, kVocab);
  CHECK(first.violations == second.violations);
}

TEST_CASE("topological_order of a chain is three singleton layers") {
  auto plan = make_plan({make_subtask(0, "image-to-text"),
                         make_subtask(1, "object-detection", {0}),
                         make_subtask(2, "summarization", {1})});
  auto layers = topological_order(plan);
  CHECK(layers == std::vector<std::vector<int>>{{0}, {1}, {2}});
}

TEST_CASE("topological_order puts independent subtasks in one layer") {
  auto plan = make_plan({make_subtask(0, "image-to-text"), make_subtask(1, "summarization")});
  CHECK(topological_order(plan) == std::vector<std::vector<int>>{{0, 1}});
}

TEST_CASE("topological_order of the diamond matches longest-path depth") {
  auto plan = make_plan({make_subtask(0, "image-to-text"),
                         make_subtask(1, "object-detection", {0}),
                         make_subtask(2, "image-classification", {0}),
                         make_subtask(3, "summarization", {1, 2})});
  auto layers = topological_order(plan);
  CHECK(layers == std::vector<std::vector<int>>{{0}, {1, 2}, {3}});
  for (const Subtask& s : plan.subtasks) {
    int layer_of = -1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      for (int id : layers[i]) {
        if (id == s.id) layer_of = static_cast<int>(i);
      }
    }
    CHECK(layer_of == oracle_depth(plan, s.id));
  }
}

TEST_CASE("topological_order respects edges and depth on random DAGs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    auto plan = random_dag_plan(rng, n);
    auto layers = topological_order(plan);

    std::map<int, int> layer_of;
    int seen = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      CHECK(std::is_sorted(layers[i].begin(), layers[i].end()));
      for (int id : layers[i]) {
        CHECK(layer_of.count(id) == 0);
        layer_of[id] = static_cast<int>(i);
        ++seen;
      }
    }
    CHECK(seen == n);

    for (const Subtask& s : plan.subtasks) {
      for (int dep : s.deps) {
        CHECK(layer_of.at(dep) < layer_of.at(s.id));
      }
      CHECK(layer_of.at(s.id) == oracle_depth(plan, s.id));
    }
  }
}

TEST_CASE("topological_order throws on a cycle") {
  auto plan = make_plan({make_subtask(0, "image-to-text", {1}),
                         make_subtask(1, "summarization", {0})});
  CHECK_THROWS_AS(topological_order(plan), Error);
}

TEST_CASE("core types survive a JSON round trip") {
  SUBCASE("plan with args and deps") {
    Subtask s1 = make_subtask(1, "summarization", {0});
    s1.args["text"] = ResourceRef{RefKind::SubtaskOutput, "", 0};
    Subtask s0 = make_subtask(0, "image-to-text");
    s0.args["image"] = ResourceRef{RefKind::ImageUri, "http://example.test/cat.png", {}};
    auto plan = make_plan({s0, s1}, "req-42");
    CHECK(plan_from_json(to_json(plan)) == plan);
  }

  SUBCASE("random plans") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      auto plan = random_dag_plan(rng, 1 + static_cast<int>(rng() % 8));
      CHECK(plan_from_json(to_json(plan)) == plan);
    }
  }

  SUBCASE("model descriptor") {
    ModelDescriptor m{"org/model-a", "image-to-text", "captioner", 1234, 56, 2,
                      "http://models.test/a"};
    CHECK(model_descriptor_from_json(to_json(m)) == m);
  }

  SUBCASE("candidate result") {
    CandidateResult r;
    r.subtask_id = 3;
    r.model_id = "org/model-a";
    r.canonical_text = "a cat on a mat";
    r.structured = Json{{"classification", Json::array({Json{{"label", "cat"}, {"prob", 0.9}}})}};
    r.latency_ms = 12.5;
    r.status = ResultStatus::Ok;
    CHECK(candidate_result_from_json(to_json(r)) == r);
  }

  SUBCASE("selection decision") {
    SelectionDecision d;
    d.subtask_id = 1;
    d.similarity = {{1.0, 0.5}, {0.5, 1.0}};
    d.chosen_index = 1;
    d.method = SelectionMethod::LlmArbitration;
    d.rationale = "CHOICE: 1 most consistent";
    CHECK(selection_decision_from_json(to_json(d)) == d);
  }

  SUBCASE("final response") {
    FinalResponse r;
    r.request_id = "req-9";
    r.summary_text = "The image shows a cat.";
    r.per_subtask.push_back({0, "org/model-a", "a cat", Json("a cat")});
    r.failed_subtasks = {1};
    CHECK(final_response_from_json(to_json(r)) == r);
  }

  SUBCASE("user request") {
    UserRequest r{"req-1", "describe this image",
                  {ResourceRef{RefKind::ImageUri, "file:///x.png", {}}}};
    CHECK(user_request_from_json(to_json(r)) == r);
  }
}

TEST_CASE("subtask-output refs require a producer when parsed") {
  Json j{{"kind", "subtask-output"}, {"value", ""}};
  CHECK_THROWS_AS(resource_ref_from_json(j), Error);
}
