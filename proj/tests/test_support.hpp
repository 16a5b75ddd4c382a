#pragma once

// Shared generators and independent oracles. Oracles deliberately use naive
// formulations (closure matrices, recursion) so they share no code path with
// the implementations they check.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "esp/core.hpp"

namespace esp::test {

inline const std::vector<std::string> kTestTypes = {
    "image-to-text", "object-detection", "image-classification", "text-classification",
    "summarization"};

inline Subtask make_subtask(int id, std::string type, std::set<int> deps = {}) {
  Subtask s;
  s.id = id;
  s.task_type = std::move(type);
  s.deps = std::move(deps);
  return s;
}

inline TaskPlan make_plan(std::vector<Subtask> subtasks, std::string request_id = "req-test") {
  TaskPlan plan;
  plan.request_id = std::move(request_id);
  plan.subtasks = std::move(subtasks);
  return plan;
}

/// Random DAG: node i may depend only on nodes < i, so the result is acyclic
/// by construction and ids are dense.
inline TaskPlan random_dag_plan(std::mt19937_64& rng, int n, double edge_prob = 0.4) {
  std::vector<Subtask> subtasks;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> type_pick(0, kTestTypes.size() - 1);
  for (int i = 0; i < n; ++i) {
    std::set<int> deps;
    for (int j = 0; j < i; ++j) {
      if (coin(rng) < edge_prob) deps.insert(j);
    }
    subtasks.push_back(make_subtask(i, kTestTypes[type_pick(rng)], std::move(deps)));
  }
  return make_plan(std::move(subtasks));
}

/// Random digraph that may contain cycles (deps unrestricted, no self loops).
inline TaskPlan random_digraph_plan(std::mt19937_64& rng, int n, double edge_prob = 0.3) {
  std::vector<Subtask> subtasks;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> type_pick(0, kTestTypes.size() - 1);
  for (int i = 0; i < n; ++i) {
    std::set<int> deps;
    for (int j = 0; j < n; ++j) {
      if (j != i && coin(rng) < edge_prob) deps.insert(j);
    }
    subtasks.push_back(make_subtask(i, kTestTypes[type_pick(rng)], std::move(deps)));
  }
  return make_plan(std::move(subtasks));
}

/// Transitive-closure reachability over dependency edges dep -> node,
/// computed the brute-force way (repeated relaxation until fixpoint).
inline std::vector<std::vector<bool>> oracle_reachability(const TaskPlan& plan) {
  const std::size_t n = plan.subtasks.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (const Subtask& s : plan.subtasks) {
    for (int d : s.deps) {
      if (d >= 0 && d < static_cast<int>(n)) {
        reach[static_cast<std::size_t>(d)][static_cast<std::size_t>(s.id)] = true;
      }
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (!reach[a][b]) continue;
        for (std::size_t c = 0; c < n; ++c) {
          if (reach[b][c] && !reach[a][c]) {
            reach[a][c] = true;
            changed = true;
          }
        }
      }
    }
  }
  return reach;
}

inline bool oracle_has_cycle(const TaskPlan& plan) {
  auto reach = oracle_reachability(plan);
  for (std::size_t i = 0; i < reach.size(); ++i) {
    if (reach[i][i]) return true;
  }
  return false;
}

/// Longest-path depth of a node over dependency edges, by plain recursion.
inline int oracle_depth(const TaskPlan& plan, int id) {
  const Subtask& s = plan.subtasks[static_cast<std::size_t>(id)];
  int depth = 0;
  for (int d : s.deps) {
    depth = std::max(depth, oracle_depth(plan, d) + 1);
  }
  return depth;
}

}  // namespace esp::test
