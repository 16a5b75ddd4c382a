#include "esp/evaluator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

namespace esp {

const char* to_string(TaskCategory category) {
  switch (category) {
    case TaskCategory::Single: return "single";
    case TaskCategory::Sequential: return "sequential";
    case TaskCategory::Graph: return "graph";
  }
  return "single";
}

TaskCategory task_category_from_string(const std::string& s) {
  if (s == "single") return TaskCategory::Single;
  if (s == "sequential") return TaskCategory::Sequential;
  if (s == "graph") return TaskCategory::Graph;
  throw Error(ErrorCode::SchemaViolation, fmt::format("unknown category '{}'", s));
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

namespace {

// single = one node; sequential = a path (every layer has width 1 and each
// node after the first depends on exactly the previous one); graph = any DAG.
bool shape_matches(TaskCategory category, const TaskPlan& gold) {
  const std::size_t n = gold.subtasks.size();
  switch (category) {
    case TaskCategory::Single:
      return n == 1;
    case TaskCategory::Sequential: {
      if (n < 2) return false;
      for (std::size_t i = 0; i < n; ++i) {
        const Subtask& s = gold.subtasks[i];
        if (i == 0) {
          if (!s.deps.empty()) return false;
        } else if (s.deps != std::set<int>{static_cast<int>(i) - 1}) {
          return false;
        }
      }
      return true;
    }
    case TaskCategory::Graph:
      return n >= 1;
  }
  return false;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path);

  Dataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      dataset.diagnostics.push_back({line_no, "not valid JSON"});
      continue;
    }
    try {
      EvalRecord record;
      record.id = j.at("id").get<std::string>();
      record.text = j.at("text").get<std::string>();
      record.category = task_category_from_string(j.at("category").get<std::string>());
      record.gold_plan = plan_from_json(j.at("gold"));
      auto verdict = validate_plan(record.gold_plan, {});
      if (!verdict.ok()) {
        dataset.diagnostics.push_back(
            {line_no, fmt::format("gold plan invalid: {}", verdict.violations[0].reason)});
        continue;
      }
      if (!shape_matches(record.category, record.gold_plan)) {
        dataset.diagnostics.push_back(
            {line_no, fmt::format("category/shape mismatch: '{}' gold plan has {} subtasks",
                                  to_string(record.category), record.gold_plan.subtasks.size())});
        continue;
      }
      dataset.records.push_back(std::move(record));
    } catch (const std::exception& e) {
      dataset.diagnostics.push_back({line_no, e.what()});
    }
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Prf task_set_prf(const TaskPlan& pred, const TaskPlan& gold) {
  std::map<std::string, int> pred_counts, gold_counts;
  for (const Subtask& s : pred.subtasks) ++pred_counts[s.task_type];
  for (const Subtask& s : gold.subtasks) ++gold_counts[s.task_type];

  int tp = 0;
  for (const auto& [type, count] : pred_counts) {
    auto it = gold_counts.find(type);
    if (it != gold_counts.end()) tp += std::min(count, it->second);
  }

  Prf prf;
  const auto pred_total = static_cast<double>(pred.subtasks.size());
  const auto gold_total = static_cast<double>(gold.subtasks.size());
  prf.precision = pred_total == 0 ? 0.0 : tp / pred_total;
  prf.recall = gold_total == 0 ? 0.0 : tp / gold_total;
  prf.f1 = (prf.precision + prf.recall) == 0
               ? 0.0
               : 2 * prf.precision * prf.recall / (prf.precision + prf.recall);
  return prf;
}

int single_accuracy(const TaskPlan& pred, const TaskPlan& gold) {
  if (gold.subtasks.size() != 1) {
    throw Error(ErrorCode::Precondition, "single_accuracy needs a single-subtask gold plan");
  }
  return pred.subtasks.size() == 1 && pred.subtasks[0].task_type == gold.subtasks[0].task_type
             ? 1
             : 0;
}

int levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<int> prev(n + 1), curr(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    curr[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, substitute});
    }
    std::swap(prev, curr);
  }
  return prev[n];
}

double normalized_edit_distance(const std::vector<std::string>& pred_seq,
                                const std::vector<std::string>& gold_seq) {
  if (gold_seq.empty()) {
    throw Error(ErrorCode::Precondition, "gold sequence must be nonempty");
  }
  const auto longest = std::max(pred_seq.size(), gold_seq.size());
  return static_cast<double>(levenshtein(pred_seq, gold_seq)) / static_cast<double>(longest);
}

std::vector<std::string> plan_type_sequence(const TaskPlan& plan) {
  std::map<int, const Subtask*> by_id;
  for (const Subtask& s : plan.subtasks) by_id[s.id] = &s;
  std::vector<std::string> sequence;
  for (const auto& layer : topological_order(plan)) {
    for (int id : layer) sequence.push_back(by_id.at(id)->task_type);
  }
  return sequence;
}

namespace {

std::optional<int> parse_score(const std::string& reply) {
  auto pos = reply.find("SCORE:");
  if (pos == std::string::npos) return std::nullopt;
  pos += 6;
  while (pos < reply.size() && reply[pos] == ' ') ++pos;
  if (pos >= reply.size() || !std::isdigit(static_cast<unsigned char>(reply[pos]))) {
    return std::nullopt;
  }
  int value = 0;
  while (pos < reply.size() && std::isdigit(static_cast<unsigned char>(reply[pos]))) {
    value = value * 10 + (reply[pos] - '0');
    ++pos;
  }
  if (value < 0 || value > 100) return std::nullopt;
  return value;
}

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos;
  while ((pos = text.find(slot)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
  }
  return text;
}

}  // namespace

std::optional<int> g4s(const TaskPlan& pred, const TaskPlan& gold, const std::string& request,
                       LlmGateway& judge, const std::string& template_text) {
  std::string prompt = template_text;
  prompt = replace_slot(std::move(prompt), "{request}", request);
  prompt = replace_slot(std::move(prompt), "{gold}", to_json(gold).dump());
  prompt = replace_slot(std::move(prompt), "{predicted}", to_json(pred).dump());

  std::vector<ChatMessage> messages{{Role::User, prompt}};
  for (int round = 0; round < 2; ++round) {
    const std::string reply = judge.complete(messages);
    if (auto score = parse_score(reply)) return score;
    if (round == 0) {
      messages.push_back({Role::Assistant, reply});
      messages.push_back(
          {Role::User, "Answer with exactly \"SCORE: <integer>\" where the integer is 0-100."});
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

double to_percent(double rate) { return std::floor(rate * 100.0 * 100.0 + 0.5) / 100.0; }

namespace {

double round2(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

}  // namespace

RecordMetrics score_record(const EvalRecord& record, LlmGateway* judge,
                           const std::string& judge_template) {
  RecordMetrics metrics;
  metrics.category = record.category;

  TaskPlan pred;  // a missing prediction scores as the empty plan
  if (record.predicted_plan.has_value()) {
    pred = *record.predicted_plan;
  } else {
    metrics.parse_failed = true;
  }

  metrics.prf = task_set_prf(pred, record.gold_plan);
  switch (record.category) {
    case TaskCategory::Single:
      metrics.accuracy = single_accuracy(pred, record.gold_plan);
      break;
    case TaskCategory::Sequential:
      metrics.edit_distance =
          normalized_edit_distance(plan_type_sequence(pred), plan_type_sequence(record.gold_plan));
      break;
    case TaskCategory::Graph:
      if (judge != nullptr) {
        metrics.judge_score = g4s(pred, record.gold_plan, record.text, *judge, judge_template);
      }
      break;
  }
  return metrics;
}

MetricReport aggregate(const std::vector<RecordMetrics>& records) {
  struct Sums {
    int count = 0;
    double acc = 0, ed = 0, p = 0, r = 0, f1 = 0;
    double judge_total = 0;
    int judged = 0;
  };
  std::map<TaskCategory, Sums> sums;

  MetricReport report;
  for (const RecordMetrics& m : records) {
    Sums& s = sums[m.category];
    ++s.count;
    s.p += m.prf.precision;
    s.r += m.prf.recall;
    s.f1 += m.prf.f1;
    if (m.category == TaskCategory::Single) s.acc += m.accuracy;
    if (m.category == TaskCategory::Sequential) s.ed += m.edit_distance;
    if (m.category == TaskCategory::Graph) {
      if (m.judge_score.has_value()) {
        s.judge_total += *m.judge_score;
        ++s.judged;
      } else {
        ++report.judge_failures;
      }
    }
    if (m.parse_failed) ++report.parse_failures;
  }

  auto build = [](TaskCategory category, const Sums& s) {
    CategoryAggregate agg;
    agg.count = s.count;
    const double n = s.count;
    agg.precision = to_percent(s.p / n);
    agg.recall = to_percent(s.r / n);
    agg.f1 = to_percent(s.f1 / n);
    if (category == TaskCategory::Single) agg.acc = to_percent(s.acc / n);
    if (category == TaskCategory::Sequential) agg.ed = round2(s.ed / n);
    if (category == TaskCategory::Graph && s.judged > 0) {
      agg.g4s = round2(s.judge_total / s.judged);
    }
    return agg;
  };

  for (const auto& [category, s] : sums) {
    if (s.count == 0) continue;
    auto agg = build(category, s);
    switch (category) {
      case TaskCategory::Single: report.single = agg; break;
      case TaskCategory::Sequential: report.sequential = agg; break;
      case TaskCategory::Graph: report.graph = agg; break;
    }
  }
  return report;
}

namespace {

Json aggregate_to_json(TaskCategory category, const CategoryAggregate& agg) {
  Json j{{"count", agg.count},
         {"pre", agg.precision},
         {"rec", agg.recall},
         {"f1", agg.f1}};
  if (agg.acc) j["acc"] = *agg.acc;
  if (agg.ed) j["ed"] = *agg.ed;
  if (agg.g4s) j["g4s"] = *agg.g4s;
  (void)category;
  return j;
}

}  // namespace

Json report_to_json(const MetricReport& report) {
  Json j = Json::object();
  if (report.single) j["single"] = aggregate_to_json(TaskCategory::Single, *report.single);
  if (report.sequential) {
    j["sequential"] = aggregate_to_json(TaskCategory::Sequential, *report.sequential);
  }
  if (report.graph) j["graph"] = aggregate_to_json(TaskCategory::Graph, *report.graph);
  j["judge_failures"] = report.judge_failures;
  j["parse_failures"] = report.parse_failures;
  return j;
}

std::string report_to_table(const MetricReport& report) {
  std::string out;
  out += fmt::format("{:<12}{:>7}{:>9}{:>7}{:>8}{:>9}{:>9}{:>9}\n", "category", "count", "acc",
                     "ed", "g4s", "pre", "rec", "f1");
  auto fmt_opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.2f}", *v) : std::string("-");
  };
  auto row = [&](const char* name, const std::optional<CategoryAggregate>& agg) {
    if (!agg) return;
    out += fmt::format("{:<12}{:>7}{:>9}{:>7}{:>8}{:>9.2f}{:>9.2f}{:>9.2f}\n", name, agg->count,
                       fmt_opt(agg->acc), fmt_opt(agg->ed), fmt_opt(agg->g4s), agg->precision,
                       agg->recall, agg->f1);
  };
  row("single", report.single);
  row("sequential", report.sequential);
  row("graph", report.graph);
  if (report.judge_failures > 0) {
    out += fmt::format("judge failures: {}\n", report.judge_failures);
  }
  if (report.parse_failures > 0) {
    out += fmt::format("parse failures: {}\n", report.parse_failures);
  }
  return out;
}

}  // namespace esp
