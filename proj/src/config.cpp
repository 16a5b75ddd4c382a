#include "esp/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace esp {

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path, what));
}

std::string read_text_file(const std::filesystem::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) config_error(field, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

LlmProfile profile_from_json(const std::string& name, const Json& j, const std::string& path) {
  LlmProfile p;
  p.name = j.value("name", name);
  p.endpoint = j.value("endpoint", std::string());
  p.temperature = j.value("temperature", 0.0);
  p.max_tokens = j.value("max_tokens", 512);
  p.timeout_ms = j.value("timeout_ms", 30000);
  p.max_retries = j.value("max_retries", 3);
  p.backoff_base_ms = j.value("backoff_base_ms", 100);
  p.backoff_ceiling_ms = j.value("backoff_ceiling_ms", 2000);
  p.rate_limit_rps = j.value("rate_limit_rps", 0.0);
  p.api_key_env = j.value("api_key_env", std::string());
  if (p.temperature < 0) config_error(path + "/temperature", "must be >= 0");
  if (p.max_tokens <= 0) config_error(path + "/max_tokens", "must be positive");
  if (p.timeout_ms <= 0) config_error(path + "/timeout_ms", "must be positive");
  if (p.max_retries < 0) config_error(path + "/max_retries", "must be >= 0");
  return p;
}

}  // namespace

const LlmProfile& AppConfig::profile_for(const std::string& role_name) const {
  auto it = profiles.find(role_name);
  if (it == profiles.end()) {
    throw Error(ErrorCode::ConfigError, fmt::format("unknown profile '{}'", role_name));
  }
  return it->second;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", path, e.what()));
  }

  AppConfig config;
  config.base_dir = std::filesystem::absolute(path).parent_path();
  auto resolve = [&config](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : config.base_dir / fp;
  };

  // Vocabulary: configuration data, not code.
  if (!j.contains("vocabulary_file")) config_error("/vocabulary_file", "required");
  const auto vocab_path = resolve(j["vocabulary_file"].get<std::string>());
  Json vocab_json = Json::parse(read_text_file(vocab_path, "/vocabulary_file"), nullptr, false);
  if (vocab_json.is_discarded()) config_error("/vocabulary_file", "not valid JSON");
  config.vocabulary = vocabulary_from_json(vocab_json);
  if (config.vocabulary.empty()) config_error("/vocabulary_file", "vocabulary is empty");

  // Prompt templates.
  if (!j.contains("prompts") || !j["prompts"].is_object()) {
    config_error("/prompts", "required object");
  }
  const Json& prompts = j["prompts"];
  for (const char* key : {"planner", "arbitration", "responder", "judge"}) {
    if (!prompts.contains(key) || !prompts[key].is_string()) {
      config_error(fmt::format("/prompts/{}", key), "required path");
    }
  }
  config.planner.prompt_template = read_text_file(
      resolve(prompts["planner"].get<std::string>()), "/prompts/planner");
  config.arbitration.template_text = read_text_file(
      resolve(prompts["arbitration"].get<std::string>()), "/prompts/arbitration");
  config.responder.template_text = read_text_file(
      resolve(prompts["responder"].get<std::string>()), "/prompts/responder");
  config.judge_template = read_text_file(
      resolve(prompts["judge"].get<std::string>()), "/prompts/judge");

  for (const char* slot : {"{request}", "{vocabulary}", "{demonstrations}"}) {
    if (config.planner.prompt_template.find(slot) == std::string::npos) {
      config_error("/prompts/planner", fmt::format("template missing the {} slot", slot));
    }
  }
  for (const char* slot : {"{subtask}", "{candidates}", "{matrix}"}) {
    if (config.arbitration.template_text.find(slot) == std::string::npos) {
      config_error("/prompts/arbitration", fmt::format("template missing the {} slot", slot));
    }
  }

  if (j.contains("demonstrations_file")) {
    const auto demos_path = resolve(j["demonstrations_file"].get<std::string>());
    Json demos = Json::parse(read_text_file(demos_path, "/demonstrations_file"), nullptr, false);
    if (demos.is_discarded() || !demos.is_array()) {
      config_error("/demonstrations_file", "must contain a JSON array");
    }
    for (const auto& d : demos) {
      config.planner.demonstrations.emplace_back(d.at("request").get<std::string>(),
                                                 d.at("plan").dump());
    }
  }

  if (j.contains("planner")) {
    config.planner.max_repair_rounds = j["planner"].value("max_repair_rounds", 2);
    if (config.planner.max_repair_rounds < 0) {
      config_error("/planner/max_repair_rounds", "must be >= 0");
    }
  }

  if (j.contains("policy")) {
    const Json& policy = j["policy"];
    config.policy.k = policy.value("k", 3);
    if (config.policy.k < 1) config_error("/policy/k", "must be >= 1");
    if (policy.contains("metric_order")) {
      config.policy.metric_order = policy["metric_order"].get<std::vector<std::string>>();
      if (config.policy.metric_order.empty()) {
        config_error("/policy/metric_order", "must be nonempty");
      }
      for (const std::string& metric : config.policy.metric_order) {
        if (std::find(kRankMetrics.begin(), kRankMetrics.end(), metric) == kRankMetrics.end()) {
          config_error("/policy/metric_order", fmt::format("unknown metric '{}'", metric));
        }
      }
    }
  }

  if (j.contains("embedding")) {
    const Json& embedding = j["embedding"];
    const std::string mode = embedding.value("mode", "deterministic-hash-tf");
    if (mode == "deterministic-hash-tf") {
      config.embedding.mode = EmbeddingMode::DeterministicHashTf;
    } else if (mode == "remote-sentence-embedding") {
      config.embedding.mode = EmbeddingMode::RemoteSentenceEmbedding;
    } else {
      config_error("/embedding/mode", fmt::format("unknown mode '{}'", mode));
    }
    config.embedding.dimension = embedding.value("dimension", 256);
    if (config.embedding.dimension <= 0) config_error("/embedding/dimension", "must be positive");
    config.embedding.endpoint = embedding.value("endpoint", std::string());
    config.embedding.timeout_ms = embedding.value("timeout_ms", 10000);
    if (config.embedding.mode == EmbeddingMode::RemoteSentenceEmbedding &&
        config.embedding.endpoint.empty()) {
      config_error("/embedding/endpoint", "required for remote-sentence-embedding");
    }
  }

  if (j.contains("executor")) {
    config.limits.parallelism = j["executor"].value("parallelism", 4);
    config.limits.invocation_timeout_ms = j["executor"].value("invocation_timeout_ms", 60000);
    if (config.limits.parallelism < 1) config_error("/executor/parallelism", "must be >= 1");
    if (config.limits.invocation_timeout_ms <= 0) {
      config_error("/executor/invocation_timeout_ms", "must be positive");
    }
  }

  if (!j.contains("llm") || !j["llm"].is_object()) config_error("/llm", "required object");
  const Json& llm = j["llm"];
  if (!llm.contains("profiles") || !llm["profiles"].is_object()) {
    config_error("/llm/profiles", "required object");
  }
  for (const auto& [name, value] : llm["profiles"].items()) {
    config.profiles[name] = profile_from_json(name, value, "/llm/profiles/" + name);
  }
  config.planner_profile = llm.value("planner_profile", std::string());
  config.arbiter_profile = llm.value("arbiter_profile", std::string());
  config.responder_profile = llm.value("responder_profile", std::string());
  config.judge_profile = llm.value("judge_profile", std::string());
  for (const auto& [field, value] :
       std::initializer_list<std::pair<const char*, const std::string*>>{
           {"/llm/planner_profile", &config.planner_profile},
           {"/llm/arbiter_profile", &config.arbiter_profile},
           {"/llm/responder_profile", &config.responder_profile},
           {"/llm/judge_profile", &config.judge_profile}}) {
    if (value->empty()) config_error(field, "required");
    if (config.profiles.find(*value) == config.profiles.end()) {
      config_error(field, fmt::format("unknown profile '{}'", *value));
    }
  }

  if (j.contains("catalog_snapshot")) {
    config.catalog_snapshot = resolve(j["catalog_snapshot"].get<std::string>()).string();
  }
  if (j.contains("mock")) {
    const Json& mock = j["mock"];
    if (mock.contains("llm_script")) {
      config.mock_llm_script = resolve(mock["llm_script"].get<std::string>()).string();
    }
    if (mock.contains("model_script")) {
      config.mock_model_script = resolve(mock["model_script"].get<std::string>()).string();
    }
  }

  return config;
}

}  // namespace esp
