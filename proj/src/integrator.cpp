#include "esp/integrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "esp/hash.hpp"
#include "http_support.hpp"

namespace esp {

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> hash_tf_vector(const std::string& text, int dimension) {
  std::vector<double> vec(static_cast<std::size_t>(dimension), 0.0);
  for (const std::string& token : tokenize_lower(text)) {
    auto bucket = sha256_prefix_u64(token) % static_cast<std::uint64_t>(dimension);
    vec[static_cast<std::size_t>(bucket)] += 1.0;
  }
  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq > 0.0) {
    const double norm = std::sqrt(norm_sq);
    for (double& v : vec) v /= norm;
  }
  return vec;
}

std::vector<std::vector<double>> remote_embed(const EmbeddingProvider& provider,
                                              const std::vector<std::string>& texts) {
  auto [base, path] = detail::split_url(provider.endpoint);
  auto client = detail::make_client(base, provider.timeout_ms);
  Json body{{"texts", texts}};
  auto result = client.Post(path, body.dump(), "application/json");
  if (!result || result->status != 200) {
    throw Error(ErrorCode::Unavailable,
                fmt::format("embedding endpoint {} unreachable", provider.endpoint));
  }
  std::vector<std::vector<double>> vectors;
  try {
    Json reply = Json::parse(result->body);
    vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ProtocolError, fmt::format("malformed embedding reply: {}", e.what()));
  }
  for (const auto& v : vectors) {
    if (static_cast<int>(v.size()) != provider.dimension) {
      throw Error(ErrorCode::ProtocolError,
                  fmt::format("embedding dimension {} != configured {}", v.size(),
                              provider.dimension));
    }
  }
  return vectors;
}

}  // namespace

std::vector<std::vector<double>> embed(const EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::Precondition, "embed called with no texts");
  if (provider.dimension <= 0) throw Error(ErrorCode::Precondition, "dimension must be positive");
  if (provider.mode == EmbeddingMode::RemoteSentenceEmbedding) {
    return remote_embed(provider, texts);
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(texts.size());
  for (const std::string& text : texts) {
    vectors.push_back(hash_tf_vector(text, provider.dimension));
  }
  return vectors;
}

std::vector<std::vector<double>> similarity_matrix(
    const std::vector<std::vector<double>>& vectors) {
  const std::size_t n = vectors.size();
  if (n == 0) throw Error(ErrorCode::Precondition, "similarity_matrix needs at least one vector");

  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double v : vectors[i]) sq += v * v;
    if (sq <= 0.0) {
      throw Error(ErrorCode::DegenerateEmbedding,
                  fmt::format("vector {} has zero norm", i));
    }
    norms[i] = std::sqrt(sq);
  }

  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (vectors[i].size() != vectors[j].size()) {
        throw Error(ErrorCode::Precondition, "vectors differ in dimension");
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) dot += vectors[i][k] * vectors[j][k];
      const double value = dot / (norms[i] * norms[j]);
      m[i][j] = value;
      m[j][i] = value;
    }
  }
  return m;
}

int medoid_select(const std::vector<std::vector<double>>& matrix) {
  if (matrix.empty()) throw Error(ErrorCode::Precondition, "medoid_select on empty matrix");
  int best = 0;
  double best_sum = -1e300;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < matrix[i].size(); ++j) {
      if (j != i) sum += matrix[i][j];
    }
    if (sum > best_sum) {
      best_sum = sum;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Canonical text
// ---------------------------------------------------------------------------

namespace {

std::string number_repr(const Json& n) {
  return n.dump();  // shortest round-trip representation
}

std::optional<std::string> canonical_classification(const Json& payload) {
  if (!payload.contains("classification") || !payload["classification"].is_array()) {
    return std::nullopt;
  }
  struct Entry {
    std::string label;
    double prob;
  };
  std::vector<Entry> entries;
  for (const auto& item : payload["classification"]) {
    if (!item.is_object() || !item.contains("label") || !item.contains("prob")) {
      return std::nullopt;
    }
    entries.push_back({item["label"].get<std::string>(), item["prob"].get<double>()});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.label < b.label;
  });
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += "; ";
    out += fmt::format("label:{} p={:.4f}", entries[i].label, entries[i].prob);
  }
  return out;
}

std::optional<std::string> canonical_detection(const Json& payload) {
  if (!payload.contains("detection") || !payload["detection"].is_array()) {
    return std::nullopt;
  }
  struct Entry {
    std::string label;
    Json box;
    double confidence;
  };
  std::vector<Entry> entries;
  for (const auto& item : payload["detection"]) {
    if (!item.is_object() || !item.contains("label") || !item.contains("box") ||
        !item["box"].is_array() || item["box"].size() != 4) {
      return std::nullopt;
    }
    entries.push_back(
        {item["label"].get<std::string>(), item["box"], item.value("confidence", 0.0)});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.label < b.label;
  });
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += "; ";
    out += fmt::format("{}@[{},{},{},{}]", entries[i].label, number_repr(entries[i].box[0]),
                       number_repr(entries[i].box[1]), number_repr(entries[i].box[2]),
                       number_repr(entries[i].box[3]));
  }
  return out;
}

}  // namespace

std::string canonical_text(const Json& payload) {
  if (payload.is_string()) return payload.get<std::string>();
  if (payload.is_object()) {
    if (auto text = canonical_classification(payload)) return *text;
    if (auto text = canonical_detection(payload)) return *text;
  }
  return payload.dump();
}

// ---------------------------------------------------------------------------
// Arbitration
// ---------------------------------------------------------------------------

namespace {

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos;
  while ((pos = text.find(slot)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
  }
  return text;
}

std::string render_matrix(const std::vector<std::vector<double>>& matrix) {
  std::string out;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    for (std::size_t j = 0; j < matrix[i].size(); ++j) {
      if (j) out += "  ";
      out += fmt::format("{:.3f}", matrix[i][j]);
    }
    out += '\n';
  }
  return out;
}

// Accepts "CHOICE: <n>" anywhere in the reply.
std::optional<int> parse_choice(const std::string& reply, int n) {
  auto pos = reply.find("CHOICE:");
  if (pos == std::string::npos) return std::nullopt;
  pos += 7;
  while (pos < reply.size() && reply[pos] == ' ') ++pos;
  if (pos >= reply.size() || !std::isdigit(static_cast<unsigned char>(reply[pos]))) {
    return std::nullopt;
  }
  int value = 0;
  while (pos < reply.size() && std::isdigit(static_cast<unsigned char>(reply[pos]))) {
    value = value * 10 + (reply[pos] - '0');
    ++pos;
  }
  if (value < 0 || value >= n) return std::nullopt;
  return value;
}

}  // namespace

std::string render_arbitration_prompt(const ArbitrationPrompt& prompt, const Subtask& subtask,
                                      const std::vector<CandidateResult>& candidates,
                                      const std::vector<std::vector<double>>& matrix) {
  std::string subtask_desc =
      fmt::format("subtask {} ({})", subtask.id, subtask.task_type);
  std::string listing;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    listing += fmt::format("[{}] {}: {}\n", i, candidates[i].model_id,
                           candidates[i].canonical_text);
  }
  std::string text = prompt.template_text;
  text = replace_slot(std::move(text), "{subtask}", subtask_desc);
  text = replace_slot(std::move(text), "{candidates}", listing);
  text = replace_slot(std::move(text), "{matrix}", render_matrix(matrix));
  return text;
}

SelectionDecision integrate(const Subtask& subtask,
                            const std::vector<CandidateResult>& ok_candidates,
                            const EmbeddingProvider& provider, LlmGateway* arbiter,
                            const ArbitrationPrompt& prompt, const IntegratorOptions& options) {
  if (ok_candidates.empty()) {
    throw Error(ErrorCode::Precondition, "integrate needs at least one ok candidate");
  }

  SelectionDecision decision;
  decision.subtask_id = subtask.id;

  if (ok_candidates.size() == 1) {
    decision.similarity = {{1.0}};
    decision.chosen_index = 0;
    decision.method = SelectionMethod::Singleton;
    decision.rationale = "single candidate";
    return decision;
  }

  std::vector<std::string> texts;
  texts.reserve(ok_candidates.size());
  for (const CandidateResult& c : ok_candidates) texts.push_back(c.canonical_text);

  std::vector<std::vector<double>> vectors;
  try {
    vectors = embed(provider, texts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Unavailable && options.fallback_to_hash_tf &&
        provider.mode == EmbeddingMode::RemoteSentenceEmbedding) {
      EmbeddingProvider local = provider;
      local.mode = EmbeddingMode::DeterministicHashTf;
      vectors = embed(local, texts);
    } else {
      throw;
    }
  }

  // Degenerate (zero-norm) embeddings get a zero similarity row instead of
  // aborting the subtask; the candidate is effectively voted out.
  const std::size_t n = vectors.size();
  std::vector<bool> degenerate(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double v : vectors[i]) sq += v * v;
    degenerate[i] = sq <= 0.0;
  }

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i) {
    if (!degenerate[i]) live.push_back(i);
  }

  std::vector<std::vector<double>> matrix(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) matrix[i][i] = 1.0;
  if (!live.empty()) {
    std::vector<std::vector<double>> live_vectors;
    for (std::size_t idx : live) live_vectors.push_back(vectors[idx]);
    auto live_matrix = similarity_matrix(live_vectors);
    for (std::size_t a = 0; a < live.size(); ++a) {
      for (std::size_t b = 0; b < live.size(); ++b) {
        matrix[live[a]][live[b]] = live_matrix[a][b];
      }
    }
  }
  decision.similarity = matrix;

  const int count = static_cast<int>(n);
  std::optional<int> choice;
  std::string rationale;

  if (arbiter != nullptr) {
    const std::string rendered =
        render_arbitration_prompt(prompt, subtask, ok_candidates, matrix);
    std::vector<ChatMessage> messages{{Role::User, rendered}};
    for (int round = 0; round < 2 && !choice; ++round) {
      std::string reply;
      try {
        reply = arbiter->complete(messages);
      } catch (const Error&) {
        break;  // gateway failure falls through to the medoid, never aborts
      }
      choice = parse_choice(reply, count);
      if (choice) {
        rationale = reply;
      } else if (round == 0) {
        messages.push_back({Role::Assistant, reply});
        messages.push_back(
            {Role::User,
             fmt::format("Answer with exactly \"CHOICE: <index>\" where <index> is an "
                         "integer in [0, {}].",
                         count - 1)});
      }
    }
  }

  if (choice) {
    decision.chosen_index = *choice;
    decision.method = SelectionMethod::LlmArbitration;
    decision.rationale = rationale;
  } else {
    decision.chosen_index = medoid_select(matrix);
    decision.method = SelectionMethod::MedoidFallback;
    decision.rationale = "medoid fallback: maximum total similarity to the other candidates";
  }
  return decision;
}

}  // namespace esp
