#pragma once

#include <string>
#include <vector>

#include "esp/core.hpp"
#include "esp/llm_gateway.hpp"

namespace esp {

enum class EmbeddingMode { RemoteSentenceEmbedding, DeterministicHashTf };

struct EmbeddingProvider {
  std::string name = "hash-tf";
  int dimension = 256;
  EmbeddingMode mode = EmbeddingMode::DeterministicHashTf;
  std::string endpoint;  // remote mode: POST {texts:[...]} -> {vectors:[[...]]}
  int timeout_ms = 10000;
};

/// One vector per text, each of provider.dimension components.
///
/// Deterministic mode: L2-normalized term-frequency counts of lowercased
/// whitespace tokens, hashed into `dimension` buckets; the bucket is the
/// first 8 bytes of SHA-256(token) mod dimension. Texts with no tokens
/// yield a zero vector, which similarity_matrix later rejects as
/// degenerate.
std::vector<std::vector<double>> embed(const EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts);

/// Pairwise cosine similarities: symmetric, unit diagonal, entries in
/// [-1, 1]. Throws DegenerateEmbedding on a zero-norm vector.
std::vector<std::vector<double>> similarity_matrix(
    const std::vector<std::vector<double>>& vectors);

/// Consensus pick: argmax_i of the off-diagonal row sum, ties broken by the
/// lowest index (the earlier-ranked candidate).
int medoid_select(const std::vector<std::vector<double>>& matrix);

/// Deterministic one-line serialization of a structured model output so one
/// embedding path serves every task type. Plain strings pass through;
/// classification and detection payloads get fixed-format renderings;
/// anything else is compact JSON.
std::string canonical_text(const Json& structured_payload);

/// Template slots: {subtask}, {candidates}, {matrix}. The arbiter must
/// answer "CHOICE: <index>" with optional free-text rationale after it.
struct ArbitrationPrompt {
  std::string template_text;
};

std::string render_arbitration_prompt(const ArbitrationPrompt& prompt, const Subtask& subtask,
                                      const std::vector<CandidateResult>& candidates,
                                      const std::vector<std::vector<double>>& matrix);

struct IntegratorOptions {
  bool fallback_to_hash_tf = true;  // on remote embedding outage
};

/// Picks the optimal candidate: singleton short-circuits; otherwise embeds
/// the canonical texts, builds the similarity matrix, asks the arbiter, and
/// falls back to the medoid after one re-ask (or when no arbiter is
/// configured / the gateway fails). The chosen output is always one of the
/// inputs verbatim, never a blend.
SelectionDecision integrate(const Subtask& subtask,
                            const std::vector<CandidateResult>& ok_candidates,
                            const EmbeddingProvider& provider, LlmGateway* arbiter,
                            const ArbitrationPrompt& prompt,
                            const IntegratorOptions& options = {});

}  // namespace esp
