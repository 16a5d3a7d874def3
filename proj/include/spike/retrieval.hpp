#pragma once
// Query scoring against the dual index: document relevance, max-over-units
// scenario relevance, the weighted combination, and the two-stage strategy
// that restricts unit scoring to a document-score candidate set.

#include "spike/core.hpp"
#include "spike/embedding.hpp"
#include "spike/index_store.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spike {

struct RetrievalParams {
    double alpha = 0.7;               // relevance weight on the document score
    int k = 10;                       // results returned
    std::optional<int> k_prime = 1000;  // candidate set size; nullopt scores everything
};

// Cosine of the query against every document vector, aligned with doc_ids.
std::vector<double> score_documents(const Embedding& query, const DualIndex& index);

struct ScenarioScore {
    double score = 0.0;
    std::uint32_t unit_index = 0;  // the unit that achieved the max
};

// Per subset entry: the best unit cosine for that document, or nullopt when
// the document owns no units. Only subset documents are scored.
std::vector<std::optional<ScenarioScore>> max_scenario_score(const Embedding& query,
                                                             const DualIndex& index,
                                                             std::span<const std::uint32_t> doc_subset);

// alpha * r_d + (1 - alpha) * r_s_max. Documents without a scenario score
// fall back to r_d alone so missing scenarios never penalize them.
// Throws ContractError when alpha is outside [0, 1] or the arrays disagree.
std::vector<double> final_scores(std::span<const double> doc_scores,
                                 std::span<const std::optional<ScenarioScore>> scenario_scores,
                                 double alpha);

struct SearchHit {
    std::string doc_id;
    double score = 0.0;      // final combined score
    double doc_score = 0.0;  // document-only relevance
    std::optional<std::string> unit_id;  // winning unit, when the doc has one
};

struct SearchResult {
    RankedList ranked;
    std::vector<SearchHit> hits;  // same order as ranked.entries
};

// Full pipeline on a pre-embedded query: candidate selection by document
// score (boundary ties included), unit scoring on the candidates only, then
// the weighted combination. k_prime = nullopt scores units for all documents.
SearchResult retrieve_with_vector(const Embedding& query, const DualIndex& index,
                                  const RetrievalParams& params, const std::string& query_id = "");

// Embeds the query (role=query) and runs retrieve_with_vector. Warns when the
// provider fingerprint differs from the one the index was built with.
SearchResult retrieve(const std::string& query_text, const DualIndex& index,
                      const RetrievalParams& params, const EmbeddingProviderConfig& provider_cfg,
                      const std::string& query_id = "");

}  // namespace spike
