#include "spike/retrieval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace spike {

std::vector<double> score_documents(const Embedding& query, const DualIndex& index) {
    if (query.dim() != index.dim)
        throw ContractError("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                            std::to_string(index.dim));
    std::vector<double> scores(index.num_docs());
    const std::span<const float> q(query.values);
    for (std::size_t i = 0; i < index.num_docs(); ++i) scores[i] = cosine_similarity(q, index.doc_vector(i));
    return scores;
}

std::vector<std::optional<ScenarioScore>> max_scenario_score(const Embedding& query,
                                                             const DualIndex& index,
                                                             std::span<const std::uint32_t> doc_subset) {
    if (query.dim() != index.dim)
        throw ContractError("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                            std::to_string(index.dim));
    const std::span<const float> q(query.values);
    std::vector<std::optional<ScenarioScore>> scores(doc_subset.size());
    for (std::size_t s = 0; s < doc_subset.size(); ++s) {
        const std::uint32_t doc = doc_subset[s];
        if (doc >= index.num_docs()) throw ContractError("doc subset index out of range");
        const DualIndex::Range range = index.doc_units[doc];
        for (std::uint32_t u = range.begin; u < range.end; ++u) {
            const double sim = cosine_similarity(q, index.unit_vector(u));
            if (!scores[s] || sim > scores[s]->score) scores[s] = ScenarioScore{sim, u};
        }
    }
    return scores;
}

std::vector<double> final_scores(std::span<const double> doc_scores,
                                 std::span<const std::optional<ScenarioScore>> scenario_scores,
                                 double alpha) {
    if (alpha < 0.0 || alpha > 1.0 || std::isnan(alpha))
        throw ContractError("alpha must be in [0, 1], got " + std::to_string(alpha));
    if (doc_scores.size() != scenario_scores.size())
        throw ContractError("score arrays are not aligned");
    std::vector<double> combined(doc_scores.size());
    for (std::size_t i = 0; i < doc_scores.size(); ++i) {
        combined[i] = scenario_scores[i] ? alpha * doc_scores[i] + (1.0 - alpha) * scenario_scores[i]->score
                                         : doc_scores[i];
    }
    return combined;
}

namespace {

// Candidate documents by document score. Every document tied with the
// k_prime-th score is included, so membership does not depend on sort
// stability.
std::vector<std::uint32_t> candidate_set(const std::vector<double>& doc_scores,
                                         std::optional<int> k_prime) {
    std::vector<std::uint32_t> all(doc_scores.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    if (!k_prime || static_cast<std::size_t>(*k_prime) >= all.size()) return all;

    std::vector<double> copy(doc_scores);
    std::nth_element(copy.begin(), copy.begin() + (*k_prime - 1), copy.end(), std::greater<double>());
    const double threshold = copy[static_cast<std::size_t>(*k_prime - 1)];

    std::vector<std::uint32_t> candidates;
    candidates.reserve(static_cast<std::size_t>(*k_prime));
    for (std::uint32_t i = 0; i < doc_scores.size(); ++i)
        if (doc_scores[i] >= threshold) candidates.push_back(i);
    return candidates;
}

}  // namespace

SearchResult retrieve_with_vector(const Embedding& query, const DualIndex& index,
                                  const RetrievalParams& params, const std::string& query_id) {
    if (params.k <= 0) throw ContractError("k must be positive");
    if (params.k_prime) {
        if (*params.k_prime <= 0) throw ContractError("k_prime must be positive");
        if (params.k > *params.k_prime)
            throw ContractError("k (" + std::to_string(params.k) + ") must not exceed k_prime (" +
                                std::to_string(*params.k_prime) + ")");
    }

    const std::vector<double> doc_scores = score_documents(query, index);
    const std::vector<std::uint32_t> candidates = candidate_set(doc_scores, params.k_prime);

    std::vector<double> candidate_doc_scores;
    candidate_doc_scores.reserve(candidates.size());
    for (std::uint32_t doc : candidates) candidate_doc_scores.push_back(doc_scores[doc]);

    const auto scenario_scores = max_scenario_score(query, index, candidates);
    const std::vector<double> combined = final_scores(candidate_doc_scores, scenario_scores, params.alpha);

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (combined[a] != combined[b]) return combined[a] > combined[b];
        return index.doc_ids[candidates[a]] < index.doc_ids[candidates[b]];
    });
    if (order.size() > static_cast<std::size_t>(params.k)) order.resize(static_cast<std::size_t>(params.k));

    SearchResult result;
    result.ranked.query_id = query_id;
    result.ranked.entries.reserve(order.size());
    result.hits.reserve(order.size());
    for (std::size_t pos : order) {
        const std::uint32_t doc = candidates[pos];
        SearchHit hit;
        hit.doc_id = index.doc_ids[doc];
        hit.score = combined[pos];
        hit.doc_score = doc_scores[doc];
        if (scenario_scores[pos]) hit.unit_id = index.unit_ids[scenario_scores[pos]->unit_index];
        result.ranked.entries.push_back({hit.doc_id, hit.score});
        result.hits.push_back(std::move(hit));
    }
    return result;
}

SearchResult retrieve(const std::string& query_text, const DualIndex& index,
                      const RetrievalParams& params, const EmbeddingProviderConfig& provider_cfg,
                      const std::string& query_id) {
    auto provider = make_embedding_provider(provider_cfg);
    if (provider->fingerprint() != index.provider_fingerprint)
        spdlog::warn("query provider fingerprint {} differs from index fingerprint {}",
                     provider->fingerprint(), index.provider_fingerprint);
    std::vector<Embedding> embedded = provider->embed({query_text}, EmbedRole::query);
    return retrieve_with_vector(embedded.front(), index, params, query_id);
}

}  // namespace spike
