#pragma once
// Text-to-vector providers and the similarity primitives used by scoring.
//
// Two providers: a deterministic hashing scheme for offline use and tests, and
// a remote HTTP client speaking the common JSON embeddings wire shape.

#include "spike/core.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spike {

struct Embedding {
    std::vector<float> values;

    int dim() const { return static_cast<int>(values.size()); }
    bool all_zero() const;

    bool operator==(const Embedding&) const = default;
};

enum class ProviderKind { deterministic_hash, remote_http };
enum class EmbedRole { query, passage };

struct EmbeddingProviderConfig {
    ProviderKind kind = ProviderKind::deterministic_hash;
    std::string endpoint;      // remote only; e.g. http://host:port/v1/embeddings
    std::string model_name;    // remote only
    int dim = 256;
    int batch_size = 32;
    std::string query_instruction;  // prepended to role=query texts when set
    int max_retries = 3;
    std::chrono::milliseconds timeout{30000};
    int max_in_flight = 4;  // cap on concurrent remote requests
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // One embedding per input, same order, all with the configured dimension.
    // Safe for concurrent calls.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts, EmbedRole role) = 0;

    virtual int dim() const = 0;

    // Identifies (kind, model, dim, instruction); stored in indexes so that a
    // query-side provider swap can be detected.
    virtual std::string fingerprint() const = 0;
};

// Throws ContractError when a remote config lacks endpoint or model_name.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg);

// Convenience wrapper constructing a provider per call.
std::vector<Embedding> embed_batch(const std::vector<std::string>& texts,
                                   const EmbeddingProviderConfig& cfg, EmbedRole role);

std::string provider_fingerprint(const EmbeddingProviderConfig& cfg);

// dot(a,b) / (|a||b|), accumulated in double; 0 when either norm is 0.
// Throws ContractError on dimension mismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(const Embedding& a, const Embedding& b);

// FNV-1a 64-bit, also used for fingerprints and content hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace spike
