#include "spike/embedding.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <semaphore>
#include <sstream>
#include <thread>

namespace spike {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

bool Embedding::all_zero() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw ContractError("cosine dimension mismatch: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;  // degenerate vectors must not outrank real matches
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
    return cosine_similarity(std::span<const float>(a.values), std::span<const float>(b.values));
}

std::string provider_fingerprint(const EmbeddingProviderConfig& cfg) {
    std::string material = (cfg.kind == ProviderKind::remote_http ? "remote_http" : "deterministic_hash");
    material += '|';
    material += cfg.model_name;
    material += '|';
    material += std::to_string(cfg.dim);
    material += '|';
    material += cfg.query_instruction;
    std::ostringstream out;
    out << std::hex << fnv1a64(material);
    return out.str();
}

namespace {

bool is_unicode_whitespace(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Decodes one UTF-8 codepoint at `i`, advancing it. Invalid sequences are
// consumed one byte at a time and treated as non-whitespace.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = len == 1 ? b0 : b0 & (0x7F >> len);
    for (std::size_t j = 1; j < len; ++j) {
        unsigned char bj = static_cast<unsigned char>(s[i + j]);
        if ((bj >> 6) != 0x2) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bj & 0x3F);
    }
    i += len;
    return cp;
}

// Lowercases ASCII letters and splits on Unicode whitespace. Non-ASCII bytes
// pass through unchanged, so hashing stays byte-stable across platforms.
std::vector<std::string> tokenize_for_hashing(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = next_codepoint(text, i);
        if (is_unicode_whitespace(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
            continue;
        }
        for (std::size_t j = start; j < i; ++j) {
            char c = text[j];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            current += c;
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

void l2_normalize(std::vector<float>& values) {
    double norm_sq = 0.0;
    for (float v : values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
    if (norm_sq == 0.0) return;
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (float& v : values) v = static_cast<float>(v * inv);
}

// Hashed bag-of-tokens embedding: FNV-1a of each token picks a bucket, counts
// are L2-normalized. Pure function of (text, dim); whitespace-only texts map
// to the all-zero vector.
class DeterministicProvider final : public EmbeddingProvider {
public:
    explicit DeterministicProvider(EmbeddingProviderConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.dim <= 0) throw ContractError("embedding dim must be positive");
    }

    std::vector<Embedding> embed(const std::vector<std::string>& texts, EmbedRole role) override {
        if (texts.empty()) throw ContractError("embed called with no texts");
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const std::string& text : texts) {
            const std::string* effective = &text;
            std::string prefixed;
            if (role == EmbedRole::query && !cfg_.query_instruction.empty()) {
                prefixed = cfg_.query_instruction + text;
                effective = &prefixed;
            }
            Embedding e;
            e.values.assign(static_cast<std::size_t>(cfg_.dim), 0.0f);
            for (const std::string& token : tokenize_for_hashing(*effective)) {
                std::size_t bucket = static_cast<std::size_t>(fnv1a64(token) % static_cast<std::uint64_t>(cfg_.dim));
                e.values[bucket] += 1.0f;
            }
            if (e.all_zero()) spdlog::debug("degenerate embedding: no tokens in input text");
            l2_normalize(e.values);
            out.push_back(std::move(e));
        }
        return out;
    }

    int dim() const override { return cfg_.dim; }
    std::string fingerprint() const override { return provider_fingerprint(cfg_); }

private:
    EmbeddingProviderConfig cfg_;
};

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ContractError("endpoint '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string body_excerpt(const std::string& body) {
    constexpr std::size_t kMax = 240;
    if (body.size() <= kMax) return body;
    return body.substr(0, kMax) + "...";
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

// POST {model, input: [...]} -> {data: [{embedding: [...]}, ...]} in input
// order. Transient failures retry with exponential backoff; concurrent
// requests are capped by a semaphore.
class RemoteHttpProvider final : public EmbeddingProvider {
public:
    explicit RemoteHttpProvider(EmbeddingProviderConfig cfg)
        : cfg_(std::move(cfg)), in_flight_(std::max(1, cfg_.max_in_flight)) {
        if (cfg_.endpoint.empty() || cfg_.model_name.empty())
            throw ContractError("remote_http provider requires endpoint and model_name");
        if (cfg_.dim <= 0) throw ContractError("embedding dim must be positive");
        if (cfg_.batch_size <= 0) throw ContractError("batch_size must be positive");
    }

    std::vector<Embedding> embed(const std::vector<std::string>& texts, EmbedRole role) override {
        if (texts.empty()) throw ContractError("embed called with no texts");
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (std::size_t begin = 0; begin < texts.size(); begin += static_cast<std::size_t>(cfg_.batch_size)) {
            std::size_t end = std::min(texts.size(), begin + static_cast<std::size_t>(cfg_.batch_size));
            json input = json::array();
            for (std::size_t i = begin; i < end; ++i) {
                if (role == EmbedRole::query && !cfg_.query_instruction.empty())
                    input.push_back(cfg_.query_instruction + texts[i]);
                else
                    input.push_back(texts[i]);
            }
            append_batch(input, end - begin, out);
        }
        return out;
    }

    int dim() const override { return cfg_.dim; }
    std::string fingerprint() const override { return provider_fingerprint(cfg_); }

private:
    httplib::Result post_once(const SplitUrl& url, const std::string& body) {
        httplib::Client client(url.base);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        httplib::Headers headers;
        if (const char* key = std::getenv("EMBEDDING_API_KEY"))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        in_flight_.acquire();
        auto result = client.Post(url.path, headers, body, "application/json");
        in_flight_.release();
        return result;
    }

    void append_batch(const json& input, std::size_t expected, std::vector<Embedding>& out) {
        const json payload{{"model", cfg_.model_name}, {"input", input}};
        const std::string body = payload.dump();
        const SplitUrl url = split_url(cfg_.endpoint);

        std::string response_body;
        for (int attempt = 0;; ++attempt) {
            auto result = post_once(url, body);
            if (result && result->status == 200) {
                response_body = result->body;
                break;
            }
            std::string reason = result ? "status " + std::to_string(result->status) + ": " + body_excerpt(result->body)
                                        : "transport: " + httplib::to_string(result.error());
            bool retryable = !result || retryable_status(result->status);
            if (!retryable)
                throw ProviderError("embedding request failed (" + reason + ")");
            if (attempt >= cfg_.max_retries)
                throw ProviderError("embedding request failed after " + std::to_string(attempt + 1) +
                                    " attempts (" + reason + ")");
            auto delay = std::chrono::milliseconds(100) * (1 << std::min(attempt, 6));
            spdlog::warn("embedding request retry {}/{} in {} ms ({})", attempt + 1, cfg_.max_retries,
                         delay.count(), reason);
            std::this_thread::sleep_for(delay);
        }

        json parsed;
        try {
            parsed = json::parse(response_body);
        } catch (const json::exception& e) {
            throw ProviderError(std::string("embedding response is not JSON: ") + e.what());
        }
        if (!parsed.contains("data") || !parsed.at("data").is_array() || parsed.at("data").size() != expected)
            throw ProviderError("embedding response 'data' missing or wrong length (expected " +
                                std::to_string(expected) + ")");
        for (const auto& item : parsed.at("data")) {
            Embedding e;
            try {
                e.values = item.at("embedding").get<std::vector<float>>();
            } catch (const json::exception& e2) {
                throw ProviderError(std::string("malformed embedding entry: ") + e2.what());
            }
            if (e.dim() != cfg_.dim)
                throw ContractError("embedding dimension mismatch: provider returned " +
                                    std::to_string(e.dim()) + ", configured " + std::to_string(cfg_.dim));
            // Providers must hand out unit vectors; renormalize servers that
            // return raw ones (cosine is unaffected).
            double norm_sq = 0.0;
            for (float v : e.values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
            if (norm_sq > 0.0 && std::abs(std::sqrt(norm_sq) - 1.0) > 1e-4) l2_normalize(e.values);
            out.push_back(std::move(e));
        }
    }

    EmbeddingProviderConfig cfg_;
    std::counting_semaphore<256> in_flight_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg) {
    if (cfg.kind == ProviderKind::remote_http) return std::make_unique<RemoteHttpProvider>(cfg);
    return std::make_unique<DeterministicProvider>(cfg);
}

std::vector<Embedding> embed_batch(const std::vector<std::string>& texts,
                                   const EmbeddingProviderConfig& cfg, EmbedRole role) {
    return make_embedding_provider(cfg)->embed(texts, role);
}

}  // namespace spike
