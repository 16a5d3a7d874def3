#include "spike/chat.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <thread>

namespace spike {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string base;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ContractError("endpoint '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 240;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(ChatClientConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty() || cfg_.model_name.empty())
            throw ContractError("chat client requires endpoint and model_name");
        if (cfg_.temperature < 0.0) throw ContractError("temperature must be >= 0");
    }

    std::string complete(const std::string& prompt) override {
        json payload{{"model", cfg_.model_name},
                     {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", cfg_.temperature}};
        if (cfg_.force_json) payload["response_format"] = json{{"type", "json_object"}};
        const std::string body = payload.dump();
        const SplitUrl url = split_url(cfg_.endpoint);

        for (int attempt = 0;; ++attempt) {
            httplib::Client client(url.base);
            client.set_connection_timeout(cfg_.timeout);
            client.set_read_timeout(cfg_.timeout);
            httplib::Headers headers;
            if (const char* key = std::getenv("CHAT_API_KEY"))
                headers.emplace("Authorization", std::string("Bearer ") + key);

            auto result = client.Post(url.path, headers, body, "application/json");
            if (result && result->status == 200) return extract_content(result->body);

            std::string reason = result ? "status " + std::to_string(result->status) + ": " + excerpt(result->body)
                                        : "transport: " + httplib::to_string(result.error());
            bool retryable = !result || retryable_status(result->status);
            if (!retryable) throw ProviderError("chat request failed (" + reason + ")");
            if (attempt >= cfg_.max_retries)
                throw ProviderError("chat request failed after " + std::to_string(attempt + 1) +
                                    " attempts (" + reason + ")");
            auto delay = std::chrono::milliseconds(100) * (1 << std::min(attempt, 6));
            spdlog::warn("chat request retry {}/{} in {} ms ({})", attempt + 1, cfg_.max_retries,
                         delay.count(), reason);
            std::this_thread::sleep_for(delay);
        }
    }

private:
    static std::string extract_content(const std::string& body) {
        try {
            json parsed = json::parse(body);
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed chat response: ") + e.what() + " in " + excerpt(body));
        }
    }

    ChatClientConfig cfg_;
};

}  // namespace

std::unique_ptr<ChatClient> make_chat_client(const ChatClientConfig& cfg) {
    return std::make_unique<HttpChatClient>(cfg);
}

}  // namespace spike
