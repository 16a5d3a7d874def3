#pragma once
// Chat-completion client. One interface so generation and judging can run
// against a live HTTP endpoint or a scripted stand-in in tests.

#include "spike/core.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace spike {

struct ChatClientConfig {
    std::string endpoint;  // e.g. http://host:port/v1/chat/completions
    std::string model_name;
    double temperature = 0.0;  // greedy by default
    int max_retries = 3;
    std::chrono::milliseconds timeout{60000};
    bool force_json = false;  // ask the server for a JSON-object response format
};

class ChatClient {
public:
    virtual ~ChatClient() = default;

    // Sends one user message, returns the assistant message content.
    // Safe for concurrent calls.
    virtual std::string complete(const std::string& prompt) = 0;
};

// POST {model, messages: [{role, content}], temperature, response_format?}
// -> choices[0].message.content. Bearer token from CHAT_API_KEY when set.
// Transient failures retry with exponential backoff, then ProviderError.
std::unique_ptr<ChatClient> make_chat_client(const ChatClientConfig& cfg);

}  // namespace spike
