#pragma once

// Minimal chat-completion client: builds the JSON request, posts it through a
// transport, and pulls completion texts and fenced code blocks back out.

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rosevo {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct EndpointConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4-0314";
    std::string api_key;
    double temperature = 1.0;
    int max_attempts = 3;
    std::chrono::milliseconds backoff{500};
    std::chrono::seconds timeout{120};

    /// Environment variable consulted for the key when none is configured.
    static constexpr const char* kApiKeyEnv = "ROSEVO_API_KEY";

    /// Fills api_key from the environment if empty; returns whether a key is set.
    bool resolve_api_key();
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Posts a JSON body; returns nullopt on transport failure.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::optional<HttpResponse> post(const EndpointConfig& config, const std::string& body) = 0;
};

std::unique_ptr<ChatTransport> make_http_transport();

nlohmann::json build_chat_request(const EndpointConfig& config, const std::vector<ChatMessage>& messages,
                                  int completions);

/// Message contents of every choice in a chat-completion response body.
std::vector<std::string> completion_texts(const nlohmann::json& response);

/// Contents of every ``` fenced block (language tag dropped), in order.
std::vector<std::string> extract_code_blocks(std::string_view text);

class ChatClient {
public:
    ChatClient(EndpointConfig config, std::unique_ptr<ChatTransport> transport);

    /// Requests `completions` samples; retries transport failures and 5xx/429
    /// responses with exponential backoff. Throws TransportError when the
    /// attempts run out.
    std::vector<std::string> complete(const std::vector<ChatMessage>& messages, int completions);

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
    std::unique_ptr<ChatTransport> transport_;
};

} // namespace rosevo
