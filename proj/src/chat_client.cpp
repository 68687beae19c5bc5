#include "rosevo/chat_client.hpp"

#include <cstdlib>
#include <thread>

#ifdef ROSEVO_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "rosevo/error.hpp"

namespace rosevo {

using nlohmann::json;

bool EndpointConfig::resolve_api_key() {
    if (api_key.empty()) {
        if (const char* env = std::getenv(kApiKeyEnv); env && *env) api_key = env;
    }
    return !api_key.empty();
}

namespace {

class HttpTransport final : public ChatTransport {
public:
    std::optional<HttpResponse> post(const EndpointConfig& config, const std::string& body) override {
        httplib::Client client(config.base_url);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(config.timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + config.api_key}};
        auto res = client.Post(config.path, headers, body, "application/json");
        if (!res) return std::nullopt;
        return HttpResponse{res->status, res->body};
    }
};

} // namespace

std::unique_ptr<ChatTransport> make_http_transport() { return std::make_unique<HttpTransport>(); }

json build_chat_request(const EndpointConfig& config, const std::vector<ChatMessage>& messages, int completions) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", config.model}, {"messages", msgs}, {"temperature", config.temperature}, {"n", completions}};
}

std::vector<std::string> completion_texts(const json& response) {
    std::vector<std::string> out;
    if (!response.contains("choices") || !response.at("choices").is_array()) return out;
    for (const auto& choice : response.at("choices")) {
        if (!choice.contains("message")) continue;
        const auto& msg = choice.at("message");
        if (msg.contains("content") && msg.at("content").is_string()) out.push_back(msg.at("content").get<std::string>());
    }
    return out;
}

std::vector<std::string> extract_code_blocks(std::string_view text) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        auto body_start = text.find('\n', open);
        if (body_start == std::string_view::npos) break;
        auto close = text.find("```", body_start + 1);
        if (close == std::string_view::npos) break;
        auto body = text.substr(body_start + 1, close - body_start - 1);
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
        blocks.emplace_back(body);
        pos = close + 3;
    }
    return blocks;
}

ChatClient::ChatClient(EndpointConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::vector<std::string> ChatClient::complete(const std::vector<ChatMessage>& messages, int completions) {
    const std::string body = build_chat_request(config_, messages, completions).dump();
    std::string last_problem = "no attempt made";
    auto delay = config_.backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        auto res = transport_->post(config_, body);
        if (res && res->status == 200) {
            try {
                return completion_texts(json::parse(res->body));
            } catch (const json::parse_error& e) {
                throw TransportError(std::string("malformed completion response: ") + e.what());
            }
        }
        if (res && res->status != 429 && res->status < 500)
            throw TransportError("endpoint rejected the request with status " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
        last_problem = res ? "status " + std::to_string(res->status) : "transport failure";
        if (attempt < config_.max_attempts && delay.count() > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    throw TransportError("chat endpoint unavailable after " + std::to_string(config_.max_attempts) +
                         " attempts (" + last_problem + ")");
}

} // namespace rosevo
