#pragma once

// OpenAI-compatible chat-completions client over cpp-httplib.

#include "georep/detail/httplib.hpp"
#include <nlohmann/json.hpp>

#include <chrono>
#include <string>

#include "georep/transport.hpp"

namespace georep {

struct EndpointUrl {
    std::string scheme_host_port;  // e.g. "https://openrouter.ai"
    std::string path;              // e.g. "/api/v1/chat/completions"
};

// Accepts a base URL ("https://host/api/v1") or a full completions URL.
inline EndpointUrl split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    EndpointUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    constexpr std::string_view kSuffix = "/chat/completions";
    if (out.path.size() < kSuffix.size() || out.path.compare(out.path.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0)
        out.path += kSuffix;
    return out;
}

inline nlohmann::json chat_request_body(const ChatRequest& request) {
    return {{"model", request.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"top_p", request.top_p}};
}

class HttpTransport final : public Transport {
public:
    HttpTransport(const std::string& endpoint, std::string api_key, std::chrono::milliseconds timeout)
        : url_(split_endpoint(endpoint)), api_key_(std::move(api_key)), timeout_(timeout) {}

    bool requires_credentials() const override { return true; }

    ChatReply send(const ChatRequest& request) override {
        httplib::Client client(url_.scheme_host_port);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(url_.path, headers, chat_request_body(request).dump(), "application/json");
        if (!res) return {0, {}, "transport error: " + httplib::to_string(res.error())};
        ChatReply reply{res->status, {}, {}};
        if (res->status != 200) {
            reply.error = "HTTP " + std::to_string(res->status);
            return reply;
        }
        try {
            const auto body = nlohmann::json::parse(res->body);
            reply.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            reply.error = std::string("unexpected completion payload: ") + e.what();
        }
        return reply;
    }

private:
    EndpointUrl url_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

}  // namespace georep
