#pragma once

// Chat transports. The run orchestrator only sees this interface, so a
// recorded transcript and a live endpoint are interchangeable.

#include <nlohmann/json.hpp>

#include <atomic>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "georep/core.hpp"
#include "georep/dataset.hpp"
#include "georep/digest.hpp"

namespace georep {

struct ChatRequest {
    std::string model;
    std::string prompt;  // single user message
    double temperature = 0.0;
    double top_p = 1.0;
};

struct ChatReply {
    int http_status = 0;  // 0 when no HTTP exchange happened
    std::string content;  // assistant message text when http_status == 200
    std::string error;
};

// Thrown by a transport when the whole run must stop (process interruption).
// Entries completed before the throw stay in the checkpoint.
class TransportAborted : public Error {
public:
    using Error::Error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatReply send(const ChatRequest& request) = 0;
    virtual bool requires_credentials() const { return false; }
};

// ─── Replay stub ──────────────────────────────────────────────────────────
//
// Transcript file: one JSON object per line.
//   {"prompt_sha256": "<hex>", "content": "..."}              single 200 reply
//   {"contains": "substring", "responses": [{"status": 429},
//                                           {"status": 200, "content": "..."}]}
// A request takes the next unused response of the first rule that matches
// it. Requests matching no rule get a 404 reply.

class ReplayTransport final : public Transport {
public:
    struct Response {
        int status = 200;
        std::string content;
    };
    struct Rule {
        std::optional<std::string> prompt_sha256;
        std::optional<std::string> contains;
        std::deque<Response> responses;
    };
    struct Call {
        std::string prompt_sha256;
        int status = 0;
    };

    ReplayTransport() = default;
    explicit ReplayTransport(std::vector<Rule> rules) : rules_(std::move(rules)) {}
    ReplayTransport(ReplayTransport&& other) noexcept
        : rules_(std::move(other.rules_)), calls_(std::move(other.calls_)), abort_after_(other.abort_after_) {}

    static ReplayTransport from_transcript(const std::string& text) {
        std::vector<Rule> rules;
        std::istringstream in(text);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError(n, std::string("transcript: ") + e.what());
            }
            Rule rule;
            if (j.contains("prompt_sha256")) rule.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
            if (j.contains("contains")) rule.contains = j.at("contains").get<std::string>();
            if (j.contains("responses")) {
                for (const auto& r : j.at("responses"))
                    rule.responses.push_back({r.value("status", 200), r.value("content", std::string{})});
            } else if (j.contains("content")) {
                rule.responses.push_back({j.value("status", 200), j.at("content").get<std::string>()});
            } else {
                throw SchemaError(n, "transcript rule needs \"content\" or \"responses\"");
            }
            rules.push_back(std::move(rule));
        }
        return ReplayTransport(std::move(rules));
    }

    static ReplayTransport from_file(const std::filesystem::path& path) { return from_transcript(read_file(path)); }

    void add(Rule rule) {
        std::lock_guard lock(mutex_);
        rules_.push_back(std::move(rule));
    }

    // Simulates an interrupted process: the call after `n` successful sends
    // throws TransportAborted.
    void abort_after(std::size_t n) { abort_after_ = n; }

    ChatReply send(const ChatRequest& request) override {
        std::lock_guard lock(mutex_);
        if (abort_after_ && calls_.size() >= *abort_after_) throw TransportAborted("replay transport interrupted");
        const std::string hash = sha256_hex(request.prompt);
        for (auto& rule : rules_) {
            if (rule.responses.empty()) continue;
            if (rule.prompt_sha256 && *rule.prompt_sha256 != hash) continue;
            if (rule.contains && request.prompt.find(*rule.contains) == std::string::npos) continue;
            Response r = std::move(rule.responses.front());
            rule.responses.pop_front();
            calls_.push_back({hash, r.status});
            ChatReply reply{r.status, {}, {}};
            if (r.status == 200) {
                reply.content = std::move(r.content);
            } else {
                reply.error = "HTTP " + std::to_string(r.status);
            }
            return reply;
        }
        calls_.push_back({hash, 404});
        return {404, {}, "no transcript entry for prompt " + hash};
    }

    std::vector<Call> calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<Rule> rules_;
    std::vector<Call> calls_;
    std::optional<std::size_t> abort_after_;
};

}  // namespace georep
