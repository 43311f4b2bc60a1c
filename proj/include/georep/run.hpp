#pragma once

// Run orchestration: one request (or two, for convert-then-solve) per
// problem/representation pair, checkpointed so an interrupted run resumes
// without re-querying completed entries.
//
// Run file: line-delimited JSON. The first line is the header
//   {"type":"header","run_id":...,"mode":...,"model":{...},"dataset":{...}}
// followed by one {"type":"entry", ...} per completed pair. While a run is in
// progress entries are appended in completion order; the finalized file is
// rewritten in dataset order, then representation order.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "georep/core.hpp"
#include "georep/dataset.hpp"
#include "georep/digest.hpp"
#include "georep/prompts.hpp"
#include "georep/response.hpp"
#include "georep/transport.hpp"

namespace georep {

enum class RunMode : std::uint8_t { Direct, ConvertThenSolve };

inline std::string_view to_string(RunMode m) { return m == RunMode::Direct ? "direct" : "cts"; }

inline std::optional<RunMode> run_mode_from_string(std::string_view s) {
    if (s == "direct") return RunMode::Direct;
    if (s == "cts") return RunMode::ConvertThenSolve;
    return std::nullopt;
}

struct Decoding {
    double temperature = 0.0;
    double top_p = 1.0;
    friend bool operator==(const Decoding&, const Decoding&) = default;
};

struct ModelSpec {
    std::string model_id;
    std::string endpoint;
    std::string api_key;  // never persisted
    Decoding decoding;
    int max_attempts = 3;
    std::chrono::milliseconds request_timeout{60000};
    std::chrono::milliseconds retry_backoff{1000};  // doubled per retry
};

// The persisted part of ModelSpec.
struct ModelSnapshot {
    std::string model_id;
    std::string endpoint;
    Decoding decoding;
    int max_attempts = 3;
    long long request_timeout_ms = 60000;
    friend bool operator==(const ModelSnapshot&, const ModelSnapshot&) = default;
};

inline ModelSnapshot snapshot(const ModelSpec& spec) {
    return {spec.model_id, spec.endpoint, spec.decoding, spec.max_attempts,
            static_cast<long long>(spec.request_timeout.count())};
}

struct RunEntry {
    std::string problem_id;
    Representation representation = Representation::Euclidean;
    std::string prompt_hash;  // SHA-256 of the final prompt sent
    ParsedResponse response;
    std::optional<std::string> conversion_text;
    std::optional<std::string> conversion_prompt_hash;
    int attempts = 0;
    int conversion_attempts = 0;
    std::string timestamp;
};

struct RunRecord {
    std::string run_id;
    ModelSnapshot model;
    RunMode mode = RunMode::Direct;
    std::string dataset_name;
    std::string dataset_checksum;
    std::vector<RunEntry> entries;

    const RunEntry* find(std::string_view problem_id, Representation r) const {
        for (const auto& e : entries)
            if (e.problem_id == problem_id && e.representation == r) return &e;
        return nullptr;
    }
};

// ─── Serialization ────────────────────────────────────────────────────────

inline nlohmann::json to_json(const ModelSnapshot& m) {
    return {{"model_id", m.model_id},
            {"endpoint", m.endpoint},
            {"temperature", m.decoding.temperature},
            {"top_p", m.decoding.top_p},
            {"max_attempts", m.max_attempts},
            {"request_timeout_ms", m.request_timeout_ms}};
}

inline ModelSnapshot model_snapshot_from_json(const nlohmann::json& j) {
    ModelSnapshot m;
    m.model_id = j.at("model_id").get<std::string>();
    m.endpoint = j.value("endpoint", std::string{});
    m.decoding.temperature = j.value("temperature", 0.0);
    m.decoding.top_p = j.value("top_p", 1.0);
    m.max_attempts = j.value("max_attempts", 3);
    m.request_timeout_ms = j.value("request_timeout_ms", 60000LL);
    return m;
}

inline nlohmann::json to_json(const ParsedResponse& r) {
    nlohmann::json j = {{"raw_text", r.raw_text}, {"status", to_string(r.status)}};
    if (r.valid()) {
        j["reasoning"] = r.reasoning;
        j["numeric_answer"] = r.numeric_answer;
    }
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline ParsedResponse parsed_response_from_json(const nlohmann::json& j) {
    ParsedResponse r;
    r.raw_text = j.at("raw_text").get<std::string>();
    const auto status = response_status_from_string(j.at("status").get<std::string>());
    if (!status) throw Error("unknown response status");
    r.status = *status;
    r.reasoning = j.value("reasoning", std::string{});
    r.numeric_answer = j.value("numeric_answer", std::string{});
    r.note = j.value("note", std::string{});
    return r;
}

inline nlohmann::json to_json(const RunEntry& e) {
    nlohmann::json j = {{"type", "entry"},
                        {"problem_id", e.problem_id},
                        {"representation", to_key(e.representation)},
                        {"prompt_hash", e.prompt_hash},
                        {"response", to_json(e.response)},
                        {"attempts", e.attempts},
                        {"timestamp", e.timestamp}};
    if (e.conversion_text) j["conversion_text"] = *e.conversion_text;
    if (e.conversion_prompt_hash) {
        j["conversion_prompt_hash"] = *e.conversion_prompt_hash;
        j["conversion_attempts"] = e.conversion_attempts;
    }
    return j;
}

inline RunEntry run_entry_from_json(const nlohmann::json& j) {
    RunEntry e;
    e.problem_id = j.at("problem_id").get<std::string>();
    const auto rep = representation_from_key(j.at("representation").get<std::string>());
    if (!rep) throw Error("unknown representation in run entry");
    e.representation = *rep;
    e.prompt_hash = j.at("prompt_hash").get<std::string>();
    e.response = parsed_response_from_json(j.at("response"));
    e.attempts = j.value("attempts", 0);
    e.timestamp = j.value("timestamp", std::string{});
    if (j.contains("conversion_text")) e.conversion_text = j.at("conversion_text").get<std::string>();
    if (j.contains("conversion_prompt_hash")) {
        e.conversion_prompt_hash = j.at("conversion_prompt_hash").get<std::string>();
        e.conversion_attempts = j.value("conversion_attempts", 0);
    }
    return e;
}

inline nlohmann::json header_json(const RunRecord& run) {
    return {{"type", "header"},
            {"run_id", run.run_id},
            {"mode", to_string(run.mode)},
            {"model", to_json(run.model)},
            {"dataset", {{"name", run.dataset_name}, {"checksum", run.dataset_checksum}}}};
}

inline std::string serialize_run(const RunRecord& run) {
    std::string out = header_json(run).dump() + "\n";
    for (const auto& e : run.entries) out += to_json(e).dump() + "\n";
    return out;
}

// Later lines for the same pair replace earlier ones.
inline RunRecord parse_run(const std::string& text) {
    RunRecord run;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    std::map<std::pair<std::string, Representation>, std::size_t> index;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                run.run_id = j.at("run_id").get<std::string>();
                const auto mode = run_mode_from_string(j.at("mode").get<std::string>());
                if (!mode) throw Error("unknown run mode");
                run.mode = *mode;
                run.model = model_snapshot_from_json(j.at("model"));
                run.dataset_name = j.at("dataset").value("name", std::string{});
                run.dataset_checksum = j.at("dataset").value("checksum", std::string{});
                have_header = true;
            } else if (type == "entry") {
                RunEntry e = run_entry_from_json(j);
                const auto key = std::make_pair(e.problem_id, e.representation);
                if (auto it = index.find(key); it != index.end()) {
                    run.entries[it->second] = std::move(e);
                } else {
                    index.emplace(key, run.entries.size());
                    run.entries.push_back(std::move(e));
                }
            } else {
                throw Error("unknown record type \"" + type + "\"");
            }
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(n, std::string("run file: ") + e.what());
        } catch (const SchemaError&) {
            throw;
        } catch (const Error& e) {
            throw SchemaError(n, std::string("run file: ") + e.what());
        }
    }
    if (!have_header) throw SchemaError(n, "run file has no header");
    return run;
}

inline RunRecord load_run(const std::filesystem::path& path) { return parse_run(read_file(path)); }

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IOError("cannot write " + tmp.string());
        out << bytes;
        if (!out) throw IOError("error writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// Dataset order, then representation order.
inline void sort_entries(RunRecord& run, const ProblemSet& ps) {
    auto rank = [&](const RunEntry& e) {
        const auto i = ps.index_of(e.problem_id);
        return std::make_pair(i ? *i : ps.size(), index_of(e.representation));
    };
    std::stable_sort(run.entries.begin(), run.entries.end(),
                     [&](const RunEntry& a, const RunEntry& b) { return rank(a) < rank(b); });
}

// ─── Orchestration ────────────────────────────────────────────────────────

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunOptions {
    std::string run_id;  // empty: derived from model, mode and dataset checksum
    std::size_t concurrency = 1;
    std::chrono::milliseconds min_request_interval{0};  // rate limit across workers
    std::optional<std::filesystem::path> checkpoint;
    bool resume = false;
    std::function<std::string()> clock = utc_timestamp;
};

inline std::string default_run_id(const ModelSpec& spec, RunMode mode, const ProblemSet& ps) {
    std::string model;
    for (char c : spec.model_id) model.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
    return model + "-" + std::string(to_string(mode)) + "-" + ps.manifest.checksum.substr(0, 8);
}

namespace detail {

// Serializes request start times so that starts are at least `interval` apart.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            const auto now = std::chrono::steady_clock::now();
            slot = std::max(now, next_);
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

private:
    std::chrono::milliseconds interval_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
};

struct Exchange {
    bool ok = false;
    std::string content;
    std::string error;
    int attempts = 0;
};

inline bool retryable(const ChatReply& r) { return r.http_status == 0 || r.http_status == 429 || r.http_status >= 500; }

inline Exchange exchange(Transport& transport, RateLimiter& limiter, const ModelSpec& spec, const std::string& prompt) {
    ChatRequest request{spec.model_id, prompt, spec.decoding.temperature, spec.decoding.top_p};
    Exchange out;
    const int max_attempts = std::max(1, spec.max_attempts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        limiter.acquire();
        const ChatReply reply = transport.send(request);
        out.attempts = attempt;
        if (reply.http_status == 200 && reply.error.empty()) {
            out.ok = true;
            out.content = reply.content;
            return out;
        }
        out.error = reply.error.empty() ? "HTTP " + std::to_string(reply.http_status) : reply.error;
        if (!retryable(reply) || attempt == max_attempts) break;
        if (spec.retry_backoff.count() > 0) std::this_thread::sleep_for(spec.retry_backoff * (1 << (attempt - 1)));
    }
    out.error = "request failed after " + std::to_string(out.attempts) + " attempt(s): " + out.error;
    return out;
}

inline ParsedResponse transport_failure(const std::string& note) {
    ParsedResponse r;
    r.status = ResponseStatus::MalformedJSON;
    r.note = note;
    return r;
}

inline RunEntry execute(Transport& transport, RateLimiter& limiter, const ModelSpec& spec, RunMode mode,
                        const Problem& p, Representation r) {
    RunEntry entry;
    entry.problem_id = p.id;
    entry.representation = r;
    std::string solve_prompt;
    if (mode == RunMode::ConvertThenSolve) {
        const std::string conversion_prompt = build_conversion_prompt(p, r);
        entry.conversion_prompt_hash = sha256_hex(conversion_prompt);
        entry.prompt_hash = *entry.conversion_prompt_hash;
        const Exchange stage1 = exchange(transport, limiter, spec, conversion_prompt);
        entry.conversion_attempts = stage1.attempts;
        if (!stage1.ok) {
            entry.response = transport_failure("conversion stage: " + stage1.error);
            return entry;
        }
        const ConversionResponse converted = extract_conversion(stage1.content);
        if (converted.status != ResponseStatus::Valid) {
            entry.response.raw_text = stage1.content;
            entry.response.status = converted.status;
            entry.response.note = "conversion stage output rejected; solve stage not sent";
            return entry;
        }
        entry.conversion_text = converted.euclidean_problem;
        solve_prompt = build_solve_prompt(converted.euclidean_problem);
    } else {
        solve_prompt = build_prompt(p, r);
    }
    entry.prompt_hash = sha256_hex(solve_prompt);
    const Exchange stage2 = exchange(transport, limiter, spec, solve_prompt);
    entry.attempts = stage2.attempts;
    entry.response = stage2.ok ? extract_answer(stage2.content) : transport_failure(stage2.error);
    return entry;
}

}  // namespace detail

/// Runs every admitted (problem, representation) pair through `transport`.
/// Transport failures are recorded per entry; TransportAborted stops the run
/// and propagates after completed entries are checkpointed.
inline RunRecord run_model(const ModelSpec& spec, const ProblemSet& ps, RunMode mode, Transport& transport,
                           const RunOptions& options = {}) {
    if (transport.requires_credentials() && spec.api_key.empty())
        throw ConfigError("no API key configured (set GEOREP_API_KEY)");
    if (spec.model_id.empty()) throw ConfigError("model id is required");

    RunRecord run;
    run.run_id = options.run_id.empty() ? default_run_id(spec, mode, ps) : options.run_id;
    run.model = snapshot(spec);
    run.mode = mode;
    run.dataset_name = ps.manifest.name;
    run.dataset_checksum = ps.manifest.checksum;

    std::map<std::pair<std::string, Representation>, RunEntry> done;
    if (options.resume && options.checkpoint && std::filesystem::exists(*options.checkpoint)) {
        RunRecord previous = load_run(*options.checkpoint);
        if (previous.run_id != run.run_id || previous.mode != mode || !(previous.model == run.model) ||
            previous.dataset_checksum != run.dataset_checksum) {
            throw ConfigError("checkpoint " + options.checkpoint->string() + " belongs to a different run");
        }
        for (auto& e : previous.entries) {
            auto key = std::make_pair(e.problem_id, e.representation);
            done.emplace(std::move(key), std::move(e));
        }
    }

    std::ofstream checkpoint;
    if (options.checkpoint) {
        // Rewrite header plus resumed entries, then append as work completes.
        RunRecord seed = run;
        for (const auto& [key, e] : done) seed.entries.push_back(e);
        write_file_atomic(*options.checkpoint, serialize_run(seed));
        checkpoint.open(*options.checkpoint, std::ios::binary | std::ios::app);
        if (!checkpoint) throw IOError("cannot append to " + options.checkpoint->string());
    }

    struct Job {
        const Problem* problem;
        Representation rep;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps.admitted(i)) continue;
        for (Representation r : kRepresentations)
            if (!done.count({ps.problems[i].id, r})) jobs.push_back({&ps.problems[i], r});
    }

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    detail::RateLimiter limiter(options.min_request_interval);

    auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                RunEntry entry = detail::execute(transport, limiter, spec, mode, *jobs[i].problem, jobs[i].rep);
                entry.timestamp = options.clock ? options.clock() : std::string{};
                std::lock_guard lock(mutex);
                if (checkpoint.is_open()) {
                    checkpoint << to_json(entry).dump() << '\n';
                    checkpoint.flush();
                }
                auto key = std::make_pair(entry.problem_id, entry.representation);
                done.insert_or_assign(std::move(key), std::move(entry));
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                stop.store(true);
                return;
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(1, jobs.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    if (checkpoint.is_open()) checkpoint.close();
    if (failure) std::rethrow_exception(failure);

    for (auto& [key, e] : done) run.entries.push_back(std::move(e));
    sort_entries(run, ps);
    if (options.checkpoint) write_file_atomic(*options.checkpoint, serialize_run(run));
    return run;
}

}  // namespace georep
