#pragma once

// Local HTTP service for the adjudication loop.
//
//   GET  /api/queue?page=1&page_size=50&reason=<r>&representation=<rep>
//        -> {"items": [QueueItem...], "total": n, "page": p, "page_size": s}
//   POST /api/verdict {"problem_id", "representation", "verdict", "annotator", "note"}
//        -> 201 {"record": AdjudicationRecord, "remaining": n}
//           400 malformed body, 404 unknown entry, 409 item not pending
//   GET  /api/summary -> {"run_id", "n", "pending", "unscored", "metrics": {...}}
//   GET  /api/health  -> {"status": "ok"}

#include "georep/detail/httplib.hpp"
#include <nlohmann/json.hpp>

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "georep/dataset.hpp"
#include "georep/metrics.hpp"
#include "georep/report.hpp"
#include "georep/run.hpp"
#include "georep/scoring.hpp"

namespace georep {

class AdjudicationService {
public:
    AdjudicationService(RunRecord run, ProblemSet problems, AdjudicationStore& store)
        : run_(std::move(run)), problems_(std::move(problems)), store_(store) {
        routes();
    }

    ~AdjudicationService() { stop(); }
    AdjudicationService(const AdjudicationService&) = delete;
    AdjudicationService& operator=(const AdjudicationService&) = delete;

    // Serves a directory (the browser UI build) at "/".
    void mount_static(const std::filesystem::path& dir) { server_.set_mount_point("/", dir.string()); }

    /// Binds and serves on a background thread. Port 0 picks a free port;
    /// the bound port is returned.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0) throw IOError("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Blocking variant for the CLI.
    void serve(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw IOError("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }

private:
    static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, const std::string& message) {
        send_json(res, status, {{"error", message}});
    }

    static std::size_t positive_param(const httplib::Request& req, const char* key, std::size_t fallback) {
        if (!req.has_param(key)) return fallback;
        const std::string v = req.get_param_value(key);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(key);
        std::size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size() || n == 0) throw std::invalid_argument(key);
        return static_cast<std::size_t>(n);
    }

    void routes() {
        server_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server_.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t page = 1, page_size = 50;
            try {
                page = positive_param(req, "page", 1);
                page_size = std::min<std::size_t>(positive_param(req, "page_size", 50), 1000);
            } catch (const std::exception&) {
                return send_error(res, 400, "page and page_size must be positive integers");
            }
            std::optional<canon::TriageReason> reason;
            std::optional<Representation> rep;
            if (req.has_param("reason")) {
                reason = canon::triage_reason_from_string(req.get_param_value("reason"));
                if (!reason) return send_error(res, 400, "unknown reason filter");
            }
            if (req.has_param("representation")) {
                rep = representation_from_key(req.get_param_value("representation"));
                if (!rep) return send_error(res, 400, "unknown representation filter");
            }
            std::vector<QueueItem> items;
            {
                std::lock_guard lock(mutex_);
                for (auto& q : adjudication_queue(run_, problems_, store_)) {
                    if (reason && q.reason != *reason) continue;
                    if (rep && q.representation != *rep) continue;
                    items.push_back(std::move(q));
                }
            }
            nlohmann::json page_items = nlohmann::json::array();
            const std::size_t begin = (page - 1) * page_size;
            for (std::size_t i = begin; i < items.size() && i < begin + page_size; ++i) page_items.push_back(to_json(items[i]));
            send_json(res, 200, {{"items", page_items}, {"total", items.size()}, {"page", page}, {"page_size", page_size}});
        });

        server_.Post("/api/verdict", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return send_error(res, 400, "body is not JSON");
            }
            if (!body.is_object() || !body.contains("problem_id") || !body["problem_id"].is_string() ||
                !body.contains("representation") || !body["representation"].is_string() || !body.contains("verdict") ||
                !body["verdict"].is_string())
                return send_error(res, 400, "problem_id, representation and verdict are required strings");
            AdjudicationRecord record;
            record.run_id = run_.run_id;
            record.problem_id = body["problem_id"].get<std::string>();
            const auto rep = representation_from_key(body["representation"].get<std::string>());
            const auto verdict = verdict_from_string(body["verdict"].get<std::string>());
            if (!rep) return send_error(res, 400, "unknown representation");
            if (!verdict) return send_error(res, 400, "verdict must be Equivalent or NotEquivalent");
            record.representation = *rep;
            record.verdict = *verdict;
            if (body.contains("annotator") && body["annotator"].is_string()) record.annotator = body["annotator"];
            if (body.contains("note") && body["note"].is_string()) record.note = body["note"];

            std::lock_guard lock(mutex_);
            const RunEntry* entry = run_.find(record.problem_id, record.representation);
            const Problem* problem = problems_.find(record.problem_id);
            if (!entry || !problem) return send_error(res, 404, "no run entry for that problem and representation");
            const CellScore cell = score_cell(run_, *problem, entry, store_);
            if (!cell.pending) return send_error(res, 409, "item is not pending; refresh the queue");
            try {
                apply_adjudication(record, run_, problems_, store_);
            } catch (const UnknownEntry& e) {
                return send_error(res, 404, e.what());
            } catch (const IOError& e) {
                return send_error(res, 500, e.what());
            }
            const auto stored = store_.latest(run_.run_id, record.problem_id, record.representation);
            send_json(res, 201,
                      {{"record", to_json(*stored)}, {"remaining", adjudication_queue(run_, problems_, store_).size()}});
        });

        server_.Get("/api/summary", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            const CorrectnessMatrix m = score_run(run_, problems_, store_);
            nlohmann::json out = {{"run_id", run_.run_id},
                                  {"model", run_.model.model_id},
                                  {"mode", to_string(run_.mode)},
                                  {"dataset_checksum", run_.dataset_checksum},
                                  {"n", m.size()},
                                  {"pending", m.pending_count()},
                                  {"unscored", m.unscored_ids.size()},
                                  {"adjudications", store_.size()}};
            out["metrics"] = m.empty() ? nlohmann::json(nullptr) : detail::metrics_json(compute_metrics(m));
            send_json(res, 200, out);
        });
    }

    RunRecord run_;
    ProblemSet problems_;
    AdjudicationStore& store_;
    std::mutex mutex_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace georep
