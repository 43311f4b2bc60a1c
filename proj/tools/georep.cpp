// georep command-line tool.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "georep/adjudication_service.hpp"
#include "georep/dataset.hpp"
#include "georep/http_transport.hpp"
#include "georep/matrix.hpp"
#include "georep/metrics.hpp"
#include "georep/report.hpp"
#include "georep/run.hpp"
#include "georep/scoring.hpp"
#include "georep/stats.hpp"
#include "georep/transport.hpp"

namespace fs = std::filesystem;
using namespace georep;

namespace {

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    write_file_atomic(out, text);
}

ProblemSet dataset_arg(const std::string& path, bool permissive = false) {
    return load_dataset(path, LoadOptions{permissive});
}

CorrectnessMatrix load_matrix(const std::string& path) {
    try {
        return matrix_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(0, path + ": " + e.what());
    }
}

struct Config {
    std::string model;
    std::string endpoint;
    std::size_t concurrency = 1;
    int max_attempts = 3;
    long long request_timeout_ms = 60000;
    long long min_request_interval_ms = 0;
};

Config load_config(const std::string& path) {
    Config c;
    if (path.empty()) return c;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
        c.model = j.value("model", c.model);
        c.endpoint = j.value("endpoint", c.endpoint);
        c.concurrency = j.value("concurrency", c.concurrency);
        c.max_attempts = j.value("max_attempts", c.max_attempts);
        c.request_timeout_ms = j.value("request_timeout_ms", c.request_timeout_ms);
        c.min_request_interval_ms = j.value("min_request_interval_ms", c.min_request_interval_ms);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (j.contains("api_key")) throw ConfigError(path + ": api_key is read from GEOREP_API_KEY, not the config file");
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Representation-invariance evaluation for geometry question answering"};
    app.require_subcommand(1);
    std::string out;

    // ─── validate ───
    auto* validate = app.add_subcommand("validate", "Check a problem file and print its manifest");
    std::string v_dataset;
    validate->add_option("dataset", v_dataset, "Problem file (JSONL)")->required();
    validate->add_option("--out", out, "Output path (default stdout)");

    // ─── run ───
    auto* run = app.add_subcommand("run", "Query a model on every problem variant");
    std::string r_dataset, r_config, r_model, r_endpoint, r_mode = "direct", r_resume, r_transcript, r_run_id;
    std::size_t r_concurrency = 0;
    run->add_option("--dataset", r_dataset, "Problem file (JSONL)")->required();
    run->add_option("--config", r_config, "JSON file with model/endpoint defaults");
    run->add_option("--model", r_model, "Model id");
    run->add_option("--endpoint", r_endpoint, "OpenAI-compatible base URL");
    run->add_option("--mode", r_mode, "direct or cts")->check(CLI::IsMember({"direct", "cts"}));
    run->add_option("--concurrency", r_concurrency, "Concurrent requests");
    run->add_option("--run-id", r_run_id, "Run id (default derived from model, mode and dataset)");
    run->add_option("--resume", r_resume, "Resume the run with this id from its checkpoint");
    run->add_option("--transcript", r_transcript, "Replay canned responses instead of calling the endpoint");
    run->add_option("--out", out, "Run file (default <run_id>.jsonl)");

    // ─── score ───
    auto* score = app.add_subcommand("score", "Score a run into a correctness matrix");
    std::string s_dataset, s_run, s_adj;
    score->add_option("--dataset", s_dataset, "Problem file")->required();
    score->add_option("--run", s_run, "Run file")->required();
    score->add_option("--adjudications", s_adj, "Adjudication log (JSONL)");
    score->add_option("--out", out, "Output path (default stdout)");

    // ─── adjudicate ───
    auto* adjudicate = app.add_subcommand("adjudicate", "Inspect, serve, import or export adjudications");
    std::string a_dataset, a_run, a_adj, a_export, a_import, a_host = "127.0.0.1", a_static;
    bool a_serve = false;
    int a_port = 8080;
    adjudicate->add_option("--dataset", a_dataset, "Problem file")->required();
    adjudicate->add_option("--run", a_run, "Run file")->required();
    adjudicate->add_option("--adjudications", a_adj, "Adjudication log (JSONL)")->required();
    adjudicate->add_flag("--serve", a_serve, "Serve the adjudication HTTP API");
    adjudicate->add_option("--host", a_host, "Bind address");
    adjudicate->add_option("--port", a_port, "Port");
    adjudicate->add_option("--static", a_static, "Directory served at / (adjudication UI build)");
    adjudicate->add_option("--export", a_export, "Write the full verdict history to this path");
    adjudicate->add_option("--import", a_import, "Append verdicts from this JSONL file");
    adjudicate->add_option("--out", out, "Queue output path (default stdout)");

    // ─── metrics ───
    auto* metrics = app.add_subcommand("metrics", "Compute invariance metrics from a matrix");
    std::string m_matrix;
    metrics->add_option("matrix", m_matrix, "Matrix JSON from `georep score`")->required();
    metrics->add_option("--out", out, "Output path (default stdout)");

    // ─── stats ───
    auto* stat = app.add_subcommand("stats", "McNemar tests, bootstrap intervals, surface-feature regression");
    std::string st_matrix, st_dataset, st_method = "chi2";
    StatsOptions st_opts;
    stat->add_option("matrix", st_matrix, "Matrix JSON")->required();
    stat->add_option("--dataset", st_dataset, "Problem file; enables the regression");
    stat->add_option("--replicates", st_opts.replicates, "Bootstrap replicates");
    stat->add_option("--seed", st_opts.seed, "Bootstrap seed");
    stat->add_option("--threads", st_opts.threads, "Bootstrap worker threads");
    stat->add_option("--method", st_method, "chi2 (continuity corrected) or exact")->check(CLI::IsMember({"chi2", "exact"}));
    stat->add_option("--out", out, "Output path (default stdout)");

    // ─── report ───
    auto* report = app.add_subcommand("report", "Render tables for one or more matrices");
    std::vector<std::string> rp_matrices, rp_labels;
    std::string rp_format = "text", rp_dataset;
    bool rp_stats = false;
    StatsOptions rp_opts;
    report->add_option("matrices", rp_matrices, "Matrix JSON files")->required();
    report->add_option("--label", rp_labels, "Row label per matrix (default run id)");
    report->add_option("--format", rp_format, "json, csv or text");
    report->add_flag("--stats", rp_stats, "Include McNemar and bootstrap tables");
    report->add_option("--dataset", rp_dataset, "Problem file; adds the regression table (implies --stats)");
    report->add_option("--replicates", rp_opts.replicates, "Bootstrap replicates");
    report->add_option("--seed", rp_opts.seed, "Bootstrap seed");
    report->add_option("--out", out, "Output path (default stdout)");

    // ─── compare ───
    auto* compare = app.add_subcommand("compare", "Compare two runs (e.g. direct vs convert-then-solve)");
    std::string c_base, c_treat, c_format = "text";
    compare->add_option("baseline", c_base, "Baseline matrix JSON")->required();
    compare->add_option("treatment", c_treat, "Treatment matrix JSON")->required();
    compare->add_option("--format", c_format, "json, csv or text");
    compare->add_option("--out", out, "Output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            const ProblemSet ps = dataset_arg(v_dataset, true);
            nlohmann::json problems = nlohmann::json::array();
            bool ok = true;
            for (const auto& rep : ps.reports) {
                nlohmann::json v = nlohmann::json::array();
                for (const auto& violation : rep.violations)
                    v.push_back({{"kind", to_string(violation.kind)}, {"detail", violation.detail}});
                if (!rep.ok()) {
                    ok = false;
                    problems.push_back({{"problem_id", rep.problem_id}, {"violations", v}});
                }
            }
            const nlohmann::json doc = {{"name", ps.manifest.name},
                                        {"version", ps.manifest.version},
                                        {"checksum", ps.manifest.checksum},
                                        {"problems", ps.size()},
                                        {"invalid", problems}};
            emit(doc.dump(2) + "\n", out);
            return ok ? 0 : 1;
        }

        if (*run) {
            const Config cfg = load_config(r_config);
            ModelSpec spec;
            spec.model_id = r_model.empty() ? cfg.model : r_model;
            spec.endpoint = r_endpoint.empty() ? cfg.endpoint : r_endpoint;
            spec.max_attempts = cfg.max_attempts;
            spec.request_timeout = std::chrono::milliseconds(cfg.request_timeout_ms);
            if (const char* key = std::getenv("GEOREP_API_KEY")) spec.api_key = key;
            const ProblemSet ps = dataset_arg(r_dataset);
            const RunMode mode = *run_mode_from_string(r_mode);

            std::unique_ptr<Transport> transport;
            if (!r_transcript.empty()) {
                transport = std::make_unique<ReplayTransport>(ReplayTransport::from_file(r_transcript));
                spec.retry_backoff = std::chrono::milliseconds(0);
            } else {
                if (spec.endpoint.empty()) throw ConfigError("--endpoint (or config \"endpoint\") is required");
                transport = std::make_unique<HttpTransport>(spec.endpoint, spec.api_key, spec.request_timeout);
            }

            RunOptions options;
            options.concurrency = r_concurrency ? r_concurrency : cfg.concurrency;
            options.min_request_interval = std::chrono::milliseconds(cfg.min_request_interval_ms);
            options.run_id = !r_resume.empty() ? r_resume : r_run_id;
            if (options.run_id.empty()) options.run_id = default_run_id(spec, mode, ps);
            options.checkpoint = out.empty() ? fs::path(options.run_id + ".jsonl") : fs::path(out);
            options.resume = !r_resume.empty();
            if (options.resume && !fs::exists(*options.checkpoint))
                throw ConfigError("no checkpoint at " + options.checkpoint->string() + " to resume");
            const RunRecord record = run_model(spec, ps, mode, *transport, options);
            std::cerr << "run " << record.run_id << ": " << record.entries.size() << " entries -> "
                      << options.checkpoint->string() << '\n';
            return 0;
        }

        if (*score) {
            const ProblemSet ps = dataset_arg(s_dataset);
            const RunRecord record = load_run(s_run);
            if (record.dataset_checksum != ps.manifest.checksum)
                throw DatasetMismatch("run was produced against a different dataset (checksum mismatch)");
            const AdjudicationStore store = s_adj.empty() ? AdjudicationStore{} : AdjudicationStore{fs::path(s_adj)};
            emit(to_json(score_run(record, ps, store)).dump(2) + "\n", out);
            return 0;
        }

        if (*adjudicate) {
            const ProblemSet ps = dataset_arg(a_dataset, true);
            const RunRecord record = load_run(a_run);
            AdjudicationStore store{fs::path(a_adj)};
            if (!a_import.empty()) {
                std::size_t n = 0;
                for (const auto& r : AdjudicationStore::parse_records(read_file(a_import))) {
                    apply_adjudication(r, record, ps, store);
                    ++n;
                }
                std::cerr << "imported " << n << " verdict(s)\n";
            }
            if (!a_export.empty()) write_file_atomic(a_export, store.serialize());
            if (a_serve) {
                AdjudicationService service(record, ps, store);
                if (!a_static.empty()) service.mount_static(a_static);
                std::cerr << "serving adjudication API on http://" << a_host << ":" << a_port << "\n";
                service.serve(a_host, a_port);
                return 0;
            }
            if (a_import.empty() && a_export.empty()) {
                nlohmann::json items = nlohmann::json::array();
                for (const auto& q : adjudication_queue(record, ps, store)) items.push_back(to_json(q));
                emit(items.dump(2) + "\n", out);
            }
            return 0;
        }

        if (*metrics) {
            const CorrectnessMatrix m = load_matrix(m_matrix);
            emit(detail::metrics_json(compute_metrics(m)).dump(2) + "\n", out);
            return 0;
        }

        if (*stat) {
            const CorrectnessMatrix m = load_matrix(st_matrix);
            st_opts.method = st_method == "exact" ? stats::McNemarMethod::ExactBinomial : stats::McNemarMethod::ChiSquaredCC;
            std::vector<stats::RegressionRow> rows;
            if (!st_dataset.empty()) rows = regression_rows(m, dataset_arg(st_dataset, true));
            const StatsSummary s = compute_stats(m, st_opts, st_dataset.empty() ? nullptr : &rows);
            emit(detail::stats_json(s).dump(2) + "\n", out);
            return 0;
        }

        if (*report) {
            const ReportFormat format = report_format_from_string(rp_format);
            std::vector<ReportInput> inputs;
            for (std::size_t i = 0; i < rp_matrices.size(); ++i) {
                const CorrectnessMatrix m = load_matrix(rp_matrices[i]);
                ReportInput in;
                in.label = i < rp_labels.size() ? rp_labels[i] : m.run_id;
                in.run_id = m.run_id;
                in.dataset_checksum = m.dataset_checksum;
                in.metrics = compute_metrics(m);
                if (rp_stats || !rp_dataset.empty()) {
                    std::vector<stats::RegressionRow> rows;
                    if (!rp_dataset.empty()) rows = regression_rows(m, dataset_arg(rp_dataset, true));
                    in.stats = compute_stats(m, rp_opts, rp_dataset.empty() ? nullptr : &rows);
                }
                inputs.push_back(std::move(in));
            }
            emit(emit_report(inputs, format), out);
            return 0;
        }

        if (*compare) {
            const ReportFormat format = report_format_from_string(c_format);
            emit(emit_comparison(compare_runs(load_matrix(c_base), load_matrix(c_treat)), format), out);
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "georep: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "georep: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "georep: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
