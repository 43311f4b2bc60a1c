// Acceptance runner: one PASS/FAIL line per primary criterion, with the
// measured runtime against its limit. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <cstring>
#include <string>
#include <vector>

#include "georep/canon.hpp"
#include "georep/metrics.hpp"
#include "georep/report.hpp"
#include "georep/run.hpp"
#include "georep/scoring.hpp"
#include "georep/stats.hpp"
#include "georep/transport.hpp"
#include "support/expr_gen.hpp"
#include "support/oracles.hpp"
#include "support/paper_tables.hpp"
#include "support/stat_oracles.hpp"

using namespace georep;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = GEOREP_FIXTURES;

struct Findings {
    std::vector<std::string> failures;
    std::vector<std::string> notes;
    std::string summary;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol + 1e-9; }

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

CorrectnessMatrix paper_matrix(const testdata::ModelRow& row) {
    FlipCounts c;
    c.counts = row.flips;
    CorrectnessMatrix m = matrix_from_counts(c);
    m.run_id = std::string(row.name);
    return m;
}

// ─── Criteria ─────────────────────────────────────────────────────────────

Findings table3() {
    Findings f;
    int cells = 0;
    for (const auto& row : testdata::kModels) {
        const MetricsReport r = compute_metrics(paper_matrix(row));
        const std::string name(row.name);
        const std::pair<const char*, std::pair<double, double>> cols[] = {
            {"Coord", {r.accuracy[1].value(), row.coord}},
            {"Euclid", {r.accuracy[0].value(), row.euclid}},
            {"Vector", {r.accuracy[2].value(), row.vector}},
            {"AccGap", {r.accuracy_gap.value(), row.gap}},
        };
        for (const auto& [col, v] : cols) {
            ++cells;
            f.expect(near(v.first, v.second, 0.01),
                     name + " " + col + ": recomputed " + num(v.first) + " vs printed " + num(v.second, 2));
        }
        ++cells;
        f.expect(near(r.invariance3.value(), row.inv3, 0.001),
                 name + " Inv@3: recomputed " + num(r.invariance3.value()) + " vs printed " + num(row.inv3, 3));

        ReportInput in;
        in.label = name;
        in.metrics = r;
        in.reference = {{"Coord", row.coord}, {"Euclid", row.euclid}, {"Vector", row.vector}, {"Inv@3", row.inv3}};
        for (auto& note : detail::footnotes(in)) f.notes.push_back(std::move(note));
    }
    bool flagged = false;
    for (const auto& n : f.notes) flagged = flagged || n.starts_with("Claude-Haiku-4.5 Coord:");
    f.expect(flagged, "Claude-Haiku-4.5 Coord deviation not flagged");
    f.summary = std::to_string(testdata::kModels.size()) + " models, " + std::to_string(cells) + " cells";
    return f;
}

Findings table6() {
    Findings f;
    int cells = 0;
    for (const auto& row : testdata::kModels) {
        const MetricsReport r = compute_metrics(paper_matrix(row));
        const std::string name(row.name);
        const std::pair<const char*, std::pair<long long, long long>> counts[] = {
            {"Fail-E", {r.fail_only.euclidean, row.fail_e}},
            {"Fail-C", {r.fail_only.coordinate, row.fail_c}},
            {"Fail-V", {r.fail_only.vector, row.fail_v}},
        };
        for (const auto& [col, v] : counts) {
            ++cells;
            f.expect(v.first == v.second, name + " " + col + ": " + std::to_string(v.first) + " vs " + std::to_string(v.second));
        }
        const std::pair<const char*, std::pair<Rate, double>> rates[] = {
            {"EC|V", {r.transfer.ec_given_v, row.ec_given_v}}, {"CV|E", {r.transfer.cv_given_e, row.cv_given_e}},
            {"EV|C", {r.transfer.ev_given_c, row.ev_given_c}}, {"EC-Co", {r.coherence.ec, row.ec_co}},
            {"CV-Co", {r.coherence.cv, row.cv_co}},
        };
        for (const auto& [col, v] : rates) {
            ++cells;
            f.expect(v.first.defined() && near(v.first.value(), v.second, 0.005),
                     name + " " + col + ": recomputed " + num(v.first.value()) + " vs printed " + num(v.second, 2));
        }
    }
    const auto claude = compute_metrics(paper_matrix(testdata::kModels[0]));
    const auto oss = compute_metrics(paper_matrix(testdata::kModels[9]));
    f.expect(num(claude.transfer.ec_given_v.value(), 2) == "0.13", "anchor Claude EC|V");
    f.expect(num(oss.transfer.ec_given_v.value(), 2) == "0.23", "anchor GPT-OSS EC|V");
    f.expect(num(claude.coherence.ec.value(), 2) == "0.82", "anchor Claude EC-Co");
    f.expect(num(claude.coherence.cv.value(), 2) == "0.84", "anchor Claude CV-Co");
    f.summary = std::to_string(cells) + " cells";
    return f;
}

Findings tables9_10() {
    Findings f;
    int tests = 0;
    for (const auto& row : testdata::kModels) {
        const CorrectnessMatrix m = paper_matrix(row);
        const std::string name(row.name);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto [a, b] = stats::kMcNemarPairs[k];
            const auto r = stats::mcnemar(m, a, b);
            const std::string pair = std::string(to_label(a)).substr(0, 1) + "-" + std::string(to_label(b)).substr(0, 1);
            ++tests;
            f.expect(r.b == row.bc[2 * k] && r.c == row.bc[2 * k + 1],
                     name + " " + pair + " b/c " + std::to_string(r.b) + "/" + std::to_string(r.c));
            f.expect(near(r.chi2, row.chi2[k], 0.005),
                     name + " " + pair + " chi2 " + num(r.chi2, 3) + " vs " + num(row.chi2[k], 2));
            f.expect(near(r.p_value, row.p[k], 0.01), name + " " + pair + " p " + num(r.p_value) + " vs " + num(row.p[k], 4));
        }
    }
    f.expect(num(stats::mcnemar_counts(25, 4).chi2, 2) == "13.79", "anchor Claude E-V 13.79");
    f.expect(num(stats::mcnemar_counts(22, 9).chi2, 2) == "4.65", "anchor DeepSeek C-V 4.65");
    f.expect(num(stats::mcnemar_counts(7, 18).chi2, 2) == "4.00", "anchor LLaMA C-E 4.00");
    f.expect(stats::mcnemar_counts(12, 12).chi2 == 0.0, "anchor Gemma-2 clamp 0.00");
    f.summary = std::to_string(tests) + " paired tests";
    return f;
}

Findings properties() {
    Findings f;
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    int matrices = 0, correlated = 0;
    for (int t = 0; t < 1000; ++t) {
        const bool corr = t % 2 == 1;
        const CorrectnessMatrix m = testgen::random_matrix(rng, size(rng), corr);
        const MetricsReport r = compute_metrics(m);
        const auto naive = testgen::naive_metrics(m);
        ++matrices;
        correlated += corr;
        const std::string tag = "matrix " + std::to_string(t);
        f.expect(r.flip_counts.total() == r.n, tag + ": flip counts do not sum to N");
        for (std::size_t k = 0; k < 3; ++k) {
            f.expect(r.accuracy[k].count == naive.acc[k], tag + ": accuracy");
            f.expect(naive.acc[k] == r.invariance3.count + naive.fragile[k], tag + ": Property 1");
            f.expect(r.fragile[k].count == naive.fragile[k], tag + ": fragile count");
            f.expect(r.invariance3.count <= r.accuracy[k].count, tag + ": Property 2");
        }
        f.expect(r.invariance3.count == naive.all3, tag + ": Invariance@3");
        f.expect(r.transfer.ec_given_v == Rate{naive.ec_v_num, naive.ec_v_den}, tag + ": EC|V");
        f.expect(r.transfer.cv_given_e == Rate{naive.cv_e_num, naive.cv_e_den}, tag + ": CV|E");
        f.expect(r.transfer.ev_given_c == Rate{naive.ev_c_num, naive.ev_c_den}, tag + ": EV|C");
        f.expect(r.coherence.ec == Rate{naive.ec_agree, naive.n}, tag + ": EC-Co");
        f.expect(r.coherence.cv == Rate{naive.cv_agree, naive.n}, tag + ": CV-Co");
        f.expect(r.coherence.ev == Rate{naive.ev_agree, naive.n}, tag + ": EV-Co");
    }
    int scored = 0, gap_rows = 0;
    std::uniform_int_distribution<std::size_t> run_size(1, 60);
    for (int t = 0; t < 200; ++t) {
        const auto fx = testgen::random_scored_run(rng, run_size(rng));
        const CorrectnessMatrix m = score_run(fx.run, fx.problems, AdjudicationStore{});
        if (m.empty()) continue;
        ++scored;
        const long long cons = consistency3(m).count, inv = invariance3(m).count;
        gap_rows += static_cast<int>(cons - inv);
        f.expect(cons >= inv, "scored run " + std::to_string(t) + ": Property 3");
    }
    f.summary = std::to_string(matrices) + " matrices (" + std::to_string(correlated) + " correlated), " +
                std::to_string(scored) + " scored runs, " + std::to_string(gap_rows) + " same-wrong rows";
    return f;
}

Findings canonicalizer() {
    using Kind = canon::EquivalenceVerdict::Kind;
    Findings f;
    f.expect(canon::equivalent("1/2", "0.5").kind == Kind::Equal, "1/2 vs 0.5");
    f.expect(canon::equivalent("6/4", "3/2").kind == Kind::Equal, "6/4 vs 3/2");
    f.expect(canon::equivalent("4*sqrt(3)", "sqrt(48)").kind == Kind::Equal, "4*sqrt(3) vs sqrt(48)");
    f.expect(canon::equivalent("3.162", "sqrt(10)").kind == Kind::NeedsAdjudication, "3.162 vs sqrt(10)");
    f.expect(canon::canonicalize(canon::parse_answer("arccos(1/sqrt(3))")).is_opaque(), "arccos form opaque");

    std::mt19937_64 rng(777);
    testgen::ExprGenerator gen(rng);
    int disagreements = 0, equal = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto [a, b] = gen.exact_pair();
        const bool oracle = testgen::agree_12_digits(a.value, b.value);
        const bool got = canon::equivalent(a.text, b.text).is_equal();
        equal += got;
        if (got != oracle) {
            if (++disagreements <= 5) f.failures.push_back("disagreement: " + a.text + " vs " + b.text);
        }
    }
    f.expect(disagreements == 0, std::to_string(disagreements) + " oracle disagreements");

    int checked = 0, skipped = 0, unstable = 0;
    while (checked < 10000) {
        const auto e = gen.any(4);
        const auto c = canon::try_canonicalize(e.text);
        if (!c) {
            ++skipped;
            continue;
        }
        ++checked;
        const auto again = canon::canonicalize(canon::parse_answer(c->render()));
        if (!(again == *c) || again.render() != c->render()) {
            if (++unstable <= 5) f.failures.push_back("not idempotent: " + e.text + " -> " + c->render());
        }
    }
    f.expect(unstable == 0, std::to_string(unstable) + " round-trip failures");
    f.summary = "10000 pairs (" + std::to_string(equal) + " equal), 10000 round trips (" + std::to_string(skipped) +
                " generated expressions outside the domain skipped)";
    return f;
}

Findings bootstrap() {
    Findings f;
    const CorrectnessMatrix claude = paper_matrix(testdata::kModels[0]);
    for (const auto s : {stats::Statistic::accuracy(Representation::Euclidean), stats::Statistic::accuracy(Representation::Coordinate),
                         stats::Statistic::accuracy(Representation::Vector), stats::Statistic::invariance(),
                         stats::Statistic::consistency(), stats::Statistic::gap()}) {
        const auto a = stats::bootstrap_ci(claude, s, 2000, 42);
        const auto b = stats::bootstrap_ci(claude, s, 2000, 42);
        const auto c = stats::bootstrap_ci(claude, s, 2000, 42, 0.95, 4);
        f.expect(std::memcmp(&a.lo, &b.lo, sizeof(double)) == 0 && std::memcmp(&a.hi, &b.hi, sizeof(double)) == 0,
                 s.name() + ": rerun differs");
        f.expect(std::memcmp(&a.lo, &c.lo, sizeof(double)) == 0 && std::memcmp(&a.hi, &c.hi, sizeof(double)) == 0,
                 s.name() + ": threaded run differs");
    }
    std::mt19937_64 rng(60);
    const int trials = 1000;
    const std::size_t n = 200;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        const auto m = testgen::bernoulli_matrix(rng, n, 0.6);
        const auto ci = stats::bootstrap_ci(m, stats::Statistic::accuracy(Representation::Euclidean), 2000,
                                            static_cast<std::uint64_t>(t) + 1);
        covered += ci.lo <= 0.6 && 0.6 <= ci.hi;
    }
    const double coverage = static_cast<double>(covered) / trials;
    f.expect(near(coverage, 0.95, 0.03), "coverage " + num(coverage, 3) + " outside 0.95 +/- 0.03");
    f.summary = "coverage " + num(coverage, 3) + " over " + std::to_string(trials) + " trials (N = " + std::to_string(n) +
                ", B = 2000)";
    return f;
}

Findings logistic() {
    Findings f;
    std::mt19937_64 rng(1);
    const std::array<double, 5> beta = {0.5, -1.0, 0.8, 0.3, -0.7};
    const auto rows = testgen::synthetic_regression(rng, 50000, beta);
    const stats::LogisticFit fit = stats::logistic_fit(rows);
    f.expect(fit.converged, "50k fit did not converge");
    double worst = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        const double err = std::fabs(fit.coefficients[static_cast<Eigen::Index>(j)] - beta[j]);
        worst = std::max(worst, err);
        f.expect(err <= 0.05, fit.names[j] + ": " + num(fit.coefficients[static_cast<Eigen::Index>(j)]) + " vs " + num(beta[j], 2));
    }
    const double fd_big =
        testgen::numeric_gradient(testgen::standardized_design(rows, fit), testgen::labels(rows), fit.coefficients)
            .cwiseAbs()
            .maxCoeff();
    f.expect(fd_big < 1e-5, "finite-difference gradient (50k) " + std::to_string(fd_big));

    std::mt19937_64 toy_rng(40);
    const auto toy = testgen::logistic_toy(toy_rng);
    const auto toy_fit = stats::fit_logistic(toy.x, toy.y, {"x1", "x2"});
    const double grid = testgen::grid_best_log_likelihood(toy, 0.01, 5.0);
    const double fit_ll = static_cast<double>(testgen::log_likelihood_ld(toy.x, toy.y, toy_fit.coefficients));
    f.expect(fit_ll >= grid, "fit LL " + num(fit_ll, 8) + " below grid " + num(grid, 8));
    const double fd_toy = testgen::numeric_gradient(toy.x, toy.y, toy_fit.coefficients).cwiseAbs().maxCoeff();
    f.expect(fd_toy < 1e-5, "finite-difference gradient (toy) " + std::to_string(fd_toy));

    bool separated = false;
    try {
        stats::fit_logistic(toy.x, Eigen::VectorXd::Ones(toy.x.rows()), {"x1", "x2"});
    } catch (const SeparationDetected&) {
        separated = true;
    }
    f.expect(separated, "all-positive labels not detected");

    char buf[160];
    std::snprintf(buf, sizeof buf, "max |beta error| %.4f at 50k rows, toy LL %.6f >= grid %.6f, max FD gradient %.1e",
                  worst, fit_ll, grid, std::max(fd_big, fd_toy));
    f.summary = buf;
    return f;
}

// ─── Pipeline replay ──────────────────────────────────────────────────────

ModelSpec stub_spec() {
    ModelSpec spec;
    spec.model_id = "stub/model";
    spec.endpoint = "replay://";
    spec.retry_backoff = std::chrono::milliseconds(0);
    return spec;
}

RunOptions fixed_options(std::size_t concurrency) {
    RunOptions o;
    o.concurrency = concurrency;
    o.clock = [] { return std::string("2000-01-01T00:00:00Z"); };
    return o;
}

// run -> score -> metrics -> stats -> report, every artifact serialized.
std::vector<std::string> pipeline(const ProblemSet& ps, RunMode mode, const char* transcript, std::size_t concurrency) {
    ReplayTransport t = ReplayTransport::from_file(kFixtures / transcript);
    const RunRecord run = run_model(stub_spec(), ps, mode, t, fixed_options(concurrency));
    const CorrectnessMatrix m = score_run(run, ps, AdjudicationStore{});
    const MetricsReport metrics = compute_metrics(m);
    StatsOptions so;
    so.replicates = 2000;
    so.threads = static_cast<unsigned>(concurrency);
    const auto rows = regression_rows(m, ps);
    ReportInput in;
    in.label = run.model.model_id;
    in.run_id = run.run_id;
    in.dataset_checksum = m.dataset_checksum;
    in.metrics = metrics;
    in.stats = compute_stats(m, so, &rows);
    return {serialize_run(run), to_json(m).dump(), detail::metrics_json(metrics).dump(), detail::stats_json(*in.stats).dump(),
            emit_report(in, ReportFormat::Text), emit_report(in, ReportFormat::Json), emit_report(in, ReportFormat::Csv)};
}

Findings pipeline_replay() {
    Findings f;
    const ProblemSet ps = load_dataset(kFixtures / "problems5.jsonl");

    for (const auto& [mode, transcript] : {std::pair{RunMode::Direct, "transcript_direct.jsonl"},
                                           std::pair{RunMode::ConvertThenSolve, "transcript_cts.jsonl"}}) {
        const auto a = pipeline(ps, mode, transcript, 1);
        const auto b = pipeline(ps, mode, transcript, 1);
        const auto c = pipeline(ps, mode, transcript, 4);
        static const char* kStages[] = {"run", "score", "metrics", "stats", "report text", "report json", "report csv"};
        for (std::size_t i = 0; i < a.size(); ++i) {
            f.expect(a[i] == b[i], std::string(to_string(mode)) + " " + kStages[i] + " differs between reruns");
            f.expect(a[i] == c[i], std::string(to_string(mode)) + " " + kStages[i] + " differs at concurrency 4");
        }
    }

    // convert-then-solve bookkeeping
    ReplayTransport cts = ReplayTransport::from_file(kFixtures / "transcript_cts.jsonl");
    const RunRecord run = run_model(stub_spec(), ps, RunMode::ConvertThenSolve, cts, fixed_options(1));
    int with_conversion = 0;
    for (const auto& e : run.entries) with_conversion += e.conversion_text.has_value();
    const RunEntry* bad = run.find("fx-003", Representation::Vector);
    f.expect(with_conversion == 14, "conversion_text recorded on " + std::to_string(with_conversion) + " of 14 entries");
    f.expect(bad && !bad->conversion_text && bad->attempts == 0 && bad->conversion_attempts == 1 &&
                 bad->response.status == ResponseStatus::MalformedJSON,
             "malformed conversion did not skip stage 2");
    f.expect(cts.calls().size() == 29, "CTS issued " + std::to_string(cts.calls().size()) + " requests, expected 29");

    // resume after interrupt
    const fs::path checkpoint = fs::temp_directory_path() / "georep-acceptance-resume.jsonl";
    int duplicates = 0;
    for (std::size_t workers : {std::size_t{1}, std::size_t{3}}) {
        fs::remove(checkpoint);
        RunOptions o = fixed_options(workers);
        o.checkpoint = checkpoint;
        ReplayTransport first = ReplayTransport::from_file(kFixtures / "transcript_direct.jsonl");
        first.abort_after(7);
        bool aborted = false;
        try {
            run_model(stub_spec(), ps, RunMode::Direct, first, o);
        } catch (const TransportAborted&) {
            aborted = true;
        }
        f.expect(aborted, "interrupt was not simulated");
        ReplayTransport second = ReplayTransport::from_file(kFixtures / "transcript_direct.jsonl");
        o.resume = true;
        const RunRecord resumed = run_model(stub_spec(), ps, RunMode::Direct, second, o);
        std::map<std::string, int> served;
        for (const auto* t : {&first, &second})
            for (const auto& call : t->calls())
                if (call.status == 200) ++served[call.prompt_sha256];
        for (const auto& [hash, count] : served) duplicates += count - 1;
        f.expect(served.size() == 15, "resumed run answered " + std::to_string(served.size()) + " distinct prompts");
        ReplayTransport clean = ReplayTransport::from_file(kFixtures / "transcript_direct.jsonl");
        f.expect(serialize_run(resumed) == serialize_run(run_model(stub_spec(), ps, RunMode::Direct, clean, fixed_options(1))),
                 "resumed run differs from an uninterrupted run");
    }
    fs::remove(checkpoint);
    f.expect(duplicates == 0, std::to_string(duplicates) + " duplicate requests after resume");
    f.summary = "direct + CTS pipelines byte-identical across reruns and concurrency; CTS 29 requests; resume duplicates " +
                std::to_string(duplicates);
    return f;
}

struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Findings()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"Table-3 reproduction", 1.0, table3},
        {"Table-6 reproduction", 1.0, table6},
        {"Tables 9-10 reproduction", 1.0, tables9_10},
        {"Property suite", 10.0, properties},
        {"Canonicalizer suite", 30.0, canonicalizer},
        {"Bootstrap", 120.0, bootstrap},
        {"Logistic regression", 60.0, logistic},
        {"Pipeline replay", 60.0, pipeline_replay},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Findings f;
        try {
            f = c.run();
        } catch (const std::exception& e) {
            f.failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds >= c.limit_seconds)
            f.failures.push_back("runtime " + num(seconds, 3) + " s exceeds " + num(c.limit_seconds, 0) + " s");
        const bool pass = f.failures.empty();
        failed += !pass;
        std::printf("%s  %-26s %8.3f s (limit %3.0f s)  %s\n", pass ? "PASS" : "FAIL", c.name, seconds, c.limit_seconds,
                    f.summary.c_str());
        for (const auto& msg : f.failures) std::printf("        fail: %s\n", msg.c_str());
        for (const auto& msg : f.notes) std::printf("        note: %s\n", msg.c_str());
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
