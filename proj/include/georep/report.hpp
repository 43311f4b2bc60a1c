#pragma once

// Report rendering (JSON, CSV, plain text) and Direct-vs-CTS run comparison.
// Table layouts follow the usual invariance-report columns:
//   accuracy:   Coord Euclid Vector BestRep AccGap Inv@3 Cons@3
//   transfer:   #Prob Fail-E Fail-C Fail-V EC|V CV|E EV|C EC-Co CV-Co EV-Co
//   flips:      #Prob CCC CCW CWC WCC CWW WCW WWC WWW
//   mcnemar:    p(C-E) chi2 p(C-V) chi2 p(E-V) chi2
//   discordant: b_CE c_CE b_CV c_CV b_EV c_EV

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "georep/core.hpp"
#include "georep/dataset.hpp"
#include "georep/matrix.hpp"
#include "georep/metrics.hpp"
#include "georep/stats.hpp"

namespace georep {

struct StatsSummary {
    std::array<stats::McNemarResult, 3> mcnemar{};  // (C,E), (C,V), (E,V)
    std::vector<stats::BootstrapCI> intervals;
    std::optional<stats::LogisticFit> regression;
    std::string regression_error;  // set when the fit was not estimable
};

struct StatsOptions {
    std::size_t replicates = 10000;
    std::uint64_t seed = 42;
    unsigned threads = 1;
    stats::McNemarMethod method = stats::McNemarMethod::ChiSquaredCC;
};

/// One regression row per (problem, representation) cell: surface features
/// of the variant text and the cell's correctness.
inline std::vector<stats::RegressionRow> regression_rows(const CorrectnessMatrix& m, const ProblemSet& ps) {
    std::vector<stats::RegressionRow> rows;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Problem* p = ps.find(m.problem_ids[i]);
        if (!p) throw DatasetMismatch("matrix row \"" + m.problem_ids[i] + "\" is not in the dataset");
        for (Representation r : kRepresentations)
            rows.push_back({stats::surface_features(p->variant(r)), r, m.correct[i][index_of(r)]});
    }
    return rows;
}

inline StatsSummary compute_stats(const CorrectnessMatrix& m, const StatsOptions& options = {},
                                  const std::vector<stats::RegressionRow>* regression_rows = nullptr) {
    StatsSummary s;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto [a, b] = stats::kMcNemarPairs[k];
        s.mcnemar[k] = stats::mcnemar(m, a, b, options.method);
    }
    std::vector<stats::Statistic> wanted;
    for (Representation r : kRepresentations) wanted.push_back(stats::Statistic::accuracy(r));
    wanted.push_back(stats::Statistic::invariance());
    wanted.push_back(stats::Statistic::consistency());
    wanted.push_back(stats::Statistic::gap());
    for (const auto& st : wanted)
        s.intervals.push_back(stats::bootstrap_ci(m, st, options.replicates, options.seed, 0.95, options.threads));
    if (regression_rows) {
        try {
            s.regression = stats::logistic_fit(*regression_rows);
        } catch (const Error& e) {
            s.regression_error = e.what();
        }
    }
    return s;
}

// Printed values to compare against; keys are column names such as
// "Coord", "Euclid", "Vector", "AccGap", "Inv@3", "Cons@3".
using ReferenceValues = std::map<std::string, double>;

struct ReportInput {
    std::string label;  // row label, usually the model id
    std::string run_id;
    std::string dataset_checksum;
    MetricsReport metrics;
    std::optional<StatsSummary> stats;
    ReferenceValues reference;
};

enum class ReportFormat : std::uint8_t { Json, Csv, Text };

inline ReportFormat report_format_from_string(std::string_view s) {
    if (s == "json") return ReportFormat::Json;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "text" || s == "txt") return ReportFormat::Text;
    throw UnsupportedFormat("unsupported report format \"" + std::string(s) + "\" (json, csv, text)");
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string rate_text(const Rate& r, int digits) { return r.defined() ? fixed(r.value(), digits) : "undef"; }

inline std::string p_text(double p) { return p < 0.001 ? fixed(p, 4) : fixed(p, 3); }

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<Table> build_tables(std::span<const ReportInput> inputs) {
    Table acc{"accuracy", {"Model", "Coord", "Euclid", "Vector", "BestRep", "AccGap", "Inv@3", "Cons@3", "N", "Pending"}, {}};
    Table transfer{"transfer",
                   {"Model", "#Prob", "Fail-E", "Fail-C", "Fail-V", "EC|V", "CV|E", "EV|C", "EC-Co", "CV-Co", "EV-Co"},
                   {}};
    Table flips{"flips", {"Model", "#Prob"}, {}};
    for (FlipPattern p : kFlipPatterns) flips.header.emplace_back(to_string(p));
    Table mcn{"mcnemar", {"Model", "p(C-E)", "chi2(C-E)", "p(C-V)", "chi2(C-V)", "p(E-V)", "chi2(E-V)"}, {}};
    Table disc{"discordant", {"Model", "b_CE", "c_CE", "b_CV", "c_CV", "b_EV", "c_EV"}, {}};
    Table cis{"bootstrap", {"Model", "Statistic", "Point", "Lo", "Hi", "B", "Seed"}, {}};
    Table reg{"regression", {"Model", "Term", "Coef", "SE", "p"}, {}};

    for (const auto& in : inputs) {
        const auto& m = in.metrics;
        const auto& a = m.accuracy;
        acc.rows.push_back({in.label, rate_text(a[1], 2), rate_text(a[0], 2), rate_text(a[2], 2),
                            std::string(to_label(m.best_rep)), rate_text(m.accuracy_gap, 2),
                            rate_text(m.invariance3, 3), rate_text(m.consistency3, 3), std::to_string(m.n),
                            std::to_string(m.pending)});
        transfer.rows.push_back({in.label, std::to_string(m.n), std::to_string(m.fail_only.euclidean),
                                 std::to_string(m.fail_only.coordinate), std::to_string(m.fail_only.vector),
                                 rate_text(m.transfer.ec_given_v, 2), rate_text(m.transfer.cv_given_e, 2),
                                 rate_text(m.transfer.ev_given_c, 2), rate_text(m.coherence.ec, 2),
                                 rate_text(m.coherence.cv, 2), rate_text(m.coherence.ev, 2)});
        std::vector<std::string> fr{in.label, std::to_string(m.n)};
        for (FlipPattern p : kFlipPatterns) fr.push_back(std::to_string(m.flip_counts[p]));
        flips.rows.push_back(std::move(fr));
        if (in.stats) {
            std::vector<std::string> mr{in.label}, dr{in.label};
            for (const auto& t : in.stats->mcnemar) {
                mr.push_back(p_text(t.p_value));
                mr.push_back(fixed(t.chi2, 2));
                dr.push_back(std::to_string(t.b));
                dr.push_back(std::to_string(t.c));
            }
            mcn.rows.push_back(std::move(mr));
            disc.rows.push_back(std::move(dr));
            for (const auto& ci : in.stats->intervals)
                cis.rows.push_back({in.label, ci.statistic, fixed(ci.point, 3), fixed(ci.lo, 3), fixed(ci.hi, 3),
                                    std::to_string(ci.replicates), std::to_string(ci.seed)});
            if (in.stats->regression) {
                const auto& f = *in.stats->regression;
                for (std::size_t j = 0; j < f.names.size(); ++j) {
                    const auto k = static_cast<Eigen::Index>(j);
                    reg.rows.push_back({in.label, f.names[j], fixed(f.coefficients[k], 4), fixed(f.standard_errors[k], 4),
                                        p_text(f.wald_p[k])});
                }
            } else if (!in.stats->regression_error.empty()) {
                reg.rows.push_back({in.label, "not estimable: " + in.stats->regression_error, "", "", ""});
            }
        }
    }
    std::vector<Table> out{acc, transfer, flips};
    if (!mcn.rows.empty()) {
        out.push_back(mcn);
        out.push_back(disc);
        out.push_back(cis);
    }
    if (!reg.rows.empty()) out.push_back(reg);
    return out;
}

inline const std::map<std::string, std::pair<int, int>>& reference_columns() {
    // column -> (accuracy index or -1, decimals)
    static const std::map<std::string, std::pair<int, int>> kColumns = {
        {"Coord", {1, 2}}, {"Euclid", {0, 2}}, {"Vector", {2, 2}}, {"AccGap", {-1, 2}}, {"Inv@3", {-2, 3}}, {"Cons@3", {-3, 3}}};
    return kColumns;
}

inline std::vector<std::string> footnotes(const ReportInput& in) {
    std::vector<std::string> notes;
    for (const auto& [column, printed] : in.reference) {
        auto it = reference_columns().find(column);
        if (it == reference_columns().end()) continue;
        const auto [which, digits] = it->second;
        const auto& m = in.metrics;
        const Rate r = which >= 0 ? m.accuracy[static_cast<std::size_t>(which)]
                       : which == -1 ? m.accuracy_gap
                       : which == -2 ? m.invariance3
                                     : m.consistency3;
        const std::string shown = rate_text(r, digits);
        if (shown != fixed(printed, digits)) {
            notes.push_back(in.label + " " + column + ": recomputed " + std::to_string(r.count) + "/" +
                            std::to_string(r.total) + " = " + fixed(r.value(), 4) + " (shown " + shown +
                            ") differs from reference " + fixed(printed, digits));
        }
    }
    return notes;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline nlohmann::json rate_json(const Rate& r) {
    nlohmann::json j = {{"count", r.count}, {"total", r.total}};
    j["value"] = r.defined() ? nlohmann::json(r.value()) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json metrics_json(const MetricsReport& m) {
    nlohmann::json acc, fragile, flips;
    for (Representation r : kRepresentations) {
        acc[std::string(to_key(r))] = rate_json(m.accuracy[index_of(r)]);
        fragile[std::string(to_key(r))] = rate_json(m.fragile[index_of(r)]);
    }
    for (FlipPattern p : kFlipPatterns) flips[std::string(to_string(p))] = m.flip_counts[p];
    return {{"n", m.n},
            {"accuracy", acc},
            {"best_rep", to_key(m.best_rep)},
            {"accuracy_gap", rate_json(m.accuracy_gap)},
            {"invariance3", rate_json(m.invariance3)},
            {"consistency3", rate_json(m.consistency3)},
            {"fragile", fragile},
            {"flip_counts", flips},
            {"fail_only", {{"E", m.fail_only.euclidean}, {"C", m.fail_only.coordinate}, {"V", m.fail_only.vector}}},
            {"transfer",
             {{"EC|V", rate_json(m.transfer.ec_given_v)},
              {"CV|E", rate_json(m.transfer.cv_given_e)},
              {"EV|C", rate_json(m.transfer.ev_given_c)}}},
            {"coherence",
             {{"EC-Co", rate_json(m.coherence.ec)}, {"CV-Co", rate_json(m.coherence.cv)}, {"EV-Co", rate_json(m.coherence.ev)}}},
            {"pending", m.pending},
            {"unscored", m.unscored}};
}

inline nlohmann::json stats_json(const StatsSummary& s) {
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : s.mcnemar) {
        tests.push_back({{"pair", std::string(1, to_letter(t.first)) + "-" + std::string(1, to_letter(t.second))},
                         {"b", t.b},
                         {"c", t.c},
                         {"chi2", t.chi2},
                         {"p", t.p_value},
                         {"method", t.method == stats::McNemarMethod::ChiSquaredCC ? "ChiSquaredCC" : "ExactBinomial"},
                         {"degenerate", t.degenerate}});
    }
    nlohmann::json cis = nlohmann::json::array();
    for (const auto& ci : s.intervals) {
        cis.push_back({{"statistic", ci.statistic},
                       {"point", ci.point},
                       {"lo", ci.lo},
                       {"hi", ci.hi},
                       {"B", ci.replicates},
                       {"seed", ci.seed},
                       {"level", ci.level}});
    }
    nlohmann::json out = {{"mcnemar", tests}, {"bootstrap", cis}};
    if (s.regression) {
        const auto& f = *s.regression;
        nlohmann::json terms = nlohmann::json::array();
        for (std::size_t j = 0; j < f.names.size(); ++j) {
            const auto k = static_cast<Eigen::Index>(j);
            terms.push_back({{"term", f.names[j]},
                             {"coef", f.coefficients[k]},
                             {"se", f.standard_errors[k]},
                             {"p", f.wald_p[k]}});
        }
        out["regression"] = {{"terms", terms},
                             {"converged", f.converged},
                             {"iterations", f.iterations},
                             {"log_likelihood", f.log_likelihood},
                             {"feature_mean", f.feature_mean},
                             {"feature_sd", f.feature_sd}};
    } else if (!s.regression_error.empty()) {
        out["regression"] = {{"error", s.regression_error}};
    }
    return out;
}

}  // namespace detail

/// Deterministic document; identical inputs give identical bytes.
inline std::string emit_report(std::span<const ReportInput> inputs, ReportFormat format) {
    const auto tables = detail::build_tables(inputs);
    std::vector<std::string> notes;
    for (const auto& in : inputs)
        for (auto& n : detail::footnotes(in)) notes.push_back(std::move(n));

    std::ostringstream out;
    switch (format) {
        case ReportFormat::Json: {
            nlohmann::json runs = nlohmann::json::array();
            for (const auto& in : inputs) {
                nlohmann::json r = {{"label", in.label},
                                    {"run_id", in.run_id},
                                    {"dataset_checksum", in.dataset_checksum},
                                    {"metrics", detail::metrics_json(in.metrics)}};
                if (in.stats) r["stats"] = detail::stats_json(*in.stats);
                runs.push_back(std::move(r));
            }
            out << nlohmann::json({{"runs", runs}, {"notes", notes}}).dump(2) << '\n';
            break;
        }
        case ReportFormat::Csv: {
            for (const auto& t : tables) {
                out << "# " << t.name << '\n';
                for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << detail::csv_field(t.header[i]);
                out << '\n';
                for (const auto& row : t.rows) {
                    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::csv_field(row[i]);
                    out << '\n';
                }
            }
            for (const auto& n : notes) out << "# note: " << n << '\n';
            break;
        }
        case ReportFormat::Text: {
            for (const auto& in : inputs) {
                out << "run " << in.run_id << "  dataset " << in.dataset_checksum.substr(0, 16) << "  pending adjudications "
                    << in.metrics.pending << '\n';
            }
            for (const auto& t : tables) {
                std::vector<std::size_t> width(t.header.size(), 0);
                for (std::size_t i = 0; i < t.header.size(); ++i) width[i] = t.header[i].size();
                for (const auto& row : t.rows)
                    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
                out << '\n' << "[" << t.name << "]\n";
                auto line = [&](const std::vector<std::string>& cells) {
                    std::string s;
                    for (std::size_t i = 0; i < cells.size(); ++i) {
                        std::string c = cells[i];
                        if (i + 1 < cells.size()) c.resize(std::max(width[i], c.size()), ' ');
                        s += (i ? "  " : "") + c;
                    }
                    while (!s.empty() && s.back() == ' ') s.pop_back();
                    out << s << '\n';
                };
                line(t.header);
                for (const auto& row : t.rows) line(row);
            }
            if (!notes.empty()) {
                out << "\nNotes:\n";
                for (std::size_t i = 0; i < notes.size(); ++i) out << "  [" << i + 1 << "] " << notes[i] << '\n';
            }
            break;
        }
    }
    return out.str();
}

inline std::string emit_report(const ReportInput& input, ReportFormat format) {
    return emit_report(std::span<const ReportInput>(&input, 1), format);
}

// ─── Run comparison ───────────────────────────────────────────────────────

struct RunComparison {
    std::string baseline_run_id;
    std::string treatment_run_id;
    long long common = 0;
    std::array<double, 3> accuracy_delta{};  // treatment - baseline
    double invariance_delta = 0.0;
    double consistency_delta = 0.0;
    // migration[from][to]: problems whose baseline pattern is `from` and
    // treatment pattern is `to`.
    std::array<std::array<long long, 8>, 8> migration{};
    MetricsReport baseline;
    MetricsReport treatment;
};

inline CorrectnessMatrix restrict_rows(const CorrectnessMatrix& m, const std::vector<std::string>& ids) {
    CorrectnessMatrix out;
    out.run_id = m.run_id;
    out.dataset_checksum = m.dataset_checksum;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.size(); ++i) index.emplace(m.problem_ids[i], i);
    for (const auto& id : ids) {
        const auto i = index.at(id);
        out.add_row(id, m.correct[i], m.same_answer_all3[i], m.provenance[i], m.pending[i]);
    }
    return out;
}

/// Deltas and pattern migration over the problems scored in both runs
/// (baseline order).
inline RunComparison compare_runs(const CorrectnessMatrix& baseline, const CorrectnessMatrix& treatment) {
    std::map<std::string, std::size_t> in_treatment;
    for (std::size_t i = 0; i < treatment.size(); ++i) in_treatment.emplace(treatment.problem_ids[i], i);
    std::vector<std::string> common;
    for (const auto& id : baseline.problem_ids)
        if (in_treatment.count(id)) common.push_back(id);
    if (common.empty()) throw DisjointRuns("runs share no scored problems");

    const CorrectnessMatrix a = restrict_rows(baseline, common);
    const CorrectnessMatrix b = restrict_rows(treatment, common);
    RunComparison cmp;
    cmp.baseline_run_id = baseline.run_id;
    cmp.treatment_run_id = treatment.run_id;
    cmp.common = static_cast<long long>(common.size());
    cmp.baseline = compute_metrics(a);
    cmp.treatment = compute_metrics(b);
    for (std::size_t r = 0; r < 3; ++r)
        cmp.accuracy_delta[r] = cmp.treatment.accuracy[r].value() - cmp.baseline.accuracy[r].value();
    cmp.invariance_delta = cmp.treatment.invariance3.value() - cmp.baseline.invariance3.value();
    cmp.consistency_delta = cmp.treatment.consistency3.value() - cmp.baseline.consistency3.value();
    for (std::size_t i = 0; i < common.size(); ++i) {
        const auto from = static_cast<std::size_t>(pattern_of(a.correct[i]));
        const auto to = static_cast<std::size_t>(pattern_of(b.correct[i]));
        ++cmp.migration[from][to];
    }
    return cmp;
}

inline std::string emit_comparison(const RunComparison& c, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::Json) {
        nlohmann::json mig = nlohmann::json::object();
        for (FlipPattern f : kFlipPatterns) {
            nlohmann::json row = nlohmann::json::object();
            for (FlipPattern t : kFlipPatterns)
                row[std::string(to_string(t))] = c.migration[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)];
            mig[std::string(to_string(f))] = row;
        }
        nlohmann::json acc;
        for (Representation r : kRepresentations) acc[std::string(to_key(r))] = c.accuracy_delta[index_of(r)];
        out << nlohmann::json({{"baseline", c.baseline_run_id},
                               {"treatment", c.treatment_run_id},
                               {"common", c.common},
                               {"accuracy_delta", acc},
                               {"invariance_delta", c.invariance_delta},
                               {"consistency_delta", c.consistency_delta},
                               {"migration", mig}})
                   .dump(2)
            << '\n';
        return out.str();
    }
    const char* sep = format == ReportFormat::Csv ? "," : "  ";
    out << (format == ReportFormat::Csv ? "# " : "") << "baseline " << c.baseline_run_id << " vs treatment "
        << c.treatment_run_id << " over " << c.common << " common problems\n";
    out << "delta" << sep << "Coord" << sep << "Euclid" << sep << "Vector" << sep << "Inv@3" << sep << "Cons@3\n";
    out << "value" << sep << detail::fixed(c.accuracy_delta[1], 2) << sep << detail::fixed(c.accuracy_delta[0], 2) << sep
        << detail::fixed(c.accuracy_delta[2], 2) << sep << detail::fixed(c.invariance_delta, 3) << sep
        << detail::fixed(c.consistency_delta, 3) << '\n';
    out << "from\\to";
    for (FlipPattern t : kFlipPatterns) out << sep << to_string(t);
    out << '\n';
    for (FlipPattern f : kFlipPatterns) {
        out << to_string(f);
        for (FlipPattern t : kFlipPatterns) out << sep << c.migration[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)];
        out << '\n';
    }
    return out.str();
}

}  // namespace georep
