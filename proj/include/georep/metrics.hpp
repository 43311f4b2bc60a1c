#pragma once

// Aggregate invariance metrics and flip-pattern analysis.
//
// Transfer and coherence are derived from the eight flip-pattern counts:
//   EC|V = CCW / (CCW + CWW + WCW + WWW)     both E and C right, given V wrong
//   CV|E = WCC / (WCC + WCW + WWC + WWW)
//   EV|C = CWC / (CWC + CWW + WWC + WWW)
//   EC-Co = (CCC + CCW + WWC + WWW) / N      E and C agree in correctness
//   CV-Co = (CCC + WCC + CWW + WWW) / N
//   EV-Co = (CCC + CWC + WCW + WWW) / N
// Pattern letters are ordered (E, C, V).

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "georep/core.hpp"
#include "georep/matrix.hpp"

namespace georep {

// Exact ratio count / total; total == 0 means undefined.
struct Rate {
    long long count = 0;
    long long total = 0;

    bool defined() const { return total > 0; }
    double value() const { return total > 0 ? static_cast<double>(count) / static_cast<double>(total) : 0.0; }
    friend bool operator==(const Rate&, const Rate&) = default;
};

enum class FlipPattern : std::uint8_t { CCC, CCW, CWC, WCC, CWW, WCW, WWC, WWW };

inline constexpr std::array<FlipPattern, 8> kFlipPatterns = {FlipPattern::CCC, FlipPattern::CCW, FlipPattern::CWC,
                                                             FlipPattern::WCC, FlipPattern::CWW, FlipPattern::WCW,
                                                             FlipPattern::WWC, FlipPattern::WWW};

inline std::string_view to_string(FlipPattern p) {
    static constexpr std::array<std::string_view, 8> kNames = {"CCC", "CCW", "CWC", "WCC",
                                                               "CWW", "WCW", "WWC", "WWW"};
    return kNames[static_cast<std::size_t>(p)];
}

inline FlipPattern pattern_of(const RepTriple& row) {
    const bool e = row[0], c = row[1], v = row[2];
    if (e && c && v) return FlipPattern::CCC;
    if (e && c) return FlipPattern::CCW;
    if (e && v) return FlipPattern::CWC;
    if (c && v) return FlipPattern::WCC;
    if (e) return FlipPattern::CWW;
    if (c) return FlipPattern::WCW;
    if (v) return FlipPattern::WWC;
    return FlipPattern::WWW;
}

inline RepTriple row_of(FlipPattern p) {
    const auto name = to_string(p);
    return {name[0] == 'C', name[1] == 'C', name[2] == 'C'};
}

struct FlipCounts {
    std::array<long long, 8> counts{};

    long long operator[](FlipPattern p) const { return counts[static_cast<std::size_t>(p)]; }
    long long& operator[](FlipPattern p) { return counts[static_cast<std::size_t>(p)]; }
    long long total() const {
        long long n = 0;
        for (auto c : counts) n += c;
        return n;
    }
    friend bool operator==(const FlipCounts&, const FlipCounts&) = default;
};

// Matrix realizing the given counts, rows grouped by pattern.
inline CorrectnessMatrix matrix_from_counts(const FlipCounts& counts) {
    std::vector<RepTriple> rows;
    for (FlipPattern p : kFlipPatterns)
        for (long long i = 0; i < counts[p]; ++i) rows.push_back(row_of(p));
    return CorrectnessMatrix::from_rows(rows);
}

namespace detail {
inline long long require_rows(const CorrectnessMatrix& m) {
    if (m.empty()) throw EmptyMatrix();
    return static_cast<long long>(m.size());
}
}  // namespace detail

inline std::array<Rate, 3> per_rep_accuracy(const CorrectnessMatrix& m) {
    const long long n = detail::require_rows(m);
    std::array<Rate, 3> acc{};
    for (std::size_t r = 0; r < 3; ++r) {
        acc[r].total = n;
        for (const auto& row : m.correct) acc[r].count += row[r];
    }
    return acc;
}

inline Rate invariance3(const CorrectnessMatrix& m) {
    Rate out{0, detail::require_rows(m)};
    for (const auto& row : m.correct) out.count += (row[0] && row[1] && row[2]);
    return out;
}

inline Rate consistency3(const CorrectnessMatrix& m) {
    Rate out{0, detail::require_rows(m)};
    for (bool s : m.same_answer_all3) out.count += s;
    return out;
}

/// F^r = Acc^r - Invariance@3, cross-checked against the direct sum of
/// c^r (1 - product of the other two).
inline Rate fragile(const CorrectnessMatrix& m, Representation r) {
    const auto k = index_of(r);
    const Rate acc = per_rep_accuracy(m)[k];
    const Rate inv = invariance3(m);
    Rate direct{0, inv.total};
    for (const auto& row : m.correct) {
        bool others = true;
        for (std::size_t j = 0; j < 3; ++j)
            if (j != k) others = others && row[j];
        direct.count += row[k] && !others;
    }
    if (acc.count - inv.count != direct.count) throw std::logic_error("fragile-correctness decomposition mismatch");
    return direct;
}

inline FlipCounts flip_patterns(const CorrectnessMatrix& m) {
    FlipCounts out;
    for (const auto& row : m.correct) ++out[pattern_of(row)];
    return out;
}

struct FailOnly {
    long long euclidean = 0;  // WCC
    long long coordinate = 0; // CWC
    long long vector = 0;     // CCW
};

struct Transfer {
    Rate ec_given_v;
    Rate cv_given_e;
    Rate ev_given_c;
};

struct Coherence {
    Rate ec;
    Rate cv;
    Rate ev;
};

inline FailOnly fail_only(const FlipCounts& c) {
    using P = FlipPattern;
    return {c[P::WCC], c[P::CWC], c[P::CCW]};
}

inline Transfer pairwise_transfer(const FlipCounts& c) {
    using P = FlipPattern;
    return {{c[P::CCW], c[P::CCW] + c[P::CWW] + c[P::WCW] + c[P::WWW]},
            {c[P::WCC], c[P::WCC] + c[P::WCW] + c[P::WWC] + c[P::WWW]},
            {c[P::CWC], c[P::CWC] + c[P::CWW] + c[P::WWC] + c[P::WWW]}};
}

inline Coherence coherence(const FlipCounts& c) {
    using P = FlipPattern;
    const long long n = c.total();
    if (n == 0) throw EmptyMatrix();
    return {{c[P::CCC] + c[P::CCW] + c[P::WWC] + c[P::WWW], n},
            {c[P::CCC] + c[P::WCC] + c[P::CWW] + c[P::WWW], n},
            {c[P::CCC] + c[P::CWC] + c[P::WCW] + c[P::WWW], n}};
}

struct MetricsReport {
    long long n = 0;
    std::array<Rate, 3> accuracy{};
    Representation best_rep = Representation::Euclidean;
    Representation worst_rep = Representation::Euclidean;
    Rate accuracy_gap;  // (best - worst) count over N
    Rate invariance3;
    Rate consistency3;
    std::array<Rate, 3> fragile{};
    FlipCounts flip_counts;
    FailOnly fail_only;
    Transfer transfer;
    Coherence coherence;
    std::size_t pending = 0;
    std::size_t unscored = 0;
};

inline MetricsReport compute_metrics(const CorrectnessMatrix& m) {
    MetricsReport r;
    r.n = detail::require_rows(m);
    r.accuracy = per_rep_accuracy(m);
    // Ties resolve to the earlier representation (E < C < V).
    std::size_t best = 0, worst = 0;
    for (std::size_t k = 1; k < 3; ++k) {
        if (r.accuracy[k].count > r.accuracy[best].count) best = k;
        if (r.accuracy[k].count < r.accuracy[worst].count) worst = k;
    }
    r.best_rep = kRepresentations[best];
    r.worst_rep = kRepresentations[worst];
    r.accuracy_gap = {r.accuracy[best].count - r.accuracy[worst].count, r.n};
    r.invariance3 = invariance3(m);
    r.consistency3 = consistency3(m);
    for (Representation rep : kRepresentations) r.fragile[index_of(rep)] = fragile(m, rep);
    r.flip_counts = flip_patterns(m);
    r.fail_only = georep::fail_only(r.flip_counts);
    r.transfer = pairwise_transfer(r.flip_counts);
    r.coherence = georep::coherence(r.flip_counts);
    r.pending = m.pending_count();
    r.unscored = m.unscored_ids.size();
    return r;
}

}  // namespace georep
