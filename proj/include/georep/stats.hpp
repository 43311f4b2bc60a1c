#pragma once

// Statistical layer: paired McNemar tests, seeded row-paired bootstrap,
// prompt surface features and covariate-controlled logistic regression.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "georep/core.hpp"
#include "georep/matrix.hpp"
#include "georep/metrics.hpp"

namespace georep::stats {

// ─── McNemar ──────────────────────────────────────────────────────────────

enum class McNemarMethod : std::uint8_t { ChiSquaredCC, ExactBinomial };

struct McNemarResult {
    Representation first = Representation::Euclidean;
    Representation second = Representation::Euclidean;
    long long b = 0;  // first correct, second wrong
    long long c = 0;  // first wrong, second correct
    double chi2 = 0.0;
    double p_value = 1.0;
    McNemarMethod method = McNemarMethod::ChiSquaredCC;
    bool degenerate = false;  // b + c == 0
};

inline double chi2_statistic(long long b, long long c) {
    if (b + c == 0) return 0.0;
    const double d = std::max<double>(static_cast<double>(std::llabs(b - c)) - 1.0, 0.0);
    return d * d / static_cast<double>(b + c);
}

// Survival function of chi-squared with one degree of freedom.
inline double chi2_sf_1df(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

// Two-sided exact binomial p: min(1, 2 P[X <= min(b, c)]), X ~ Bin(b + c, 1/2).
inline double exact_binomial_p(long long b, long long c) {
    const long long n = b + c;
    if (n == 0) return 1.0;
    const long long k = std::min(b, c);
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    double tail = 0.0;
    for (long long i = 0; i <= k; ++i) {
        const double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                                std::lgamma(static_cast<double>(n - i) + 1) + log_half_n;
        tail += std::exp(log_term);
    }
    return std::min(1.0, 2.0 * tail);
}

inline McNemarResult mcnemar_counts(long long b, long long c, McNemarMethod method = McNemarMethod::ChiSquaredCC) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    r.method = method;
    r.chi2 = chi2_statistic(b, c);
    r.degenerate = b + c == 0;
    if (r.degenerate) {
        r.p_value = 1.0;
    } else {
        r.p_value = method == McNemarMethod::ChiSquaredCC ? chi2_sf_1df(r.chi2) : exact_binomial_p(b, c);
    }
    return r;
}

inline McNemarResult mcnemar(const CorrectnessMatrix& m, Representation first, Representation second,
                             McNemarMethod method = McNemarMethod::ChiSquaredCC) {
    if (m.empty()) throw EmptyMatrix();
    long long b = 0, c = 0;
    const auto i = index_of(first), j = index_of(second);
    for (const auto& row : m.correct) {
        b += row[i] && !row[j];
        c += !row[i] && row[j];
    }
    McNemarResult r = mcnemar_counts(b, c, method);
    r.first = first;
    r.second = second;
    return r;
}

// Pairs in report order: (C, E), (C, V), (E, V).
inline constexpr std::array<std::pair<Representation, Representation>, 3> kMcNemarPairs = {
    std::pair{Representation::Coordinate, Representation::Euclidean},
    std::pair{Representation::Coordinate, Representation::Vector},
    std::pair{Representation::Euclidean, Representation::Vector}};

// ─── Bootstrap ────────────────────────────────────────────────────────────

enum class StatisticKind : std::uint8_t { Accuracy, Invariance3, Consistency3, AccuracyGap };

struct Statistic {
    StatisticKind kind = StatisticKind::Invariance3;
    Representation rep = Representation::Euclidean;  // Accuracy only

    static Statistic accuracy(Representation r) { return {StatisticKind::Accuracy, r}; }
    static Statistic invariance() { return {StatisticKind::Invariance3, {}}; }
    static Statistic consistency() { return {StatisticKind::Consistency3, {}}; }
    static Statistic gap() { return {StatisticKind::AccuracyGap, {}}; }

    std::string name() const {
        switch (kind) {
            case StatisticKind::Accuracy: return "Acc^" + std::string(to_label(rep));
            case StatisticKind::Invariance3: return "Invariance@3";
            case StatisticKind::Consistency3: return "Consistency@3";
            case StatisticKind::AccuracyGap: return "AccuracyGap";
        }
        return "?";
    }
};

struct BootstrapCI {
    std::string statistic;
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    double level = 0.95;
};

namespace detail {

// Per-row summary so a replicate only sums small integers.
struct RowCode {
    std::uint8_t correct_bits;  // bit r set when correct under representation r
    bool same;
};

inline double evaluate(const Statistic& s, const std::array<long long, 3>& acc, long long inv, long long cons,
                       long long n) {
    const double dn = static_cast<double>(n);
    switch (s.kind) {
        case StatisticKind::Accuracy: return static_cast<double>(acc[index_of(s.rep)]) / dn;
        case StatisticKind::Invariance3: return static_cast<double>(inv) / dn;
        case StatisticKind::Consistency3: return static_cast<double>(cons) / dn;
        case StatisticKind::AccuracyGap: {
            const auto [lo, hi] = std::minmax({acc[0], acc[1], acc[2]});
            return static_cast<double>(hi - lo) / dn;
        }
    }
    return 0.0;
}

// Unbiased integer in [0, n) by rejection on the top of the 64-bit range.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const std::uint64_t x = gen();
        if (x < limit) return x % n;
    }
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Percentile bootstrap over problems (rows resampled with replacement, so
/// the three cells of a problem stay paired). Replicate j draws from an
/// mt19937_64 seeded with seed_seq{seed_lo, seed_hi, j_lo, j_hi}; results are
/// bit-identical for a given seed regardless of `threads`.
inline BootstrapCI bootstrap_ci(const CorrectnessMatrix& m, const Statistic& statistic, std::size_t replicates = 10000,
                                std::uint64_t seed = 42, double level = 0.95, unsigned threads = 1) {
    if (m.empty()) throw EmptyMatrix();
    if (replicates == 0) throw Error("bootstrap needs at least one replicate");
    const std::size_t n = m.size();
    std::vector<detail::RowCode> rows(n);
    std::array<long long, 3> acc0{};
    long long inv0 = 0, cons0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t bits = 0;
        for (std::size_t r = 0; r < 3; ++r) {
            if (m.correct[i][r]) bits |= static_cast<std::uint8_t>(1u << r);
            acc0[r] += m.correct[i][r];
        }
        rows[i] = {bits, static_cast<bool>(m.same_answer_all3[i])};
        inv0 += bits == 7;
        cons0 += rows[i].same;
    }

    std::vector<double> values(replicates);
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(std::uint64_t{j} >> 32)};
            std::mt19937_64 gen(seq);
            std::array<long long, 3> acc{};
            long long inv = 0, cons = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const auto& row = rows[detail::bounded(gen, n)];
                acc[0] += row.correct_bits & 1;
                acc[1] += (row.correct_bits >> 1) & 1;
                acc[2] += (row.correct_bits >> 2) & 1;
                inv += row.correct_bits == 7;
                cons += row.same;
            }
            values[j] = detail::evaluate(statistic, acc, inv, cons, static_cast<long long>(n));
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(replicates)));
    if (workers == 1) {
        run_range(0, replicates);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (replicates + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk, end = std::min(replicates, begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
    }
    std::sort(values.begin(), values.end());
    const double alpha = (1.0 - level) / 2.0;
    BootstrapCI ci;
    ci.statistic = statistic.name();
    ci.point = detail::evaluate(statistic, acc0, inv0, cons0, static_cast<long long>(n));
    ci.lo = detail::quantile_sorted(values, alpha);
    ci.hi = detail::quantile_sorted(values, 1.0 - alpha);
    ci.replicates = replicates;
    ci.seed = seed;
    ci.level = level;
    return ci;
}

// ─── Surface features ─────────────────────────────────────────────────────

// Tokens are maximal runs of non-whitespace bytes (space, \t, \n, \r, \f, \v).
// A token is symbolic when it contains any ASCII character from
// kSymbolicAscii or any UTF-8 sequence from kSymbolicUtf8.
inline constexpr std::string_view kSymbolicAscii = "=+-*/^<>()[]{}|_\\";
inline constexpr std::array<std::string_view, 16> kSymbolicUtf8 = {
    "\xC2\xB7" /* · */,     "\xC3\x97" /* × */,     "\xC3\xB7" /* ÷ */,     "\xE2\x88\x9A" /* √ */,
    "\xCF\x80" /* π */,     "\xC2\xB0" /* ° */,     "\xE2\x88\xA0" /* ∠ */, "\xE2\x8A\xA5" /* ⊥ */,
    "\xE2\x88\xA5" /* ∥ */, "\xE2\x86\x92" /* → */, "\xE2\x89\xA4" /* ≤ */, "\xE2\x89\xA5" /* ≥ */,
    "\xE2\x89\xA0" /* ≠ */, "\xE2\x8B\x85" /* ⋅ */, "\xCC\x82" /* combining hat */, "\xE2\x83\x97" /* combining arrow */};

struct SurfaceFeatures {
    long long token_length = 0;
    long long symbolic_tokens = 0;
    double symbolic_density = 0.0;
    bool degenerate = false;  // no tokens
};

inline bool is_symbolic_token(std::string_view token) {
    if (token.find_first_of(kSymbolicAscii) != std::string_view::npos) return true;
    return std::any_of(kSymbolicUtf8.begin(), kSymbolicUtf8.end(),
                       [&](std::string_view s) { return token.find(s) != std::string_view::npos; });
}

inline SurfaceFeatures surface_features(std::string_view body) {
    constexpr std::string_view kSpace = " \t\n\r\f\v";
    SurfaceFeatures f;
    std::size_t pos = body.find_first_not_of(kSpace);
    while (pos != std::string_view::npos) {
        const std::size_t end = body.find_first_of(kSpace, pos);
        const std::string_view token = body.substr(pos, end == std::string_view::npos ? end : end - pos);
        ++f.token_length;
        f.symbolic_tokens += is_symbolic_token(token);
        pos = end == std::string_view::npos ? end : body.find_first_not_of(kSpace, end);
    }
    f.degenerate = f.token_length == 0;
    f.symbolic_density = f.degenerate ? 0.0 : static_cast<double>(f.symbolic_tokens) / static_cast<double>(f.token_length);
    return f;
}

// ─── Logistic regression (IRLS) ───────────────────────────────────────────

struct LogisticOptions {
    double ridge = 1e-8;
    double tolerance = 1e-8;  // max absolute coefficient update
    int max_iterations = 100;
    double separation_bound = 30.0;  // |coefficient| beyond this signals divergence
    bool throw_on_separation = true;
};

struct LogisticFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd wald_p;
    bool converged = false;
    int iterations = 0;
    bool separation_flag = false;
    double log_likelihood = 0.0;
    std::vector<double> log_likelihood_trace;  // after each iteration, starting at the zero vector
    double gradient_norm = 0.0;                // max |dLL/dbeta| at the returned coefficients
    // Standardization applied to the two surface features (token length,
    // symbolic density); empty for raw design-matrix fits.
    std::vector<double> feature_mean;
    std::vector<double> feature_sd;
};

inline double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta[i];
        // log(1 + exp(e)) without overflow
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y[i] * e - softplus;
    }
    return ll;
}

inline Eigen::VectorXd log_likelihood_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = y[i] - 1.0 / (1.0 + std::exp(-eta[i]));
    return x.transpose() * resid;
}

/// Maximum-likelihood fit on a raw design matrix (include an intercept
/// column yourself). Newton/IRLS steps with step halving, so the
/// log-likelihood never decreases between iterations.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> names,
                                const LogisticOptions& options = {}) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (n == 0 || p == 0) throw Error("empty design matrix");
    if (y.size() != n) throw Error("label count does not match design rows");
    if (names.size() != static_cast<std::size_t>(p)) names.resize(static_cast<std::size_t>(p));

    const double positives = y.sum();
    if (positives <= 0.0 || positives >= static_cast<double>(n)) {
        if (options.throw_on_separation) throw SeparationDetected("all labels identical; no finite MLE exists");
        LogisticFit fit;
        fit.names = std::move(names);
        fit.separation_flag = true;
        return fit;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw RankDeficient("design matrix has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p));

    LogisticFit fit;
    fit.names = std::move(names);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = log_likelihood(x, y, beta);
    fit.log_likelihood_trace.push_back(ll);

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        const Eigen::VectorXd eta = x * beta;
        Eigen::VectorXd w(n), resid(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = 1.0 / (1.0 + std::exp(-eta[i]));
            w[i] = mu * (1.0 - mu);
            resid[i] = y[i] - mu;
        }
        Eigen::MatrixXd hessian = x.transpose() * w.asDiagonal() * x;
        hessian.diagonal().array() += options.ridge;
        const Eigen::VectorXd step = hessian.ldlt().solve(x.transpose() * resid);

        double t = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double candidate_ll = log_likelihood(x, y, candidate);
        for (int halving = 0; halving < 40 && candidate_ll < ll; ++halving) {
            t *= 0.5;
            candidate = beta + t * step;
            candidate_ll = log_likelihood(x, y, candidate);
        }
        if (candidate_ll < ll) {  // no ascent direction left
            fit.iterations = iter;
            fit.converged = true;
            break;
        }
        const double change = (t * step).cwiseAbs().maxCoeff();
        beta = candidate;
        ll = candidate_ll;
        fit.log_likelihood_trace.push_back(ll);
        fit.iterations = iter;

        if (beta.cwiseAbs().maxCoeff() > options.separation_bound) {
            fit.separation_flag = true;
            break;
        }
        if (change < options.tolerance) {
            fit.converged = true;
            break;
        }
    }

    if (fit.separation_flag) {
        if (options.throw_on_separation)
            throw SeparationDetected("coefficients diverge (|beta| > " + std::to_string(options.separation_bound) + ")");
        fit.coefficients = beta;
        fit.log_likelihood = ll;
        return fit;
    }

    fit.coefficients = beta;
    fit.log_likelihood = ll;
    fit.gradient_norm = log_likelihood_gradient(x, y, beta).cwiseAbs().maxCoeff();
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = 1.0 / (1.0 + std::exp(-eta[i]));
        w[i] = mu * (1.0 - mu);
    }
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.wald_p.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double z = fit.standard_errors[j] > 0 ? beta[j] / fit.standard_errors[j] : 0.0;
        fit.wald_p[j] = std::clamp(std::erfc(std::fabs(z) / std::sqrt(2.0)), 0.0, 1.0);
    }
    return fit;
}

struct RegressionRow {
    SurfaceFeatures features;
    Representation rep = Representation::Euclidean;
    bool correct = false;
};

inline const std::vector<std::string>& regression_columns() {
    static const std::vector<std::string> kNames = {"intercept", "token_length", "symbolic_density", "rep_coordinate",
                                                    "rep_vector"};
    return kNames;
}

/// Correctness ~ intercept + z(token_length) + z(symbolic_density)
///               + 1[Coordinate] + 1[Vector]     (Euclidean baseline)
/// Surface features are standardized with the sample mean and standard
/// deviation; the transform is returned with the fit.
inline LogisticFit logistic_fit(const std::vector<RegressionRow>& rows, const LogisticOptions& options = {}) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n < 2) throw RankDeficient("need at least two rows");
    std::array<double, 2> mean{}, sd{};
    auto raw = [](const RegressionRow& r, std::size_t k) {
        return k == 0 ? static_cast<double>(r.features.token_length) : r.features.symbolic_density;
    };
    for (std::size_t k = 0; k < 2; ++k) {
        double s = 0.0;
        for (const auto& r : rows) s += raw(r, k);
        mean[k] = s / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : rows) ss += (raw(r, k) - mean[k]) * (raw(r, k) - mean[k]);
        sd[k] = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd[k] > 0.0)) throw RankDeficient(regression_columns()[k + 1] + " is constant");
    }
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = (raw(r, 0) - mean[0]) / sd[0];
        x(i, 2) = (raw(r, 1) - mean[1]) / sd[1];
        x(i, 3) = r.rep == Representation::Coordinate ? 1.0 : 0.0;
        x(i, 4) = r.rep == Representation::Vector ? 1.0 : 0.0;
        y[i] = r.correct ? 1.0 : 0.0;
    }
    LogisticFit fit = fit_logistic(x, y, regression_columns(), options);
    fit.feature_mean = {mean[0], mean[1]};
    fit.feature_sd = {sd[0], sd[1]};
    return fit;
}

}  // namespace georep::stats
