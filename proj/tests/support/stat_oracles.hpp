#pragma once

// Reference procedures for the statistics tests: synthetic data with known
// parameters, brute-force likelihood search and numerical derivatives.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "georep/matrix.hpp"
#include "georep/stats.hpp"

namespace georep::testgen {

// N rows, each cell an independent Bernoulli(p).
inline CorrectnessMatrix bernoulli_matrix(std::mt19937_64& rng, std::size_t n, double p) {
    std::bernoulli_distribution cell(p);
    std::vector<RepTriple> rows(n);
    for (auto& r : rows) r = {cell(rng), cell(rng), cell(rng)};
    return CorrectnessMatrix::from_rows(rows);
}

// Rows whose labels follow a logistic model in the standardized features.
// The sample mean and deviation are fixed before labels are drawn, so the
// generating coefficients are exactly the ones logistic_fit estimates.
inline std::vector<stats::RegressionRow> synthetic_regression(std::mt19937_64& rng, std::size_t n,
                                                              const std::array<double, 5>& beta) {
    std::normal_distribution<double> len(60.0, 15.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<stats::RegressionRow> rows(n);
    for (auto& r : rows) {
        r.features.token_length = std::max<long long>(1, std::llround(len(rng)));
        r.features.symbolic_tokens = 0;
        r.features.symbolic_density = unit(rng) * 0.6;
        r.rep = kRepresentations[static_cast<std::size_t>(unit(rng) * 3.0) % 3];
    }
    double mean[2] = {0, 0}, sd[2] = {0, 0};
    auto raw = [](const stats::RegressionRow& r, int k) {
        return k == 0 ? static_cast<double>(r.features.token_length) : r.features.symbolic_density;
    };
    for (int k = 0; k < 2; ++k) {
        for (const auto& r : rows) mean[k] += raw(r, k);
        mean[k] /= static_cast<double>(n);
        for (const auto& r : rows) sd[k] += (raw(r, k) - mean[k]) * (raw(r, k) - mean[k]);
        sd[k] = std::sqrt(sd[k] / static_cast<double>(n - 1));
    }
    for (auto& r : rows) {
        const double eta = beta[0] + beta[1] * (raw(r, 0) - mean[0]) / sd[0] + beta[2] * (raw(r, 1) - mean[1]) / sd[1] +
                           beta[3] * (r.rep == Representation::Coordinate) + beta[4] * (r.rep == Representation::Vector);
        r.correct = unit(rng) < 1.0 / (1.0 + std::exp(-eta));
    }
    return rows;
}

// Two-feature toy problem without an intercept, overlapping classes.
struct Toy {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

inline Toy logistic_toy(std::mt19937_64& rng, Eigen::Index n = 40) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Toy t{Eigen::MatrixXd(n, 2), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        t.x(i, 0) = z(rng);
        t.x(i, 1) = z(rng);
        const double eta = 1.2 * t.x(i, 0) - 0.7 * t.x(i, 1);
        t.y[i] = unit(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    return t;
}

// Log-likelihood evaluated and summed in extended precision, so that
// central differences are not swamped by rounding on large samples.
inline long double log_likelihood_ld(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        long double eta = 0.0L;
        for (Eigen::Index j = 0; j < x.cols(); ++j) eta += static_cast<long double>(x(i, j)) * beta[j];
        // y*eta - log(1 + e^eta), written to avoid overflow
        const long double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        total += static_cast<long double>(y[i]) * eta - softplus;
    }
    return total;
}

// Best log-likelihood over a square grid [-bound, bound]^2.
inline double grid_best_log_likelihood(const Toy& t, double step = 0.01, double bound = 5.0) {
    const int steps = static_cast<int>(std::lround(2.0 * bound / step));
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta(2);
    for (int a = 0; a <= steps; ++a) {
        beta[0] = -bound + step * a;
        for (int b = 0; b <= steps; ++b) {
            beta[1] = -bound + step * b;
            best = std::max(best, static_cast<double>(log_likelihood_ld(t.x, t.y, beta)));
        }
    }
    return best;
}

// Central differences of the log-likelihood.
inline Eigen::VectorXd numeric_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                        double h = 1e-5) {
    Eigen::VectorXd g(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Eigen::VectorXd up = beta, down = beta;
        up[j] += h;
        down[j] -= h;
        g[j] = static_cast<double>((log_likelihood_ld(x, y, up) - log_likelihood_ld(x, y, down)) / (up[j] - down[j]));
    }
    return g;
}

// Design matrix as logistic_fit builds it from regression rows.
inline Eigen::MatrixXd standardized_design(const std::vector<stats::RegressionRow>& rows, const stats::LogisticFit& fit) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 5);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = (static_cast<double>(r.features.token_length) - fit.feature_mean[0]) / fit.feature_sd[0];
        x(i, 2) = (r.features.symbolic_density - fit.feature_mean[1]) / fit.feature_sd[1];
        x(i, 3) = r.rep == Representation::Coordinate;
        x(i, 4) = r.rep == Representation::Vector;
    }
    return x;
}

inline Eigen::VectorXd labels(const std::vector<stats::RegressionRow>& rows) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rows[static_cast<std::size_t>(i)].correct;
    return y;
}

}  // namespace georep::testgen
