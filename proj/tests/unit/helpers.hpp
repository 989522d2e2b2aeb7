#pragma once
// Shared fixtures and independent reference computations for the unit tests.
#include "mct/mct.hpp"

#include <cmath>
#include <vector>

namespace mct::testing {

inline bool non_increasing(const std::vector<double>& trace)
{
    for (std::size_t t = 1; t < trace.size(); ++t)
        if (trace[t] > trace[t - 1] + 1e-8 * std::abs(trace[t - 1]) + 1e-12) return false;
    return true;
}

// Direct discrete KL(p || q).
inline double kl_direct(const Vector& p, const Vector& q)
{
    double kl = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p(k) > 0.0) kl += p(k) * std::log(p(k) / q(k));
    return kl;
}

inline Vector probs(std::initializer_list<double> p)
{
    Vector v(static_cast<Eigen::Index>(p.size()));
    Eigen::Index i = 0;
    for (double x : p) v(i++) = x;
    return v;
}

inline NaturalParam log_probs(const Vector& p) { return p.array().log().matrix(); }

inline Vector random_simplex(Rng& rng, Eigen::Index n)
{
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 0.05 + rng.uniform();
    return v / v.sum();
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform();
    return m;
}

// Regularized 2x2 optimum by golden-section search over the one free entry.
inline double regularized_2x2(const Matrix& M, const Vector& r, const Vector& c, double lambda)
{
    const double lo0 = std::max(0.0, r(0) + c(0) - 1.0), hi0 = std::min(r(0), c(0));
    auto f = [&](double t) {
        const double p[4] = {t, r(0) - t, c(0) - t, 1.0 - r(0) - c(0) + t};
        const double m[4] = {M(0, 0), M(0, 1), M(1, 0), M(1, 1)};
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += p[k] * m[k] + lambda * (p[k] > 0.0 ? p[k] * std::log(p[k]) : 0.0);
        return v;
    };
    double lo = lo0, hi = hi0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (f(a) < f(b)) hi = b;
        else lo = a;
    }
    return f(0.5 * (lo + hi));
}

inline GroupedDataset small_continuous(std::uint64_t seed, int J = 12, int n = 60, int C = 3)
{
    GeneratorConfig g = GeneratorConfig::continuous_defaults();
    g.J = J;
    g.n_per_group = n;
    g.C_true = C;
    g.seed = seed;
    return generate(g);
}

inline GroupedDataset small_bars(std::uint64_t seed, int J = 20, int n = 50, int C = 5)
{
    GeneratorConfig g = GeneratorConfig::bars_defaults();
    g.J = J;
    g.n_per_group = n;
    g.C_true = C;
    g.seed = seed;
    return generate(g);
}

} // namespace mct::testing
