#pragma once
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

namespace mct {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Numerically stable log(sum(exp(x))). Returns -inf for an empty range or
/// when every entry is -inf.
template <class Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& x)
{
    if (x.size() == 0) return kNegInf;
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.derived().array() - m).exp().sum());
}

template <class Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& x)
{
    const double lse = log_sum_exp(x);
    return (x.derived().array() - lse).exp().matrix();
}

// x log x with the 0 log 0 = 0 convention
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

template <class Derived>
double neg_entropy(const Eigen::DenseBase<Derived>& x)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) s += xlogx(x(i, j));
    return s;
}

/// Runs fn(i) for i in [0, n) over up to `threads` workers. Work is split
/// into contiguous chunks; callers write results into per-index slots so the
/// outcome does not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace mct
