#pragma once
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace mct {

/// Counts of co-occurring (label, prediction) pairs with compacted indices.
struct ContingencyTable
{
    std::vector<std::vector<long long>> counts; // [label][prediction]
    std::vector<long long> row_sums;
    std::vector<long long> col_sums;
    long long n = 0;

    static ContingencyTable build(const std::vector<int>& labels, const std::vector<int>& preds)
    {
        if (labels.size() != preds.size()) throw std::invalid_argument("labelings differ in length");
        if (labels.empty()) throw std::invalid_argument("labelings are empty");
        std::map<int, std::size_t> rows, cols;
        for (int l : labels) rows.emplace(l, rows.size());
        for (int p : preds) cols.emplace(p, cols.size());
        ContingencyTable t;
        t.counts.assign(rows.size(), std::vector<long long>(cols.size(), 0));
        t.row_sums.assign(rows.size(), 0);
        t.col_sums.assign(cols.size(), 0);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const std::size_t r = rows[labels[i]], c = cols[preds[i]];
            ++t.counts[r][c];
            ++t.row_sums[r];
            ++t.col_sums[c];
        }
        t.n = static_cast<long long>(labels.size());
        return t;
    }
};

namespace detail {

inline double partition_entropy(const std::vector<long long>& sizes, long long n)
{
    double h = 0.0;
    for (long long s : sizes)
        if (s > 0) {
            const double p = static_cast<double>(s) / static_cast<double>(n);
            h -= p * std::log(p);
        }
    return h;
}

inline double mutual_information(const ContingencyTable& t)
{
    const auto n = static_cast<double>(t.n);
    double mi = 0.0;
    for (std::size_t r = 0; r < t.counts.size(); ++r)
        for (std::size_t c = 0; c < t.counts[r].size(); ++c) {
            const auto nij = static_cast<double>(t.counts[r][c]);
            if (nij == 0.0) continue;
            mi += nij / n * std::log(n * nij / (static_cast<double>(t.row_sums[r]) * static_cast<double>(t.col_sums[c])));
        }
    return std::max(mi, 0.0);
}

inline double choose2(long long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

// E[MI] under the hypergeometric model of random labelings with fixed marginals.
inline double expected_mutual_information(const ContingencyTable& t)
{
    const long long n = t.n;
    const auto nd = static_cast<double>(n);
    const double lg_n = std::lgamma(nd + 1.0);
    double emi = 0.0;
    for (long long a : t.row_sums)
        for (long long b : t.col_sums) {
            const long long lo = std::max(1LL, a + b - n);
            const long long hi = std::min(a, b);
            const double base = std::lgamma(a + 1.0) + std::lgamma(b + 1.0) + std::lgamma(nd - a + 1.0)
                              + std::lgamma(nd - b + 1.0) - lg_n;
            for (long long k = lo; k <= hi; ++k) {
                const auto kd = static_cast<double>(k);
                const double log_p = base - std::lgamma(kd + 1.0) - std::lgamma(a - kd + 1.0)
                                   - std::lgamma(b - kd + 1.0) - std::lgamma(nd - a - b + kd + 1.0);
                emi += kd / nd * std::log(nd * kd / (static_cast<double>(a) * static_cast<double>(b))) * std::exp(log_p);
            }
        }
    return emi;
}

} // namespace detail

/// Normalized mutual information, MI / sqrt(H(labels) H(preds)). Two
/// single-cluster partitions score 1; a single-cluster partition against a
/// non-trivial one scores 0.
inline double nmi(const std::vector<int>& labels, const std::vector<int>& preds)
{
    const auto t = ContingencyTable::build(labels, preds);
    const double hl = detail::partition_entropy(t.row_sums, t.n);
    const double hp = detail::partition_entropy(t.col_sums, t.n);
    if (hl == 0.0 && hp == 0.0) return 1.0;
    if (hl == 0.0 || hp == 0.0) return 0.0;
    return std::clamp(detail::mutual_information(t) / std::sqrt(hl * hp), 0.0, 1.0);
}

/// Adjusted Rand index (Hubert and Arabie). When the expected and maximal
/// indices coincide the score is 1 for identical partitions and 0 otherwise.
inline double ari(const std::vector<int>& labels, const std::vector<int>& preds)
{
    if (labels.size() < 2) throw std::invalid_argument("ari needs at least two items");
    const auto t = ContingencyTable::build(labels, preds);
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& row : t.counts)
        for (long long c : row) index += detail::choose2(c);
    for (long long a : t.row_sums) sum_rows += detail::choose2(a);
    for (long long b : t.col_sums) sum_cols += detail::choose2(b);
    // (index - expected) / (max - expected) scaled by 2 C(n, 2) so that both
    // sides stay integer valued and only one rounding remains.
    const double pairs = detail::choose2(t.n);
    const double numerator = 2.0 * (index * pairs - sum_rows * sum_cols);
    const double denominator = (sum_rows + sum_cols) * pairs - 2.0 * sum_rows * sum_cols;
    if (denominator == 0.0) return index * 2.0 == sum_rows + sum_cols ? 1.0 : 0.0;
    return numerator / denominator;
}

/// Adjusted mutual information with arithmetic-mean normalization and the
/// exact hypergeometric expected mutual information. Degenerate denominators
/// follow the ari convention.
inline double ami(const std::vector<int>& labels, const std::vector<int>& preds)
{
    if (labels.size() < 2) throw std::invalid_argument("ami needs at least two items");
    const auto t = ContingencyTable::build(labels, preds);
    const double hl = detail::partition_entropy(t.row_sums, t.n);
    const double hp = detail::partition_entropy(t.col_sums, t.n);
    const double mi = detail::mutual_information(t);
    const double emi = detail::expected_mutual_information(t);
    const double denom = 0.5 * (hl + hp) - emi;
    if (std::abs(denom) < 1e-15) return std::abs(mi - 0.5 * (hl + hp)) < 1e-15 ? 1.0 : 0.0;
    return (mi - emi) / denom;
}

} // namespace mct
