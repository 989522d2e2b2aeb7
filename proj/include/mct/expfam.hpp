#pragma once
#include "mct/numeric.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mct {

enum class Family { Gaussian, Categorical };

/// Exponential family f(x|theta) = h(x) exp(<T(x), theta> - A(theta)).
///
/// Gaussian: isotropic N(mu, sigma2 I) with fixed variance, natural parameter
/// eta = mu / sigma2, T(x) = x, A(eta) = sigma2 |eta|^2 / 2.
///
/// Categorical: overcomplete softmax parameterization over V outcomes,
/// T(x) = one-hot(x), A(theta) = logsumexp(theta). The additive gauge is
/// fixed by requiring logsumexp(theta) == 0, so theta is the log of the
/// probability vector.
struct FamilySpec
{
    Family family = Family::Gaussian;
    int dim = 1;
    double sigma2 = 1.0;

    static FamilySpec gaussian(int dim, double sigma2 = 1.0)
    {
        FamilySpec s{Family::Gaussian, dim, sigma2};
        s.validate();
        return s;
    }

    static FamilySpec categorical(int num_categories)
    {
        FamilySpec s{Family::Categorical, num_categories, 1.0};
        s.validate();
        return s;
    }

    void validate() const
    {
        if (family == Family::Gaussian) {
            if (dim < 1) throw std::invalid_argument("gaussian family needs dim >= 1");
            if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
                throw std::invalid_argument("gaussian family needs sigma2 > 0");
        } else {
            if (dim < 2) throw std::invalid_argument("categorical family needs at least 2 categories");
        }
    }

    bool is_gaussian() const { return family == Family::Gaussian; }
    bool is_categorical() const { return family == Family::Categorical; }

    friend bool operator==(const FamilySpec& a, const FamilySpec& b)
    {
        if (a.family != b.family || a.dim != b.dim) return false;
        return a.family == Family::Categorical || a.sigma2 == b.sigma2;
    }
};

using NaturalParam = Vector;

/// Lower clamp applied to categorical means before taking logs.
inline constexpr double kCategoricalSmoothing = 1e-10;

/// A single observation: a point in R^d or a category index.
struct Observation
{
    Vector point;
    int category = -1;

    static Observation continuous(Vector x) { return {std::move(x), -1}; }
    static Observation discrete(int k) { return {Vector(), k}; }
};

/// The observations of one group, stored column-compact: an n x d matrix for
/// Gaussian data or a list of category indices for categorical data.
struct Sample
{
    Matrix points;
    std::vector<int> categories;

    static Sample continuous(Matrix pts) { return {std::move(pts), {}}; }
    static Sample discrete(std::vector<int> cats) { return {Matrix(), std::move(cats)}; }

    bool is_discrete() const { return points.size() == 0 && !categories.empty(); }
    std::size_t size() const { return is_discrete() ? categories.size() : static_cast<std::size_t>(points.rows()); }

    Observation at(std::size_t i) const
    {
        if (is_discrete()) return Observation::discrete(categories[i]);
        return Observation::continuous(points.row(static_cast<Eigen::Index>(i)).transpose());
    }

    friend bool operator==(const Sample& a, const Sample& b)
    {
        return a.categories == b.categories && a.points.rows() == b.points.rows()
            && a.points.cols() == b.points.cols() && a.points == b.points;
    }
};

namespace detail {

inline void check_dim(const FamilySpec& spec, const Vector& v, const char* what)
{
    if (v.size() != spec.dim)
        throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(spec.dim)
                                    + ", got " + std::to_string(v.size()));
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

inline void check_observation(const FamilySpec& spec, const Observation& x)
{
    if (spec.is_categorical()) {
        if (x.category < 0 || x.category >= spec.dim)
            throw std::out_of_range("category index " + std::to_string(x.category) + " outside [0, "
                                    + std::to_string(spec.dim) + ")");
    } else {
        check_dim(spec, x.point, "observation");
    }
}

} // namespace detail

inline double log_partition(const FamilySpec& spec, const NaturalParam& theta)
{
    detail::check_dim(spec, theta, "natural parameter");
    if (spec.is_gaussian()) return 0.5 * spec.sigma2 * theta.squaredNorm();
    return log_sum_exp(theta);
}

/// Mean parameter E[T(x)] = grad A(theta).
inline Vector grad_log_partition(const FamilySpec& spec, const NaturalParam& theta)
{
    detail::check_dim(spec, theta, "natural parameter");
    if (spec.is_gaussian()) return spec.sigma2 * theta;
    return softmax(theta);
}

/// Removes the categorical gauge freedom (shift so logsumexp == 0).
inline NaturalParam gauge_fix(const FamilySpec& spec, NaturalParam theta)
{
    if (spec.is_categorical()) theta.array() -= log_sum_exp(theta);
    return theta;
}

inline bool is_gauge_fixed(const FamilySpec& spec, const NaturalParam& theta, double tol = 1e-9)
{
    return !spec.is_categorical() || std::abs(log_sum_exp(theta)) <= tol;
}

/// Inverts grad A. Categorical means are clamped below at
/// kCategoricalSmoothing and renormalized before the log.
inline NaturalParam mean_to_natural(const FamilySpec& spec, const Vector& mean)
{
    detail::check_dim(spec, mean, "mean parameter");
    if (spec.is_gaussian()) return mean / spec.sigma2;

    constexpr double simplex_tol = 1e-8;
    if (mean.minCoeff() < -simplex_tol || std::abs(mean.sum() - 1.0) > simplex_tol)
        throw std::invalid_argument("categorical mean is not on the probability simplex");
    Vector p = mean.cwiseMax(kCategoricalSmoothing);
    p /= p.sum();
    return gauge_fix(spec, p.array().log().matrix());
}

inline Vector sufficient_statistic(const FamilySpec& spec, const Observation& x)
{
    detail::check_observation(spec, x);
    if (spec.is_gaussian()) return x.point;
    Vector t = Vector::Zero(spec.dim);
    t(x.category) = 1.0;
    return t;
}

/// log f(x|theta), including the base measure.
inline double log_density(const FamilySpec& spec, const Observation& x, const NaturalParam& theta)
{
    detail::check_observation(spec, x);
    detail::check_dim(spec, theta, "natural parameter");
    if (spec.is_categorical()) return theta(x.category) - log_sum_exp(theta);
    const double d = static_cast<double>(spec.dim);
    const Vector mu = spec.sigma2 * theta;
    return -0.5 * d * std::log(2.0 * std::numbers::pi * spec.sigma2)
         - (x.point - mu).squaredNorm() / (2.0 * spec.sigma2);
}

/// D_A(theta, theta') = A(theta) - A(theta') - <grad A(theta'), theta - theta'>,
/// which equals KL(f(.|theta') || f(.|theta)). Evaluated in the cancellation
/// free closed form of each family and clamped at zero.
inline double bregman_divergence(const FamilySpec& spec, const NaturalParam& theta, const NaturalParam& theta_prime)
{
    detail::check_dim(spec, theta, "natural parameter");
    detail::check_dim(spec, theta_prime, "natural parameter");
    if (spec.is_gaussian()) return 0.5 * spec.sigma2 * (theta - theta_prime).squaredNorm();

    const double lse = log_sum_exp(theta);
    const double lse_prime = log_sum_exp(theta_prime);
    double kl = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double log_p_prime = theta_prime(k) - lse_prime;
        const double log_p = theta(k) - lse;
        kl += std::exp(log_p_prime) * (log_p_prime - log_p);
    }
    return std::max(kl, 0.0);
}

} // namespace mct
