#pragma once
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/numeric.hpp"
#include "mct/ot.hpp"
#include "mct/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mct {

/// M(i, j) = -log f(x_i | atoms[j]).
inline CostMatrix nll_cost_matrix(const FamilySpec& spec, const Sample& data, const std::vector<NaturalParam>& atoms)
{
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto k = static_cast<Eigen::Index>(atoms.size());
    for (const auto& a : atoms) detail::check_dim(spec, a, "atom");
    CostMatrix cost{Matrix(n, k), CostKind::NegLogLikelihood};

    if (spec.is_categorical()) {
        if (!data.is_discrete() && n > 0) throw std::invalid_argument("categorical family needs category data");
        for (Eigen::Index j = 0; j < k; ++j) {
            const double lse = log_sum_exp(atoms[j]);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int x = data.categories[i];
                if (x < 0 || x >= spec.dim) throw std::out_of_range("category index outside the family range");
                cost.values(i, j) = lse - atoms[j](x);
            }
        }
        return cost;
    }

    if (data.is_discrete() || data.points.cols() != spec.dim)
        throw std::invalid_argument("gaussian family needs points of dimension " + std::to_string(spec.dim));
    const double log_norm = 0.5 * spec.dim * std::log(2.0 * std::numbers::pi * spec.sigma2);
    for (Eigen::Index j = 0; j < k; ++j) {
        const Vector mu = spec.sigma2 * atoms[j];
        for (Eigen::Index i = 0; i < n; ++i)
            cost.values(i, j) = log_norm + (data.points.row(i).transpose() - mu).squaredNorm() / (2.0 * spec.sigma2);
    }
    return cost;
}

/// Sum_i plan(i, j) T(x_i) for every column j, one row per column.
inline Matrix weighted_statistics(const FamilySpec& spec, const Sample& data, const Matrix& plan)
{
    if (static_cast<std::size_t>(plan.rows()) != data.size())
        throw std::invalid_argument("plan rows do not match the sample size");
    if (spec.is_gaussian()) return plan.transpose() * data.points;
    Matrix stats = Matrix::Zero(plan.cols(), spec.dim);
    for (Eigen::Index i = 0; i < plan.rows(); ++i) stats.col(data.categories[i]) += plan.row(i).transpose();
    return stats;
}

struct PlanAndWeights
{
    TransportPlan plan;
    Vector weights;
};

/// Closed-form relaxed plan and the induced mixture weights (column sums).
inline PlanAndWeights update_plan_and_weights(const CostMatrix& cost, Eigen::Index n, double lambda)
{
    PlanAndWeights out{relaxed_row_plan(cost, n, lambda), Vector()};
    out.weights = out.plan.col_sums();
    return out;
}

inline constexpr double kEmptyWeight = 1e-8;

/// Atoms solving grad A(theta_j) = sum_i plan(i, j) T(x_i) / weights[j].
/// Columns whose mass is zero or whose average is not finite keep the atom
/// from `previous` when given; otherwise they are reported as DataError.
inline std::vector<NaturalParam> update_atoms(const FamilySpec& spec, const Sample& data, const TransportPlan& plan,
                                              const Vector& weights,
                                              const std::vector<NaturalParam>* previous = nullptr)
{
    const Matrix stats = weighted_statistics(spec, data, plan.values);
    std::vector<NaturalParam> atoms(static_cast<std::size_t>(plan.cols()));
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
        const Vector mean = stats.row(j).transpose() / weights(j);
        if (weights(j) > 0.0 && mean.allFinite()) {
            atoms[j] = mean_to_natural(spec, spec.is_categorical() ? Vector(mean / mean.sum()) : mean);
        } else if (previous) {
            atoms[j] = (*previous)[j];
        } else {
            throw DataError("mixture component " + std::to_string(j) + " has no mass");
        }
    }
    return atoms;
}

/// min over relaxed plans of <pi, M> - lambda H(pi), attained at the row-wise
/// softmax plan: -(lambda / n) sum_i lse_j(-M_ij / lambda) - lambda log n.
inline double relaxed_objective(const Matrix& cost, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("objective needs lambda > 0");
    const auto n = static_cast<double>(cost.rows());
    double total = 0.0;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) total += log_sum_exp(Vector(-cost.row(i).transpose() / lambda));
    return -lambda * total / n - lambda * std::log(n);
}

inline double mixture_objective(const Sample& data, const Mixture& mixture, double lambda)
{
    return relaxed_objective(nll_cost_matrix(mixture.spec, data, mixture.atoms).values, lambda);
}

enum class MixtureInit { RandomPoints, Provided };

struct MixtureFitConfig
{
    int K = 2;
    double lambda = 1.0;
    int max_iter = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    MixtureInit init = MixtureInit::RandomPoints;
    std::optional<Mixture> initial;
    bool reseed_empty = false;

    void validate() const
    {
        if (K < 1) throw std::invalid_argument("K must be at least 1");
        if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
        if (max_iter < 0) throw std::invalid_argument("max_iter must be nonnegative");
        if (tol < 0.0) throw std::invalid_argument("tol must be nonnegative");
        if (init == MixtureInit::Provided && !initial) throw std::invalid_argument("provided init needs a mixture");
    }
};

struct MixtureFit
{
    Mixture mixture;
    TransportPlan plan;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

/// Atom placed on observation i: the point itself as mean, or the smoothed
/// one-hot vector for categories.
inline NaturalParam atom_at_observation(const FamilySpec& spec, const Sample& data, std::size_t i)
{
    return mean_to_natural(spec, sufficient_statistic(spec, data.at(i)));
}

/// K atoms on distinct data points, preferring distinct observation values so
/// that no two atoms start identical. Repeats only when the sample has fewer
/// than K distinct values.
inline std::vector<NaturalParam> random_point_atoms(const FamilySpec& spec, const Sample& data, int K, Rng& rng)
{
    const std::size_t n = data.size();
    if (n == 0) throw DataError("cannot initialize a mixture from an empty sample");
    const auto order = rng.sample_without_replacement(n, n);
    std::vector<std::size_t> chosen, repeats;
    for (std::size_t idx : order) {
        if (chosen.size() == static_cast<std::size_t>(K)) break;
        bool duplicate = false;
        for (std::size_t c : chosen) {
            if (data.is_discrete() ? data.categories[c] == data.categories[idx]
                                   : data.points.row(c) == data.points.row(idx)) {
                duplicate = true;
                break;
            }
        }
        (duplicate ? repeats : chosen).push_back(idx);
    }
    for (std::size_t r = 0; chosen.size() < static_cast<std::size_t>(K); ++r) chosen.push_back(repeats.empty() ? order[r % n] : repeats[r % repeats.size()]);

    std::vector<NaturalParam> atoms;
    atoms.reserve(chosen.size());
    for (std::size_t idx : chosen) atoms.push_back(atom_at_observation(spec, data, idx));
    return atoms;
}

namespace detail {

inline bool relative_change_below(double previous, double current, double tol)
{
    return std::abs(previous - current) <= tol * std::max(std::abs(previous), 1e-300);
}

} // namespace detail

/// Minimizes the regularized transport distance between the empirical measure
/// and a K-component mixture by alternating the relaxed plan and atom updates.
/// trace[0] is the objective at initialization, then one value per iteration.
inline MixtureFit fit_mixture(const Sample& data, const FamilySpec& spec, const MixtureFitConfig& config)
{
    config.validate();
    spec.validate();
    const auto n = static_cast<Eigen::Index>(data.size());
    if (n == 0) throw DataError("cannot fit a mixture to an empty sample");

    Rng rng(config.seed);
    std::vector<NaturalParam> atoms;
    if (config.init == MixtureInit::Provided) {
        if (!(config.initial->spec == spec)) throw std::invalid_argument("provided mixture has a different family");
        atoms = config.initial->atoms;
        for (auto& a : atoms) a = gauge_fix(spec, a);
    } else {
        atoms = random_point_atoms(spec, data, config.K, rng);
    }

    MixtureFit fit;
    CostMatrix cost = nll_cost_matrix(spec, data, atoms);
    double current = relaxed_objective(cost.values, config.lambda);
    if (!std::isfinite(current)) throw DataError("mixture objective is not finite at initialization");
    fit.trace.push_back(current);

    for (int it = 0; it < config.max_iter; ++it) {
        const PlanAndWeights pw = update_plan_and_weights(cost, n, config.lambda);
        std::vector<NaturalParam> next = update_atoms(spec, data, pw.plan, pw.weights, &atoms);
        CostMatrix next_cost = nll_cost_matrix(spec, data, next);
        double value = relaxed_objective(next_cost.values, config.lambda);

        if (config.reseed_empty) {
            for (Eigen::Index j = 0; j < pw.weights.size(); ++j) {
                if (pw.weights(j) >= kEmptyWeight) continue;
                auto candidate = next;
                candidate[j] = atom_at_observation(spec, data, static_cast<std::size_t>(rng.below(data.size())));
                CostMatrix candidate_cost = nll_cost_matrix(spec, data, candidate);
                const double candidate_value = relaxed_objective(candidate_cost.values, config.lambda);
                if (candidate_value <= value) {
                    next = std::move(candidate);
                    next_cost = std::move(candidate_cost);
                    value = candidate_value;
                }
            }
        }
        if (!std::isfinite(value)) throw DataError("mixture objective became non-finite");

        atoms = std::move(next);
        cost = std::move(next_cost);
        fit.trace.push_back(value);
        fit.iterations = it + 1;
        const bool done = detail::relative_change_below(current, value, config.tol);
        current = value;
        if (done) {
            fit.converged = true;
            break;
        }
    }

    const PlanAndWeights final_pw = update_plan_and_weights(cost, n, config.lambda);
    fit.plan = final_pw.plan;
    fit.mixture = Mixture{spec, final_pw.weights / final_pw.weights.sum(), std::move(atoms)};
    return fit;
}

} // namespace mct
