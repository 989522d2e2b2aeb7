#pragma once
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/mixture.hpp"
#include "mct/numeric.hpp"
#include "mct/ot.hpp"
#include "mct/random.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mct {

namespace detail {

inline void check_coefficients(const Vector& coefficients, std::size_t count)
{
    if (static_cast<std::size_t>(coefficients.size()) != count)
        throw std::invalid_argument("one coefficient per input mixture is required");
    if (!coefficients.allFinite() || coefficients.minCoeff() < 0.0 || !(coefficients.sum() > 0.0))
        throw std::invalid_argument("coefficients must be nonnegative with positive total");
}

} // namespace detail

/// sum_j a_j min_{pi in Pi(omega_j, w)} <pi, gamma_j> - lambda H(pi), each
/// inner problem solved by Sinkhorn. Inputs with zero coefficient are skipped.
inline double barycenter_cost(const std::vector<Matrix>& costs, const std::vector<Vector>& source_weights,
                              const Vector& coefficients, const Vector& w, double lambda,
                              const SinkhornOptions& opts = {})
{
    double total = 0.0;
    for (std::size_t j = 0; j < costs.size(); ++j) {
        if (coefficients(static_cast<Eigen::Index>(j)) == 0.0) continue;
        total += coefficients(static_cast<Eigen::Index>(j))
               * sinkhorn(costs[j], source_weights[j], w, lambda, opts).regularized_value;
    }
    return total;
}

struct BarycenterWeightOptions
{
    double tol = 1e-10;
    int max_iter = 5000;
    SinkhornOptions sinkhorn;
};

/// Shared second marginal of the barycenter by iterative Bregman projections:
/// alternately fit every plan to its own row marginal, then replace all column
/// marginals by their coefficient-weighted geometric mean. The result is kept
/// only when it does not raise the barycenter cost over `current_w`.
inline Vector update_barycenter_weights(const std::vector<Matrix>& costs, const std::vector<Vector>& source_weights,
                                        const Vector& coefficients, double lambda, const Vector& current_w,
                                        const BarycenterWeightOptions& opts = {})
{
    if (!(lambda > 0.0)) throw std::invalid_argument("barycenter weights need lambda > 0");
    if (costs.empty() || costs.size() != source_weights.size())
        throw std::invalid_argument("barycenter weights: costs and source weights differ in count");
    detail::check_coefficients(coefficients, costs.size());
    const Eigen::Index L = costs.front().cols();
    if (current_w.size() != L) throw std::invalid_argument("barycenter weights: current_w has wrong length");
    for (std::size_t j = 0; j < costs.size(); ++j)
        if (costs[j].cols() != L || costs[j].rows() != source_weights[j].size())
            throw std::invalid_argument("barycenter weights: inconsistent cost shape");
    if (L == 1) return Vector::Ones(1);

    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < costs.size(); ++j)
        if (coefficients(static_cast<Eigen::Index>(j)) > 0.0) active.push_back(j);
    const double total = coefficients.sum();

    std::vector<Matrix> kernels(costs.size());
    std::vector<Vector> u(costs.size()), v(costs.size()), log_rows(costs.size());
    for (std::size_t j : active) {
        kernels[j] = -costs[j] / lambda;
        u[j] = Vector::Zero(costs[j].rows());
        v[j] = Vector::Zero(L);
        log_rows[j] = detail::safe_log(source_weights[j]);
    }

    Vector log_w = Vector::Zero(L);
    for (int it = 0; it < opts.max_iter; ++it) {
        log_w.setZero();
        std::vector<Vector> log_cols(costs.size());
        for (std::size_t j : active) {
            u[j] = log_rows[j] - detail::row_lse(kernels[j], v[j]);
            log_cols[j] = detail::col_lse(kernels[j], u[j]) + v[j];
            log_w += (coefficients(static_cast<Eigen::Index>(j)) / total) * log_cols[j];
        }
        double err = 0.0;
        for (std::size_t j : active) {
            for (Eigen::Index l = 0; l < L; ++l) {
                const double target = std::exp(log_w(l));
                const double have = std::exp(log_cols[j](l));
                err = std::max(err, std::abs(target - have));
                if (std::isfinite(log_w(l)) && std::isfinite(log_cols[j](l))) v[j](l) += log_w(l) - log_cols[j](l);
            }
        }
        if (err < opts.tol) break;
    }

    Vector w = Vector(log_w.array().exp());
    if (!w.allFinite() || !(w.sum() > 0.0)) return current_w;
    w /= w.sum();

    SinkhornOptions eval = opts.sinkhorn;
    eval.require_convergence = false;
    const double before = barycenter_cost(costs, source_weights, coefficients, current_w, lambda, eval);
    const double after = barycenter_cost(costs, source_weights, coefficients, w, lambda, eval);
    return after <= before ? w : current_w;
}

/// Sinkhorn plan between each source weight vector and w.
inline std::vector<TransportPlan> update_partial_plans(const std::vector<Matrix>& costs,
                                                       const std::vector<Vector>& source_weights, const Vector& w,
                                                       double lambda, const SinkhornOptions& opts = {})
{
    std::vector<TransportPlan> plans;
    plans.reserve(costs.size());
    for (std::size_t j = 0; j < costs.size(); ++j)
        plans.push_back(sinkhorn(costs[j], source_weights[j], w, lambda, opts).plan);
    return plans;
}

/// psi_v = sum_j a_j sum_u pi^j_uv theta^j_u / sum_j a_j sum_u pi^j_uv, the
/// minimizer of sum_j a_j <pi^j, gamma^j> over the barycenter atoms. Columns
/// without mass keep the atom from `previous` when given.
inline std::vector<NaturalParam> update_barycenter_atoms(const FamilySpec& spec, const std::vector<TransportPlan>& plans,
                                                         const std::vector<std::vector<NaturalParam>>& source_atoms,
                                                         const Vector& coefficients,
                                                         const std::vector<NaturalParam>* previous = nullptr)
{
    if (plans.empty() || plans.size() != source_atoms.size())
        throw std::invalid_argument("barycenter atoms: plans and sources differ in count");
    detail::check_coefficients(coefficients, plans.size());
    const Eigen::Index L = plans.front().cols();
    std::vector<Vector> sums(static_cast<std::size_t>(L), Vector::Zero(spec.dim));
    Vector mass = Vector::Zero(L);
    for (std::size_t j = 0; j < plans.size(); ++j) {
        const double a = coefficients(static_cast<Eigen::Index>(j));
        if (a == 0.0) continue;
        const Matrix& p = plans[j].values;
        if (p.cols() != L || static_cast<std::size_t>(p.rows()) != source_atoms[j].size())
            throw std::invalid_argument("barycenter atoms: plan shape does not match its source");
        for (Eigen::Index u = 0; u < p.rows(); ++u)
            for (Eigen::Index l = 0; l < L; ++l) {
                const double weight = a * p(u, l);
                if (weight == 0.0) continue;
                sums[l] += weight * source_atoms[j][u];
                mass(l) += weight;
            }
    }
    std::vector<NaturalParam> atoms(static_cast<std::size_t>(L));
    for (Eigen::Index l = 0; l < L; ++l) {
        if (mass(l) > 0.0 && std::isfinite(mass(l))) {
            atoms[l] = gauge_fix(spec, sums[l] / mass(l));
        } else if (previous) {
            atoms[l] = (*previous)[l];
        } else {
            throw DataError("barycenter component " + std::to_string(l) + " has no mass");
        }
    }
    return atoms;
}

inline std::vector<Matrix> barycenter_costs(const std::vector<Mixture>& mixtures, const std::vector<NaturalParam>& atoms)
{
    std::vector<Matrix> costs;
    costs.reserve(mixtures.size());
    for (const auto& m : mixtures) costs.push_back(kl_cost_matrix(m.spec, m.atoms, atoms).values);
    return costs;
}

inline std::vector<Vector> mixture_weights(const std::vector<Mixture>& mixtures)
{
    std::vector<Vector> out;
    out.reserve(mixtures.size());
    for (const auto& m : mixtures) out.push_back(m.weights);
    return out;
}

/// sum_j a_j (min regularized transport between mixture j and the candidate).
inline double barycenter_objective(const std::vector<Mixture>& mixtures, const Vector& coefficients,
                                   const Mixture& candidate, double lambda, const SinkhornOptions& opts = {})
{
    if (mixtures.empty()) throw std::invalid_argument("barycenter objective needs at least one mixture");
    detail::check_coefficients(coefficients, mixtures.size());
    for (const auto& m : mixtures)
        if (!(m.spec == candidate.spec)) throw std::invalid_argument("barycenter objective: family mismatch");
    return barycenter_cost(barycenter_costs(mixtures, candidate.atoms), mixture_weights(mixtures), coefficients,
                           candidate.weights, lambda, opts);
}

struct BarycenterConfig
{
    int L = 2;
    double lambda = 1.0;
    Vector coefficients; // empty means uniform
    int max_iter = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;

    void validate(std::size_t count) const
    {
        if (L < 1) throw std::invalid_argument("L must be at least 1");
        if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
        if (max_iter < 0) throw std::invalid_argument("max_iter must be nonnegative");
        if (tol < 0.0) throw std::invalid_argument("tol must be nonnegative");
        if (coefficients.size() == 0) return;
        detail::check_coefficients(coefficients, count);
        if (std::abs(coefficients.sum() - 1.0) > 1e-9) throw std::invalid_argument("coefficients must sum to 1");
    }
};

struct BarycenterFit
{
    Mixture barycenter;
    std::vector<TransportPlan> plans;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

/// L atoms drawn from the pooled distinct input atoms (with repetition only
/// when fewer than L distinct atoms exist).
inline std::vector<NaturalParam> sample_pooled_atoms(const std::vector<Mixture>& mixtures, int L, Rng& rng)
{
    std::vector<NaturalParam> pool;
    for (const auto& m : mixtures)
        for (const auto& a : m.atoms) {
            bool seen = false;
            for (const auto& p : pool)
                if (p == a) {
                    seen = true;
                    break;
                }
            if (!seen) pool.push_back(a);
        }
    const auto order = rng.sample_without_replacement(pool.size(), pool.size());
    std::vector<NaturalParam> atoms;
    for (int l = 0; l < L; ++l) atoms.push_back(pool[order[static_cast<std::size_t>(l) % order.size()]]);
    return atoms;
}

/// Regularized composite transportation barycenter: alternates the weight
/// update, the Sinkhorn plans and the atom averaging. trace[0] is the
/// objective at the initial candidate.
inline BarycenterFit fit_barycenter(const std::vector<Mixture>& mixtures, const FamilySpec& spec,
                                    const BarycenterConfig& config, const std::vector<NaturalParam>* initial_atoms = nullptr)
{
    if (mixtures.empty()) throw std::invalid_argument("barycenter needs at least one mixture");
    config.validate(mixtures.size());
    for (const auto& m : mixtures) {
        if (!(m.spec == spec)) throw std::invalid_argument("barycenter inputs must share the family");
        m.validate();
    }
    const auto J = static_cast<Eigen::Index>(mixtures.size());
    const Vector coefficients
        = config.coefficients.size() ? config.coefficients : Vector::Constant(J, 1.0 / static_cast<double>(J));

    Rng rng(config.seed);
    std::vector<NaturalParam> atoms;
    if (initial_atoms) {
        if (initial_atoms->size() != static_cast<std::size_t>(config.L))
            throw std::invalid_argument("initial barycenter atoms must number L");
        atoms = *initial_atoms;
    } else {
        atoms = sample_pooled_atoms(mixtures, config.L, rng);
    }
    Vector w = Vector::Constant(config.L, 1.0 / config.L);
    const std::vector<Vector> sources = mixture_weights(mixtures);
    std::vector<std::vector<NaturalParam>> source_atoms;
    for (const auto& m : mixtures) source_atoms.push_back(m.atoms);

    BarycenterFit fit;
    std::vector<Matrix> costs = barycenter_costs(mixtures, atoms);
    double current = barycenter_cost(costs, sources, coefficients, w, config.lambda);
    fit.trace.push_back(current);
    for (int it = 0; it < config.max_iter; ++it) {
        w = update_barycenter_weights(costs, sources, coefficients, config.lambda, w);
        const auto plans = update_partial_plans(costs, sources, w, config.lambda);
        atoms = update_barycenter_atoms(spec, plans, source_atoms, coefficients, &atoms);
        costs = barycenter_costs(mixtures, atoms);
        const double value = barycenter_cost(costs, sources, coefficients, w, config.lambda);
        fit.trace.push_back(value);
        fit.iterations = it + 1;
        const bool done = detail::relative_change_below(current, value, config.tol);
        current = value;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.plans = update_partial_plans(costs, sources, w, config.lambda);
    fit.barycenter = Mixture{spec, w, std::move(atoms)};
    return fit;
}

} // namespace mct
