#pragma once
#include "mct/barycenter.hpp"
#include "mct/dataset.hpp"
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/mixture.hpp"
#include "mct/numeric.hpp"
#include "mct/ot.hpp"
#include "mct/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mct {

struct MctConfig
{
    std::vector<int> K{2}; // one shared cap, or one per group
    int C = 2;
    int L = 2;
    double zeta = 1.0;
    double lambda_l = 1.0;
    double lambda_g = 1.0;
    std::optional<double> lambda_a; // defaults to lambda_g
    int max_iter = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    int local_warmup = 10; // single-mixture iterations per group before the joint descent
    int init_barycenter_iter = 20;
    int init_restarts = 8; // k-medoids restarts that seed the global clusters
    int threads = 1;

    double lambda_a_value() const { return lambda_a.value_or(lambda_g); }
    int K_for(std::size_t j) const { return K.size() == 1 ? K.front() : K.at(j); }

    void validate(std::size_t groups) const
    {
        if (K.empty() || (K.size() != 1 && K.size() != groups))
            throw std::invalid_argument("K must be one shared value or one value per group");
        for (int k : K)
            if (k < 1) throw std::invalid_argument("K must be at least 1");
        if (C < 1) throw std::invalid_argument("C must be at least 1");
        if (L < 1) throw std::invalid_argument("L must be at least 1");
        if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw std::invalid_argument("zeta must be >= 0");
        if (!(lambda_l > 0.0) || !(lambda_g > 0.0) || !(lambda_a_value() > 0.0))
            throw std::invalid_argument("all lambdas must be positive");
        if (max_iter < 0 || local_warmup < 0 || init_barycenter_iter < 0)
            throw std::invalid_argument("iteration counts must be nonnegative");
        if (init_restarts < 1) throw std::invalid_argument("init_restarts must be at least 1");
        if (tol < 0.0) throw std::invalid_argument("tol must be nonnegative");
        if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    }
};

/// State of the joint local/global descent.
///
/// local_plans[j] is the relaxed plan between group j's empirical measure and
/// locals[j] (locals[j].weights are its column sums). plan_a is the J x C
/// global plan with rows 1/J; b its column sums. partial_plans[j][m] couples
/// locals[j] with globals[m].
struct MctModel
{
    MctConfig config;
    FamilySpec spec;
    std::vector<Mixture> locals;
    std::vector<TransportPlan> local_plans;
    std::vector<Mixture> globals;
    TransportPlan plan_a;
    Vector b;
    std::vector<std::vector<TransportPlan>> partial_plans;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;

    std::size_t groups() const { return locals.size(); }
    std::size_t clusters() const { return globals.size(); }
};

struct MctObjectiveTerms
{
    double local = 0.0;             // sum_j <pi^j, M^j> - lambda_l H(pi^j)
    double global_transport = 0.0;  // sum_jm a_jm (<tau, gamma> - lambda_g H(tau))
    double assignment_entropy = 0.0; // H(a)
    double total = 0.0;             // local + zeta (global_transport - lambda_a H(a))
};

namespace detail {

inline SinkhornOptions inner_sinkhorn()
{
    SinkhornOptions opts;
    opts.require_convergence = false;
    return opts;
}

inline double regularized_cost(const TransportPlan& plan, const Matrix& cost, double lambda)
{
    return plan.values.cwiseProduct(cost).sum() + lambda * neg_entropy(plan.values);
}

inline double local_term(const FamilySpec& spec, const Sample& data, const Mixture& local, const TransportPlan& plan,
                         double lambda_l)
{
    return regularized_cost(plan, nll_cost_matrix(spec, data, local.atoms).values, lambda_l);
}

// zeta-free part of group j's global coupling: sum_m a_jm (<tau, gamma> - lambda_g H(tau)).
inline double coupling_term(const FamilySpec& spec, const Mixture& local, const std::vector<Mixture>& globals,
                            const std::vector<TransportPlan>& partial, const Vector& a_row, double lambda_g)
{
    double total = 0.0;
    for (std::size_t m = 0; m < globals.size(); ++m) {
        const double a = a_row(static_cast<Eigen::Index>(m));
        if (a == 0.0) continue;
        total += a * regularized_cost(partial[m], kl_cost_matrix(spec, local.atoms, globals[m].atoms).values, lambda_g);
    }
    return total;
}

} // namespace detail

/// Rows of a: a_j. = softmax(-cost_j. / lambda_a) / J; returns the plan with
/// free columns.
inline TransportPlan global_plan_from_costs(const Matrix& costs, double lambda_a)
{
    if (!(lambda_a > 0.0)) throw std::invalid_argument("lambda_a must be positive");
    return relaxed_row_plan(costs, costs.rows(), lambda_a);
}

/// Regularized transport cost <tau^{jm}, gamma^{jm}> - lambda_g H(tau^{jm}) for
/// every (group, cluster) pair at the stored plans.
inline Matrix pair_costs(const MctModel& model)
{
    const auto J = static_cast<Eigen::Index>(model.groups());
    const auto C = static_cast<Eigen::Index>(model.clusters());
    Matrix costs(J, C);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index m = 0; m < C; ++m)
            costs(j, m) = detail::regularized_cost(
                model.partial_plans[j][m],
                kl_cost_matrix(model.spec, model.locals[j].atoms, model.globals[m].atoms).values,
                model.config.lambda_g);
    return costs;
}

/// Exact minimizer of the objective over the global plan a given everything else.
inline void update_global_plan(MctModel& model)
{
    model.plan_a = global_plan_from_costs(pair_costs(model), model.config.lambda_a_value());
    model.b = model.plan_a.col_sums();
}

inline MctObjectiveTerms mct_objective_terms(const GroupedDataset& data, const MctModel& model)
{
    const auto& cfg = model.config;
    if (data.size() != model.groups()) throw DataError("model and dataset differ in group count");
    MctObjectiveTerms terms;
    for (std::size_t j = 0; j < model.groups(); ++j) {
        terms.local += detail::local_term(model.spec, data.groups[j].sample, model.locals[j], model.local_plans[j],
                                          cfg.lambda_l);
        terms.global_transport
            += detail::coupling_term(model.spec, model.locals[j], model.globals, model.partial_plans[j],
                                     model.plan_a.values.row(static_cast<Eigen::Index>(j)).transpose(), cfg.lambda_g);
    }
    terms.assignment_entropy = entropy(model.plan_a);
    terms.total = terms.local + cfg.zeta * (terms.global_transport - cfg.lambda_a_value() * terms.assignment_entropy);
    return terms;
}

/// Regularized objective at the model's stored plans.
inline double mct_objective(const GroupedDataset& data, const MctModel& model)
{
    return mct_objective_terms(data, model).total;
}

struct LocalState
{
    Mixture local;
    TransportPlan plan;
    std::vector<TransportPlan> partial;
};

namespace detail {

// Joint minimizer over (pi, tau^{j,.}) for fixed atoms of
//   lambda_l KL(pi | exp(-M / lambda_l)) + sum_m mu_m KL(tau^m | exp(-gamma^m / lambda_g))
// with rows of pi fixed to 1/n, columns of tau^m fixed to w^m and the columns of
// pi shared with the rows of every tau^m (mu_m = zeta a_jm lambda_g). Solved by
// cyclic Bregman projections; the shared marginal is the mu-weighted geometric
// mean of the current marginals. The pi block runs on scaling vectors over the
// row-stabilized kernel; the small tau blocks stay in the log domain. The
// result is made exactly feasible by a row rescaling of pi followed by
// Sinkhorn for each tau^m.
inline LocalState joint_local_plans(const Matrix& nll, const std::vector<Matrix>& gammas,
                                    const std::vector<Mixture>& globals, const Vector& a_row, double zeta,
                                    double lambda_l, double lambda_g, const Mixture& local_shape)
{
    constexpr int max_sweeps = 2000;
    constexpr double sweep_tol = 1e-11;
    const Eigen::Index n = nll.rows();
    const Eigen::Index K = nll.cols();
    const std::size_t C = gammas.size();

    Matrix kernel = -nll / lambda_l;
    for (Eigen::Index i = 0; i < n; ++i) kernel.row(i).array() -= kernel.row(i).maxCoeff();
    kernel = kernel.array().exp().matrix();
    std::vector<Matrix> kt(C);
    std::vector<double> mu(C, 0.0);
    double mu_total = lambda_l;
    for (std::size_t m = 0; m < C; ++m) {
        kt[m] = -gammas[m] / lambda_g;
        mu[m] = zeta * a_row(static_cast<Eigen::Index>(m)) * lambda_g;
        mu_total += mu[m];
    }

    const double row_mass = 1.0 / static_cast<double>(n);
    Vector scale_rows(n), scale_cols = Vector::Ones(K);
    std::vector<Vector> f(C, Vector::Zero(K)), g(C);
    std::vector<Vector> log_w(C);
    for (std::size_t m = 0; m < C; ++m) {
        log_w[m] = safe_log(globals[m].weights);
        g[m] = Vector::Zero(globals[m].weights.size());
    }

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        scale_rows = (row_mass / (kernel * scale_cols).array()).matrix();
        for (std::size_t m = 0; m < C; ++m)
            if (mu[m] > 0.0) g[m] = log_w[m] - col_lse(kt[m], f[m]);

        const Vector cols = scale_cols.cwiseProduct(kernel.transpose() * scale_rows);
        const Vector lc = cols.array().log().matrix();
        std::vector<Vector> lr(C);
        Vector log_omega = lambda_l * lc;
        for (std::size_t m = 0; m < C; ++m) {
            if (mu[m] == 0.0) continue;
            lr[m] = row_lse(kt[m], g[m]) + f[m];
            log_omega += mu[m] * lr[m];
        }
        log_omega /= mu_total;

        double err = 0.0;
        for (Eigen::Index v = 0; v < K; ++v) {
            if (!(cols(v) > 0.0) || !std::isfinite(log_omega(v))) continue;
            const double target = std::exp(log_omega(v));
            err = std::max(err, std::abs(cols(v) - target));
            scale_cols(v) *= target / cols(v);
            for (std::size_t m = 0; m < C; ++m) {
                if (mu[m] == 0.0) continue;
                err = std::max(err, std::abs(std::exp(lr[m](v)) - target));
                f[m](v) += log_omega(v) - lr[m](v);
            }
        }
        if (!std::isfinite(err) || err < sweep_tol) break;
    }

    LocalState out;
    Matrix pi = scale_rows.asDiagonal() * kernel * scale_cols.asDiagonal();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = pi.row(i).sum();
        if (s > 0.0) pi.row(i) *= inv_n / s;
        else pi.row(i).setConstant(inv_n / static_cast<double>(K));
    }
    out.plan = TransportPlan{pi, Vector::Constant(n, inv_n), std::nullopt};
    out.local = Mixture{local_shape.spec, out.plan.col_sums(), local_shape.atoms};
    for (std::size_t m = 0; m < C; ++m)
        out.partial.push_back(
            sinkhorn(gammas[m], out.local.weights, globals[m].weights, lambda_g, inner_sinkhorn()).plan);
    return out;
}

} // namespace detail

/// One block update of group j with the global side held fixed: the blended
/// atom update from the stored plans, then the plans. With zeta = 0 the plan is
/// the closed-form relaxed plan, so the group evolves exactly as a
/// single-mixture fit. With zeta > 0 the plans minimize the coupled block
/// objective and are accepted only when the block objective does not rise.
inline LocalState local_update(const Sample& data, const MctModel& model, std::size_t j)
{
    const auto& cfg = model.config;
    const FamilySpec& spec = model.spec;
    const Mixture& local = model.locals[j];
    const TransportPlan& plan = model.local_plans[j];
    const auto& partial = model.partial_plans[j];
    const Vector a_row = model.plan_a.values.row(static_cast<Eigen::Index>(j)).transpose();
    const auto n = static_cast<Eigen::Index>(data.size());
    const Vector omega = plan.col_sums();

    std::vector<NaturalParam> atoms;
    if (cfg.zeta == 0.0) {
        atoms = update_atoms(spec, data, plan, omega, &local.atoms);
    } else {
        const Matrix stats = weighted_statistics(spec, data, plan.values);
        atoms.resize(local.atoms.size());
        for (std::size_t v = 0; v < local.atoms.size(); ++v) {
            const auto vi = static_cast<Eigen::Index>(v);
            Vector numerator = stats.row(vi).transpose();
            double denominator = omega(vi);
            for (std::size_t m = 0; m < model.clusters(); ++m) {
                const double a = cfg.zeta * a_row(static_cast<Eigen::Index>(m));
                if (a == 0.0) continue;
                for (std::size_t l = 0; l < model.globals[m].size(); ++l) {
                    const double t = a * partial[m].values(vi, static_cast<Eigen::Index>(l));
                    if (t == 0.0) continue;
                    numerator += t * grad_log_partition(spec, model.globals[m].atoms[l]);
                    denominator += t;
                }
            }
            const Vector mean = numerator / denominator;
            if (denominator > 0.0 && mean.allFinite())
                atoms[v] = mean_to_natural(spec, spec.is_categorical() ? Vector(mean / mean.sum()) : mean);
            else
                atoms[v] = local.atoms[v];
        }
    }

    const CostMatrix nll = nll_cost_matrix(spec, data, atoms);
    std::vector<Matrix> gammas;
    for (const auto& global : model.globals) gammas.push_back(kl_cost_matrix(spec, atoms, global.atoms).values);

    if (cfg.zeta == 0.0) {
        LocalState out;
        const PlanAndWeights pw = update_plan_and_weights(nll, n, cfg.lambda_l);
        out.plan = pw.plan;
        out.local = Mixture{spec, pw.weights, std::move(atoms)};
        for (std::size_t m = 0; m < model.clusters(); ++m)
            out.partial.push_back(sinkhorn(gammas[m], out.local.weights, model.globals[m].weights, cfg.lambda_g,
                                           detail::inner_sinkhorn())
                                      .plan);
        return out;
    }

    auto block_value = [&](const TransportPlan& p, const std::vector<TransportPlan>& taus) {
        double value = detail::regularized_cost(p, nll.values, cfg.lambda_l);
        for (std::size_t m = 0; m < model.clusters(); ++m) {
            const double a = a_row(static_cast<Eigen::Index>(m));
            if (a == 0.0) continue;
            value += cfg.zeta * a * detail::regularized_cost(taus[m], gammas[m], cfg.lambda_g);
        }
        return value;
    };

    const Mixture shape{spec, omega, atoms};
    LocalState candidate = detail::joint_local_plans(nll.values, gammas, model.globals, a_row, cfg.zeta,
                                                     cfg.lambda_l, cfg.lambda_g, shape);
    const double before = block_value(plan, partial);
    const double after = block_value(candidate.plan, candidate.partial);
    if (std::isfinite(after) && after <= before) return candidate;
    return LocalState{Mixture{spec, omega, std::move(atoms)}, plan, partial};
}

namespace detail {

struct GlobalState
{
    Mixture global;
    std::vector<TransportPlan> partial; // one per group
};

// sum_j a_jm (<tau^{jm}, gamma^{jm}> - lambda_g H(tau^{jm})) for one cluster.
inline double cluster_value(const FamilySpec& spec, const std::vector<Mixture>& locals, const Mixture& global,
                            const std::vector<TransportPlan>& partial, const Vector& coefficients, double lambda_g)
{
    double total = 0.0;
    for (std::size_t j = 0; j < locals.size(); ++j) {
        const double a = coefficients(static_cast<Eigen::Index>(j));
        if (a == 0.0) continue;
        total += a * regularized_cost(partial[j], kl_cost_matrix(spec, locals[j].atoms, global.atoms).values, lambda_g);
    }
    return total;
}

inline std::vector<TransportPlan> cluster_plans(const FamilySpec& spec, const std::vector<Mixture>& locals,
                                                const Mixture& global, double lambda_g)
{
    std::vector<TransportPlan> plans;
    plans.reserve(locals.size());
    for (const auto& local : locals)
        plans.push_back(
            sinkhorn(kl_cost_matrix(spec, local.atoms, global.atoms).values, local.weights, global.weights, lambda_g,
                     inner_sinkhorn())
                .plan);
    return plans;
}

// Global mixture built from one local mixture: its L heaviest atoms (cycling
// when the local has fewer) with renormalized weights.
inline Mixture global_from_local(const Mixture& local, int L)
{
    std::vector<Eigen::Index> order(static_cast<std::size_t>(local.weights.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return local.weights(x) > local.weights(y); });
    Mixture out{local.spec, Vector(L), {}};
    for (int l = 0; l < L; ++l) {
        const Eigen::Index src = order[static_cast<std::size_t>(l) % order.size()];
        out.atoms.push_back(local.atoms[src]);
        out.weights(l) = std::max(local.weights(src), 1e-12);
    }
    out.weights /= out.weights.sum();
    return out;
}

} // namespace detail

/// Barycenter pass for global cluster m with coefficients a_.m: weight update
/// by Bregman projections, Sinkhorn plans, atom averaging, plan refresh. A
/// cluster whose mass b_m is below kEmptyWeight is instead offered a reseed
/// from a random local mixture. Every step is kept only if the cluster's share
/// of the objective does not rise.
inline detail::GlobalState global_update(const MctModel& model, std::size_t m, Rng& rng)
{
    const auto& cfg = model.config;
    const FamilySpec& spec = model.spec;
    const auto J = model.groups();
    const Vector coefficients = model.plan_a.values.col(static_cast<Eigen::Index>(m));
    std::vector<TransportPlan> stored(J);
    for (std::size_t j = 0; j < J; ++j) stored[j] = model.partial_plans[j][m];
    detail::GlobalState current{model.globals[m], stored};
    const double current_value
        = detail::cluster_value(spec, model.locals, current.global, current.partial, coefficients, cfg.lambda_g);

    if (model.b(static_cast<Eigen::Index>(m)) < kEmptyWeight) {
        const auto donor = static_cast<std::size_t>(rng.below(J));
        detail::GlobalState reseeded;
        reseeded.global = detail::global_from_local(model.locals[donor], cfg.L);
        reseeded.partial = detail::cluster_plans(spec, model.locals, reseeded.global, cfg.lambda_g);
        const double value
            = detail::cluster_value(spec, model.locals, reseeded.global, reseeded.partial, coefficients, cfg.lambda_g);
        return value <= current_value ? reseeded : current;
    }

    std::vector<Matrix> costs;
    std::vector<Vector> sources;
    std::vector<std::vector<NaturalParam>> source_atoms;
    for (const auto& local : model.locals) {
        costs.push_back(kl_cost_matrix(spec, local.atoms, current.global.atoms).values);
        sources.push_back(local.weights);
        source_atoms.push_back(local.atoms);
    }

    detail::GlobalState next;
    next.global = current.global;
    BarycenterWeightOptions wopts;
    wopts.sinkhorn = detail::inner_sinkhorn();
    next.global.weights = update_barycenter_weights(costs, sources, coefficients, cfg.lambda_g, current.global.weights, wopts);
    next.partial = update_partial_plans(costs, sources, next.global.weights, cfg.lambda_g, detail::inner_sinkhorn());
    next.global.atoms = update_barycenter_atoms(spec, next.partial, source_atoms, coefficients, &current.global.atoms);

    const auto refreshed = detail::cluster_plans(spec, model.locals, next.global, cfg.lambda_g);
    for (std::size_t j = 0; j < J; ++j) {
        const Matrix gamma = kl_cost_matrix(spec, model.locals[j].atoms, next.global.atoms).values;
        if (detail::regularized_cost(refreshed[j], gamma, cfg.lambda_g)
            <= detail::regularized_cost(next.partial[j], gamma, cfg.lambda_g))
            next.partial[j] = refreshed[j];
    }
    const double next_value
        = detail::cluster_value(spec, model.locals, next.global, next.partial, coefficients, cfg.lambda_g);
    return next_value <= current_value ? next : current;
}

namespace detail {

inline void sync_partial_plans(MctModel& model)
{
    const auto J = model.groups();
    model.partial_plans.assign(J, std::vector<TransportPlan>(model.clusters()));
    parallel_for(J, model.config.threads, [&](std::size_t j) {
        for (std::size_t m = 0; m < model.clusters(); ++m)
            model.partial_plans[j][m]
                = sinkhorn(kl_cost_matrix(model.spec, model.locals[j].atoms, model.globals[m].atoms).values,
                           model.locals[j].weights, model.globals[m].weights, model.config.lambda_g, inner_sinkhorn())
                      .plan;
    });
}

} // namespace detail

namespace detail {

/// Partition of the groups around C medoid groups.
struct MedoidPartition
{
    std::vector<std::size_t> medoids;
    std::vector<std::size_t> owner;
    double cost = std::numeric_limits<double>::infinity();
};

/// k-medoids on the composite distances between locals (penalty lambda_g),
/// restarted from D^2 seedings; the partition with the least total distance
/// to its medoids wins.
inline MedoidPartition seed_partition(const std::vector<Mixture>& locals, const MctConfig& config)
{
    const std::size_t J = locals.size();
    const auto C = static_cast<std::size_t>(config.C);
    Matrix dist = Matrix::Zero(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J));
    parallel_for(J, config.threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < J; ++j)
            if (i != j)
                dist(i, j) = std::max(0.0, composite_distance(locals[i], locals[j], config.lambda_g, inner_sinkhorn()));
    });
    // Distance from group j to medoid s.
    auto d = [&](std::size_t j, std::size_t s) { return dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)); };

    MedoidPartition best;
    for (int restart = 0; restart < config.init_restarts; ++restart) {
        Rng rng(derive_seed(config.seed, J + 1000003ULL * static_cast<std::uint64_t>(restart)));
        MedoidPartition part;
        part.medoids.push_back(rng.below(J));
        std::vector<double> nearest(J);
        while (part.medoids.size() < std::min(C, J)) {
            for (std::size_t j = 0; j < J; ++j) {
                nearest[j] = std::numeric_limits<double>::infinity();
                for (std::size_t s : part.medoids) nearest[j] = std::min(nearest[j], d(j, s));
                nearest[j] *= nearest[j];
            }
            part.medoids.push_back(rng.categorical(nearest));
        }
        while (part.medoids.size() < C) part.medoids.push_back(part.medoids.back());

        part.owner.assign(J, 0);
        for (int sweep = 0; sweep < 100; ++sweep) {
            for (std::size_t j = 0; j < J; ++j)
                for (std::size_t m = 1; m < C; ++m)
                    if (d(j, part.medoids[m]) < d(j, part.medoids[part.owner[j]])) part.owner[j] = m;
            bool moved = false;
            for (std::size_t m = 0; m < C; ++m) {
                double best_total = std::numeric_limits<double>::infinity();
                std::size_t best_medoid = part.medoids[m];
                for (std::size_t c = 0; c < J; ++c) {
                    if (part.owner[c] != m) continue;
                    double total = 0.0;
                    for (std::size_t j = 0; j < J; ++j)
                        if (part.owner[j] == m) total += d(j, c);
                    if (total < best_total) {
                        best_total = total;
                        best_medoid = c;
                    }
                }
                moved = moved || best_medoid != part.medoids[m];
                part.medoids[m] = best_medoid;
            }
            if (!moved) break;
        }
        part.cost = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t m = 0; m < C; ++m)
                if (d(j, part.medoids[m]) < d(j, part.medoids[part.owner[j]])) part.owner[j] = m;
            part.cost += d(j, part.medoids[part.owner[j]]);
        }
        if (part.cost < best.cost) best = std::move(part);
    }
    return best;
}

} // namespace detail

/// Locals: a few single-mixture iterations per group from random data points.
/// Globals: C seed groups chosen by D^2 sampling on the composite distance
/// between local mixtures, every group attached to its nearest seed, and each
/// cluster initialized as the barycenter of its attached locals. The global
/// plan starts uniform.
inline MctModel init_mct(const GroupedDataset& data, const MctConfig& config)
{
    data.validate();
    config.validate(data.size());
    const std::size_t J = data.size();

    MctModel model;
    model.config = config;
    model.spec = data.spec;
    model.locals.resize(J);
    model.local_plans.resize(J);
    parallel_for(J, config.threads, [&](std::size_t j) {
        MixtureFitConfig mc;
        mc.K = config.K_for(j);
        mc.lambda = config.lambda_l;
        mc.max_iter = config.local_warmup;
        mc.tol = 0.0;
        mc.seed = derive_seed(config.seed, j);
        const MixtureFit fit = fit_mixture(data.groups[j].sample, data.spec, mc);
        model.local_plans[j] = fit.plan;
        model.locals[j] = Mixture{data.spec, fit.plan.col_sums(), fit.mixture.atoms};
    });

    const auto C = static_cast<std::size_t>(config.C);
    const detail::MedoidPartition partition = detail::seed_partition(model.locals, config);
    const auto& seeds = partition.medoids;
    const auto& owner = partition.owner;

    model.globals.resize(C);
    parallel_for(C, config.threads, [&](std::size_t m) {
        std::vector<Mixture> members;
        for (std::size_t j = 0; j < J; ++j)
            if (owner[j] == m) members.push_back(model.locals[j]);
        if (members.empty()) members.push_back(model.locals[seeds[m]]);
        BarycenterConfig bc;
        bc.L = config.L;
        bc.lambda = config.lambda_g;
        bc.max_iter = config.init_barycenter_iter;
        bc.tol = 0.0;
        bc.seed = derive_seed(config.seed, J + 1 + m);
        const std::vector<NaturalParam> start = detail::global_from_local(model.locals[seeds[m]], config.L).atoms;
        model.globals[m] = fit_barycenter(members, data.spec, bc, &start).barycenter;
    });

    const Matrix uniform = Matrix::Constant(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(C),
                                            1.0 / static_cast<double>(J * C));
    model.plan_a = TransportPlan{uniform, Vector::Constant(static_cast<Eigen::Index>(J), 1.0 / static_cast<double>(J)),
                                 std::nullopt};
    model.b = model.plan_a.col_sums();
    detail::sync_partial_plans(model);
    return model;
}

/// Coordinate descent on the regularized multilevel objective: all local
/// blocks, then the global plan, then every global cluster. trace[0] is the
/// objective at initialization. The observer, when set, sees every trace
/// entry with its iteration number.
using MctObserver = std::function<void(int iteration, double objective)>;

inline MctModel fit_mct(const GroupedDataset& data, const MctConfig& config, const MctObserver& observer = {})
{
    MctModel model = init_mct(data, config);
    double current = mct_objective(data, model);
    if (!std::isfinite(current)) throw DataError("multilevel objective is not finite at initialization");
    model.trace.push_back(current);
    if (observer) observer(0, current);
    const std::size_t J = model.groups();
    const std::size_t C = model.clusters();

    for (int it = 0; it < config.max_iter; ++it) {
        std::vector<LocalState> locals(J);
        parallel_for(J, config.threads, [&](std::size_t j) { locals[j] = local_update(data.groups[j].sample, model, j); });
        for (std::size_t j = 0; j < J; ++j) {
            model.locals[j] = std::move(locals[j].local);
            model.local_plans[j] = std::move(locals[j].plan);
            model.partial_plans[j] = std::move(locals[j].partial);
        }

        update_global_plan(model);

        std::vector<detail::GlobalState> globals(C);
        parallel_for(C, config.threads, [&](std::size_t m) {
            Rng rng(derive_seed(config.seed, (static_cast<std::uint64_t>(it) + 1) * (J + 1 + C) + m));
            globals[m] = global_update(model, m, rng);
        });
        for (std::size_t m = 0; m < C; ++m) {
            model.globals[m] = std::move(globals[m].global);
            for (std::size_t j = 0; j < J; ++j) model.partial_plans[j][m] = std::move(globals[m].partial[j]);
        }

        const double value = mct_objective(data, model);
        if (!std::isfinite(value)) throw DataError("multilevel objective became non-finite");
        model.trace.push_back(value);
        model.iterations = it + 1;
        if (observer) observer(it + 1, value);
        const bool done = detail::relative_change_below(current, value, config.tol);
        current = value;
        if (done) {
            model.converged = true;
            break;
        }
    }
    return model;
}

/// Group j goes to argmax_m a_jm; ties go to the lowest index.
inline std::vector<int> assign_groups(const MctModel& model)
{
    std::vector<int> out(model.groups(), 0);
    for (Eigen::Index j = 0; j < model.plan_a.values.rows(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index m = 1; m < model.plan_a.values.cols(); ++m)
            if (model.plan_a.values(j, m) > model.plan_a.values(j, best)) best = m;
        out[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    return out;
}

} // namespace mct
