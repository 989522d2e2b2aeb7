#pragma once
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mct {

/// Nonnegative coupling. A missing column marginal marks a relaxed plan whose
/// columns are free.
struct TransportPlan
{
    Matrix values;
    Vector row_marginal;
    std::optional<Vector> col_marginal;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    Vector row_sums() const { return values.rowwise().sum(); }
    Vector col_sums() const { return values.colwise().sum().transpose(); }

    /// L1 violation of the stored marginal contracts.
    double marginal_error() const
    {
        double err = (row_sums() - row_marginal).lpNorm<1>();
        if (col_marginal) err += (col_sums() - *col_marginal).lpNorm<1>();
        return err;
    }
};

enum class CostKind { KlBregman, NegLogLikelihood, MixtureLevel };

struct CostMatrix
{
    Matrix values;
    CostKind kind = CostKind::KlBregman;
};

/// Finite mixture sum_k weights[k] f(.|atoms[k]).
struct Mixture
{
    FamilySpec spec;
    Vector weights;
    std::vector<NaturalParam> atoms;

    std::size_t size() const { return atoms.size(); }

    void validate() const
    {
        spec.validate();
        if (atoms.empty()) throw std::invalid_argument("mixture needs at least one atom");
        if (static_cast<std::size_t>(weights.size()) != atoms.size())
            throw std::invalid_argument("mixture weights and atoms differ in length");
        if (weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-12)
            throw std::invalid_argument("mixture weights are not on the simplex");
        for (const auto& a : atoms) {
            detail::check_dim(spec, a, "mixture atom");
            if (!is_gauge_fixed(spec, a)) throw std::invalid_argument("categorical atom is not gauge fixed");
        }
    }
};

/// H(pi) = -sum pi log pi with 0 log 0 = 0.
inline double entropy(const TransportPlan& plan) { return -neg_entropy(plan.values); }
inline double entropy(const Matrix& plan) { return -neg_entropy(plan); }

/// Bregman (KL) cost between two atom lists: entry (i, j) is
/// D_A(atoms_a[i], atoms_b[j]) = KL(f(.|atoms_b[j]) || f(.|atoms_a[i])).
inline CostMatrix kl_cost_matrix(const FamilySpec& spec, const std::vector<NaturalParam>& atoms_a,
                                 const std::vector<NaturalParam>& atoms_b)
{
    const auto n = static_cast<Eigen::Index>(atoms_a.size());
    const auto m = static_cast<Eigen::Index>(atoms_b.size());
    for (const auto& a : atoms_a) detail::check_dim(spec, a, "atom");
    for (const auto& b : atoms_b) detail::check_dim(spec, b, "atom");

    CostMatrix cost{Matrix(n, m), CostKind::KlBregman};
    if (spec.is_gaussian()) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                cost.values(i, j) = 0.5 * spec.sigma2 * (atoms_a[i] - atoms_b[j]).squaredNorm();
        return cost;
    }

    // KL(p_b || p_a) = sum_k p_b[k] log p_b[k] - sum_k p_b[k] log p_a[k]
    const Eigen::Index v = spec.dim;
    Matrix log_a(n, v), log_b(m, v), prob_b(m, v);
    for (Eigen::Index i = 0; i < n; ++i) log_a.row(i) = (atoms_a[i].array() - log_sum_exp(atoms_a[i])).transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
        log_b.row(j) = (atoms_b[j].array() - log_sum_exp(atoms_b[j])).transpose();
        prob_b.row(j) = log_b.row(j).array().exp();
    }
    const Vector self = prob_b.cwiseProduct(log_b).rowwise().sum();
    cost.values = (-(log_a * prob_b.transpose())).rowwise() + self.transpose();
    cost.values = cost.values.cwiseMax(0.0);
    return cost;
}

struct SinkhornOptions
{
    double tol = 1e-9;
    int max_iter = 10000;
    bool require_convergence = true;
};

struct SinkhornResult
{
    TransportPlan plan;
    double transport_value = 0.0;   // <pi, M>
    double regularized_value = 0.0; // <pi, M> - lambda H(pi)
    int iterations = 0;
    double marginal_error = 0.0;
    bool converged = false;
};

namespace detail {

inline void check_simplex(const Vector& v, const char* what)
{
    if (v.size() == 0) throw std::invalid_argument(std::string(what) + " is empty");
    if (!v.allFinite() || v.minCoeff() < 0.0 || std::abs(v.sum() - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(what) + " is not on the probability simplex");
}

inline Vector safe_log(const Vector& v)
{
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = v(i) > 0.0 ? std::log(v(i)) : kNegInf;
    return out;
}

// lse_j (K(i, j) + v(j)) for every row i, skipping -inf terms.
inline Vector row_lse(const Matrix& kernel, const Vector& v)
{
    Vector out(kernel.rows());
    for (Eigen::Index i = 0; i < kernel.rows(); ++i) out(i) = log_sum_exp(kernel.row(i).transpose() + v);
    return out;
}

inline Vector col_lse(const Matrix& kernel, const Vector& u)
{
    Vector out(kernel.cols());
    for (Eigen::Index j = 0; j < kernel.cols(); ++j) out(j) = log_sum_exp(kernel.col(j) + u);
    return out;
}

inline Matrix plan_from_potentials(const Matrix& kernel, const Vector& u, const Vector& v)
{
    Matrix plan(kernel.rows(), kernel.cols());
    for (Eigen::Index i = 0; i < kernel.rows(); ++i)
        for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
            const double e = kernel(i, j) + u(i) + v(j);
            plan(i, j) = e == kNegInf ? 0.0 : std::exp(e);
        }
    return plan;
}

inline void fill_values(SinkhornResult& res, const Matrix& cost, double lambda)
{
    res.transport_value = res.plan.values.cwiseProduct(cost).sum();
    res.regularized_value = res.transport_value + lambda * neg_entropy(res.plan.values);
}

} // namespace detail

namespace detail {

// Newton ascent on the dual <u, r> + <v, c> - sum exp(K + u + v) restricted to
// the supported rows/columns, with the last supported column potential held
// fixed to remove the shift invariance. Used once plain Sinkhorn sweeps stall
// (small lambda, near-sparse optimal plans). The dual increase of a trial step
// is evaluated through expm1 so the line search stays meaningful when the
// potentials are large. Leaves the best iterate found in (u, v).
inline bool newton_polish(const Matrix& kernel, const Vector& r, const Vector& c, Vector& u, Vector& v, double tol,
                          int max_steps, int& steps)
{
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (r(i) > 0.0) rows.push_back(i);
    for (Eigen::Index j = 0; j < c.size(); ++j)
        if (c(j) > 0.0) cols.push_back(j);
    steps = 0;
    if (cols.empty() || rows.empty()) return true;
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    const Eigen::Index dim = nr + nc - 1;

    Eigen::VectorXd z(nr + nc);
    for (Eigen::Index a = 0; a < nr; ++a) z(a) = u(rows[a]);
    for (Eigen::Index b = 0; b < nc; ++b) z(nr + b) = v(cols[b]);

    Matrix p(nr, nc);
    Eigen::VectorXd grad(nr + nc);
    auto evaluate = [&](const Eigen::VectorXd& zz) {
        for (Eigen::Index a = 0; a < nr; ++a)
            for (Eigen::Index b = 0; b < nc; ++b) p(a, b) = std::exp(kernel(rows[a], cols[b]) + zz(a) + zz(nr + b));
        for (Eigen::Index a = 0; a < nr; ++a) grad(a) = r(rows[a]) - p.row(a).sum();
        for (Eigen::Index b = 0; b < nc; ++b) grad(nr + b) = c(cols[b]) - p.col(b).sum();
        return grad.lpNorm<1>();
    };

    double err = evaluate(z);
    Eigen::VectorXd best = z;
    double best_err = err;
    for (; steps < max_steps && err >= tol; ++steps) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index a = 0; a < nr; ++a) h(a, a) = p.row(a).sum();
        for (Eigen::Index b = 0; b < nc - 1; ++b) {
            h(nr + b, nr + b) = p.col(b).sum();
            for (Eigen::Index a = 0; a < nr; ++a) h(a, nr + b) = h(nr + b, a) = p(a, b);
        }
        h.diagonal().array() += 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
        Eigen::VectorXd step = Eigen::VectorXd::Zero(nr + nc);
        step.head(dim) = h.ldlt().solve(grad.head(dim));
        if (!step.allFinite()) break;

        const double linear = step.head(nr).dot(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), r.size())(rows)))
                            + step.tail(nc).dot(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(c.data(), c.size())(cols)));
        const double slope = grad.head(dim).dot(step.head(dim));
        const Matrix p_old = p;
        bool moved = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 60 && !moved; ++ls, alpha *= 0.5) {
            double loss = 0.0;
            for (Eigen::Index a = 0; a < nr; ++a)
                for (Eigen::Index b = 0; b < nc; ++b) loss += p_old(a, b) * std::expm1(alpha * (step(a) + step(nr + b)));
            const double gain = alpha * linear - loss;
            const Eigen::VectorXd trial = z + alpha * step;
            if (!std::isfinite(gain)) continue;
            const double trial_err = evaluate(trial);
            if (gain >= 1e-4 * alpha * slope || trial_err < err) {
                z = trial;
                err = trial_err;
                moved = true;
            }
        }
        if (!moved) break;
        if (err < best_err) {
            best_err = err;
            best = z;
        }
    }
    for (Eigen::Index a = 0; a < nr; ++a) u(rows[a]) = best(a);
    for (Eigen::Index b = 0; b < nc; ++b) v(cols[b]) = best(nr + b);
    return best_err < tol;
}

// Solves at a geometric schedule of temperatures from the cost range down to
// lambda, warm-starting each stage's Newton solve from the previous stage's
// potentials rescaled to the new temperature.
inline bool annealed_newton(const Matrix& cost, const Vector& r, const Vector& c, double lambda, double tol,
                            Vector& u, Vector& v, int& steps)
{
    constexpr double factor = 4.0;
    const double range = cost.maxCoeff() - cost.minCoeff();
    double temp = std::max(lambda, range);
    Vector log_r = safe_log(r), log_c = safe_log(c);
    u = Vector::Zero(r.size());
    v = Vector::Zero(c.size());
    steps = 0;
    for (;;) {
        const Matrix kernel = -cost / temp;
        for (int k = 0; k < 3; ++k) {
            u = log_r - row_lse(kernel, v);
            v = log_c - col_lse(kernel, u);
        }
        int used = 0;
        const bool last = temp <= lambda;
        const bool ok = newton_polish(kernel, r, c, u, v, tol, 50, used);
        steps += used + 3;
        if (last) return ok;
        const double next = std::max(lambda, temp / factor);
        u *= temp / next;
        v *= temp / next;
        temp = next;
    }
}

} // namespace detail

/// Entropic optimal transport min <pi, M> - lambda H(pi) over Pi(r, c).
///
/// Sinkhorn sweeps on log-domain scaled dual potentials; columns are exact
/// after each sweep and the loop stops once the L1 row error drops below tol.
/// When sweeps stall, the potentials are finished with Newton steps on the
/// dual followed by a closing sweep.
inline SinkhornResult sinkhorn(const Matrix& cost, const Vector& r, const Vector& c, double lambda,
                               const SinkhornOptions& opts = {})
{
    if (!(lambda > 0.0)) throw std::invalid_argument("sinkhorn needs lambda > 0");
    if (cost.rows() != r.size() || cost.cols() != c.size())
        throw std::invalid_argument("sinkhorn: cost shape does not match marginals");
    if (!cost.allFinite()) throw std::invalid_argument("sinkhorn: non-finite cost");
    detail::check_simplex(r, "row marginal");
    detail::check_simplex(c, "column marginal");

    const Matrix kernel = -cost / lambda;
    const Vector log_r = detail::safe_log(r);
    const Vector log_c = detail::safe_log(c);
    Vector u = Vector::Zero(r.size());
    Vector v = Vector::Zero(c.size());

    auto sweep = [&] {
        u = log_r - detail::row_lse(kernel, v);
        v = log_c - detail::col_lse(kernel, u);
        const Vector row_log = detail::row_lse(kernel, v) + u;
        double e = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i) e += std::abs((r(i) > 0.0 ? std::exp(row_log(i)) : 0.0) - r(i));
        return e;
    };

    constexpr int stall_window = 50;
    constexpr double stall_ratio = 0.5;
    double err = std::numeric_limits<double>::infinity();
    double window_start = err;
    int it = 0;
    bool tried_newton = false;
    while (it < opts.max_iter) {
        ++it;
        err = sweep();
        if (err < opts.tol) break;
        if (it % stall_window == 0) {
            if (!tried_newton && err > stall_ratio * window_start) {
                tried_newton = true;
                Vector nu, nv;
                int steps = 0;
                if (detail::annealed_newton(cost, r, c, lambda, opts.tol, nu, nv, steps)) {
                    u = std::move(nu);
                    v = std::move(nv);
                    it += steps;
                    err = sweep();
                    if (err < opts.tol) break;
                }
            }
            window_start = err;
        }
    }
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (r(i) == 0.0) u(i) = kNegInf;
    for (Eigen::Index j = 0; j < v.size(); ++j)
        if (c(j) == 0.0) v(j) = kNegInf;

    SinkhornResult res;
    res.plan = TransportPlan{detail::plan_from_potentials(kernel, u, v), r, c};
    res.iterations = it;
    res.marginal_error = res.plan.marginal_error();
    res.converged = err < opts.tol;
    detail::fill_values(res, cost, lambda);
    if (!res.converged && opts.require_convergence)
        throw ConvergenceError("sinkhorn did not converge", res.marginal_error, it);
    return res;
}

inline SinkhornResult sinkhorn(const CostMatrix& cost, const Vector& r, const Vector& c, double lambda,
                               const SinkhornOptions& opts = {})
{
    return sinkhorn(cost.values, r, c, lambda, opts);
}

struct ExactPlan
{
    Matrix plan;
    double value = 0.0;
};

/// Exact unregularized OT on a 2x2 problem. The feasible set is the segment
/// pi_11 = t in [max(0, r1 + c1 - 1), min(r1, c1)], so the optimum sits at an
/// endpoint.
inline ExactPlan exact_ot_2x2(const Matrix& cost, const Vector& r, const Vector& c)
{
    if (cost.rows() != 2 || cost.cols() != 2 || r.size() != 2 || c.size() != 2)
        throw std::invalid_argument("exact_ot_2x2 needs a 2x2 problem");
    const double lo = std::max(0.0, r(0) + c(0) - 1.0);
    const double hi = std::min(r(0), c(0));
    auto make = [&](double t) {
        Matrix p(2, 2);
        p << t, r(0) - t, c(0) - t, 1.0 - r(0) - c(0) + t;
        return p;
    };
    const double slope = cost(0, 0) - cost(0, 1) - cost(1, 0) + cost(1, 1);
    ExactPlan out;
    out.plan = make(slope > 0.0 ? lo : hi);
    out.plan = out.plan.cwiseMax(0.0);
    out.value = out.plan.cwiseProduct(cost).sum();
    return out;
}

/// Minimizer of <pi, M> - lambda H(pi) with row sums fixed to 1/n and free
/// columns: row-wise softmax of -M / lambda scaled by 1/n.
inline TransportPlan relaxed_row_plan(const Matrix& cost, Eigen::Index n, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("relaxed_row_plan needs lambda > 0");
    if (cost.rows() != n) throw std::invalid_argument("relaxed_row_plan: row count mismatch");
    const double inv_n = 1.0 / static_cast<double>(n);
    TransportPlan plan{Matrix(cost.rows(), cost.cols()), Vector::Constant(n, inv_n), std::nullopt};
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
        const Vector logits = -cost.row(i).transpose() / lambda;
        plan.values.row(i) = (softmax(logits) * inv_n).transpose();
    }
    return plan;
}

inline TransportPlan relaxed_row_plan(const CostMatrix& cost, Eigen::Index n, double lambda)
{
    return relaxed_row_plan(cost.values, n, lambda);
}

/// Transport between two mixtures under the KL ground cost. lambda > 0 uses
/// Sinkhorn; lambda == 0 is allowed only where the exact plan is available
/// (a single atom on either side, or 2x2).
inline SinkhornResult composite_transport(const Mixture& p, const Mixture& q, double lambda,
                                          const SinkhornOptions& opts = {})
{
    if (!(p.spec == q.spec)) throw std::invalid_argument("composite distance: family mismatch");
    if (lambda < 0.0) throw std::invalid_argument("composite distance: lambda must be >= 0");
    const CostMatrix cost = kl_cost_matrix(p.spec, p.atoms, q.atoms);
    if (lambda > 0.0) return sinkhorn(cost, p.weights, q.weights, lambda, opts);

    SinkhornResult res;
    if (p.size() == 1 || q.size() == 1) {
        res.plan = TransportPlan{p.weights * q.weights.transpose(), p.weights, q.weights};
    } else if (p.size() == 2 && q.size() == 2) {
        res.plan = TransportPlan{exact_ot_2x2(cost.values, p.weights, q.weights).plan, p.weights, q.weights};
    } else {
        throw std::invalid_argument("composite distance: lambda = 0 is only supported for 1xK, Kx1 and 2x2 problems");
    }
    res.converged = true;
    res.marginal_error = res.plan.marginal_error();
    detail::fill_values(res, cost.values, 0.0);
    return res;
}

/// Composite transportation distance: the unregularized cost <pi, M> at the
/// solver's plan.
inline double composite_distance(const Mixture& p, const Mixture& q, double lambda, const SinkhornOptions& opts = {})
{
    return composite_transport(p, q, lambda, opts).transport_value;
}

/// Distance between two mixtures of mixtures: outer transport with cost
/// composite_distance(P_i, Q_j).
inline double mixture_of_mixtures_distance(const std::vector<Mixture>& ps, const Vector& tau,
                                           const std::vector<Mixture>& qs, const Vector& tau_bar,
                                           double lambda_outer, double lambda_inner,
                                           const SinkhornOptions& opts = {})
{
    if (static_cast<std::size_t>(tau.size()) != ps.size() || static_cast<std::size_t>(tau_bar.size()) != qs.size())
        throw std::invalid_argument("mixture of mixtures: weight length mismatch");
    CostMatrix outer{Matrix(tau.size(), tau_bar.size()), CostKind::MixtureLevel};
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t j = 0; j < qs.size(); ++j)
            outer.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                = composite_distance(ps[i], qs[j], lambda_inner, opts);
    return sinkhorn(outer, tau, tau_bar, lambda_outer, opts).transport_value;
}

} // namespace mct
