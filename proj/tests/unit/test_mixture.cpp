#include "helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace mct;
using namespace mct::testing;

namespace {

Sample points_1d(std::initializer_list<double> xs)
{
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return Sample::continuous(m);
}

Sample two_clusters(std::uint64_t seed, int n)
{
    Rng rng(seed);
    Matrix m(n, 1);
    for (int i = 0; i < n; ++i) m(i, 0) = (i < n / 2 ? -5.0 : 5.0) + rng.normal();
    return Sample::continuous(m);
}

Sample random_categories(std::uint64_t seed, int n, int V)
{
    Rng rng(seed);
    std::vector<int> cats(static_cast<std::size_t>(n));
    // Skewed categorical so that the fit has structure to find.
    for (auto& c : cats) c = rng.uniform() < 0.5 ? static_cast<int>(rng.below(V / 2)) : static_cast<int>(rng.below(V));
    return Sample::discrete(cats);
}

// <pi, M> - lambda H(pi) evaluated term by term.
double direct_objective(const Matrix& M, const Matrix& pi, double lambda)
{
    return pi.cwiseProduct(M).sum() - lambda * entropy(pi);
}

} // namespace

TEST(NllCostMatrix, ReferenceValues)
{
    const auto cat = FamilySpec::categorical(4);
    const auto uniform = nll_cost_matrix(cat, Sample::discrete({0, 3, 2}), {Vector::Zero(4)});
    EXPECT_EQ(uniform.kind, CostKind::NegLogLikelihood);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(uniform.values(i, 0), std::log(4.0), 1e-15);

    const auto gauss = nll_cost_matrix(FamilySpec::gaussian(1), points_1d({0}), {probs({0})});
    EXPECT_NEAR(gauss.values(0, 0), 0.9189385, 1e-7);
    EXPECT_NEAR(gauss.values(0, 0), 0.5 * std::log(2.0 * std::numbers::pi), 1e-15);

    const auto dup = nll_cost_matrix(FamilySpec::gaussian(1), points_1d({0.3, -1, 2}), {probs({0.5}), probs({0.5})});
    EXPECT_EQ(dup.values.col(0), dup.values.col(1));
}

TEST(NllCostMatrix, MatchesLogDensity)
{
    Rng rng(3);
    const auto spec = FamilySpec::gaussian(2, 0.8);
    Matrix pts(5, 2);
    for (Eigen::Index i = 0; i < 5; ++i) pts.row(i) << rng.normal(), rng.normal();
    const Sample data = Sample::continuous(pts);
    const std::vector<NaturalParam> atoms{probs({0.4, -1}), probs({2, 1})};
    const auto cost = nll_cost_matrix(spec, data, atoms);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_NEAR(cost.values(i, j), -log_density(spec, data.at(i), atoms[j]), 1e-12);
}

TEST(UpdatePlanAndWeights, ReferenceValues)
{
    const auto single = update_plan_and_weights(CostMatrix{Matrix::Constant(3, 1, 2.0)}, 3, 1.0);
    EXPECT_NEAR(single.weights(0), 1.0, 1e-15);

    Matrix M(2, 2);
    M << 1, 3, 1, 3;
    const auto pw = update_plan_and_weights(CostMatrix{M}, 2, 1.0);
    EXPECT_NEAR(pw.plan.values(0, 0), 0.8807971 / 2, 1e-7);
    EXPECT_NEAR(pw.weights(0), 0.8807971, 1e-7);
    EXPECT_NEAR(pw.weights(1), 0.1192029, 1e-7);

    Matrix sym(2, 2);
    sym << 0.5, 2.0, 2.0, 0.5;
    const auto eq = update_plan_and_weights(CostMatrix{sym}, 2, 0.7);
    EXPECT_NEAR(eq.weights(0), eq.weights(1), 1e-15);
}

TEST(UpdatePlanAndWeights, WeightsAreColumnSumsOnTheSimplex)
{
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pw = update_plan_and_weights(CostMatrix{random_matrix(rng, 30, 4, 10.0)}, 30, 0.3);
        EXPECT_NEAR(pw.weights.sum(), 1.0, 1e-12);
        EXPECT_LT((pw.weights - pw.plan.col_sums()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(UpdateAtoms, ReferenceValues)
{
    const auto gauss = FamilySpec::gaussian(2);
    Matrix pts(2, 2);
    pts << 0, 0, 2, 0;
    const Sample data = Sample::continuous(pts);
    const auto pw = update_plan_and_weights(CostMatrix{Matrix::Zero(2, 1)}, 2, 1.0);
    const auto atoms = update_atoms(gauss, data, pw.plan, pw.weights);
    EXPECT_NEAR(atoms[0](0), 1.0, 1e-15);
    EXPECT_NEAR(atoms[0](1), 0.0, 1e-15);

    const auto cat = FamilySpec::categorical(2);
    const Sample counts = Sample::discrete({0, 0, 0, 1});
    const auto pw2 = update_plan_and_weights(CostMatrix{Matrix::Zero(4, 1)}, 4, 1.0);
    const auto p = softmax(update_atoms(cat, counts, pw2.plan, pw2.weights)[0]);
    EXPECT_NEAR(p(0), 0.75, 1e-12);
    EXPECT_NEAR(p(1), 0.25, 1e-12);
}

TEST(UpdateAtoms, StationarityResidual)
{
    Rng rng(5);
    for (const auto& spec : {FamilySpec::gaussian(1, 1.3), FamilySpec::categorical(6)}) {
        const Sample data = spec.is_gaussian() ? two_clusters(5, 40) : random_categories(5, 40, 6);
        const auto pw = update_plan_and_weights(CostMatrix{random_matrix(rng, 40, 3, 4.0)}, 40, 0.5);
        const auto atoms = update_atoms(spec, data, pw.plan, pw.weights);
        const Matrix stats = weighted_statistics(spec, data, pw.plan.values);
        for (Eigen::Index j = 0; j < 3; ++j) {
            const Vector residual = stats.row(j).transpose() - pw.weights(j) * grad_log_partition(spec, atoms[j]);
            EXPECT_LT(residual.norm(), 1e-8);
        }
    }
}

TEST(UpdateAtoms, EmptyColumnKeepsPreviousOrThrows)
{
    const auto spec = FamilySpec::gaussian(1);
    TransportPlan plan{Matrix::Zero(2, 2), Vector::Constant(2, 0.5), std::nullopt};
    plan.values.col(0).setConstant(0.5);
    const Vector weights = plan.col_sums();
    const std::vector<NaturalParam> previous{probs({9}), probs({7})};
    const auto atoms = update_atoms(spec, points_1d({1, 3}), plan, weights, &previous);
    EXPECT_NEAR(atoms[0](0), 2.0, 1e-15);
    EXPECT_EQ(atoms[1](0), 7.0);
    EXPECT_THROW(update_atoms(spec, points_1d({1, 3}), plan, weights), DataError);
}

TEST(MixtureObjective, SinglePointTwoAtoms)
{
    Matrix M(1, 2);
    M << 1, 3;
    const TransportPlan pi = relaxed_row_plan(M, 1, 1.0);
    const double oracle = direct_objective(M, pi.values, 1.0);
    EXPECT_NEAR(relaxed_objective(M, 1.0), oracle, 1e-12);
    EXPECT_NEAR(oracle, 1.0 - std::log1p(std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(relaxed_objective(M, 1.0), 0.873072, 1e-6);
}

TEST(MixtureObjective, MatchesDirectEvaluationAtTheClosedFormPlan)
{
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix M = random_matrix(rng, 15, 4, 6.0);
        for (double lambda : {0.1, 1.0, 3.0}) {
            const TransportPlan pi = relaxed_row_plan(M, 15, lambda);
            EXPECT_NEAR(relaxed_objective(M, lambda), direct_objective(M, pi.values, lambda), 1e-11);
        }
    }
}

TEST(MixtureObjective, SingleComponentAndSmallLambdaLimits)
{
    const auto spec = FamilySpec::gaussian(1);
    const Sample data = points_1d({-1, 0.5, 2, 4});
    const Mixture one{spec, probs({1}), {probs({0.7})}};
    const Matrix nll = nll_cost_matrix(spec, data, one.atoms).values;
    const double lambda = 0.8;
    EXPECT_NEAR(mixture_objective(data, one, lambda), nll.mean() - lambda * std::log(4.0), 1e-12);

    const Mixture two{spec, probs({0.5, 0.5}), {probs({-1}), probs({3})}};
    const Matrix nll2 = nll_cost_matrix(spec, data, two.atoms).values;
    EXPECT_NEAR(mixture_objective(data, two, 1e-6), nll2.rowwise().minCoeff().mean(), 1e-5);
}

TEST(FitMixture, DegenerateData)
{
    const Sample same = points_1d({2.5, 2.5, 2.5, 2.5});
    MixtureFitConfig cfg;
    cfg.K = 1;
    const auto fit = fit_mixture(same, FamilySpec::gaussian(1), cfg);
    EXPECT_NEAR(fit.mixture.atoms[0](0), 2.5, 1e-12);
    EXPECT_NEAR(fit.mixture.weights(0), 1.0, 1e-15);
}

TEST(FitMixture, RecoversSeparatedClusters)
{
    const Sample data = two_clusters(17, 200);
    MixtureFitConfig cfg;
    cfg.K = 2;
    cfg.lambda = 1.0;
    cfg.seed = 17;
    const auto fit = fit_mixture(data, FamilySpec::gaussian(1), cfg);
    std::vector<std::pair<double, double>> comps;
    for (int k = 0; k < 2; ++k) comps.emplace_back(fit.mixture.atoms[k](0), fit.mixture.weights(k));
    std::sort(comps.begin(), comps.end());
    EXPECT_NEAR(comps[0].first, -5.0, 0.3);
    EXPECT_NEAR(comps[1].first, 5.0, 0.3);
    EXPECT_NEAR(comps[0].second, 0.5, 0.1);
    EXPECT_NEAR(comps[1].second, 0.5, 0.1);
    EXPECT_TRUE(fit.converged);
}

TEST(FitMixture, MonotoneTraceOnBothFamilies)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        MixtureFitConfig cfg;
        cfg.K = 4;
        cfg.lambda = 0.5;
        cfg.seed = seed;
        const auto g = fit_mixture(two_clusters(seed, 80), FamilySpec::gaussian(1), cfg);
        EXPECT_TRUE(non_increasing(g.trace)) << "gaussian seed " << seed;
        const auto c = fit_mixture(random_categories(seed, 80, 9), FamilySpec::categorical(9), cfg);
        EXPECT_TRUE(non_increasing(c.trace)) << "categorical seed " << seed;
        EXPECT_NEAR(c.mixture.weights.sum(), 1.0, 1e-12);
        EXPECT_GE(c.mixture.weights.minCoeff(), 0.0);
    }
}

TEST(FitMixture, ConvergedStateIsAFixedPoint)
{
    const Sample data = two_clusters(8, 100);
    MixtureFitConfig cfg;
    cfg.K = 3;
    cfg.tol = 1e-14;
    cfg.max_iter = 5000;
    cfg.seed = 8;
    const auto fit = fit_mixture(data, FamilySpec::gaussian(1), cfg);
    MixtureFitConfig again = cfg;
    again.init = MixtureInit::Provided;
    again.initial = fit.mixture;
    again.max_iter = 1;
    const auto step = fit_mixture(data, FamilySpec::gaussian(1), again);
    ASSERT_EQ(step.trace.size(), 2u);
    EXPECT_LT(std::abs(step.trace[1] - step.trace[0]), 1e-10);
}

TEST(FitMixture, DeterministicForASeed)
{
    const Sample data = random_categories(2, 60, 5);
    MixtureFitConfig cfg;
    cfg.K = 3;
    cfg.seed = 99;
    const auto a = fit_mixture(data, FamilySpec::categorical(5), cfg);
    const auto b = fit_mixture(data, FamilySpec::categorical(5), cfg);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.mixture.weights, b.mixture.weights);
}

TEST(FitMixture, RejectsBadInputs)
{
    MixtureFitConfig cfg;
    EXPECT_THROW(fit_mixture(Sample{}, FamilySpec::gaussian(1), cfg), DataError);
    cfg.K = 0;
    EXPECT_THROW(fit_mixture(points_1d({1}), FamilySpec::gaussian(1), cfg), std::invalid_argument);
    cfg.K = 1;
    cfg.lambda = 0.0;
    EXPECT_THROW(fit_mixture(points_1d({1}), FamilySpec::gaussian(1), cfg), std::invalid_argument);
}
