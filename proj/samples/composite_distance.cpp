// Composite transportation distance between two Gaussian mixtures, and the
// regularized barycenter of three of them.
#include "mct/mct.hpp"

#include <cstdio>

namespace {

mct::Mixture gaussian_mixture(std::initializer_list<std::array<double, 2>> means, std::initializer_list<double> weights)
{
    mct::Mixture m{mct::FamilySpec::gaussian(2), mct::Vector(static_cast<Eigen::Index>(weights.size())), {}};
    Eigen::Index k = 0;
    for (double w : weights) m.weights(k++) = w;
    // Unit variance: the natural parameter is the mean.
    for (const auto& mu : means) m.atoms.push_back(mct::Vector{{mu[0], mu[1]}});
    return m;
}

} // namespace

int main()
{
    const auto p = gaussian_mixture({{0, 0}, {4, 0}}, {0.5, 0.5});
    const auto q = gaussian_mixture({{0, 1}, {4, 1}}, {0.3, 0.7});
    const auto r = gaussian_mixture({{2, 3}}, {1.0});

    for (double lambda : {0.0, 0.01, 0.1, 1.0})
        std::printf("W_lambda(p, q), lambda = %-5g: %.6f\n", lambda, mct::composite_distance(p, q, lambda));
    std::printf("W_0.1(p, r): %.6f\n", mct::composite_distance(p, r, 0.1));

    mct::BarycenterConfig cfg;
    cfg.L = 2;
    cfg.lambda = 0.1;
    cfg.seed = 1;
    const auto fit = mct::fit_barycenter({p, q, r}, p.spec, cfg);
    std::printf("barycenter after %d iterations (objective %.6f):\n", fit.iterations, fit.trace.back());
    for (std::size_t l = 0; l < fit.barycenter.size(); ++l) {
        const mct::Vector mean = mct::grad_log_partition(p.spec, fit.barycenter.atoms[l]);
        std::printf("  weight %.3f  mean (%.3f, %.3f)\n", fit.barycenter.weights(static_cast<Eigen::Index>(l)),
                    mean(0), mean(1));
    }
}
