#pragma once
#include "mct/dataset.hpp"
#include "mct/expfam.hpp"
#include "mct/random.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mct {

enum class GeneratorKind { ContinuousGmm, BarTopics };

struct GeneratorConfig
{
    GeneratorKind kind = GeneratorKind::ContinuousGmm;
    int J = 100;
    int n_per_group = 500;
    int dim = 2;
    int C_true = 6;
    std::uint64_t seed = 0;
    // Gaussian templates: inner and outer ring radii, component variance.
    double inner_radius = 4.0;
    double outer_radius = 8.0;
    double sigma2 = 0.5;

    static GeneratorConfig continuous_defaults()
    {
        return GeneratorConfig{};
    }

    static GeneratorConfig bars_defaults()
    {
        GeneratorConfig c;
        c.kind = GeneratorKind::BarTopics;
        c.J = 500;
        c.n_per_group = 100;
        c.dim = 25;
        c.C_true = 5;
        return c;
    }

    void validate() const
    {
        if (J < 1) throw std::invalid_argument("generator needs at least one group");
        if (n_per_group < 1) throw std::invalid_argument("generator needs at least one point per group");
        if (C_true < 1) throw std::invalid_argument("generator needs at least one cluster");
        if (kind == GeneratorKind::ContinuousGmm) {
            if (dim < 2) throw std::invalid_argument("continuous generator needs dim >= 2");
            if (!(sigma2 > 0.0)) throw std::invalid_argument("continuous generator needs sigma2 > 0");
        } else {
            if (dim != 25) throw std::invalid_argument("bar topics are defined on a 5x5 grid (dim 25)");
            if (C_true > 5) throw std::invalid_argument("bar topics support at most 5 clusters");
        }
    }
};

namespace detail {

// Cluster labels covering every cluster as evenly as possible, in random order.
inline std::vector<int> balanced_labels(int J, int C, Rng& rng)
{
    std::vector<int> labels(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) labels[j] = j % C;
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
    return labels;
}

} // namespace detail

/// Means of the three components of each Gaussian cluster template. C inner
/// points sit on a circle of radius inner_radius, C outer points on a circle
/// of radius outer_radius rotated by half a step; template c uses inner point
/// c and outer points c and c + 1, so neighboring templates share one outer
/// component. Coordinates beyond the first two are zero.
inline std::vector<std::array<Vector, 3>> gmm_templates(const GeneratorConfig& config)
{
    const int C = config.C_true;
    auto ring = [&](double radius, double angle) {
        Vector p = Vector::Zero(config.dim);
        p(0) = radius * std::cos(angle);
        p(1) = radius * std::sin(angle);
        return p;
    };
    std::vector<std::array<Vector, 3>> out;
    for (int c = 0; c < C; ++c) {
        const double step = 2.0 * std::numbers::pi / C;
        out.push_back({ring(config.inner_radius, step * c), ring(config.outer_radius, step * (c + 0.5)),
                       ring(config.outer_radius, step * (((c + 1) % C) + 0.5))});
    }
    return out;
}

inline GroupedDataset generate_continuous(const GeneratorConfig& config)
{
    if (config.kind != GeneratorKind::ContinuousGmm) throw std::invalid_argument("generator kind is not continuous");
    config.validate();
    Rng rng(config.seed);
    const auto templates = gmm_templates(config);
    const double sd = std::sqrt(config.sigma2);

    GroupedDataset data;
    data.spec = FamilySpec::gaussian(config.dim, config.sigma2);
    data.labels = detail::balanced_labels(config.J, config.C_true, rng);
    for (int j = 0; j < config.J; ++j) {
        const auto& tmpl = templates[static_cast<std::size_t>((*data.labels)[j])];
        Matrix points(config.n_per_group, config.dim);
        for (int i = 0; i < config.n_per_group; ++i) {
            const Vector& mean = tmpl[rng.below(3)];
            for (int d = 0; d < config.dim; ++d) points(i, d) = mean(d) + sd * rng.normal();
        }
        data.groups.push_back({"g" + std::to_string(j), Sample::continuous(std::move(points))});
    }
    data.meta = {{"generator", "continuous"}, {"seed", std::to_string(config.seed)},
                 {"clusters", std::to_string(config.C_true)}, {"sigma2", std::to_string(config.sigma2)}};
    return data;
}

/// Cells of the 10 bar topics on the 5x5 grid: topics 0..4 are rows, 5..9 are
/// columns; cell index is row * 5 + column.
inline std::array<std::array<int, 5>, 10> bar_topic_cells()
{
    std::array<std::array<int, 5>, 10> cells{};
    for (int t = 0; t < 5; ++t)
        for (int k = 0; k < 5; ++k) {
            cells[t][k] = t * 5 + k;
            cells[5 + t][k] = k * 5 + t;
        }
    return cells;
}

/// Topic sets of the five clusters. Every pair of clusters shares exactly two
/// topics; the first cluster consists of horizontal bars only.
inline std::array<std::array<int, 4>, 5> bar_cluster_topics()
{
    return {{{0, 1, 2, 3}, {0, 1, 4, 5}, {0, 1, 6, 7}, {0, 2, 4, 6}, {1, 2, 4, 7}}};
}

/// Each point: a topic uniformly from the group's cluster, then a cell
/// uniformly from the topic's bar.
inline GroupedDataset generate_bars(const GeneratorConfig& config)
{
    if (config.kind != GeneratorKind::BarTopics) throw std::invalid_argument("generator kind is not bar topics");
    config.validate();
    Rng rng(config.seed);
    const auto cells = bar_topic_cells();
    const auto clusters = bar_cluster_topics();

    GroupedDataset data;
    data.spec = FamilySpec::categorical(config.dim);
    data.labels = detail::balanced_labels(config.J, config.C_true, rng);
    for (int j = 0; j < config.J; ++j) {
        const auto& topics = clusters[static_cast<std::size_t>((*data.labels)[j])];
        std::vector<int> points(static_cast<std::size_t>(config.n_per_group));
        for (auto& p : points) p = cells[topics[rng.below(4)]][rng.below(5)];
        data.groups.push_back({"g" + std::to_string(j), Sample::discrete(std::move(points))});
    }
    data.meta = {{"generator", "bars"}, {"seed", std::to_string(config.seed)},
                 {"clusters", std::to_string(config.C_true)}};
    return data;
}

inline GroupedDataset generate(const GeneratorConfig& config)
{
    return config.kind == GeneratorKind::BarTopics ? generate_bars(config) : generate_continuous(config);
}

} // namespace mct
