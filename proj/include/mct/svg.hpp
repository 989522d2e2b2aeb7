#pragma once
#include "mct/dataset.hpp"
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/multilevel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace mct {

inline constexpr std::array<const char*, 13> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
                                                      "#393b79", "#ad494a", "#637939"};

struct SvgOptions
{
    int panel_size = 240;
    int columns = 3;
    int max_points_per_group = 50; // continuous scatter subsampling stride target
};

namespace detail {

inline std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

// Mean category probabilities of a categorical mixture.
inline Vector mixture_mean_probabilities(const Mixture& m)
{
    Vector p = Vector::Zero(m.spec.dim);
    for (std::size_t l = 0; l < m.size(); ++l) p += m.weights(static_cast<Eigen::Index>(l)) * softmax(m.atoms[l]);
    return p;
}

// White to the panel color by intensity t in [0, 1].
inline std::string shade(const char* hex, double t)
{
    unsigned r = 0, g = 0, b = 0;
    std::sscanf(hex, "#%02x%02x%02x", &r, &g, &b);
    auto mix = [t](unsigned c) { return static_cast<unsigned>(std::lround(255.0 + t * (static_cast<double>(c) - 255.0))); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(r), mix(g), mix(b));
    return buf;
}

inline int grid_side(int dim)
{
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    return side * side == dim ? side : 0;
}

} // namespace detail

/// True when render_svg can draw the model's family and dimension.
inline bool svg_supported(const FamilySpec& spec)
{
    return (spec.is_gaussian() && spec.dim == 2) || (spec.is_categorical() && detail::grid_side(spec.dim) > 0);
}

/// One panel per global cluster. Gaussian 2-d: member groups' points in the
/// cluster color, global atom means with one-sigma circles. Categorical with a
/// square number of categories: heatmap of the global mixture mean.
inline std::string render_svg(const MctModel& model, const GroupedDataset& data, const SvgOptions& opts = {})
{
    if (!svg_supported(model.spec))
        throw DataError("plotting supports 2-d Gaussian or square-grid categorical models only");
    if (data.size() != model.groups()) throw DataError("dataset and model have different group counts");

    const int C = static_cast<int>(model.clusters());
    const int cols = std::max(1, std::min(opts.columns, C));
    const int rows = (C + cols - 1) / cols;
    const int ps = opts.panel_size, pad = 10, title = 18;
    const int width = cols * (ps + pad) + pad, height = rows * (ps + pad + title) + pad;
    const auto assignment = assign_groups(model);

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\""
         + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
    if (model.spec.is_gaussian()) {
        lo_x = lo_y = std::numeric_limits<double>::infinity();
        hi_x = hi_y = -std::numeric_limits<double>::infinity();
        for (const auto& g : data.groups)
            for (Eigen::Index i = 0; i < g.sample.points.rows(); ++i) {
                lo_x = std::min(lo_x, g.sample.points(i, 0));
                hi_x = std::max(hi_x, g.sample.points(i, 0));
                lo_y = std::min(lo_y, g.sample.points(i, 1));
                hi_y = std::max(hi_y, g.sample.points(i, 1));
            }
        const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
        const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
        lo_x = cx - 0.55 * span;
        hi_x = cx + 0.55 * span;
        lo_y = cy - 0.55 * span;
        hi_y = cy + 0.55 * span;
    }

    for (int m = 0; m < C; ++m) {
        const int x0 = pad + (m % cols) * (ps + pad);
        const int y0 = pad + (m / cols) * (ps + pad + title);
        const char* color = kPalette[static_cast<std::size_t>(m) % kPalette.size()];
        const Mixture& global = model.globals[static_cast<std::size_t>(m)];
        out += "<g id=\"cluster" + std::to_string(m) + "\">\n";
        out += "<text x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(y0 + 13) + "\">cluster "
             + std::to_string(m) + " (b=" + detail::fmt(model.b(m)) + ")</text>\n";
        const int top = y0 + title;
        out += "<rect x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(top) + "\" width=\"" + std::to_string(ps)
             + "\" height=\"" + std::to_string(ps) + "\" fill=\"none\" stroke=\"#444\"/>\n";

        if (model.spec.is_gaussian()) {
            auto sx = [&](double x) { return x0 + (x - lo_x) / (hi_x - lo_x) * ps; };
            auto sy = [&](double y) { return top + (hi_y - y) / (hi_y - lo_y) * ps; };
            for (std::size_t j = 0; j < data.size(); ++j) {
                if (assignment[j] != m) continue;
                const Matrix& pts = data.groups[j].sample.points;
                const Eigen::Index stride = std::max<Eigen::Index>(1, pts.rows() / std::max(1, opts.max_points_per_group));
                for (Eigen::Index i = 0; i < pts.rows(); i += stride)
                    out += "<circle cx=\"" + detail::fmt(sx(pts(i, 0))) + "\" cy=\"" + detail::fmt(sy(pts(i, 1)))
                         + "\" r=\"1.2\" fill=\"" + color + "\" fill-opacity=\"0.5\"/>\n";
            }
            const double radius = std::sqrt(model.spec.sigma2) / (hi_x - lo_x) * ps;
            for (const auto& atom : global.atoms) {
                const Vector mean = grad_log_partition(model.spec, atom);
                out += "<circle cx=\"" + detail::fmt(sx(mean(0))) + "\" cy=\"" + detail::fmt(sy(mean(1))) + "\" r=\""
                     + detail::fmt(radius) + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
                out += "<circle cx=\"" + detail::fmt(sx(mean(0))) + "\" cy=\"" + detail::fmt(sy(mean(1)))
                     + "\" r=\"2.5\" fill=\"black\"/>\n";
            }
        } else {
            const int side = detail::grid_side(model.spec.dim);
            const Vector p = detail::mixture_mean_probabilities(global);
            const double peak = std::max(p.maxCoeff(), 1e-300);
            const double cell = static_cast<double>(ps) / side;
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c)
                    out += "<rect x=\"" + detail::fmt(x0 + c * cell) + "\" y=\"" + detail::fmt(top + r * cell)
                         + "\" width=\"" + detail::fmt(cell) + "\" height=\"" + detail::fmt(cell) + "\" fill=\""
                         + detail::shade(color, p(r * side + c) / peak) + "\"/>\n";
        }
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

inline void save_svg(const MctModel& model, const GroupedDataset& data, const std::string& path,
                     const SvgOptions& opts = {})
{
    const std::string svg = render_svg(model, data, opts);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << svg;
}

} // namespace mct
