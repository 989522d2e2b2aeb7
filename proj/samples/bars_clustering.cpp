// Multilevel clustering of a reduced bar-topic dataset: fits the model,
// reports the group clustering scores and writes the global clusters as SVG.
#include "mct/mct.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv)
{
    const std::string svg_path = argc > 1 ? argv[1] : "bars_clusters.svg";

    mct::GeneratorConfig g = mct::GeneratorConfig::bars_defaults();
    g.J = 100;
    g.seed = 7;
    const mct::GroupedDataset data = mct::generate(g);

    mct::MctConfig cfg;
    cfg.K = {4};
    cfg.C = 5;
    cfg.L = 4;
    cfg.lambda_l = 1.0;
    cfg.lambda_g = 1.6;
    cfg.lambda_a = 0.2;
    cfg.seed = 7;
    const mct::MctModel model = mct::fit_mct(data, cfg, [](int it, double value) {
        if (it % 5 == 0) std::printf("iteration %3d  objective %.6f\n", it, value);
    });

    const auto pred = mct::assign_groups(model);
    std::printf("%s after %d iterations\n", model.converged ? "converged" : "stopped", model.iterations);
    std::printf("NMI %.3f  ARI %.3f  AMI %.3f\n", mct::nmi(*data.labels, pred), mct::ari(*data.labels, pred),
                mct::ami(*data.labels, pred));
    mct::save_svg(model, data, svg_path);
    std::printf("wrote %s\n", svg_path.c_str());
}
