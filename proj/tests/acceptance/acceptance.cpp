// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any fails.
#include "../unit/helpers.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mct;
using namespace mct::testing;

namespace {

struct Outcome
{
    bool pass = true;
    std::string detail;
};

using Criterion = std::function<Outcome()>;

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fixed(double x, int digits = 3)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string sci(double x)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int g_threads = 1;
std::string g_workdir;

Outcome bars_recovery()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    std::ostringstream detail;
    for (int K = 2; K <= 4; ++K) {
        std::vector<double> scores;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            GeneratorConfig g = GeneratorConfig::bars_defaults();
            g.seed = seed;
            const GroupedDataset data = generate(g);
            MctConfig cfg;
            cfg.K = {K};
            cfg.C = 5;
            cfg.L = 4;
            cfg.lambda_l = 1.0;
            cfg.lambda_g = 1.6;
            cfg.lambda_a = 0.2;
            cfg.seed = seed;
            cfg.threads = g_threads;
            scores.push_back(nmi(*data.labels, assign_groups(fit_mct(data, cfg))));
        }
        const double med = median(scores);
        out.pass = out.pass && med >= 0.90;
        detail << "K=" << K << " median NMI " << fixed(med) << "; ";
    }
    const double elapsed = seconds_since(start);
    out.pass = out.pass && elapsed <= 600.0;
    detail << "runtime " << fixed(elapsed, 0) << " s (limit 600)";
    out.detail = detail.str();
    return out;
}

Outcome continuous_recovery()
{
    Outcome out;
    std::vector<double> scores;
    double min_b = 1.0;
    bool panels_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        GeneratorConfig g = GeneratorConfig::continuous_defaults();
        g.seed = seed;
        const GroupedDataset data = generate(g);
        MctConfig cfg;
        cfg.K = {3};
        cfg.C = 6;
        cfg.L = 3;
        cfg.lambda_l = 1.3;
        cfg.lambda_g = 10.0;
        cfg.seed = seed;
        cfg.threads = g_threads;
        const MctModel model = fit_mct(data, cfg);
        scores.push_back(nmi(*data.labels, assign_groups(model)));
        min_b = std::min(min_b, model.b.minCoeff());
        const std::string svg = render_svg(model, data);
        std::size_t panels = 0;
        for (std::size_t pos = svg.find("<g id=\"cluster"); pos != std::string::npos;
             pos = svg.find("<g id=\"cluster", pos + 1))
            ++panels;
        panels_ok = panels_ok && panels == 6;
        if (seed == 1) save_svg(model, data, (std::filesystem::path(g_workdir) / "continuous_seed1.svg").string());
    }
    const double med = median(scores);
    out.pass = med >= 0.90 && min_b > 0.02 && panels_ok;
    out.detail = "median NMI " + fixed(med) + "; smallest b_m " + fixed(min_b) + "; 6 SVG panels "
               + (panels_ok ? "yes" : "no");
    return out;
}

Sample mixture_data(std::uint64_t seed, bool gaussian)
{
    Rng rng(seed);
    const int n = 120;
    if (gaussian) {
        Matrix pts(n, 2);
        for (int i = 0; i < n; ++i) {
            const double cx = 6.0 * static_cast<double>(rng.below(3)) - 6.0;
            pts.row(i) << cx + rng.normal(), 0.5 * cx + rng.normal();
        }
        return Sample::continuous(pts);
    }
    std::vector<int> cats(n);
    for (auto& c : cats) c = rng.uniform() < 0.6 ? static_cast<int>(rng.below(4)) : static_cast<int>(rng.below(12));
    return Sample::discrete(cats);
}

Outcome mixture_monotonicity()
{
    int bad = 0, runs = 0;
    for (bool gaussian : {true, false}) {
        const FamilySpec spec = gaussian ? FamilySpec::gaussian(2) : FamilySpec::categorical(12);
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            MixtureFitConfig cfg;
            cfg.K = 2 + static_cast<int>(seed % 4);
            cfg.lambda = 0.25 * static_cast<double>(1 + seed % 5);
            cfg.seed = seed;
            cfg.tol = 1e-10;
            cfg.max_iter = 300;
            bad += !non_increasing(fit_mixture(mixture_data(seed, gaussian), spec, cfg).trace);
            ++runs;
        }
    }
    return {bad == 0, std::to_string(runs - bad) + "/" + std::to_string(runs) + " traces non-increasing"};
}

Outcome mct_monotonicity()
{
    int bad = 0, runs = 0;
    for (bool gaussian : {true, false}) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const GroupedDataset data = gaussian ? small_continuous(seed) : small_bars(seed);
            MctConfig cfg;
            cfg.K = {3};
            cfg.C = gaussian ? 3 : 5;
            cfg.L = 3;
            cfg.lambda_l = 1.0;
            cfg.lambda_g = gaussian ? 2.0 : 1.6;
            if (seed % 2 == 0) cfg.lambda_a = 0.2;
            cfg.zeta = seed % 3 == 0 ? 0.5 : 1.0;
            cfg.max_iter = 15;
            cfg.seed = seed;
            cfg.threads = g_threads;
            bad += !non_increasing(fit_mct(data, cfg).trace);
            ++runs;
        }
    }
    return {bad == 0, std::to_string(runs - bad) + "/" + std::to_string(runs) + " traces non-increasing"};
}

Outcome barycenter_monotonicity()
{
    Rng rng(2024);
    int bad = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const FamilySpec spec = trial % 2 ? FamilySpec::categorical(6) : FamilySpec::gaussian(2);
        std::vector<Mixture> inputs;
        for (int j = 0; j < 5; ++j) {
            const int K = 2 + static_cast<int>(rng.below(3));
            Mixture m{spec, random_simplex(rng, K), {}};
            for (int k = 0; k < K; ++k) {
                if (spec.is_gaussian()) m.atoms.push_back(probs({3.0 * rng.normal(), 3.0 * rng.normal()}));
                else m.atoms.push_back(gauge_fix(spec, log_probs(random_simplex(rng, 6))));
            }
            inputs.push_back(m);
        }
        BarycenterConfig cfg;
        cfg.L = 3;
        cfg.lambda = 0.1 + 0.1 * (trial % 4);
        cfg.coefficients = random_simplex(rng, 5);
        cfg.seed = static_cast<std::uint64_t>(trial);
        bad += !non_increasing(fit_barycenter(inputs, spec, cfg).trace);
    }
    return {bad == 0, std::to_string(20 - bad) + "/20 traces non-increasing"};
}

Outcome sinkhorn_correctness()
{
    Rng rng(6);
    double worst_value = 0.0, worst_marginal = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Matrix M = random_matrix(rng, 2, 2);
        Vector r(2), c(2);
        const double r0 = rng.uniform(), c0 = rng.uniform();
        r << r0, 1.0 - r0;
        c << c0, 1.0 - c0;
        const auto res = sinkhorn(M, r, c, 1e-4);
        worst_value = std::max(worst_value, std::abs(res.transport_value - exact_ot_2x2(M, r, c).value));
        worst_marginal = std::max(worst_marginal, res.plan.marginal_error());
    }
    return {worst_value < 1e-3 && worst_marginal < 1e-9,
            "worst value gap " + sci(worst_value) + "; worst marginal L1 " + sci(worst_marginal)};
}

Outcome expfam_calculus()
{
    Rng rng(7);
    double worst_fd = 0.0, worst_kl = 0.0, worst_inv = 0.0;
    for (const auto& spec : {FamilySpec::gaussian(3, 0.8), FamilySpec::categorical(6)}) {
        for (int trial = 0; trial < 100; ++trial) {
            Vector theta(spec.dim), other(spec.dim);
            for (int k = 0; k < spec.dim; ++k) {
                theta(k) = 4.0 * rng.uniform() - 2.0;
                other(k) = 4.0 * rng.uniform() - 2.0;
            }
            theta = gauge_fix(spec, theta);
            other = gauge_fix(spec, other);
            const Vector grad = grad_log_partition(spec, theta);
            for (int k = 0; k < spec.dim; ++k) {
                Vector up = theta, down = theta;
                up(k) += 1e-6;
                down(k) -= 1e-6;
                const double fd = (log_partition(spec, up) - log_partition(spec, down)) / 2e-6;
                worst_fd = std::max(worst_fd, std::abs(fd - grad(k)) / std::max(1.0, std::abs(grad(k))));
            }
            double direct = 0.0;
            if (spec.is_gaussian()) {
                direct = (spec.sigma2 * (theta - other)).squaredNorm() / (2.0 * spec.sigma2);
            } else {
                direct = kl_direct(softmax(other), softmax(theta));
            }
            worst_kl = std::max(worst_kl, std::abs(bregman_divergence(spec, theta, other) - direct));
            const Vector mean = spec.is_gaussian() ? Vector(spec.sigma2 * other) : Vector(random_simplex(rng, spec.dim));
            worst_inv = std::max(worst_inv,
                                 (grad_log_partition(spec, mean_to_natural(spec, mean)) - mean).cwiseAbs().maxCoeff());
        }
    }
    return {worst_fd < 1e-5 && worst_kl < 1e-12 && worst_inv < 1e-10,
            "gradient rel err " + sci(worst_fd) + "; Bregman-KL gap " + sci(worst_kl) + "; inverse gap "
                + sci(worst_inv)};
}

Outcome decoupling()
{
    double worst = 0.0;
    for (bool gaussian : {true, false}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const GroupedDataset data = gaussian ? small_continuous(seed) : small_bars(seed);
            MctConfig cfg;
            cfg.K = {3};
            cfg.C = 3;
            cfg.L = 2;
            cfg.zeta = 0.0;
            cfg.tol = 0.0;
            cfg.max_iter = 10;
            cfg.seed = seed;
            cfg.threads = g_threads;
            const MctModel model = fit_mct(data, cfg);
            for (std::size_t j = 0; j < data.size(); ++j) {
                MixtureFitConfig mc;
                mc.K = 3;
                mc.lambda = cfg.lambda_l;
                mc.max_iter = cfg.local_warmup + cfg.max_iter;
                mc.tol = 0.0;
                mc.seed = derive_seed(seed, j);
                const Sample& s = data.groups[j].sample;
                const double independent = mixture_objective(s, fit_mixture(s, data.spec, mc).mixture, cfg.lambda_l);
                const double joint = mixture_objective(s, model.locals[j], cfg.lambda_l);
                worst = std::max(worst, std::abs(joint - independent) / std::max(1.0, std::abs(independent)));
            }
        }
    }
    return {worst < 1e-9, "worst relative objective gap " + sci(worst)};
}

Outcome metric_sanity()
{
    const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    const double orthogonal = ari(a, b);
    const std::vector<int> same{0, 1, 1, 2, 2, 2, 3};
    const bool ones = nmi(same, same) == 1.0 && ari(same, same) == 1.0 && std::abs(ami(same, same) - 1.0) < 1e-12;
    Rng rng(9);
    double ami_sum = 0.0, ari_sum = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        std::vector<int> x(1000), y(1000);
        for (auto& v : x) v = static_cast<int>(rng.below(5));
        for (auto& v : y) v = static_cast<int>(rng.below(5));
        ami_sum += ami(x, y);
        ari_sum += ari(x, y);
    }
    const bool pass = orthogonal == -0.5 && ones && std::abs(ami_sum / 20) <= 0.05 && std::abs(ari_sum / 20) <= 0.05;
    return {pass, "orthogonal ARI " + fixed(orthogonal, 6) + "; identity all 1 " + (ones ? "yes" : "no")
                      + "; random mean AMI " + sci(ami_sum / 20) + ", ARI " + sci(ari_sum / 20)};
}

Outcome persistence()
{
    const std::filesystem::path dir(g_workdir);
    bool datasets_ok = true;
    auto bars = GeneratorConfig::bars_defaults();
    bars.seed = 10;
    auto cont = GeneratorConfig::continuous_defaults();
    cont.seed = 10;
    for (const auto& cfg : {bars, cont}) {
        const GroupedDataset data = generate(cfg);
        const std::string path = (dir / "persist_data.json").string();
        save_dataset(data, path);
        const GroupedDataset back = load_dataset(path);
        datasets_ok = datasets_ok && back.spec == data.spec && back.groups == data.groups && back.labels == data.labels
                   && back.meta == data.meta;
    }
    const GroupedDataset data = small_bars(10);
    MctConfig cfg;
    cfg.K = {3};
    cfg.C = 5;
    cfg.L = 4;
    cfg.lambda_g = 1.6;
    cfg.lambda_a = 0.2;
    cfg.max_iter = 10;
    cfg.seed = 10;
    const MctModel model = fit_mct(data, cfg);
    const std::string path = (dir / "persist_model.json").string();
    save_model(model, path);
    const MctModel back = load_model(path);
    const double gap = std::abs(mct_objective(data, back) - model.trace.back());
    const bool model_ok = assign_groups(back) == assign_groups(model) && back.trace == model.trace
                       && gap <= 1e-9 * std::max(1.0, std::abs(model.trace.back()));
    return {datasets_ok && model_ok, std::string("datasets lossless ") + (datasets_ok ? "yes" : "no")
                                         + "; model objective gap " + sci(gap)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"MCT acceptance suite"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--threads", g_threads, "worker threads for the multilevel fits")->check(CLI::PositiveNumber);
    g_workdir = std::filesystem::temp_directory_path().string();
    app.add_option("--workdir", g_workdir, "directory for round-trip files and the SVG");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, Criterion>> criteria{
        {"bar-topic recovery", bars_recovery},
        {"continuous recovery", continuous_recovery},
        {"mixture fit monotonicity", mixture_monotonicity},
        {"multilevel fit monotonicity", mct_monotonicity},
        {"barycenter monotonicity", barycenter_monotonicity},
        {"sinkhorn correctness", sinkhorn_correctness},
        {"exponential-family calculus", expfam_calculus},
        {"decoupling equivalence", decoupling},
        {"metric sanity", metric_sanity},
        {"persistence", persistence},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome result;
        try {
            result = criteria[i].second();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        failed += !result.pass;
        std::printf("%s %2d %s: %s [%.1f s]\n", result.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    result.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
