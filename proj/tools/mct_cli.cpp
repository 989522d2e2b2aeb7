// Command-line front end: generate data, fit models, evaluate and plot.
#include "mct/mct.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNotConverged = 3 };

enum class LogLevel { Error, Info, Debug };

LogLevel log_level()
{
    const char* env = std::getenv("MCT_LOG");
    const std::string v = env ? env : "error";
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
}

void log(LogLevel level, const std::string& msg)
{
    static const LogLevel current = log_level();
    if (level <= current) std::cerr << "[mct] " << msg << "\n";
}

struct Options
{
    std::string data, model, out, svg, kind = "bars";
    int K = 2, C = 2, L = 2, max_iter = 100, threads = 1;
    double zeta = 1.0, lambda_l = 1.0, lambda_g = 1.0, tol = 1e-6;
    std::optional<double> lambda_a;
    std::uint64_t seed = 0;
    bool json = false;
    std::optional<int> groups, points, clusters;
    int group = 0;
    std::optional<int> cluster;
    std::string from = "local:0", to = "global:0";
};

void add_hyper(CLI::App* cmd, Options& o, bool global)
{
    cmd->add_option("--k", o.K, "components per local mixture")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda-l", o.lambda_l, "local entropic penalty")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", o.tol, "relative objective tolerance")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-iter", o.max_iter, "iteration cap")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "random seed");
    if (!global) return;
    cmd->add_option("--c", o.C, "number of global clusters")->check(CLI::PositiveNumber);
    cmd->add_option("--l", o.L, "components per global mixture")->check(CLI::PositiveNumber);
    cmd->add_option("--zeta", o.zeta, "local/global trade-off")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-g", o.lambda_g, "global entropic penalty")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda-a", o.lambda_a, "assignment entropic penalty (default: lambda-g)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

mct::MctConfig mct_config(const Options& o)
{
    mct::MctConfig c;
    c.K = {o.K};
    c.C = o.C;
    c.L = o.L;
    c.zeta = o.zeta;
    c.lambda_l = o.lambda_l;
    c.lambda_g = o.lambda_g;
    c.lambda_a = o.lambda_a;
    c.max_iter = o.max_iter;
    c.tol = o.tol;
    c.seed = o.seed;
    c.threads = o.threads;
    return c;
}

void add_metrics(nlohmann::json& summary, const std::vector<int>& labels, const std::vector<int>& pred)
{
    summary["nmi"] = mct::nmi(labels, pred);
    summary["ari"] = mct::ari(labels, pred);
    summary["ami"] = mct::ami(labels, pred);
}

// Parses "local:j" or "global:m" against a model.
const mct::Mixture& pick_mixture(const mct::MctModel& model, const std::string& ref)
{
    const auto colon = ref.find(':');
    const std::string kind = ref.substr(0, colon);
    std::size_t index = 0;
    try {
        index = colon == std::string::npos ? 0 : std::stoul(ref.substr(colon + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("mixture reference", "expected local:<j> or global:<m>, got '" + ref + "'");
    }
    if (colon == std::string::npos || (kind != "local" && kind != "global"))
        throw CLI::ValidationError("mixture reference", "expected local:<j> or global:<m>, got '" + ref + "'");
    const auto& pool = kind == "local" ? model.locals : model.globals;
    if (index >= pool.size()) throw CLI::ValidationError("mixture reference", "'" + ref + "' is out of range");
    return pool[index];
}

int run(int argc, char** argv)
{
    CLI::App app{"Multilevel clustering with composite transportation distance", "mct"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("generate", "write a synthetic grouped dataset");
    gen->add_option("--kind", o.kind, "bars or continuous")->check(CLI::IsMember({"bars", "continuous"}));
    gen->add_option("--seed", o.seed, "random seed");
    gen->add_option("--groups", o.groups, "number of groups")->check(CLI::PositiveNumber);
    gen->add_option("--points", o.points, "points per group")->check(CLI::PositiveNumber);
    gen->add_option("--clusters", o.clusters, "true clusters")->check(CLI::PositiveNumber);
    gen->add_option("--out", o.out, "dataset path")->required();

    auto* fmix = app.add_subcommand("fit-mixture", "fit one group's mixture");
    fmix->add_option("--data", o.data, "dataset path")->required();
    fmix->add_option("--group", o.group, "group index")->check(CLI::NonNegativeNumber);
    fmix->add_option("--out", o.out, "mixture path");
    add_hyper(fmix, o, false);

    auto* fit = app.add_subcommand("fit", "fit the multilevel model");
    fit->add_option("--data", o.data, "dataset path")->required();
    fit->add_option("--out", o.out, "model path");
    fit->add_option("--svg", o.svg, "also render the fitted clusters");
    add_hyper(fit, o, true);

    auto* bary = app.add_subcommand("barycenter", "barycenter of a model's local mixtures");
    bary->add_option("--model", o.model, "model path")->required();
    bary->add_option("--cluster", o.cluster, "restrict to groups assigned to this cluster");
    bary->add_option("--l", o.L, "barycenter components")->check(CLI::PositiveNumber);
    bary->add_option("--lambda-g", o.lambda_g, "entropic penalty")->check(CLI::PositiveNumber);
    bary->add_option("--tol", o.tol, "relative objective tolerance")->check(CLI::NonNegativeNumber);
    bary->add_option("--max-iter", o.max_iter, "iteration cap")->check(CLI::NonNegativeNumber);
    bary->add_option("--seed", o.seed, "random seed");
    bary->add_option("--out", o.out, "mixture path");

    auto* dist = app.add_subcommand("distance", "composite distance between two mixtures of a model");
    dist->add_option("--model", o.model, "model path")->required();
    dist->add_option("--from", o.from, "local:<j> or global:<m>");
    dist->add_option("--to", o.to, "local:<j> or global:<m>");
    dist->add_option("--lambda-g", o.lambda_g, "entropic penalty")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("evaluate", "score a model's assignments against dataset labels");
    eval->add_option("--model", o.model, "model path")->required();
    eval->add_option("--data", o.data, "dataset path")->required();

    auto* plot = app.add_subcommand("plot", "render a fitted model as SVG");
    plot->add_option("--model", o.model, "model path")->required();
    plot->add_option("--data", o.data, "dataset path")->required();
    plot->add_option("--out", o.out, "svg path")->required();

    for (auto* cmd : {gen, fmix, fit, bary, dist, eval, plot})
        cmd->add_flag("--json", o.json, "print a JSON summary on standard output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kOk : kUsage;
    }

    nlohmann::json summary;
    bool converged = true;
    auto* cmd = app.get_subcommands().front();
    summary["command"] = cmd->get_name();

    if (cmd == gen) {
        auto cfg = o.kind == "bars" ? mct::GeneratorConfig::bars_defaults() : mct::GeneratorConfig::continuous_defaults();
        cfg.seed = o.seed;
        if (o.groups) cfg.J = *o.groups;
        if (o.points) cfg.n_per_group = *o.points;
        if (o.clusters) cfg.C_true = *o.clusters;
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("generate", e.what());
        }
        const auto data = mct::generate(cfg);
        mct::save_dataset(data, o.out);
        log(LogLevel::Info, "wrote " + std::to_string(data.size()) + " groups to " + o.out);
        summary["groups"] = data.size();
        summary["points_per_group"] = cfg.n_per_group;
        summary["dim"] = data.spec.dim;
        summary["clusters"] = cfg.C_true;
        summary["out"] = o.out;
    } else if (cmd == fmix) {
        const auto data = mct::load_dataset(o.data);
        if (static_cast<std::size_t>(o.group) >= data.size()) throw CLI::ValidationError("--group", "group index out of range");
        mct::MixtureFitConfig mc;
        mc.K = o.K;
        mc.lambda = o.lambda_l;
        mc.max_iter = o.max_iter;
        mc.tol = o.tol;
        mc.seed = o.seed;
        const auto fitted = mct::fit_mixture(data.groups[static_cast<std::size_t>(o.group)].sample, data.spec, mc);
        for (std::size_t i = 0; i < fitted.trace.size(); ++i)
            log(LogLevel::Debug, "iteration " + std::to_string(i) + " objective " + std::to_string(fitted.trace[i]));
        converged = fitted.converged;
        if (!o.out.empty()) {
            nlohmann::json doc{{"schema_version", mct::kSchemaVersion},
                               {"spec", mct::to_json(data.spec)},
                               {"mixture", mct::to_json(fitted.mixture)},
                               {"trace", fitted.trace}};
            mct::detail::write_file(o.out, doc.dump());
        }
        summary["group"] = o.group;
        summary["objective"] = fitted.trace.back();
        summary["iterations"] = fitted.iterations;
        summary["converged"] = fitted.converged;
        summary["weights"] = std::vector<double>(fitted.mixture.weights.data(),
                                                 fitted.mixture.weights.data() + fitted.mixture.weights.size());
    } else if (cmd == fit) {
        const auto data = mct::load_dataset(o.data);
        const auto config = mct_config(o);
        try {
            config.validate(data.size());
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("fit", e.what());
        }
        log(LogLevel::Info, "fitting " + std::to_string(data.size()) + " groups");
        const auto model = mct::fit_mct(data, config, [](int it, double value) {
            log(LogLevel::Debug, "iteration " + std::to_string(it) + " objective " + std::to_string(value));
        });
        converged = model.converged;
        if (!o.out.empty()) mct::save_model(model, o.out);
        if (!o.svg.empty()) {
            if (mct::svg_supported(model.spec))
                mct::save_svg(model, data, o.svg);
            else
                log(LogLevel::Error, "plot skipped: unsupported family or dimension");
        }
        const auto assignment = mct::assign_groups(model);
        summary["groups"] = data.size();
        summary["clusters"] = model.clusters();
        summary["objective"] = model.trace.back();
        summary["iterations"] = model.iterations;
        summary["converged"] = model.converged;
        summary["b"] = std::vector<double>(model.b.data(), model.b.data() + model.b.size());
        summary["assignments"] = assignment;
        if (data.labels) add_metrics(summary, *data.labels, assignment);
        log(LogLevel::Info, "objective " + std::to_string(model.trace.back()) + " after "
                                + std::to_string(model.iterations) + " iterations");
    } else if (cmd == bary) {
        const auto model = mct::load_model(o.model);
        std::vector<mct::Mixture> members;
        const auto assignment = mct::assign_groups(model);
        for (std::size_t j = 0; j < model.groups(); ++j)
            if (!o.cluster || assignment[j] == *o.cluster) members.push_back(model.locals[j]);
        if (members.empty()) throw mct::DataError("no groups are assigned to the requested cluster");
        mct::BarycenterConfig bc;
        bc.L = o.L;
        bc.lambda = o.lambda_g;
        bc.tol = o.tol;
        bc.max_iter = o.max_iter;
        bc.seed = o.seed;
        const auto fitted = mct::fit_barycenter(members, model.spec, bc);
        converged = fitted.converged;
        if (!o.out.empty()) {
            nlohmann::json doc{{"schema_version", mct::kSchemaVersion},
                               {"spec", mct::to_json(model.spec)},
                               {"mixture", mct::to_json(fitted.barycenter)},
                               {"trace", fitted.trace}};
            mct::detail::write_file(o.out, doc.dump());
        }
        summary["inputs"] = members.size();
        summary["objective"] = fitted.trace.back();
        summary["iterations"] = fitted.iterations;
        summary["converged"] = fitted.converged;
        summary["weights"] = std::vector<double>(fitted.barycenter.weights.data(),
                                                 fitted.barycenter.weights.data() + fitted.barycenter.weights.size());
    } else if (cmd == dist) {
        const auto model = mct::load_model(o.model);
        summary["value"] = mct::composite_distance(pick_mixture(model, o.from), pick_mixture(model, o.to), o.lambda_g);
    } else if (cmd == eval) {
        const auto model = mct::load_model(o.model);
        const auto data = mct::load_dataset(o.data);
        if (!data.labels) throw mct::DataError("dataset has no labels to evaluate against");
        if (data.size() != model.groups()) throw mct::DataError("dataset and model have different group counts");
        add_metrics(summary, *data.labels, mct::assign_groups(model));
        summary["groups"] = data.size();
    } else if (cmd == plot) {
        const auto model = mct::load_model(o.model);
        const auto data = mct::load_dataset(o.data);
        mct::save_svg(model, data, o.out);
        summary["panels"] = model.clusters();
        summary["out"] = o.out;
    }

    summary["status"] = converged ? "ok" : "not_converged";
    if (o.json) {
        std::cout << summary.dump() << "\n";
    } else {
        for (const auto& [key, value] : summary.items())
            if (key != "command" && key != "assignments") std::cout << key << ": " << value.dump() << "\n";
    }
    if (!converged) {
        std::cerr << "mct: " << cmd->get_name() << " stopped at the iteration cap before meeting --tol\n";
        return kNotConverged;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "mct: " << e.what() << "\n";
        return kUsage;
    } catch (const mct::DataError& e) {
        std::cerr << "mct: " << e.what() << "\n";
        return kData;
    } catch (const mct::ConvergenceError& e) {
        std::cerr << "mct: " << e.what() << "\n";
        return kNotConverged;
    } catch (const std::invalid_argument& e) {
        std::cerr << "mct: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "mct: " << e.what() << "\n";
        return kData;
    }
}
