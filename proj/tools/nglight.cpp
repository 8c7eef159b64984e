#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "nglight/run.hpp"

using namespace nglight;

namespace {

struct Options {
    std::string config;
    std::string out;
    int workers = 0;
    std::string route;
    std::string drift;
};

RunConfig prepare(const Options& o)
{
    RunConfig cfg = load_config(o.config);
    if (!o.out.empty())
        cfg.output.directory = o.out;
    if (!o.route.empty())
        cfg.solver.route = parse_route(o.route);
    if (!o.drift.empty())
        cfg.solver.drift = parse_drift(o.drift);
    return cfg;
}

int workers(const Options& o)
{
    if (o.workers > 0)
        return o.workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Steady-state Wigner negativity of injection-locked lasers and polariton condensates"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "run configuration (JSON with comments)")->required();
        sub->add_option("--out", opt.out, "output directory (overrides output.directory)");
        sub->add_option("--route", opt.route, "solver route")->check(CLI::IsMember({"fock", "fp", "both"}));
        sub->add_option("--drift-variant", opt.drift, "lock drift form")
            ->check(CLI::IsMember({"as-printed", "physical"}));
    };
    auto* simulate = app.add_subcommand("simulate", "steady state at one parameter point");
    auto* sweep = app.add_subcommand("sweep", "steady states along the sweep axis");
    auto* cross = app.add_subcommand("crossvalidate", "compare the Fock and Fokker-Planck routes");
    auto* params = app.add_subcommand("params", "resolve physical device inputs to model rates");
    for (auto* sub : {simulate, sweep, cross, params})
        add_common(sub);
    for (auto* sub : {sweep, cross})
        sub->add_option("--workers", opt.workers, "concurrent sweep points (default: available cores)")
            ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorCode::config);
    }

    try {
        const RunConfig cfg = prepare(opt);
        if (simulate->parsed())
            return cmd_simulate(cfg);
        if (sweep->parsed())
            return cmd_sweep(cfg, workers(opt));
        if (cross->parsed())
            return cmd_crossvalidate(cfg, workers(opt));
        return cmd_params(cfg);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
