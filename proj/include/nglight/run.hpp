#pragma once

// Orchestration behind the command-line tool: resolve a config into models,
// run the selected routes, persist grids, records, and summaries.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "nglight/config.hpp"
#include "nglight/evolve.hpp"
#include "nglight/wigner.hpp"

namespace nglight {

namespace fs = std::filesystem;

/// One parameter point with every quantity resolved to model units.
struct ResolvedPoint {
    std::variant<LaserFp, PolaritonRates> model;
    LockDrift drift = LockDrift::physical;
    json parameters;

    FpModel fp_model() const
    {
        if (const auto* l = std::get_if<LaserFp>(&model))
            return FpModel::laser(*l, drift);
        return FpModel::polariton(std::get<PolaritonRates>(model).fp(), drift);
    }

    LiouvillianSpec fock_spec() const
    {
        if (const auto* l = std::get_if<LaserFp>(&model))
            return LiouvillianSpec::laser({l->gain, l->saturation, l->cavity_loss, l->kerr, l->lock});
        return LiouvillianSpec::polariton(std::get<PolaritonRates>(model).master());
    }
};

namespace detail {

inline json rates_json(const PolaritonRates& r)
{
    return {{"Delta1", r.delta1}, {"Gamma1", r.gamma1}, {"Delta2", r.delta2}, {"Gamma2", r.gamma2},
            {"gamma0", r.gamma0}, {"G1", r.g1()},       {"G2", r.g2()},       {"D1", r.d1()},
            {"D2", r.d2()},       {"U", r.kerr},        {"K", r.lock},        {"G2_sign", r.g2_sign()},
            {"near_threshold", r.near_threshold()}};
}

inline json estimates_json(const RateEstimates& e, const PolaritonRates& si)
{
    const double d1 = si.d1();
    return {{"SI",
             {{"V0_J", e.v0.si()},
              {"a_thermal_m", e.a_thermal.si()},
              {"E0_J", e.e0.si()},
              {"scale_1_per_s", e.scale_1.si()},
              {"scale_2_per_s", e.scale_2.si()},
              {"U_est_J", e.u_est.si()},
              {"U_rate_per_s", e.kerr_rate().si()},
              {"D1_per_s", d1}}},
            {"D1_units",
             {{"scale_1", e.scale_1.si() / d1},
              {"scale_2", e.scale_2.si() / d1},
              {"U", e.kerr_rate().si() / d1}}},
            {"small_ratio_2pi2a2_over_A", e.small_ratio()},
            {"order_of_magnitude", true}};
}

inline PolaritonRates physical_rates(const PhysicalModel& m, RateEstimates& est)
{
    est = estimate(m.inputs);
    RateSplits splits = m.splits;
    if (m.threshold_split)
        splits.ratio_2 = threshold_ratio_2(est, m.inputs.cavity_leak);
    return to_model(est, splits, m.inputs.cavity_leak);
}

} // namespace detail

inline ResolvedPoint resolve(const RunConfig& cfg, std::optional<double> axis_value = std::nullopt)
{
    ResolvedPoint out;
    out.drift = cfg.solver.drift;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LaserModel>) {
                out.model = m.p;
            } else if constexpr (std::is_same_v<M, PolaritonModel>) {
                out.model = rates_from_fp(m.p, m.gamma0);
            } else {
                RateEstimates est;
                const PolaritonRates si = detail::physical_rates(m, est);
                PolaritonRates r = si.in_d1_units();
                r.lock = m.lock;
                out.model = r;
                out.parameters["estimates"] = detail::estimates_json(est, si);
                out.parameters["rates_SI"] = detail::rates_json(si);
            }
        },
        cfg.model);

    if (axis_value && cfg.sweep) {
        const double v = *axis_value;
        if (auto* l = std::get_if<LaserFp>(&out.model)) {
            (cfg.sweep->axis == SweepAxis::lock ? l->lock : l->kerr) = v;
        } else {
            auto& r = std::get<PolaritonRates>(out.model);
            if (cfg.sweep->axis == SweepAxis::lock)
                r.lock = v;
            else if (cfg.sweep->axis == SweepAxis::kerr)
                r.kerr = v;
            else {
                PolaritonFp p = r.fp();
                p.d2 = v * p.d1;
                r = rates_from_fp(p, r.gamma0);
            }
        }
        out.parameters["axis"] = to_string(cfg.sweep->axis);
        out.parameters["axis_value"] = v;
    }

    if (const auto* l = std::get_if<LaserFp>(&out.model))
        out.parameters["laser"] = {{"A", l->gain}, {"B", l->saturation}, {"gamma", l->cavity_loss}, {"U", l->kerr},
                                   {"K", l->lock}};
    else
        out.parameters["polariton"] = detail::rates_json(std::get<PolaritonRates>(out.model));
    out.parameters["drift_variant"] = to_string(out.drift);
    return out;
}

/// Outcome of one solver route at one point.
struct RouteOutcome {
    std::string route;
    std::optional<ErrorCode> error;
    std::string message;
    double negativity = std::numeric_limits<double>::quiet_NaN();
    double mean_n = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    json solver = json::object();
    std::vector<std::string> files;
    std::optional<WignerGrid> grid;
    std::optional<DensityMatrix> rho; // Fock route only

    bool ok() const { return !error; }
    std::string status() const { return error ? to_string(*error) : "ok"; }
    int exit_code() const { return error ? static_cast<int>(*error) : 0; }
};

namespace detail {

inline PolarLayout fp_layout(const FpModel& model, const SolverSection& s, FpGridEstimate& est)
{
    est = default_fp_layout(model);
    PolarLayout l = est.layout;
    if (s.grid.nr)
        l.nr = *s.grid.nr;
    if (s.grid.ntheta)
        l.ntheta = *s.grid.ntheta;
    if (s.grid.r_max)
        l.r_max = *s.grid.r_max;
    if (s.grid.r_min)
        l.r_min = *s.grid.r_min;
    validate_layout(l);
    return l;
}

inline void persist(RouteOutcome& o, const WignerGrid& g, const OutputSection& out, const std::string& stem)
{
    const fs::path dir(out.directory);
    if (out.grid) {
        const auto p = (dir / (stem + "_" + o.route + ".ngwg")).string();
        save_grid(g, p);
        o.files.push_back(p);
    }
    if (out.csv) {
        const auto p = (dir / (stem + "_" + o.route + ".csv")).string();
        save_grid_csv(g, p);
        o.files.push_back(p);
    }
}

} // namespace detail

inline RouteOutcome run_fp(const ResolvedPoint& pt, const RunConfig& cfg, const std::string& stem, bool keep)
{
    RouteOutcome o{.route = "fp"};
    try {
        const FpModel model = pt.fp_model();
        FpGridEstimate est;
        const PolarLayout layout = detail::fp_layout(model, cfg.solver, est);
        o.solver = {{"layout", describe(layout)}, {"r_lock", est.r_lock}, {"sigma_r", est.sigma_r},
                    {"sigma_t", est.sigma_t}};
        const auto f0 = FpField::gaussian(layout, est.r_lock, std::max(0.5, est.sigma_r * est.sigma_r));
        const FpSteadyResult r = fp_steady(model, f0, cfg.solver.fp);
        o.solver["dt"] = r.dt;
        o.solver["steps"] = r.steps;
        o.solver["growth_rate"] = r.growth_rate;
        if (!r.note.empty())
            o.solver["note"] = r.note;
        o.residual = r.residual;
        o.converged = r.converged;
        o.negativity = fp_negativity(r.field);
        o.mean_n = fp_moments(r.field).mean_r2 - 0.5;
        o.error = r.issue;
        if (r.issue)
            o.message = r.note.empty() ? "steady state not reached" : r.note;
        detail::persist(o, r.field.grid, cfg.output, stem);
        if (keep)
            o.grid = r.field.grid;
    } catch (const Error& e) {
        o.error = e.code();
        o.message = e.what();
    }
    return o;
}

inline RouteOutcome run_fock(const ResolvedPoint& pt, const RunConfig& cfg, const std::string& stem, bool keep)
{
    RouteOutcome o{.route = "fock"};
    try {
        const LiouvillianSpec spec = pt.fock_spec();
        const int n_cut = cfg.solver.n_cut ? *cfg.solver.n_cut : default_truncation(spec);
        if (n_cut > default_dense_guard)
            fail(ErrorCode::guard, "Fock route: truncation " + std::to_string(n_cut) + " exceeds the guard " +
                                       std::to_string(default_dense_guard));
        const FockSpace space(n_cut);
        o.solver = {{"n_cut", n_cut}, {"method", cfg.solver.fock_method}};
        const SteadyResult r = [&] {
            if (cfg.solver.fock_method == "direct")
                return steady_state_direct(spec, space);
            const EvolveConfig ec = default_evolve_config(spec, space, cfg.solver.fock_t_max);
            o.solver["dt"] = ec.dt;
            return steady_state_march(spec, DensityMatrix::vacuum(space), ec);
        }();
        o.residual = r.residual;
        o.converged = r.converged;
        o.mean_n = r.observables.mean_n;
        o.solver["edge_population"] = r.rho_ss.edge_population(2);
        o.error = r.issue;
        if (r.issue)
            o.message = std::string("Fock steady state flagged ") + to_string(*r.issue);
        const auto layout = default_cartesian_layout(std::max(r.observables.mean_n, 0.0), cfg.solver.wigner_points);
        const WignerGrid g = wigner_grid(r.rho_ss, layout);
        o.solver["layout"] = describe(layout);
        o.solver["outside_trust"] = g.outside_trust;
        o.negativity = negativity(g);
        detail::persist(o, g, cfg.output, stem);
        if (keep) {
            o.grid = g;
            o.rho = r.rho_ss;
        }
    } catch (const Error& e) {
        o.error = e.code();
        o.message = e.what();
    }
    return o;
}

struct RunRecord {
    std::string command;
    std::string config_hash;
    std::optional<double> axis_value;
    json parameters;
    std::vector<RouteOutcome> routes;
    double wall_time = 0.0;
    json extra = json::object();

    int exit_code() const
    {
        for (const auto& r : routes)
            if (!r.ok())
                return r.exit_code();
        return 0;
    }

    json to_json() const
    {
        json j = {{"command", command}, {"config_hash", config_hash}, {"parameters", parameters},
                  {"wall_time_s", wall_time}};
        j["axis_value"] = axis_value ? json(*axis_value) : json(nullptr);
        j["routes"] = json::array();
        auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
        for (const auto& r : routes)
            j["routes"].push_back({{"route", r.route},
                                   {"status", r.status()},
                                   {"exit_code", r.exit_code()},
                                   {"message", r.message},
                                   {"negativity", num(r.negativity)},
                                   {"mean_n", num(r.mean_n)},
                                   {"residual", num(r.residual)},
                                   {"converged", r.converged},
                                   {"solver", r.solver},
                                   {"files", r.files}});
        j.update(extra);
        return j;
    }
};

inline std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a(cfg.source.dump())); }

inline std::vector<Route> routes_of(Route r)
{
    if (r == Route::both)
        return {Route::fock, Route::fp};
    return {r};
}

/// Runs every route of one point. `keep` retains grids in memory.
inline RunRecord run_point(const RunConfig& cfg, const std::string& command, std::optional<double> axis_value,
                           const std::string& stem, bool keep = false)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec{.command = command, .config_hash = config_hash(cfg), .axis_value = axis_value};
    try {
        const ResolvedPoint pt = resolve(cfg, axis_value);
        rec.parameters = pt.parameters;
        for (Route r : routes_of(cfg.solver.route))
            rec.routes.push_back(r == Route::fp ? run_fp(pt, cfg, stem, keep) : run_fock(pt, cfg, stem, keep));
    } catch (const Error& e) {
        RouteOutcome o{.route = to_string(cfg.solver.route), .error = e.code(), .message = e.what()};
        rec.routes.push_back(std::move(o));
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(ErrorCode::io, "cannot create output directory " + dir + ": " + ec.message());
}

inline std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out)
{
    std::ofstream f(p, mode);
    if (!f)
        fail(ErrorCode::io, "cannot write " + p.string());
    return f;
}

inline std::string g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline void append_records(const std::string& dir, const std::vector<RunRecord>& recs)
{
    auto f = detail::open_out(fs::path(dir) / "runs.jsonl", std::ios::app);
    for (const auto& r : recs)
        f << r.to_json().dump() << '\n';
}

inline void write_metadata(const RunConfig& cfg, const std::string& command, const json& resolved,
                           const std::vector<RunRecord>& recs, const json& extra = json::object())
{
    json m = {{"command", command},
              {"schema", config_schema_version},
              {"config_hash", config_hash(cfg)},
              {"config", cfg.source},
              {"route", to_string(cfg.solver.route)},
              {"drift_variant", to_string(cfg.solver.drift)},
              {"resolved_parameters", resolved},
              {"records", recs.size()},
              {"grid_format", {{"magic", "NGWG"}, {"version", grid_format_version}}}};
    m.update(extra);
    auto f = detail::open_out(fs::path(cfg.output.directory) / (command + "_metadata.json"));
    f << m.dump(2) << '\n';
}

/// Header plus one row per (point, route); rows follow `recs` order.
inline void write_summary_csv(const fs::path& path, const std::string& axis, const std::vector<RunRecord>& recs)
{
    using detail::g17;
    auto f = detail::open_out(path);
    f << (axis.empty() ? "" : "axis,value,") << "route,status,N,mean_n,residual,converged\n";
    for (const auto& rec : recs)
        for (const auto& r : rec.routes) {
            if (!axis.empty())
                f << axis << ',' << g17(rec.axis_value.value_or(0.0)) << ',';
            f << r.route << ',' << r.status() << ',' << g17(r.negativity) << ',' << g17(r.mean_n) << ','
              << g17(r.residual) << ',' << (r.converged ? 1 : 0) << '\n';
        }
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code.

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cout)
{
    detail::ensure_dir(cfg.output.directory);
    const RunRecord rec = run_point(cfg, "simulate", std::nullopt, "simulate");
    append_records(cfg.output.directory, {rec});
    write_summary_csv(fs::path(cfg.output.directory) / "observables.csv", "", {rec});
    write_metadata(cfg, "simulate", rec.parameters, {rec});
    for (const auto& r : rec.routes)
        log << r.route << ": " << r.status() << "  N = " << detail::g17(r.negativity)
            << "  mean_n = " << detail::g17(r.mean_n) << (r.message.empty() ? "" : "  (" + r.message + ")") << '\n';
    return rec.exit_code();
}

/// Runs `values` on up to `workers` threads; results come back in input order.
inline std::vector<RunRecord> run_points(const RunConfig& cfg, const std::string& command,
                                         const std::vector<double>& values, int workers, bool keep = false)
{
    std::vector<RunRecord> recs(values.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k; (k = next++) < values.size();) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "%s_%03zu", command.c_str(), k);
            recs[k] = run_point(cfg, command, values[k], stem, keep);
        }
    };
    const int n = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(values.size(), 1)));
    {
        std::vector<std::jthread> pool;
        for (int t = 1; t < n; ++t)
            pool.emplace_back(work);
        work();
    }
    return recs;
}

inline int cmd_sweep(const RunConfig& cfg, int workers, std::ostream& log = std::cout)
{
    if (!cfg.sweep)
        fail(ErrorCode::config, "sweep: config has no sweep section");
    detail::ensure_dir(cfg.output.directory);
    const auto recs = run_points(cfg, "sweep", cfg.sweep->values, workers);
    append_records(cfg.output.directory, recs);
    const std::string axis = to_string(cfg.sweep->axis);
    write_summary_csv(fs::path(cfg.output.directory) / "summary.csv", axis, recs);
    write_metadata(cfg, "sweep", resolve(cfg).parameters, recs, {{"axis", axis}, {"values", cfg.sweep->values}});
    int code = 0;
    for (const auto& rec : recs) {
        for (const auto& r : rec.routes)
            log << axis << " = " << detail::g17(*rec.axis_value) << "  " << r.route << ": " << r.status()
                << "  N = " << detail::g17(r.negativity) << '\n';
        if (!code)
            code = rec.exit_code();
    }
    return code;
}

/// L1 distance between the Fock-route Wigner function and the FP field on a
/// shared Cartesian window.
struct CrossCheck {
    double l1 = std::numeric_limits<double>::quiet_NaN();
    CartesianLayout layout;
    std::string note;
};

inline CrossCheck cross_distance(const DensityMatrix& rho, const FpField& fp, int points)
{
    const PolarLayout& pl = fp.layout();
    CrossCheck c;
    c.layout = CartesianLayout{-pl.r_max, pl.r_max, points, -pl.r_max, pl.r_max, points};
    const WignerGrid a = wigner_grid(rho, c.layout);
    const WignerGrid b = resample(fp, c.layout);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a.weights()[k] * std::abs(a.values()[k] - b.values()[k]);
    c.l1 = s;
    c.note = "FP polar field resampled to common grid " + describe(c.layout);
    return c;
}

inline int cmd_crossvalidate(RunConfig cfg, int workers, std::ostream& log = std::cout)
{
    cfg.solver.route = Route::both;
    detail::ensure_dir(cfg.output.directory);
    std::vector<double> values;
    if (cfg.sweep)
        values = cfg.sweep->values;
    std::vector<RunRecord> recs;
    if (values.empty())
        recs.push_back(run_point(cfg, "crossvalidate", std::nullopt, "crossvalidate", true));
    else
        recs = run_points(cfg, "crossvalidate", values, workers, true);

    const double tol = cfg.solver.crossvalidate_tolerance;
    auto f = detail::open_out(fs::path(cfg.output.directory) / "crossvalidate.csv");
    f << "axis,value,N_fock,N_fp,L1,tolerance,pass,status,note\n";
    int code = 0;
    for (auto& rec : recs) {
        const RouteOutcome* fock = nullptr;
        const RouteOutcome* fp = nullptr;
        for (const auto& r : rec.routes)
            (r.route == "fock" ? fock : fp) = &r;
        CrossCheck c;
        std::string status = "ok";
        if (fock && fp && fock->rho && fp->grid) {
            try {
                c = cross_distance(*fock->rho, FpField(*fp->grid), cfg.solver.wigner_points);
            } catch (const Error& e) {
                status = to_string(e.code());
                c.note = e.what();
            }
        }
        for (const auto* r : {fock, fp})
            if (r && !r->ok() && status == "ok") {
                status = r->route + ":" + r->status();
                c.note += (c.note.empty() ? "" : "; ") + r->message;
            }
        const bool pass = std::isfinite(c.l1) && c.l1 <= tol && status == "ok";
        rec.extra["crossvalidate"] = {{"L1", std::isfinite(c.l1) ? json(c.l1) : json(nullptr)},
                                      {"tolerance", tol},
                                      {"pass", pass},
                                      {"note", c.note}};
        if (!code)
            code = rec.exit_code();
        std::string note = c.note;
        std::replace(note.begin(), note.end(), ',', ';');
        std::replace(note.begin(), note.end(), '\n', ' ');
        const std::string axis = cfg.sweep ? to_string(cfg.sweep->axis) : "";
        f << axis << ',' << (rec.axis_value ? detail::g17(*rec.axis_value) : "") << ','
          << detail::g17(fock ? fock->negativity : NAN) << ',' << detail::g17(fp ? fp->negativity : NAN) << ','
          << detail::g17(c.l1) << ',' << detail::g17(tol) << ',' << (pass ? 1 : 0) << ',' << status << ",\"" << note
          << "\"\n";
        log << (rec.axis_value ? axis + " = " + detail::g17(*rec.axis_value) + "  " : "") << "L1 = " << detail::g17(c.l1)
            << "  tolerance " << tol << "  " << (pass ? "PASS" : "FAIL") << "  [" << status << "]  " << c.note << '\n';
    }
    append_records(cfg.output.directory, recs);
    write_metadata(cfg, "crossvalidate", resolve(cfg).parameters, recs, {{"tolerance", tol}});
    return code;
}

inline int cmd_params(const RunConfig& cfg, std::ostream& log = std::cout)
{
    const auto* m = std::get_if<PhysicalModel>(&cfg.model);
    if (!m)
        fail(ErrorCode::config, "params: model.physical section required");
    const ResolvedPoint pt = resolve(cfg);
    detail::ensure_dir(cfg.output.directory);
    auto f = detail::open_out(fs::path(cfg.output.directory) / "params.json");
    f << pt.parameters.dump(2) << '\n';

    const json& est = pt.parameters["estimates"];
    const json& si = pt.parameters["rates_SI"];
    const json& d1 = pt.parameters["polariton"];
    using detail::g17;
    log << "Order-of-magnitude estimates (SI)\n";
    for (const auto& [k, v] : est["SI"].items())
        log << "  " << k << " = " << g17(v.get<double>()) << '\n';
    log << "  2 pi^2 a^2 / A = " << g17(est["small_ratio_2pi2a2_over_A"].get<double>()) << '\n';
    log << "Rates (1/s)\n";
    for (const char* k : {"Delta1", "Gamma1", "Delta2", "Gamma2", "gamma0", "G1", "G2", "D1", "D2"})
        log << "  " << k << " = " << g17(si[k].get<double>()) << '\n';
    log << "Model in units of D1\n";
    for (const char* k : {"G1", "G2", "D1", "D2", "U", "K"})
        log << "  " << k << " = " << g17(d1[k].get<double>()) << '\n';
    log << "  G2 sign = " << d1["G2_sign"].get<int>() << (d1["near_threshold"].get<bool>() ? "  (threshold)" : "")
        << '\n';
    return 0;
}

} // namespace nglight
