#pragma once

// Run configuration: JSON with comments, versioned schema, strict keys.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nglight/errors.hpp"
#include "nglight/fock.hpp"
#include "nglight/fokker_planck.hpp"
#include "nglight/polariton_params.hpp"

namespace nglight {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;

enum class Route { fock, fp, both };

inline std::string to_string(Route r)
{
    switch (r) {
    case Route::fock: return "fock";
    case Route::fp: return "fp";
    case Route::both: return "both";
    }
    return "?";
}

inline Route parse_route(const std::string& s)
{
    if (s == "fock")
        return Route::fock;
    if (s == "fp")
        return Route::fp;
    if (s == "both")
        return Route::both;
    fail(ErrorCode::config, "route must be fock, fp or both (got '" + s + "')");
}

inline LockDrift parse_drift(const std::string& s)
{
    if (s == "physical")
        return LockDrift::physical;
    if (s == "as-printed")
        return LockDrift::as_printed;
    fail(ErrorCode::config, "drift variant must be physical or as-printed (got '" + s + "')");
}

struct LaserModel {
    LaserFp p;
};

struct PolaritonModel {
    PolaritonFp p;
    double gamma0 = 0.0; // only the Fock route needs the split
};

/// Device description; resolved to a polariton model in units of D1.
struct PhysicalModel {
    PhysicalInputs inputs;
    RateSplits splits;
    bool threshold_split = false;
    double lock = 0.0; // in units of D1
};

using ModelSection = std::variant<LaserModel, PolaritonModel, PhysicalModel>;

struct GridOverride {
    std::optional<int> nr, ntheta;
    std::optional<double> r_max, r_min;
};

struct SolverSection {
    Route route = Route::fp;
    LockDrift drift = LockDrift::physical;
    std::optional<int> n_cut;
    GridOverride grid;
    FpSteadyConfig fp;
    std::string fock_method = "direct";
    double fock_t_max = 200.0;
    int wigner_points = 256;
    double crossvalidate_tolerance = 0.05;
};

enum class SweepAxis { lock, kerr, diffusion_ratio };

inline std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::lock: return "K";
    case SweepAxis::kerr: return "U";
    case SweepAxis::diffusion_ratio: return "D2/D1";
    }
    return "?";
}

struct SweepSection {
    SweepAxis axis = SweepAxis::lock;
    std::vector<double> values;
};

struct OutputSection {
    std::string directory = "out";
    bool grid = true;
    bool csv = false;
};

struct RunConfig {
    ModelSection model;
    SolverSection solver;
    std::optional<SweepSection> sweep;
    OutputSection output;
    json source; // as read, for the record
};

namespace detail {

/// Walks one JSON object, remembering which keys were read so leftovers can be rejected.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            fail(ErrorCode::config, path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key)
    {
        if (!j_.contains(key))
            fail(ErrorCode::config, where(key) + ": missing required field");
        return as<T>(key);
    }

    template <class T>
    T get_or(const std::string& key, T fallback)
    {
        return j_.contains(key) ? as<T>(key) : fallback;
    }

    template <class T>
    std::optional<T> maybe(const std::string& key)
    {
        if (!j_.contains(key))
            return std::nullopt;
        return as<T>(key);
    }

    Section child(const std::string& key)
    {
        if (!j_.contains(key))
            fail(ErrorCode::config, where(key) + ": missing required section");
        seen_.insert(key);
        return Section(j_.at(key), where(key));
    }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const
    {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key))
                fail(ErrorCode::config, where(key) + ": unknown key");
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <class T>
    T as(const std::string& key)
    {
        seen_.insert(key);
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number())
                fail(ErrorCode::config, where(key) + ": expected a number");
            const double x = v.get<double>();
            if (!std::isfinite(x))
                fail(ErrorCode::config, where(key) + ": must be finite");
            return x;
        } else if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer())
                fail(ErrorCode::config, where(key) + ": expected an integer");
            return v.get<int>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean())
                fail(ErrorCode::config, where(key) + ": expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                fail(ErrorCode::config, where(key) + ": expected a string");
            return v.get<std::string>();
        } else {
            static_assert(std::is_same_v<T, std::vector<double>>);
            if (!v.is_array())
                fail(ErrorCode::config, where(key) + ": expected an array of numbers");
            std::vector<double> out;
            for (const auto& e : v) {
                if (!e.is_number())
                    fail(ErrorCode::config, where(key) + ": expected an array of numbers");
                out.push_back(e.get<double>());
            }
            return out;
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        fail(ErrorCode::config, what);
}

inline ModelSection parse_model(Section s)
{
    const int n = s.has("laser") + s.has("polariton") + s.has("physical");
    require(n == 1, "model: exactly one of laser, polariton, physical is required");
    ModelSection out;
    if (s.has("laser")) {
        auto m = s.child("laser");
        LaserModel l;
        l.p.gain = m.get<double>("A");
        l.p.saturation = m.get<double>("B");
        l.p.cavity_loss = m.get<double>("gamma");
        l.p.kerr = m.get_or("U", 0.0);
        l.p.lock = m.get_or("K", 0.0);
        m.finish();
        for (auto [v, name] : {std::pair{l.p.gain, "A"}, {l.p.saturation, "B"}, {l.p.cavity_loss, "gamma"},
                               {l.p.kerr, "U"}, {l.p.lock, "K"}})
            require(v >= 0.0, m.where(name) + ": must be >= 0");
        out = l;
    } else if (s.has("polariton")) {
        auto m = s.child("polariton");
        PolaritonModel p;
        p.p.g1 = m.get<double>("G1");
        p.p.g2 = m.get<double>("G2");
        p.p.d1 = m.get<double>("D1");
        p.p.d2 = m.get<double>("D2");
        p.p.kerr = m.get_or("U", 0.0);
        p.p.lock = m.get_or("K", 0.0);
        p.gamma0 = m.get_or("gamma0", 0.0);
        m.finish();
        require(p.p.d1 > 0.0 && p.p.d2 > 0.0, m.where("D1") + ", " + m.where("D2") + ": must be > 0");
        require(p.p.kerr >= 0.0 && p.p.lock >= 0.0, m.where("U") + ", " + m.where("K") + ": must be >= 0");
        out = p;
    } else {
        auto m = s.child("physical");
        PhysicalModel p;
        p.inputs.area = Area{m.get<double>("A_area")};
        p.inputs.temperature = Temperature{m.get<double>("T")};
        p.inputs.bohr_radius = Length{m.get<double>("a_B")};
        p.inputs.permittivity = Permittivity{m.get<double>("epsilon")};
        p.inputs.exciton_mass = Mass{m.get<double>("m_exc")};
        p.inputs.hopfield_x = m.get<double>("X_hopfield");
        p.inputs.cavity_leak = Rate{m.get<double>("gamma0")};
        p.splits.ratio_1 = m.get_or("split_1", 1.0);
        if (m.has("split_2") && m.raw("split_2").is_string()) {
            require(m.raw("split_2") == "threshold", m.where("split_2") + ": number or \"threshold\"");
            p.threshold_split = true;
        } else {
            p.splits.ratio_2 = m.get_or("split_2", 1.0);
        }
        p.lock = m.get_or("K", 0.0);
        m.finish();
        p.inputs.validate();
        require(p.splits.ratio_1 > 0.0 && p.splits.ratio_2 > 0.0, m.where("split_1") + "/split_2: must be > 0");
        out = p;
    }
    s.finish();
    return out;
}

inline SolverSection parse_solver(Section s)
{
    SolverSection out;
    out.route = parse_route(s.get_or<std::string>("route", "fp"));
    out.drift = parse_drift(s.get_or<std::string>("drift_variant", "physical"));
    out.n_cut = s.maybe<int>("n_cut");
    if (out.n_cut)
        require(*out.n_cut >= 1 && *out.n_cut <= default_dense_guard,
                s.where("n_cut") + ": must lie in [1, " + std::to_string(default_dense_guard) + "]");
    if (s.has("grid")) {
        auto g = s.child("grid");
        out.grid.nr = g.maybe<int>("nr");
        out.grid.ntheta = g.maybe<int>("ntheta");
        out.grid.r_max = g.maybe<double>("r_max");
        out.grid.r_min = g.maybe<double>("r_min");
        g.finish();
        require(!out.grid.nr || (*out.grid.nr >= 8 && *out.grid.nr <= 4096), g.where("nr") + ": must lie in [8, 4096]");
        require(!out.grid.ntheta || (*out.grid.ntheta >= 8 && *out.grid.ntheta <= 8192 && *out.grid.ntheta % 2 == 0),
                g.where("ntheta") + ": must be even and lie in [8, 8192]");
        require(!out.grid.r_max || *out.grid.r_max > 0.0, g.where("r_max") + ": must be > 0");
        require(!out.grid.r_min || *out.grid.r_min >= 0.0, g.where("r_min") + ": must be >= 0");
    }
    const std::string method = s.get_or<std::string>("fp_method", "automatic");
    if (method == "automatic")
        out.fp.method = FpSteadyMethod::automatic;
    else if (method == "direct")
        out.fp.method = FpSteadyMethod::direct;
    else if (method == "march")
        out.fp.method = FpSteadyMethod::march;
    else
        fail(ErrorCode::config, s.where("fp_method") + ": automatic, direct or march");
    out.fp.tol = s.get_or("tolerance", out.fp.tol);
    out.fp.dt = s.get_or("dt", out.fp.dt);
    out.fp.t_max = s.get_or("t_max", out.fp.t_max);
    require(out.fp.tol > 0.0 && out.fp.tol < 1.0, s.where("tolerance") + ": must lie in (0, 1)");
    require(out.fp.dt >= 0.0, s.where("dt") + ": must be >= 0 (0 picks the stability bound)");
    require(out.fp.t_max > 0.0, s.where("t_max") + ": must be > 0");
    out.fock_method = s.get_or<std::string>("fock_method", "direct");
    require(out.fock_method == "direct" || out.fock_method == "march", s.where("fock_method") + ": direct or march");
    out.fock_t_max = s.get_or("fock_t_max", out.fock_t_max);
    require(out.fock_t_max > 0.0, s.where("fock_t_max") + ": must be > 0");
    out.wigner_points = s.get_or("wigner_points", out.wigner_points);
    require(out.wigner_points >= 16 && out.wigner_points <= 2048, s.where("wigner_points") + ": must lie in [16, 2048]");
    out.crossvalidate_tolerance = s.get_or("crossvalidate_tolerance", out.crossvalidate_tolerance);
    require(out.crossvalidate_tolerance > 0.0, s.where("crossvalidate_tolerance") + ": must be > 0");
    s.finish();
    return out;
}

inline SweepSection parse_sweep(Section s)
{
    SweepSection out;
    const auto axis = s.get<std::string>("axis");
    if (axis == "K")
        out.axis = SweepAxis::lock;
    else if (axis == "U")
        out.axis = SweepAxis::kerr;
    else if (axis == "D2/D1")
        out.axis = SweepAxis::diffusion_ratio;
    else
        fail(ErrorCode::config, s.where("axis") + ": K, U or D2/D1");
    out.values = s.get<std::vector<double>>("values");
    s.finish();
    require(!out.values.empty(), s.where("values") + ": empty sweep");
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        require(std::isfinite(out.values[k]) && out.values[k] >= 0.0, s.where("values") + ": entries must be >= 0");
        require(k == 0 || out.values[k] > out.values[k - 1], s.where("values") + ": must be strictly increasing");
    }
    return out;
}

inline OutputSection parse_output(Section s)
{
    OutputSection out;
    out.directory = s.get_or<std::string>("directory", out.directory);
    if (s.has("formats")) {
        const json& f = s.raw("formats");
        require(f.is_array(), s.where("formats") + ": expected an array");
        out.grid = out.csv = false;
        for (const auto& e : f) {
            require(e.is_string() && (e == "grid" || e == "csv"), s.where("formats") + ": entries are \"grid\" or \"csv\"");
            (e == "grid" ? out.grid : out.csv) = true;
        }
    }
    s.finish();
    return out;
}

/// 1-based line of a byte offset.
inline std::size_t line_of(const std::string& text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

} // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>")
{
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::config, origin + ":" + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    try {
        detail::Section root(j, "");
        const int schema = root.get<int>("schema");
        detail::require(schema == config_schema_version,
                        "schema: unsupported version " + std::to_string(schema) + " (expected " +
                            std::to_string(config_schema_version) + ")");
        RunConfig cfg;
        cfg.model = detail::parse_model(root.child("model"));
        if (root.has("solver"))
            cfg.solver = detail::parse_solver(root.child("solver"));
        if (root.has("sweep"))
            cfg.sweep = detail::parse_sweep(root.child("sweep"));
        if (root.has("output"))
            cfg.output = detail::parse_output(root.child("output"));
        root.finish();
        if (cfg.sweep && cfg.sweep->axis == SweepAxis::diffusion_ratio)
            detail::require(!std::holds_alternative<LaserModel>(cfg.model), "sweep.axis: D2/D1 needs a polariton model");
        cfg.source = std::move(j);
        return cfg;
    } catch (const Error& e) {
        fail(e.code(), origin + ": " + e.what());
    }
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::io, "cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4)
        s[k] = digits[v & 0xf];
    return s;
}

} // namespace nglight
