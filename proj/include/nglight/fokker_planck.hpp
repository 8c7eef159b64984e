#pragma once

// Phase-space Fokker-Planck equations for the Wigner function on a staggered
// polar grid, for the laser and the polariton condensate.
//
// Both equations are assembled from the same pieces
//
//   dW/dt = -div(v(r) r_hat W) + div(D(r) grad W)          drift, diffusion
//         + U (1 - r^2) dW/dtheta                          kerr rotation
//         + (U/16) d/dtheta lap W                          kerr third order
//         + lock                                           injection locking
//
// with
//   laser      v = r (A - gamma - B r^2) / 2,      D = (A + gamma) / 8,   lock strength K
//   polariton  v = r (G2 + 2 G1 r^2),              D = D2/4 + D1 r^2 - G1/2,  lock strength 2K
//
// Expanding the divergences reproduces the closed polar forms term by term;
// tests check this pointwise.
//
// Two lock drifts are available:
//   as_printed  -k (cos th - sin th / r) dW/dr      (not mass conserving)
//   physical    -k (cos th dW/dr - (sin th / r) dW/dth)
//
// Discretization: finite volumes in r (zero flux through the pole face, W = 0
// at r_max), fourth-order central differences in theta.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#ifdef NGLIGHT_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "errors.hpp"
#include "mean_field.hpp"
#include "wigner.hpp"

namespace nglight {

enum class LockDrift { as_printed, physical };

inline std::string to_string(LockDrift d) { return d == LockDrift::as_printed ? "as-printed" : "physical"; }

struct LaserFp {
    double gain = 0.0;
    double saturation = 0.0;
    double cavity_loss = 0.0;
    double kerr = 0.0;
    double lock = 0.0;
};

struct PolaritonFp {
    double g1 = 0.0;
    double g2 = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double kerr = 0.0;
    double lock = 0.0;
};

class FpModel {
public:
    static FpModel laser(const LaserFp& p, LockDrift drift = LockDrift::physical)
    {
        if (!(p.gain >= 0 && p.saturation >= 0 && p.cavity_loss >= 0 && p.kerr >= 0 && p.lock >= 0))
            fail(ErrorCode::config, "laser FP: all coefficients must be >= 0");
        if (!(p.gain + p.cavity_loss > 0))
            fail(ErrorCode::config, "laser FP: diffusion (A + gamma)/8 must be > 0");
        return FpModel(p, drift);
    }

    static FpModel polariton(const PolaritonFp& p, LockDrift drift = LockDrift::physical)
    {
        if (!(p.d1 > 0 && p.d2 > 0))
            fail(ErrorCode::config, "polariton FP: D1 and D2 must be > 0");
        if (!(p.kerr >= 0 && p.lock >= 0) || !std::isfinite(p.g1) || !std::isfinite(p.g2))
            fail(ErrorCode::config, "polariton FP: U, K must be >= 0 and G1, G2 finite");
        return FpModel(p, drift);
    }

    bool is_laser() const { return std::holds_alternative<LaserFp>(params_); }
    const LaserFp& laser_params() const { return std::get<LaserFp>(params_); }
    const PolaritonFp& polariton_params() const { return std::get<PolaritonFp>(params_); }
    LockDrift drift() const { return drift_; }

    double kerr() const { return std::visit([](const auto& p) { return p.kerr; }, params_); }
    double lock() const { return std::visit([](const auto& p) { return p.lock; }, params_); }
    /// Coefficient in front of the lock drift: K (laser) or 2K (polariton).
    double lock_strength() const { return is_laser() ? lock() : 2.0 * lock(); }

    FpModel with_kerr(double u) const
    {
        FpModel m = *this;
        std::visit([u](auto& p) { p.kerr = u; }, m.params_);
        return m;
    }
    FpModel with_lock(double k) const
    {
        FpModel m = *this;
        std::visit([k](auto& p) { p.lock = k; }, m.params_);
        return m;
    }
    FpModel with_drift(LockDrift d) const
    {
        FpModel m = *this;
        m.drift_ = d;
        return m;
    }

    /// Radial drift velocity.
    double velocity(double r) const
    {
        if (is_laser()) {
            const auto& p = laser_params();
            return 0.5 * r * (p.gain - p.cavity_loss - p.saturation * r * r);
        }
        const auto& p = polariton_params();
        return r * (p.g2 + 2.0 * p.g1 * r * r);
    }

    /// Isotropic diffusion coefficient.
    double diffusion(double r) const
    {
        if (is_laser()) {
            const auto& p = laser_params();
            return (p.gain + p.cavity_loss) / 8.0;
        }
        const auto& p = polariton_params();
        return p.d2 / 4.0 + p.d1 * r * r - p.g1 / 2.0;
    }

    /// Throws unless the diffusion coefficient is positive on [0, r_max].
    void validate(double r_max) const
    {
        // D is monotone in r^2, so the endpoints decide.
        if (!(diffusion(0.0) > 0.0) || !(diffusion(r_max) > 0.0))
            fail(ErrorCode::config, "FP model: diffusion coefficient must be > 0 on the whole grid");
    }

    /// Deterministic amplitude equation d alpha/dt = (linear + cubic |alpha|^2) alpha - i U (|alpha|^2 - 1) alpha + k.
    AmplitudeDrift amplitude_drift() const
    {
        if (is_laser()) {
            const auto& p = laser_params();
            return {0.5 * (p.gain - p.cavity_loss), -0.5 * p.saturation, p.kerr, lock_strength()};
        }
        const auto& p = polariton_params();
        return {p.g2, 2.0 * p.g1, p.kerr, lock_strength()};
    }

private:
    template <class P>
    FpModel(const P& p, LockDrift d) : params_(p), drift_(d)
    {
    }

    std::variant<LaserFp, PolaritonFp> params_;
    LockDrift drift_ = LockDrift::physical;
};

/// Unknown of the FP equation: W on a polar grid at time t.
struct FpField {
    WignerGrid grid;
    double t = 0.0;

    explicit FpField(const PolarLayout& layout) : grid(layout) {}
    explicit FpField(WignerGrid g) : grid(std::move(g))
    {
        if (!grid.is_polar())
            fail(ErrorCode::guard, "FpField: needs a polar grid");
    }

    const PolarLayout& layout() const { return std::get<PolarLayout>(grid.layout()); }
    double mass() const { return grid.mass(); }

    /// Isotropic Gaussian exp(-|alpha - center|^2 / (2 sigma2)), unit mass on the grid.
    static FpField gaussian(const PolarLayout& layout, cplx center, double sigma2)
    {
        FpField f(layout);
        for (int j = 0; j < f.grid.rows(); ++j)
            for (int i = 0; i < f.grid.cols(); ++i)
                f.grid(j, i) = std::exp(-std::norm(f.grid.alpha(j, i) - center) / (2.0 * sigma2));
        f.normalize();
        return f;
    }

    void normalize()
    {
        const double m = mass();
        if (!(std::abs(m) > 0.0) || !std::isfinite(m))
            fail(ErrorCode::non_finite, "FpField: cannot normalize field with mass " + std::to_string(m));
        for (double& v : grid.values())
            v /= m;
    }
};

enum class FpTerm { lock, kerr_rotation, kerr_third_order, drift, diffusion };

inline constexpr FpTerm all_fp_terms[] = {FpTerm::lock, FpTerm::kerr_rotation, FpTerm::kerr_third_order,
                                          FpTerm::drift, FpTerm::diffusion};

using RSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

struct PolarStencil {
    const PolarLayout& g;
    int nr, nt;
    double dr, dt;

    explicit PolarStencil(const PolarLayout& layout)
        : g(layout), nr(layout.nr), nt(layout.ntheta), dr(layout.dr()), dt(layout.dtheta())
    {
    }

    int at(int j, int i) const { return j * nt + ((i % nt) + nt) % nt; }
    double face(int j) const { return g.r_min + (j + 1) * dr; } // between cells j and j+1
};

using Trips = std::vector<Eigen::Triplet<double>>;

inline constexpr double d1_coef[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
inline constexpr double d2_coef[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

/// Row (j, i) += scale * f(theta_{i+s}) * d/dtheta stencil, for s in -2..2.
template <class F>
void add_theta_d1(Trips& t, const PolarStencil& s, int j, int i, double scale, F&& f)
{
    for (int o = -2; o <= 2; ++o)
        if (d1_coef[o + 2] != 0.0)
            t.emplace_back(s.at(j, i), s.at(j, i + o), scale * d1_coef[o + 2] / s.dt * f(i + o));
}

/// Radial finite-volume operator -1/r d/dr(r a W) + 1/r d/dr(r D dW/dr) for one theta column.
/// `a(face_radius)` and `dcoef(face_radius)` are evaluated on faces.
template <class A, class Dc>
void add_radial_fv(Trips& t, const PolarStencil& s, int i, A&& a, Dc&& dcoef)
{
    for (int j = 0; j + 1 < s.nr; ++j) {
        const double rf = s.face(j);
        const double af = a(rf), df = dcoef(rf);
        // flux F = af (W_j + W_{j+1})/2 - df (W_{j+1} - W_j)/dr
        const double cj = 0.5 * af + df / s.dr;
        const double cj1 = 0.5 * af - df / s.dr;
        const double lj = rf / (s.g.r(j) * s.dr), lj1 = rf / (s.g.r(j + 1) * s.dr);
        t.emplace_back(s.at(j, i), s.at(j, i), -lj * cj);
        t.emplace_back(s.at(j, i), s.at(j + 1, i), -lj * cj1);
        t.emplace_back(s.at(j + 1, i), s.at(j, i), lj1 * cj);
        t.emplace_back(s.at(j + 1, i), s.at(j + 1, i), lj1 * cj1);
    }
    // W = 0 on the outer face: F = 2 D W_last / dr.
    const int last = s.nr - 1;
    const double ro = s.g.r_max;
    t.emplace_back(s.at(last, i), s.at(last, i), -ro / (s.g.r(last) * s.dr) * 2.0 * dcoef(ro) / s.dr);
}

inline void add_laplacian(Trips& t, const PolarStencil& s, const std::function<double(double)>& dcoef)
{
    for (int i = 0; i < s.nt; ++i)
        add_radial_fv(t, s, i, [](double) { return 0.0; }, dcoef);
    for (int j = 0; j < s.nr; ++j) {
        const double rj = s.g.r(j);
        const double c = dcoef(rj) / (rj * rj * s.dt * s.dt);
        for (int i = 0; i < s.nt; ++i)
            for (int o = -2; o <= 2; ++o)
                t.emplace_back(s.at(j, i), s.at(j, i + o), c * d2_coef[o + 2]);
    }
}

inline RSparse assemble(const PolarStencil& s, Trips& t)
{
    RSparse m(s.nr * s.nt, s.nr * s.nt);
    m.setFromTriplets(t.begin(), t.end());
    m.prune(0.0);
    m.makeCompressed();
    return m;
}

inline RSparse theta_derivative(const PolarStencil& s)
{
    Trips t;
    for (int j = 0; j < s.nr; ++j)
        for (int i = 0; i < s.nt; ++i)
            add_theta_d1(t, s, j, i, 1.0, [](int) { return 1.0; });
    return assemble(s, t);
}

} // namespace detail

/// Sparse matrix of one term of the right-hand side on `layout`.
inline RSparse fp_term_operator(const FpModel& model, const PolarLayout& layout, FpTerm term)
{
    validate_layout(layout);
    const detail::PolarStencil s(layout);
    detail::Trips t;
    const double u = model.kerr();
    const double k = model.lock_strength();
    const double dth = s.dt;

    switch (term) {
    case FpTerm::drift:
        for (int i = 0; i < s.nt; ++i)
            detail::add_radial_fv(t, s, i, [&](double r) { return model.velocity(r); }, [](double) { return 0.0; });
        break;
    case FpTerm::diffusion:
        detail::add_laplacian(t, s, [&](double r) { return model.diffusion(r); });
        break;
    case FpTerm::kerr_rotation:
        if (u != 0.0)
            for (int j = 0; j < s.nr; ++j) {
                const double rj = layout.r(j);
                for (int i = 0; i < s.nt; ++i)
                    detail::add_theta_d1(t, s, j, i, u * (1.0 - rj * rj), [](int) { return 1.0; });
            }
        break;
    case FpTerm::kerr_third_order:
        if (u != 0.0) {
            detail::Trips lt;
            detail::add_laplacian(lt, s, [](double) { return 1.0; });
            const RSparse lap = detail::assemble(s, lt);
            RSparse third = (u / 16.0) * (detail::theta_derivative(s) * lap);
            third.makeCompressed();
            return third;
        }
        break;
    case FpTerm::lock:
        if (k == 0.0)
            break;
        if (model.drift() == LockDrift::physical) {
            for (int i = 0; i < s.nt; ++i) {
                const double c = k * std::cos(layout.theta(i));
                detail::add_radial_fv(t, s, i, [c](double) { return c; }, [](double) { return 0.0; });
            }
            for (int j = 0; j < s.nr; ++j)
                for (int i = 0; i < s.nt; ++i)
                    detail::add_theta_d1(t, s, j, i, k / layout.r(j), [&](int ii) { return std::sin(ii * dth); });
        } else {
            // -k (cos th - sin th / r) dW/dr, central differences; through the pole the
            // neighbour of ring 0 is ring 0 at theta + pi.
            if (layout.r_min == 0.0 && s.nt % 2 != 0)
                fail(ErrorCode::guard, "as-printed lock drift needs an even ntheta");
            for (int j = 0; j < s.nr; ++j) {
                const double rj = layout.r(j);
                for (int i = 0; i < s.nt; ++i) {
                    const double c = -k * (std::cos(i * dth) - std::sin(i * dth) / rj);
                    const int row = s.at(j, i);
                    if (j + 1 < s.nr)
                        t.emplace_back(row, s.at(j + 1, i), c / (2 * s.dr));
                    else
                        t.emplace_back(row, row, -c / (2 * s.dr)); // ghost -W_last
                    if (j > 0)
                        t.emplace_back(row, s.at(j - 1, i), -c / (2 * s.dr));
                    else if (layout.r_min == 0.0)
                        t.emplace_back(row, s.at(0, i + s.nt / 2), -c / (2 * s.dr));
                    else {
                        // one-sided at the inner edge of an annulus
                        t.emplace_back(row, s.at(1 < s.nr ? 1 : 0, i), c / (2 * s.dr));
                        t.emplace_back(row, row, -c / (2 * s.dr));
                    }
                }
            }
        }
        break;
    }
    return detail::assemble(s, t);
}

/// Full right-hand-side operator.
inline RSparse fp_operator(const FpModel& model, const PolarLayout& layout)
{
    model.validate(layout.r_max);
    RSparse l = fp_term_operator(model, layout, FpTerm::drift);
    for (FpTerm term : {FpTerm::diffusion, FpTerm::lock, FpTerm::kerr_rotation, FpTerm::kerr_third_order})
        l += fp_term_operator(model, layout, term);
    l.prune(0.0);
    l.makeCompressed();
    return l;
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(const WignerGrid& g)
{
    return {g.values().data(), static_cast<Eigen::Index>(g.size())};
}

/// dW/dt of one term.
inline WignerGrid fp_term(const FpModel& model, const FpField& field, FpTerm term)
{
    const Eigen::VectorXd out = fp_term_operator(model, field.layout(), term) * as_vector(field.grid);
    return WignerGrid(field.layout(), std::vector<double>(out.data(), out.data() + out.size()));
}

/// dW/dt.
inline WignerGrid fp_rhs(const FpModel& model, const FpField& field)
{
    const Eigen::VectorXd out = fp_operator(model, field.layout()) * as_vector(field.grid);
    return WignerGrid(field.layout(), std::vector<double>(out.data(), out.data() + out.size()));
}

/// Weighted 1-norm  sum w |f|.
inline double weighted_l1(const WignerGrid& grid, const Eigen::VectorXd& f)
{
    double s = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        s += grid.weights()[k] * std::abs(f(static_cast<Eigen::Index>(k)));
    return s;
}

inline double fp_negativity(const FpField& field) { return negativity(field.grid); }

struct FpMoments {
    double mass = 0.0;
    double mean_r2 = 0.0;
    /// integral of cos(theta) W
    double mean_cos = 0.0;
};

inline FpMoments fp_moments(const FpField& field)
{
    FpMoments m;
    const auto& l = field.layout();
    for (int j = 0; j < field.grid.rows(); ++j)
        for (int i = 0; i < field.grid.cols(); ++i) {
            const double w = field.grid.weight(j, i) * field.grid(j, i);
            m.mass += w;
            m.mean_r2 += w * l.r(j) * l.r(j);
            m.mean_cos += w * std::cos(l.theta(i));
        }
    if (m.mass != 0.0) {
        m.mean_r2 /= m.mass;
        m.mean_cos /= m.mass;
    }
    return m;
}

/// Bilinear interpolation in (r, theta); linear to the ring-averaged pole value
/// inside the first ring and to zero at r_max.
inline double fp_sample(const FpField& field, cplx alpha)
{
    const auto& l = field.layout();
    const auto& g = field.grid;
    const double r = std::abs(alpha);
    if (r >= l.r_max || r < l.r_min)
        return 0.0;
    double th = std::arg(alpha);
    if (th < 0)
        th += 2.0 * std::numbers::pi;
    const double ti = th / l.dtheta();
    const int i0 = static_cast<int>(std::floor(ti)) % l.ntheta;
    const int i1 = (i0 + 1) % l.ntheta;
    const double ft = ti - std::floor(ti);
    auto ring = [&](int j) { return (1.0 - ft) * g(j, i0) + ft * g(j, i1); };

    const double x = (r - l.r_min) / l.dr() - 0.5;
    if (x < 0.0) {
        if (l.r_min > 0.0)
            return ring(0);
        double pole = 0.0;
        for (int i = 0; i < l.ntheta; ++i)
            pole += g(0, i);
        pole /= l.ntheta;
        const double f = r / l.r(0);
        return (1.0 - f) * pole + f * ring(0);
    }
    const int j0 = static_cast<int>(std::floor(x));
    const double fr = x - j0;
    if (j0 + 1 >= l.nr) {
        const double f = (r - l.r(l.nr - 1)) / (l.r_max - l.r(l.nr - 1));
        return (1.0 - f) * ring(l.nr - 1);
    }
    return (1.0 - fr) * ring(j0) + fr * ring(j0 + 1);
}

inline WignerGrid resample(const FpField& field, const CartesianLayout& layout)
{
    WignerGrid out(layout);
    for (int j = 0; j < out.rows(); ++j)
        for (int i = 0; i < out.cols(); ++i)
            out(j, i) = fp_sample(field, out.alpha(j, i));
    return out;
}

// ---- grid sizing ------------------------------------------------------------

struct FpGridPolicy {
    /// Cells per standard deviation of the linearized fluctuations.
    double cells_per_sigma = 5.0;
    /// Rise of the K = 0 radial potential -ln W that sets the outer radius.
    double potential_rise = 30.0;
    int min_nr = 64;
    int min_ntheta = 64;
    int max_nr = 1024;
    int max_ntheta = 2048;
    /// Half-width, in radial sigmas, of the annulus used for well-locked states.
    double locked_span_sigmas = 12.0;
    /// Locked means sigma_t / r_lock below this.
    double locked_ratio = 0.1;
};

struct FpGridEstimate {
    double r_free = 0.0;  ///< outer radius of the unlocked distribution
    double r_lock = 0.0;  ///< mean-field amplitude with the lock on
    double sigma_r = 0.0; ///< radial fluctuation scale
    double sigma_t = 0.0; ///< tangential fluctuation scale
    PolarLayout layout;
};

namespace detail {

/// Radius where -ln W of the unlocked radial solution exceeds its minimum by `rise`.
inline double unlocked_radius(const FpModel& m, double rise)
{
    // zero-flux radial solution: d(-ln W)/dr = -v/D
    const double h = 1e-3;
    double phi = 0.0, phi_min = 0.0, r = 0.0;
    while (r < 1e3) {
        const double rm = r + 0.5 * h;
        phi -= h * m.velocity(rm) / m.diffusion(rm);
        r += h;
        phi_min = std::min(phi_min, phi);
        if (phi - phi_min > rise)
            return r;
    }
    fail(ErrorCode::guard, "FP grid: unlocked distribution is not confined (no steady state)");
}

/// Stationary covariance of the linearized amplitude flow at the locked fixed point.
inline std::pair<double, double> locked_sigmas(const FpModel& m, double x)
{
    const AmplitudeDrift d = m.amplitude_drift();
    const cplx denom(d.linear + d.cubic * x, -d.kerr * (x - 1.0));
    const cplx a0 = -d.lock / denom;
    auto f = [&](cplx a) {
        const double n = std::norm(a);
        return cplx(d.linear + d.cubic * n, -d.kerr * (n - 1.0)) * a + d.lock;
    };
    Eigen::Matrix2d j;
    const double e = 1e-6 * std::max(1.0, std::abs(a0));
    for (int c = 0; c < 2; ++c) {
        const cplx da = c == 0 ? cplx(e, 0) : cplx(0, e);
        const cplx df = (f(a0 + da) - f(a0 - da)) / (2 * e);
        j(0, c) = df.real();
        j(1, c) = df.imag();
    }
    // J S + S J^T = -2 D I  for symmetric S = [[p, q], [q, s]]
    const double dcoef = m.diffusion(std::abs(a0));
    Eigen::Matrix3d k;
    k << 2 * j(0, 0), 2 * j(0, 1), 0, j(1, 0), j(0, 0) + j(1, 1), j(0, 1), 0, 2 * j(1, 0), 2 * j(1, 1);
    const Eigen::Vector3d sol = k.fullPivLu().solve(Eigen::Vector3d(-2 * dcoef, 0, -2 * dcoef));
    Eigen::Matrix2d cov;
    cov << sol(0), sol(1), sol(1), sol(2);
    if (!(cov.determinant() > 0) || !(cov(0, 0) > 0))
        return {NAN, NAN};
    // project onto radial and tangential directions at a0
    const double th = std::arg(a0);
    const Eigen::Vector2d er(std::cos(th), std::sin(th)), et(-std::sin(th), std::cos(th));
    return {std::sqrt(er.dot(cov * er)), std::sqrt(et.dot(cov * et))};
}

} // namespace detail

/// Grid sized from the deterministic dynamics: r_max covers the unlocked
/// distribution plus the locked displacement; cells resolve the narrowest
/// linearized fluctuation width.
inline FpGridEstimate default_fp_layout(const FpModel& model, const FpGridPolicy& policy = {})
{
    FpGridEstimate est;
    est.r_free = detail::unlocked_radius(model, policy.potential_rise);
    const AmplitudeDrift d = model.amplitude_drift();
    const double x = mean_field_population(d);
    est.r_lock = d.lock > 0.0 && std::isfinite(x) ? std::sqrt(x) : 0.0;

    // unlocked radial width: curvature of -ln W at its minimum, or the quartic
    // scale when the minimum is flat
    double r_peak = 0.0;
    {
        const double free = detail::free_running_population(d);
        r_peak = std::isfinite(free) ? std::sqrt(free) : 0.0;
        const double dv = (model.velocity(r_peak + 1e-4) - model.velocity(std::max(0.0, r_peak - 1e-4))) /
                          (r_peak + 1e-4 - std::max(0.0, r_peak - 1e-4));
        const double dcoef = model.diffusion(r_peak);
        est.sigma_r = dv < -1e-9 ? std::sqrt(dcoef / -dv) : 0.25 * est.r_free;
        est.sigma_r = std::min(est.sigma_r, 0.25 * est.r_free);
        est.sigma_t = est.sigma_r;
    }
    if (d.lock > 0.0) {
        const auto [sr, st] = detail::locked_sigmas(model, x);
        if (std::isfinite(sr) && std::isfinite(st)) {
            est.sigma_r = std::min(est.sigma_r, sr);
            est.sigma_t = std::min(est.sigma_t, st);
            r_peak = est.r_lock;
        }
    }
    double r_min = 0.0, r_max = est.r_free + est.r_lock;
    const double span = policy.locked_span_sigmas * est.sigma_r;
    if (est.r_lock > 0.0 && est.sigma_t < policy.locked_ratio * est.r_lock && est.r_lock > span) {
        // well locked: annulus around the locked amplitude
        r_min = est.r_lock - span;
        r_max = est.r_lock + span;
    }
    const double dr = est.sigma_r / policy.cells_per_sigma;
    const int nr = std::clamp(static_cast<int>(std::ceil((r_max - r_min) / dr)), policy.min_nr, policy.max_nr);
    const double arc = std::max(r_peak, 1.0) * 2.0 * std::numbers::pi;
    int nt = static_cast<int>(std::ceil(arc / (est.sigma_t / policy.cells_per_sigma)));
    nt = std::clamp((nt + 63) / 64 * 64, policy.min_ntheta, policy.max_ntheta);
    est.layout = PolarLayout{r_max, nr, nt, r_min};
    return est;
}

// ---- time stepping and steady state ----------------------------------------

enum class FpSteadyMethod { automatic, direct, march };

struct FpSteadyConfig {
    FpSteadyMethod method = FpSteadyMethod::automatic;
    /// <= 0 selects the stability-bound default.
    double dt = 0.0;
    double dt_safety = 0.5;
    double t_max = 100.0;
    /// Threshold on the weighted 1-norm of dW/dt for a unit-mass field.
    double tol = 1e-8;
    int check_every = 50;
};

/// Largest absolute row sum, a bound on the spectral radius.
inline double row_sum_bound(const RSparse& l)
{
    double bound = 0.0;
    for (int k = 0; k < l.outerSize(); ++k) {
        double row = 0.0;
        for (RSparse::InnerIterator it(l, k); it; ++it)
            row += std::abs(it.value());
        bound = std::max(bound, row);
    }
    return bound;
}

/// Explicit RK4 step inside the real-axis stability interval [-2.78, 0].
inline double fp_default_dt(const RSparse& l, double safety = 0.5)
{
    return safety * 2.5 / std::max(row_sum_bound(l), 1e-300);
}

struct FpSteadyResult {
    FpField field;
    /// Weighted 1-norm of dW/dt - mu W for the unit-mass field, mu the mass growth rate.
    double residual = INFINITY;
    /// mu = d(mass)/dt / mass; zero up to boundary leakage for mass-conserving operators.
    double growth_rate = 0.0;
    bool converged = false;
    long steps = 0;
    double dt = 0.0;
    std::optional<ErrorCode> issue;
    std::string note;
};

/// Fixed-step RK4 from field0 for `steps` steps; no renormalization.
inline FpField fp_evolve(const FpModel& model, const FpField& field0, double dt, long steps)
{
    const RSparse l = fp_operator(model, field0.layout());
    Eigen::VectorXd w = as_vector(field0.grid);
    Eigen::VectorXd k1, k2, k3, k4;
    for (long n = 0; n < steps; ++n) {
        k1 = l * w;
        k2 = l * (w + 0.5 * dt * k1);
        k3 = l * (w + 0.5 * dt * k2);
        k4 = l * (w + dt * k3);
        w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!w.allFinite())
            fail(ErrorCode::non_finite, "FP evolve: field became non-finite (time step above stability bound)");
    }
    FpField out(WignerGrid(field0.layout(), std::vector<double>(w.data(), w.data() + w.size())));
    out.t = field0.t + steps * dt;
    return out;
}

namespace detail {

#ifdef NGLIGHT_HAVE_UMFPACK
using SparseFactor = Eigen::UmfPackLU<Eigen::SparseMatrix<double>>;
#else
using SparseFactor = Eigen::SparseLU<Eigen::SparseMatrix<double>>;
#endif

/// Normalizes w into r.field and fills residual and growth rate.
inline void score(FpSteadyResult& r, const RSparse& l, const PolarLayout& layout, const Eigen::VectorXd& w)
{
    r.field = FpField(WignerGrid(layout, std::vector<double>(w.data(), w.data() + w.size())));
    r.field.normalize();
    const auto v = as_vector(r.field.grid);
    const Eigen::VectorXd lw = l * v;
    double mu = 0.0;
    for (Eigen::Index k = 0; k < lw.size(); ++k)
        mu += r.field.grid.weights()[k] * lw(k);
    r.growth_rate = mu;
    r.residual = weighted_l1(r.field.grid, lw - mu * v);
}

/// Inverse iteration on L - sigma with a tiny negative shift: converges to the
/// eigenvector whose eigenvalue is closest to zero.
inline FpSteadyResult fp_steady_direct(const RSparse& l, const FpField& field0, const FpSteadyConfig& cfg)
{
    const int n = static_cast<int>(l.rows());
    Eigen::SparseMatrix<double> a = l;
    const double sigma = -1e-10 * std::max(1.0, row_sum_bound(l));
    for (int k = 0; k < n; ++k)
        a.coeffRef(k, k) -= sigma;
    a.makeCompressed();
    SparseFactor lu;
    lu.compute(a);
    FpSteadyResult r{field0};
    if (lu.info() != Eigen::Success) {
        r.issue = ErrorCode::guard;
        r.note = "sparse factorization failed (grid too large for available memory?)";
        return r;
    }
    Eigen::VectorXd w = as_vector(field0.grid);
    if (w.cwiseAbs().maxCoeff() == 0.0)
        w.setOnes();
    for (int it = 0; it < 8; ++it) {
        w = lu.solve(w);
        ++r.steps;
        if (!w.allFinite()) {
            r.issue = ErrorCode::non_finite;
            r.note = "inverse iteration produced non-finite values";
            return r;
        }
        w /= w.cwiseAbs().maxCoeff();
        score(r, l, field0.layout(), w);
        if (r.residual <= cfg.tol)
            break;
    }
    r.converged = r.residual <= cfg.tol;
    if (!r.converged)
        r.issue = ErrorCode::not_converged;
    return r;
}

/// RK4 march with the mass renormalized at every check.
inline FpSteadyResult fp_steady_march(const RSparse& l, const FpField& field0, const FpSteadyConfig& cfg)
{
    FpSteadyResult r{field0};
    r.dt = cfg.dt > 0.0 ? cfg.dt : fp_default_dt(l, cfg.dt_safety);
    Eigen::VectorXd w = as_vector(field0.grid);
    w /= field0.mass();
    Eigen::VectorXd k1, k2, k3, k4;
    const double dt = r.dt;
    const long n_steps = static_cast<long>(std::ceil(cfg.t_max / dt - 1e-9));
    while (r.steps < n_steps) {
        k1 = l * w;
        k2 = l * (w + 0.5 * dt * k1);
        k3 = l * (w + 0.5 * dt * k2);
        k4 = l * (w + dt * k3);
        w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ++r.steps;
        if (!w.allFinite())
            fail(ErrorCode::non_finite, "FP march: field became non-finite at t = " + std::to_string(r.steps * dt) +
                                            " (time step above stability bound)");
        if (r.steps % cfg.check_every == 0 || r.steps == n_steps) {
            score(r, l, field0.layout(), w);
            w = as_vector(r.field.grid);
            if (r.residual <= cfg.tol)
                break;
        }
    }
    r.field.t = field0.t + r.steps * dt;
    r.converged = r.residual <= cfg.tol;
    if (!r.converged)
        r.issue = ErrorCode::not_converged;
    return r;
}

} // namespace detail

/// Stationary point of the mass-renormalized flow dW/dt = L W - mu W, at unit
/// mass. For the mass-conserving operators this is the steady state. The
/// as-printed lock drift does not conserve mass, so there the result is the
/// dominant growing mode and growth_rate reports its rate.
///
/// `automatic` uses shift-invert for the physical lock and a march otherwise.
inline FpSteadyResult fp_steady(const FpModel& model, const FpField& field0, const FpSteadyConfig& cfg = {})
{
    if (!(cfg.t_max > 0.0) || !(cfg.tol > 0.0) || cfg.check_every < 1 || !(cfg.dt_safety > 0.0))
        fail(ErrorCode::guard, "FpSteadyConfig: t_max, tol, dt_safety must be > 0 and check_every >= 1");
    const RSparse l = fp_operator(model, field0.layout());
    FpSteadyMethod method = cfg.method;
    if (method == FpSteadyMethod::automatic)
        method = model.drift() == LockDrift::physical || model.lock() == 0.0 ? FpSteadyMethod::direct
                                                                            : FpSteadyMethod::march;
    return method == FpSteadyMethod::direct ? detail::fp_steady_direct(l, field0, cfg)
                                            : detail::fp_steady_march(l, field0, cfg);
}

} // namespace nglight
