#include <gtest/gtest.h>

#include <functional>
#include <numbers>
#include <random>

#include "nglight/fokker_planck.hpp"

using namespace nglight;

namespace {

using Field = std::function<double(double r, double th)>;

// Smooth off-centre test function.
double bump(double r, double th)
{
    const double x = r * std::cos(th), y = r * std::sin(th);
    return std::exp(-((x - 1.2) * (x - 1.2) + (y + 0.4) * (y + 0.4)) / 0.8) * (1.0 + 0.2 * x * y);
}

// Central differences of a polar function, directly in (r, theta).
struct Derivs {
    Field f;
    double h = 2e-3;
    double dr(double r, double t) const { return (f(r + h, t) - f(r - h, t)) / (2 * h); }
    double dt(double r, double t) const { return (f(r, t + h) - f(r, t - h)) / (2 * h); }
    double drr(double r, double t) const { return (f(r + h, t) - 2 * f(r, t) + f(r - h, t)) / (h * h); }
    double dtt(double r, double t) const { return (f(r, t + h) - 2 * f(r, t) + f(r, t - h)) / (h * h); }
    double drt(double r, double t) const
    {
        return (f(r + h, t + h) - f(r + h, t - h) - f(r - h, t + h) + f(r - h, t - h)) / (4 * h * h);
    }
    double drrt(double r, double t) const
    {
        auto g = [&](double tt) { return (f(r + h, tt) - 2 * f(r, tt) + f(r - h, tt)) / (h * h); };
        return (g(t + h) - g(t - h)) / (2 * h);
    }
    double dttt(double r, double t) const
    {
        return (f(r, t + 2 * h) - 2 * f(r, t + h) + 2 * f(r, t - h) - f(r, t - 2 * h)) / (2 * h * h * h);
    }
};

FpField sample(const PolarLayout& l, const Field& f)
{
    FpField out(l);
    for (int j = 0; j < l.nr; ++j)
        for (int i = 0; i < l.ntheta; ++i)
            out.grid(j, i) = f(l.r(j), l.theta(i));
    return out;
}

// max |a - b| over nodes with r in [lo, hi], relative to max |b| there
double rel_error(const PolarLayout& l, const WignerGrid& a, const std::function<double(double, double)>& b, double lo,
                 double hi)
{
    double err = 0.0, scale = 0.0;
    for (int j = 0; j < l.nr; ++j) {
        if (l.r(j) < lo || l.r(j) > hi)
            continue;
        for (int i = 0; i < l.ntheta; ++i) {
            const double e = b(l.r(j), l.theta(i));
            err = std::max(err, std::abs(a(j, i) - e));
            scale = std::max(scale, std::abs(e));
        }
    }
    return err / scale;
}

WignerGrid sum(const WignerGrid& a, const WignerGrid& b)
{
    WignerGrid out = a;
    for (std::size_t k = 0; k < out.size(); ++k)
        out.values()[k] += b.values()[k];
    return out;
}

const PolarLayout fine{5.0, 400, 512};
const FpModel laser_b = FpModel::laser({3.0, 1.0, 1.0, 0.1, 50.0});
const FpModel polariton_2 = FpModel::polariton({.g1 = -1.0, .g2 = 0.3, .d1 = 1.0, .d2 = 10.0, .kerr = 10.0, .lock = 7.0});

} // namespace

TEST(FokkerPlanck, LaserDriftDiffusionMatchClosedPolarForm)
{
    const Derivs d{bump};
    const auto w = sample(fine, bump);
    const auto& p = laser_b.laser_params();
    const auto drift = fp_term(laser_b, w, FpTerm::drift);
    // -(1/2r) d/dr [ r^2 (A - g - B r^2) W ]
    auto closed_drift = [&](double r, double t) {
        const double c = p.gain - p.cavity_loss;
        const double poly = r * r * (c - p.saturation * r * r), dpoly = 2 * r * c - 4 * p.saturation * r * r * r;
        return -(dpoly * bump(r, t) + poly * d.dr(r, t)) / (2 * r);
    };
    EXPECT_LT(rel_error(fine, drift, closed_drift, 0.3, 3.5), 2e-3);

    const auto diff = fp_term(laser_b, w, FpTerm::diffusion);
    auto closed_diff = [&](double r, double t) {
        return (p.gain + p.cavity_loss) / 8 * (d.dr(r, t) / r + d.drr(r, t) + d.dtt(r, t) / (r * r));
    };
    EXPECT_LT(rel_error(fine, diff, closed_diff, 0.3, 3.5), 2e-3);
}

TEST(FokkerPlanck, KerrTermsMatchClosedPolarForm)
{
    const Derivs d{bump};
    const auto w = sample(fine, bump);
    const double u = laser_b.kerr();
    const auto kerr = sum(fp_term(laser_b, w, FpTerm::kerr_rotation), fp_term(laser_b, w, FpTerm::kerr_third_order));
    auto closed = [&](double r, double t) {
        return u * ((1 - r * r) * d.dt(r, t) + (d.drt(r, t) / r + d.drrt(r, t) + d.dttt(r, t) / (r * r)) / 16);
    };
    EXPECT_LT(rel_error(fine, kerr, closed, 0.3, 3.5), 2e-3);
    // polariton writes the rotation as -U (r^2 - 1) dW/dtheta: same operator
    const auto pk = fp_term(polariton_2, w, FpTerm::kerr_rotation);
    const auto lk = fp_term(laser_b.with_kerr(polariton_2.kerr()), w, FpTerm::kerr_rotation);
    EXPECT_EQ(pk.values(), lk.values());
}

TEST(FokkerPlanck, PolaritonDriftDiffusionMatchClosedPolarForm)
{
    const Derivs d{bump};
    const auto w = sample(fine, bump);
    const auto& p = polariton_2.polariton_params();
    const auto rhs = sum(fp_term(polariton_2, w, FpTerm::drift), fp_term(polariton_2, w, FpTerm::diffusion));
    auto closed = [&](double r, double t) {
        const double dcoef = p.d2 / 4 + p.d1 * r * r - p.g1 / 2;
        return -(2 * p.g2 + 8 * p.g1 * r * r) * bump(r, t) + (-p.g2 + 2 * p.d1 - 2 * p.g1 * r * r) * r * d.dr(r, t) +
               dcoef * (d.dr(r, t) / r + d.drr(r, t) + d.dtt(r, t) / (r * r));
    };
    EXPECT_LT(rel_error(fine, rhs, closed, 0.3, 3.5), 2e-3);
}

TEST(FokkerPlanck, LockDriftVariants)
{
    const Derivs d{bump};
    const auto w = sample(fine, bump);
    for (const FpModel& m : {laser_b, polariton_2}) {
        const double k = m.is_laser() ? m.lock() : 2 * m.lock();
        const auto phys = fp_term(m, w, FpTerm::lock);
        auto closed_phys = [&](double r, double t) {
            return -k * (std::cos(t) * d.dr(r, t) - std::sin(t) / r * d.dt(r, t));
        };
        EXPECT_LT(rel_error(fine, phys, closed_phys, 0.3, 3.5), 2e-3);

        const auto asp = fp_term(m.with_drift(LockDrift::as_printed), w, FpTerm::lock);
        auto closed_asp = [&](double r, double t) { return -k * (std::cos(t) - std::sin(t) / r) * d.dr(r, t); };
        EXPECT_LT(rel_error(fine, asp, closed_asp, 0.3, 3.5), 2e-3);
    }
}

TEST(FokkerPlanck, ThetaShiftCommutesWithoutLock)
{
    const PolarLayout l{4.0, 24, 32};
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FpField w(l);
    for (double& v : w.grid.values())
        v = u(gen);
    auto shift = [&](const WignerGrid& g) {
        WignerGrid out = g;
        for (int j = 0; j < l.nr; ++j)
            for (int i = 0; i < l.ntheta; ++i)
                out(j, (i + 1) % l.ntheta) = g(j, i);
        return out;
    };
    for (const FpModel& m : {laser_b.with_lock(0.0), polariton_2.with_lock(0.0)}) {
        const auto a = shift(fp_rhs(m, w));
        const auto b = fp_rhs(m, FpField(shift(w.grid)));
        for (std::size_t k = 0; k < a.size(); ++k)
            EXPECT_NEAR(a.values()[k], b.values()[k], 1e-12 * (1 + std::abs(a.values()[k])));
    }
}

TEST(FokkerPlanck, SymmetricFieldReducesToRadialOperator)
{
    const PolarLayout l{5.0, 200, 64};
    const auto m = FpModel::laser({3.0, 1.0, 1.0, 0.0, 0.0});
    auto f = [](double r, double) { return std::exp(-(r - 1.3) * (r - 1.3)); };
    const auto rhs = fp_rhs(m, sample(l, f));
    for (int j = 0; j < l.nr; ++j)
        for (int i = 1; i < l.ntheta; ++i)
            EXPECT_NEAR(rhs(j, i), rhs(j, 0), 1e-12 * (1 + std::abs(rhs(j, 0))));
    // 1-D radial form: -(1/2r)(r^2 (2 - r^2) f)' + (1/2)(f'' + f'/r)
    const Derivs d{f};
    auto radial = [&](double r, double t) {
        const double poly = r * r * (2 - r * r), dpoly = 4 * r - 4 * r * r * r;
        return -(dpoly * f(r, t) + poly * d.dr(r, t)) / (2 * r) + 0.5 * (d.drr(r, t) + d.dr(r, t) / r);
    };
    EXPECT_LT(rel_error(l, rhs, radial, 0.2, 4.0), 2e-3);
}

TEST(FokkerPlanck, ConstantFieldDriftSign)
{
    // -(1/2r) d/dr [r^2 (A - g - B r^2)] = -(A - g) + 2 B r^2
    const PolarLayout l{4.0, 400, 16};
    const auto m = FpModel::laser({3.0, 1.0, 1.0, 0.0, 0.0});
    const auto drift = fp_term(m, sample(l, [](double, double) { return 1.0; }), FpTerm::drift);
    for (int j = 0; j + 1 < l.nr; j += 37) {
        const double r = l.r(j);
        EXPECT_NEAR(drift(j, 3), -2.0 + 2.0 * r * r, 1e-4 * (1 + r * r)) << "r = " << r;
    }
    EXPECT_LT(drift(0, 0), 0.0);           // net gain inside the ring
    EXPECT_GT(drift(l.nr - 2, 0), 0.0);    // net loss outside
}

TEST(FokkerPlanck, AllTermsConserveMassAwayFromTheBoundary)
{
    const PolarLayout l{5.0, 50, 32};
    for (const FpModel& m : {laser_b.with_lock(5.0), polariton_2}) {
        auto f0 = FpField::gaussian(l, cplx(0.8, 0.3), 0.4);
        const double dt = fp_default_dt(fp_operator(m, l));
        const long steps = static_cast<long>(std::ceil(0.01 / dt));
        const auto f1 = fp_evolve(m, f0, dt, steps);
        EXPECT_LT(std::abs(f1.mass() - 1.0) / f1.t, 1e-6);
        EXPECT_TRUE(std::all_of(f1.grid.values().begin(), f1.grid.values().end(), [](double v) { return std::isfinite(v); }));
    }
}

TEST(FokkerPlanck, AsPrintedLockDoesNotConserveMass)
{
    const PolarLayout l{6.0, 80, 64};
    const auto m = laser_b.with_kerr(0.0).with_lock(2.0).with_drift(LockDrift::as_printed);
    const auto rhs = fp_rhs(m, FpField::gaussian(l, cplx(1.0, 0.0), 0.3));
    double rate = 0.0;
    for (std::size_t k = 0; k < rhs.size(); ++k)
        rate += rhs.weights()[k] * rhs.values()[k];
    EXPECT_GT(rate, 0.1); // div v = K cos(theta) / r
}

TEST(FokkerPlanck, LockedPolaritonStepStablyWithDefaultDt)
{
    const auto m = FpModel::polariton({.g1 = -1.0, .g2 = 0.0, .d1 = 1.0, .d2 = 10.0, .kerr = 10.0, .lock = 1000.0});
    const auto est = default_fp_layout(m);
    auto f0 = FpField::gaussian(est.layout, est.r_lock, 0.5);
    const double dt = fp_default_dt(fp_operator(m, est.layout));
    const auto f1 = fp_evolve(m, f0, dt, 200);
    double peak = 0.0;
    for (double v : f1.grid.values()) {
        ASSERT_TRUE(std::isfinite(v));
        peak = std::max(peak, std::abs(v));
    }
    double peak0 = 0.0;
    for (double v : f0.grid.values())
        peak0 = std::max(peak0, std::abs(v));
    EXPECT_LT(peak, 2.0 * peak0);
}

TEST(FokkerPlanck, TooLargeStepIsNonFinite)
{
    const auto m = laser_b;
    const PolarLayout l{7.0, 60, 64};
    const double dt = fp_default_dt(fp_operator(m, l));
    try {
        fp_evolve(m, FpField::gaussian(l, 1.0, 0.5), 40 * dt, 4000);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_finite);
    }
}

TEST(FokkerPlanck, FreeRunningLaserRingSitsAtDriftZero)
{
    const auto m = FpModel::laser({3.0, 1.0, 1.0, 0.0, 0.0});
    const PolarLayout l{4.0, 400, 64};
    const auto r = fp_steady(m, FpField::gaussian(l, 0.0, 1.0));
    ASSERT_TRUE(r.converged);
    int peak = 0;
    for (int j = 0; j < l.nr; ++j)
        if (r.field.grid(j, 0) > r.field.grid(peak, 0))
            peak = j;
    EXPECT_NEAR(l.r(peak), std::sqrt(2.0), 0.05);
    // zero-flux solution W ~ exp(r^2 - r^4/4)
    double z = 0.0, err = 0.0;
    std::vector<double> exact(l.nr);
    for (int j = 0; j < l.nr; ++j) {
        exact[j] = std::exp(l.r(j) * l.r(j) - std::pow(l.r(j), 4) / 4);
        z += exact[j] * l.r(j) * l.dr() * 2 * std::numbers::pi;
    }
    for (int j = 0; j < l.nr; ++j)
        err += std::abs(r.field.grid(j, 5) - exact[j] / z) * l.r(j) * l.dr() * 2 * std::numbers::pi;
    EXPECT_LT(err, 1e-3);
    // theta independence
    for (int j = 0; j < l.nr; j += 20)
        for (int i = 0; i < l.ntheta; ++i)
            EXPECT_NEAR(r.field.grid(j, i), r.field.grid(j, 0), 5e-3 * r.field.grid(peak, 0));
    EXPECT_NEAR(fp_moments(r.field).mass, 1.0, 1e-12);
    EXPECT_GT(fp_negativity(r.field), -1e-12);
}

TEST(FokkerPlanck, KerrAloneKeepsTheRingSymmetric)
{
    const auto m = FpModel::laser({3.0, 1.0, 1.0, 0.1, 0.0});
    const PolarLayout l{4.0, 200, 64};
    const auto r = fp_steady(m, FpField::gaussian(l, 0.0, 1.0));
    ASSERT_TRUE(r.converged);
    double hi = 0.0, var = 0.0;
    for (int j = 0; j < l.nr; ++j) {
        double lo_j = 1e300, hi_j = -1e300;
        for (int i = 0; i < l.ntheta; ++i) {
            lo_j = std::min(lo_j, r.field.grid(j, i));
            hi_j = std::max(hi_j, r.field.grid(j, i));
        }
        hi = std::max(hi, hi_j);
        var = std::max(var, hi_j - lo_j);
    }
    EXPECT_LE(var / hi, 5e-3);
}

TEST(FokkerPlanck, LaserAndPolaritonSeam)
{
    // v = r (1 - r^2 / 2), D = 1/2 written in both parameterizations
    const auto laser = FpModel::laser({3.0, 1.0, 1.0, 0.0, 0.0});
    const auto pol = FpModel::polariton({.g1 = -0.25, .g2 = 1.0, .d1 = 1e-9, .d2 = 1.5, .kerr = 0.0, .lock = 0.0});
    const PolarLayout l{4.0, 200, 32};
    const auto a = fp_steady(laser, FpField::gaussian(l, 0.0, 1.0));
    const auto b = fp_steady(pol, FpField::gaussian(l, 0.0, 1.0));
    ASSERT_TRUE(a.converged && b.converged);
    double diff = 0.0, norm = 0.0;
    for (int j = 0; j < l.nr; ++j) {
        diff += std::abs(a.field.grid(j, 0) - b.field.grid(j, 0)) * l.r(j);
        norm += std::abs(a.field.grid(j, 0)) * l.r(j);
    }
    EXPECT_LT(diff / norm, 0.02);
}

TEST(FokkerPlanck, NegativityOfSampledFockOne)
{
    const PolarLayout l{6.0, 600, 64};
    auto w1 = [](double r, double) { return 2 / std::numbers::pi * (4 * r * r - 1) * std::exp(-2 * r * r); };
    const auto f = sample(l, w1);
    const double oracle = 1.0 - 2.0 * std::exp(-0.5);
    EXPECT_NEAR(fp_negativity(f), oracle, 2e-3);
    const auto wg = wigner_grid(DensityMatrix::fock_state(FockSpace(10), 1), l);
    EXPECT_NEAR(fp_negativity(f) / negativity(wg), 1.0, 1e-2);
}

TEST(FokkerPlanck, MomentsOfSimpleFields)
{
    const PolarLayout l{6.0, 600, 64};
    const auto vac = sample(l, [](double r, double) { return 2 / std::numbers::pi * std::exp(-2 * r * r); });
    const auto m = fp_moments(vac);
    EXPECT_NEAR(m.mass, 1.0, 1e-4);
    EXPECT_NEAR(m.mean_r2, 0.5, 1e-4);
    EXPECT_NEAR(m.mean_cos, 0.0, 1e-12);
    // thin ring at sqrt 2
    const PolarLayout thin{3.0, 3000, 16};
    const auto ring = sample(thin, [](double r, double) { return std::exp(-(r - std::sqrt(2.0)) * (r - std::sqrt(2.0)) / 1e-4); });
    EXPECT_NEAR(fp_moments(ring).mean_r2, 2.0, 1e-3);
}

TEST(FokkerPlanck, LockedPolaritonPeakPointsAlongTheDrive)
{
    const auto m = FpModel::polariton({.g1 = -1.0, .g2 = 0.0, .d1 = 1.0, .d2 = 10.0, .kerr = 10.0, .lock = 1000.0});
    const auto est = default_fp_layout(m);
    const auto r = fp_steady(m, FpField::gaussian(est.layout, est.r_lock, 0.5));
    ASSERT_TRUE(r.converged) << r.residual;
    EXPECT_GT(fp_moments(r.field).mean_cos, 0.0);
    EXPECT_LE(fp_negativity(r.field), 0.0);
}

TEST(FokkerPlanck, ResampleGaussianToCartesian)
{
    const PolarLayout l{6.0, 300, 256};
    const cplx c(0.7, -0.4);
    auto g = [&](double r, double t) { return std::exp(-std::norm(std::polar(r, t) - c)); };
    const auto f = sample(l, g);
    const CartesianLayout cart{-3, 3, 61, -3, 3, 61};
    const auto out = resample(f, cart);
    double err = 0.0;
    for (int j = 0; j < out.rows(); ++j)
        for (int i = 0; i < out.cols(); ++i) {
            const cplx a = out.alpha(j, i);
            err = std::max(err, std::abs(out(j, i) - g(std::abs(a), std::arg(a))));
        }
    EXPECT_LT(err, 2e-3);
}

TEST(FokkerPlanck, DiffusionMustBePositive)
{
    EXPECT_THROW(FpModel::polariton({.g1 = 0.0, .g2 = 0.0, .d1 = 0.0, .d2 = 1.0}), Error);
    const auto m = FpModel::polariton({.g1 = 3.0, .g2 = 0.0, .d1 = 1.0, .d2 = 1.0});
    try {
        fp_operator(m, PolarLayout{3.0, 10, 16});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
    }
}

TEST(FokkerPlanck, DefaultLayoutUsesAnnulusOnlyWhenLocked)
{
    const auto free = default_fp_layout(FpModel::laser({3.0, 1.0, 1.0, 0.0, 0.0}));
    EXPECT_EQ(free.layout.r_min, 0.0);
    EXPECT_NEAR(free.sigma_r, 0.5, 1e-3); // sqrt(D / |v'(sqrt 2)|) = sqrt(0.5 / 2)
    const auto locked = default_fp_layout(laser_b);
    EXPECT_GT(locked.layout.r_min, 0.0);
    EXPECT_LT(locked.layout.r_min, locked.r_lock);
    EXPECT_GT(locked.layout.r_max, locked.r_lock);
    EXPECT_NEAR(locked.r_lock * locked.r_lock, mean_field_population(laser_b.amplitude_drift()), 1e-9);
}

TEST(FokkerPlanck, UnconfinedModelIsAGuardError)
{
    // G1 > 0 pushes amplitude outward without bound
    const auto m = FpModel::polariton({.g1 = 1.0, .g2 = 0.0, .d1 = 1.0, .d2 = 10.0});
    try {
        default_fp_layout(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::guard);
    }
}
