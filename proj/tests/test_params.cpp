#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nglight/polariton_params.hpp"

using namespace nglight;
using std::numbers::pi;

namespace {

// Small GaAs-like trap: r = 0.16 um, 4 K, 1 ns cavity lifetime.
PhysicalInputs gaas()
{
    const double r = 0.16e-6;
    return {Area{pi * r * r},
            Temperature{4.0},
            Length{10e-9},
            Permittivity{12.9 * constants::epsilon_0.si()},
            Mass{0.6 * constants::m_e.si()},
            std::sqrt(0.5),
            Rate{1e9}};
}

// Second evaluation in plain doubles with a^2 eliminated analytically.
struct HandEstimate {
    double v0, a, s1, s2, u;
};

HandEstimate by_hand(const PhysicalInputs& in)
{
    const double hbar = 1.054571817e-34, kb = 1.380649e-23, e = 1.602176634e-19;
    const double A = in.area.si(), T = in.temperature.si(), ab = in.bohr_radius.si(), eps = in.permittivity.si();
    const double m = in.exciton_mass.si(), x = in.hopfield_x;
    HandEstimate h;
    h.v0 = 6 * e * e * ab / (4 * pi * eps * A);
    h.a = hbar / std::sqrt(2 * m * kb * T);
    // a^2 = hbar^2 / (2 m kT)
    h.s1 = h.v0 * h.v0 * A * m / (2 * pi * hbar * hbar * hbar);
    h.s2 = h.v0 * h.v0 * A * A * m * m * kb * T / (2 * pi * pi * pi * std::pow(hbar, 5));
    h.u = 30 * e * e * ab * x * x * x * x / (pi * pi * pi * eps * A);
    return h;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

// Unit algebra is checked by the type system; these pin the intent.
static_assert(decltype(constants::e * constants::e * Length{} / (Permittivity{} * Area{}))::dim == dims::energy);
static_assert(decltype(constants::hbar / Energy{})::dim == dims::time);
static_assert(decltype(Energy{} * Energy{} * Area{} / (constants::hbar * Energy{} * Area{}))::dim == dims::rate);
static_assert(decltype(sqrt(Mass{} * Energy{}))::dim == (dims::action - dims::length));
static_assert(RateEstimates{}.scale_2.dim == dims::rate);

TEST(PolaritonParams, DualPathArithmetic)
{
    const auto in = gaas();
    const auto est = estimate(in);
    const auto hand = by_hand(in);
    EXPECT_LT(rel(est.v0.si(), hand.v0), 1e-12);
    EXPECT_LT(rel(est.a_thermal.si(), hand.a), 1e-12);
    EXPECT_LT(rel(est.scale_1.si(), hand.s1), 1e-12);
    EXPECT_LT(rel(est.scale_2.si(), hand.s2), 1e-12);
    EXPECT_LT(rel(est.u_est.si(), hand.u), 1e-12);
    EXPECT_LT(rel(est.e0.si(), constants::k_b.si() * 4.0), 1e-15);
}

TEST(PolaritonParams, SmallParameterRatio)
{
    for (double scale : {0.3, 1.0, 7.0}) {
        auto in = gaas();
        in.area = in.area * scale;
        in.temperature = in.temperature * (1.0 + scale);
        const auto est = estimate(in);
        const double a = est.a_thermal.si();
        EXPECT_LT(rel(est.small_ratio(), 2 * pi * pi * a * a / in.area.si()), 1e-14);
    }
}

TEST(PolaritonParams, ThermalLengthScaling)
{
    auto in = gaas();
    const double a2 = std::pow(estimate(in).a_thermal.si(), 2);
    in.temperature = in.temperature * 2.0;
    EXPECT_LT(rel(std::pow(estimate(in).a_thermal.si(), 2), a2 / 2), 1e-14);
}

TEST(PolaritonParams, ScalingAtDoubledInputs)
{
    const auto base = estimate(gaas());

    auto in = gaas();
    in.area = in.area * 2.0;
    const auto big = estimate(in);
    EXPECT_LT(rel(big.u_est.si(), base.u_est.si() / 2), 1e-14);
    // V0 ~ 1/A, so the pair scale carries no net area and the ratio grows like A
    EXPECT_LT(rel(big.scale_2.si(), base.scale_2.si()), 1e-14);
    EXPECT_LT(rel(big.scale_1.si(), base.scale_1.si() / 2), 1e-14);
    EXPECT_LT(rel(big.scale_2.si() / big.scale_1.si(), 2 * base.scale_2.si() / base.scale_1.si()), 1e-14);

    in = gaas();
    in.hopfield_x = 0.35;
    const auto small_x = estimate(in);
    in.hopfield_x = 0.7;
    const auto large_x = estimate(in);
    EXPECT_LT(rel(large_x.u_est.si(), 16 * small_x.u_est.si()), 1e-14);
}

TEST(PolaritonParams, ThresholdSplit)
{
    const auto in = gaas();
    const auto est = estimate(in);
    const auto m = to_model(est, {1.0, threshold_ratio_2(est, in.cavity_leak)}, in.cavity_leak);
    EXPECT_LT(std::abs(m.g2()), 1e-9 * m.d2());
    EXPECT_TRUE(m.near_threshold());
    EXPECT_NEAR(m.delta2, m.gamma2 + m.gamma0, 1e-9 * m.d2());

    const auto above = to_model(est, {1.0, 4.0}, in.cavity_leak);
    EXPECT_EQ(above.g2_sign(), 1);
    EXPECT_FALSE(above.near_threshold());
}

TEST(PolaritonParams, BalancedOneBodySplit)
{
    const auto est = estimate(gaas());
    const auto m = to_model(est, {1.0, 1.0}, Rate{1e9});
    EXPECT_EQ(m.g1(), 0.0);
    EXPECT_DOUBLE_EQ(m.d1(), 2 * m.delta1);
    EXPECT_DOUBLE_EQ(m.delta1, est.scale_1.si());
    EXPECT_THROW(to_model(est, {0.0, 1.0}, Rate{1e9}), Error);
}

TEST(PolaritonParams, RegimeBuilder)
{
    const auto r = build_regime({.d2_over_d1 = 100, .g1_over_d1 = 1, .g2_over_d1 = 0, .kerr_over_d1 = 10});
    EXPECT_DOUBLE_EQ(r.d1(), 1.0);
    EXPECT_DOUBLE_EQ(r.d2(), 100.0);
    EXPECT_DOUBLE_EQ(r.g1(), 1.0);
    EXPECT_DOUBLE_EQ(r.g2(), 0.0);
    EXPECT_TRUE(r.near_threshold());
    const auto fp = r.fp();
    EXPECT_EQ(fp.d2, 100.0);
    EXPECT_EQ(fp.kerr, 10.0);

    const auto with_leak = build_regime({.d2_over_d1 = 10, .g1_over_d1 = -1, .gamma0_over_d1 = 2});
    EXPECT_DOUBLE_EQ(with_leak.d2(), 10.0);
    EXPECT_DOUBLE_EQ(with_leak.g1(), -1.0);
    EXPECT_DOUBLE_EQ(with_leak.gamma0, 2.0);
    EXPECT_THROW(build_regime({.d2_over_d1 = 1, .g1_over_d1 = -1, .gamma0_over_d1 = 2}), Error);
}

TEST(PolaritonParams, MasterEquationRates)
{
    const auto r = build_regime({.d2_over_d1 = 10, .g1_over_d1 = -1, .kerr_over_d1 = 10, .lock_over_d1 = 3});
    const auto p = r.master();
    EXPECT_DOUBLE_EQ(p.two_body_loss, 1.0);
    EXPECT_DOUBLE_EQ(p.two_body_gain, 0.0);
    EXPECT_DOUBLE_EQ(p.one_body_gain, 5.0);
    EXPECT_DOUBLE_EQ(p.one_body_loss + p.cavity_leak, 5.0);
    EXPECT_DOUBLE_EQ(p.lock, 6.0);
    EXPECT_DOUBLE_EQ(p.kerr, 10.0);
}

TEST(PolaritonParams, SmallTrapSmokeCheck)
{
    const auto in = gaas();
    const auto m = to_model(estimate(in), {}, in.cavity_leak);
    const double ratio = m.d2() / m.d1();
    EXPECT_GT(ratio, 10.0 / 3);
    EXPECT_LT(ratio, 10.0 * 3);
    const auto d1 = m.in_d1_units();
    EXPECT_DOUBLE_EQ(d1.d1(), 1.0);
    EXPECT_NEAR(d1.d2(), ratio, 1e-12 * ratio);
}

TEST(PolaritonParams, InvalidInputs)
{
    auto in = gaas();
    in.hopfield_x = 1.2;
    EXPECT_THROW(estimate(in), Error);
    in = gaas();
    in.exciton_mass = Mass{0.0};
    try {
        estimate(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
        EXPECT_NE(std::string(e.what()).find("m_exc"), std::string::npos);
    }
}
