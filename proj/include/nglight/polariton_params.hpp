#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nglight/errors.hpp"
#include "nglight/fock.hpp"
#include "nglight/fokker_planck.hpp"

namespace nglight {

/// Exponents of mass, length, time, current, temperature.
struct Dim {
    int m = 0, l = 0, t = 0, i = 0, k = 0;

    constexpr bool operator==(const Dim&) const = default;
    constexpr Dim operator+(Dim o) const { return {m + o.m, l + o.l, t + o.t, i + o.i, k + o.k}; }
    constexpr Dim operator-(Dim o) const { return {m - o.m, l - o.l, t - o.t, i - o.i, k - o.k}; }
    constexpr bool even() const { return m % 2 == 0 && l % 2 == 0 && t % 2 == 0 && i % 2 == 0 && k % 2 == 0; }
    constexpr Dim half() const { return {m / 2, l / 2, t / 2, i / 2, k / 2}; }
};

namespace dims {
inline constexpr Dim none{};
inline constexpr Dim mass{1, 0, 0, 0, 0};
inline constexpr Dim length{0, 1, 0, 0, 0};
inline constexpr Dim time{0, 0, 1, 0, 0};
inline constexpr Dim current{0, 0, 0, 1, 0};
inline constexpr Dim temperature{0, 0, 0, 0, 1};
inline constexpr Dim area = length + length;
inline constexpr Dim rate = none - time;
inline constexpr Dim energy = mass + area - time - time;
inline constexpr Dim action = energy + time;
inline constexpr Dim charge = current + time;
inline constexpr Dim permittivity = charge + charge - energy - length;
inline constexpr Dim heat_capacity = energy - temperature;
} // namespace dims

/// SI value tagged with its dimension; mixing dimensions fails to compile.
template <Dim D>
class Quantity {
public:
    static constexpr Dim dim = D;

    constexpr Quantity() = default;
    constexpr explicit Quantity(double si) : si_(si) {}

    constexpr double si() const { return si_; }

    constexpr Quantity operator+(Quantity o) const { return Quantity(si_ + o.si_); }
    constexpr Quantity operator-(Quantity o) const { return Quantity(si_ - o.si_); }
    constexpr Quantity operator*(double s) const { return Quantity(si_ * s); }
    constexpr Quantity operator/(double s) const { return Quantity(si_ / s); }
    friend constexpr Quantity operator*(double s, Quantity q) { return q * s; }
    constexpr auto operator<=>(const Quantity&) const = default;

    template <Dim E>
    constexpr Quantity<D + E> operator*(Quantity<E> o) const
    {
        return Quantity<D + E>(si_ * o.si());
    }
    template <Dim E>
    constexpr Quantity<D - E> operator/(Quantity<E> o) const
    {
        return Quantity<D - E>(si_ / o.si());
    }

private:
    double si_ = 0.0;
};

template <Dim D>
    requires(D.even())
Quantity<D.half()> sqrt(Quantity<D> q)
{
    return Quantity<D.half()>(std::sqrt(q.si()));
}

template <Dim D>
constexpr Quantity<dims::none - D> inverse(Quantity<D> q)
{
    return Quantity<dims::none>(1.0) / q;
}

using Dimensionless = Quantity<dims::none>;
using Mass = Quantity<dims::mass>;
using Length = Quantity<dims::length>;
using Area = Quantity<dims::area>;
using Temperature = Quantity<dims::temperature>;
using Rate = Quantity<dims::rate>;
using Energy = Quantity<dims::energy>;
using Action = Quantity<dims::action>;
using Charge = Quantity<dims::charge>;
using Permittivity = Quantity<dims::permittivity>;
using HeatCapacity = Quantity<dims::heat_capacity>;

/// CODATA 2018.
namespace constants {
inline constexpr Action hbar{1.054571817e-34};
inline constexpr HeatCapacity k_b{1.380649e-23};
inline constexpr Charge e{1.602176634e-19};
inline constexpr Permittivity epsilon_0{8.8541878128e-12};
inline constexpr Mass m_e{9.1093837015e-31};
} // namespace constants

struct PhysicalInputs {
    Area area;                 // trap quantization area
    Temperature temperature;
    Length bohr_radius;        // exciton
    Permittivity permittivity; // taken as given: eps_0 or eps_r * eps_0
    Mass exciton_mass;
    double hopfield_x = 0.0;   // |X|
    Rate cavity_leak;

    void validate() const
    {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                fail(ErrorCode::config, std::string(name) + " must be positive");
        };
        positive(area.si(), "A_area");
        positive(temperature.si(), "T");
        positive(bohr_radius.si(), "a_B");
        positive(permittivity.si(), "epsilon");
        positive(exciton_mass.si(), "m_exc");
        positive(hopfield_x, "X_hopfield");
        positive(cavity_leak.si(), "gamma0");
        if (hopfield_x > 1.0)
            fail(ErrorCode::config, "X_hopfield must not exceed 1");
    }
};

/// Order-of-magnitude scales. Index 1 and 2 follow the gain/diffusion labels:
/// scale_1 sets Delta1, Gamma1 and scale_2 sets Delta2, Gamma2.
struct RateEstimates {
    Energy v0;         // pair interaction energy
    Length a_thermal;
    Energy e0;         // = k_B T
    Rate scale_1;
    Rate scale_2;
    Energy u_est;

    Rate kerr_rate() const { return u_est / constants::hbar; }
    /// scale_1 / scale_2; equals 2 pi^2 a^2 / A.
    double small_ratio() const { return (scale_1 / scale_2).si(); }
};

inline RateEstimates estimate(const PhysicalInputs& in)
{
    using namespace constants;
    using std::numbers::pi;
    in.validate();

    RateEstimates out;
    out.e0 = k_b * in.temperature;
    out.a_thermal = hbar / sqrt(2.0 * in.exciton_mass * out.e0);
    out.v0 = 6.0 * e * e * in.bohr_radius / (4.0 * pi * in.permittivity * in.area);

    const auto a2 = out.a_thermal * out.a_thermal;
    const auto common = out.v0 * out.v0 / (hbar * out.e0);
    out.scale_1 = common * in.area / (4.0 * pi * a2);
    out.scale_2 = common * in.area * in.area / (8.0 * pi * pi * pi * a2 * a2);

    const double x4 = std::pow(in.hopfield_x, 4);
    out.u_est = 30.0 * e * e * in.bohr_radius * x4 / (pi * pi * pi * in.permittivity * in.area);
    return out;
}

/// Loss/gain rates in the gain/diffusion labelling; any consistent unit.
struct PolaritonRates {
    double delta1 = 0.0, gamma1 = 0.0;
    double delta2 = 0.0, gamma2 = 0.0;
    double gamma0 = 0.0;
    double kerr = 0.0;
    double lock = 0.0;

    double g1() const { return delta1 - gamma1; }
    double g2() const { return delta2 - gamma2 - gamma0; }
    double d1() const { return delta1 + gamma1; }
    double d2() const { return delta2 + gamma2 + gamma0; }

    bool near_threshold() const { return std::abs(g2()) <= 0.01 * d2(); }
    int g2_sign() const { return (g2() > 0.0) - (g2() < 0.0); }

    /// Same rates measured in units of D1.
    PolaritonRates in_d1_units() const
    {
        const double s = 1.0 / d1();
        return {delta1 * s, gamma1 * s, delta2 * s, gamma2 * s, gamma0 * s, kerr * s, lock * s};
    }

    PolaritonFp fp() const { return {.g1 = g1(), .g2 = g2(), .d1 = d1(), .d2 = d2(), .kerr = kerr, .lock = lock}; }

    /// Master-equation rates. Index 2 here drives the linear terms and
    /// index 1 the pair terms; the lock amplitude doubles.
    PolaritonParams master() const
    {
        return {.one_body_loss = gamma2,
                .two_body_loss = gamma1,
                .one_body_gain = delta2,
                .two_body_gain = delta1,
                .cavity_leak = gamma0,
                .kerr = kerr,
                .lock = 2.0 * lock};
    }
};

/// Delta/Gamma ratios per index.
struct RateSplits {
    double ratio_1 = 1.0;
    double ratio_2 = 1.0;
};

/// Delta = s sqrt(ratio), Gamma = s / sqrt(ratio). Rates in 1/s.
inline PolaritonRates to_model(const RateEstimates& est, const RateSplits& splits, Rate gamma0)
{
    if (!(splits.ratio_1 > 0.0) || !(splits.ratio_2 > 0.0))
        fail(ErrorCode::config, "Delta/Gamma ratios must be positive");
    const double q1 = std::sqrt(splits.ratio_1), q2 = std::sqrt(splits.ratio_2);
    const double s1 = est.scale_1.si(), s2 = est.scale_2.si();
    return {.delta1 = s1 * q1,
            .gamma1 = s1 / q1,
            .delta2 = s2 * q2,
            .gamma2 = s2 / q2,
            .gamma0 = gamma0.si(),
            .kerr = est.kerr_rate().si(),
            .lock = 0.0};
}

/// Delta2/Gamma2 ratio that puts the mode exactly at threshold (G2 = 0).
inline double threshold_ratio_2(const RateEstimates& est, Rate gamma0)
{
    const double s = est.scale_2.si(), g = gamma0.si();
    const double q = (g + std::sqrt(g * g + 4.0 * s * s)) / (2.0 * s);
    return q * q;
}

/// Rates in units of D1 from normalized gain/diffusion targets.
struct Regime {
    double d2_over_d1 = 100.0;
    double g1_over_d1 = -1.0;
    double g2_over_d1 = 0.0;
    double gamma0_over_d1 = 0.0;
    double kerr_over_d1 = 0.0;
    double lock_over_d1 = 0.0;
};

inline PolaritonRates build_regime(const Regime& r)
{
    if (std::abs(r.g1_over_d1) > 1.0)
        fail(ErrorCode::config, "|G1| cannot exceed D1");
    if (std::abs(r.g2_over_d1) > r.d2_over_d1)
        fail(ErrorCode::config, "|G2| cannot exceed D2");
    PolaritonRates out;
    out.delta1 = 0.5 * (1.0 + r.g1_over_d1);
    out.gamma1 = 0.5 * (1.0 - r.g1_over_d1);
    out.delta2 = 0.5 * (r.d2_over_d1 + r.g2_over_d1);
    out.gamma2 = 0.5 * (r.d2_over_d1 - r.g2_over_d1) - r.gamma0_over_d1;
    out.gamma0 = r.gamma0_over_d1;
    if (out.gamma2 < 0.0)
        fail(ErrorCode::config, "gamma0 exceeds the available loss budget");
    out.kerr = r.kerr_over_d1;
    out.lock = r.lock_over_d1;
    return out;
}

/// Inverse of the gain/diffusion definitions; gamma0 is carved out of Gamma2.
inline PolaritonRates rates_from_fp(const PolaritonFp& p, double gamma0 = 0.0)
{
    PolaritonRates out;
    out.delta1 = 0.5 * (p.d1 + p.g1);
    out.gamma1 = 0.5 * (p.d1 - p.g1);
    out.delta2 = 0.5 * (p.d2 + p.g2);
    out.gamma2 = 0.5 * (p.d2 - p.g2) - gamma0;
    out.gamma0 = gamma0;
    out.kerr = p.kerr;
    out.lock = p.lock;
    if (std::min({out.delta1, out.gamma1, out.delta2, out.gamma2, gamma0}) < 0.0)
        fail(ErrorCode::config, "polariton rates: need |G1| <= D1, |G2| <= D2 and gamma0 <= (D2 - G2)/2");
    return out;
}

} // namespace nglight
