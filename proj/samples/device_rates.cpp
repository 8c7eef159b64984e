// Order-of-magnitude rates for a small trap, then the dimensionless model they imply.

#include <cstdio>
#include <numbers>

#include "nglight/polariton_params.hpp"

using namespace nglight;

int main()
{
    const double radius = 0.16e-6;
    const PhysicalInputs in{Area{std::numbers::pi * radius * radius}, Temperature{4.0}, Length{10e-9},
                            Permittivity{12.9 * constants::epsilon_0.si()}, Mass{0.6 * constants::m_e.si()},
                            std::sqrt(0.5), Rate{1e9}};
    in.validate();
    const RateEstimates e = estimate(in);
    std::printf("thermal length %.3e m, V0 %.3e J\n", e.a_thermal.si(), e.v0.si());
    std::printf("scale_1 %.3e /s, scale_2 %.3e /s, ratio %.3e, U %.3e /s\n", e.scale_1.si(), e.scale_2.si(),
                e.small_ratio(), e.kerr_rate().si());

    const RateSplits splits{.ratio_1 = 1.0, .ratio_2 = threshold_ratio_2(e, in.cavity_leak)};
    const PolaritonRates rates = to_model(e, splits, in.cavity_leak).in_d1_units();
    std::printf("D2/D1 %.2f, G1/D1 %.3f, G2/D1 %.2e, U/D1 %.3f\n", rates.d2(), rates.g1(), rates.g2(), rates.kerr);
}
