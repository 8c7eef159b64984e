// Locked polariton condensate on the phase-space route, rates in units of D1.

#include <cstdio>

#include "nglight/fokker_planck.hpp"

using namespace nglight;

int main()
{
    const auto model = FpModel::polariton({.g1 = -1.0, .g2 = 0.0, .d1 = 1.0, .d2 = 10.0, .kerr = 10.0, .lock = 1000.0});
    const auto est = default_fp_layout(model);
    std::printf("grid %s, locked amplitude %.4f\n", describe(est.layout).c_str(), est.r_lock);

    const FpSteadyResult r = fp_steady(model, FpField::gaussian(est.layout, est.r_lock, 0.5));
    if (r.issue) {
        std::printf("failed: %s\n", r.note.c_str());
        return 1;
    }
    std::printf("residual %.2e after %ld steps, mass %.12f, N = %.3e\n", r.residual, r.steps, r.field.mass(),
                fp_negativity(r.field));
}
