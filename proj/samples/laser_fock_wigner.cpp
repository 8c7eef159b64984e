// Steady state of a Kerr laser in a truncated Fock space, with and without a weak lock.

#include <cstdio>

#include "nglight/evolve.hpp"
#include "nglight/wigner.hpp"

using namespace nglight;

int main()
{
    for (double lock : {0.0, 0.5}) {
        const auto spec = LiouvillianSpec::laser({.gain = 3.0, .saturation = 1.0, .cavity_loss = 1.0, .kerr = 0.1, .lock = lock});
        const FockSpace space(default_truncation(spec));
        const SteadyResult ss = steady_state_direct(spec, space);
        if (ss.issue) {
            std::printf("K = %.1f: %s\n", lock, to_string(*ss.issue));
            continue;
        }
        const WignerGrid w = wigner_grid(ss.rho_ss, default_cartesian_layout(ss.observables.mean_n));
        std::printf("K = %.1f: n_cut %d, <n> = %.4f, purity %.4f, |<a>| ~ |P1| = %.4f, N = %.3e\n", lock, space.n_cut(),
                    ss.observables.mean_n, ss.observables.purity, std::abs(ss.observables.phase_sums[1]), negativity(w));
    }
}
