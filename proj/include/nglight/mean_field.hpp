#pragma once

#include <algorithm>
#include <cmath>

namespace nglight {

/// Deterministic amplitude equation used only for sizing truncations and grids:
///   d alpha/dt = lock + (linear + cubic*|alpha|^2) alpha - i kerr (|alpha|^2 - 1) alpha
struct AmplitudeDrift {
    double linear = 0.0;
    double cubic = 0.0;
    double kerr = 0.0;
    double lock = 0.0;
};

namespace detail {

inline double free_running_population(const AmplitudeDrift& d)
{
    if (d.linear <= 0.0)
        return 0.0;
    if (d.cubic >= 0.0)
        return INFINITY;
    return -d.linear / d.cubic;
}

} // namespace detail

/// Largest stationary |alpha|^2 of the amplitude equation. Without a lock the
/// phase is free and only the radial balance matters.
inline double mean_field_population(const AmplitudeDrift& d)
{
    const double free = detail::free_running_population(d);
    if (d.lock == 0.0 || !std::isfinite(free))
        return free;

    auto excess = [&](double x) {
        const double radial = d.linear + d.cubic * x;
        const double angular = d.kerr * (x - 1.0);
        return x * (radial * radial + angular * angular) - d.lock * d.lock;
    };

    double hi = std::max(1.0, free);
    int guard = 0;
    while (excess(hi) < 0.0 && guard++ < 200)
        hi *= 2.0;
    if (excess(hi) < 0.0)
        return INFINITY;

    // Largest root: walk down from hi until the sign flips, then bisect.
    const int samples = 4000;
    double lo = 0.0;
    for (int k = samples - 1; k >= 0; --k) {
        const double x = hi * k / samples;
        if (excess(x) < 0.0) {
            lo = x;
            hi = hi * (k + 1) / samples;
            break;
        }
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    return std::max(free, 0.5 * (lo + hi));
}

} // namespace nglight
