#pragma once

// Time integration of the master equation and steady-state extraction.

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/SparseLU>

#include "fock.hpp"

namespace nglight {

enum class Integrator { rk4, euler };

struct EvolveConfig {
    double dt = 1e-3;
    double t_max = 10.0;
    /// Threshold on the entrywise 1-norm of d rho/dt.
    double tol_steady = 1e-8;
    Integrator method = Integrator::rk4;
    int checkpoint_every = 100;
    /// Population allowed in the top two Fock levels.
    double leak_threshold = 1e-6;

    void validate() const
    {
        if (!(dt > 0.0) || !(t_max > 0.0) || !(tol_steady > 0.0) || checkpoint_every < 1)
            fail(ErrorCode::guard, "EvolveConfig: dt, t_max, tol_steady must be > 0 and checkpoint_every >= 1");
    }
};

/// Row-sum bound on the spectral radius of the vectorized generator.
inline double gershgorin_bound(const CSparse& l)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(l.rows());
    for (int k = 0; k < l.outerSize(); ++k)
        for (CSparse::InnerIterator it(l, k); it; ++it)
            rows(it.row()) += std::abs(it.value());
    return rows.maxCoeff();
}

/// Fixed RK4 step at half the Gershgorin stability scale.
inline EvolveConfig default_evolve_config(const LiouvillianSpec& spec, const FockSpace& space, double t_max)
{
    EvolveConfig cfg;
    cfg.dt = 0.5 / std::max(gershgorin_bound(liouvillian_matrix(spec, space)), 1e-12);
    cfg.t_max = t_max;
    cfg.checkpoint_every = std::max(1, static_cast<int>(std::ceil(0.1 / cfg.dt)));
    return cfg;
}

/// P_k = sum_n rho_{n, n+k}.
inline std::vector<cplx> phase_sums(const DensityMatrix& rho, int k_max = 4)
{
    std::vector<cplx> out(k_max + 1, cplx(0.0));
    const int d = rho.space().dim();
    for (int k = 0; k <= k_max; ++k)
        for (int n = 0; n + k < d; ++n)
            out[k] += rho(n, n + k);
    return out;
}

struct Observables {
    double mean_n = 0.0;
    double purity = 0.0;
    std::array<cplx, 5> phase_sums{};
};

inline Observables observe(const DensityMatrix& rho)
{
    Observables o;
    for (int n = 0; n < rho.space().dim(); ++n)
        o.mean_n += n * rho(n, n).real();
    o.purity = rho.purity();
    const auto p = phase_sums(rho, 4);
    std::copy(p.begin(), p.end(), o.phase_sums.begin());
    return o;
}

/// Half the trace norm of the difference.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b)
{
    const CMatrix diff = a.matrix() - b.matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct Checkpoint {
    double t = 0.0;
    DensityMatrix rho;
    /// trace - 1 accumulated since the previous checkpoint, before renormalizing
    double trace_drift = 0.0;
    /// entrywise 1-norm of d rho/dt at this state
    double residual = 0.0;
    long step = 0;
};

using CheckpointSink = std::function<bool(const Checkpoint&)>;

namespace detail {

inline double entry_l1(const CVector& v) { return v.cwiseAbs().sum(); }

inline void check_finite(const CVector& v, double t)
{
    if (!v.allFinite())
        fail(ErrorCode::non_finite, "evolve: state became non-finite at t = " + std::to_string(t) +
                                        " (time step too large or generator unstable)");
}

} // namespace detail

/// Integrates d rho/dt = L rho. Every checkpoint is Hermitized and scaled to
/// unit trace; the sink may return false to stop early. Returns the final checkpoint.
inline Checkpoint evolve(const LiouvillianSpec& spec, const DensityMatrix& rho0, const EvolveConfig& cfg,
                         const CheckpointSink& sink)
{
    cfg.validate();
    const FockSpace space = rho0.space();
    const int d = space.dim();
    const CSparse l = liouvillian_matrix(spec, space, std::max(default_dense_guard, space.n_cut()));

    CVector v = vectorize(rho0.matrix());
    const long n_steps = static_cast<long>(std::ceil(cfg.t_max / cfg.dt - 1e-9));

    auto make_checkpoint = [&](long step, double t) {
        const double tr = unvectorize(v, d).trace().real();
        DensityMatrix rho = DensityMatrix(space, unvectorize(v, d)).normalized();
        v = vectorize(rho.matrix());
        const double residual = detail::entry_l1(l * v);
        if (rho.edge_population(2) > cfg.leak_threshold)
            fail(ErrorCode::truncation_leak, "evolve: population " + std::to_string(rho.edge_population(2)) +
                                                 " in the top two Fock levels at t = " + std::to_string(t) +
                                                 "; raise n_cut");
        return Checkpoint{t, std::move(rho), tr - 1.0, residual, step};
    };

    Checkpoint last = make_checkpoint(0, 0.0);
    if (!sink(last))
        return last;

    CVector k1, k2, k3, k4;
    const double dt = cfg.dt;
    for (long step = 1; step <= n_steps; ++step) {
        if (cfg.method == Integrator::rk4) {
            k1 = l * v;
            k2 = l * (v + 0.5 * dt * k1);
            k3 = l * (v + 0.5 * dt * k2);
            k4 = l * (v + dt * k3);
            v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            v += dt * (l * v);
        }
        const double t = step * dt;
        detail::check_finite(v, t);
        if (step % cfg.checkpoint_every == 0 || step == n_steps) {
            last = make_checkpoint(step, t);
            if (!sink(last))
                return last;
        }
    }
    return last;
}

/// Convenience overload collecting every checkpoint.
inline std::vector<Checkpoint> evolve(const LiouvillianSpec& spec, const DensityMatrix& rho0, const EvolveConfig& cfg)
{
    std::vector<Checkpoint> out;
    evolve(spec, rho0, cfg, [&](const Checkpoint& c) {
        out.push_back(c);
        return true;
    });
    return out;
}

struct SteadyResult {
    DensityMatrix rho_ss;
    double residual = 0.0;
    bool converged = false;
    long iterations = 0;
    Observables observables;
    std::optional<ErrorCode> issue;
};

/// Marches until the residual drops below cfg.tol_steady or t_max is reached.
inline SteadyResult steady_state_march(const LiouvillianSpec& spec, const DensityMatrix& rho0, const EvolveConfig& cfg)
{
    if (!spec.is_dissipative())
        fail(ErrorCode::guard, "steady_state_march: no loss channel active");
    const Checkpoint last = evolve(spec, rho0, cfg, [&](const Checkpoint& c) { return c.residual > cfg.tol_steady; });
    SteadyResult r{last.rho, last.residual, last.residual <= cfg.tol_steady, last.step, observe(last.rho), {}};
    if (!r.converged)
        r.issue = ErrorCode::not_converged;
    return r;
}

namespace detail {

/// Indices of the vectorized state reachable from |0><0| under the flow of l.
inline std::vector<int> vacuum_sector(const CSparse& l)
{
    std::vector<char> seen(l.cols(), 0);
    std::vector<int> order{0}, stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int j = stack.back();
        stack.pop_back();
        for (CSparse::InnerIterator it(l, j); it; ++it)
            if (it.value() != cplx(0.0) && !seen[it.row()]) {
                seen[it.row()] = 1;
                order.push_back(static_cast<int>(it.row()));
                stack.push_back(static_cast<int>(it.row()));
            }
    }
    std::sort(order.begin(), order.end());
    return order;
}

/// Solves l x = 0 with the row at position `row` replaced by the functional `trace`.
inline CVector solve_with_trace_row(const CSparse& l, const std::vector<int>& trace, int row)
{
    CSparse a = l;
    for (int k = 0; k < a.outerSize(); ++k)
        for (CSparse::InnerIterator it(a, k); it; ++it)
            if (it.row() == row)
                it.valueRef() = 0.0;
    for (int idx : trace)
        a.coeffRef(row, idx) = 1.0;
    a.prune(cplx(0.0));
    a.makeCompressed();

    Eigen::SparseLU<CSparse> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
        return CVector();
    CVector rhs = CVector::Zero(a.rows());
    rhs(row) = 1.0;
    CVector x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        return CVector();
    return x;
}

} // namespace detail

/// Null vector of the vectorized generator with unit trace, restricted to the
/// sector reachable from vacuum. Two independent trace-row placements must
/// agree; disagreement or a failed factorization flags a degenerate null space.
/// Population above leak_threshold in the top two levels flags a truncation leak.
inline SteadyResult steady_state_direct(const LiouvillianSpec& spec, const FockSpace& space,
                                        int max_n_cut = default_dense_guard, double leak_threshold = 1e-6)
{
    const CSparse l = liouvillian_matrix(spec, space, max_n_cut);
    const int d = space.dim();

    auto finish = [&](const CVector& x, std::optional<ErrorCode> issue) {
        const DensityMatrix rho = DensityMatrix(space, unvectorize(x, d)).normalized();
        const CVector v = vectorize(rho.matrix());
        const double residual = (l * v).cwiseAbs().maxCoeff();
        if (!issue && rho.edge_population(2) > leak_threshold)
            issue = ErrorCode::truncation_leak;
        const bool ok = !issue && residual <= 1e-9;
        if (!issue && !ok)
            issue = ErrorCode::not_converged;
        return SteadyResult{rho, residual, ok, 1, observe(rho), issue};
    };
    const CVector vac = vectorize(DensityMatrix::vacuum(space).matrix());
    // Without loss every eigenprojector of H is stationary.
    if (!spec.is_dissipative())
        return finish(vac, ErrorCode::degenerate_null_space);

    const std::vector<int> sector = detail::vacuum_sector(l);
    const int m = static_cast<int>(sector.size());
    std::vector<int> local(l.cols(), -1);
    for (int k = 0; k < m; ++k)
        local[sector[k]] = k;
    std::vector<Eigen::Triplet<cplx>> trips;
    for (int k = 0; k < m; ++k)
        for (CSparse::InnerIterator it(l, sector[k]); it; ++it)
            trips.emplace_back(local[it.row()], k, it.value());
    CSparse sub(m, m);
    sub.setFromTriplets(trips.begin(), trips.end());
    std::vector<int> diag;
    for (int n = 0; n < d; ++n)
        if (local[n * (d + 1)] >= 0)
            diag.push_back(local[n * (d + 1)]);

    auto embed = [&](const CVector& x) {
        CVector full = CVector::Zero(l.cols());
        for (int k = 0; k < m; ++k)
            full(sector[k]) = x(k);
        return full;
    };

    const CVector first = detail::solve_with_trace_row(sub, diag, 0);
    if (first.size() == 0)
        return finish(vac, ErrorCode::degenerate_null_space);
    if (diag.size() < 2)
        return finish(embed(first), std::nullopt);
    // Second placement on the most populated diagonal entry other than |0><0|.
    int row = diag[1];
    double best = -1.0;
    for (std::size_t k = 1; k < diag.size(); ++k)
        if (std::abs(first(diag[k])) > best) {
            best = std::abs(first(diag[k]));
            row = diag[k];
        }
    const CVector second = detail::solve_with_trace_row(sub, diag, row);
    if (second.size() == 0)
        return finish(embed(first), ErrorCode::degenerate_null_space);

    const double scale = std::max(1.0, first.cwiseAbs().maxCoeff());
    if ((first - second).cwiseAbs().maxCoeff() > 1e-6 * scale)
        return finish(embed(first), ErrorCode::degenerate_null_space);
    return finish(embed(first), std::nullopt);
}

} // namespace nglight
