#pragma once

// Truncated Fock-space operators and the two master-equation generators:
// the Scully-Lamb laser with a built-in Kerr term, and the polariton
// condensate equation with one- and two-body gain/loss channels. Both may
// carry a resonant injection-locking drive.
//
// Dissipator convention: lindblad_dissipator(O, rho) = rho O+O + O+O rho - 2 O rho O+,
// i.e. the negative of the usual D[O]rho. Generators therefore subtract it
// with positive rates, e.g. -(gamma/2) L[a, rho] is ordinary cavity loss at
// rate gamma.

#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "errors.hpp"
#include "mean_field.hpp"

namespace nglight {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using CSparse = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I{0.0, 1.0};

/// Photon-number truncation |0>..|n_cut>.
class FockSpace {
public:
    explicit FockSpace(int n_cut) : n_cut_(n_cut)
    {
        if (n_cut < 1)
            fail(ErrorCode::guard, "FockSpace: n_cut must be >= 1, got " + std::to_string(n_cut));
    }

    int n_cut() const noexcept { return n_cut_; }
    int dim() const noexcept { return n_cut_ + 1; }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    int n_cut_;
};

class DensityMatrix {
public:
    DensityMatrix(FockSpace space, CMatrix entries) : space_(space), m_(std::move(entries))
    {
        if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
            fail(ErrorCode::guard, "DensityMatrix: shape does not match FockSpace");
    }

    static DensityMatrix fock_state(FockSpace space, int n)
    {
        if (n < 0 || n > space.n_cut())
            fail(ErrorCode::guard, "fock_state: level outside truncation");
        CMatrix m = CMatrix::Zero(space.dim(), space.dim());
        m(n, n) = 1.0;
        return {space, std::move(m)};
    }

    static DensityMatrix vacuum(FockSpace space) { return fock_state(space, 0); }

    /// Coherent state projected onto the truncation and renormalized.
    static DensityMatrix coherent(FockSpace space, cplx alpha)
    {
        CVector psi(space.dim());
        cplx c = std::exp(-0.5 * std::norm(alpha));
        for (int n = 0; n < space.dim(); ++n) {
            psi(n) = c;
            c *= alpha / std::sqrt(double(n + 1));
        }
        psi /= psi.norm();
        return {space, psi * psi.adjoint()};
    }

    /// Phase-averaged coherent state exp(-r^2) sum r^{2n}/n! |n><n|.
    static DensityMatrix phase_diffused(FockSpace space, double r)
    {
        CMatrix m = CMatrix::Zero(space.dim(), space.dim());
        double p = std::exp(-r * r);
        double total = 0.0;
        for (int n = 0; n < space.dim(); ++n) {
            m(n, n) = p;
            total += p;
            p *= r * r / double(n + 1);
        }
        m /= total;
        return {space, std::move(m)};
    }

    const FockSpace& space() const noexcept { return space_; }
    const CMatrix& matrix() const noexcept { return m_; }
    cplx operator()(int n, int m) const { return m_(n, m); }

    cplx trace() const { return m_.trace(); }

    double hermiticity_residual() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

    double purity() const { return (m_ * m_).trace().real(); }

    double min_eigenvalue() const
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Hermitian part, scaled to unit trace.
    DensityMatrix normalized() const
    {
        CMatrix h = 0.5 * (m_ + m_.adjoint());
        const double tr = h.trace().real();
        if (!std::isfinite(tr) || tr == 0.0)
            fail(ErrorCode::non_finite, "DensityMatrix: cannot normalize, trace is " + std::to_string(tr));
        return {space_, h / tr};
    }

    double off_diagonal_norm() const
    {
        double s = 0.0;
        for (int j = 0; j < m_.cols(); ++j)
            for (int i = 0; i < m_.rows(); ++i)
                if (i != j)
                    s += std::abs(m_(i, j));
        return s;
    }

    /// Populations of the top `levels` Fock states.
    double edge_population(int levels = 2) const
    {
        double s = 0.0;
        for (int k = 0; k < levels && k < space_.dim(); ++k)
            s += std::abs(m_(space_.n_cut() - k, space_.n_cut() - k));
        return s;
    }

private:
    FockSpace space_;
    CMatrix m_;
};

// ---------------------------------------------------------------------------
// Generator parameters

/// Scully-Lamb laser with Kerr term and injection lock (rates share one unit,
/// hbar = 1). `saturation` is the self-saturation coefficient, not the
/// injected amplitude; `lock` already folds in the injected amplitude.
struct LaserParams {
    double gain = 0.0;
    double saturation = 0.0;
    double cavity_loss = 0.0;
    double kerr = 0.0;
    double lock = 0.0;
};

/// Polariton condensate: one/two-body scattering loss and gain, cavity leak.
struct PolaritonParams {
    double one_body_loss = 0.0;
    double two_body_loss = 0.0;
    double one_body_gain = 0.0;
    double two_body_gain = 0.0;
    double cavity_leak = 0.0;
    double kerr = 0.0;
    double lock = 0.0;
};

class LiouvillianSpec {
public:
    static LiouvillianSpec laser(const LaserParams& p) { return LiouvillianSpec(p); }
    static LiouvillianSpec polariton(const PolaritonParams& p) { return LiouvillianSpec(p); }

    bool is_laser() const noexcept { return std::holds_alternative<LaserParams>(params_); }
    const LaserParams& laser_params() const { return std::get<LaserParams>(params_); }
    const PolaritonParams& polariton_params() const { return std::get<PolaritonParams>(params_); }

    double kerr() const
    {
        return std::visit([](const auto& p) { return p.kerr; }, params_);
    }
    double lock() const
    {
        return std::visit([](const auto& p) { return p.lock; }, params_);
    }

    LiouvillianSpec with_kerr(double u) const
    {
        LiouvillianSpec s = *this;
        std::visit([u](auto& p) { p.kerr = u; }, s.params_);
        s.validate();
        return s;
    }
    LiouvillianSpec with_lock(double k) const
    {
        LiouvillianSpec s = *this;
        std::visit([k](auto& p) { p.lock = k; }, s.params_);
        s.validate();
        return s;
    }

    /// Mean-field amplitude drift implied by the generator.
    AmplitudeDrift amplitude_drift() const
    {
        if (is_laser()) {
            const auto& p = laser_params();
            return {0.5 * (p.gain - p.cavity_loss), -0.5 * p.saturation, p.kerr, p.lock};
        }
        const auto& p = polariton_params();
        return {p.one_body_gain - p.one_body_loss - p.cavity_leak,
                2.0 * (p.two_body_gain - p.two_body_loss), p.kerr, p.lock};
    }

    /// Largest rate entering the generator at photon number `nbar`.
    double max_rate(double nbar) const
    {
        const double n = std::max(1.0, nbar);
        if (is_laser()) {
            const auto& p = laser_params();
            return std::max({p.gain * n, p.cavity_loss * n, p.saturation * n * n, p.lock * std::sqrt(n),
                             p.kerr * n, 1e-12});
        }
        const auto& p = polariton_params();
        return std::max({2.0 * (p.one_body_gain + p.one_body_loss + p.cavity_leak) * n,
                         2.0 * (p.two_body_gain + p.two_body_loss) * n * n, p.lock * std::sqrt(n),
                         p.kerr * n, 1e-12});
    }

    bool is_dissipative() const
    {
        if (is_laser()) {
            const auto& p = laser_params();
            return p.cavity_loss > 0.0 || p.saturation > 0.0;
        }
        const auto& p = polariton_params();
        return p.one_body_loss + p.cavity_leak + p.two_body_loss > 0.0;
    }

private:
    explicit LiouvillianSpec(LaserParams p) : params_(p) { validate(); }
    explicit LiouvillianSpec(PolaritonParams p) : params_(p) { validate(); }

    void validate() const
    {
        auto check = [](double v, const char* name) {
            if (!(v >= 0.0) || !std::isfinite(v))
                fail(ErrorCode::guard, std::string("LiouvillianSpec: ") + name + " must be finite and >= 0");
        };
        if (is_laser()) {
            const auto& p = laser_params();
            check(p.gain, "gain");
            check(p.saturation, "saturation");
            check(p.cavity_loss, "cavity_loss");
            check(p.kerr, "kerr");
            check(p.lock, "lock");
        } else {
            const auto& p = polariton_params();
            check(p.one_body_loss, "one_body_loss");
            check(p.two_body_loss, "two_body_loss");
            check(p.one_body_gain, "one_body_gain");
            check(p.two_body_gain, "two_body_gain");
            check(p.cavity_leak, "cavity_leak");
            check(p.kerr, "kerr");
            check(p.lock, "lock");
        }
    }

    std::variant<LaserParams, PolaritonParams> params_;
};

/// ceil(nbar + 6 sqrt(nbar) + 10) with nbar the mean-field population.
inline int default_truncation(const LiouvillianSpec& spec)
{
    const double nbar = mean_field_population(spec.amplitude_drift());
    if (!std::isfinite(nbar))
        fail(ErrorCode::guard, "default_truncation: no saturating mechanism, population unbounded");
    return static_cast<int>(std::ceil(nbar + 6.0 * std::sqrt(nbar) + 10.0));
}

// ---------------------------------------------------------------------------
// Operators

inline CMatrix annihilation(const FockSpace& space)
{
    CMatrix a = CMatrix::Zero(space.dim(), space.dim());
    for (int n = 1; n < space.dim(); ++n)
        a(n - 1, n) = std::sqrt(double(n));
    return a;
}

inline CMatrix creation(const FockSpace& space) { return annihilation(space).adjoint(); }

inline CMatrix number_operator(const FockSpace& space)
{
    CMatrix n = CMatrix::Zero(space.dim(), space.dim());
    for (int k = 0; k < space.dim(); ++k)
        n(k, k) = double(k);
    return n;
}

/// (U/2) a+ a+ a a, diagonal with (U/2) n (n-1).
inline CMatrix kerr_hamiltonian(const FockSpace& space, double kerr)
{
    CMatrix h = CMatrix::Zero(space.dim(), space.dim());
    for (int n = 0; n < space.dim(); ++n)
        h(n, n) = 0.5 * kerr * n * (n - 1.0);
    return h;
}

/// Resonant lock with real injected amplitude: i K (a+ - a).
inline CMatrix lock_hamiltonian(const FockSpace& space, double lock)
{
    const CMatrix a = annihilation(space);
    return I * lock * (CMatrix(a.adjoint()) - a);
}

inline CMatrix lindblad_dissipator(const CMatrix& op, const CMatrix& rho)
{
    if (op.rows() != op.cols() || op.rows() != rho.rows() || rho.rows() != rho.cols())
        fail(ErrorCode::guard, "lindblad_dissipator: shape mismatch");
    const CMatrix odo = op.adjoint() * op;
    return rho * odo + odo * rho - 2.0 * op * rho * op.adjoint();
}

/// (B/8)[rho (a a+)^2 + 3 a a+ rho a a+ - 4 a+ rho a a+ a + H.c.]
inline CMatrix saturation_term(const FockSpace& space, double saturation, const CMatrix& rho)
{
    const CMatrix a = annihilation(space);
    const CMatrix ad = a.adjoint();
    const CMatrix aad = a * ad;
    const CMatrix s = rho * aad * aad + 3.0 * aad * rho * aad - 4.0 * ad * rho * a * ad * a;
    return (saturation / 8.0) * (s + s.adjoint());
}

/// d rho/dt evaluated directly on the matrix.
inline CMatrix apply_liouvillian(const LiouvillianSpec& spec, const CMatrix& rho)
{
    const FockSpace space(static_cast<int>(rho.rows()) - 1);
    const CMatrix a = annihilation(space);
    const CMatrix ad = a.adjoint();
    const CMatrix h = kerr_hamiltonian(space, spec.kerr()) + lock_hamiltonian(space, spec.lock());
    CMatrix out = -I * (h * rho - rho * h);

    if (spec.is_laser()) {
        const auto& p = spec.laser_params();
        out -= 0.5 * p.gain * lindblad_dissipator(ad, rho);
        out -= 0.5 * p.cavity_loss * lindblad_dissipator(a, rho);
        out += saturation_term(space, p.saturation, rho);
    } else {
        const auto& p = spec.polariton_params();
        out -= p.two_body_loss * lindblad_dissipator(a * a, rho);
        out -= p.two_body_gain * lindblad_dissipator(ad * ad, rho);
        out -= (p.one_body_loss + p.cavity_leak) * lindblad_dissipator(a, rho);
        out -= p.one_body_gain * lindblad_dissipator(ad, rho);
    }
    return out;
}

inline CMatrix apply_liouvillian(const LiouvillianSpec& spec, const DensityMatrix& rho)
{
    return apply_liouvillian(spec, rho.matrix());
}

namespace detail {

// Column-major vec: vec(X A Y) = (Y^T kron X) vec(A).
inline CSparse sandwich(const CSparse& left, const CSparse& right)
{
    CSparse rt = right.transpose();
    return Eigen::kroneckerProduct(rt, left).eval();
}

inline CSparse sparse_identity(int dim)
{
    CSparse id(dim, dim);
    id.setIdentity();
    return id;
}

inline CSparse dissipator_superop(const CSparse& op)
{
    const CSparse id = sparse_identity(static_cast<int>(op.rows()));
    const CSparse odo = CSparse(op.adjoint()) * op;
    const CSparse opd = op.adjoint();
    return sandwich(id, odo) + sandwich(odo, id) - 2.0 * sandwich(op, opd);
}

} // namespace detail

inline constexpr int default_dense_guard = 80;

/// Vectorized generator L with vec(d rho/dt) = L vec(rho), column-major vec.
inline CSparse liouvillian_matrix(const LiouvillianSpec& spec, const FockSpace& space,
                                  int max_n_cut = default_dense_guard)
{
    if (space.n_cut() > max_n_cut)
        fail(ErrorCode::guard, "liouvillian_matrix: n_cut " + std::to_string(space.n_cut()) +
                                   " exceeds guard " + std::to_string(max_n_cut));
    const int d = space.dim();
    const CSparse a = annihilation(space).sparseView();
    const CSparse ad = a.adjoint();
    const CSparse id = detail::sparse_identity(d);
    const CSparse h = CMatrix(kerr_hamiltonian(space, spec.kerr()) + lock_hamiltonian(space, spec.lock()))
                          .sparseView();

    CSparse l = -I * (detail::sandwich(h, id) - detail::sandwich(id, h));

    if (spec.is_laser()) {
        const auto& p = spec.laser_params();
        l -= 0.5 * p.gain * detail::dissipator_superop(ad);
        l -= 0.5 * p.cavity_loss * detail::dissipator_superop(a);
        if (p.saturation != 0.0) {
            const CSparse aad = a * ad;
            const CSparse aad2 = aad * aad;
            const CSparse adaad = ad * a * ad;
            // s = rho aad^2 + 3 aad rho aad - 4 ad rho (a ad a)
            // s+ = aad^2 rho + 3 aad rho aad - 4 (ad a ad) rho a
            const CSparse aada = a * ad * a;
            CSparse s = detail::sandwich(id, aad2) + 3.0 * detail::sandwich(aad, aad) -
                        4.0 * detail::sandwich(ad, aada);
            CSparse sd = detail::sandwich(aad2, id) + 3.0 * detail::sandwich(aad, aad) -
                         4.0 * detail::sandwich(adaad, a);
            l += (p.saturation / 8.0) * (s + sd);
        }
    } else {
        const auto& p = spec.polariton_params();
        const CSparse aa = a * a;
        const CSparse adad = ad * ad;
        l -= p.two_body_loss * detail::dissipator_superop(aa);
        l -= p.two_body_gain * detail::dissipator_superop(adad);
        l -= (p.one_body_loss + p.cavity_leak) * detail::dissipator_superop(a);
        l -= p.one_body_gain * detail::dissipator_superop(ad);
    }
    l.prune(cplx(0.0, 0.0));
    l.makeCompressed();
    return l;
}

inline CVector vectorize(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

inline CMatrix unvectorize(const CVector& v, int dim) { return Eigen::Map<const CMatrix>(v.data(), dim, dim); }

} // namespace nglight
