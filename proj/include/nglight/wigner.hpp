#pragma once

// Wigner function of a truncated density matrix, sampled on Cartesian or
// polar grids, and the negativity functional N = sum over nodes of w * min(W, 0).
//
// Convention: alpha = x + i y, W normalized to  integral d^2alpha W = 1, so the
// vacuum peaks at 2/pi.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "fock.hpp"

namespace nglight {

/// Trapezoid-weighted node lattice over [x_min, x_max] x [y_min, y_max].
struct CartesianLayout {
    double x_min = -4.0, x_max = 4.0;
    int nx = 128;
    double y_min = -4.0, y_max = 4.0;
    int ny = 128;

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double dy() const { return (y_max - y_min) / (ny - 1); }
    double x(int i) const { return x_min + i * dx(); }
    double y(int j) const { return y_min + j * dy(); }
    friend bool operator==(const CartesianLayout&, const CartesianLayout&) = default;
};

/// Staggered annulus r_j = r_min + (j + 1/2) dr, periodic theta_i = i dtheta.
struct PolarLayout {
    double r_max = 6.0;
    int nr = 128;
    int ntheta = 128;
    double r_min = 0.0;

    double dr() const { return (r_max - r_min) / nr; }
    double dtheta() const { return 2.0 * std::numbers::pi / ntheta; }
    double r(int j) const { return r_min + (j + 0.5) * dr(); }
    double theta(int i) const { return i * dtheta(); }
    friend bool operator==(const PolarLayout&, const PolarLayout&) = default;
};

using Layout = std::variant<CartesianLayout, PolarLayout>;

inline void validate_layout(const Layout& layout)
{
    if (const auto* c = std::get_if<CartesianLayout>(&layout)) {
        if (c->nx < 2 || c->ny < 2 || !(c->x_max > c->x_min) || !(c->y_max > c->y_min))
            fail(ErrorCode::guard, "CartesianLayout: need nx, ny >= 2 and a non-empty window");
    } else {
        const auto& p = std::get<PolarLayout>(layout);
        if (p.nr < 1 || p.ntheta < 4 || !(p.r_min >= 0.0) || !(p.r_max > p.r_min))
            fail(ErrorCode::guard, "PolarLayout: need nr >= 1, ntheta >= 4 and 0 <= r_min < r_max");
    }
}

/// Sampled real field with quadrature weights. Storage is row-major:
/// Cartesian rows are y, columns x; polar rows are r, columns theta.
class WignerGrid {
public:
    explicit WignerGrid(Layout layout) : layout_(std::move(layout))
    {
        validate_layout(layout_);
        std::visit([this](const auto& l) { init(l); }, layout_);
    }

    WignerGrid(Layout layout, std::vector<double> values) : WignerGrid(std::move(layout))
    {
        if (values.size() != values_.size())
            fail(ErrorCode::guard, "WignerGrid: payload size does not match layout");
        values_ = std::move(values);
    }

    const Layout& layout() const noexcept { return layout_; }
    bool is_polar() const noexcept { return std::holds_alternative<PolarLayout>(layout_); }
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(int row, int col) { return values_[idx(row, col)]; }
    double operator()(int row, int col) const { return values_[idx(row, col)]; }
    double weight(int row, int col) const { return weights_[idx(row, col)]; }

    /// Phase-space point of a node.
    cplx alpha(int row, int col) const
    {
        if (const auto* c = std::get_if<CartesianLayout>(&layout_))
            return {c->x(col), c->y(row)};
        const auto& p = std::get<PolarLayout>(layout_);
        return std::polar(p.r(row), p.theta(col));
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    double mass() const
    {
        double s = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k)
            s += weights_[k] * values_[k];
        return s;
    }

    /// Nodes whose |alpha|^2 exceeded the truncation trust region when sampled.
    int outside_trust = 0;

private:
    std::size_t idx(int row, int col) const { return static_cast<std::size_t>(row) * cols_ + col; }

    void init(const CartesianLayout& c)
    {
        rows_ = c.ny;
        cols_ = c.nx;
        values_.assign(size_t(rows_) * cols_, 0.0);
        weights_.resize(values_.size());
        for (int j = 0; j < rows_; ++j)
            for (int i = 0; i < cols_; ++i) {
                const double wx = (i == 0 || i == cols_ - 1) ? 0.5 : 1.0;
                const double wy = (j == 0 || j == rows_ - 1) ? 0.5 : 1.0;
                weights_[idx(j, i)] = wx * wy * c.dx() * c.dy();
            }
    }

    void init(const PolarLayout& p)
    {
        rows_ = p.nr;
        cols_ = p.ntheta;
        values_.assign(size_t(rows_) * cols_, 0.0);
        weights_.resize(values_.size());
        for (int j = 0; j < rows_; ++j)
            for (int i = 0; i < cols_; ++i)
                weights_[idx(j, i)] = p.r(j) * p.dr() * p.dtheta();
    }

    Layout layout_;
    int rows_ = 0, cols_ = 0;
    std::vector<double> values_;
    std::vector<double> weights_;
};

inline bool in_trust_region(const FockSpace& space, cplx alpha)
{
    return std::norm(alpha) <= 0.5 * space.n_cut();
}

namespace detail {

/// Wigner value from the Laguerre-polynomial matrix elements, built by the
/// stable three-term recurrence (no factorials).
inline double wigner_laguerre(const CMatrix& rho, cplx alpha)
{
    const int d = static_cast<int>(rho.rows());
    const cplx a2 = 2.0 * alpha;
    std::vector<cplx> w(d);
    w[0] = std::exp(-2.0 * std::norm(alpha));
    double total = rho(0, 0).real() * w[0].real();
    for (int n = 1; n < d; ++n) {
        w[n] = a2 * w[n - 1] / std::sqrt(double(n));
        total += 2.0 * (rho(0, n) * w[n]).real();
    }
    for (int m = 1; m < d; ++m) {
        cplx temp = w[m];
        const double sm = std::sqrt(double(m));
        w[m] = (std::conj(a2) * temp - sm * w[m - 1]) / sm;
        total += (rho(m, m) * w[m]).real();
        for (int n = m + 1; n < d; ++n) {
            const cplx next = (a2 * w[n - 1] - sm * temp) / std::sqrt(double(n));
            temp = w[n];
            w[n] = next;
            total += 2.0 * (rho(m, n) * w[n]).real();
        }
    }
    return 2.0 / std::numbers::pi * total;
}

inline void require_hermitian(const DensityMatrix& rho)
{
    if (rho.hermiticity_residual() > 1e-10)
        fail(ErrorCode::unphysical, "wigner: density matrix is not Hermitian (residual " +
                                        std::to_string(rho.hermiticity_residual()) + ")");
}

} // namespace detail

/// W(alpha) for a Hermitian rho. Outside the trust region |alpha|^2 <= n_cut/2 the
/// value is still computed; callers check in_trust_region.
inline double wigner_point(const DensityMatrix& rho, cplx alpha)
{
    detail::require_hermitian(rho);
    // Terms with (m, n) are paired with (n, m); only the upper triangle is read.
    return detail::wigner_laguerre(rho.matrix(), alpha);
}

/// Samples W on every node. Rows are split across `workers` threads.
inline WignerGrid wigner_grid(const DensityMatrix& rho, const Layout& layout, int workers = 1)
{
    detail::require_hermitian(rho);
    WignerGrid grid(layout);
    const CMatrix m = rho.matrix();
    auto fill = [&](int row_begin, int row_end) {
        for (int j = row_begin; j < row_end; ++j)
            for (int i = 0; i < grid.cols(); ++i)
                grid(j, i) = detail::wigner_laguerre(m, grid.alpha(j, i));
    };
    workers = std::clamp(workers, 1, grid.rows());
    if (workers == 1) {
        fill(0, grid.rows());
    } else {
        std::vector<std::jthread> pool;
        const int chunk = (grid.rows() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(fill, w * chunk, std::min(grid.rows(), (w + 1) * chunk));
    }
    for (int j = 0; j < grid.rows(); ++j)
        for (int i = 0; i < grid.cols(); ++i)
            if (!in_trust_region(rho.space(), grid.alpha(j, i)))
                ++grid.outside_trust;
    return grid;
}

/// Integral of the negative part of W: sum of w * min(W, 0). Always <= 0.
inline double negativity(const WignerGrid& grid)
{
    double n = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        n += grid.weights()[k] * std::min(grid.values()[k], 0.0);
    return n;
}

inline std::string describe(const Layout& layout)
{
    char buf[160];
    if (const auto* c = std::get_if<CartesianLayout>(&layout))
        std::snprintf(buf, sizeof buf, "cartesian %dx%d [%g,%g]x[%g,%g]", c->nx, c->ny, c->x_min, c->x_max,
                      c->y_min, c->y_max);
    else {
        const auto& p = std::get<PolarLayout>(layout);
        std::snprintf(buf, sizeof buf, "polar %dx%d r in [%g,%g]", p.nr, p.ntheta, p.r_min, p.r_max);
    }
    return buf;
}

/// N together with the grid it was measured on.
struct NegativityReport {
    double value = 0.0;
    double mass = 0.0;
    Layout layout;
    int outside_trust = 0;
};

inline NegativityReport negativity_report(const WignerGrid& grid)
{
    return {negativity(grid), grid.mass(), grid.layout(), grid.outside_trust};
}

/// Window [-(sqrt(nbar)+4), sqrt(nbar)+4]^2 at 256^2.
inline CartesianLayout default_cartesian_layout(double mean_n, int n = 256)
{
    const double h = std::sqrt(std::max(mean_n, 0.0)) + 4.0;
    return {-h, h, n, -h, h, n};
}

// ---- persistence ---------------------------------------------------------

inline constexpr char grid_magic[4] = {'N', 'G', 'W', 'G'};
inline constexpr std::uint32_t grid_format_version = 1;

/// Binary dump: magic, u32 version, u32 layout (0 cartesian, 1 polar), u64 rows,
/// u64 cols, f64 window[4], then rows*cols f64 values row-major. Host byte order.
inline void save_grid(const WignerGrid& grid, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::io, "cannot open " + path + " for writing");
    const std::uint32_t kind = grid.is_polar() ? 1u : 0u;
    const std::uint64_t rows = grid.rows(), cols = grid.cols();
    double window[4];
    if (const auto* c = std::get_if<CartesianLayout>(&grid.layout())) {
        window[0] = c->x_min, window[1] = c->x_max, window[2] = c->y_min, window[3] = c->y_max;
    } else {
        const auto& p = std::get<PolarLayout>(grid.layout());
        window[0] = p.r_min, window[1] = p.r_max, window[2] = 0.0, window[3] = 2.0 * std::numbers::pi;
    }
    out.write(grid_magic, 4);
    out.write(reinterpret_cast<const char*>(&grid_format_version), sizeof grid_format_version);
    out.write(reinterpret_cast<const char*>(&kind), sizeof kind);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(window), sizeof window);
    out.write(reinterpret_cast<const char*>(grid.values().data()),
              static_cast<std::streamsize>(grid.size() * sizeof(double)));
    if (!out)
        fail(ErrorCode::io, "write failed: " + path);
}

inline WignerGrid load_grid(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::io, "cannot open " + path);
    char magic[4];
    std::uint32_t version = 0, kind = 0;
    std::uint64_t rows = 0, cols = 0;
    double window[4];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&kind), sizeof kind);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    in.read(reinterpret_cast<char*>(window), sizeof window);
    if (!in || std::memcmp(magic, grid_magic, 4) != 0 || version != grid_format_version || kind > 1)
        fail(ErrorCode::io, path + ": not a grid dump (bad header)");
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
        fail(ErrorCode::io, path + ": implausible grid dimensions");
    Layout layout = kind == 0 ? Layout(CartesianLayout{window[0], window[1], int(cols), window[2], window[3], int(rows)})
                              : Layout(PolarLayout{window[1], int(rows), int(cols), window[0]});
    std::vector<double> values(rows * cols);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in)
        fail(ErrorCode::io, path + ": truncated payload");
    return {std::move(layout), std::move(values)};
}

/// CSV with header x,y,W (cartesian) or r,theta,W (polar).
inline void save_grid_csv(const WignerGrid& grid, const std::string& path)
{
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        fail(ErrorCode::io, "cannot open " + path + " for writing");
    std::fputs(grid.is_polar() ? "r,theta,W\n" : "x,y,W\n", f);
    for (int j = 0; j < grid.rows(); ++j)
        for (int i = 0; i < grid.cols(); ++i) {
            double u, v;
            if (const auto* p = std::get_if<PolarLayout>(&grid.layout()))
                u = p->r(j), v = p->theta(i);
            else
                u = grid.alpha(j, i).real(), v = grid.alpha(j, i).imag();
            std::fprintf(f, "%.17g,%.17g,%.17g\n", u, v, grid(j, i));
        }
    const bool ok = std::ferror(f) == 0;
    std::fclose(f);
    if (!ok)
        fail(ErrorCode::io, "write failed: " + path);
}

} // namespace nglight
