// Abel-averaged evolution on finite truncations, moments M(p,T) and the
// transport exponents beta^{+-}(p).
#pragma once

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/operators.hpp"

namespace qbd {

/// a(n;T) = (2/T) int_0^inf e^{-2t/T} |<delta_n, e^{-itH} psi0>|^2 dt, per
/// physical site (Dirac: both spinor components summed).
struct AbelProfile {
    double T = 0.0;
    std::vector<std::int64_t> sites;
    std::vector<double> a;

    double total() const {
        double s = 0.0;
        for (double v : a) s += v;
        return s;
    }
};

namespace detail {

/// Physical-site aggregation map: index -> position in the site list.
inline std::pair<std::vector<std::int64_t>, std::vector<std::size_t>> site_map(const SpectralData& s) {
    std::vector<std::int64_t> sites;
    std::vector<std::size_t> slot(s.dim());
    for (std::size_t i = 0; i < s.dim(); ++i) {
        const std::int64_t n = s.sites.empty() ? static_cast<std::int64_t>(i) + 1 : s.sites[i];
        if (sites.empty() || sites.back() != n) sites.push_back(n);
        slot[i] = sites.size() - 1;
    }
    return {sites, slot};
}

/// Fixed number of work blocks, so the summation order (and hence every
/// output bit) does not depend on the thread count.
inline constexpr std::size_t kAbelBlocks = 64;

}  // namespace detail

/// Amplitudes below this are dropped from the kernel sum; the total error
/// in sum_n |a(n)| is at most the sum of the dropped |c_j|.
inline constexpr double kAbelPrune = 1e-14;

/// Exact Abel average on the truncation. With K_jk = 1/(1 + (T(E_j-E_k)/2)^2)
///   a(i) = sum_{j,k} phi_j(i) c_j phi_k(i) c_k K_jk.
/// Since K_jk = Re[i g / (z_j - E_k)] with g = 2/T and z_j = E_j + i g, the
/// inner sum over k is -g Im x_j(i) for x_j = (z_j - H)^{-1} psi0, one
/// complex tridiagonal solve per eigenvalue. O(N^2) per T.
inline AbelProfile abel_profile(const SpectralData& s, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("abel_profile: T must be positive and finite");
    const std::size_t n = s.dim();
    if (n == 0) throw ValidationError("abel_profile: empty spectral data");
    const double g = 2.0 / T;
    const auto& d = s.band.diag;
    const auto& o = s.band.off;
    std::size_t support_end = 0;  // psi0 vanishes beyond this index
    for (std::size_t i = 0; i < n; ++i)
        if (s.psi0[i] != 0.0) support_end = i;

    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < n; ++j)
        if (std::abs(s.amplitudes[j]) >= kAbelPrune) active.push_back(j);

    const std::size_t blocks = std::min(detail::kAbelBlocks, std::max<std::size_t>(active.size(), 1));
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(n, 0.0));
    tbb::parallel_for(std::size_t{0}, blocks, [&](std::size_t b) {
        std::vector<double> cr(n), ci(n), dr(n), di(n);
        auto& acc = partial[b];
        const std::size_t lo = b * active.size() / blocks, hi = (b + 1) * active.size() / blocks;
        for (std::size_t t = lo; t < hi; ++t) {
            const std::size_t j = active[t];
            const double zr = s.eigenvalues[j];
            // Forward sweep of (z - H) x = psi0; off-diagonals of z - H are -o.
            double pr = zr - d[0], pi = g;
            for (std::size_t i = 0; i < n; ++i) {
                if (i > 0) {
                    // pivot m = (z - d_i) - o_{i-1}^2 / m_{i-1}, c'_{i-1} = -o_{i-1} / m_{i-1}
                    const double ob = o[i - 1];
                    pr = zr - d[i] + ob * cr[i - 1];
                    pi = g + ob * ci[i - 1];
                }
                const double inv = 1.0 / (pr * pr + pi * pi);
                const double mr = pr * inv, mi = -pi * inv;  // 1 / pivot
                if (i + 1 < n) {
                    cr[i] = -o[i] * mr;
                    ci[i] = -o[i] * mi;
                }
                double rr = i <= support_end ? s.psi0[i] : 0.0, ri = 0.0;
                if (i > 0) {
                    rr += o[i - 1] * dr[i - 1];
                    ri += o[i - 1] * di[i - 1];
                }
                dr[i] = rr * mr - ri * mi;
                di[i] = rr * mi + ri * mr;
            }
            // Back substitution, accumulating a(i) on the fly.
            const double* phi = s.column(j);
            const double w = -g * s.amplitudes[j];
            double xr = dr[n - 1], xi = di[n - 1];
            acc[n - 1] += w * phi[n - 1] * xi;
            for (std::size_t i = n - 1; i-- > 0;) {
                const double nr = dr[i] - (cr[i] * xr - ci[i] * xi);
                const double ni = di[i] - (cr[i] * xi + ci[i] * xr);
                xr = nr;
                xi = ni;
                acc[i] += w * phi[i] * xi;
            }
        }
    });

    auto [sites, slot] = detail::site_map(s);
    AbelProfile prof;
    prof.T = T;
    prof.sites = sites;
    prof.a.assign(sites.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) v += partial[b][i];
        prof.a[slot[i]] += v;
    }
    return prof;
}

/// Reference O(N^3) double sum; tests and small diagnostics only.
inline AbelProfile abel_profile_direct(const SpectralData& s, double T) {
    if (!(T > 0.0)) throw ValidationError("abel_profile_direct: T must be positive");
    const std::size_t n = s.dim();
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double uj = s.phi(j, i) * s.amplitudes[j];
            for (std::size_t k = 0; k < n; ++k) {
                const double x = 0.5 * T * (s.eigenvalues[j] - s.eigenvalues[k]);
                sum += uj * s.phi(k, i) * s.amplitudes[k] / (1.0 + x * x);
            }
        }
        a[i] = sum;
    }
    auto [sites, slot] = detail::site_map(s);
    AbelProfile prof;
    prof.T = T;
    prof.sites = sites;
    prof.a.assign(sites.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) prof.a[slot[i]] += a[i];
    return prof;
}

/// M(p,T) = sum_n (1 + n^2)^{p/2} a(n;T), n the physical site.
inline double moments(const AbelProfile& prof, double p) {
    if (!(p > 0.0)) throw ValidationError("moments: p must be > 0");
    double m = 0.0;
    for (std::size_t i = 0; i < prof.a.size(); ++i) {
        const double n = static_cast<double>(prof.sites[i]);
        m += std::pow(1.0 + n * n, 0.5 * p) * prof.a[i];
    }
    return m;
}

/// Abel mass within `margin` sites of the artificial truncation edge(s): the
/// right end for the half lattice, both ends for the whole lattice.
inline double leak(const AbelProfile& prof, const LatticeSpec& lattice, std::int64_t margin) {
    if (margin < 1) throw ValidationError("leak_check: margin must be >= 1");
    double m = 0.0;
    for (std::size_t i = 0; i < prof.a.size(); ++i) {
        const std::int64_t n = prof.sites[i];
        const bool right = n > lattice.last_site() - margin;
        const bool left = lattice.kind == LatticeKind::whole && n < lattice.first_site() + margin;
        if (right || left) m += std::abs(prof.a[i]);
    }
    return m;
}

struct LeakReport {
    double T = 0.0;
    std::int64_t margin = 0;
    double leak = 0.0;
    bool valid = true;  ///< leak <= threshold
};

inline constexpr double kLeakThreshold = 1e-6;

inline LeakReport leak_check(const SpectralData& s, double T, std::int64_t margin) {
    const double l = leak(abel_profile(s, T), s.lattice, margin);
    return {T, margin, l, l <= kLeakThreshold};
}

/// M(p, T) on a T grid, with the edge leak at each T.
struct MomentSeries {
    double p = 0.0;
    std::vector<double> T;
    std::vector<double> M;
    std::vector<double> leak;
};

/// Moments for several p on a common T grid; one profile per T.
inline std::vector<MomentSeries> moment_series(const SpectralData& s, const std::vector<double>& ps,
                                               const std::vector<double>& Ts, std::int64_t margin = 50) {
    if (Ts.empty()) throw ValidationError("moment_series: empty T grid");
    if (ps.empty()) throw ValidationError("moment_series: empty p list");
    std::vector<MomentSeries> out(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) out[k].p = ps[k];
    for (double T : Ts) {
        const auto prof = abel_profile(s, T);
        const double l = leak(prof, s.lattice, margin);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            out[k].T.push_back(T);
            out[k].M.push_back(moments(prof, ps[k]));
            out[k].leak.push_back(l);
        }
    }
    return out;
}

struct WindowSlope {
    double T_lo = 0.0;
    double T_hi = 0.0;
    double slope = 0.0;
};

struct ExponentFit {
    double p = 0.0;
    double beta_plus = 0.0;
    double beta_minus = 0.0;
    double T_min = 0.0;
    double T_max = 0.0;
    std::vector<WindowSlope> windows;
    bool clipped = false;
    bool boundary_contaminated = false;  ///< leak at the largest T above threshold
    double max_leak = 0.0;
};

inline constexpr double kBetaClipLo = -0.1;
inline constexpr double kBetaClipHi = 1.2;

/// Sliding-window least-squares slopes of log M against p log T over
/// sub-windows spanning 1/3 of the log-T range of [T_min, T_max].
inline ExponentFit exponent_fit(const MomentSeries& series, double T_min, double T_max) {
    std::vector<double> x, y, lk;
    for (std::size_t i = 0; i < series.T.size(); ++i) {
        const double T = series.T[i];
        if (T < T_min * (1 - 1e-12) || T > T_max * (1 + 1e-12)) continue;
        if (!(series.M[i] > 0.0)) throw NumericalError("exponent_fit: nonpositive moment at T = " + std::to_string(T));
        x.push_back(series.p * std::log(T));
        y.push_back(std::log(series.M[i]));
        lk.push_back(i < series.leak.size() ? series.leak[i] : 0.0);
    }
    if (x.size() < 8)
        throw ValidationError("exponent_fit: need >= 8 grid points in the window, got " + std::to_string(x.size()));
    ExponentFit fit;
    fit.p = series.p;
    fit.T_min = std::exp(x.front() / series.p);
    fit.T_max = std::exp(x.back() / series.p);
    const double span = (x.back() - x.front()) / 3.0;
    fit.beta_plus = -std::numeric_limits<double>::infinity();
    fit.beta_minus = std::numeric_limits<double>::infinity();
    const double tol = 1e-9 * std::max(1.0, std::abs(x.back()));
    for (std::size_t a = 0; a < x.size() && x[a] + span <= x.back() + tol; ++a) {
        std::size_t b = a;
        while (b + 1 < x.size() && x[b + 1] - x[a] <= span + tol) ++b;
        if (b - a + 1 < 2) continue;
        const double sl = ls_slope(x.data() + a, y.data() + a, b - a + 1);
        fit.windows.push_back({std::exp(x[a] / series.p), std::exp(x[b] / series.p), sl});
        fit.beta_plus = std::max(fit.beta_plus, sl);
        fit.beta_minus = std::min(fit.beta_minus, sl);
    }
    if (fit.windows.empty()) throw ValidationError("exponent_fit: no sub-window fits the grid");
    auto clip = [&](double v) {
        const double c = std::clamp(v, kBetaClipLo, kBetaClipHi);
        if (c != v) fit.clipped = true;
        return c;
    };
    fit.beta_plus = clip(fit.beta_plus);
    fit.beta_minus = clip(fit.beta_minus);
    for (double l : lk) fit.max_leak = std::max(fit.max_leak, l);
    fit.boundary_contaminated = lk.back() > kLeakThreshold;
    return fit;
}

inline ExponentFit exponent_fit(const MomentSeries& series) {
    if (series.T.empty()) throw ValidationError("exponent_fit: empty series");
    return exponent_fit(series, series.T.front(), series.T.back());
}

/// Plain least-squares slope of log M against log T (no p normalization).
inline double loglog_slope(const MomentSeries& series) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < series.T.size(); ++i) {
        x.push_back(std::log(series.T[i]));
        y.push_back(std::log(series.M[i]));
    }
    return ls_slope(x.data(), y.data(), x.size());
}

}  // namespace qbd
