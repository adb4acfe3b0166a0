// Spectral-measure analytics on finite truncations: interval masses, the
// coarse-grained moments K(q, eps), the measure vs transfer-norm ratio, G(E) and
// eigenfunction decay fits.
#pragma once

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/evolve.hpp"
#include "qbd/operators.hpp"
#include "qbd/transfer.hpp"

namespace qbd {

/// Atoms (E_j, w_j), sorted by E, nonnegative weights summing to 1.
class AtomicMeasure {
  public:
    AtomicMeasure() = default;

    AtomicMeasure(std::vector<double> atoms, std::vector<double> weights)
        : atoms_(std::move(atoms)), weights_(std::move(weights)) {
        if (atoms_.empty()) throw ValidationError("AtomicMeasure: no atoms");
        if (atoms_.size() != weights_.size()) throw ValidationError("AtomicMeasure: atoms/weights size mismatch");
        if (!std::is_sorted(atoms_.begin(), atoms_.end())) throw ValidationError("AtomicMeasure: atoms not sorted");
        double total = 0.0;
        for (std::size_t j = 0; j < atoms_.size(); ++j) {
            if (!std::isfinite(atoms_[j])) throw ValidationError("AtomicMeasure: non-finite atom");
            if (!(weights_[j] >= 0.0)) throw ValidationError("AtomicMeasure: negative weight");
            total += weights_[j];
        }
        if (std::abs(total - 1.0) > 1e-10)
            throw ValidationError("AtomicMeasure: weights sum to " + std::to_string(total) + ", expected 1");
        build_tree();
    }

    static AtomicMeasure from(const SpectralData& s) { return AtomicMeasure(s.eigenvalues, s.weights); }

    std::size_t size() const noexcept { return atoms_.size(); }
    const std::vector<double>& atoms() const noexcept { return atoms_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double width() const { return atoms_.back() - atoms_.front(); }

    /// Mean level spacing: the scale below which the truncation cannot
    /// resolve continuous spectrum.
    double resolution_floor() const {
        return atoms_.size() > 1 ? width() / static_cast<double>(atoms_.size() - 1) : 0.0;
    }

    /// Sum of w_j for lo <= j < hi. Summation over a binary tree of
    /// nonnegative terms keeps the relative error at O(log n) ulps even
    /// for tiny masses next to large ones.
    double range_sum(std::size_t lo, std::size_t hi) const {
        double s = 0.0;
        for (lo += leaves_, hi += leaves_; lo < hi; lo >>= 1, hi >>= 1) {
            if (lo & 1) s += tree_[lo++];
            if (hi & 1) s += tree_[--hi];
        }
        return s;
    }

  private:
    void build_tree() {
        leaves_ = 1;
        while (leaves_ < atoms_.size()) leaves_ <<= 1;
        tree_.assign(2 * leaves_, 0.0);
        std::copy(weights_.begin(), weights_.end(), tree_.begin() + static_cast<std::ptrdiff_t>(leaves_));
        for (std::size_t i = leaves_ - 1; i > 0; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
    }

    std::vector<double> atoms_;
    std::vector<double> weights_;
    std::vector<double> tree_;
    std::size_t leaves_ = 0;
};

/// mu(x - eps, x + eps), open interval.
inline double interval_mass(const AtomicMeasure& mu, double x, double eps) {
    if (!(eps > 0.0)) throw ValidationError("interval_mass: eps must be > 0");
    const auto& e = mu.atoms();
    const auto lo = std::upper_bound(e.begin(), e.end(), x - eps) - e.begin();
    const auto hi = std::lower_bound(e.begin(), e.end(), x + eps) - e.begin();
    if (hi <= lo) return 0.0;
    return mu.range_sum(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
}

/// K(q, eps) = (1/eps) int mu(x - eps, x + eps)^q dx, evaluated exactly: the
/// integrand is constant between consecutive breakpoints {E_j +- eps}, and
/// the atoms it sees form a contiguous index range.
inline double k_moments(const AtomicMeasure& mu, double q, double eps) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("k_moments: q must lie in (0,1)");
    if (!(eps > 0.0)) throw ValidationError("k_moments: eps must be > 0");
    const auto& e = mu.atoms();
    const std::size_t n = e.size();
    // Atom j is inside for x in (E_j - eps, E_j + eps). Walk the merged
    // breakpoints E_k + s eps; `hi` counts entered atoms, `lo` exited ones.
    // Segment lengths are formed as (E_b - E_a) + (s_b - s_a) eps so that a
    // plateau of width 2 eps comes out exact.
    std::size_t lo = 0, hi = 0;
    std::size_t cur = 0;
    double cur_s = -1.0;
    CompensatedSum acc;
    while (lo < n) {
        const bool enter = hi < n && e[hi] - e[lo] <= 2.0 * eps;
        const std::size_t nxt = enter ? hi : lo;
        const double nxt_s = enter ? -1.0 : 1.0;
        const double len = (e[nxt] - e[cur]) + (nxt_s - cur_s) * eps;
        if (hi > lo && len > 0.0) acc.add(len * std::pow(mu.range_sum(lo, hi), q));
        cur = nxt;
        cur_s = nxt_s;
        if (enter)
            ++hi;
        else
            ++lo;
    }
    return acc.value() / eps;
}

struct ScalingWindow {
    double eps_lo = 0.0;
    double eps_hi = 0.0;
    double exponent = 0.0;
};

struct KProfile {
    double q = 0.0;
    std::vector<double> eps;
    std::vector<double> K;
    std::vector<double> pointwise;  ///< log K / ((q - 1) log eps)
    std::vector<ScalingWindow> windows;
    double exponent = 0.0;  ///< max window slope, the lim sup surrogate
    double eps_floor = 0.0;
    bool below_floor = false;  ///< some eps < 3 eps_floor
    bool plateau = false;      ///< K constant (rel 1e-6) over the smallest three eps
};

/// Sliding least-squares slopes of log K against (q - 1) log eps over
/// `window` consecutive grid points.
inline KProfile k_scaling(const AtomicMeasure& mu, double q, std::vector<double> eps_grid, std::size_t window = 4) {
    if (eps_grid.size() < 8) throw ValidationError("k_scaling: eps grid needs >= 8 points");
    if (window < 2 || window > eps_grid.size()) throw ValidationError("k_scaling: bad window length");
    std::sort(eps_grid.begin(), eps_grid.end());
    for (double v : eps_grid)
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("k_scaling: eps grid must be positive");
    const double r0 = std::log(eps_grid[1] / eps_grid[0]);
    if (!(r0 > 0.0)) throw ValidationError("k_scaling: eps grid has repeated values");
    for (std::size_t i = 1; i < eps_grid.size(); ++i)
        if (std::abs(std::log(eps_grid[i] / eps_grid[i - 1]) - r0) > 1e-6 * r0)
            throw ValidationError("k_scaling: eps grid is not log-spaced");
    if (eps_grid.back() >= 1.0) throw ValidationError("k_scaling: eps grid must stay below 1");

    KProfile prof;
    prof.q = q;
    prof.eps = eps_grid;
    prof.K.resize(eps_grid.size());
    tbb::parallel_for(std::size_t{0}, eps_grid.size(), [&](std::size_t i) { prof.K[i] = k_moments(mu, q, eps_grid[i]); });
    prof.eps_floor = mu.resolution_floor();
    prof.below_floor = eps_grid.front() < 3.0 * prof.eps_floor;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        x.push_back((q - 1.0) * std::log(eps_grid[i]));
        y.push_back(std::log(prof.K[i]));
        prof.pointwise.push_back(y.back() / x.back());
    }
    prof.exponent = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a + window <= x.size(); ++a) {
        const double sl = ls_slope(x.data() + a, y.data() + a, window);
        prof.windows.push_back({eps_grid[a], eps_grid[a + window - 1], sl});
        prof.exponent = std::max(prof.exponent, sl);
    }
    prof.plateau = std::abs(prof.K[2] / prof.K[0] - 1.0) < 1e-6 && std::abs(prof.K[1] / prof.K[0] - 1.0) < 1e-6;
    return prof;
}

struct MeasureBoundRow {
    double eps = 0.0;
    std::int64_t N = 0;
    double min_ratio = std::numeric_limits<double>::infinity();  ///< over non-vacuous x
    double x_at_min = 0.0;
    std::size_t vacuous = 0;  ///< x where the integral is <= eps^M
};

struct MeasureBoundReport {
    bool pass = true;
    double min_ratio = std::numeric_limits<double>::infinity();  ///< the empirical constant
    std::vector<MeasureBoundRow> rows;
    std::string detail;
};

namespace detail {

/// int_a^b dE / ||Phi(E, N, 0)||^2 by composite 8-point Gauss-Legendre; the
/// panel count tracks the oscillation scale 1/N of the integrand.
inline double inverse_norm_integral(const PotentialSequence& pot, std::int64_t N, double a, double b) {
    static constexpr double xg[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
    static constexpr double wg[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const auto panels = static_cast<int>(std::clamp(std::ceil(8.0 * (b - a) * static_cast<double>(N)), 32.0, 8192.0));
    const double h = (b - a) / panels;
    CompensatedSum acc;
    for (int k = 0; k < panels; ++k) {
        const double mid = a + (k + 0.5) * h;
        for (int g = 0; g < 4; ++g)
            for (double s : {-1.0, 1.0}) {
                const double E = mid + s * 0.5 * h * xg[g];
                acc.add(wg[g] * 0.5 * h * std::exp(-2.0 * transfer_product(E, pot, N).log_norm()));
            }
    }
    return acc.value();
}

}  // namespace detail

/// The lower bound mu(x - eps, x + eps) >= C1 int_{x - eps/2}^{x + eps/2} dE / ||Phi(E, N, 0)||^2 - C2 eps^M,
/// N = floor(eps^{-1-tau}), probed on `points` evenly spaced x in [I_lo, I_hi].
/// C1 and C2 are unknown. With both normalized to 1 the bound is vacuous
/// wherever the integral is <= eps^M; elsewhere the ratio R = mu / integral
/// is formed, and the check asks only that it stays positive. The smallest
/// R is the empirical constant.
inline MeasureBoundReport measure_transfer_check(const AtomicMeasure& mu, const PotentialSequence& pot, double I_lo, double I_hi,
                                   const std::vector<double>& eps_grid, double tau = 0.1, int points = 21,
                                   double M = 2.0) {
    if (!(I_hi > I_lo)) throw ValidationError("measure_transfer_check: empty interval I");
    if (eps_grid.empty()) throw ValidationError("measure_transfer_check: empty eps grid");
    if (!(tau > 0.0)) throw ValidationError("measure_transfer_check: tau must be > 0");
    if (!(M > 0.0)) throw ValidationError("measure_transfer_check: M must be > 0");
    if (points < 1) throw ValidationError("measure_transfer_check: need at least one x point");
    MeasureBoundReport rep;
    for (double eps : eps_grid) {
        if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("measure_transfer_check: eps must lie in (0,1]");
        MeasureBoundRow row;
        row.eps = eps;
        row.N = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(std::pow(eps, -1.0 - tau) * (1 + 1e-12))));
        if (!pot.contains(1) || !pot.contains(row.N))
            throw ValidationError("measure_transfer_check: potential window shorter than N = " + std::to_string(row.N));
        const auto xs = linear_grid(I_lo, I_hi, points);
        std::vector<double> rhs(xs.size());
        tbb::parallel_for(std::size_t{0}, xs.size(), [&](std::size_t i) {
            rhs[i] = detail::inverse_norm_integral(pot, row.N, xs[i] - 0.5 * eps, xs[i] + 0.5 * eps);
        });
        const double floor_term = std::pow(eps, M);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (rhs[i] <= floor_term) {
                ++row.vacuous;
                continue;
            }
            const double r = interval_mass(mu, xs[i], eps) / rhs[i];
            if (!(r >= row.min_ratio)) {
                row.min_ratio = r;
                row.x_at_min = xs[i];
            }
        }
        rep.min_ratio = std::min(rep.min_ratio, row.min_ratio);
        if (row.vacuous < xs.size() && !(row.min_ratio > 0.0 && std::isfinite(row.min_ratio))) {
            rep.pass = false;
            rep.detail = "ratio " + std::to_string(row.min_ratio) + " at eps = " + std::to_string(eps) +
                         ", x = " + std::to_string(row.x_at_min);
        }
        rep.rows.push_back(row);
    }
    return rep;
}

struct GValue {
    double E = 0.0;
    double G = 0.0;
    bool flagged = false;  ///< within the exclusion radius of an atom; G not computed
    double nearest = 0.0;  ///< distance to the nearest atom
};

/// Exclusion radius 1e-6 times the spectral width.
inline double g_exclusion_radius(const AtomicMeasure& mu) { return 1e-6 * mu.width(); }

/// G(E) = sum_j w_j / (E - E_j)^2.
inline std::vector<GValue> g_function(const AtomicMeasure& mu, const std::vector<double>& E_grid) {
    const double r = g_exclusion_radius(mu);
    const auto& e = mu.atoms();
    const auto& w = mu.weights();
    std::vector<GValue> out(E_grid.size());
    for (std::size_t k = 0; k < E_grid.size(); ++k) {
        const double E = E_grid[k];
        auto& g = out[k];
        g.E = E;
        const auto it = std::lower_bound(e.begin(), e.end(), E);
        g.nearest = std::numeric_limits<double>::infinity();
        if (it != e.end()) g.nearest = *it - E;
        if (it != e.begin()) g.nearest = std::min(g.nearest, E - *(it - 1));
        if (g.nearest <= r) {
            g.flagged = true;
            g.G = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        CompensatedSum acc;
        for (std::size_t j = 0; j < e.size(); ++j) {
            const double d = E - e[j];
            acc.add(w[j] / (d * d));
        }
        g.G = acc.value();
    }
    return out;
}

struct DecayFit {
    std::size_t index = 0;
    double energy = 0.0;
    std::int64_t peak_site = 0;
    double rate = 0.0;  ///< minus the slope of log|phi| against |n - n_peak|
    std::size_t tail_points = 0;
};

inline constexpr double kDecayFloor = 1e-12;
inline constexpr std::size_t kMinTail = 20;

/// Least-squares decay rate of eigenvector j on sites with |phi| > 1e-12
/// (Dirac: spinor norm per site), both sides of the peak pooled.
inline DecayFit eigenfunction_decay(const SpectralData& s, std::size_t j) {
    if (j >= s.dim()) throw ValidationError("eigenfunction_decay: eigenvector index out of range");
    const auto [sites, slot] = detail::site_map(s);
    std::vector<double> amp2(sites.size(), 0.0);
    const double* phi = s.column(j);
    for (std::size_t i = 0; i < s.dim(); ++i) amp2[slot[i]] += phi[i] * phi[i];
    const auto peak = static_cast<std::size_t>(std::max_element(amp2.begin(), amp2.end()) - amp2.begin());
    std::vector<double> x, y;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (i == peak) continue;
        const double a = std::sqrt(amp2[i]);
        if (a <= kDecayFloor) continue;
        x.push_back(static_cast<double>(std::abs(sites[i] - sites[peak])));
        y.push_back(std::log(a));
    }
    if (x.size() < kMinTail)
        throw ValidationError("eigenfunction_decay: tail has " + std::to_string(x.size()) + " sites, need >= " +
                              std::to_string(kMinTail));
    DecayFit fit;
    fit.index = j;
    fit.energy = s.eigenvalues[j];
    fit.peak_site = sites[peak];
    fit.rate = -ls_slope(x.data(), y.data(), x.size());
    fit.tail_points = x.size();
    return fit;
}

}  // namespace qbd
