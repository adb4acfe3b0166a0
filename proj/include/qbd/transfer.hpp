// Transfer-matrix cocycles: products, norm profiles, Lyapunov exponents, band
// scans for periodic potentials, the perturbed-initial-condition growth bound,
// and the Dirac counterparts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/dynsys.hpp"

namespace qbd {

/// Neumaier-compensated running sum.
class CompensatedSum {
  public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// [[E - v, -1], [1, 0]]: one step of psi(n+1) = (E - V(n)) psi(n) - psi(n-1).
inline constexpr Mat2 step_matrix(double E, double v) noexcept { return {E - v, -1.0, 1.0, 0.0}; }

/// Phi = e^{log_scale} M with max-abs entry of M equal to 1.
struct ScaledMat2 {
    Mat2 m;
    double log_scale = 0.0;
};

/// Product of 2x2 matrices kept in factored form Phi = Q R with Q a rotation
/// and R upper triangular. The diagonal of R is tracked in log scale, which
/// keeps norms and determinants accurate when entries would overflow (positive
/// Lyapunov exponent) and when the matrix is numerically rank one.
class TransferProduct {
  public:
    double energy = 0.0;
    std::int64_t steps = 0;

    static TransferProduct identity(double E = 0.0) {
        TransferProduct p;
        p.energy = E;
        return p;
    }

    /// Phi <- t Phi.
    void left_multiply(const Mat2& t) {
        const Mat2 p = t * q_;
        const double r11 = std::hypot(p.a, p.c);
        if (!(r11 > 0.0) || !std::isfinite(r11)) throw NumericalError("TransferProduct: degenerate step matrix");
        const Vec2 q1{p.a / r11, p.c / r11};
        const Vec2 q2{-q1.y, q1.x};
        const double r12 = q1.x * p.b + q1.y * p.d;
        const double r22 = q2.x * p.b + q2.y * p.d;
        if (r22 == 0.0) throw NumericalError("TransferProduct: singular step matrix");
        u_ += (r12 / r11) * sign22_ * std::exp(log_rho_.value());
        log_r11_.add(std::log(r11));
        log_rho_.add(std::log(std::abs(r22)) - std::log(r11));
        log_det_.add(std::log(r11) + std::log(std::abs(r22)));
        if (r22 < 0.0) sign22_ = -sign22_;
        q_ = {q1.x, q2.x, q1.y, q2.y};
        ++steps;
        normalize_u();
    }

    /// this * right.
    TransferProduct compose(const TransferProduct& right) const {
        // Q_a Rh_a Q_b Rh_b with Rh_a Q_b = Q' R'.
        const Mat2& qb = right.q_;
        const double s = log_rho_.value();
        const double x1 = qb.a + u_ * qb.c, x2 = qb.b + u_ * qb.d;
        const double y1 = qb.c, y2 = qb.d;
        const double top = s > 0.0 ? std::exp(-s) : 1.0;   // row scalings
        const double bot = s > 0.0 ? 1.0 : std::exp(s);
        const double c1x = x1 * top, c1y = sign22_ * y1 * bot;
        const double c2x = x2 * top, c2y = sign22_ * y2 * bot;
        const double r11s = std::hypot(c1x, c1y);
        if (!(r11s > 0.0)) throw NumericalError("TransferProduct::compose: degenerate product");
        const Vec2 q1{c1x / r11s, c1y / r11s};
        const Vec2 q2{-q1.y, q1.x};
        const double r12s = q1.x * c2x + q1.y * c2y;
        const double det_mid = x1 * y2 - x2 * y1;  // det of [[1,u],[0,1]] Q_b
        const double log_r11_mid = std::log(r11s) + std::max(s, 0.0);
        const double log_r22_mid = s + std::log(std::abs(det_mid)) - log_r11_mid;
        const int sign_mid = ((det_mid < 0.0) != (sign22_ < 0)) ? -1 : 1;

        TransferProduct out;
        out.energy = energy;
        out.steps = steps + right.steps;
        const Mat2 qmid{q1.x, q2.x, q1.y, q2.y};
        out.q_ = q_ * qmid;
        const double u_mid = r12s / r11s;
        const double log_rho_mid = log_r22_mid - log_r11_mid;
        out.u_ = right.u_ + u_mid * right.sign22_ * std::exp(right.log_rho_.value());
        out.log_r11_ = log_r11_;
        out.log_r11_.add(right.log_r11_.value());
        out.log_r11_.add(log_r11_mid);
        out.log_rho_.add(log_rho_mid);
        out.log_rho_.add(right.log_rho_.value());
        out.sign22_ = sign_mid * right.sign22_;
        out.log_det_ = log_det_;
        out.log_det_.add(right.log_det_.value());
        out.log_det_.add(std::log(std::abs(det_mid)));
        out.normalize_u();
        return out;
    }

    double log_norm() const {
        const double s = log_rho_.value();
        const double m = std::max(0.0, s);
        const Mat2 r{std::exp(-m), u_ * std::exp(-m), 0.0, sign22_ * std::exp(s - m)};
        return log_r11_.value() + m + std::log(r.spectral_norm());
    }
    double log_abs_det() const { return log_det_.value(); }
    int det_sign() const { return sign22_; }
    double det() const { return det_sign() * std::exp(log_abs_det()); }

    ScaledMat2 scaled() const {
        const double s = log_rho_.value();
        const double m = std::max(0.0, s);
        const Mat2 r{std::exp(-m), u_ * std::exp(-m), 0.0, sign22_ * std::exp(s - m)};
        Mat2 full = q_ * r;
        const double mx = full.max_abs();
        return {(1.0 / mx) * full, log_r11_.value() + m + std::log(mx)};
    }
    /// Plain matrix; overflows when log_norm() exceeds ~700.
    Mat2 matrix() const {
        const auto sm = scaled();
        return std::exp(sm.log_scale) * sm.m;
    }
    /// Relative distance ||A - B|| / ||B|| between two products.
    static double relative_distance(const TransferProduct& a, const TransferProduct& b) {
        const auto sa = a.scaled();
        const auto sb = b.scaled();
        const Mat2 diff = std::exp(sa.log_scale - sb.log_scale) * sa.m - sb.m;
        return diff.spectral_norm() / sb.m.spectral_norm();
    }

  private:
    // Phi = e^{log_r11} Q [[1, u], [0, sign22 e^{log_rho}]].
    Mat2 q_ = Mat2::identity();
    CompensatedSum log_r11_;
    CompensatedSum log_rho_;
    CompensatedSum log_det_;
    double u_ = 0.0;
    int sign22_ = 1;

    void normalize_u() {
        if (!std::isfinite(u_)) throw NumericalError("TransferProduct: off-diagonal overflow");
    }
};

/// Phi(E, n, 0). n >= 1: T(n)...T(1); n = 0: Id; n <= -1: T(n+1)^{-1}...T(0)^{-1}.
inline TransferProduct transfer_product(double E, const PotentialSequence& pot, std::int64_t n) {
    auto p = TransferProduct::identity(E);
    if (n > 0) {
        if (!pot.contains(1) || !pot.contains(n))
            throw ValidationError("transfer_product: potential window does not cover sites 1.." + std::to_string(n));
        for (std::int64_t k = 1; k <= n; ++k) p.left_multiply(step_matrix(E, pot.at(k)));
    } else if (n < 0) {
        if (!pot.contains(0) || !pot.contains(n + 1))
            throw ValidationError("transfer_product: negative n needs a whole-lattice potential window covering " +
                                  std::to_string(n + 1) + "..0");
        for (std::int64_t k = 0; k >= n + 1; --k) {
            const double a = E - pot.at(k);
            p.left_multiply(Mat2{0.0, 1.0, -1.0, a});  // T(k)^{-1}
        }
    }
    return p;
}

/// Phi(E, n, m) = T(n)...T(m+1) for n >= m >= 0.
inline TransferProduct transfer_between(double E, const PotentialSequence& pot, std::int64_t n, std::int64_t m) {
    if (n < m || m < 0) throw ValidationError("transfer_between: need n >= m >= 0");
    auto p = TransferProduct::identity(E);
    for (std::int64_t k = m + 1; k <= n; ++k) p.left_multiply(step_matrix(E, pot.at(k)));
    return p;
}

struct NormProfile {
    double energy = 0.0;
    std::vector<double> log_norms;    ///< log ||Phi(E, n, 0)||, n = 1..N
    std::vector<double> running_sup;  ///< log sup_{1<=k<=n} ||Phi(E, k, 0)||

    double log_sup() const { return running_sup.empty() ? 0.0 : running_sup.back(); }
};

inline NormProfile norm_profile(double E, const PotentialSequence& pot, std::int64_t N) {
    if (N < 1) throw ValidationError("norm_profile: N must be >= 1");
    if (!pot.contains(1) || !pot.contains(N)) throw ValidationError("norm_profile: potential window too short");
    NormProfile prof;
    prof.energy = E;
    prof.log_norms.reserve(static_cast<std::size_t>(N));
    prof.running_sup.reserve(static_cast<std::size_t>(N));
    auto p = TransferProduct::identity(E);
    double sup = -std::numeric_limits<double>::infinity();
    for (std::int64_t n = 1; n <= N; ++n) {
        p.left_multiply(step_matrix(E, pot.at(n)));
        const double ln = p.log_norm();
        sup = std::max(sup, ln);
        prof.log_norms.push_back(ln);
        prof.running_sup.push_back(sup);
    }
    return prof;
}

struct LyapunovEstimate {
    double energy = 0.0;
    double gamma = 0.0;
    double stderr_ = 0.0;
    std::int64_t N = 0;
    std::size_t samples = 0;
};

/// Mean of (1/N) log ||Phi(E, N, 0)|| over the given realizations.
inline LyapunovEstimate lyapunov(double E, const std::vector<PotentialSequence>& realizations, std::int64_t N) {
    if (realizations.empty()) throw ValidationError("lyapunov: need at least one sample");
    if (N < 1) throw ValidationError("lyapunov: N must be >= 1");
    std::vector<double> g;
    g.reserve(realizations.size());
    for (const auto& pot : realizations) g.push_back(transfer_product(E, pot, N).log_norm() / static_cast<double>(N));
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    LyapunovEstimate est;
    est.energy = E;
    est.gamma = mean;
    est.N = N;
    est.samples = g.size();
    est.stderr_ = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1) / static_cast<double>(g.size())) : 0.0;
    return est;
}

/// Lyapunov estimate over the given initial conditions.
inline LyapunovEstimate lyapunov(double E, const DynSystem& sys, const std::vector<State>& omegas, double lambda,
                                 std::int64_t N, const Perturbation& w = Perturbation::none()) {
    if (N < 1000) throw ValidationError("lyapunov: N must be >= 1000");
    std::vector<PotentialSequence> pots;
    for (const auto& om : omegas) pots.push_back(potential(sys, om, lambda, {1, N}, w));
    return lyapunov(E, pots, N);
}

/// Lyapunov estimate for `samples` states drawn from the system with `seed`.
inline LyapunovEstimate lyapunov(double E, const DynSystem& sys, std::size_t samples, double lambda, std::int64_t N,
                                 std::uint64_t seed, const Perturbation& w = Perturbation::none()) {
    if (N < 1000) throw ValidationError("lyapunov: N must be >= 1000");
    Rng rng(seed);
    std::vector<PotentialSequence> pots;
    for (std::size_t i = 0; i < samples; ++i) pots.push_back(potential(sys, sys.sample(rng), lambda, {1, N}, w));
    return lyapunov(E, pots, N);
}

// ---------------------------------------------------------------------------
// Band scan for periodic potentials
// ---------------------------------------------------------------------------

struct BoundedWindow {
    double E_lo = 0.0;
    double E_hi = 0.0;
    double bound = 0.0;  ///< C_omega(S)
    std::int64_t horizon = 0;
    bool pass = false;
};

struct BandScanResult {
    std::vector<double> energies;
    std::vector<double> log_sup;       ///< log sup_{n<=N} ||Phi(E,n,0)|| (lower bound once past the cutoff)
    std::vector<double> trace;         ///< trace Phi(E, q, 0)
    std::vector<BoundedWindow> windows;
    std::vector<std::pair<double, double>> trace_bands;  ///< maximal grid runs with |trace| < 2
    double threshold = 0.0;
    /// Grid points classified differently by the two criteria that are not
    /// adjacent to a change of the trace classification.
    std::size_t disagreements_beyond_one_cell = 0;
};

/// True iff v[n + q] == v[n] throughout the window.
inline bool is_periodic(const PotentialSequence& pot, std::int64_t q) {
    if (q < 1) return false;
    for (std::size_t i = 0; i + static_cast<std::size_t>(q) < pot.values.size(); ++i)
        if (pot.values[i + static_cast<std::size_t>(q)] != pot.values[i]) return false;
    return true;
}

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<bool>& flags) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < flags.size()) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < flags.size() && flags[j + 1]) ++j;
        out.emplace_back(i, j);
        i = j + 1;
    }
    return out;
}

inline double sup_log_norm(double E, const PotentialSequence& pot, std::int64_t N, double log_cutoff) {
    auto p = TransferProduct::identity(E);
    double sup = 0.0;  // ||Id|| = 1
    for (std::int64_t n = 1; n <= N; ++n) {
        p.left_multiply(step_matrix(E, pot.at(n)));
        sup = std::max(sup, p.log_norm());
        if (sup > log_cutoff) break;
    }
    return sup;
}

}  // namespace detail

/// Bounded-transfer-matrix windows of a q-periodic potential on an energy
/// grid, cross-checked against the |trace Phi(E, q, 0)| < 2 band criterion.
/// `threshold` defaults to 10x the sup over the horizon at the centre of the
/// widest trace band.
inline BandScanResult band_scan(const PotentialSequence& pot, std::int64_t period, const std::vector<double>& grid,
                                std::int64_t N, std::optional<double> threshold = std::nullopt) {
    if (!is_periodic(pot, period)) throw ValidationError("band_scan: potential is not periodic with the declared period");
    if (!pot.contains(1) || !pot.contains(std::max(N, period))) throw ValidationError("band_scan: potential window shorter than the horizon");
    if (grid.empty()) throw ValidationError("band_scan: empty energy grid");
    BandScanResult res;
    res.energies = grid;
    std::vector<bool> in_trace(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double tr = transfer_product(grid[i], pot, period).matrix().trace();
        res.trace.push_back(tr);
        in_trace[i] = std::abs(tr) < 2.0;
    }
    for (auto [a, b] : detail::runs(in_trace)) res.trace_bands.emplace_back(grid[a], grid[b]);

    if (threshold) {
        res.threshold = *threshold;
    } else {
        double best = 0.0;
        double centre = 0.0;
        for (auto [lo, hi] : res.trace_bands)
            if (hi - lo >= best) {
                best = hi - lo;
                centre = 0.5 * (lo + hi);
            }
        res.threshold = 10.0 * std::exp(detail::sup_log_norm(centre, pot, N, std::numeric_limits<double>::infinity()));
    }
    const double log_c = std::log(res.threshold);
    std::vector<bool> bounded(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        res.log_sup.push_back(detail::sup_log_norm(grid[i], pot, N, log_c));
        bounded[i] = res.log_sup.back() <= log_c;
    }
    for (auto [a, b] : detail::runs(bounded)) res.windows.push_back({grid[a], grid[b], res.threshold, N, true});

    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (bounded[i] == in_trace[i]) continue;
        const bool edge = (i > 0 && in_trace[i - 1] != in_trace[i]) || (i + 1 < grid.size() && in_trace[i + 1] != in_trace[i]);
        if (!edge) ++res.disagreements_beyond_one_cell;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Perturbed initial conditions
// ---------------------------------------------------------------------------

struct CheckReport {
    bool pass = true;
    double worst_margin = std::numeric_limits<double>::infinity();  ///< min over n of log(bound) - log(lhs)
    std::int64_t worst_n = 0;
    std::size_t checked = 0;
    std::string detail;
};

/// For 1 <= n <= N checks
///   ||Phi_theta(E,n,0)|| <= L exp(L max_{j<=n} |V_theta(j) - V_omega(j)| n),
/// L = sup_{1<=n<=N} ||Phi_omega(E,n,0)||. Both potentials must share lambda
/// and W, so |V_theta - V_omega| = lambda |F(S^j theta) - F(S^j omega)|.
inline CheckReport orbit_transfer_check(double E, const PotentialSequence& pot_theta, const PotentialSequence& pot_omega,
                                 std::int64_t N) {
    if (pot_theta.first != pot_omega.first || pot_theta.values.size() != pot_omega.values.size())
        throw ValidationError("orbit_transfer_check: potentials must share the window");
    const auto prof_omega = norm_profile(E, pot_omega, N);
    const auto prof_theta = norm_profile(E, pot_theta, N);
    const double log_L = std::max(0.0, prof_omega.log_sup());
    CheckReport rep;
    double running = 0.0;
    constexpr double log_slack = 1e-9;  // relative slack 1 + 1e-9
    for (std::int64_t n = 1; n <= N; ++n) {
        running = std::max(running, std::abs(pot_theta.at(n) - pot_omega.at(n)));
        double log_bound;
        if (running == 0.0) {
            log_bound = log_L;
        } else if (log_L > 700.0) {
            log_bound = std::numeric_limits<double>::infinity();
        } else {
            log_bound = log_L + std::exp(log_L) * running * static_cast<double>(n);
        }
        const double margin = log_bound + log_slack - prof_theta.log_norms[static_cast<std::size_t>(n - 1)];
        ++rep.checked;
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_n = n;
        }
        if (margin < 0.0) rep.pass = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Dirac cocycle
// ---------------------------------------------------------------------------

/// Single-site transfer matrix of the discrete Dirac equation, acting on
/// (u_n, v_{n-1}) -> (u_{n+1}, v_n):
///   v_n     = v_{n-1} + a u_n / c,    a = m c^2 + V - E
///   u_{n+1} = u_n + b v_n / c,        b = E + m c^2 - V
/// giving [[1 + a b / c^2, b / c], [a / c, 1]] with determinant 1.
inline Mat2 dirac_step_matrix(double E, double mass, double c, double v, std::int64_t site = 0) {
    if (!(c > 0.0))
        throw NumericalError("dirac_step_matrix: vanishing coupling coefficient c at site " + std::to_string(site));
    const double mc2 = mass * c * c;
    const double a = mc2 + v - E;
    const double b = E + mc2 - v;
    return {1.0 + a * b / (c * c), b / c, a / c, 1.0};
}

/// Product of Dirac single-site matrices over sites 1..n (n >= 0), or the
/// inverse product over n+1..0 for n < 0.
inline TransferProduct dirac_transfer(double E, double mass, double c, const PotentialSequence& pot, std::int64_t n) {
    if (!(c > 0.0)) throw ValidationError("dirac_transfer: c must be > 0");
    auto p = TransferProduct::identity(E);
    if (n > 0) {
        if (!pot.contains(1) || !pot.contains(n)) throw ValidationError("dirac_transfer: potential window too short");
        for (std::int64_t k = 1; k <= n; ++k) p.left_multiply(dirac_step_matrix(E, mass, c, pot.at(k), k));
    } else if (n < 0) {
        if (!pot.contains(0) || !pot.contains(n + 1)) throw ValidationError("dirac_transfer: potential window too short");
        for (std::int64_t k = 0; k >= n + 1; --k) p.left_multiply(dirac_step_matrix(E, mass, c, pot.at(k), k).inverse());
    }
    return p;
}

/// Bounded powers: |trace| < 2 or the matrix is +-Id.
inline bool is_elliptic_or_identity(const Mat2& m, double tol = 1e-12) {
    if (std::abs(m.trace()) < 2.0) return true;
    return max_abs_diff(m, Mat2::identity()) < tol || max_abs_diff(m, -1.0 * Mat2::identity()) < tol;
}

struct CriticalEnergy {
    double energy = 0.0;
    double commutator_norm = 0.0;
};

/// Energies where the massless Dirac step matrices of all potential values
/// commute and have bounded powers. Grid spacing `grid_step`; roots of the
/// commutator entries are refined by bisection to `tol`.
inline std::vector<CriticalEnergy> critical_energy_scan(double c, const std::vector<double>& values, double E_lo,
                                                        double E_hi, double grid_step = 1e-3, double tol = 1e-9) {
    if (values.empty()) throw ValidationError("critical_energy_scan: need at least one potential value");
    if (!(c > 0.0)) throw ValidationError("critical_energy_scan: c must be > 0");
    if (!(E_hi > E_lo) || !(grid_step > 0.0)) throw ValidationError("critical_energy_scan: bad energy range");

    auto mats = [&](double E) {
        std::vector<Mat2> ms;
        for (double v : values) ms.push_back(dirac_step_matrix(E, 0.0, c, v));
        return ms;
    };
    // Max-abs entry of all pairwise commutators, and a signed entry list.
    auto commutators = [&](double E) {
        const auto ms = mats(E);
        std::vector<double> entries;
        for (std::size_t i = 0; i < ms.size(); ++i)
            for (std::size_t j = i + 1; j < ms.size(); ++j) {
                const Mat2 cm = ms[i] * ms[j] - ms[j] * ms[i];
                entries.insert(entries.end(), {cm.a, cm.b, cm.c, cm.d});
            }
        return entries;
    };
    auto comm_norm = [&](double E) {
        double n = 0.0;
        for (double e : commutators(E)) n = std::max(n, std::abs(e));
        return n;
    };
    auto qualifies = [&](double E) {
        if (comm_norm(E) >= 1e-8) return false;
        for (const auto& m : mats(E))
            if (!is_elliptic_or_identity(m, 1e-8)) return false;
        return true;
    };

    const auto count = static_cast<std::int64_t>(std::floor((E_hi - E_lo) / grid_step)) + 1;
    std::vector<double> found;
    std::vector<double> prev;
    double prevE = E_lo;
    for (std::int64_t i = 0; i < count; ++i) {
        const double E = E_lo + static_cast<double>(i) * grid_step;
        const auto cur = commutators(E);
        if (qualifies(E)) found.push_back(E);
        if (!prev.empty()) {
            for (std::size_t k = 0; k < cur.size(); ++k) {
                if ((prev[k] < 0.0) == (cur[k] < 0.0) || prev[k] == 0.0 || cur[k] == 0.0) continue;
                double a = prevE, b = E;
                double fa = prev[k];
                while (b - a > tol) {
                    const double mid = 0.5 * (a + b);
                    const double fm = commutators(mid)[k];
                    if ((fm < 0.0) == (fa < 0.0)) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                const double root = 0.5 * (a + b);
                if (qualifies(root)) found.push_back(root);
            }
        }
        prev = cur;
        prevE = E;
    }
    std::sort(found.begin(), found.end());
    std::vector<CriticalEnergy> out;
    for (double E : found) {
        if (!out.empty() && E - out.back().energy < 10.0 * tol) continue;
        out.push_back({E, comm_norm(E)});
    }
    return out;
}

}  // namespace qbd
