// Dynamical systems that generate potentials V(n) = lambda F(S^n omega) + W(n).
//
// Every system carries the data needed to check the two contracts used by the
// transport estimates: a Lipschitz bound |F(x) - F(y)| <= L d(x, y) on the
// observable and an orbit-separation profile d(S^n x, S^n y) <= C d(x, y) h(n).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/perturbation.hpp"

namespace qbd {

/// A point of the phase space.
///
/// Continuous coordinates live in `x`. Systems with exact periodic orbits
/// (doubling, rational rotations, torus automorphisms) additionally keep an
/// integer representation `num / den`. Sequence spaces (the shift) are
/// represented by a seeded tail plus a sparse list of overridden coordinates;
/// `offset` is the absolute index of coordinate 0.
struct State {
    std::vector<double> x;
    std::vector<std::int64_t> num;
    std::int64_t den = 0;  ///< 0: no exact representation
    std::int64_t offset = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::int64_t, double>> overrides;  ///< (absolute index, value), sorted

    bool exact() const noexcept { return den > 0; }
    friend bool operator==(const State&, const State&) = default;
};

/// State with continuous coordinates only.
inline State coords(std::vector<double> x) {
    State s;
    s.x = std::move(x);
    return s;
}

/// d(S^n x, S^n y) <= C d(x, y) h(n); h must be nondecreasing.
struct ExpansionProfile {
    double C = 1.0;
    std::function<double(std::int64_t)> h;
};

struct DynSystem {
    std::string name;
    std::size_t state_dim = 1;
    bool invertible = false;
    double lipschitz_L = 0.0;
    ExpansionProfile expansion;

    std::function<State(const State&)> step;
    std::function<State(const State&)> inverse;  ///< empty unless invertible
    std::function<double(const State&, const State&)> metric;
    std::function<double(const State&)> observable;

    /// Random state, and a random state within distance `delta` of a given one.
    std::function<State(Rng&)> sample;
    std::function<State(const State&, double, Rng&)> neighbor;
    /// Optional: false once an orbit leaves the phase space (open maps).
    std::function<bool(const State&)> in_domain;
    /// Optional closed form for F(S^n omega), n in [lo, hi]. Must agree with
    /// iterating `step` / `inverse`.
    std::function<std::vector<double>(const State&, std::int64_t, std::int64_t)> orbit_values;
};

/// V(n) for n = first .. first + values.size() - 1.
struct PotentialSequence {
    std::int64_t first = 1;
    std::vector<double> values;
    double lambda = 0.0;
    State origin;

    std::int64_t last() const noexcept { return first + static_cast<std::int64_t>(values.size()) - 1; }
    bool contains(std::int64_t n) const noexcept { return n >= first && n <= last(); }
    double at(std::int64_t n) const {
        if (!contains(n))
            throw ValidationError("potential window [" + std::to_string(first) + ", " +
                                  std::to_string(last()) + "] does not contain site " +
                                  std::to_string(n));
        return values[static_cast<std::size_t>(n - first)];
    }
    double sup_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Site range [lo, hi] (inclusive).
struct SiteWindow {
    std::int64_t lo = 1;
    std::int64_t hi = 1;
};

namespace detail {

inline double wrap(double v, double period) {
    double r = std::fmod(v, period);
    if (r < 0.0) r += period;
    if (r >= period) r = 0.0;
    return r;
}

inline double circle_dist(double a, double b, double period) {
    const double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

inline std::int64_t mod(std::int64_t a, std::int64_t m) {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

inline std::int64_t mulmod(std::int64_t a, std::int64_t b, std::int64_t m) {
    return static_cast<std::int64_t>((static_cast<__int128>(a) * b) % m);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Doubling map on the circle [0, 1)
// ---------------------------------------------------------------------------

/// Observable on the circle together with its Lipschitz constant.
struct CircleObservable {
    std::function<double(double)> g;
    double lipschitz = 0.0;
};

/// F(theta) = cos(2 pi theta) on [0,1); the 2 pi keeps F continuous on the circle.
inline CircleObservable unit_circle_cosine() {
    return {[](double t) { return std::cos(kTwoPi * t); }, kTwoPi};
}

inline State doubling_state(double theta) { return coords({detail::wrap(theta, 1.0)}); }

/// Exact rational point p/q of the circle.
inline State doubling_rational(std::int64_t p, std::int64_t q) {
    if (q <= 0 || q > (std::int64_t{1} << 61)) throw ValidationError("doubling: need 0 < q < 2^61");
    State s;
    const auto r = detail::mod(p, q);
    s.num = {r};
    s.den = q;
    s.x = {static_cast<double>(r) / static_cast<double>(q)};
    return s;
}

inline DynSystem make_doubling(CircleObservable F = unit_circle_cosine()) {
    DynSystem sys;
    sys.name = "doubling";
    sys.state_dim = 1;
    sys.invertible = false;
    sys.lipschitz_L = F.lipschitz;
    sys.expansion = {1.0, [](std::int64_t n) { return std::ldexp(1.0, static_cast<int>(std::abs(n))); }};
    sys.step = [](const State& s) {
        State t = s;
        if (s.exact()) {
            t.num[0] = detail::mod(2 * s.num[0], s.den);
            t.x[0] = static_cast<double>(t.num[0]) / static_cast<double>(s.den);
        } else {
            t.x[0] = detail::wrap(2.0 * s.x[0], 1.0);
        }
        return t;
    };
    sys.metric = [](const State& a, const State& b) { return detail::circle_dist(a.x[0], b.x[0], 1.0); };
    auto g = F.g;
    sys.observable = [g](const State& s) { return g(s.x[0]); };
    sys.sample = [](Rng& rng) { return doubling_state(rng.uniform()); };
    sys.neighbor = [](const State& s, double delta, Rng& rng) {
        return doubling_state(s.x[0] + delta * rng.uniform(-1.0, 1.0));
    };
    return sys;
}

/// (preperiod, period) of the doubling orbit of p/q, by exact iteration.
inline std::pair<std::int64_t, std::int64_t> doubling_orbit_period(std::int64_t p, std::int64_t q) {
    if (q <= 0) throw ValidationError("doubling_orbit_period: q must be positive");
    std::int64_t r = detail::mod(p, q);
    const std::int64_t g = std::gcd(r, q);
    r /= g;
    q /= g;
    // For reduced r/q with q = 2^a b (b odd) the preperiod is a.
    std::int64_t pre = 0;
    for (std::int64_t t = q; t % 2 == 0; t /= 2) ++pre;
    for (std::int64_t i = 0; i < pre; ++i) r = detail::mod(2 * r, q);
    const std::int64_t start = r;
    std::int64_t period = 0;
    do {
        r = detail::mod(2 * r, q);
        ++period;
    } while (r != start);
    return {pre, period};
}

// ---------------------------------------------------------------------------
// Rotations of the torus T^k (angles mod 2 pi) skewed with the frequency
// ---------------------------------------------------------------------------

struct RotationParams {
    std::vector<double> alpha;  ///< frequencies, |alpha_i| <= a
    double a = 1.0;             ///< half-width of the frequency box
    /// Observable g on T^k and its Lipschitz constant w.r.t. the Euclidean
    /// metric. Default cos of the first angle.
    std::function<double(const std::vector<double>&)> g;
    double g_lipschitz = 1.0;
};

namespace detail {

/// Effective angles of a rotation state (exact phase for rational alpha).
inline std::vector<double> rotation_angles(const State& s, std::size_t k) {
    std::vector<double> th(s.x.begin(), s.x.begin() + static_cast<std::ptrdiff_t>(k));
    if (s.exact()) th[0] = wrap(th[0] + kPi * static_cast<double>(s.offset) / static_cast<double>(s.den), kTwoPi);
    return th;
}

}  // namespace detail

/// State (theta, alpha) of the skew rotation; for rational params use
/// `rotation_rational_state`.
inline State rotation_state(std::vector<double> theta, std::vector<double> alpha) {
    if (theta.size() != alpha.size() || theta.empty())
        throw ValidationError("rotation_state: theta and alpha must have equal nonzero size");
    State s;
    for (double t : theta) s.x.push_back(detail::wrap(t, kTwoPi));
    for (double a : alpha) s.x.push_back(a);
    return s;
}

/// (theta, p/q) with exact phase arithmetic: the angle after n steps is
/// theta + pi (n p mod 2q) / q.
inline State rotation_rational_state(double theta, std::int64_t p, std::int64_t q) {
    if (q <= 0) throw ValidationError("rotation: rational alpha needs q > 0");
    State s;
    s.x = {detail::wrap(theta, kTwoPi), static_cast<double>(p) / static_cast<double>(q)};
    s.num = {p};
    s.den = q;
    s.offset = 0;  // phase numerator modulo 2q
    return s;
}

inline DynSystem make_rotation(RotationParams params) {
    const std::size_t k = params.alpha.size();
    if (k == 0) throw ValidationError("make_rotation: dimension k must be >= 1");
    for (double a : params.alpha)
        if (std::abs(a) > params.a) throw ValidationError("make_rotation: alpha outside [-a, a]");
    if (!params.g) {
        params.g = [](const std::vector<double>& th) { return std::cos(th[0]); };
        params.g_lipschitz = 1.0;
    }
    DynSystem sys;
    sys.name = "rotation";
    sys.state_dim = 2 * k;
    sys.invertible = true;
    sys.lipschitz_L = params.g_lipschitz;
    sys.expansion = {std::sqrt(kPi * kPi + 1.0) + 1.0,
                     [](std::int64_t n) { return static_cast<double>(std::max<std::int64_t>(std::abs(n), 1)); }};

    auto advance = [k](const State& s, int dir) {
        State t = s;
        if (s.exact()) {
            t.offset = detail::mod(s.offset + dir * s.num[0], 2 * s.den);
        } else {
            for (std::size_t i = 0; i < k; ++i) t.x[i] = detail::wrap(s.x[i] + dir * kPi * s.x[k + i], kTwoPi);
        }
        return t;
    };
    sys.step = [advance](const State& s) { return advance(s, +1); };
    sys.inverse = [advance](const State& s) { return advance(s, -1); };
    sys.metric = [k](const State& a, const State& b) {
        const auto ta = detail::rotation_angles(a, k);
        const auto tb = detail::rotation_angles(b, k);
        double s2 = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double dt = detail::circle_dist(ta[i], tb[i], kTwoPi);
            const double da = a.x[k + i] - b.x[k + i];
            s2 += dt * dt + da * da;
        }
        return std::sqrt(s2);
    };
    auto g = params.g;
    sys.observable = [g, k](const State& s) { return g(detail::rotation_angles(s, k)); };
    const double box = params.a;
    sys.sample = [k, box](Rng& rng) {
        std::vector<double> th(k), al(k);
        for (auto& t : th) t = rng.uniform(0.0, kTwoPi);
        for (auto& a : al) a = rng.uniform(-box, box);
        return rotation_state(th, al);
    };
    sys.neighbor = [k, box](const State& s, double delta, Rng& rng) {
        const double step = delta / std::sqrt(2.0 * static_cast<double>(k));
        std::vector<double> th = detail::rotation_angles(s, k), al(s.x.begin() + static_cast<std::ptrdiff_t>(k), s.x.end());
        for (auto& t : th) t += step * rng.uniform(-1.0, 1.0);
        for (auto& a : al) a = std::clamp(a + step * rng.uniform(-1.0, 1.0), -box, box);
        return rotation_state(th, al);
    };
    sys.orbit_values = [g, k](const State& s, std::int64_t lo, std::int64_t hi) {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(hi - lo + 1));
        std::vector<double> th(k);
        for (std::int64_t n = lo; n <= hi; ++n) {
            if (s.exact()) {
                const std::int64_t m = detail::mod(s.offset + detail::mulmod(detail::mod(n, 2 * s.den), s.num[0], 2 * s.den), 2 * s.den);
                th[0] = detail::wrap(s.x[0] + kPi * static_cast<double>(m) / static_cast<double>(s.den), kTwoPi);
            } else {
                for (std::size_t i = 0; i < k; ++i)
                    th[i] = detail::wrap(s.x[i] + static_cast<double>(n) * kPi * s.x[k + i], kTwoPi);
            }
            out.push_back(g(th));
        }
        return out;
    };
    return sys;
}

/// One-frequency rotation with the default observable.
inline DynSystem make_rotation(double alpha) {
    RotationParams p;
    p.alpha = {alpha};
    return make_rotation(std::move(p));
}

// ---------------------------------------------------------------------------
// Shift on sequence space (Anderson / Bernoulli-Anderson models)
// ---------------------------------------------------------------------------

/// Single-site distribution: uniform on [lo, hi] or a finite set of values.
struct SiteDistribution {
    bool discrete = false;
    double lo = -1.0, hi = 1.0;
    std::vector<double> values;
    std::vector<double> probs;

    static SiteDistribution uniform(double lo = -1.0, double hi = 1.0) {
        if (!(hi > lo)) throw ValidationError("uniform site distribution needs hi > lo");
        SiteDistribution d;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    static SiteDistribution bernoulli(std::vector<double> values, std::vector<double> probs) {
        if (values.empty() || values.size() != probs.size())
            throw ValidationError("bernoulli distribution: values and probabilities must match");
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw ValidationError("bernoulli distribution: probabilities must be >= 0");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ValidationError("bernoulli distribution: probabilities sum to " + std::to_string(total) +
                                  ", expected 1");
        SiteDistribution d;
        d.discrete = true;
        d.values = std::move(values);
        d.probs = std::move(probs);
        return d;
    }
    double draw(double u) const {
        if (!discrete) return lo + (hi - lo) * u;
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            acc += probs[i];
            if (u < acc) return values[i];
        }
        return values.back();
    }
    double diameter() const {
        if (!discrete) return hi - lo;
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        return *mx - *mn;
    }
};

namespace detail {

inline double shift_coord(const State& s, const SiteDistribution& dist, std::int64_t j) {
    const std::int64_t abs_index = s.offset + j;
    const auto it = std::lower_bound(s.overrides.begin(), s.overrides.end(), abs_index,
                                     [](const auto& e, std::int64_t v) { return e.first < v; });
    if (it != s.overrides.end() && it->first == abs_index) return it->second;
    return dist.draw(hashed_uniform(s.seed, abs_index));
}

inline constexpr std::int64_t kShiftMetricRadius = 62;

}  // namespace detail

/// Realization of the i.i.d. sequence with tail seed `seed`, positioned at 0.
inline State shift_realization(std::uint64_t seed) {
    State s;
    s.seed = seed;
    return s;
}

/// Shift (S omega)_j = omega_{j+1} with F(omega) = omega_0 and the weighted
/// discrete metric d = sum_j [omega_j != theta_j] 2^{-|j|}. Coordinates
/// farther than 62 sites from the origin are dropped from the metric (weight
/// below 2^-61) unless they are explicit overrides.
inline DynSystem make_anderson_shift(SiteDistribution dist, std::uint64_t seed) {
    DynSystem sys;
    sys.name = "anderson";
    sys.state_dim = 1;
    sys.invertible = true;
    // |omega_0 - theta_0| <= diam * [omega_0 != theta_0] <= diam * d.
    sys.lipschitz_L = std::max(2.0, dist.diameter());
    sys.expansion = {1.0, [](std::int64_t n) { return std::ldexp(1.0, static_cast<int>(std::abs(n))); }};
    sys.step = [](const State& s) {
        State t = s;
        t.offset += 1;
        return t;
    };
    sys.inverse = [](const State& s) {
        State t = s;
        t.offset -= 1;
        return t;
    };
    sys.metric = [dist](const State& a, const State& b) {
        std::vector<std::int64_t> js;
        for (std::int64_t j = -detail::kShiftMetricRadius; j <= detail::kShiftMetricRadius; ++j) js.push_back(j);
        for (const auto& [idx, v] : a.overrides) js.push_back(idx - a.offset);
        for (const auto& [idx, v] : b.overrides) js.push_back(idx - b.offset);
        std::sort(js.begin(), js.end());
        js.erase(std::unique(js.begin(), js.end()), js.end());
        double d = 0.0;
        for (std::int64_t j : js) {
            if (detail::shift_coord(a, dist, j) != detail::shift_coord(b, dist, j))
                d += std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(std::abs(j), 1000)));
        }
        return d;
    };
    sys.observable = [dist](const State& s) { return detail::shift_coord(s, dist, 0); };
    sys.sample = [seed](Rng& rng) { return shift_realization(mix64(seed ^ rng.next_u64())); };
    // Close pair: change one coordinate at distance m with 2^{-m} <= delta.
    sys.neighbor = [dist](const State& s, double delta, Rng& rng) {
        const int m = static_cast<int>(std::ceil(-std::log2(std::max(delta, 1e-300))));
        const std::int64_t j = (rng.sign()) * static_cast<std::int64_t>(std::max(m, 0) + static_cast<int>(rng.below(8)));
        State t = s;
        const std::int64_t abs_index = s.offset + j;
        double v = dist.draw(rng.uniform());
        // Discrete laws: redraw until the coordinate actually changes.
        const double old = detail::shift_coord(s, dist, j);
        for (int tries = 0; v == old && tries < 64; ++tries) v = dist.draw(rng.uniform());
        auto it = std::lower_bound(t.overrides.begin(), t.overrides.end(), abs_index,
                                   [](const auto& e, std::int64_t x) { return e.first < x; });
        if (it != t.overrides.end() && it->first == abs_index)
            it->second = v;
        else
            t.overrides.insert(it, {abs_index, v});
        return t;
    };
    sys.orbit_values = [dist](const State& s, std::int64_t lo, std::int64_t hi) {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(hi - lo + 1));
        for (std::int64_t n = lo; n <= hi; ++n) out.push_back(detail::shift_coord(s, dist, n));
        return out;
    };
    return sys;
}

/// Periodic sequence (..., v_0, v_1, ..., v_{p-1}, ...) as a shift state.
/// Coordinates within `radius` of the origin are stored explicitly; the
/// orbit fast path reproduces the period everywhere.
inline std::vector<double> periodic_sequence_values(const std::vector<double>& period, std::int64_t lo,
                                                    std::int64_t hi) {
    if (period.empty()) throw ValidationError("periodic sequence needs at least one value");
    std::vector<double> out;
    for (std::int64_t n = lo; n <= hi; ++n)
        out.push_back(period[static_cast<std::size_t>(detail::mod(n, static_cast<std::int64_t>(period.size())))]);
    return out;
}

inline State shift_periodic_state(const std::vector<double>& period, std::int64_t radius = 256) {
    State s;
    s.seed = 0;
    for (std::int64_t j = -radius; j <= radius; ++j)
        s.overrides.emplace_back(j, period[static_cast<std::size_t>(detail::mod(j, static_cast<std::int64_t>(period.size())))]);
    return s;
}

// ---------------------------------------------------------------------------
// Chaotic interval maps and hyperbolic torus automorphisms
// ---------------------------------------------------------------------------

enum class ChaoticKind { tcheb3, tcheb4, logistic, torus };

struct ChaoticParams {
    double r = 4.0;                      ///< logistic parameter
    std::array<std::int64_t, 4> matrix{2, 1, 1, 1};  ///< torus automorphism, row-major
    std::function<double(double)> F;     ///< interval maps; default identity
    double F_lipschitz = 1.0;
};

inline State interval_state(double x) { return coords({x}); }

/// Rational point (n1/q, n2/q) of the 2-torus.
inline State torus_rational(std::int64_t n1, std::int64_t n2, std::int64_t q) {
    if (q <= 0) throw ValidationError("torus point needs q > 0");
    State s;
    s.num = {detail::mod(n1, q), detail::mod(n2, q)};
    s.den = q;
    s.x = {static_cast<double>(s.num[0]) / q, static_cast<double>(s.num[1]) / q};
    return s;
}

inline DynSystem make_chaotic_map(ChaoticKind kind, ChaoticParams params = {}) {
    DynSystem sys;
    if (kind == ChaoticKind::torus) {
        const auto m = params.matrix;
        const std::int64_t det = m[0] * m[3] - m[1] * m[2];
        if (std::abs(det) != 1) throw ValidationError("torus automorphism: |det| must be 1");
        const double tr = static_cast<double>(m[0] + m[3]);
        const double disc = tr * tr - 4.0 * static_cast<double>(det);
        if (disc <= 0.0) throw ValidationError("torus automorphism: eigenvalues on the unit circle");
        const double l1 = 0.5 * (tr + std::sqrt(disc));
        const double l2 = 0.5 * (tr - std::sqrt(disc));
        const double gamma = std::max(std::abs(l1), std::abs(l2));
        if (std::abs(std::abs(l1) - 1.0) < 1e-12 || std::abs(std::abs(l2) - 1.0) < 1e-12)
            throw ValidationError("torus automorphism: eigenvalue on the unit circle");
        // ||A^n|| <= cond(V) gamma^n for the eigenvector matrix V.
        auto eigvec = [&](double l) {
            Vec2 v = m[1] != 0 ? Vec2{static_cast<double>(m[1]), l - static_cast<double>(m[0])}
                               : Vec2{l - static_cast<double>(m[3]), static_cast<double>(m[2])};
            const double nv = std::hypot(v.x, v.y);
            return Vec2{v.x / nv, v.y / nv};
        };
        const Vec2 v1 = eigvec(l1), v2 = eigvec(l2);
        const Mat2 V{v1.x, v2.x, v1.y, v2.y};
        const double cond = V.spectral_norm() * V.inverse().spectral_norm();
        const Mat2 A{static_cast<double>(m[0]), static_cast<double>(m[1]), static_cast<double>(m[2]),
                     static_cast<double>(m[3])};
        const std::array<std::int64_t, 4> inv{m[3] * det, -m[1] * det, -m[2] * det, m[0] * det};

        sys.name = "torus_automorphism";
        sys.state_dim = 2;
        sys.invertible = true;
        sys.lipschitz_L = kTwoPi;
        sys.expansion = {cond * (1.0 + 1e-12),
                         [gamma](std::int64_t n) { return std::pow(gamma, static_cast<double>(std::abs(n))); }};
        auto apply = [](const State& s, const std::array<std::int64_t, 4>& mm) {
            State t = s;
            if (s.exact()) {
                const auto q = s.den;
                t.num = {detail::mod(detail::mulmod(detail::mod(mm[0], q), s.num[0], q) + detail::mulmod(detail::mod(mm[1], q), s.num[1], q), q),
                         detail::mod(detail::mulmod(detail::mod(mm[2], q), s.num[0], q) + detail::mulmod(detail::mod(mm[3], q), s.num[1], q), q)};
                t.x = {static_cast<double>(t.num[0]) / q, static_cast<double>(t.num[1]) / q};
            } else {
                t.x = {detail::wrap(mm[0] * s.x[0] + mm[1] * s.x[1], 1.0),
                       detail::wrap(mm[2] * s.x[0] + mm[3] * s.x[1], 1.0)};
            }
            return t;
        };
        sys.step = [apply, m](const State& s) { return apply(s, m); };
        sys.inverse = [apply, inv](const State& s) { return apply(s, inv); };
        sys.metric = [](const State& a, const State& b) {
            return std::hypot(detail::circle_dist(a.x[0], b.x[0], 1.0), detail::circle_dist(a.x[1], b.x[1], 1.0));
        };
        sys.observable = [](const State& s) { return std::cos(kTwoPi * s.x[0]); };
        sys.sample = [](Rng& rng) { return coords({rng.uniform(), rng.uniform()}); };
        sys.neighbor = [](const State& s, double delta, Rng& rng) {
            const double h = delta / std::sqrt(2.0);
            return coords({detail::wrap(s.x[0] + h * rng.uniform(-1.0, 1.0), 1.0),
                          detail::wrap(s.x[1] + h * rng.uniform(-1.0, 1.0), 1.0)});
        };
        (void)A;
        return sys;
    }

    std::function<double(double)> map;
    double lo = -1.0, hi = 1.0, sup_deriv = 1.0;
    switch (kind) {
        case ChaoticKind::tcheb3:
            sys.name = "tcheb3";
            map = [](double x) { return 4.0 * x * x * x - 3.0 * x; };
            sup_deriv = 9.0;
            break;
        case ChaoticKind::tcheb4:
            sys.name = "tcheb4";
            map = [](double x) {
                const double x2 = x * x;
                return 8.0 * x2 * x2 - 8.0 * x2 + 1.0;
            };
            sup_deriv = 16.0;
            break;
        case ChaoticKind::logistic: {
            if (!(params.r > 0.0)) throw ValidationError("logistic map needs r > 0");
            sys.name = "logistic";
            const double r = params.r;
            map = [r](double x) { return r * x * (1.0 - x); };
            lo = 0.0;
            hi = 1.0;
            sup_deriv = r;
            break;
        }
        case ChaoticKind::torus:
            break;
    }
    if (!params.F) {
        params.F = [](double x) { return x; };
        params.F_lipschitz = 1.0;
    }
    sys.state_dim = 1;
    sys.invertible = false;
    sys.lipschitz_L = params.F_lipschitz;
    sys.expansion = {1.0, [sup_deriv](std::int64_t n) { return std::pow(sup_deriv, static_cast<double>(std::abs(n))); }};
    sys.step = [map](const State& s) { return coords({map(s.x[0])}); };
    sys.metric = [](const State& a, const State& b) { return std::abs(a.x[0] - b.x[0]); };
    auto F = params.F;
    sys.observable = [F](const State& s) { return F(s.x[0]); };
    sys.sample = [lo, hi](Rng& rng) { return coords({rng.uniform(lo, hi)}); };
    sys.neighbor = [lo, hi](const State& s, double delta, Rng& rng) {
        return coords({std::clamp(s.x[0] + delta * rng.uniform(-1.0, 1.0), lo, hi)});
    };
    sys.in_domain = [lo, hi](const State& s) { return s.x[0] >= lo && s.x[0] <= hi; };
    return sys;
}

// ---------------------------------------------------------------------------
// Integrable twist map on the disk and the circular billiard
// ---------------------------------------------------------------------------

/// Twist profile rho: [0,1] -> [0, 2 pi], rho(0) = 0, with Lipschitz bound.
struct TwistProfile {
    std::function<double(double)> rho;
    double lipschitz = 0.0;
};

/// State (theta, r) in polar coordinates on the closed unit disk.
inline State twist_state(double theta, double r) { return coords({detail::wrap(theta, kTwoPi), r}); }

inline DynSystem make_twist_map(TwistProfile profile) {
    if (!profile.rho) throw ValidationError("twist map: rho must be supplied");
    if (std::abs(profile.rho(0.0)) > 1e-14) throw ValidationError("twist map: rho(0) must be 0");
    for (int i = 0; i <= 1000; ++i) {
        const double v = profile.rho(i / 1000.0);
        if (!(v >= -1e-14 && v <= kTwoPi + 1e-12)) throw ValidationError("twist map: rho must map [0,1] into [0, 2 pi]");
    }
    DynSystem sys;
    sys.name = "twist";
    sys.state_dim = 2;
    sys.invertible = true;
    sys.lipschitz_L = 1.0;
    sys.expansion = {1.0 + std::sqrt(profile.lipschitz * profile.lipschitz + 1.0),
                     [](std::int64_t n) { return static_cast<double>(std::max<std::int64_t>(std::abs(n), 1)); }};
    auto rho = profile.rho;
    sys.step = [rho](const State& s) { return twist_state(s.x[0] + rho(s.x[1]), s.x[1]); };
    sys.inverse = [rho](const State& s) { return twist_state(s.x[0] - rho(s.x[1]), s.x[1]); };
    sys.metric = [](const State& a, const State& b) {
        return std::hypot(detail::circle_dist(a.x[0], b.x[0], kTwoPi), a.x[1] - b.x[1]);
    };
    sys.observable = [](const State& s) { return std::cos(s.x[0]); };
    sys.sample = [](Rng& rng) { return twist_state(rng.uniform(0.0, kTwoPi), rng.uniform()); };
    sys.neighbor = [](const State& s, double delta, Rng& rng) {
        const double h = delta / std::sqrt(2.0);
        return twist_state(s.x[0] + h * rng.uniform(-1.0, 1.0), std::clamp(s.x[1] + h * rng.uniform(-1.0, 1.0), 0.0, 1.0));
    };
    return sys;
}

/// Circular billiard S(r, phi) = (r + pi - 2 phi, phi) on S^1 x [-pi/2, pi/2].
inline State billiard_state(double r, double phi) { return coords({detail::wrap(r, kTwoPi), phi}); }

inline DynSystem make_circular_billiard() {
    DynSystem sys;
    sys.name = "billiard";
    sys.state_dim = 2;
    sys.invertible = true;
    sys.lipschitz_L = 1.0;
    sys.expansion = {1.0 + std::sqrt(5.0),
                     [](std::int64_t n) { return static_cast<double>(std::max<std::int64_t>(std::abs(n), 1)); }};
    sys.step = [](const State& s) { return billiard_state(s.x[0] + kPi - 2.0 * s.x[1], s.x[1]); };
    sys.inverse = [](const State& s) { return billiard_state(s.x[0] - kPi + 2.0 * s.x[1], s.x[1]); };
    sys.metric = [](const State& a, const State& b) {
        return std::hypot(detail::circle_dist(a.x[0], b.x[0], kTwoPi), a.x[1] - b.x[1]);
    };
    sys.observable = [](const State& s) { return std::cos(s.x[0]); };
    sys.sample = [](Rng& rng) { return billiard_state(rng.uniform(0.0, kTwoPi), rng.uniform(-kPi / 2, kPi / 2)); };
    sys.neighbor = [](const State& s, double delta, Rng& rng) {
        const double h = delta / std::sqrt(2.0);
        return billiard_state(s.x[0] + h * rng.uniform(-1.0, 1.0),
                              std::clamp(s.x[1] + h * rng.uniform(-1.0, 1.0), -kPi / 2, kPi / 2));
    };
    return sys;
}

// ---------------------------------------------------------------------------
// Potentials and contract verification
// ---------------------------------------------------------------------------

/// F(S^n omega) for n in [lo, hi], via the closed form when available and by
/// iterating the map otherwise.
inline std::vector<double> orbit_observable(const DynSystem& sys, const State& omega, std::int64_t lo,
                                            std::int64_t hi) {
    if (hi < lo) throw ValidationError("orbit window is empty");
    if (lo < 0 && !sys.invertible)
        throw ValidationError("system '" + sys.name + "' is not invertible; whole-lattice potentials need an inverse");
    if (sys.orbit_values) return sys.orbit_values(omega, lo, hi);
    std::vector<double> out(static_cast<std::size_t>(hi - lo + 1));
    if (hi >= 0) {
        State s = omega;
        for (std::int64_t n = 0; n <= hi; ++n) {
            if (n >= lo) out[static_cast<std::size_t>(n - lo)] = sys.observable(s);
            if (n < hi) s = sys.step(s);
        }
    }
    if (lo < 0) {
        State s = omega;
        for (std::int64_t n = -1; n >= lo; --n) {
            s = sys.inverse(s);
            if (n <= hi) out[static_cast<std::size_t>(n - lo)] = sys.observable(s);
        }
    }
    return out;
}

/// V(n) = lambda F(S^n omega) + W(n) for n in the window.
inline PotentialSequence potential(const DynSystem& sys, const State& omega, double lambda, SiteWindow window,
                                   const Perturbation& w = Perturbation::none()) {
    if (window.hi < window.lo) throw ValidationError("potential: empty site window");
    PotentialSequence pot;
    pot.first = window.lo;
    pot.lambda = lambda;
    pot.origin = omega;
    pot.values = orbit_observable(sys, omega, window.lo, window.hi);
    for (std::size_t i = 0; i < pot.values.size(); ++i) {
        const std::int64_t n = window.lo + static_cast<std::int64_t>(i);
        pot.values[i] = lambda * pot.values[i] + w.at(n);
    }
    return pot;
}

/// Potential given directly by values on [first, first + size).
inline PotentialSequence explicit_potential(std::vector<double> values, std::int64_t first = 1) {
    PotentialSequence pot;
    pot.first = first;
    pot.values = std::move(values);
    pot.lambda = 1.0;
    return pot;
}

/// Smallest p <= max_period with v[n + p] == v[n] for all n >= start.
inline std::optional<std::size_t> detect_period(const std::vector<double>& v, std::size_t max_period,
                                                std::size_t start = 0) {
    for (std::size_t p = 1; p <= max_period && start + p < v.size(); ++p) {
        bool ok = true;
        for (std::size_t n = start; n + p < v.size(); ++n) {
            if (v[n + p] != v[n]) {
                ok = false;
                break;
            }
        }
        if (ok) return p;
    }
    return std::nullopt;
}

struct ContractReport {
    double worst_lipschitz_ratio = 0.0;  ///< max |F(x)-F(y)| / d(x,y); compare with L
    double worst_expansion_ratio = 0.0;  ///< max d(S^n x, S^n y) / (C d(x,y) h(n)); compare with 1
    std::int64_t worst_expansion_n = 0;
    std::size_t pairs_checked = 0;
    std::size_t pairs_skipped = 0;  ///< zero-distance or out-of-domain pairs
    bool monotone_profile = true;
    bool pass = false;
};

/// Samples `n_pairs` pairs at distance <= delta_sample and records the worst
/// Lipschitz and orbit-separation ratios for 0 <= n <= n_max.
inline ContractReport verify_contracts(const DynSystem& sys, std::int64_t n_max, std::size_t n_pairs,
                                       std::uint64_t seed, double delta_sample = 1e-6) {
    if (n_pairs < 1) throw ValidationError("verify_contracts: n_pairs must be >= 1");
    ContractReport rep;
    for (std::int64_t n = 1; n <= n_max; ++n)
        if (sys.expansion.h(n) < sys.expansion.h(n - 1)) rep.monotone_profile = false;
    Rng rng(seed);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const State w = sys.sample(rng);
        const State t = sys.neighbor(w, delta_sample, rng);
        const double d0 = sys.metric(w, t);
        if (!(d0 > 0.0) || (sys.in_domain && (!sys.in_domain(w) || !sys.in_domain(t)))) {
            ++rep.pairs_skipped;
            continue;
        }
        rep.worst_lipschitz_ratio = std::max(rep.worst_lipschitz_ratio, std::abs(sys.observable(w) - sys.observable(t)) / d0);
        State a = w, b = t;
        double worst = 0.0;
        std::int64_t worst_n = 0;
        bool escaped = false;
        for (std::int64_t n = 0; n <= n_max; ++n) {
            if (n > 0) {
                a = sys.step(a);
                b = sys.step(b);
                if (sys.in_domain && (!sys.in_domain(a) || !sys.in_domain(b))) {
                    escaped = true;
                    break;
                }
            }
            const double ratio = sys.metric(a, b) / (sys.expansion.C * d0 * sys.expansion.h(n));
            if (ratio > worst) {
                worst = ratio;
                worst_n = n;
            }
        }
        if (escaped) {
            ++rep.pairs_skipped;
            continue;
        }
        ++rep.pairs_checked;
        if (worst > rep.worst_expansion_ratio) {
            rep.worst_expansion_ratio = worst;
            rep.worst_expansion_n = worst_n;
        }
    }
    constexpr double slack = 1.0 + 1e-9;
    rep.pass = rep.monotone_profile && rep.worst_lipschitz_ratio <= sys.lipschitz_L * slack &&
               rep.worst_expansion_ratio <= slack;
    return rep;
}

}  // namespace qbd
