// Shared primitives: error types, reproducible random numbers, 2x2 matrices.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbd {

/// Invalid input: bad parameters, malformed configs, violated preconditions.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (eigensolver, degenerate recursion, ...).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer. Used both as a stateless hash (counter-based draws)
/// and as the increment of `Rng`.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stateless uniform draw in [0,1) for the pair (seed, index).
inline double hashed_uniform(std::uint64_t seed, std::int64_t index) noexcept {
    const auto h = mix64(seed ^ mix64(static_cast<std::uint64_t>(index)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Small deterministic generator. Platform-independent output for a given
/// seed, unlike the std distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        auto z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept { return n == 0 ? 0 : next_u64() % n; }
    int sign() noexcept { return (next_u64() >> 63) ? 1 : -1; }
    /// Independent child stream, e.g. one per realization.
    Rng split(std::uint64_t salt) const noexcept { return Rng(mix64(state_ ^ mix64(salt))); }

  private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// 2x2 real matrices
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Row-major [[a, b], [c, d]].
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }

    constexpr double det() const noexcept { return a * d - b * c; }
    constexpr double trace() const noexcept { return a + d; }
    double max_abs() const noexcept {
        return std::max(std::max(std::abs(a), std::abs(b)), std::max(std::abs(c), std::abs(d)));
    }
    /// Largest singular value, closed form.
    double spectral_norm() const noexcept {
        const double s = std::hypot(a + d, c - b);
        const double t = std::hypot(a - d, b + c);
        return 0.5 * (s + t);
    }
    /// Inverse via the adjugate.
    Mat2 inverse() const {
        const double dt = det();
        if (dt == 0.0) throw NumericalError("Mat2::inverse: singular matrix");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }
    friend constexpr Mat2 operator*(const Mat2& x, const Mat2& y) noexcept {
        return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
                x.c * y.b + x.d * y.d};
    }
    friend constexpr Vec2 operator*(const Mat2& m, const Vec2& v) noexcept {
        return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
    }
    friend constexpr Mat2 operator*(double s, const Mat2& m) noexcept {
        return {s * m.a, s * m.b, s * m.c, s * m.d};
    }
    friend constexpr Mat2 operator-(const Mat2& x, const Mat2& y) noexcept {
        return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
    }
    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// Max-abs entry norm of a difference, for exact comparisons in tests.
inline double max_abs_diff(const Mat2& x, const Mat2& y) noexcept { return (x - y).max_abs(); }

/// Log-spaced grid with `per_decade` points per decade, both ends included.
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
    if (!(lo > 0.0) || !(hi >= lo) || per_decade < 1)
        throw ValidationError("log_grid: need 0 < lo <= hi and per_decade >= 1");
    const double decades = std::log10(hi / lo);
    const int n = std::max(1, static_cast<int>(std::ceil(decades * per_decade - 1e-9)));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));
    out.back() = hi;
    return out;
}

/// Uniform grid of `count` points on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, int count) {
    if (count < 1) throw ValidationError("linear_grid: count must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
    return out;
}

/// Ordinary least-squares slope of y against x.
inline double ls_slope(const double* x, const double* y, std::size_t n) {
    if (n < 2) throw ValidationError("ls_slope: need at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw ValidationError("ls_slope: degenerate abscissae");
    return sxy / sxx;
}

}  // namespace qbd
