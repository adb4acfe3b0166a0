// Finite truncations of the Schrodinger and discrete Dirac operators and
// their eigendecompositions.
//
// Both operators are stored as real symmetric tridiagonal matrices. For the
// Dirac operator the spinor components are interleaved site by site,
// (u_1, v_1, u_2, v_2, ...), in which ordering the blocked operator
//
//     [ m c^2 + V    c D^*      ]
//     [ c D          -m c^2 + V ]
//
// with (D psi)(n) = psi(n+1) - psi(n) is tridiagonal with off-diagonal
// entries alternating -c (u_n, v_n) and +c (v_n, u_{n+1}).
#pragma once

#include <lapacke.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/dynsys.hpp"

namespace qbd {

enum class LatticeKind { half, whole };

/// Dirichlet truncation: sites 1..N (half lattice) or -N..N (whole lattice).
struct LatticeSpec {
    LatticeKind kind = LatticeKind::half;
    std::int64_t size = 2;

    static LatticeSpec half(std::int64_t n) { return {LatticeKind::half, n}; }
    static LatticeSpec whole(std::int64_t n) { return {LatticeKind::whole, n}; }

    std::int64_t first_site() const noexcept { return kind == LatticeKind::half ? 1 : -size; }
    std::int64_t last_site() const noexcept { return size; }
    std::int64_t num_sites() const noexcept { return last_site() - first_site() + 1; }
    SiteWindow window() const noexcept { return {first_site(), last_site()}; }

    void validate(std::int64_t min_size = 2) const {
        if (size < min_size) throw ValidationError("lattice size must be >= " + std::to_string(min_size));
    }
};

/// Real symmetric tridiagonal matrix: diag[i], off[i] = H(i, i+1).
struct SymTridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t dim() const noexcept { return diag.size(); }

    std::vector<double> apply(const std::vector<double>& x) const {
        const std::size_t n = dim();
        if (x.size() != n) throw ValidationError("SymTridiagonal::apply: size mismatch");
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += off[i - 1] * x[i - 1];
            if (i + 1 < n) s += off[i] * x[i + 1];
            y[i] = s;
        }
        return y;
    }
    /// Row-major dense copy (tests and small diagnostics).
    std::vector<double> dense() const {
        const std::size_t n = dim();
        std::vector<double> m(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            m[i * n + i] = diag[i];
            if (i + 1 < n) m[i * n + i + 1] = m[(i + 1) * n + i] = off[i];
        }
        return m;
    }
    /// Gershgorin bound on the spectral radius.
    double gershgorin() const {
        double r = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            double s = std::abs(diag[i]);
            if (i > 0) s += std::abs(off[i - 1]);
            if (i + 1 < dim()) s += std::abs(off[i]);
            r = std::max(r, s);
        }
        return r;
    }
};

struct SchrodingerMatrix {
    LatticeSpec lattice;
    SymTridiagonal band;

    std::size_t dim() const noexcept { return band.dim(); }
    /// Physical site of matrix index i.
    std::int64_t site(std::size_t i) const noexcept { return lattice.first_site() + static_cast<std::int64_t>(i); }
    std::size_t index_of(std::int64_t n) const { return static_cast<std::size_t>(n - lattice.first_site()); }
};

struct DiracMatrix {
    LatticeSpec lattice;
    double mass = 0.0;
    double c = 1.0;
    SymTridiagonal band;

    std::size_t dim() const noexcept { return band.dim(); }
    std::int64_t site(std::size_t i) const noexcept {
        return lattice.first_site() + static_cast<std::int64_t>(i / 2);
    }
    /// Index of component `comp` (0 = upper, 1 = lower) at site n.
    std::size_t index_of(std::int64_t n, int comp) const {
        return 2 * static_cast<std::size_t>(n - lattice.first_site()) + static_cast<std::size_t>(comp);
    }
};

namespace detail {

inline void check_window(const LatticeSpec& lattice, const PotentialSequence& pot) {
    if (!pot.contains(lattice.first_site()) || !pot.contains(lattice.last_site()))
        throw ValidationError("potential window [" + std::to_string(pot.first) + ", " + std::to_string(pot.last()) +
                              "] does not cover lattice sites [" + std::to_string(lattice.first_site()) + ", " +
                              std::to_string(lattice.last_site()) + "]");
}

}  // namespace detail

/// (H psi)(n) = psi(n+1) + psi(n-1) + V(n) psi(n) with Dirichlet ends.
inline SchrodingerMatrix build_schrodinger(const LatticeSpec& lattice, const PotentialSequence& pot) {
    lattice.validate(1);
    detail::check_window(lattice, pot);
    SchrodingerMatrix h{lattice, {}};
    const auto n = static_cast<std::size_t>(lattice.num_sites());
    h.band.diag.resize(n);
    h.band.off.assign(n > 0 ? n - 1 : 0, 1.0);
    for (std::size_t i = 0; i < n; ++i) h.band.diag[i] = pot.at(h.site(i));
    return h;
}

/// Adds kappa <delta_1, .> delta_1 to an existing matrix.
inline SchrodingerMatrix with_rank_one(SchrodingerMatrix h, double kappa) {
    h.band.diag[h.index_of(1)] += kappa;
    return h;
}

inline DiracMatrix build_dirac(const LatticeSpec& lattice, double mass, double c, const PotentialSequence& pot) {
    if (!(mass >= 0.0)) throw ValidationError("Dirac operator needs mass m >= 0");
    if (!(c > 0.0)) throw ValidationError("Dirac operator needs speed of light c > 0");
    lattice.validate(1);
    detail::check_window(lattice, pot);
    DiracMatrix d{lattice, mass, c, {}};
    const auto sites = static_cast<std::size_t>(lattice.num_sites());
    const double mc2 = mass * c * c;
    d.band.diag.resize(2 * sites);
    d.band.off.resize(2 * sites - 1);
    for (std::size_t s = 0; s < sites; ++s) {
        const double v = pot.at(lattice.first_site() + static_cast<std::int64_t>(s));
        d.band.diag[2 * s] = mc2 + v;
        d.band.diag[2 * s + 1] = -mc2 + v;
        d.band.off[2 * s] = -c;
        if (2 * s + 1 < d.band.off.size()) d.band.off[2 * s + 1] = c;
    }
    return d;
}

/// Eigenpairs of a truncation together with the spectral measure of the
/// initial state psi0: atoms E_j with weights w_j = |<phi_j, psi0>|^2.
struct SpectralData {
    std::vector<double> eigenvalues;   ///< ascending
    std::vector<double> eigenvectors;  ///< column-major, dim x dim; column j is phi_j
    std::vector<double> amplitudes;    ///< c_j = <phi_j, psi0>
    std::vector<double> weights;       ///< w_j = c_j^2
    std::vector<std::int64_t> sites;   ///< physical site of each matrix index
    std::vector<double> psi0;          ///< initial state
    SymTridiagonal band;               ///< the decomposed matrix
    LatticeSpec lattice;

    std::size_t dim() const noexcept { return eigenvalues.size(); }
    double phi(std::size_t j, std::size_t i) const noexcept { return eigenvectors[j * dim() + i]; }
    const double* column(std::size_t j) const noexcept { return eigenvectors.data() + j * dim(); }
    double spectral_width() const {
        return eigenvalues.empty() ? 0.0 : eigenvalues.back() - eigenvalues.front();
    }
};

inline constexpr std::size_t kDefaultMaxDim = 8192;

/// Full eigendecomposition of a symmetric tridiagonal matrix (MRRR, with a
/// divide-and-conquer fallback). `psi0` defaults to the first basis vector.
inline SpectralData eigendecompose_band(const SymTridiagonal& band, std::vector<double> psi0,
                                        std::size_t max_dim = kDefaultMaxDim) {
    const std::size_t n = band.dim();
    if (n == 0) throw ValidationError("eigendecompose: empty matrix");
    if (n > max_dim)
        throw ValidationError("eigendecompose: dimension " + std::to_string(n) + " exceeds the configured maximum " +
                              std::to_string(max_dim));
    if (psi0.size() != n) throw ValidationError("eigendecompose: initial state has wrong dimension");

    SpectralData out;
    out.band = band;
    out.eigenvalues.resize(n);
    out.eigenvectors.assign(n * n, 0.0);
    const auto ln = static_cast<lapack_int>(n);

    std::vector<double> d = band.diag;
    std::vector<double> e(n, 0.0);
    std::copy(band.off.begin(), band.off.end(), e.begin());
    lapack_int m = 0;
    std::vector<lapack_int> isuppz(2 * n);
    lapack_logical tryrac = 1;
    lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'A', ln, d.data(), e.data(), 0.0, 0.0, 0, 0, &m,
                                     out.eigenvalues.data(), out.eigenvectors.data(), ln, ln, isuppz.data(), &tryrac);
    if (info != 0 || m != ln) {
        d = band.diag;
        std::fill(e.begin(), e.end(), 0.0);
        std::copy(band.off.begin(), band.off.end(), e.begin());
        const lapack_int info2 = LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', ln, d.data(), e.data(), out.eigenvectors.data(), ln);
        if (info2 != 0) {
            std::ostringstream msg;
            msg << "eigendecompose: LAPACK failure (dstemr info " << info << ", dstevd info " << info2
                << ") for dimension " << n << ", Gershgorin bound " << band.gershgorin();
            throw NumericalError(msg.str());
        }
        out.eigenvalues = d;
    }

    double norm2 = 0.0;
    for (double v : psi0) norm2 += v * v;
    if (!(norm2 > 0.0)) throw ValidationError("eigendecompose: initial state is zero");
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : psi0) v *= inv;

    out.amplitudes.resize(n);
    out.weights.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* col = out.column(j);
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (psi0[i] != 0.0) c += col[i] * psi0[i];
        out.amplitudes[j] = c;
        out.weights[j] = c * c;
    }
    out.psi0 = std::move(psi0);
    return out;
}

inline SpectralData eigendecompose(const SchrodingerMatrix& h, std::size_t max_dim = kDefaultMaxDim) {
    std::vector<double> psi0(h.dim(), 0.0);
    if (h.lattice.first_site() > 1 || h.lattice.last_site() < 1)
        throw ValidationError("eigendecompose: lattice does not contain site 1");
    psi0[h.index_of(1)] = 1.0;
    auto out = eigendecompose_band(h.band, std::move(psi0), max_dim);
    out.lattice = h.lattice;
    out.sites.resize(h.dim());
    for (std::size_t i = 0; i < h.dim(); ++i) out.sites[i] = h.site(i);
    return out;
}

/// Initial spinor at site 1: (upper, lower) amplitudes, normalized internally.
struct Spinor {
    double upper = 1.0;
    double lower = 0.0;
};

inline SpectralData eigendecompose(const DiracMatrix& h, Spinor initial = {}, std::size_t max_dim = kDefaultMaxDim) {
    std::vector<double> psi0(h.dim(), 0.0);
    if (h.lattice.first_site() > 1 || h.lattice.last_site() < 1)
        throw ValidationError("eigendecompose: lattice does not contain site 1");
    psi0[h.index_of(1, 0)] = initial.upper;
    psi0[h.index_of(1, 1)] = initial.lower;
    auto out = eigendecompose_band(h.band, std::move(psi0), max_dim);
    out.lattice = h.lattice;
    out.sites.resize(h.dim());
    for (std::size_t i = 0; i < h.dim(); ++i) out.sites[i] = h.site(i);
    return out;
}

struct DecompositionResiduals {
    double weight_sum_error = 0.0;    ///< |sum_j w_j - 1|
    double orthonormality = 0.0;      ///< max |Phi^T Phi - I|
    double reconstruction = 0.0;      ///< max |sum_j E_j phi_j phi_j^T - H|
};

/// O(N^3) residuals; intended for tests and small diagnostics.
inline DecompositionResiduals residuals(const SpectralData& s) {
    DecompositionResiduals r;
    const std::size_t n = s.dim();
    double wsum = 0.0;
    for (double w : s.weights) wsum += w;
    r.weight_sum_error = std::abs(wsum - 1.0);
    const auto h = s.band.dense();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            double dot = 0.0, rec = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                dot += s.phi(a, j) * s.phi(b, j);
                rec += s.eigenvalues[j] * s.phi(j, a) * s.phi(j, b);
            }
            r.orthonormality = std::max(r.orthonormality, std::abs(dot - (a == b ? 1.0 : 0.0)));
            r.reconstruction = std::max(r.reconstruction, std::abs(rec - h[a * n + b]));
        }
    }
    return r;
}

struct InterlacingReport {
    bool pass = true;
    std::size_t strict_checked = 0;  ///< eigenvalues whose overlap is numerically resolvable
    double worst_violation = 0.0;
};

/// For kappa > 0: E_j(H) <= E_j(H + kappa P) <= E_{j+1}(H), strict where the
/// overlap is nonzero. In double precision a shift of order kappa w_j is only
/// resolvable when kappa w_j is well above rounding, so strictness is checked
/// for kappa w_j >= resolvable.
inline InterlacingReport rank_one_interlacing(const SpectralData& base, const SpectralData& perturbed, double kappa,
                                              double resolvable = 1e-10, double tol = 1e-12) {
    if (!(kappa > 0.0)) throw ValidationError("rank_one_interlacing: kappa must be > 0");
    if (base.dim() != perturbed.dim()) throw ValidationError("rank_one_interlacing: dimension mismatch");
    InterlacingReport rep;
    const std::size_t n = base.dim();
    auto violate = [&](double amount) {
        rep.worst_violation = std::max(rep.worst_violation, amount);
        rep.pass = false;
    };
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = base.eigenvalues[j];
        const double e = perturbed.eigenvalues[j];
        if (e < lo - tol) violate(lo - e);
        if (j + 1 < n && e > base.eigenvalues[j + 1] + tol) violate(e - base.eigenvalues[j + 1]);
        if (kappa * base.weights[j] >= resolvable) {
            ++rep.strict_checked;
            if (!(e > lo)) violate(lo - e);
        }
        if (j + 1 < n && kappa * base.weights[j + 1] >= resolvable) {
            if (!(e < base.eigenvalues[j + 1])) violate(e - base.eigenvalues[j + 1]);
        }
    }
    return rep;
}

/// Debug dump of the tridiagonal bands: index, site, diag, off.
inline void write_bands_csv(const std::string& path, const SymTridiagonal& band, const std::vector<std::int64_t>& sites) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path);
    os << "index,site,diag,off\n" << std::setprecision(17);
    for (std::size_t i = 0; i < band.dim(); ++i) {
        os << i << ',' << (i < sites.size() ? sites[i] : 0) << ',' << band.diag[i] << ',';
        if (i < band.off.size()) os << band.off[i];
        os << '\n';
    }
}

}  // namespace qbd
