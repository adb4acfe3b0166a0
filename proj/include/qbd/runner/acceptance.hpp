// Acceptance criteria 1-9. Criterion 10 (determinism) re-runs configs and
// lives in run.hpp.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "qbd/core.hpp"
#include "qbd/dynsys.hpp"
#include "qbd/evolve.hpp"
#include "qbd/operators.hpp"
#include "qbd/spectral.hpp"
#include "qbd/transfer.hpp"

namespace qbd {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    double seconds = 0.0;
    double budget = 0.0;  ///< seconds
    std::string detail;

    std::string line() const {
        char head[160];
        std::snprintf(head, sizeof head, "[%s] criterion %2d  %s: ", pass ? "PASS" : "FAIL", id, title.c_str());
        char tail[96];
        std::snprintf(tail, sizeof tail, " (%.1f s, budget %.0f s)", seconds, budget);
        return head + detail + tail;
    }
};

namespace accept {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}
inline std::string g3(double v) { return fmt("%.3g", v); }

/// Time `body`, which fills pass and detail; the budget is part of the verdict.
inline CriterionResult timed(int id, std::string title, double budget, const std::function<void(CriterionResult&)>& body) {
    CriterionResult r;
    r.id = id;
    r.title = std::move(title);
    r.budget = budget;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail += std::string(" error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.seconds > budget) {
        r.pass = false;
        r.detail += " over time budget";
    }
    return r;
}

/// Moment series over the leading T-grid prefix whose leak stays <= 1e-6.
/// One Abel profile per T serves all p.
inline std::vector<MomentSeries> valid_moments(const SpectralData& s, const std::vector<double>& ps,
                                               const std::vector<double>& Ts, std::int64_t margin) {
    std::vector<MomentSeries> out(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) out[k].p = ps[k];
    for (double T : Ts) {
        const auto one = moment_series(s, ps, {T}, margin);
        if (one[0].leak[0] > kLeakThreshold) break;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            out[k].T.push_back(T);
            out[k].M.push_back(one[k].M[0]);
            out[k].leak.push_back(one[k].leak[0]);
        }
    }
    return out;
}

inline PotentialSequence zeros(std::int64_t lo, std::int64_t hi) {
    return explicit_potential(std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 0.0), lo);
}
inline PotentialSequence period2(double lambda, std::int64_t lo, std::int64_t hi) {
    auto v = periodic_sequence_values({0.0, 1.0}, lo, hi);
    for (auto& x : v) x *= lambda;
    auto pot = explicit_potential(std::move(v), lo);
    pot.lambda = lambda;
    return pot;
}

inline const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

}  // namespace accept

// ---------------------------------------------------------------------------

inline CriterionResult criterion1() {
    return accept::timed(1, "SL(2) integrity", 60.0, [](CriterionResult& r) {
        using namespace accept;
        const std::int64_t N = 1000000;
        struct Family {
            std::string name;
            PotentialSequence pot;
            bool dirac = false;
        };
        std::vector<Family> fams;
        fams.push_back({"free", zeros(1, N)});
        fams.push_back({"periodic", period2(1.0, 1, N)});
        auto add = [&](const std::string& name, const DynSystem& sys, const State& om, double lambda, bool dirac = false) {
            fams.push_back({name, potential(sys, om, lambda, {1, N}), dirac});
        };
        add("doubling", make_doubling(), doubling_state(0.1234), 1.0);
        add("rotation", make_rotation(kGolden), rotation_state({0.3}, {kGolden}), 3.0);
        add("rotation_rational", make_rotation(2.0 / 3.0), rotation_rational_state(0.0, 2, 3), 3.0);
        add("anderson_uniform", make_anderson_shift(SiteDistribution::uniform(), 1), shift_realization(11), 3.0);
        const auto bern = make_anderson_shift(SiteDistribution::bernoulli({-1.0, 1.0}, {0.5, 0.5}), 2);
        add("anderson_bernoulli", bern, shift_realization(12), 1.0);
        add("logistic", make_chaotic_map(ChaoticKind::logistic), interval_state(0.3), 1.0);
        add("tcheb3", make_chaotic_map(ChaoticKind::tcheb3), interval_state(0.3), 1.0);
        add("tcheb4", make_chaotic_map(ChaoticKind::tcheb4), interval_state(0.3), 1.0);
        add("torus", make_chaotic_map(ChaoticKind::torus), torus_rational(1, 2, 7), 1.0);
        add("twist", make_twist_map({[](double x) { return 2.0 * x; }, 2.0}), twist_state(0.1, 0.37), 1.0);
        add("billiard", make_circular_billiard(), billiard_state(0.2, 0.3), 1.0);
        add("dirac_bernoulli", bern, shift_realization(13), 0.5, true);

        double worst_det = 0.0;
        std::string worst_at;
        for (const auto& f : fams) {
            for (double E : {-1.7, 0.3, 2.5}) {
                auto p = TransferProduct::identity(E);
                for (std::int64_t n = 1; n <= N; ++n) {
                    p.left_multiply(f.dirac ? dirac_step_matrix(E, 0.0, 1.0, f.pot.at(n), n) : step_matrix(E, f.pot.at(n)));
                    if ((n & (n - 1)) == 0 || n == N) {
                        const double d = std::abs(p.det() - 1.0);
                        if (!(d <= worst_det)) {
                            worst_det = std::isnan(d) ? INFINITY : d;
                            worst_at = f.name + " E=" + g3(E) + " n=" + std::to_string(n);
                        }
                    }
                }
            }
        }

        Rng rng(1);
        double worst_cocycle = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto& f = fams[static_cast<std::size_t>(i) % fams.size()];
            const double E = rng.uniform(-3.0, 3.0);
            const auto n = static_cast<std::int64_t>(1 + rng.below(5000));
            const auto m = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n) + 1));
            TransferProduct lhs, rhs;
            if (f.dirac) {
                auto between = TransferProduct::identity(E);
                for (std::int64_t k = m + 1; k <= n; ++k) between.left_multiply(dirac_step_matrix(E, 0.0, 1.0, f.pot.at(k), k));
                lhs = between.compose(dirac_transfer(E, 0.0, 1.0, f.pot, m));
                rhs = dirac_transfer(E, 0.0, 1.0, f.pot, n);
            } else {
                lhs = transfer_between(E, f.pot, n, m).compose(transfer_product(E, f.pot, m));
                rhs = transfer_product(E, f.pot, n);
            }
            const double d = TransferProduct::relative_distance(lhs, rhs);
            worst_cocycle = std::isnan(d) ? INFINITY : std::max(worst_cocycle, d);
        }
        r.pass = worst_det <= 1e-9 && worst_cocycle <= 1e-9;
        r.detail = "max |det-1| = " + g3(worst_det) + " (" + worst_at + ") over " + std::to_string(fams.size()) +
                   " families x 3 energies to n=1e6; cocycle max rel. distance = " + g3(worst_cocycle) +
                   " on 1000 triples (tol 1e-9)";
    });
}

inline CriterionResult criterion2() {
    return accept::timed(2, "perturbed-orbit transfer bound", 120.0, [](CriterionResult& r) {
        std::vector<std::pair<std::string, DynSystem>> fams;
        fams.push_back({"rotation", make_rotation(accept::kGolden)});
        fams.push_back({"doubling", make_doubling()});
        fams.push_back({"anderson", make_anderson_shift(SiteDistribution::uniform(), 9)});
        r.pass = true;
        for (auto& [name, sys] : fams) {
            Rng rng(42);
            int fails = 0;
            double worst = INFINITY;
            for (int i = 0; i < 1000; ++i) {
                const State om = sys.sample(rng);
                const double delta = std::pow(10.0, rng.uniform(-8.0, -1.0));
                const State th = sys.neighbor(om, delta, rng);
                const double lambda = rng.uniform(0.5, 3.0);
                const double E = rng.uniform(-3.0, 3.0);
                const auto N = static_cast<std::int64_t>(50 + rng.below(951));
                const auto rep = orbit_transfer_check(E, potential(sys, th, lambda, {1, N}), potential(sys, om, lambda, {1, N}), N);
                if (!rep.pass) ++fails;
                worst = std::min(worst, rep.worst_margin);
            }
            if (fails) r.pass = false;
            r.detail += name + ": " + std::to_string(fails) + "/1000 violations, min log-margin " + accept::g3(worst) + "; ";
        }
        r.detail += "slack 1e-9 relative";
    });
}

inline CriterionResult criterion3() {
    return accept::timed(3, "free/periodic ballistic transport", 600.0, [](CriterionResult& r) {
        using namespace accept;
        const std::int64_t N = 4001;
        const auto lattice = LatticeSpec::whole(N);
        const auto Ts = log_grid(10.0, 500.0, 16);
        struct Case {
            std::string name;
            PotentialSequence pot;
            double need;
        };
        const std::vector<Case> cases{{"free", zeros(-N, N), 0.9}, {"period-2", period2(1.0, -N, N), 0.85}};
        r.pass = true;
        for (const auto& c : cases) {
            const auto s = eigendecompose(build_schrodinger(lattice, c.pot));
            const auto series = moment_series(s, {2.0}, Ts, 50)[0];
            const auto fit = exponent_fit(series);
            double T_cross = NAN;
            for (std::size_t i = 0; i < series.T.size(); ++i)
                if (series.leak[i] >= kLeakThreshold) {
                    T_cross = series.T[i];
                    break;
                }
            const bool ok_beta = fit.beta_plus >= c.need;
            const bool ok_leak = fit.max_leak < kLeakThreshold;
            r.pass = r.pass && ok_beta && ok_leak;
            r.detail += c.name + ": beta+(2) = " + fmt("%.3f", fit.beta_plus) + (ok_beta ? " >= " : " < ") +
                        fmt("%.2f", c.need) + ", max leak = " + g3(fit.max_leak) +
                        (ok_leak ? " < 1e-6" : " >= 1e-6 from T = " + fmt("%.0f", T_cross)) + "; ";
        }
        r.detail += "N = 4001 (whole), T in [10, 500]";
    });
}

inline CriterionResult criterion4() {
    return accept::timed(4, "band scan vs trace bands", 300.0, [](CriterionResult& r) {
        using namespace accept;
        const double C = 1e3;
        const std::int64_t N_scan = 10000, N_long = 100000;
        std::vector<double> grid;
        for (int i = -3000; i <= 3000; ++i) grid.push_back(i * 1e-3);
        struct Case {
            std::string name;
            PotentialSequence pot;
            std::int64_t period;
        };
        const std::vector<Case> cases{{"zero", zeros(1, N_long), 1}, {"period-2", period2(1.0, 1, N_long), 2}};
        r.pass = true;
        for (const auto& c : cases) {
            const auto res = band_scan(c.pot, c.period, grid, N_scan, C);
            // 10 interior energies spread over the trace bands in proportion to their width.
            double total = 0.0;
            for (auto [lo, hi] : res.trace_bands) total += hi - lo;
            std::vector<double> probes;
            for (auto [lo, hi] : res.trace_bands) {
                const int k = std::max(1, static_cast<int>(std::lround(10.0 * (hi - lo) / total)));
                for (int i = 0; i < k; ++i) probes.push_back(lo + (hi - lo) * (i + 0.5) / k);
            }
            double worst = -INFINITY;
            for (double E : probes) worst = std::max(worst, norm_profile(E, c.pot, N_long).log_sup());
            const bool ok = res.disagreements_beyond_one_cell == 0 && !res.trace_bands.empty() && worst <= std::log(C) &&
                            probes.size() >= 10;
            r.pass = r.pass && ok;
            r.detail += c.name + ": " + std::to_string(res.trace_bands.size()) + " trace band(s), " +
                        std::to_string(res.windows.size()) + " bounded window(s), " +
                        std::to_string(res.disagreements_beyond_one_cell) + " disagreements beyond one cell, sup norm to n=1e5 at " +
                        std::to_string(probes.size()) + " energies = " + g3(std::exp(worst)) + " (C = 1e3); ";
        }
        r.detail += "grid 1e-3 on [-3, 3], scan horizon 1e4";
    });
}

inline CriterionResult criterion5() {
    return accept::timed(5, "Anderson localization signatures", 1200.0, [](CriterionResult& r) {
        using namespace accept;
        const std::int64_t N = 2001;
        const double lambda = 3.0;
        const auto lattice = LatticeSpec::whole(N);
        const auto sys = make_anderson_shift(SiteDistribution::uniform(), 1);
        const int seeds = 10;

        // Independent long realizations for the Lyapunov exponents.
        std::vector<PotentialSequence> lyap;
        for (int i = 0; i < 8; ++i) lyap.push_back(potential(sys, shift_realization(1000 + i), lambda, {1, 20000}));
        auto gamma = [&](double E) { return lyapunov(E, lyap, 20000).gamma; };

        double min_gamma = INFINITY, max_beta = -INFINITY;
        double worst_ratio_dev = 0.0;
        std::size_t indiv_in = 0, indiv_total = 0;
        double e_lo = INFINITY, e_hi = -INFINITY;
        std::vector<SpectralData> specs;
        for (int seed = 0; seed < seeds; ++seed) {
            const auto pot = potential(sys, shift_realization(static_cast<std::uint64_t>(seed)), lambda, lattice.window());
            specs.push_back(eigendecompose(build_schrodinger(lattice, pot)));
            e_lo = std::min(e_lo, specs.back().eigenvalues.front());
            e_hi = std::max(e_hi, specs.back().eigenvalues.back());
        }
        const double pad = 0.02 * (e_hi - e_lo);
        for (double E : linear_grid(e_lo + pad, e_hi - pad, 50)) min_gamma = std::min(min_gamma, gamma(E));

        const auto Ts = log_grid(10.0, 1000.0, 8);
        for (const auto& s : specs) {
            const auto fit = exponent_fit(moment_series(s, {2.0}, Ts, 50)[0]);
            max_beta = std::max(max_beta, fit.beta_plus);

            const std::size_t n = s.dim();
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t j = 2 * n / 5; j < 3 * n / 5; j += 4) {
                const auto d = eigenfunction_decay(s, j);
                const double ratio = d.rate / gamma(d.energy);
                sum += ratio;
                ++cnt;
                ++indiv_total;
                if (std::abs(ratio - 1.0) <= 0.3) ++indiv_in;
            }
            worst_ratio_dev = std::max(worst_ratio_dev, std::abs(sum / static_cast<double>(cnt) - 1.0));
        }
        const bool ok_g = min_gamma >= 0.05, ok_b = max_beta <= 0.3, ok_d = worst_ratio_dev <= 0.3;
        r.pass = ok_g && ok_b && ok_d;
        r.detail = "min Gamma on 50-point grid = " + fmt("%.3f", min_gamma) + (ok_g ? " >= 0.05" : " < 0.05") +
                   "; max beta+(2) over " + std::to_string(seeds) + " seeds = " + fmt("%.3f", max_beta) +
                   (ok_b ? " <= 0.3" : " > 0.3") + "; worst per-seed |mean rate/Gamma - 1| = " +
                   fmt("%.3f", worst_ratio_dev) + (ok_d ? " <= 0.3" : " > 0.3") + " (individual eigenpairs within 30%: " +
                   std::to_string(indiv_in) + "/" + std::to_string(indiv_total) + ")";
    });
}

inline CriterionResult criterion6() {
    return accept::timed(6, "almost Mathieu contrast", 900.0, [](CriterionResult& r) {
        using namespace accept;
        const double lambda = 3.0;
        const std::int64_t N = 2000;
        const auto lattice = LatticeSpec::whole(N);
        const auto Ts = log_grid(10.0, 1e5, 16);
        bool ok_a = true;
        std::string a;
        for (auto [p, q] : std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {3, 5}, {5, 8}}) {
            const auto sys = make_rotation(static_cast<double>(p) / q);
            const auto pot = potential(sys, rotation_rational_state(0.0, p, q), lambda, lattice.window());
            const auto s = eigendecompose(build_schrodinger(lattice, pot));
            const auto series = valid_moments(s, {2.0}, Ts, 50)[0];
            const auto fit = exponent_fit(series);
            ok_a = ok_a && fit.beta_plus >= 0.8;
            a += std::to_string(p) + "/" + std::to_string(q) + ": " + fmt("%.3f", fit.beta_plus) + " on T <= " +
                 fmt("%.0f", series.T.back()) + ", ";
        }

        // Golden alpha: in-spectrum energies are bulk eigenvalues of a truncation.
        const auto sys = make_rotation(kGolden);
        const auto trunc = LatticeSpec::whole(500);
        const auto s = eigendecompose(build_schrodinger(trunc, potential(sys, rotation_state({0.0}, {kGolden}), lambda, trunc.window())));
        std::vector<double> energies;
        for (int k = 0; k < 20; ++k) {
            for (std::size_t j = (2 * k + 1) * s.dim() / 40; j < s.dim(); ++j) {
                double edge = 0.0;
                for (std::size_t i = 0; i < s.dim(); ++i)
                    if (i < 20 || i + 20 >= s.dim()) edge += s.phi(j, i) * s.phi(j, i);
                if (edge < 1e-3) {
                    energies.push_back(s.eigenvalues[j]);
                    break;
                }
            }
        }
        const double target = std::log(lambda / 2.0);
        const std::int64_t NL = 100000;
        std::vector<PotentialSequence> pots;
        for (int i = 0; i < 8; ++i) pots.push_back(potential(sys, rotation_state({kTwoPi * i / 8.0 + 0.1}, {kGolden}), lambda, {1, NL}));
        double worst = 0.0;
        for (double E : energies) worst = std::max(worst, std::abs(lyapunov(E, pots, NL).gamma / target - 1.0));
        const bool ok_b = worst <= 0.1 && energies.size() == 20;
        r.pass = ok_a && ok_b;
        r.detail = "(a) beta+(2) " + a + "need >= 0.8; (b) golden alpha: max |Gamma/log(1.5) - 1| = " + fmt("%.4f", worst) +
                   " over " + std::to_string(energies.size()) + " in-spectrum energies (tol 0.1)";
    });
}

inline CriterionResult criterion7() {
    return accept::timed(7, "K-scaling vs beta+ and k_moments exactness", 600.0, [](CriterionResult& r) {
        using namespace accept;
        const std::int64_t N = 2000;
        const auto lattice = LatticeSpec::whole(N);
        std::vector<std::pair<std::string, PotentialSequence>> inst;
        inst.push_back({"free", zeros(-N, N)});
        inst.push_back({"period-2", period2(1.0, -N, N)});
        inst.push_back({"AM 2/3", potential(make_rotation(2.0 / 3.0), rotation_rational_state(0.0, 2, 3), 3.0, lattice.window())});
        inst.push_back({"Anderson", potential(make_anderson_shift(SiteDistribution::uniform(), 1), shift_realization(3), 3.0,
                                              lattice.window())});
        const auto Ts = log_grid(10.0, 1e4, 8);
        bool ok_k = true;
        double worst_gap = -INFINITY;
        std::string worst_at;
        for (const auto& [name, pot] : inst) {
            const auto s = eigendecompose(build_schrodinger(lattice, pot));
            const auto mu = AtomicMeasure::from(s);
            const auto series = valid_moments(s, {1.0, 2.0}, Ts, 50);
            for (const auto& se : series) {
                const auto fit = exponent_fit(se);
                // eps paired with the fitted time range, kept above the resolution floor.
                const double hi = 1.0 / se.T.front();
                double lo = std::max(3.0 * mu.resolution_floor(), 1.0 / se.T.back());
                lo = std::min(lo, hi * std::pow(10.0, -7.0 / 8.0));
                const auto prof = k_scaling(mu, 1.0 / (1.0 + se.p), log_grid(lo, hi, 8));
                const double gap = prof.exponent - fit.beta_plus;
                if (gap > worst_gap) {
                    worst_gap = gap;
                    worst_at = name + " p=" + fmt("%.0f", se.p) + " (K " + fmt("%.3f", prof.exponent) + " vs beta+ " +
                               fmt("%.3f", fit.beta_plus) + ")";
                }
                ok_k = ok_k && prof.exponent <= fit.beta_plus + 0.05;
            }
        }

        // Segment evaluation against a midpoint rule on 2^20 nodes; atoms and
        // eps on the node lattice make the rule exact for the step integrand.
        const int nodes = 1 << 20;
        const double h = 1.0 / nodes;
        Rng rng(2024);
        double worst_rel = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 1 + rng.below(50);
            std::vector<double> e(n), w(n);
            double tot = 0.0;
            for (auto& x : e) x = static_cast<double>(nodes / 4 + rng.below(nodes / 2)) / nodes;
            for (auto& x : w) tot += (x = rng.uniform() + 1e-3);
            for (auto& x : w) x /= tot;
            std::sort(e.begin(), e.end());
            const AtomicMeasure mu(e, w);
            const double eps = static_cast<double>(1 + rng.below(nodes / 8)) / nodes;
            const double q = rng.uniform(0.05, 0.95);
            CompensatedSum brute;
            for (int i = 0; i < nodes; ++i) {
                const double m = interval_mass(mu, (i + 0.5) * h, eps);
                if (m > 0.0) brute.add(std::pow(m, q));
            }
            const double exact = k_moments(mu, q, eps);
            worst_rel = std::max(worst_rel, std::abs(exact - brute.value() * h / eps) / exact);
        }
        const bool ok_q = worst_rel <= 1e-6;
        r.pass = ok_k && ok_q;
        r.detail = "max (K exponent - beta+) = " + fmt("%.3f", worst_gap) + " at " + worst_at +
                   " (need <= 0.05, 4 instances x p in {1,2}); k_moments vs brute force max rel. error = " + g3(worst_rel) +
                   " on 100 measures (tol 1e-6)";
    });
}

inline CriterionResult criterion8() {
    return accept::timed(8, "Dirac critical energies", 1200.0, [](CriterionResult& r) {
        using namespace accept;
        const double lambda = 0.5, c = 1.0;
        const auto crit = critical_energy_scan(c, {-lambda, lambda}, -3.0, 3.0);
        const auto sys = make_anderson_shift(SiteDistribution::bernoulli({-1.0, 1.0}, {0.5, 0.5}), 12);
        const std::int64_t NL = 100000;
        std::vector<PotentialSequence> reals;
        for (int i = 0; i < 10; ++i) reals.push_back(potential(sys, shift_realization(100 + static_cast<std::uint64_t>(i)), lambda, {1, NL}));

        double worst_norm = -INFINITY;
        for (const auto& ce : crit)
            for (const auto& pot : reals) {
                auto p = TransferProduct::identity(ce.energy);
                for (std::int64_t n = 1; n <= NL; ++n) {
                    p.left_multiply(dirac_step_matrix(ce.energy, 0.0, c, pot.at(n), n));
                    worst_norm = std::max(worst_norm, p.log_norm());
                }
            }
        double min_gamma = INFINITY;
        for (double E : linear_grid(-2.0, 2.0, 5)) {
            double g = 0.0;
            for (const auto& pot : reals) g += dirac_transfer(E, 0.0, c, pot, NL).log_norm() / static_cast<double>(NL);
            min_gamma = std::min(min_gamma, g / static_cast<double>(reals.size()));
        }

        // Transport probe from delta_1 (upper component) on the half lattice.
        const std::int64_t N = 3000;
        const auto lattice = LatticeSpec::half(N);
        const auto Ts = log_grid(10.0, 1e4, 8);
        double min_beta = INFINITY;
        std::string probe;
        for (std::uint64_t seed : {0ULL, 1ULL}) {
            const auto pot = potential(sys, shift_realization(seed), lambda, lattice.window());
            const auto s = eigendecompose(build_dirac(lattice, 0.0, c, pot));
            const auto series = valid_moments(s, {2.0}, Ts, 50)[0];
            const auto fit = exponent_fit(series);
            min_beta = std::min(min_beta, fit.beta_minus);
            probe += fmt("%.3f", fit.beta_minus) + " (T <= " + fmt("%.0f", series.T.back()) + ") ";
        }
        const bool ok_c = !crit.empty(), ok_n = worst_norm <= std::log(1e3), ok_g = min_gamma >= 0.02, ok_b = min_beta >= 0.6;
        r.pass = ok_c && ok_n && ok_g && ok_b;
        std::string es;
        for (const auto& ce : crit) es += fmt("%.6g", ce.energy) + " ";
        r.detail = std::to_string(crit.size()) + " critical energies { " + es + "}; max norm to n=1e5 over 10 realizations = " +
                   g3(std::exp(worst_norm)) + (ok_n ? " <= 1e3" : " > 1e3") + "; min Gamma at E in {-2,-1,0,1,2} = " +
                   fmt("%.4f", min_gamma) + (ok_g ? " >= 0.02" : " < 0.02") + "; beta-(2) probe " + probe +
                   (ok_b ? ">= 0.6" : "(need >= 0.6)");
    });
}

inline CriterionResult criterion9() {
    return accept::timed(9, "rank-one interlacing and G", 120.0, [](CriterionResult& r) {
        using namespace accept;
        const std::int64_t N = 256;
        const auto lattice = LatticeSpec::half(N);
        Rng rng(9);
        int fails = 0;
        std::size_t strict = 0;
        double worst_div = INFINITY;
        bool g_positive = true;
        std::size_t excluded = 0;
        for (int i = 0; i < 100; ++i) {
            std::vector<double> v(N);
            const double lambda = rng.uniform(0.0, 4.0);
            for (auto& x : v) x = lambda * rng.uniform(-1.0, 1.0);
            const double kappa = std::pow(10.0, rng.uniform(-2.0, 1.0));
            const auto pot = explicit_potential(v, 1);
            const auto base = eigendecompose(build_schrodinger(lattice, pot));
            const auto pert = eigendecompose(with_rank_one(build_schrodinger(lattice, pot), kappa));
            const auto rep = rank_one_interlacing(base, pert, kappa);
            if (!rep.pass) ++fails;
            strict += rep.strict_checked;

            const auto mu = AtomicMeasure::from(base);
            for (std::size_t j = 0; j < mu.size(); j += 17) {
                if (mu.weights()[j] <= 0.0) continue;
                for (double h : {1e-2, 1e-4}) {
                    for (const auto& g : g_function(mu, {mu.atoms()[j] - h, mu.atoms()[j] + h})) {
                        if (g.flagged) {  // another atom happens to sit within the exclusion radius
                            ++excluded;
                            continue;
                        }
                        if (!(g.G > 0.0)) g_positive = false;
                        const double d = g.E - mu.atoms()[j];  // the distance actually realized
                        worst_div = std::min(worst_div, g.G / (mu.weights()[j] / (d * d)));
                    }
                }
            }
        }
        const auto one = g_function(AtomicMeasure({0.0}, {1.0}), {0.5, -2.0, 4.0});
        const auto two = g_function(AtomicMeasure({-1.0, 1.0}, {0.5, 0.5}), {0.0});
        const bool closed = one[0].G == 4.0 && one[1].G == 0.25 && one[2].G == 1.0 / 16.0 && two[0].G == 1.0;
        r.pass = fails == 0 && closed && g_positive && worst_div >= 1.0;
        r.detail = std::to_string(fails) + "/100 interlacing failures (" + std::to_string(strict) +
                   " strict checks); G closed forms " + (closed ? "exact" : "MISMATCH") +
                   "; min G(E_j +- h) / (w_j/h^2) = " + fmt("%.4f", worst_div) + " (need >= 1, " +
                   std::to_string(excluded) + " probes excluded near another atom)";
    });
}

/// Criteria 1-9 by number.
inline CriterionResult run_criterion(int id) {
    switch (id) {
        case 1: return criterion1();
        case 2: return criterion2();
        case 3: return criterion3();
        case 4: return criterion4();
        case 5: return criterion5();
        case 6: return criterion6();
        case 7: return criterion7();
        case 8: return criterion8();
        case 9: return criterion9();
    }
    throw ValidationError("unknown acceptance criterion " + std::to_string(id));
}

}  // namespace qbd
