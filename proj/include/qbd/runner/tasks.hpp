// Task execution: each task turns a validated config into CSV tables and a
// few summary metrics.
#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "qbd/evolve.hpp"
#include "qbd/runner/acceptance.hpp"
#include "qbd/runner/config.hpp"
#include "qbd/runner/io.hpp"
#include "qbd/spectral.hpp"
#include "qbd/transfer.hpp"

namespace qbd {

/// Ordered by exit-code precedence once mapped: validation 1, acceptance 2, numerical 3.
enum class TaskStatus { ok, validation_error, acceptance_failure, numerical_failure };

inline const char* status_name(TaskStatus s) {
    switch (s) {
        case TaskStatus::ok: return "ok";
        case TaskStatus::validation_error: return "validation_error";
        case TaskStatus::acceptance_failure: return "acceptance_failure";
        case TaskStatus::numerical_failure: return "numerical_failure";
    }
    return "?";
}

inline int exit_code(TaskStatus s) {
    switch (s) {
        case TaskStatus::ok: return 0;
        case TaskStatus::validation_error: return 1;
        case TaskStatus::acceptance_failure: return 2;
        case TaskStatus::numerical_failure: return 3;
    }
    return 3;
}

/// Combine exit codes: 1 beats 2 beats 3 beats 0.
inline int merge_exit(int a, int b) {
    for (int c : {1, 2, 3})
        if (a == c || b == c) return c;
    return 0;
}

struct Metric {
    std::string name;
    double value = 0.0;
};

struct TaskOutput {
    std::string type;
    std::vector<Table> tables;
    std::vector<Metric> metrics;
    TaskStatus status = TaskStatus::ok;
    std::string message;
};

class TaskContext {
  public:
    explicit TaskContext(const ExperimentConfig& c) : cfg(c) {}

    const ExperimentConfig& cfg;
    std::ostream* log = nullptr;
    /// Criterion 10 needs the runner; it is injected by run.hpp.
    std::function<CriterionResult()> determinism;

    /// Eigendecomposition of the configured operator, shared by all tasks.
    const SpectralData& spectrum() {
        if (!spec_) spec_ = decompose(cfg);
        return *spec_;
    }

  private:
    std::optional<SpectralData> spec_;
};

namespace tasks {

inline double b2d(bool b) { return b ? 1.0 : 0.0; }
inline std::int64_t i64(std::size_t v) { return static_cast<std::int64_t>(v); }

/// Evaluate f(i) for i < n in parallel; each slot is written once, so the
/// result does not depend on scheduling.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
    std::vector<T> out(n);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) out[i] = f(i);
    });
    return out;
}

inline void spectrum(TaskContext& ctx, TaskOutput& out) {
    const auto& s = ctx.spectrum();
    Table t("spectrum", {"j", "E", "weight"});
    double wsum = 0.0;
    for (std::size_t j = 0; j < s.dim(); ++j) {
        t.add({i64(j), s.eigenvalues[j], s.weights[j]});
        wsum += s.weights[j];
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"dim", static_cast<double>(s.dim())},
                   {"E_min", s.eigenvalues.front()},
                   {"E_max", s.eigenvalues.back()},
                   {"weight_sum_error", std::abs(wsum - 1.0)}};
}

inline void moments(TaskContext& ctx, const MomentsTask& task, TaskOutput& out) {
    const auto& s = ctx.spectrum();
    const auto series = moment_series(s, task.p, task.T.values(), task.margin);
    Table t("moments", {"p", "T", "M", "leak"});
    for (const auto& se : series)
        for (std::size_t i = 0; i < se.T.size(); ++i) t.add({se.p, se.T[i], se.M[i], se.leak[i]});
    out.tables.push_back(std::move(t));

    Table f("fit", {"p", "beta_plus", "beta_minus", "T_min", "T_max", "points", "max_leak", "boundary_contaminated", "clipped"});
    Table w("windows", {"p", "T_lo", "T_hi", "slope"});
    for (const auto& se : series) {
        MomentSeries used = se;
        if (task.fit_valid_only) {
            std::size_t k = 0;
            while (k < se.T.size() && se.leak[k] <= kLeakThreshold) ++k;
            used.T.resize(k);
            used.M.resize(k);
            used.leak.resize(k);
        }
        if (used.T.size() < 8)
            throw NumericalError("moments: only " + std::to_string(used.T.size()) +
                                 " T values have leak <= 1e-6 (need 8 to fit); enlarge the lattice or lower T.hi");
        const auto fit = exponent_fit(used);
        f.add({se.p, fit.beta_plus, fit.beta_minus, fit.T_min, fit.T_max, i64(used.T.size()), fit.max_leak,
               b2d(fit.boundary_contaminated), b2d(fit.clipped)});
        for (const auto& ws : fit.windows) w.add({se.p, ws.T_lo, ws.T_hi, ws.slope});
        const auto tag = format_double(se.p);
        out.metrics.push_back({"beta_plus_p" + tag, fit.beta_plus});
        out.metrics.push_back({"beta_minus_p" + tag, fit.beta_minus});
        out.metrics.push_back({"T_fit_max_p" + tag, fit.T_max});
    }
    out.tables.push_back(std::move(f));
    out.tables.push_back(std::move(w));
}

inline std::vector<PotentialSequence> realizations(const ExperimentConfig& c, std::size_t count, std::int64_t N) {
    std::vector<PotentialSequence> pots;
    for (std::size_t i = 0; i < count; ++i) pots.push_back(build_potential(c, {1, N}, i));
    return pots;
}

inline void lyapunov_task(TaskContext& ctx, const LyapunovTask& task, TaskOutput& out) {
    const auto pots = realizations(ctx.cfg, task.samples, task.N);
    const auto est = parallel_map<LyapunovEstimate>(task.energies.size(),
                                                    [&](std::size_t i) { return lyapunov(task.energies[i], pots, task.N); });
    Table t("lyapunov", {"E", "gamma", "stderr", "N", "samples"});
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& e : est) {
        t.add({e.energy, e.gamma, e.stderr_, e.N, i64(e.samples)});
        lo = std::min(lo, e.gamma);
        hi = std::max(hi, e.gamma);
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"gamma_min", lo}, {"gamma_max", hi}};
}

inline void band_scan_task(TaskContext& ctx, const BandScanTask& task, TaskOutput& out) {
    const auto& c = ctx.cfg;
    std::int64_t period = task.period;
    if (period == 0) period = c.system.name == "periodic" ? static_cast<std::int64_t>(c.system.values.size()) : 1;
    const auto pot = build_potential(c, {1, std::max(task.N, period)});
    std::vector<double> grid;
    const auto n = static_cast<std::int64_t>(std::floor((task.E_hi - task.E_lo) / task.step + 1e-9));
    for (std::int64_t i = 0; i <= n; ++i) grid.push_back(task.E_lo + static_cast<double>(i) * task.step);
    const auto res = band_scan(pot, period, grid, task.N, task.threshold);

    Table t("scan", {"E", "trace", "log_sup", "in_trace_band", "bounded"});
    for (std::size_t i = 0; i < grid.size(); ++i)
        t.add({grid[i], res.trace[i], res.log_sup[i], i64(std::abs(res.trace[i]) < 2.0),
               i64(res.log_sup[i] <= std::log(res.threshold))});
    Table w("windows", {"kind", "E_lo", "E_hi"});
    for (auto [lo, hi] : res.trace_bands) w.add({std::string("trace"), lo, hi});
    for (const auto& b : res.windows) w.add({std::string("bounded"), b.E_lo, b.E_hi});
    out.tables.push_back(std::move(t));
    out.tables.push_back(std::move(w));
    out.metrics = {{"threshold", res.threshold},
                   {"trace_bands", static_cast<double>(res.trace_bands.size())},
                   {"bounded_windows", static_cast<double>(res.windows.size())},
                   {"disagreements_beyond_one_cell", static_cast<double>(res.disagreements_beyond_one_cell)}};
}

inline void k_moments_task(TaskContext& ctx, const KMomentsTask& task, TaskOutput& out) {
    const auto mu = AtomicMeasure::from(ctx.spectrum());
    Table t("k_moments", {"q", "eps", "K", "pointwise_exponent"});
    Table w("windows", {"q", "eps_lo", "eps_hi", "exponent"});
    for (double q : task.q) {
        const auto prof = k_scaling(mu, q, task.eps.values(), task.window);
        for (std::size_t i = 0; i < prof.eps.size(); ++i) t.add({q, prof.eps[i], prof.K[i], prof.pointwise[i]});
        for (const auto& s : prof.windows) w.add({q, s.eps_lo, s.eps_hi, s.exponent});
        const auto tag = format_double(q);
        out.metrics.push_back({"exponent_q" + tag, prof.exponent});
        out.metrics.push_back({"below_floor_q" + tag, b2d(prof.below_floor)});
        out.metrics.push_back({"plateau_q" + tag, b2d(prof.plateau)});
    }
    out.metrics.push_back({"eps_floor", mu.resolution_floor()});
    out.tables.push_back(std::move(t));
    out.tables.push_back(std::move(w));
}

inline void g_function_task(TaskContext& ctx, const GFunctionTask& task, TaskOutput& out) {
    const auto mu = AtomicMeasure::from(ctx.spectrum());
    Table t("g_function", {"E", "G", "flagged", "nearest_atom_distance"});
    std::size_t flagged = 0;
    for (const auto& g : g_function(mu, task.energies)) {
        t.add({g.E, g.G, i64(g.flagged), g.nearest});
        flagged += g.flagged;
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"flagged", static_cast<double>(flagged)}, {"exclusion_radius", g_exclusion_radius(mu)}};
}

inline void interlacing_task(TaskContext& ctx, TaskOutput& out) {
    const auto& pert = ctx.spectrum();
    const auto base = decompose(ctx.cfg, false);
    const double kappa = ctx.cfg.perturbation.kappa;
    const auto rep = rank_one_interlacing(base, pert, kappa);
    Table t("interlacing", {"j", "E_base", "E_perturbed", "weight_base"});
    for (std::size_t j = 0; j < base.dim(); ++j) t.add({i64(j), base.eigenvalues[j], pert.eigenvalues[j], base.weights[j]});
    out.tables.push_back(std::move(t));
    out.metrics = {{"kappa", kappa},
                   {"pass", b2d(rep.pass)},
                   {"strict_checked", static_cast<double>(rep.strict_checked)},
                   {"worst_violation", rep.worst_violation}};
}

inline void decay_task(TaskContext& ctx, const DecayTask& task, TaskOutput& out) {
    const auto& s = ctx.spectrum();
    const auto n = s.dim();
    const auto lo = static_cast<std::size_t>(task.lo_frac * static_cast<double>(n));
    const auto hi = std::min(n, static_cast<std::size_t>(std::ceil(task.hi_frac * static_cast<double>(n))));
    Table t("decay", {"j", "E", "peak_site", "rate", "tail_points"});
    CompensatedSum sum;
    std::size_t fitted = 0;
    for (std::size_t j = lo; j < hi; j += task.stride) {
        try {
            const auto d = eigenfunction_decay(s, j);
            t.add({i64(j), d.energy, d.peak_site, d.rate, i64(d.tail_points)});
            sum.add(d.rate);
            ++fitted;
        } catch (const ValidationError&) {
            t.add({i64(j), s.eigenvalues[j], std::int64_t{0}, std::nan(""), std::int64_t{0}});
        }
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"fitted", static_cast<double>(fitted)},
                   {"mean_rate", fitted ? sum.value() / static_cast<double>(fitted) : std::nan("")}};
}

inline void critical_energies_task(TaskContext& ctx, const CriticalEnergiesTask& task, TaskOutput& out) {
    const auto& c = ctx.cfg;
    std::vector<double> values;
    for (double v : c.system.dist.values) values.push_back(c.lambda * v);
    const auto crit = critical_energy_scan(c.op.c, values, task.E_lo, task.E_hi, task.step);
    Table t("critical_energies", {"E", "commutator_norm"});
    for (const auto& e : crit) t.add({e.energy, e.commutator_norm});
    out.tables.push_back(std::move(t));
    out.metrics = {{"count", static_cast<double>(crit.size())}};
}

inline void norms_task(TaskContext& ctx, const NormsTask& task, TaskOutput& out) {
    const auto& c = ctx.cfg;
    const auto pots = realizations(c, task.realizations, task.N);
    struct Row {
        double log_sup = 0.0, log_end = 0.0;
    };
    const std::size_t R = pots.size();
    const auto rows = parallel_map<Row>(task.energies.size() * R, [&](std::size_t k) {
        const double E = task.energies[k / R];
        const auto& pot = pots[k % R];
        auto p = TransferProduct::identity(E);
        Row row{-INFINITY, 0.0};
        for (std::int64_t n = 1; n <= task.N; ++n) {
            p.left_multiply(c.op.dirac ? dirac_step_matrix(E, c.op.mass, c.op.c, pot.at(n), n) : step_matrix(E, pot.at(n)));
            row.log_sup = std::max(row.log_sup, p.log_norm());
        }
        row.log_end = p.log_norm();
        return row;
    });
    Table t("norms", {"E", "realization", "log_sup_norm", "log_norm_N", "N"});
    double worst = -INFINITY;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        t.add({task.energies[k / R], i64(k % R), rows[k].log_sup, rows[k].log_end, task.N});
        worst = std::max(worst, rows[k].log_sup);
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"max_log_sup_norm", worst}};
}

inline void checks_task(TaskContext& ctx, const ChecksTask& task, TaskOutput& out) {
    Table t("checks", {"criterion", "pass", "seconds", "budget_seconds", "detail"});
    std::size_t failed = 0;
    for (int id : task.criteria) {
        CriterionResult r;
        if (id == 10) {
            if (!ctx.determinism) throw ValidationError("checks: criterion 10 needs the runner");
            r = ctx.determinism();
        } else {
            r = run_criterion(id);
        }
        if (ctx.log) *ctx.log << r.line() << std::endl;
        t.add({std::int64_t{id}, i64(r.pass), r.seconds, r.budget, r.title + ": " + r.detail});
        if (!r.pass) ++failed;
    }
    out.tables.push_back(std::move(t));
    out.metrics = {{"failed", static_cast<double>(failed)}, {"total", static_cast<double>(task.criteria.size())}};
    if (failed) {
        out.status = TaskStatus::acceptance_failure;
        out.message = std::to_string(failed) + " acceptance criteria failed";
    }
}

}  // namespace tasks

/// Run one task. Numerical failures are captured in the output so sibling
/// tasks still run.
inline TaskOutput execute_task(TaskContext& ctx, const TaskSpec& spec) {
    TaskOutput out;
    out.type = task_name(spec);
    try {
        std::visit(
            [&](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, SpectrumTask>) tasks::spectrum(ctx, out);
                else if constexpr (std::is_same_v<T, MomentsTask>) tasks::moments(ctx, t, out);
                else if constexpr (std::is_same_v<T, LyapunovTask>) tasks::lyapunov_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, BandScanTask>) tasks::band_scan_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, KMomentsTask>) tasks::k_moments_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, GFunctionTask>) tasks::g_function_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, InterlacingTask>) tasks::interlacing_task(ctx, out);
                else if constexpr (std::is_same_v<T, DecayTask>) tasks::decay_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, CriticalEnergiesTask>) tasks::critical_energies_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, NormsTask>) tasks::norms_task(ctx, t, out);
                else if constexpr (std::is_same_v<T, ChecksTask>) tasks::checks_task(ctx, t, out);
            },
            spec);
    } catch (const ValidationError& e) {
        out = {out.type, {}, {}, TaskStatus::validation_error, e.what()};
    } catch (const NumericalError& e) {
        out = {out.type, {}, {}, TaskStatus::numerical_failure, e.what()};
    } catch (const std::exception& e) {
        out = {out.type, {}, {}, TaskStatus::numerical_failure, e.what()};
    }
    return out;
}

}  // namespace qbd
