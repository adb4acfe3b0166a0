// run / sweep / checks: config in, result bundle out.
#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include "qbd/runner/acceptance.hpp"
#include "qbd/runner/config.hpp"
#include "qbd/runner/io.hpp"
#include "qbd/runner/tasks.hpp"

namespace qbd {

inline constexpr const char* kVersion = "1.0.0";

struct RunOptions {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::ostream* log = &std::cerr;
    /// Where criterion 10 finds the configs to replay.
    std::filesystem::path configs_dir = "configs";
};

struct RunResult {
    int exit_code = 0;
    std::filesystem::path dir;
    std::vector<TaskOutput> tasks;
};

/// Parse and validate, applying a --seed override at the JSON level so every
/// derived seed follows it.
inline ExperimentConfig load_config(const std::string& text, const RunOptions& opts = {}) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: parse error: ") + e.what());
    }
    if (opts.seed && j.is_object()) j["seed"] = *opts.seed;
    return config_from_json(j);
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path, const RunOptions& opts = {}) {
    try {
        return load_config(read_file(path), opts);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline std::filesystem::path output_dir(const ExperimentConfig& c, const RunOptions& opts) {
    if (opts.out) return *opts.out;
    if (c.output) return *c.output;
    return std::filesystem::path("out") / c.name;
}

inline std::optional<tbb::global_control> thread_limit(std::optional<int> n) {
    if (!n) return std::nullopt;
    if (*n < 1) throw ValidationError("--threads must be >= 1");
    return std::make_optional<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                   static_cast<std::size_t>(*n));
}

inline CriterionResult determinism_criterion(const std::filesystem::path& configs_dir, const std::filesystem::path& scratch);

/// Execute every task and write the bundle:
///   config.json, NN_<task>_<table>.csv, summary.csv, status.csv, meta.json.
/// Everything except meta.json is a pure function of the config.
inline RunResult run_config(const ExperimentConfig& c, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto threads = opts.threads ? opts.threads : c.threads;
    const auto limit = thread_limit(threads);
    RunResult res;
    res.dir = output_dir(c, opts);
    std::filesystem::create_directories(res.dir);

    TaskContext ctx(c);
    ctx.log = opts.log;
    ctx.determinism = [&] { return determinism_criterion(opts.configs_dir, res.dir / "determinism"); };

    write_atomic(res.dir / "config.json", c.source.dump(2) + "\n");
    Table summary("summary", {"task_index", "task", "metric", "value"});
    Table status("status", {"task_index", "task", "status", "message"});
    for (std::size_t i = 0; i < c.tasks.size(); ++i) {
        auto out = execute_task(ctx, c.tasks[i]);
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%02zu_", i);
        for (const auto& t : out.tables) write_atomic(res.dir / (prefix + out.type + "_" + t.name + ".csv"), t.csv());
        for (const auto& m : out.metrics) summary.add({static_cast<std::int64_t>(i), out.type, m.name, m.value});
        status.add({static_cast<std::int64_t>(i), out.type, std::string(status_name(out.status)), out.message});
        if (out.status != TaskStatus::ok && opts.log)
            *opts.log << c.name << ": task " << i << " (" << out.type << ") " << status_name(out.status) << ": "
                      << out.message << std::endl;
        res.exit_code = merge_exit(res.exit_code, exit_code(out.status));
        res.tasks.push_back(std::move(out));
    }
    write_atomic(res.dir / "summary.csv", summary.csv());
    write_atomic(res.dir / "status.csv", status.csv());

    json meta = {{"version", kVersion},
                 {"schema_version", kSchemaVersion},
                 {"name", c.name},
                 {"seed", c.seed},
                 {"threads", threads ? json(*threads) : json("default")},
                 {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                 {"exit_code", res.exit_code}};
    write_atomic(res.dir / "meta.json", meta.dump(2) + "\n");
    return res;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"lambda", "alpha", "E", "kappa", "seed"};
    return axes;
}

/// Values from a comma/whitespace separated list, or from a file holding one.
inline std::vector<std::string> parse_sweep_values(const std::string& spec) {
    std::string text = spec;
    std::error_code ec;
    if (!spec.empty() && std::filesystem::is_regular_file(spec, ec)) text = read_file(spec);
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text + ",") {
        if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (out.empty()) throw ValidationError("sweep: empty value list");
    return out;
}

inline double parse_number(const std::string& axis, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || !std::isfinite(d)) throw ValidationError("sweep: axis " + axis + ": '" + v + "' is not a number");
    return d;
}

/// The config JSON with one axis set to `value`.
inline json apply_axis(json j, const std::string& axis, const std::string& value) {
    if (!j.is_object()) throw ValidationError("config: <root>: expected an object");
    if (axis == "lambda") {
        j["lambda"] = parse_number(axis, value);
    } else if (axis == "alpha") {
        if (!j.contains("system") || !j["system"].is_object() || j["system"].value("name", "") != "rotation")
            throw ValidationError("sweep: axis alpha needs a rotation system");
        auto& s = j["system"];
        s.erase("alpha");
        s.erase("p");
        s.erase("q");
        if (const auto slash = value.find('/'); slash != std::string::npos) {
            const double p = parse_number(axis, value.substr(0, slash)), q = parse_number(axis, value.substr(slash + 1));
            if (p != std::floor(p) || q != std::floor(q) || q < 1)
                throw ValidationError("sweep: axis alpha: '" + value + "' is not a fraction p/q");
            s["p"] = static_cast<std::int64_t>(p);
            s["q"] = static_cast<std::int64_t>(q);
        } else {
            s["alpha"] = parse_number(axis, value);
        }
    } else if (axis == "E") {
        bool any = false;
        if (j.contains("tasks") && j["tasks"].is_array())
            for (auto& t : j["tasks"])
                if (t.is_object() && t.contains("energies")) {
                    t["energies"] = json::array({parse_number(axis, value)});
                    any = true;
                }
        if (!any) throw ValidationError("sweep: axis E: no task in the config takes energies");
    } else if (axis == "kappa") {
        j["perturbation"] = {{"kind", "rank_one"}, {"kappa", parse_number(axis, value)}};
    } else if (axis == "seed") {
        std::size_t pos = 0;
        std::uint64_t s = 0;
        try {
            s = std::stoull(value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != value.size() || value.empty() || value[0] == '-')
            throw ValidationError("sweep: axis seed: '" + value + "' is not an unsigned 64-bit integer");
        j["seed"] = s;
    } else {
        std::string known;
        for (const auto& a : sweep_axes()) known += (known.empty() ? "" : ", ") + a;
        throw ValidationError("sweep: unknown axis '" + axis + "' (known: " + known + ")");
    }
    return j;
}

struct SweepResult {
    int exit_code = 0;
    std::filesystem::path dir;
    std::vector<RunResult> runs;
};

/// One sub-run per value, in parallel; sweep.csv aggregates the summaries in
/// value order.
inline SweepResult run_sweep(const std::string& config_text, const std::string& axis,
                             const std::vector<std::string>& values, const RunOptions& opts) {
    if (values.empty()) throw ValidationError("sweep: empty value list");
    const auto limit = thread_limit(opts.threads);
    const auto base = load_config(config_text, opts);
    std::vector<ExperimentConfig> cfgs;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto j = apply_axis(base.source, axis, values[i]);
        try {
            cfgs.push_back(config_from_json(j));
        } catch (const ValidationError& e) {
            throw ValidationError("sweep value '" + values[i] + "': " + e.what());
        }
    }

    SweepResult res;
    res.dir = opts.out ? *opts.out : std::filesystem::path("out") / (base.name + "_sweep_" + axis);
    std::filesystem::create_directories(res.dir);
    res.runs.resize(values.size());
    tbb::parallel_for(std::size_t{0}, values.size(), [&](std::size_t i) {
        RunOptions sub = opts;
        sub.threads.reset();  // the global limit above already applies
        sub.log = nullptr;
        char name[32];
        std::snprintf(name, sizeof name, "%03zu", i);
        sub.out = res.dir / name;
        res.runs[i] = run_config(cfgs[i], sub);
    });

    Table agg("sweep", {"index", "axis", "value", "task_index", "task", "status", "metric", "metric_value"});
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& r = res.runs[i];
        for (std::size_t k = 0; k < r.tasks.size(); ++k) {
            const auto& t = r.tasks[k];
            const std::vector<Cell> head{static_cast<std::int64_t>(i), axis, values[i], static_cast<std::int64_t>(k), t.type,
                                         std::string(status_name(t.status))};
            if (t.metrics.empty()) {
                auto row = head;
                row.insert(row.end(), {std::string(), std::nan("")});
                agg.add(row);
            }
            for (const auto& m : t.metrics) {
                auto row = head;
                row.insert(row.end(), {m.name, m.value});
                agg.add(row);
            }
            if (t.status != TaskStatus::ok && opts.log)
                *opts.log << "sweep " << axis << "=" << values[i] << ": task " << k << " (" << t.type << ") "
                          << status_name(t.status) << ": " << t.message << std::endl;
        }
        res.exit_code = merge_exit(res.exit_code, r.exit_code);
    }
    write_atomic(res.dir / "sweep.csv", agg.csv());
    write_atomic(res.dir / "config.json", base.source.dump(2) + "\n");
    return res;
}

// ---------------------------------------------------------------------------
// Criterion 10 and the full suite
// ---------------------------------------------------------------------------

/// Regular files under `dir`, relative, sorted; meta.json (wall time) excluded.
inline std::vector<std::filesystem::path> bundle_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "meta.json") out.push_back(std::filesystem::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

inline bool is_checks_config(const ExperimentConfig& c) {
    for (const auto& t : c.tasks)
        if (std::holds_alternative<ChecksTask>(t)) return true;
    return false;
}

/// Every config in `configs_dir` (except ones that themselves run checks) is
/// run twice, the second time at a different thread limit, and the bundles
/// are compared byte for byte.
inline CriterionResult determinism_criterion(const std::filesystem::path& configs_dir, const std::filesystem::path& scratch) {
    return accept::timed(10, "determinism", 1800.0, [&](CriterionResult& r) {
        std::vector<std::filesystem::path> files;
        if (std::filesystem::is_directory(configs_dir))
            for (const auto& e : std::filesystem::directory_iterator(configs_dir))
                if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::size_t compared = 0, tables = 0;
        std::vector<std::string> bad;
        for (const auto& f : files) {
            const auto c = load_config_file(f);
            if (is_checks_config(c)) continue;
            std::filesystem::path dirs[2];
            for (int k = 0; k < 2; ++k) {
                RunOptions o;
                o.out = scratch / (c.name + (k ? "_b" : "_a"));
                std::filesystem::remove_all(*o.out);
                o.threads = k ? 2 : 1;
                o.log = nullptr;
                dirs[k] = run_config(c, o).dir;
            }
            const auto fa = bundle_files(dirs[0]), fb = bundle_files(dirs[1]);
            bool same = fa == fb;
            for (std::size_t i = 0; same && i < fa.size(); ++i) {
                same = read_file(dirs[0] / fa[i]) == read_file(dirs[1] / fa[i]);
                tables += fa[i].extension() == ".csv";
            }
            ++compared;
            if (!same) bad.push_back(f.filename().string());
        }
        r.pass = compared > 0 && bad.empty();
        r.detail = std::to_string(compared) + " configs from " + configs_dir.string() + " re-run, " + std::to_string(tables) +
                   " CSV files compared byte for byte";
        if (compared == 0) r.detail += "; no configs found";
        for (const auto& b : bad) r.detail += "; differs: " + b;
    });
}

struct ChecksResult {
    int exit_code = 0;
    std::vector<CriterionResult> results;
};

/// The full acceptance suite, one line per criterion; writes checks.csv to `out`.
inline ChecksResult run_checks(const std::vector<int>& criteria, const std::filesystem::path& configs_dir,
                               const std::filesystem::path& out, std::ostream* log) {
    ChecksResult res;
    Table t("checks", {"criterion", "pass", "seconds", "budget_seconds", "title", "detail"});
    for (int id : criteria) {
        auto r = id == 10 ? determinism_criterion(configs_dir, out / "determinism") : run_criterion(id);
        if (log) *log << r.line() << std::endl;
        t.add({std::int64_t{id}, std::int64_t{r.pass}, r.seconds, r.budget, r.title, r.detail});
        if (!r.pass) res.exit_code = 2;
        res.results.push_back(std::move(r));
    }
    write_atomic(out / "checks.csv", t.csv());
    return res;
}

}  // namespace qbd
