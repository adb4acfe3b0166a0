// Experiment configs: JSON schema version 1, strict field checking, and the
// mapping from a config to potentials and operators.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qbd/core.hpp"
#include "qbd/dynsys.hpp"
#include "qbd/operators.hpp"
#include "qbd/perturbation.hpp"

namespace qbd {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace cfg {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ValidationError("config: " + (path.empty() ? std::string("<root>") : path) + ": " + msg);
}

/// Read access to a JSON object that remembers which keys were consumed, so
/// unknown fields can be rejected with their full path.
class Node {
  public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) fail(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_->contains(key); }

    const json& raw(const std::string& key) {
        if (!has(key)) fail(sub(key), "required field is missing");
        used_.insert(key);
        return j_->at(key);
    }

    double num(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) fail(sub(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(sub(key), "must be finite");
        return d;
    }
    double num(const std::string& key, double dflt) { return has(key) ? num(key) : dflt; }

    std::int64_t integer(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_integer()) fail(sub(key), "expected an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            fail(sub(key), "integer out of range");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t dflt) { return has(key) ? integer(key) : dflt; }

    std::uint64_t u64(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(sub(key), "expected a non-negative 64-bit integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool dflt) {
        if (!has(key)) return dflt;
        const auto& v = raw(key);
        if (!v.is_boolean()) fail(sub(key), "expected true or false");
        return v.get<bool>();
    }

    std::string str(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) fail(sub(key), "expected a string");
        return v.get<std::string>();
    }
    std::string str(const std::string& key, const std::string& dflt) { return has(key) ? str(key) : dflt; }

    std::vector<double> nums(const std::string& key) { return to_nums(raw(key), sub(key)); }

    static std::vector<double> to_nums(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
            if (!std::isfinite(out.back())) fail(path + "[" + std::to_string(i) + "]", "must be finite");
        }
        return out;
    }

    Node obj(const std::string& key) { return Node(raw(key), sub(key)); }

    /// Reject keys that were never read.
    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key())) fail(sub(it.key()), "unknown field");
    }

  private:
    const json* j_;
    std::string path_;
    std::set<std::string> used_;
};

/// Run `f` and prefix any validation error from library code with `path`.
template <class F>
auto at_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        if (what.rfind("config: ", 0) == 0) throw;
        fail(path, what);
    }
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// Typed config
// ---------------------------------------------------------------------------

struct SystemSpec {
    std::string name;  ///< free | periodic | doubling | rotation | anderson | chaotic | twist | billiard
    std::vector<double> values;                      // periodic
    double theta = 0.0;                              // doubling, rotation, twist
    std::optional<std::pair<std::int64_t, std::int64_t>> rational;  // doubling, rotation: p/q
    double alpha = 0.0;                              // rotation, irrational
    SiteDistribution dist;                           // anderson
    ChaoticKind map = ChaoticKind::logistic;         // chaotic
    double x0 = 0.3, logistic_r = 4.0;
    std::array<std::int64_t, 4> matrix{2, 1, 1, 1};
    std::array<std::int64_t, 3> point{1, 2, 7};      // torus point n1/q, n2/q
    double rho_slope = 1.0, radius = 0.5;            // twist
    double arc = 0.0, phi = 0.3;                     // billiard
};

struct OperatorSpec {
    bool dirac = false;
    double mass = 0.0;
    double c = 1.0;
    Spinor spinor;
};

/// Log-spaced grid: lo, hi, per_decade.
struct LogGridSpec {
    double lo = 10.0, hi = 1000.0;
    int per_decade = 8;
    std::vector<double> values() const { return log_grid(lo, hi, per_decade); }
};

struct SpectrumTask {};
struct MomentsTask {
    std::vector<double> p{2.0};
    LogGridSpec T;
    std::int64_t margin = 50;
    bool fit_valid_only = true;  ///< fit only the leading T range with leak <= 1e-6
};
struct LyapunovTask {
    std::vector<double> energies;
    std::int64_t N = 10000;
    std::size_t samples = 4;
};
struct BandScanTask {
    std::int64_t period = 0;  ///< 0: taken from a periodic system
    double E_lo = -3.0, E_hi = 3.0, step = 1e-3;
    std::int64_t N = 10000;
    std::optional<double> threshold;
};
struct KMomentsTask {
    std::vector<double> q;
    LogGridSpec eps{1e-3, 1e-1, 8};
    std::size_t window = 4;
};
struct GFunctionTask {
    std::vector<double> energies;
};
struct InterlacingTask {};
struct DecayTask {
    double lo_frac = 0.4, hi_frac = 0.6;
    std::size_t stride = 1;
};
struct CriticalEnergiesTask {
    double E_lo = -3.0, E_hi = 3.0, step = 1e-3;
};
struct NormsTask {
    std::vector<double> energies;
    std::int64_t N = 10000;
    std::size_t realizations = 1;
};
struct ChecksTask {
    std::vector<int> criteria;
};

using TaskSpec = std::variant<SpectrumTask, MomentsTask, LyapunovTask, BandScanTask, KMomentsTask, GFunctionTask,
                              InterlacingTask, DecayTask, CriticalEnergiesTask, NormsTask, ChecksTask>;

inline const char* task_name(const TaskSpec& t) {
    static constexpr const char* names[] = {"spectrum", "moments",     "lyapunov",          "band_scan",
                                            "k_moments", "g_function", "interlacing",       "decay",
                                            "critical_energies", "norms", "checks"};
    return names[t.index()];
}

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    SystemSpec system;
    double lambda = 0.0;
    LatticeSpec lattice;
    OperatorSpec op;
    Perturbation perturbation;
    std::vector<TaskSpec> tasks;
    std::optional<std::string> output;
    std::optional<int> threads;
    json source;  ///< the config as parsed, echoed into the bundle
};

namespace cfg {

inline LogGridSpec parse_log_grid(Node n) {
    LogGridSpec g;
    g.lo = n.num("lo");
    g.hi = n.num("hi");
    g.per_decade = static_cast<int>(n.integer("per_decade", 8));
    n.finish();
    if (!(g.lo > 0.0) || !(g.hi > g.lo)) fail(n.path(), "need 0 < lo < hi");
    if (g.per_decade < 1 || g.per_decade > 1000) fail(n.sub("per_decade"), "must be in [1, 1000]");
    return g;
}

/// "energies": [..] or {"lo", "hi", "count"}.
inline std::vector<double> parse_energies(Node& n, const std::string& key = "energies") {
    const auto& v = n.raw(key);
    std::vector<double> out;
    if (v.is_array()) {
        out = Node::to_nums(v, n.sub(key));
    } else if (v.is_object()) {
        Node g(v, n.sub(key));
        const double lo = g.num("lo"), hi = g.num("hi");
        const auto count = g.integer("count");
        g.finish();
        if (count < 1 || count > 1000000) fail(g.sub("count"), "must be in [1, 1e6]");
        if (hi < lo) fail(g.path(), "need lo <= hi");
        out = linear_grid(lo, hi, static_cast<int>(count));
    } else {
        fail(n.sub(key), "expected an array or {lo, hi, count}");
    }
    if (out.empty()) fail(n.sub(key), "grid is empty");
    return out;
}

inline std::int64_t positive(Node& n, const std::string& key, std::int64_t dflt, std::int64_t max = INT64_MAX) {
    const auto v = n.integer(key, dflt);
    if (v < 1 || v > max) fail(n.sub(key), "must be in [1, " + std::to_string(max) + "]");
    return v;
}

inline SystemSpec parse_system(Node n) {
    SystemSpec s;
    s.name = n.str("name");
    auto rational = [&] {
        if (n.has("p") || n.has("q")) {
            const auto p = n.integer("p"), q = n.integer("q");
            if (q < 1) fail(n.sub("q"), "must be >= 1");
            s.rational = std::make_pair(p, q);
            return true;
        }
        return false;
    };
    if (s.name == "free") {
    } else if (s.name == "periodic") {
        s.values = n.nums("values");
        if (s.values.empty()) fail(n.sub("values"), "must be nonempty");
    } else if (s.name == "doubling") {
        if (!rational()) s.theta = n.num("theta", 0.1);
    } else if (s.name == "rotation") {
        s.theta = n.num("theta", 0.0);
        if (!rational()) {
            s.alpha = n.num("alpha");
            if (std::abs(s.alpha) > 1.0) fail(n.sub("alpha"), "must lie in [-1, 1]");
        } else if (n.has("alpha")) {
            fail(n.sub("alpha"), "give either alpha or p/q, not both");
        }
    } else if (s.name == "anderson") {
        Node d = n.obj("distribution");
        const auto kind = d.str("kind");
        if (kind == "uniform") {
            const double lo = d.num("lo", -1.0), hi = d.num("hi", 1.0);
            s.dist = at_path(d.path(), [&] { return SiteDistribution::uniform(lo, hi); });
        } else if (kind == "bernoulli") {
            auto values = d.nums("values");
            auto probs = d.nums("probs");
            s.dist = at_path(d.sub("probs"), [&] { return SiteDistribution::bernoulli(values, probs); });
        } else {
            fail(d.sub("kind"), "unknown distribution '" + kind + "' (uniform | bernoulli)");
        }
        d.finish();
    } else if (s.name == "chaotic") {
        const auto m = n.str("map");
        if (m == "tcheb3") s.map = ChaoticKind::tcheb3;
        else if (m == "tcheb4") s.map = ChaoticKind::tcheb4;
        else if (m == "logistic") s.map = ChaoticKind::logistic;
        else if (m == "torus") s.map = ChaoticKind::torus;
        else fail(n.sub("map"), "unknown map '" + m + "' (tcheb3 | tcheb4 | logistic | torus)");
        if (s.map == ChaoticKind::torus) {
            if (n.has("matrix")) {
                const auto v = n.nums("matrix");
                if (v.size() != 4) fail(n.sub("matrix"), "expected 4 integers");
                for (int i = 0; i < 4; ++i) s.matrix[i] = static_cast<std::int64_t>(v[i]);
            }
            if (n.has("point")) {
                const auto v = n.nums("point");
                if (v.size() != 3 || v[2] < 1) fail(n.sub("point"), "expected [n1, n2, q] with q >= 1");
                for (int i = 0; i < 3; ++i) s.point[i] = static_cast<std::int64_t>(v[i]);
            }
        } else {
            s.x0 = n.num("x0", 0.3);
            if (s.map == ChaoticKind::logistic) s.logistic_r = n.num("r", 4.0);
        }
    } else if (s.name == "twist") {
        s.rho_slope = n.num("rho_slope", 1.0);
        if (s.rho_slope < 0.0 || s.rho_slope > kTwoPi) fail(n.sub("rho_slope"), "must lie in [0, 2 pi]");
        s.theta = n.num("theta", 0.0);
        s.radius = n.num("r", 0.5);
        if (s.radius < 0.0 || s.radius > 1.0) fail(n.sub("r"), "must lie in [0, 1]");
    } else if (s.name == "billiard") {
        s.arc = n.num("r", 0.0);
        s.phi = n.num("phi", 0.3);
        if (std::abs(s.phi) > kPi / 2) fail(n.sub("phi"), "must lie in [-pi/2, pi/2]");
    } else {
        fail(n.sub("name"), "unknown system '" + s.name +
                                "' (free | periodic | doubling | rotation | anderson | chaotic | twist | billiard)");
    }
    n.finish();
    return s;
}

inline TaskSpec parse_task(Node n) {
    const auto type = n.str("type");
    TaskSpec out;
    if (type == "spectrum") {
        out = SpectrumTask{};
    } else if (type == "moments") {
        MomentsTask t;
        if (n.has("p")) t.p = n.nums("p");
        if (t.p.empty()) fail(n.sub("p"), "must be nonempty");
        for (double p : t.p)
            if (!(p > 0.0)) fail(n.sub("p"), "moments need p > 0");
        t.T = parse_log_grid(n.obj("T"));
        t.margin = n.integer("margin", 50);
        if (t.margin < 0) fail(n.sub("margin"), "must be >= 0");
        t.fit_valid_only = n.boolean("fit_valid_only", true);
        out = t;
    } else if (type == "lyapunov") {
        LyapunovTask t;
        t.energies = parse_energies(n);
        t.N = positive(n, "N", 10000, 100000000);
        if (t.N < 1000) fail(n.sub("N"), "must be >= 1000");
        t.samples = static_cast<std::size_t>(positive(n, "samples", 4, 100000));
        out = t;
    } else if (type == "band_scan") {
        BandScanTask t;
        t.period = n.integer("period", 0);
        if (t.period < 0) fail(n.sub("period"), "must be >= 1");
        t.E_lo = n.num("E_lo", -3.0);
        t.E_hi = n.num("E_hi", 3.0);
        t.step = n.num("step", 1e-3);
        if (!(t.E_hi > t.E_lo) || !(t.step > 0.0) || (t.E_hi - t.E_lo) / t.step > 1e7)
            fail(n.path(), "need E_lo < E_hi and 0 < step with at most 1e7 grid points");
        t.N = positive(n, "N", 10000, 100000000);
        if (n.has("threshold")) {
            t.threshold = n.num("threshold");
            if (!(*t.threshold > 1.0)) fail(n.sub("threshold"), "must be > 1");
        }
        out = t;
    } else if (type == "k_moments") {
        KMomentsTask t;
        if (n.has("q") && n.has("p")) fail(n.path(), "give either q or p, not both");
        if (n.has("p")) {
            for (double p : n.nums("p")) {
                if (!(p > 0.0)) fail(n.sub("p"), "need p > 0");
                t.q.push_back(1.0 / (1.0 + p));
            }
        } else {
            t.q = n.nums("q");
        }
        if (t.q.empty()) fail(n.sub("q"), "must be nonempty");
        for (double q : t.q)
            if (!(q > 0.0)) fail(n.sub("q"), "need q > 0");
        t.eps = parse_log_grid(n.obj("eps"));
        if (t.eps.hi >= 1.0) fail(n.sub("eps.hi"), "must be < 1");
        t.window = static_cast<std::size_t>(positive(n, "window", 4, 1000));
        if (t.window < 2) fail(n.sub("window"), "must be >= 2");
        out = t;
    } else if (type == "g_function") {
        GFunctionTask t;
        t.energies = parse_energies(n);
        out = t;
    } else if (type == "interlacing") {
        out = InterlacingTask{};
    } else if (type == "decay") {
        DecayTask t;
        t.lo_frac = n.num("lo_frac", 0.4);
        t.hi_frac = n.num("hi_frac", 0.6);
        if (!(t.lo_frac >= 0.0 && t.hi_frac <= 1.0 && t.lo_frac < t.hi_frac))
            fail(n.path(), "need 0 <= lo_frac < hi_frac <= 1");
        t.stride = static_cast<std::size_t>(positive(n, "stride", 1, 1000000));
        out = t;
    } else if (type == "critical_energies") {
        CriticalEnergiesTask t;
        t.E_lo = n.num("E_lo", -3.0);
        t.E_hi = n.num("E_hi", 3.0);
        t.step = n.num("step", 1e-3);
        if (!(t.E_hi > t.E_lo) || !(t.step > 0.0) || (t.E_hi - t.E_lo) / t.step > 1e7)
            fail(n.path(), "need E_lo < E_hi and 0 < step with at most 1e7 grid points");
        out = t;
    } else if (type == "norms") {
        NormsTask t;
        t.energies = parse_energies(n);
        t.N = positive(n, "N", 10000, 100000000);
        t.realizations = static_cast<std::size_t>(positive(n, "realizations", 1, 100000));
        out = t;
    } else if (type == "checks") {
        ChecksTask t;
        if (n.has("criteria")) {
            for (double c : n.nums("criteria")) {
                if (c != std::floor(c) || c < 1 || c > 10) fail(n.sub("criteria"), "criteria are integers 1..10");
                t.criteria.push_back(static_cast<int>(c));
            }
            if (t.criteria.empty()) fail(n.sub("criteria"), "must be nonempty");
        } else {
            for (int c = 1; c <= 10; ++c) t.criteria.push_back(c);
        }
        out = t;
    } else {
        fail(n.sub("type"), "unknown task type '" + type +
                                "' (spectrum | moments | lyapunov | band_scan | k_moments | g_function | "
                                "interlacing | decay | critical_energies | norms | checks)");
    }
    n.finish();
    return out;
}

}  // namespace cfg

/// Validate a parsed JSON document against schema version 1.
inline ExperimentConfig config_from_json(const json& j) {
    using namespace cfg;
    ExperimentConfig c;
    c.source = j;
    Node root(j, "");
    const auto version = root.integer("schema_version");
    if (version != kSchemaVersion)
        fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                   std::to_string(kSchemaVersion) + ")");
    c.name = root.str("name");
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
        fail("name", "must be a nonempty name without path separators");
    root.str("description", "");
    c.seed = root.u64("seed");
    c.system = parse_system(root.obj("system"));
    c.lambda = root.num("lambda", 0.0);

    {
        Node l = root.obj("lattice");
        const auto kind = l.str("kind");
        const auto N = l.integer("N");
        if (kind == "half") c.lattice = LatticeSpec::half(N);
        else if (kind == "whole") c.lattice = LatticeSpec::whole(N);
        else fail(l.sub("kind"), "expected half or whole");
        if (N < 2 || N > 1000000) fail(l.sub("N"), "must be in [2, 1e6]");
        l.finish();
    }

    if (root.has("operator")) {
        Node o = root.obj("operator");
        const auto kind = o.str("kind");
        if (kind == "dirac") {
            c.op.dirac = true;
            c.op.mass = o.num("mass", 0.0);
            c.op.c = o.num("c", 1.0);
            if (!(c.op.c > 0.0)) fail(o.sub("c"), "must be > 0");
            if (o.has("spinor")) {
                const auto v = o.nums("spinor");
                if (v.size() != 2 || (v[0] == 0.0 && v[1] == 0.0)) fail(o.sub("spinor"), "expected a nonzero [upper, lower]");
                c.op.spinor = {v[0], v[1]};
            }
        } else if (kind != "schrodinger") {
            fail(o.sub("kind"), "expected schrodinger or dirac");
        }
        o.finish();
    }

    if (root.has("perturbation")) {
        Node p = root.obj("perturbation");
        const auto kind = p.str("kind");
        if (kind == "none") {
            c.perturbation = Perturbation::none();
        } else if (kind == "power_decay") {
            const double C = p.num("C"), eta = p.num("eta");
            const bool signs = p.boolean("random_signs", false);
            c.perturbation = at_path(p.path(), [&] { return Perturbation::power_decay(C, eta, signs, c.seed); });
        } else if (kind == "rank_one") {
            const double kappa = p.num("kappa");
            c.perturbation = at_path(p.sub("kappa"), [&] { return Perturbation::rank_one(kappa); });
        } else {
            fail(p.sub("kind"), "expected none, power_decay or rank_one");
        }
        p.finish();
    }

    const auto& tasks = root.raw("tasks");
    if (!tasks.is_array() || tasks.empty()) fail("tasks", "expected a nonempty array");
    for (std::size_t i = 0; i < tasks.size(); ++i)
        c.tasks.push_back(parse_task(Node(tasks[i], "tasks[" + std::to_string(i) + "]")));

    if (root.has("output")) c.output = root.str("output");
    if (root.has("threads")) {
        const auto t = root.integer("threads");
        if (t < 1 || t > 1024) fail("threads", "must be in [1, 1024]");
        c.threads = static_cast<int>(t);
    }
    root.finish();

    // Cross-field checks.
    const bool sys_random = c.system.name == "anderson";
    for (std::size_t i = 0; i < c.tasks.size(); ++i) {
        const auto path = "tasks[" + std::to_string(i) + "]";
        const auto& t = c.tasks[i];
        if (std::holds_alternative<InterlacingTask>(t)) {
            if (c.perturbation.kind != Perturbation::Kind::rank_one || !(c.perturbation.kappa > 0.0))
                fail(path, "interlacing needs perturbation {kind: rank_one, kappa > 0}");
            if (c.op.dirac) fail(path, "interlacing is defined for the Schrodinger operator");
        }
        if (std::holds_alternative<CriticalEnergiesTask>(t)) {
            if (!c.op.dirac) fail(path, "critical_energies needs operator.kind = dirac");
            if (c.op.mass != 0.0) fail(path, "critical_energies is defined for the massless operator (operator.mass = 0)");
            if (!sys_random || !c.system.dist.discrete)
                fail(path, "critical_energies needs an anderson system with a bernoulli distribution");
        }
        if (const auto* b = std::get_if<BandScanTask>(&t)) {
            if (c.op.dirac) fail(path, "band_scan is defined for the Schrodinger operator");
            if (b->period == 0 && c.system.name != "periodic" && c.system.name != "free")
                fail(path + ".period", "required unless the system is periodic or free");
        }
        if (std::holds_alternative<LyapunovTask>(t) && c.op.dirac)
            fail(path, "lyapunov uses the Schrodinger cocycle; use norms for the Dirac operator");
    }
    return c;
}

/// Parse config text. JSON syntax errors carry line and column.
inline ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: parse error: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Potentials and operators
// ---------------------------------------------------------------------------

/// Seed of realization i (realization 0 is the configured state itself).
inline std::uint64_t realization_seed(std::uint64_t seed, std::size_t i) {
    return i == 0 ? seed : mix64(seed ^ mix64(0x5eedULL + i));
}

inline DynSystem make_system(const ExperimentConfig& c) {
    const auto& s = c.system;
    if (s.name == "doubling") return make_doubling();
    if (s.name == "rotation") {
        const double a = s.rational ? static_cast<double>(s.rational->first) / static_cast<double>(s.rational->second)
                                    : s.alpha;
        return cfg::at_path("system", [&] { return make_rotation(a); });
    }
    if (s.name == "anderson") return make_anderson_shift(s.dist, c.seed);
    if (s.name == "chaotic") {
        ChaoticParams p;
        p.r = s.logistic_r;
        p.matrix = s.matrix;
        return cfg::at_path("system", [&] { return make_chaotic_map(s.map, p); });
    }
    if (s.name == "twist") {
        const double k = s.rho_slope;
        return make_twist_map({[k](double r) { return k * r; }, k});
    }
    if (s.name == "billiard") return make_circular_billiard();
    throw ValidationError("config: system: '" + s.name + "' has no dynamical system");
}

inline State initial_state(const ExperimentConfig& c, const DynSystem& sys, std::size_t realization) {
    const auto& s = c.system;
    const auto rs = realization_seed(c.seed, realization);
    if (s.name == "anderson") return shift_realization(rs);
    if (s.name == "rotation") {
        const double th = realization == 0 ? s.theta : s.theta + kTwoPi * hashed_uniform(rs, 0);
        if (s.rational) return rotation_rational_state(th, s.rational->first, s.rational->second);
        return rotation_state({th}, {s.alpha});
    }
    if (s.name == "doubling" && s.rational) return doubling_rational(s.rational->first, s.rational->second);
    if (realization > 0) {
        Rng rng(rs);
        return sys.sample(rng);
    }
    if (s.name == "doubling") return doubling_state(s.theta);
    if (s.name == "chaotic")
        return s.map == ChaoticKind::torus ? torus_rational(s.point[0], s.point[1], s.point[2]) : interval_state(s.x0);
    if (s.name == "twist") return twist_state(s.theta, s.radius);
    return billiard_state(s.arc, s.phi);
}

/// V on `window` for the given realization.
inline PotentialSequence build_potential(const ExperimentConfig& c, SiteWindow window, std::size_t realization = 0,
                                         bool with_perturbation = true) {
    const Perturbation w = with_perturbation ? c.perturbation : Perturbation::none();
    const auto& s = c.system;
    if (s.name == "free" || s.name == "periodic") {
        std::vector<double> v(static_cast<std::size_t>(window.hi - window.lo + 1), 0.0);
        if (s.name == "periodic") {
            v = periodic_sequence_values(s.values, window.lo, window.hi);
            for (auto& x : v) x *= c.lambda;
        }
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += w.at(window.lo + static_cast<std::int64_t>(i));
        auto pot = explicit_potential(std::move(v), window.lo);
        pot.lambda = c.lambda;
        return pot;
    }
    const auto sys = make_system(c);
    const auto omega = initial_state(c, sys, realization);
    return cfg::at_path("system", [&] { return potential(sys, omega, c.lambda, window, w); });
}

inline bool is_random_system(const ExperimentConfig& c) { return c.system.name == "anderson"; }

/// Eigendecomposition of the configured operator on the configured lattice.
inline SpectralData decompose(const ExperimentConfig& c, bool with_perturbation = true) {
    const auto pot = build_potential(c, c.lattice.window(), 0, with_perturbation);
    if (c.op.dirac) return eigendecompose(build_dirac(c.lattice, c.op.mass, c.op.c, pot), c.op.spinor);
    return eigendecompose(build_schrodinger(c.lattice, pot));
}

}  // namespace qbd
