// qbd: run experiment configs, parameter sweeps and the acceptance suite.
#include <CLI11.hpp>

#include <iostream>

#include "qbd/qbd.hpp"

namespace {

std::vector<int> parse_criteria(const std::string& list) {
    std::vector<int> out;
    if (list.empty()) {
        for (int c = 1; c <= 10; ++c) out.push_back(c);
        return out;
    }
    for (const auto& v : qbd::parse_sweep_values(list)) {
        const double d = qbd::parse_number("criteria", v);
        if (d != static_cast<int>(d) || d < 1 || d > 10) throw qbd::ValidationError("--only: criteria are integers 1..10");
        out.push_back(static_cast<int>(d));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transport and spectral experiments for 1D Schrodinger and Dirac operators"};
    app.require_subcommand(1);

    std::optional<int> threads;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    app.add_option("--threads", threads, "Worker thread limit")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory");
    app.add_option("--seed", seed, "Override the config seed");

    std::string config;
    auto* run = app.add_subcommand("run", "Run every task of a config");
    run->add_option("config", config, "Experiment config (JSON)")->required();
    run->fallthrough();

    std::string axis, values;
    auto* sweep = app.add_subcommand("sweep", "Run a config once per value of one parameter");
    sweep->add_option("config", config, "Experiment config (JSON)")->required();
    sweep->add_option("--axis", axis, "lambda | alpha | E | kappa | seed")->required();
    sweep->add_option("--values", values, "Comma-separated list, or a file of values; alpha accepts p/q")->required();
    sweep->fallthrough();

    std::string configs_dir = "configs", only;
    auto* checks = app.add_subcommand("checks", "Run the acceptance suite");
    checks->add_option("--configs", configs_dir, "Config directory replayed by the determinism criterion");
    checks->add_option("--only", only, "Subset of criteria, e.g. 1,2,9");
    checks->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    qbd::RunOptions opts;
    opts.threads = threads;
    opts.seed = seed;
    if (out) opts.out = *out;
    opts.configs_dir = configs_dir;

    try {
        if (*run) {
            const auto cfg = qbd::load_config_file(config, opts);
            const auto res = qbd::run_config(cfg, opts);
            std::cout << res.dir.string() << std::endl;
            return res.exit_code;
        }
        if (*sweep) {
            const auto res = qbd::run_sweep(qbd::read_file(config), axis, qbd::parse_sweep_values(values), opts);
            std::cout << (res.dir / "sweep.csv").string() << std::endl;
            return res.exit_code;
        }
        const auto limit = qbd::thread_limit(threads);
        const auto res = qbd::run_checks(parse_criteria(only), configs_dir, out ? *out : "out/checks", &std::cout);
        return res.exit_code;
    } catch (const qbd::ValidationError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const qbd::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }
}
