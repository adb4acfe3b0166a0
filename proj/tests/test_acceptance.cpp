// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <iostream>

#include "qbd/runner/run.hpp"

int main() {
    std::vector<int> all;
    for (int c = 1; c <= 10; ++c) all.push_back(c);
    const auto res = qbd::run_checks(all, QBD_CONFIGS_DIR, QBD_SCRATCH_DIR, &std::cout);
    std::size_t passed = 0;
    for (const auto& r : res.results) passed += r.pass;
    std::printf("acceptance: %zu/%zu criteria passed\n", passed, res.results.size());
    return res.exit_code == 0 ? 0 : 1;
}
