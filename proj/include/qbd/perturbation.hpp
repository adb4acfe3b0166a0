// Decaying perturbations W(n) added on top of the dynamically generated potential.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "qbd/core.hpp"

namespace qbd {

/// W(n): none, power decay |W(n)| <= C (1+|n|)^{-1-eta}, or a rank-one
/// coupling kappa <delta_1, .> delta_1 acting at site 1.
struct Perturbation {
    enum class Kind { none, power_decay, rank_one };

    Kind kind = Kind::none;
    double c_tilde = 0.0;
    double eta = 0.0;
    bool random_signs = false;  ///< power decay only; default deterministic +1
    std::uint64_t sign_seed = 0;
    double kappa = 0.0;

    static Perturbation none() { return {}; }

    static Perturbation power_decay(double c_tilde, double eta, bool random_signs = false,
                                    std::uint64_t sign_seed = 0) {
        if (!(c_tilde > 0.0) || !(eta > 0.0))
            throw ValidationError("power-decay perturbation needs C_tilde > 0 and eta > 0");
        Perturbation p;
        p.kind = Kind::power_decay;
        p.c_tilde = c_tilde;
        p.eta = eta;
        p.random_signs = random_signs;
        p.sign_seed = sign_seed;
        return p;
    }

    static Perturbation rank_one(double kappa) {
        if (!std::isfinite(kappa)) throw ValidationError("rank-one coupling must be finite");
        Perturbation p;
        p.kind = Kind::rank_one;
        p.kappa = kappa;
        return p;
    }

    double at(std::int64_t n) const {
        switch (kind) {
            case Kind::none:
                return 0.0;
            case Kind::rank_one:
                return n == 1 ? kappa : 0.0;
            case Kind::power_decay: {
                const double mag =
                    c_tilde * std::pow(1.0 + std::abs(static_cast<double>(n)), -1.0 - eta);
                if (!random_signs) return mag;
                return hashed_uniform(sign_seed, n) < 0.5 ? -mag : mag;
            }
        }
        return 0.0;
    }

    std::string describe() const {
        switch (kind) {
            case Kind::none:
                return "none";
            case Kind::rank_one:
                return "rank_one";
            case Kind::power_decay:
                return "power_decay";
        }
        return "?";
    }
};

}  // namespace qbd
