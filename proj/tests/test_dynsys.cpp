#include <gtest/gtest.h>

#include <cmath>

#include "qbd/dynsys.hpp"

using namespace qbd;

namespace {

RotationParams torus(std::vector<double> alpha) {
    RotationParams p;
    p.alpha = std::move(alpha);
    return p;
}

ChaoticParams logistic(double r) {
    ChaoticParams p;
    p.r = r;
    return p;
}

std::vector<double> iterate_values(const DynSystem& sys, State s, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(sys.observable(s));
        s = sys.step(s);
    }
    return out;
}

}  // namespace

TEST(Doubling, RationalOrbitHasPeriodTwo) {
    auto sys = make_doubling();
    State s = doubling_rational(1, 3);
    State s1 = sys.step(s);
    State s2 = sys.step(s1);
    EXPECT_EQ(s1.num[0], 2);
    EXPECT_EQ(s1.den, 3);
    EXPECT_EQ(s2, s);
    EXPECT_DOUBLE_EQ(s1.x[0], 2.0 / 3.0);
}

TEST(Doubling, ZeroIsFixedAndGivesConstantPotential) {
    auto sys = make_doubling();
    auto pot = potential(sys, doubling_rational(0, 1), 1.7, {1, 50});
    for (double v : pot.values) EXPECT_EQ(v, 1.7);
}

TEST(Doubling, PotentialOnThirdAlternates) {
    // cos(2 pi/3) = cos(4 pi/3) = -1/2: the period-2 orbit gives a constant value.
    auto sys = make_doubling();
    auto pot = potential(sys, doubling_rational(1, 3), 1.0, {1, 20});
    for (double v : pot.values) EXPECT_NEAR(v, -0.5, 1e-15);
    // A non-symmetric observable separates the two orbit points.
    auto sys2 = make_doubling({[](double t) { return std::sin(kTwoPi * t); }, kTwoPi});
    auto pot2 = potential(sys2, doubling_rational(1, 3), 1.0, {1, 20});
    EXPECT_EQ(detect_period(pot2.values, 10), std::optional<std::size_t>(2));
    EXPECT_NEAR(pot2.values[0], std::sin(kTwoPi * 2.0 / 3.0), 1e-15);
}

TEST(Doubling, DistanceDoublesBeforeWrap) {
    auto sys = make_doubling();
    const State a = doubling_state(0.1), b = doubling_state(0.1 + 1e-9);
    State x = a, y = b;
    for (int n = 1; n <= 20; ++n) {
        x = sys.step(x);
        y = sys.step(y);
        EXPECT_NEAR(sys.metric(x, y), std::ldexp(sys.metric(a, b), n), 1e-12) << n;
    }
}

TEST(Doubling, EventuallyPeriodicStatesHaveDetectedPeriod) {
    auto sys = make_doubling({[](double t) { return std::sin(kTwoPi * t) + 0.3 * std::cos(4 * kPi * t); }, 5.0});
    for (auto [p, q] : std::vector<std::pair<int, int>>{{1, 7}, {3, 10}, {5, 24}, {1, 31}, {7, 12}}) {
        const auto [pre, period] = doubling_orbit_period(p, q);
        auto v1 = potential(sys, doubling_rational(p, q), 1.0, {0, 200}).values;
        auto v2 = potential(sys, doubling_rational(p, q), 1.0, {0, 200}).values;
        EXPECT_EQ(v1, v2);
        const auto det = detect_period(v1, 100, static_cast<std::size_t>(pre));
        ASSERT_TRUE(det.has_value()) << p << "/" << q;
        EXPECT_EQ(static_cast<std::int64_t>(*det), period) << p << "/" << q;
    }
}

TEST(Rotation, ZeroRotationConstantPotential) {
    auto sys = make_rotation(0.0);
    auto pot = potential(sys, rotation_state({0.0}, {0.0}), 2.5, {1, 30});
    for (double v : pot.values) EXPECT_EQ(v, 2.5);
}

TEST(Rotation, ObservableAlongOrbitIsShiftedCosine) {
    const double theta = 0.37, alpha = (std::sqrt(5.0) - 1.0) / 2.0;
    auto sys = make_rotation(alpha);
    State s = rotation_state({theta}, {alpha});
    auto fast = potential(sys, s, 1.0, {0, 100}).values;
    auto slow = iterate_values(sys, s, 101);
    for (int n = 0; n <= 100; ++n) {
        EXPECT_NEAR(fast[n], std::cos(theta + n * kPi * alpha), 1e-12);
        EXPECT_NEAR(slow[n], fast[n], 1e-11);
    }
}

TEST(Rotation, RationalAlphaExactPeriod) {
    auto sys = make_rotation(0.6);
    for (auto [p, q] : std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {3, 5}, {5, 8}}) {
        auto pot = potential(sys, rotation_rational_state(0.3, p, q), 3.0, {-300, 300});
        for (std::int64_t n = -300; n + 2 * q <= 300; ++n) EXPECT_EQ(pot.at(n + 2 * q), pot.at(n));
        // Iterating the step reproduces the closed form exactly.
        State s = rotation_rational_state(0.3, p, q);
        for (int n = 0; n < 40; ++n) {
            EXPECT_EQ(3.0 * sys.observable(s), pot.at(n));
            s = sys.step(s);
        }
    }
}

TEST(Rotation, RejectsZeroDimension) { EXPECT_THROW(make_rotation(torus({})), ValidationError); }

TEST(Rotation, InverseUndoesStep) {
    auto sys = make_rotation(torus({0.3, -0.7}));
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        State s = sys.sample(rng);
        EXPECT_LE(sys.metric(sys.inverse(sys.step(s)), s), 1e-12);
    }
}

TEST(Shift, ObservableAlongOrbitIsCoordinate) {
    auto dist = SiteDistribution::uniform();
    auto sys = make_anderson_shift(dist, 11);
    State w = shift_realization(99);
    auto pot = potential(sys, w, 1.0, {-20, 20});
    State s = w;
    for (int n = 0; n <= 20; ++n) {
        EXPECT_EQ(sys.observable(s), pot.at(n));
        EXPECT_EQ(pot.at(n), detail::shift_coord(w, dist, n));
        s = sys.step(s);
    }
    s = w;
    for (int n = -1; n >= -20; --n) {
        s = sys.inverse(s);
        EXPECT_EQ(sys.observable(s), pot.at(n));
    }
}

TEST(Shift, LipschitzBoundOnCoordinate) {
    auto dist = SiteDistribution::uniform();
    auto sys = make_anderson_shift(dist, 5);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        State a = sys.sample(rng), b = sys.sample(rng);
        EXPECT_LE(std::abs(sys.observable(a) - sys.observable(b)), 2.0 * sys.metric(a, b) + 1e-15);
    }
}

TEST(Shift, PeriodicSequenceGivesPeriodTwoPotential) {
    auto sys = make_anderson_shift(SiteDistribution::bernoulli({-1.0, 1.0}, {0.5, 0.5}), 3);
    auto pot = potential(sys, shift_periodic_state({0.25, -0.75}), 1.0, {-100, 100});
    EXPECT_EQ(detect_period(pot.values, 10), std::optional<std::size_t>(2));
}

TEST(Shift, RejectsBadProbabilities) {
    EXPECT_THROW(SiteDistribution::bernoulli({-1.0, 1.0}, {0.5, 0.4}), ValidationError);
    EXPECT_NO_THROW(SiteDistribution::bernoulli({-1.0, 1.0}, {0.5, 0.5}));
}

TEST(Shift, RecomputationIsBitIdentical) {
    auto sys = make_anderson_shift(SiteDistribution::uniform(), 77);
    Rng r1(3), r2(3);
    auto a = potential(sys, sys.sample(r1), 3.0, {1, 500});
    auto b = potential(sys, sys.sample(r2), 3.0, {1, 500});
    EXPECT_EQ(a.values, b.values);
}

TEST(Chaotic, FixedPoints) {
    auto t3 = make_chaotic_map(ChaoticKind::tcheb3);
    EXPECT_EQ(t3.step(interval_state(1.0)).x[0], 1.0);
    auto lg = make_chaotic_map(ChaoticKind::logistic, logistic(4.0));
    EXPECT_EQ(lg.step(interval_state(0.75)).x[0], 0.75);
    auto t4 = make_chaotic_map(ChaoticKind::tcheb4);
    State s = t4.step(interval_state(0.0));
    EXPECT_EQ(s.x[0], 1.0);
    EXPECT_EQ(t4.step(s).x[0], 1.0);
}

TEST(Chaotic, LogisticRejectsNonpositiveR) {
    EXPECT_THROW(make_chaotic_map(ChaoticKind::logistic, logistic(0.0)), ValidationError);
}

TEST(Chaotic, TorusRationalPointsArePeriodic) {
    auto sys = make_chaotic_map(ChaoticKind::torus);
    State s = torus_rational(1, 2, 5);
    State t = s;
    int period = 0;
    do {
        t = sys.step(t);
        ++period;
    } while (!(t == s) && period < 1000);
    EXPECT_LT(period, 1000);
    EXPECT_EQ(sys.inverse(sys.step(s)), s);
    auto pot = potential(sys, s, 1.0, {-60, 60});
    EXPECT_EQ(detect_period(pot.values, 100), std::optional<std::size_t>(period));
}

TEST(Twist, CenterIsFixedAndHalfRotation) {
    auto sys = make_twist_map({[](double r) { return kTwoPi * r; }, kTwoPi});
    State c = twist_state(1.0, 0.0);
    EXPECT_EQ(sys.step(c), c);
    State s = twist_state(0.4, 0.5);
    State s1 = sys.step(s), s2 = sys.step(s1);
    EXPECT_NEAR(detail::circle_dist(s1.x[0], 0.4 + kPi, kTwoPi), 0.0, 1e-14);
    EXPECT_NEAR(sys.metric(s2, s), 0.0, 1e-14);
}

TEST(Twist, RejectsRhoOutOfRange) {
    EXPECT_THROW(make_twist_map({[](double r) { return 8.0 * r; }, 8.0}), ValidationError);
    EXPECT_THROW(make_twist_map({[](double r) { return 1.0 + r; }, 1.0}), ValidationError);
}

TEST(Billiard, QuarterAngleHasPeriodFour) {
    auto sys = make_circular_billiard();
    State s = billiard_state(0.2, kPi / 4);
    State t = s;
    for (int i = 0; i < 4; ++i) {
        t = sys.step(t);
        if (i < 3) {
            EXPECT_GT(sys.metric(t, s), 0.1);
        }
    }
    EXPECT_LT(sys.metric(t, s), 1e-13);
}

TEST(Potential, ZeroCouplingGivesZero) {
    auto pot = potential(make_doubling(), doubling_state(0.123), 0.0, {1, 40});
    for (double v : pot.values) EXPECT_EQ(v, 0.0);
}

TEST(Potential, RankOneAddsKappaAtSiteOne) {
    auto sys = make_rotation(0.3);
    State s = rotation_state({0.1}, {0.3});
    auto base = potential(sys, s, 1.0, {1, 20});
    auto pert = potential(sys, s, 1.0, {1, 20}, Perturbation::rank_one(5.0));
    EXPECT_EQ(pert.at(1), base.at(1) + 5.0);
    for (int n = 2; n <= 20; ++n) EXPECT_EQ(pert.at(n), base.at(n));
}

TEST(Potential, PowerDecayBound) {
    auto w = Perturbation::power_decay(2.0, 0.5, true, 9);
    for (int n = -1000; n <= 1000; ++n) EXPECT_LE(std::abs(w.at(n)), 2.0 * std::pow(1.0 + std::abs(n), -1.5) * (1 + 1e-15));
}

TEST(Potential, WholeLatticeNeedsInverse) {
    auto sys = make_chaotic_map(ChaoticKind::tcheb3);
    EXPECT_THROW(potential(sys, interval_state(0.3), 1.0, {-5, 5}), ValidationError);
    EXPECT_THROW(potential(sys, interval_state(0.3), 1.0, {5, 4}), ValidationError);
}

TEST(Contracts, MetricAxiomsOnSamples) {
    std::vector<DynSystem> systems{make_doubling(), make_rotation(0.4),
                                   make_anderson_shift(SiteDistribution::uniform(), 2),
                                   make_chaotic_map(ChaoticKind::tcheb3), make_chaotic_map(ChaoticKind::torus),
                                   make_twist_map({[](double r) { return kTwoPi * r; }, kTwoPi}),
                                   make_circular_billiard()};
    Rng rng(8);
    for (const auto& sys : systems) {
        for (int i = 0; i < 200; ++i) {
            State a = sys.sample(rng), b = sys.sample(rng);
            EXPECT_NEAR(sys.metric(a, b), sys.metric(b, a), 1e-12) << sys.name;
            EXPECT_GE(sys.metric(a, b), 0.0);
            EXPECT_LE(sys.metric(a, a), 1e-12);
            if (sys.invertible) {
                EXPECT_LE(sys.metric(sys.inverse(sys.step(a)), a), 1e-12) << sys.name;
            }
        }
    }
}

TEST(Contracts, AllGeneratorsPassOnCloseSamples) {
    struct Case {
        DynSystem sys;
        std::int64_t n_max;
    };
    // Horizons stay before wrap-around at delta = 1e-6.
    std::vector<Case> cases{
        {make_doubling(), 18},
        {make_rotation(0.4), 200},
        {make_rotation(torus({0.4, -0.2})), 200},
        {make_anderson_shift(SiteDistribution::uniform(), 2), 30},
        {make_anderson_shift(SiteDistribution::bernoulli({-0.5, 0.5}, {0.3, 0.7}), 3), 30},
        {make_chaotic_map(ChaoticKind::tcheb3), 5},
        {make_chaotic_map(ChaoticKind::tcheb4), 4},
        {make_chaotic_map(ChaoticKind::logistic, logistic(3.7)), 8},
        {make_chaotic_map(ChaoticKind::torus), 20},
        {make_twist_map({[](double r) { return kTwoPi * r * r; }, 2 * kTwoPi}), 200},
        {make_circular_billiard(), 200},
    };
    for (const auto& c : cases) {
        auto rep = verify_contracts(c.sys, c.n_max, 10000, 42);
        EXPECT_TRUE(rep.pass) << c.sys.name << " lip=" << rep.worst_lipschitz_ratio
                              << " exp=" << rep.worst_expansion_ratio << " at n=" << rep.worst_expansion_n;
        EXPECT_GT(rep.pairs_checked, 5000u) << c.sys.name << " skipped=" << rep.pairs_skipped;
    }
}

TEST(Contracts, ZeroDistancePairsAreSkipped) {
    DynSystem sys = make_doubling();
    sys.neighbor = [](const State& s, double, Rng&) { return s; };
    auto rep = verify_contracts(sys, 5, 10, 1);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.pairs_skipped, 10u);
}

TEST(Contracts, DetectsUnderstatedConstant) {
    DynSystem sys = make_doubling();
    sys.expansion.h = [](std::int64_t n) { return std::ldexp(1.0, static_cast<int>(n)) * 0.5; };
    EXPECT_FALSE(verify_contracts(sys, 10, 100, 3).pass);
}
