#include <gtest/gtest.h>

#include <numeric>

#include <v2x/fixtures.hpp>
#include <v2x/stage1.hpp>

using namespace v2x;
using namespace v2x::stage1;

namespace {

const UtilityParams kTable{0.5, 10.0, 2.0};

std::array<double, kSubregions> random_simplex_point(Rng& rng) {
    std::array<double, kSubregions> e{};
    double s = 0;
    for (double& x : e) s += (x = -std::log1p(-uniform01(rng)));
    for (double& x : e) x /= s;
    return e;
}

} // namespace

TEST(Utility, ZeroShareIsZero) {
    for (double k : {0.0, 0.7, 1.0, 1.9}) EXPECT_EQ(utility(k, 0.0, kTable), 0.0);
}

TEST(Utility, PeakWeightIsOne) {
    EXPECT_DOUBLE_EQ(density_weight(1.0, kTable), 1.0);
    EXPECT_DOUBLE_EQ(utility(1.0, 0.3, kTable), std::log1p(10 * 0.3));
}

TEST(Utility, EvenAroundHalfJam) {
    for (double d : {0.1, 0.35, 0.8}) EXPECT_DOUBLE_EQ(utility(1 - d, 0.2, kTable), utility(1 + d, 0.2, kTable));
}

TEST(Threshold, PeakAndMonotone) {
    EXPECT_DOUBLE_EQ(lagrange_threshold(1.0, kTable), 10.0);
    double prev = lagrange_threshold(1.0, kTable);
    for (int i = 1; i <= 50; ++i) {
        double t = lagrange_threshold(1.0 + 0.02 * i, kTable);
        EXPECT_LT(t, prev);
        EXPECT_DOUBLE_EQ(t, lagrange_threshold(1.0 - 0.02 * i, kTable));
        prev = t;
    }
}

TEST(Omega, FirstCandidateAlwaysAdmitted) {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        UtilityParams p{0.05 + 3 * uniform01(rng), 0.01 + 50 * uniform01(rng), 2.0};
        double w = density_weight(2 * uniform01(rng), p);
        double om = omega_candidate(&w, 1, p);
        EXPECT_DOUBLE_EQ(om, w / (1 + 1 / p.c2));
        EXPECT_LT(om, p.c2 * w);
    }
}

TEST(Omega, SymmetricFour) {
    double w[4] = {0.6, 0.6, 0.6, 0.6};
    EXPECT_DOUBLE_EQ(omega_candidate(w, 4, kTable), 4 * 0.6 / (1 + 4 / 10.0));
}

TEST(Omega, SubstitutionSumsToOne) {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        TdiVector tdi = sample_tdi(trial % 2 ? Regime::high : Regime::low, rng);
        ShareVector s = allocate_shares(tdi, kTable);
        // eps_i = (1/c2)(c2 w_i / omega - 1) over the active set
        std::array<double, kSubregions> w{};
        for (int i = 0; i < 4; ++i) w[i] = density_weight(tdi[i], kTable);
        std::array<double, kSubregions> sorted = w;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double om = omega_candidate(sorted.data(), s.active_count, kTable);
        EXPECT_NEAR(om, s.omega, 1e-12);
        double sum = 0;
        for (int r = 0; r < s.active_count; ++r) sum += (kTable.c2 * sorted[r] / om - 1) / kTable.c2;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Shares, EqualDensitiesGiveExactQuarters) {
    for (double k : {0.0, 0.13, 0.5, 1.0, 1.17, 2.5}) {
        ShareVector s = allocate_shares({k, k, k, k}, kTable);
        for (double e : s.epsilon) EXPECT_EQ(e, 0.25);
        EXPECT_EQ(s.active_count, 4);
    }
}

TEST(Shares, AllAtHalfJam) {
    ShareVector s = allocate_shares({1, 1, 1, 1}, kTable);
    EXPECT_DOUBLE_EQ(s.omega, 4 * 10.0 / (4 + 10.0));
    for (double e : s.epsilon) EXPECT_EQ(e, 0.25);
}

TEST(Shares, ExactInvariantsOnFuzzedInputs) {
    Rng rng(3);
    for (int trial = 0; trial < 10000; ++trial) {
        UtilityParams p{0.05 + 2 * uniform01(rng), 0.1 + 30 * uniform01(rng), 2.0};
        TdiVector tdi;
        for (double& k : tdi) k = 2.5 * uniform01(rng);
        ShareVector s = allocate_shares(tdi, p);
        double sum = 0;
        for (double e : s.epsilon) {
            EXPECT_GE(e, 0.0);
            sum += e;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_GE(s.active_count, 1);
        int positive = 0;
        for (int i = 0; i < 4; ++i) {
            double w = density_weight(tdi[i], p);
            if (s.epsilon[i] > 0) {
                ++positive;
                EXPECT_NEAR(p.c2 * w / (1 + p.c2 * s.epsilon[i]), s.omega, 1e-9);
            } else {
                EXPECT_LE(p.c2 * w, s.omega + 1e-9);
            }
        }
        EXPECT_LE(positive, s.active_count);
    }
}

TEST(Shares, DominatesRandomFeasiblePoints) {
    Rng rng(4);
    for (int inst = 0; inst < 20; ++inst) {
        TdiVector tdi = sample_tdi(inst % 2 ? Regime::high : Regime::low, rng);
        ShareVector s = allocate_shares(tdi, kTable);
        double best = total_utility(tdi, s.epsilon, kTable);
        for (int n = 0; n < 10000; ++n)
            ASSERT_GE(best, total_utility(tdi, random_simplex_point(rng), kTable) - 1e-9);
    }
}

TEST(Shares, CloserToHalfJamNeverGetsLess) {
    Rng rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        TdiVector tdi;
        for (double& k : tdi) k = 2 * uniform01(rng);
        ShareVector s = allocate_shares(tdi, kTable);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (std::abs(tdi[i] - 1) < std::abs(tdi[j] - 1)) {
                    EXPECT_GE(s.epsilon[i], s.epsilon[j]);
                }
    }
}

TEST(Shares, TiesResolvedBySubregionOrder) {
    // two equal weights: identical shares, deterministic across calls
    TdiVector tdi{0.2, 1.8, 1.0, 0.2};
    auto a = allocate_shares(tdi, kTable), b = allocate_shares(tdi, kTable);
    EXPECT_EQ(a.epsilon, b.epsilon);
    EXPECT_EQ(a.epsilon[0], a.epsilon[3]);
}

TEST(Shares, FarFromHalfJamCanBeExcluded) {
    UtilityParams p{0.1, 2.0, 2.0};
    ShareVector s = allocate_shares({1.0, 1.0, 0.0, 2.0}, p);
    EXPECT_EQ(s.active_count, 2);
    EXPECT_DOUBLE_EQ(s.epsilon[0], 0.5);
    EXPECT_EQ(s.epsilon[2], 0.0);
    EXPECT_EQ(s.epsilon[3], 0.0);
}

TEST(Shares, MatchNumericalOracle) {
    Rng rng(6);
    for (Regime r : {Regime::low, Regime::high}) {
        auto d = fixture::stage1_oracle_deviation(r, 100, rng, kTable);
        EXPECT_LE(d.max_epsilon, 1e-6);
        EXPECT_LE(d.max_utility, 1e-9);
    }
}

TEST(Oracle, SimplexProjection) {
    auto x = oracle::project_to_simplex<4>({0.5, 0.5, 0.5, 0.5});
    for (double v : x) EXPECT_DOUBLE_EQ(v, 0.25);
    auto y = oracle::project_to_simplex<4>({3, 0, 0, 0});
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(Budget, FloorPlusLargestRemainder) {
    ShareVector s;
    s.epsilon = {0.125, 0.375, 0.125, 0.375};
    EXPECT_EQ(budget_rbs(s, 10, LeftoverMode::strict_floor), (std::array<int, 4>{1, 3, 1, 3}));
    // remainders .25, .75, .25, .75 and two leftovers
    EXPECT_EQ(budget_rbs(s, 10, LeftoverMode::largest_remainder), (std::array<int, 4>{1, 4, 1, 4}));
    // one leftover between equal remainders goes to the lower id
    ShareVector h;
    h.epsilon = {0.5, 0.25, 0.25, 0.0};
    EXPECT_EQ(budget_rbs(h, 2, LeftoverMode::largest_remainder), (std::array<int, 4>{1, 1, 0, 0}));
    ShareVector q;
    q.epsilon = {0.25, 0.25, 0.25, 0.25};
    EXPECT_EQ(budget_rbs(q, 4, LeftoverMode::strict_floor), (std::array<int, 4>{1, 1, 1, 1}));
    EXPECT_EQ(budget_rbs(q, 25, LeftoverMode::largest_remainder), (std::array<int, 4>{7, 6, 6, 6}));
}

TEST(Budget, ConservationOnFuzz) {
    Rng rng(7);
    for (int trial = 0; trial < 5000; ++trial) {
        TdiVector tdi = sample_tdi(trial % 2 ? Regime::high : Regime::low, rng);
        ShareVector s = allocate_shares(tdi, kTable);
        int total = 1 + trial % 60;
        auto floor = budget_rbs(s, total, LeftoverMode::strict_floor);
        auto lr = budget_rbs(s, total, LeftoverMode::largest_remainder);
        EXPECT_LE(std::accumulate(floor.begin(), floor.end(), 0), total);
        EXPECT_EQ(std::accumulate(lr.begin(), lr.end(), 0), total);
        for (int i = 0; i < 4; ++i) {
            EXPECT_EQ(floor[i], static_cast<int>(std::floor(s.epsilon[i] * total + 1e-9)));
            EXPECT_GE(lr[i], floor[i]);
            EXPECT_LE(lr[i], floor[i] + 1);
        }
    }
}
