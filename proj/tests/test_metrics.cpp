#include <gtest/gtest.h>

#include <v2x/metrics.hpp>

using namespace v2x;

namespace {

RadioParams unit_radio() {
    RadioParams rp;
    rp.tx_power = 1;
    rp.noise_power = 1;
    rp.sinr_threshold = 1;
    rp.bandwidth = 180e3;
    rp.slot = 1e-3;
    return rp;
}

/// Links: NDS 0, DS 1 with the given neighbor count, on `n_rbs` RBs, every gain 1.
ChannelRealization flat(int n_neighbors, int n_rbs = 1) {
    ChannelRealization h(2, n_rbs, {0, n_neighbors});
    for (int k = 0; k < n_rbs; ++k) {
        h.to_bs(0, k) = h.to_bs(1, k) = 1;
        for (int j = 0; j < n_neighbors; ++j) h.to_neighbor(1, j, k) = 1;
    }
    return h;
}

} // namespace

TEST(SinrDs, NoRbIsZero) {
    EXPECT_EQ(sinr_ds(1, 0, 1, {-1, -1}, flat(1), unit_radio()), 0.0);
}

TEST(SinrDs, NoInterferer) {
    auto h = flat(1);
    h.to_neighbor(1, 0, 0) = 3;
    EXPECT_DOUBLE_EQ(sinr_ds(1, 0, 1, {-1, 0}, h, unit_radio()), 3.0);
}

TEST(SinrDs, SharedRbHandExpanded) {
    auto rp = unit_radio();
    rp.tx_power = 0.2;
    rp.noise_power = 0.05;
    auto h = flat(1);
    h.to_neighbor(1, 0, 0) = 4;
    h.to_bs(0, 0) = 0.7;
    // P G_ij / (sigma^2 + P G_m0)
    EXPECT_DOUBLE_EQ(sinr_ds(1, 0, 1, {0, 0}, h, rp), 0.2 * 4 / (0.05 + 0.2 * 0.7));
    // an NDS link on another RB does not interfere
    auto h2 = flat(1, 2);
    h2.to_neighbor(1, 0, 1) = 4;
    EXPECT_DOUBLE_EQ(sinr_ds(1, 0, 1, {0, 1}, h2, rp), 0.2 * 4 / 0.05);
}

TEST(Prr, AllAboveThresholdIsOne) {
    auto h = flat(3);
    for (int j = 0; j < 3; ++j) h.to_neighbor(1, j, 0) = 5;
    EXPECT_DOUBLE_EQ(prr(1, 1, {-1, 0}, h, unit_radio()), 1.0);
}

TEST(Prr, NoRbWithPositiveThresholdIsZero) { EXPECT_DOUBLE_EQ(prr(1, 1, {-1, -1}, flat(2), unit_radio()), 0.0); }

TEST(Prr, TwoOfThree) {
    auto h = flat(3);
    h.to_neighbor(1, 0, 0) = 2;
    h.to_neighbor(1, 1, 0) = 0.5;
    h.to_neighbor(1, 2, 0) = 1.0; // exactly at threshold counts
    EXPECT_DOUBLE_EQ(prr(1, 1, {-1, 0}, h, unit_radio()), 2.0 / 3.0);
}

TEST(Prr, NoNeighborsIsOne) { EXPECT_DOUBLE_EQ(prr(1, 1, {-1, -1}, flat(0), unit_radio()), 1.0); }

TEST(Prr, InUnitIntervalAndNonincreasingInThreshold) {
    Rng rng(1);
    std::uniform_real_distribution<double> g(0.01, 10);
    for (int trial = 0; trial < 2000; ++trial) {
        auto h = flat(4);
        h.to_bs(0, 0) = g(rng);
        for (int j = 0; j < 4; ++j) h.to_neighbor(1, j, 0) = g(rng);
        Assignment a = {static_cast<std::int8_t>(trial % 2 ? 0 : -1), 0};
        auto rp = unit_radio();
        double prev = 2;
        for (double th : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 50.0}) {
            rp.sinr_threshold = th;
            double p = prr(1, 1, a, h, rp);
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
            EXPECT_LE(p, prev);
            prev = p;
        }
    }
}

TEST(RateNds, ZeroSinrIsZeroRate) {
    auto h = flat(0);
    h.to_bs(0, 0) = 0;
    EXPECT_DOUBLE_EQ(rate_nds(0, 1, {0, -1}, h, unit_radio()), 0.0);
    EXPECT_DOUBLE_EQ(rate_nds(0, 1, {-1, -1}, flat(0), unit_radio()), 0.0);
}

TEST(RateNds, UnitSnrGivesBandwidth) {
    EXPECT_DOUBLE_EQ(rate_nds(0, 1, {0, -1}, flat(0), unit_radio()), 180e3);
    auto rp = unit_radio();
    rp.log_base = LogBase::natural;
    EXPECT_DOUBLE_EQ(rate_nds(0, 1, {0, -1}, flat(0), rp), 180e3 * std::log(2.0));
}

TEST(RateNds, InterfererUsesStrongestNeighborGain) {
    auto h = flat(2);
    h.to_neighbor(1, 0, 0) = 0.4;
    h.to_neighbor(1, 1, 0) = 0.9;
    h.to_bs(1, 0) = 100; // the DS link's own BS gain plays no part
    EXPECT_DOUBLE_EQ(sinr_nds(0, 1, {0, 0}, h, unit_radio()), 1.0 / (1.0 + 0.9));
    EXPECT_DOUBLE_EQ(rate_nds(0, 1, {0, 0}, h, unit_radio()), 180e3 * std::log2(1.0 + 1.0 / 1.9));
}

TEST(RateNds, InterfererWithoutNeighborsUsesBsGain) {
    auto h = flat(0);
    h.to_bs(1, 0) = 0.5;
    EXPECT_DOUBLE_EQ(sinr_nds(0, 1, {0, 0}, h, unit_radio()), 1.0 / 1.5);
}

TEST(RateNds, MonotoneInOwnAndInterferenceGains) {
    Rng rng(2);
    std::uniform_real_distribution<double> g(0.01, 10), up(1.0, 3.0);
    auto rp = unit_radio();
    for (int trial = 0; trial < 5000; ++trial) {
        auto h = flat(2);
        h.to_bs(0, 0) = g(rng);
        h.to_neighbor(1, 0, 0) = g(rng);
        h.to_neighbor(1, 1, 0) = g(rng);
        double r = rate_nds(0, 1, {0, 0}, h, rp);
        auto more_own = h;
        more_own.to_bs(0, 0) *= up(rng);
        EXPECT_GE(rate_nds(0, 1, {0, 0}, more_own, rp), r);
        auto more_int = h;
        more_int.to_neighbor(1, trial % 2, 0) *= up(rng);
        EXPECT_LE(rate_nds(0, 1, {0, 0}, more_int, rp), r);
    }
}

TEST(Evaluate, DsDeparturesGatedOnWeakestNeighbor) {
    auto rp = unit_radio();
    rp.bandwidth = 160e3; // one 20-byte packet per ms at 1 bit/s/Hz
    auto h = flat(2);
    h.to_neighbor(1, 0, 0) = 3;   // log2(4) = 2 packets if it were alone
    h.to_neighbor(1, 1, 0) = 0.5; // below threshold
    auto o = evaluate_action(1, {-1, 0}, h, rp);
    EXPECT_EQ(o.departures[1], 0);
    EXPECT_DOUBLE_EQ(o.prr[0], 0.5);
    h.to_neighbor(1, 1, 0) = 7; // weakest now 3 -> log2(4) = 2
    o = evaluate_action(1, {-1, 0}, h, rp);
    EXPECT_EQ(o.departures[1], 2);
    EXPECT_DOUBLE_EQ(o.prr[0], 1.0);
}

TEST(Evaluate, DsWithoutNeighborsUsesBs) {
    auto rp = unit_radio();
    rp.bandwidth = 160e3;
    auto h = flat(0);
    h.to_bs(1, 0) = 7; // log2(8) = 3
    auto o = evaluate_action(1, {-1, 0}, h, rp);
    EXPECT_EQ(o.departures[1], 3);
    EXPECT_DOUBLE_EQ(o.prr[0], 1.0);
}

TEST(Evaluate, NdsDeparturesFromRate) {
    auto rp = unit_radio();
    rp.bandwidth = 2400e3; // 2.4 Mbit/s at unit SNR = one 300-byte packet per ms
    auto o = evaluate_action(1, {0, -1}, flat(0), rp);
    EXPECT_EQ(o.departures[0], 1);
    EXPECT_DOUBLE_EQ(o.rate[0], 2400e3);
}

TEST(Average, LittleRatio) {
    EXPECT_DOUBLE_EQ(average_delay(2, 4), 0.5);
    EXPECT_DOUBLE_EQ(average_delay(0, 4), 0.0);
    EXPECT_TRUE(std::isnan(average_delay(1, 0)));
}

TEST(Accumulator, MeansAndMergeAreSumsOfSums) {
    LinkAccumulator a, b;
    a.add(2, 10, 4, 1.0, 0);
    a.add(4, 10, 4, 0.5, 0);
    b.add(10, 10, 4, 0.0, 0);
    EXPECT_DOUBLE_EQ(a.mean_queue(), 3.0);
    EXPECT_DOUBLE_EQ(a.mean_delay(), 0.75);
    EXPECT_DOUBLE_EQ(a.mean_prr(), 0.75);
    LinkAccumulator ab = a, ba = b;
    ab.merge(b);
    ba.merge(a);
    EXPECT_DOUBLE_EQ(ab.mean_queue(), ba.mean_queue());
    EXPECT_DOUBLE_EQ(ab.mean_queue(), 16.0 / 3);
    EXPECT_DOUBLE_EQ(ab.overflow_frac(), 1.0 / 3);
    LinkAccumulator empty, zero_rate;
    EXPECT_TRUE(std::isnan(empty.mean_delay()));
    zero_rate.add(3, 10, 0, 1, 0);
    EXPECT_TRUE(std::isnan(zero_rate.mean_delay()));
}

TEST(Accumulator, TimeAverageConverges) {
    // stationary queue: doubling the horizon moves the mean by under 2%
    ArrivalProcess arr{ArrivalKind::poisson, 0.3};
    Rng rng(4);
    std::bernoulli_distribution serve(0.5);
    TrackedQueue q(50);
    LinkAccumulator acc;
    const long n = 400000;
    double half = 0;
    for (long t = 0; t < 2 * n; ++t) {
        acc.add(q.length(), 50, 300, 1, 0);
        q.step(t, serve(rng), arr.draw(rng));
        if (t == n - 1) half = acc.mean_queue();
    }
    EXPECT_NEAR(acc.mean_queue() / half, 1.0, 0.02);
}
