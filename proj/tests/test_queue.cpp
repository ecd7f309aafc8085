#include <gtest/gtest.h>

#include <numeric>

#include <v2x/queue.hpp>

using namespace v2x;

TEST(StepQueue, Examples) {
    EXPECT_EQ(step_queue(5, 2, 3, 10), 6);
    EXPECT_EQ(step_queue(9, 0, 4, 10), 10);
    EXPECT_EQ(step_queue(1, 5, 0, 10), 0);
}

TEST(StepQueue, FuzzStaysInRange) {
    Rng rng(1);
    std::uniform_int_distribution<int> cap_d(1, 30), big(0, 40);
    for (int trial = 0; trial < 200; ++trial) {
        int cap = cap_d(rng);
        int q = 0;
        for (int t = 0; t < 5000; ++t) {
            q = step_queue(q, big(rng), big(rng), cap);
            ASSERT_GE(q, 0);
            ASSERT_LE(q, cap);
        }
    }
}

TEST(StepQueue, MonotoneWithoutServiceOrArrivals) {
    Rng rng(2);
    std::uniform_int_distribution<int> a(0, 3);
    int q = 0;
    for (int t = 0; t < 100; ++t) {
        int n = step_queue(q, 0, a(rng), 10);
        EXPECT_GE(n, q);
        q = n;
    }
    EXPECT_EQ(q, 10);
    for (int t = 0; t < 100; ++t) {
        int n = step_queue(q, a(rng), 0, 10);
        EXPECT_LE(n, q);
        q = n;
    }
    EXPECT_EQ(q, 0);
}

TEST(Departures, Examples) {
    EXPECT_EQ(departures_from_rate(0, 1e-3, 20), 0);
    EXPECT_EQ(departures_from_rate(160e3, 1e-3, 20), 1);    // exactly one 20-byte packet per ms
    EXPECT_EQ(departures_from_rate(1.9 * 160e3, 1e-3, 20), 1);
    EXPECT_EQ(departures_from_rate(-5, 1e-3, 20), 0);
    // 1.2 Mbit/s over 2 ms in 300-byte packets is exactly one
    EXPECT_EQ(departures_from_rate(1.2e6, 2e-3, 300), 1);
}

TEST(Arrivals, PoissonMeanPerSlot) {
    ArrivalProcess p{ArrivalKind::poisson, 5 * 1e-3};
    Rng rng(3);
    auto a = sample_arrivals(p, 1000000, rng);
    double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    EXPECT_NEAR(mean, 0.005, 0.05 * 0.005);
}

TEST(Arrivals, ZeroRateAllZeros) {
    ArrivalProcess p{ArrivalKind::poisson, 0.0};
    Rng rng(4);
    auto a = sample_arrivals(p, 10000, rng);
    EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](int x) { return x == 0; }));
}

TEST(Arrivals, IndependentStreams) {
    ArrivalProcess p{ArrivalKind::poisson, 0.3};
    RngStreams s(7);
    Rng r1 = s.stream("arrivals", 0, 0), r2 = s.stream("arrivals", 0, 1);
    const int n = 1000000;
    auto a = sample_arrivals(p, n, r1), b = sample_arrivals(p, n, r2);
    double ma = 0, mb = 0;
    for (int i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.01);
}

TEST(Arrivals, PmfSumsToOneAndFoldsTail) {
    for (double m : {0.0, 0.005, 0.3, 2.5}) {
        ArrivalProcess p{ArrivalKind::poisson, m};
        auto pmf = p.pmf(4);
        EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-15);
        EXPECT_NEAR(pmf[0], std::exp(-m), 1e-15);
    }
    ArrivalProcess b{ArrivalKind::bernoulli, 0.3};
    auto pmf = b.pmf(2);
    EXPECT_DOUBLE_EQ(pmf[0], 0.7);
    EXPECT_DOUBLE_EQ(pmf[1], 0.3);
    EXPECT_DOUBLE_EQ(pmf[2], 0.0);
}

TEST(Arrivals, DrawMatchesPmf) {
    ArrivalProcess p{ArrivalKind::poisson, 0.8};
    Rng rng(5);
    const int n = 400000, cap = 3;
    std::vector<double> freq(cap + 1, 0.0);
    for (int i = 0; i < n; ++i) freq[std::min(cap, p.draw(rng))] += 1.0 / n;
    auto pmf = p.pmf(cap);
    for (int a = 0; a <= cap; ++a) EXPECT_NEAR(freq[a], pmf[a], 5 * std::sqrt(pmf[a] / n));
}

TEST(TrackedQueue, MatchesStepQueueAndCountsDrops) {
    Rng rng(6);
    std::uniform_int_distribution<int> d(0, 4), a(0, 5);
    TrackedQueue tq(6);
    int q = 0;
    long offered = 0;
    for (long t = 0; t < 100000; ++t) {
        int dep = d(rng), arr = a(rng);
        offered += arr;
        tq.step(t, dep, arr);
        q = step_queue(q, dep, arr, 6);
        ASSERT_EQ(tq.length(), q);
    }
    EXPECT_EQ(offered, tq.served() + tq.dropped() + tq.length());
}

TEST(TrackedQueue, SojournIsServiceSlotMinusArrivalSlot) {
    TrackedQueue q(10);
    q.step(0, 0, 2); // two packets stamped 0
    q.step(3, 1, 0); // one served after 3 slots
    q.step(5, 5, 0); // the other after 5
    EXPECT_EQ(q.served(), 2);
    EXPECT_DOUBLE_EQ(q.sojourn_sum_slots(), 8.0);
    EXPECT_DOUBLE_EQ(q.mean_sojourn_slots(), 4.0);
}

TEST(TrackedQueue, LittleHoldsOnStationaryQueue) {
    // Poisson arrivals, Bernoulli single-packet service, roomy buffer
    ArrivalProcess arr{ArrivalKind::poisson, 0.2};
    Rng rng(9);
    std::bernoulli_distribution serve(0.4);
    TrackedQueue q(60);
    double area = 0;
    long admitted = 0;
    const long n = 1000000;
    for (long t = 0; t < n; ++t) {
        area += q.length(); // queue seen at the start of the slot
        int a = arr.draw(rng);
        admitted += a - q.step(t, serve(rng) ? 1 : 0, a);
    }
    ASSERT_EQ(q.dropped(), 0);
    double little = area / (arr.mean_per_slot * n);
    EXPECT_NEAR(little / q.mean_sojourn_slots(), 1.0, 0.05);
    EXPECT_NEAR(static_cast<double>(admitted) / n, 0.2, 0.005);
}
