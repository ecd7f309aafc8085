#pragma once

// Small built-in instances shared by the oracle checks, the tests and the
// `oracle-check` command.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "stage1.hpp"
#include "stage2.hpp"

namespace v2x::fixture {

/// Two-level-channel scheduling problem with one link of each class, one RB
/// and a two-packet buffer: small enough for exhaustive policy search.
struct ToyMdp {
    stage2::Problem problem;
    stage2::ChannelSet channels;
};

inline ScenarioConfig toy_config() {
    ScenarioConfig c;
    c.queue_capacity = 2;
    c.arrival_process = ArrivalKind::bernoulli;
    c.slot_duration = 1;
    c.tdi_update_interval = 1;
    c.arrival_rate = 0.3;
    c.bandwidth_per_rb = 160; // one 20-byte packet per slot per bit/s/Hz
    c.packet_size_ds = 20;
    c.packet_size_nds = 20;
    c.noise_power = 1;
    c.tx_power = 1;
    c.sinr_threshold = 1;
    c.validate();
    return c;
}

/// NDS link 0 and DS link 1 (with one neighbor). Channel state 0 is poor,
/// state 1 good; each has probability 1/2. With `deterministic` only the
/// good state remains.
inline ToyMdp toy_mdp(bool deterministic = false) {
    ScenarioConfig c = toy_config();
    ToyMdp t;
    t.problem = stage2::make_problem(c, 1, 1, 1, stage2::Multipliers::uniform(1, 1, 0.5, 0.001, 0.2, 0.1));
    auto state = [](double nds_gain, double neighbor_gain) {
        ChannelRealization h(2, 1, {0, 1});
        h.to_bs(0, 0) = nds_gain;
        h.to_bs(1, 0) = 1;
        h.to_neighbor(1, 0, 0) = neighbor_gain;
        return h;
    };
    if (deterministic) {
        t.channels.h = {state(3, 8)};
        t.channels.prob = {1.0};
    } else {
        t.channels.h = {state(1, 1.5), state(3, 8)};
        t.channels.prob = {0.5, 0.5};
    }
    return t;
}

struct Stage1Deviation {
    double max_epsilon = 0;
    double max_utility = 0;
    int draws = 0;
};

/// Closed-form shares against the numerical simplex solver over random TDI draws.
inline Stage1Deviation stage1_oracle_deviation(Regime regime, int draws, Rng& rng, const stage1::UtilityParams& p) {
    Stage1Deviation d;
    for (int n = 0; n < draws; ++n) {
        TdiVector tdi = sample_tdi(regime, rng);
        stage1::ShareVector s = stage1::allocate_shares(tdi, p);
        oracle::NumericShares o = oracle::solve_shares_numerically(tdi, p);
        for (int i = 0; i < kSubregions; ++i) d.max_epsilon = std::max(d.max_epsilon, std::abs(s.epsilon[i] - o.epsilon[i]));
        d.max_utility = std::max(d.max_utility, std::abs(stage1::total_utility(tdi, s.epsilon, p) -
                                                         stage1::total_utility(tdi, o.epsilon, p)));
        ++d.draws;
    }
    return d;
}

} // namespace v2x::fixture
