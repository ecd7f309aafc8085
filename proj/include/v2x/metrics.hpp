#pragma once

// Link-level performance: SINR, packet reception ratio, uplink rate, the
// per-slot departures they translate into, and time-averaged readouts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "model.hpp"
#include "queue.hpp"

namespace v2x {

/// The radio constants the link formulas need, copied out of the config.
struct RadioParams {
    double tx_power = 0.2;
    double noise_power = 5.69e-15;
    double sinr_threshold = 3.1623;
    double bandwidth = 180e3;
    double slot = 1e-3;
    int packet_size_ds = 20;
    int packet_size_nds = 300;
    LogBase log_base = LogBase::two;

    static RadioParams from(const ScenarioConfig& c) {
        return {c.tx_power, c.noise_power, c.sinr_threshold, c.bandwidth_per_rb,
                c.slot_duration, c.packet_size_ds, c.packet_size_nds, c.log_base};
    }

    double capacity(double sinr) const {
        return log_base == LogBase::two ? std::log2(1.0 + sinr) : std::log1p(sinr);
    }
};

/// SINR of DS link i at its neighbor j. Interference comes from the NDS link
/// sharing i's RB, taken at that link's BS gain.
inline double sinr_ds(int i, int j, int n_nds, const Assignment& a, const ChannelRealization& ch,
                      const RadioParams& rp) {
    int k = a[i];
    if (k < 0) return 0.0;
    double interference = 0;
    for (int m = 0; m < n_nds; ++m)
        if (a[m] == k) interference += rp.tx_power * ch.to_bs(m, k);
    return rp.tx_power * ch.to_neighbor(i, j, k) / (rp.noise_power + interference);
}

/// Fraction of i's neighbors at or above the SINR threshold. With no neighbors
/// nobody can miss the packet, so the ratio is 1.
inline double prr(int i, int n_nds, const Assignment& a, const ChannelRealization& ch, const RadioParams& rp) {
    int n = ch.n_neighbors(i);
    if (n == 0) return 1.0;
    if (a[i] < 0) return rp.sinr_threshold > 0 ? 0.0 : 1.0;
    int ok = 0;
    for (int j = 0; j < n; ++j) ok += sinr_ds(i, j, n_nds, a, ch, rp) >= rp.sinr_threshold;
    return static_cast<double>(ok) / n;
}

/// Weakest-neighbor SINR of DS link i; the BS stands in for an empty neighborhood.
inline double ds_link_sinr(int i, int n_nds, const Assignment& a, const ChannelRealization& ch,
                           const RadioParams& rp) {
    int k = a[i];
    if (k < 0) return 0.0;
    int n = ch.n_neighbors(i);
    if (n == 0) {
        double interference = 0;
        for (int m = 0; m < n_nds; ++m)
            if (a[m] == k) interference += rp.tx_power * ch.to_bs(m, k);
        return rp.tx_power * ch.to_bs(i, k) / (rp.noise_power + interference);
    }
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) worst = std::min(worst, sinr_ds(i, j, n_nds, a, ch, rp));
    return worst;
}

/// Uplink SINR of NDS link i at the BS. Each co-channel DS link j interferes
/// with power P_j times its strongest gain towards its own neighbors.
inline double sinr_nds(int i, int n_nds, const Assignment& a, const ChannelRealization& ch, const RadioParams& rp) {
    int k = a[i];
    if (k < 0) return 0.0;
    double interference = 0;
    for (int j = n_nds; j < static_cast<int>(a.size()); ++j)
        if (a[j] == k) interference += rp.tx_power * ch.max_to_neighbor(j, k);
    return rp.tx_power * ch.to_bs(i, k) / (rp.noise_power + interference);
}

/// Bit/s of NDS link i on its RB; 0 without an RB.
inline double rate_nds(int i, int n_nds, const Assignment& a, const ChannelRealization& ch, const RadioParams& rp) {
    if (a[i] < 0) return 0.0;
    return rp.bandwidth * rp.capacity(sinr_nds(i, n_nds, a, ch, rp));
}

/// What one action achieves on one channel realization.
struct SlotOutcome {
    std::vector<int> departures; // per link, before capping by the queue
    std::vector<double> prr;     // per DS link
    std::vector<double> rate;    // per NDS link, bit/s
};

inline void evaluate_action(int n_nds, const Assignment& a, const ChannelRealization& ch, const RadioParams& rp,
                            SlotOutcome& out) {
    const int n_links = static_cast<int>(a.size());
    out.departures.assign(n_links, 0);
    out.prr.assign(n_links - n_nds, 0.0);
    out.rate.assign(n_nds, 0.0);
    for (int i = 0; i < n_nds; ++i) {
        double r = rate_nds(i, n_nds, a, ch, rp);
        out.rate[i] = r;
        out.departures[i] = departures_from_rate(r, rp.slot, rp.packet_size_nds);
    }
    for (int i = n_nds; i < n_links; ++i) {
        out.prr[i - n_nds] = prr(i, n_nds, a, ch, rp);
        if (a[i] < 0) continue;
        double s = ds_link_sinr(i, n_nds, a, ch, rp);
        // a broadcast packet only leaves the queue when the weakest neighbor decodes it
        if (s >= rp.sinr_threshold)
            out.departures[i] = departures_from_rate(rp.bandwidth * rp.capacity(s), rp.slot, rp.packet_size_ds);
    }
}

inline SlotOutcome evaluate_action(int n_nds, const Assignment& a, const ChannelRealization& ch,
                                   const RadioParams& rp) {
    SlotOutcome o;
    evaluate_action(n_nds, a, ch, rp, o);
    return o;
}

/// Running sums for one link. Averages are plain Cesaro means over the
/// recorded slots.
struct LinkAccumulator {
    long slots = 0;
    double queue_sum = 0;
    double arrival_rate_sum = 0; // Ā per recorded slot, so mixed-rate pooling stays a ratio of sums
    double prr_sum = 0;
    double rate_sum = 0;
    long overflow_slots = 0;

    void add(int q, int capacity, double arrival_rate, double prr_sample, double rate_sample) {
        ++slots;
        queue_sum += q;
        arrival_rate_sum += arrival_rate;
        prr_sum += prr_sample;
        rate_sum += rate_sample;
        overflow_slots += (q == capacity);
    }

    void merge(const LinkAccumulator& o) {
        slots += o.slots;
        queue_sum += o.queue_sum;
        arrival_rate_sum += o.arrival_rate_sum;
        prr_sum += o.prr_sum;
        rate_sum += o.rate_sum;
        overflow_slots += o.overflow_slots;
    }

    double mean_queue() const { return slots ? queue_sum / slots : std::nan(""); }
    double mean_prr() const { return slots ? prr_sum / slots : std::nan(""); }
    double mean_rate() const { return slots ? rate_sum / slots : std::nan(""); }
    double overflow_frac() const { return slots ? static_cast<double>(overflow_slots) / slots : std::nan(""); }

    /// Little's-law delay Q̄/Ā in seconds; NaN (absent) when Ā is zero.
    double mean_delay() const {
        if (slots == 0 || arrival_rate_sum <= 0) return std::nan("");
        return queue_sum / arrival_rate_sum;
    }
};

/// Little's-law delay of a constant-rate queue.
inline double average_delay(double mean_queue, double arrival_rate) {
    if (arrival_rate <= 0) return std::nan("");
    return mean_queue / arrival_rate;
}

} // namespace v2x
