#pragma once

// Finite packet queues. Within a slot, departures are served first and the
// slot's arrivals join at the end; arrivals beyond the capacity are dropped.

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "config.hpp"
#include "rng.hpp"

namespace v2x {

inline int step_queue(int q, int departed, int arrived, int capacity) {
    return std::min(capacity, std::max(0, q - departed) + arrived);
}

/// Whole packets a link can send in one slot at `rate` bit/s.
inline int departures_from_rate(double rate, double slot, int packet_size_bytes) {
    if (!(rate > 0)) return 0;
    double pk = rate * slot / (8.0 * packet_size_bytes);
    // guard against 0.9999999 from a rate that is exactly one packet per slot
    return static_cast<int>(std::floor(pk + 1e-9));
}

struct ArrivalProcess {
    ArrivalKind kind = ArrivalKind::poisson;
    double mean_per_slot = 0; // Ā * slot

    /// One uniform per draw, so streams stay aligned across arrival rates.
    int draw(double u) const {
        if (kind == ArrivalKind::bernoulli) return u < mean_per_slot ? 1 : 0;
        return static_cast<int>(poisson_from_uniform(mean_per_slot, u));
    }

    int draw(Rng& rng) const { return draw(uniform01(rng)); }

    /// P(A = a) for a < cap, with the whole tail folded into a = cap.
    std::vector<double> pmf(int cap) const {
        std::vector<double> p(cap + 1, 0.0);
        if (kind == ArrivalKind::bernoulli) {
            if (cap == 0) {
                p[0] = 1.0;
                return p;
            }
            p[0] = 1.0 - mean_per_slot;
            p[1] = mean_per_slot;
            return p;
        }
        double term = std::exp(-mean_per_slot);
        double acc = 0;
        for (int a = 0; a < cap; ++a) {
            p[a] = term;
            acc += term;
            term *= mean_per_slot / (a + 1);
        }
        p[cap] = std::max(0.0, 1.0 - acc);
        return p;
    }
};

inline ArrivalProcess make_arrival_process(const ScenarioConfig& cfg) {
    return {cfg.arrival_process, cfg.arrival_rate * cfg.slot_duration};
}

inline std::vector<int> sample_arrivals(const ArrivalProcess& proc, long n_slots, Rng& rng) {
    std::vector<int> out(n_slots);
    for (auto& a : out) a = proc.draw(rng);
    return out;
}

/// Finite queue that also remembers each packet's arrival slot, giving the
/// per-packet sojourn times that the Little's-law readout is checked against.
class TrackedQueue {
public:
    explicit TrackedQueue(int capacity) : capacity_(capacity) {}

    int length() const { return static_cast<int>(stamps_.size()); }
    int capacity() const { return capacity_; }

    /// Serves up to `departed` packets in slot `t`, then admits `arrived`
    /// packets stamped with `t`. A packet admitted in slot t and served in slot
    /// s spent s - t slots in the queue. Returns the number of dropped arrivals.
    int step(long t, int departed, int arrived) {
        int served = std::min(departed, length());
        for (int i = 0; i < served; ++i) {
            sojourn_sum_ += static_cast<double>(t - stamps_.front());
            stamps_.pop_front();
        }
        served_ += served;
        int admitted = std::min(arrived, capacity_ - length());
        for (int i = 0; i < admitted; ++i) stamps_.push_back(t);
        dropped_ += arrived - admitted;
        return arrived - admitted;
    }

    void clear() { stamps_.clear(); }

    long served() const { return served_; }
    long dropped() const { return dropped_; }
    double sojourn_sum_slots() const { return sojourn_sum_; }
    /// Mean sojourn of served packets, in slots.
    double mean_sojourn_slots() const { return served_ ? sojourn_sum_ / served_ : 0.0; }

private:
    int capacity_;
    std::deque<long> stamps_;
    double sojourn_sum_ = 0;
    long served_ = 0;
    long dropped_ = 0;
};

} // namespace v2x
