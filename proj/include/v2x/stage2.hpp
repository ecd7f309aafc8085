#pragma once

// Intra-subregion scheduling as an average-cost MDP.
//
// State: the queue vector Q (reduced solver) or the pair (channel sample, Q)
// (full solver). Per-stage Lagrangian cost
//
//   g(Q, H, a) = sum_DS [alpha_i f(Q_i) - beta_i (p_i - p_th)]
//              - sum_NDS gamma_j (r_j - r_th)
//              + lambda (max_DS Q_i/A_i - min_NDS Q_j/A_j)
//              + sum_l eta_l 1{Q_l = N_Q}
//
// splits into a queue part that does not depend on the action and a channel
// part that does not depend on the queues. Next state:
// Q' = min(N_Q, max(0, Q - d(H, a)) + A) with A independent of everything,
// so a Bellman backup only needs the value function smoothed over arrivals,
// U(Q-) = E_A[W(min(N_Q, Q- + A))], evaluated at the post-service queues.
// Both solvers run relative value iteration anchored at Q = 0 and stop when
// the span of the update falls below the tolerance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "queue.hpp"
#include "rng.hpp"

namespace v2x::stage2 {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual = std::nan(""), long iterations = 0)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    long iterations() const { return iterations_; }

private:
    double residual_;
    long iterations_;
};

struct Multipliers {
    std::vector<double> beta;  // per DS link, PRR constraint
    std::vector<double> gamma; // per NDS link, rate constraint
    std::vector<double> eta;   // per link, overflow penalty
    double lambda = 0;         // DS/NDS delay ordering

    static Multipliers uniform(int n_nds, int n_ds, double beta, double gamma, double eta, double lambda) {
        Multipliers m;
        m.beta.assign(n_ds, beta);
        m.gamma.assign(n_nds, gamma);
        m.eta.assign(n_nds + n_ds, eta);
        m.lambda = lambda;
        return m;
    }
};

/// One subregion's scheduling problem for one traffic epoch.
struct Problem {
    int n_nds = 0;
    int n_ds = 0;
    int n_rbs = 0;
    int capacity = 10;
    std::vector<double> arrival_rate;             // pkt/s per link
    std::vector<std::vector<double>> arrival_pmf; // per link, capacity + 1 entries, tail folded into the last
    std::vector<double> alpha;                    // per DS link
    double prr_floor = 0.9;
    double rate_floor = 0;
    double rate_unit = 1e6;
    Multipliers mult;
    RadioParams radio;
    std::vector<Assignment> actions;

    int n_links() const { return n_nds + n_ds; }
};

/// Builds a problem with every link sharing the configured arrival process.
/// `alpha` defaults to the configured weights in DS order.
inline Problem make_problem(const ScenarioConfig& cfg, int n_nds, int n_ds, int n_rbs, Multipliers mult,
                            std::vector<double> alpha = {}) {
    Problem p;
    p.n_nds = n_nds;
    p.n_ds = n_ds;
    p.n_rbs = n_rbs;
    p.capacity = cfg.queue_capacity;
    ArrivalProcess proc = make_arrival_process(cfg);
    p.arrival_rate.assign(n_nds + n_ds, cfg.arrival_rate);
    p.arrival_pmf.assign(n_nds + n_ds, proc.pmf(cfg.queue_capacity));
    if (alpha.empty())
        for (int i = 0; i < n_ds; ++i) alpha.push_back(cfg.alpha(i));
    p.alpha = std::move(alpha);
    p.prr_floor = cfg.prr_floor;
    p.rate_floor = cfg.rate_floor;
    p.rate_unit = cfg.rate_unit;
    p.mult = std::move(mult);
    p.radio = RadioParams::from(cfg);
    p.actions = enumerate_assignments(n_nds, n_ds, n_rbs, cfg.enumeration_cap);
    return p;
}

// ---------------------------------------------------------------------------
// Cost

inline double delay_proxy(int q, double arrival_rate) { return arrival_rate > 0 ? q / arrival_rate : q; }

/// Action-independent part of the per-stage cost.
inline double queue_cost(const Problem& p, const int* q) {
    double c = 0;
    double max_ds = -std::numeric_limits<double>::infinity();
    double min_nds = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.n_ds; ++i) {
        int l = p.n_nds + i;
        double f = delay_proxy(q[l], p.arrival_rate[l]);
        c += p.alpha[i] * f;
        max_ds = std::max(max_ds, f);
    }
    for (int j = 0; j < p.n_nds; ++j) min_nds = std::min(min_nds, delay_proxy(q[j], p.arrival_rate[j]));
    // the ordering term needs both classes present
    if (p.n_ds > 0 && p.n_nds > 0) c += p.mult.lambda * (max_ds - min_nds);
    for (int l = 0; l < p.n_links(); ++l)
        if (q[l] == p.capacity) c += p.mult.eta[l];
    return c;
}

/// Queue-independent part of the per-stage cost.
inline double channel_cost(const Problem& p, const SlotOutcome& o) {
    double c = 0;
    for (int i = 0; i < p.n_ds; ++i) c -= p.mult.beta[i] * (o.prr[i] - p.prr_floor);
    for (int j = 0; j < p.n_nds; ++j) c -= p.mult.gamma[j] * (o.rate[j] - p.rate_floor) / p.rate_unit;
    return c;
}

inline double per_stage_cost(const Problem& p, const std::vector<int>& q, const SlotOutcome& o) {
    return queue_cost(p, q.data()) + channel_cost(p, o);
}

// ---------------------------------------------------------------------------
// Channel sets: the distribution over channel realizations a solver averages over.

struct ChannelSet {
    std::vector<ChannelRealization> h;
    std::vector<double> prob;

    std::size_t size() const { return h.size(); }
};

/// n equally likely Monte Carlo draws.
inline ChannelSet sample_channel_set(const SubregionGeometry& geo, int n_rbs, int n_tx, int n, Rng& rng) {
    ChannelSet s;
    s.h.reserve(n);
    for (int i = 0; i < n; ++i) s.h.push_back(realize_channels(geo, n_rbs, n_tx, rng));
    s.prob.assign(n, 1.0 / n);
    return s;
}

namespace detail {

// Regularized lower incomplete gamma for integer shape n.
inline double gamma_cdf_int(int n, double t) {
    if (t <= 0) return 0;
    double term = 1, sum = 1;
    for (int k = 1; k < n; ++k) {
        term *= t / k;
        sum += term;
    }
    return 1.0 - std::exp(-t) * sum;
}

} // namespace detail

/// Conditional means of a Gamma(n_tx, 1) fading power over `levels`
/// equiprobable bins; the representative gain of each quantization level.
inline std::vector<double> fading_levels(int n_tx, int levels) {
    std::vector<double> edges(levels + 1);
    edges[0] = 0;
    edges[levels] = std::numeric_limits<double>::infinity();
    for (int j = 1; j < levels; ++j) {
        double target = static_cast<double>(j) / levels, lo = 0, hi = 10.0 * n_tx + 50;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (detail::gamma_cdf_int(n_tx, mid) < target ? lo : hi) = mid;
        }
        edges[j] = 0.5 * (lo + hi);
    }
    auto partial = [&](double t) { return std::isinf(t) ? 1.0 : detail::gamma_cdf_int(n_tx + 1, t); };
    std::vector<double> rep(levels);
    for (int j = 0; j < levels; ++j) rep[j] = n_tx * (partial(edges[j + 1]) - partial(edges[j])) * levels;
    return rep;
}

/// Every combination of per-gain quantization levels, equally likely.
/// Only small subregions qualify: the set has levels^(number of gains) entries.
inline ChannelSet quantized_channel_set(const SubregionGeometry& geo, int n_rbs, int n_tx, int levels,
                                        long max_states = 1 << 16) {
    int n_gains = 0;
    std::vector<int> counts(geo.n_links());
    for (int l = 0; l < geo.n_links(); ++l) {
        counts[l] = static_cast<int>(geo.to_neighbors[l].size());
        n_gains += n_rbs * (1 + counts[l]);
    }
    double n_states = std::pow(static_cast<double>(levels), n_gains);
    if (n_states > static_cast<double>(max_states))
        throw ActionSpaceTooLarge("quantized channel set would have " + std::to_string(n_states) +
                                  " states; use the sampled channel model");
    std::vector<double> rep = fading_levels(n_tx, levels);
    ChannelSet s;
    long total = static_cast<long>(n_states);
    std::vector<int> digit(n_gains, 0);
    for (long c = 0; c < total; ++c) {
        long x = c;
        for (int g = n_gains - 1; g >= 0; --g) {
            digit[g] = static_cast<int>(x % levels);
            x /= levels;
        }
        ChannelRealization h(geo.n_links(), n_rbs, counts);
        int g = 0;
        for (int l = 0; l < geo.n_links(); ++l) {
            for (int k = 0; k < n_rbs; ++k) h.to_bs(l, k) = geo.to_bs[l] * rep[digit[g++]];
            for (int j = 0; j < counts[l]; ++j)
                for (int k = 0; k < n_rbs; ++k) h.to_neighbor(l, j, k) = geo.to_neighbors[l][j] * rep[digit[g++]];
        }
        s.h.push_back(std::move(h));
    }
    s.prob.assign(total, 1.0 / total);
    return s;
}

// ---------------------------------------------------------------------------
// Queue space

/// Mixed-radix indexing of queue vectors, link 0 most significant.
class QueueSpace {
public:
    QueueSpace(int n_links, int capacity) : n_links_(n_links), capacity_(capacity), stride_(n_links) {
        if (n_links > 8) throw SolverError("queue space limited to 8 links, got " + std::to_string(n_links));
        double size = std::pow(capacity + 1.0, n_links);
        if (size > 2e7) throw SolverError("queue space of " + std::to_string(size) + " states is too large");
        size_ = 1;
        for (int l = n_links - 1; l >= 0; --l) {
            stride_[l] = size_;
            size_ *= capacity + 1;
        }
        // off_[l][q * (cap+1) + d] = stride * max(0, q - d)
        off_.assign(n_links, std::vector<int>((capacity + 1) * (capacity + 1)));
        for (int l = 0; l < n_links; ++l)
            for (int q = 0; q <= capacity; ++q)
                for (int d = 0; d <= capacity; ++d) off_[l][q * (capacity + 1) + d] = stride_[l] * std::max(0, q - d);
    }

    int n_links() const { return n_links_; }
    int capacity() const { return capacity_; }
    int size() const { return size_; }
    int stride(int l) const { return stride_[l]; }

    int index(const int* q) const {
        int s = 0;
        for (int l = 0; l < n_links_; ++l) s += stride_[l] * q[l];
        return s;
    }
    int index(const std::vector<int>& q) const { return index(q.data()); }

    void decode(int s, int* q) const {
        for (int l = 0; l < n_links_; ++l) {
            q[l] = s / stride_[l];
            s %= stride_[l];
        }
    }
    std::vector<int> decode(int s) const {
        std::vector<int> q(n_links_);
        decode(s, q.data());
        return q;
    }

    /// Index of max(0, q - d), d already capped at the capacity.
    int served_index(const int* q, const std::uint8_t* d) const {
        int s = 0;
        for (int l = 0; l < n_links_; ++l) s += off_[l][q[l] * (capacity_ + 1) + d[l]];
        return s;
    }

private:
    int n_links_;
    int capacity_;
    int size_ = 1;
    std::vector<int> stride_;
    std::vector<std::vector<int>> off_;
};

/// U(Q-) = E_A[W(min(N_Q, Q- + A))], applied one link axis at a time.
inline std::vector<double> smooth_over_arrivals(const Problem& p, const QueueSpace& qs, const std::vector<double>& w) {
    std::vector<double> cur = w, next(w.size());
    const int n = qs.capacity() + 1;
    std::vector<double> line(n);
    for (int l = 0; l < qs.n_links(); ++l) {
        const auto& pmf = p.arrival_pmf[l];
        const int stride = qs.stride(l);
        const int block = stride * n;
        for (int base = 0; base < qs.size(); base += block) {
            for (int off = 0; off < stride; ++off) {
                int s0 = base + off;
                for (int q = 0; q < n; ++q) line[q] = cur[s0 + q * stride];
                for (int q = 0; q < n; ++q) {
                    double acc = 0, tail = 1.0;
                    for (int a = 0; q + a < n - 1; ++a) {
                        acc += pmf[a] * line[q + a];
                        tail -= pmf[a];
                    }
                    acc += tail * line[n - 1];
                    next[s0 + q * stride] = acc;
                }
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Outcome tables

/// Distinct capped departure vectors, interned to small ids.
class PatternBook {
public:
    explicit PatternBook(int n_links = 0) : n_links_(n_links) {}

    int intern(const std::vector<int>& d, int capacity) {
        std::uint64_t key = 0;
        std::vector<std::uint8_t> pat(n_links_);
        for (int l = 0; l < n_links_; ++l) {
            pat[l] = static_cast<std::uint8_t>(std::min(d[l], capacity));
            key = (key << 8) | pat[l];
        }
        auto [it, fresh] = ids_.try_emplace(key, static_cast<int>(patterns_.size()));
        if (fresh) patterns_.push_back(std::move(pat));
        return it->second;
    }

    int size() const { return static_cast<int>(patterns_.size()); }
    const std::uint8_t* operator[](int id) const { return patterns_[id].data(); }

private:
    int n_links_;
    std::vector<std::vector<std::uint8_t>> patterns_;
    std::unordered_map<std::uint64_t, int> ids_;
};

/// Departure pattern and channel cost of every (channel, action) pair.
struct OutcomeTable {
    int n_h = 0;
    int n_a = 0;
    std::vector<double> prob_h;
    std::vector<int> pattern; // [h * n_a + a]
    std::vector<double> cost; // [h * n_a + a]
    PatternBook book;
};

inline OutcomeTable tabulate_outcomes(const Problem& p, const ChannelSet& set) {
    OutcomeTable t;
    t.n_h = static_cast<int>(set.size());
    t.n_a = static_cast<int>(p.actions.size());
    t.prob_h = set.prob;
    t.book = PatternBook(p.n_links());
    t.pattern.resize(static_cast<std::size_t>(t.n_h) * t.n_a);
    t.cost.resize(t.pattern.size());
    SlotOutcome o;
    for (int h = 0; h < t.n_h; ++h)
        for (int a = 0; a < t.n_a; ++a) {
            evaluate_action(p.n_nds, p.actions[a], set.h[h], p.radio, o);
            std::size_t i = static_cast<std::size_t>(h) * t.n_a + a;
            t.pattern[i] = t.book.intern(o.departures, p.capacity);
            t.cost[i] = channel_cost(p, o);
        }
    return t;
}

/// Channel-averaged cost and departure distribution per action.
struct ReducedModel {
    std::vector<double> cost;                              // per action
    std::vector<std::vector<std::pair<int, double>>> rows; // per action: (pattern, probability)
    PatternBook book;
    double raw_row_deviation = 0; // worst |sum of probabilities - 1| before renormalizing
};

inline ReducedModel reduce(const OutcomeTable& t) {
    ReducedModel m;
    m.book = t.book;
    m.cost.assign(t.n_a, 0.0);
    m.rows.resize(t.n_a);
    std::vector<double> mass(t.book.size());
    for (int a = 0; a < t.n_a; ++a) {
        std::fill(mass.begin(), mass.end(), 0.0);
        double c = 0;
        for (int h = 0; h < t.n_h; ++h) {
            std::size_t i = static_cast<std::size_t>(h) * t.n_a + a;
            c += t.prob_h[h] * t.cost[i];
            mass[t.pattern[i]] += t.prob_h[h];
        }
        m.cost[a] = c;
        double sum = 0;
        for (int k = 0; k < t.book.size(); ++k)
            if (mass[k] > 0) {
                m.rows[a].emplace_back(k, mass[k]);
                sum += mass[k];
            }
        m.raw_row_deviation = std::max(m.raw_row_deviation, std::abs(sum - 1.0));
        for (auto& e : m.rows[a]) e.second /= sum;
    }
    if (m.raw_row_deviation > 1e-9)
        log::warn("channel-averaged kernel rows off by " + std::to_string(m.raw_row_deviation) +
                  " before renormalization; increase n_mc");
    return m;
}

// ---------------------------------------------------------------------------
// Value tables and relative value iteration

struct ValueTable {
    int n_links = 0;
    int capacity = 0;
    std::vector<double> values; // W(Q), anchored at W(0) = 0
    double theta = 0;
    long iterations = 0;
    std::vector<double> residuals; // span per sweep
    double raw_row_deviation = 0;
};

/// Greedy action per (channel sample, queue state) from the full solver.
struct PolicyTable {
    int n_h = 0;
    int n_states = 0;
    std::vector<int> action; // [h * n_states + s]
};

struct SolveOptions {
    double tolerance = 1e-6;
    long max_iterations = 100000;

    static SolveOptions from(const ScenarioConfig& c) { return {c.rvi_tolerance, c.rvi_max_iterations}; }
};

namespace detail {

inline std::vector<double> queue_costs(const Problem& p, const QueueSpace& qs) {
    std::vector<double> g(qs.size());
    std::vector<int> q(qs.n_links());
    for (int s = 0; s < qs.size(); ++s) {
        qs.decode(s, q.data());
        g[s] = queue_cost(p, q.data());
    }
    return g;
}

inline void check_warm(const std::vector<double>* warm, const QueueSpace& qs, std::vector<double>& w) {
    if (warm && static_cast<int>(warm->size()) == qs.size())
        w = *warm;
    else
        w.assign(qs.size(), 0.0);
}

/// Post-service index of every (queue state, pattern) pair, [s * n_pat + k].
/// Empty when the table would be too large to hold; callers then recompute.
inline std::vector<int> served_table(const QueueSpace& qs, const PatternBook& book) {
    std::vector<int> out;
    const std::size_t total = static_cast<std::size_t>(qs.size()) * book.size();
    if (total > (std::size_t{1} << 26)) return out;
    out.resize(total);
    std::vector<int> q(qs.n_links());
    for (int s = 0; s < qs.size(); ++s) {
        qs.decode(s, q.data());
        for (int k = 0; k < book.size(); ++k) out[static_cast<std::size_t>(s) * book.size() + k] = qs.served_index(q.data(), book[k]);
    }
    return out;
}

inline void gather(const QueueSpace& qs, const PatternBook& book, const std::vector<int>& table, int s,
                   const std::vector<double>& U, std::vector<int>& q, std::vector<double>& u) {
    const int n_pat = book.size();
    if (!table.empty()) {
        const int* row = &table[static_cast<std::size_t>(s) * n_pat];
        for (int k = 0; k < n_pat; ++k) u[k] = U[row[k]];
        return;
    }
    qs.decode(s, q.data());
    for (int k = 0; k < n_pat; ++k) u[k] = U[qs.served_index(q.data(), book[k])];
}

} // namespace detail

/// Relative value iteration on queue states only, with the channel averaged
/// out of both the cost and the transition kernel.
inline ValueTable solve_reduced(const Problem& p, const ReducedModel& m, const SolveOptions& opt,
                                const std::vector<double>* warm = nullptr) {
    QueueSpace qs(p.n_links(), p.capacity);
    const int n = qs.size();
    const int n_a = static_cast<int>(m.cost.size());
    const int n_pat = m.book.size();
    std::vector<double> g = detail::queue_costs(p, qs);
    ValueTable vt;
    vt.n_links = p.n_links();
    vt.capacity = p.capacity;
    vt.raw_row_deviation = m.raw_row_deviation;
    detail::check_warm(warm, qs, vt.values);

    std::vector<double> tw(n), u(n_pat);
    std::vector<int> q(qs.n_links());
    const std::vector<int> table = detail::served_table(qs, m.book);
    double span = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= opt.max_iterations; ++it) {
        std::vector<double> U = smooth_over_arrivals(p, qs, vt.values);
        for (int s = 0; s < n; ++s) {
            detail::gather(qs, m.book, table, s, U, q, u);
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < n_a; ++a) {
                double v = m.cost[a];
                for (const auto& [k, pr] : m.rows[a]) v += pr * u[k];
                if (v < best) best = v;
            }
            tw[s] = g[s] + best;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int s = 0; s < n; ++s) {
            double d = tw[s] - vt.values[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        span = hi - lo;
        vt.residuals.push_back(span);
        vt.theta = 0.5 * (hi + lo);
        double anchor = tw[0];
        for (int s = 0; s < n; ++s) vt.values[s] = tw[s] - anchor;
        vt.iterations = it;
        if (span < opt.tolerance) return vt;
    }
    throw SolverError("reduced value iteration did not converge in " + std::to_string(opt.max_iterations) +
                          " sweeps (span " + std::to_string(span) + ")",
                      span, opt.max_iterations);
}

/// Relative value iteration on (channel sample, queue) states. The channel is
/// i.i.d. across slots, so the expected next value given the post-service
/// queues is the channel-averaged W smoothed over arrivals.
inline ValueTable solve_full(const Problem& p, const OutcomeTable& t, const SolveOptions& opt,
                             const std::vector<double>* warm = nullptr, PolicyTable* policy = nullptr) {
    QueueSpace qs(p.n_links(), p.capacity);
    const int n = qs.size();
    const int n_h = t.n_h, n_a = t.n_a, n_pat = t.book.size();
    std::vector<double> g = detail::queue_costs(p, qs);
    ValueTable vt;
    vt.n_links = p.n_links();
    vt.capacity = p.capacity;
    std::vector<double> w;
    detail::check_warm(warm, qs, w);
    std::vector<double> V(static_cast<std::size_t>(n_h) * n), Vn(V.size());
    for (int h = 0; h < n_h; ++h)
        for (int s = 0; s < n; ++s) V[static_cast<std::size_t>(h) * n + s] = w[s];

    std::vector<double> u(n_pat);
    std::vector<int> q(qs.n_links());
    const std::vector<int> table = detail::served_table(qs, t.book);
    double span = std::numeric_limits<double>::infinity();
    auto backup = [&](int h, int* arg) {
        double best = std::numeric_limits<double>::infinity();
        const double* c = &t.cost[static_cast<std::size_t>(h) * n_a];
        const int* pat = &t.pattern[static_cast<std::size_t>(h) * n_a];
        for (int a = 0; a < n_a; ++a) {
            double v = c[a] + u[pat[a]];
            if (v < best) {
                best = v;
                if (arg) *arg = a;
            }
        }
        return best;
    };
    for (long it = 1; it <= opt.max_iterations; ++it) {
        std::vector<double> U = smooth_over_arrivals(p, qs, w);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int s = 0; s < n; ++s) {
            detail::gather(qs, t.book, table, s, U, q, u);
            for (int h = 0; h < n_h; ++h) {
                std::size_t i = static_cast<std::size_t>(h) * n + s;
                Vn[i] = g[s] + backup(h, nullptr);
                double d = Vn[i] - V[i];
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
        }
        span = hi - lo;
        vt.residuals.push_back(span);
        vt.theta = 0.5 * (hi + lo);
        double anchor = 0;
        for (int h = 0; h < n_h; ++h) anchor += t.prob_h[h] * Vn[static_cast<std::size_t>(h) * n];
        std::fill(w.begin(), w.end(), 0.0);
        for (int h = 0; h < n_h; ++h)
            for (int s = 0; s < n; ++s) {
                std::size_t i = static_cast<std::size_t>(h) * n + s;
                Vn[i] -= anchor;
                w[s] += t.prob_h[h] * Vn[i];
            }
        std::swap(V, Vn);
        vt.iterations = it;
        if (span < opt.tolerance) {
            vt.values = w;
            if (policy) {
                policy->n_h = n_h;
                policy->n_states = n;
                policy->action.assign(static_cast<std::size_t>(n_h) * n, 0);
                std::vector<double> Uf = smooth_over_arrivals(p, qs, w);
                for (int s = 0; s < n; ++s) {
                    detail::gather(qs, t.book, table, s, Uf, q, u);
                    for (int h = 0; h < n_h; ++h)
                        backup(h, &policy->action[static_cast<std::size_t>(h) * n + s]);
                }
            }
            return vt;
        }
    }
    throw SolverError("full-state value iteration did not converge in " + std::to_string(opt.max_iterations) +
                          " sweeps (span " + std::to_string(span) + ")",
                      span, opt.max_iterations);
}

/// Reduced solver over `n_mc` fresh channel draws.
inline ValueTable solve_reduced_bellman(const Problem& p, const SubregionGeometry& geo, int n_tx, int n_mc, Rng& rng,
                                        const SolveOptions& opt, ReducedModel* model_out = nullptr,
                                        const std::vector<double>* warm = nullptr) {
    ChannelSet set = sample_channel_set(geo, p.n_rbs, n_tx, n_mc, rng);
    ReducedModel m = reduce(tabulate_outcomes(p, set));
    ValueTable vt = solve_reduced(p, m, opt, warm);
    if (model_out) *model_out = std::move(m);
    return vt;
}

inline ValueTable solve_full_bellman(const Problem& p, const ChannelSet& set, const SolveOptions& opt,
                                     PolicyTable* policy = nullptr, const std::vector<double>* warm = nullptr) {
    return solve_full(p, tabulate_outcomes(p, set), opt, warm, policy);
}

// ---------------------------------------------------------------------------
// Online decisions

namespace detail {
// Kernel-weighted sums of equal values differ in the last bits; treat those
// as ties so the lower index wins.
inline bool strictly_better(double v, double best) {
    return v < best - 1e-12 * (1.0 + std::abs(v));
}
} // namespace detail

/// Per-slot rule of the two-stage scheduler: current-slot channel cost plus
/// the expected continuation under the channel-averaged kernel. `U` is the
/// solved value table smoothed over arrivals. Ties go to the lowest index.
inline int schedule_two_stage(const Problem& p, const ReducedModel& m, const QueueSpace& qs,
                              const std::vector<double>& U, const std::vector<int>& q, const ChannelRealization& h) {
    // the queue part of the cost is the same for every action and is left out
    std::vector<double> u(m.book.size());
    for (int k = 0; k < m.book.size(); ++k) u[k] = U[qs.served_index(q.data(), m.book[k])];
    SlotOutcome o;
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(p.actions.size()); ++a) {
        evaluate_action(p.n_nds, p.actions[a], h, p.radio, o);
        double v = channel_cost(p, o);
        for (const auto& [k, pr] : m.rows[a]) v += pr * u[k];
        if (detail::strictly_better(v, best)) {
            best = v;
            arg = a;
        }
    }
    return arg;
}

/// Per-slot rule of the full-state policy: knows the departures the current
/// channel gives each action.
inline int schedule_full(const Problem& p, const QueueSpace& qs, const std::vector<double>& U, const std::vector<int>& q,
                         const ChannelRealization& h) {
    SlotOutcome o;
    std::vector<std::uint8_t> d(p.n_links());
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(p.actions.size()); ++a) {
        evaluate_action(p.n_nds, p.actions[a], h, p.radio, o);
        for (int l = 0; l < p.n_links(); ++l) d[l] = static_cast<std::uint8_t>(std::min(o.departures[l], p.capacity));
        double v = channel_cost(p, o) + U[qs.served_index(q.data(), d.data())];
        if (detail::strictly_better(v, best)) {
            best = v;
            arg = a;
        }
    }
    return arg;
}

/// Fallback for subregions whose action set is too large to enumerate: add
/// (link, RB) pairs one at a time while they lower the channel cost minus the
/// delay-weighted packets they would serve this slot.
inline Assignment greedy_schedule(const Problem& p, const std::vector<int>& q, const ChannelRealization& h) {
    const int n_links = p.n_links();
    Assignment a(n_links, -1);
    auto score = [&](const Assignment& x) {
        SlotOutcome o = evaluate_action(p.n_nds, x, h, p.radio);
        double v = channel_cost(p, o);
        for (int l = 0; l < n_links; ++l) {
            double w = l >= p.n_nds ? p.alpha[l - p.n_nds] : 1.0;
            v -= w * std::min(q[l], o.departures[l]) / std::max(p.arrival_rate[l], 1e-12);
        }
        return v;
    };
    double cur = score(a);
    for (;;) {
        double best = cur;
        int best_l = -1, best_k = -1;
        for (int l = 0; l < n_links; ++l) {
            if (a[l] >= 0 || q[l] == 0) continue;
            for (int k = 0; k < p.n_rbs; ++k) {
                bool taken = false;
                for (int m = 0; m < n_links; ++m)
                    taken |= a[m] == k && (m >= p.n_nds) == (l >= p.n_nds);
                if (taken) continue;
                a[l] = static_cast<std::int8_t>(k);
                double v = score(a);
                a[l] = -1;
                if (v < best) {
                    best = v;
                    best_l = l;
                    best_k = k;
                }
            }
        }
        if (best_l < 0) return a;
        a[best_l] = static_cast<std::int8_t>(best_k);
        cur = best;
    }
}

// ---------------------------------------------------------------------------
// Multipliers

struct MeasuredAverages {
    std::vector<double> prr;      // per DS link
    std::vector<double> rate;     // per NDS link, bit/s
    std::vector<double> delay;    // per link, Q̄/Ā
    std::vector<double> overflow; // per link, fraction of slots at capacity
};

/// Projected subgradient ascent on the dual.
inline Multipliers update_multipliers(Multipliers m, const MeasuredAverages& avg, double prr_floor, double rate_floor,
                                      double rate_unit, double step) {
    if (!(step > 0)) throw std::invalid_argument("multiplier step must be > 0");
    for (std::size_t i = 0; i < m.beta.size(); ++i) m.beta[i] = std::max(0.0, m.beta[i] + step * (prr_floor - avg.prr[i]));
    for (std::size_t j = 0; j < m.gamma.size(); ++j)
        m.gamma[j] = std::max(0.0, m.gamma[j] + step * (rate_floor - avg.rate[j]) / rate_unit);
    std::size_t n_nds = m.gamma.size();
    if (!m.beta.empty() && n_nds > 0) {
        double max_ds = -std::numeric_limits<double>::infinity();
        double min_nds = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < avg.delay.size(); ++l) {
            if (l < n_nds)
                min_nds = std::min(min_nds, avg.delay[l]);
            else
                max_ds = std::max(max_ds, avg.delay[l]);
        }
        m.lambda = std::max(0.0, m.lambda + step * (max_ds - min_nds));
    }
    for (std::size_t l = 0; l < m.eta.size(); ++l) m.eta[l] = std::max(0.0, m.eta[l] + step * avg.overflow[l]);
    return m;
}

// ---------------------------------------------------------------------------
// Text serialization of value tables: a header line
//   links <L> capacity <N_Q> theta <theta>
// then one line per queue state: L queue lengths followed by the value.

inline void write_value_table(std::ostream& os, const ValueTable& vt) {
    QueueSpace qs(vt.n_links, vt.capacity);
    os << "links " << vt.n_links << " capacity " << vt.capacity << " theta " << std::setprecision(17) << vt.theta
       << '\n';
    std::vector<int> q(vt.n_links);
    for (int s = 0; s < qs.size(); ++s) {
        qs.decode(s, q.data());
        for (int v : q) os << v << ' ';
        os << vt.values[s] << '\n';
    }
}

inline ValueTable read_value_table(std::istream& is) {
    ValueTable vt;
    std::string w1, w2, w3;
    if (!(is >> w1 >> vt.n_links >> w2 >> vt.capacity >> w3 >> vt.theta) || w1 != "links" || w2 != "capacity" ||
        w3 != "theta")
        throw ConfigError("warm-start", "malformed value table header");
    QueueSpace qs(vt.n_links, vt.capacity);
    vt.values.assign(qs.size(), 0.0);
    std::vector<int> q(vt.n_links);
    for (int row = 0; row < qs.size(); ++row) {
        for (int& v : q)
            if (!(is >> v) || v < 0 || v > vt.capacity)
                throw ConfigError("warm-start", "bad queue vector in row " + std::to_string(row + 1));
        double val;
        if (!(is >> val)) throw ConfigError("warm-start", "missing value in row " + std::to_string(row + 1));
        vt.values[qs.index(q)] = val;
    }
    return vt;
}

} // namespace v2x::stage2
