#pragma once

// End-to-end simulation of the intersection: every traffic epoch samples the
// densities, splits the RBs between the four subregions, re-places vehicles
// and re-solves each subregion's scheduler; every slot draws the channel,
// schedules, serves and admits packets, and records metrics.
//
// Each subregion keeps a fixed number of link slots per class. At an epoch
// boundary the first vehicles of each class (in placement order) take the
// slots and inherit their queues; a slot left without a vehicle is flushed.
// Every other vehicle only listens, as a broadcast neighbor.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "mobility.hpp"
#include "model.hpp"
#include "queue.hpp"
#include "rng.hpp"
#include "stage1.hpp"
#include "stage2.hpp"

namespace v2x::sim {

struct EpochRecord {
    long epoch = 0;
    TdiVector tdi{};
    stage1::ShareVector shares;
    std::array<int, kSubregions> rbs{};
    std::array<int, kSubregions> n_nds{};
    std::array<int, kSubregions> n_ds{};
};

struct RunReport {
    PolicyKind policy = PolicyKind::two_stage;
    long horizon = 0;
    long recorded_slots = 0;
    LinkAccumulator ds;  // pooled over DS link-slots after warm-up
    LinkAccumulator nds; // pooled over NDS link-slots after warm-up
    long dropped_packets = 0;
    double ds_mean_sojourn_s = 0; // per-packet FIFO sojourn of served DS packets
    std::vector<EpochRecord> epochs;

    long decisions = 0;
    double solve_seconds = 0;
    double online_seconds = 0;
    long solver_sweeps = 0;
    double max_kernel_row_deviation = 0;
    bool used_greedy = false;
    std::array<std::optional<stage2::ValueTable>, kSubregions> final_tables;

    /// Pooled Little's-law delay of the delay-sensitive links, seconds.
    double mean_delay() const { return ds.mean_delay(); }
    double mean_prr() const { return ds.mean_prr(); }
    double mean_rate() const { return nds.mean_rate(); }
    double mean_queue() const {
        LinkAccumulator all = ds;
        all.merge(nds);
        return all.mean_queue();
    }
    double overflow_frac() const {
        LinkAccumulator all = ds;
        all.merge(nds);
        return all.overflow_frac();
    }
    double seconds_per_decision() const {
        return decisions ? (solve_seconds + online_seconds) / decisions : std::nan("");
    }
};

struct RunOptions {
    long horizon = 0; // 0 means the configured horizon
    std::optional<PolicyKind> policy;
    const stage2::ValueTable* warm_start = nullptr;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct LinkSlot {
    explicit LinkSlot(int capacity) : queue(capacity) {}
    TrackedQueue queue;
    bool active = false;
    int vehicle = -1; // index into the subregion's vehicle list
    Rng arrivals;
    // multipliers live with the slot so they persist across epochs
    double beta = 0, gamma = 0, eta = 0;
    // per-epoch sums for the dual update
    long ep_slots = 0;
    double ep_queue = 0, ep_prr = 0, ep_rate = 0;
    long ep_overflow = 0;
};

struct SubregionSim {
    int id = 0;
    std::vector<LinkSlot> nds_slots, ds_slots;
    double lambda = 0;
    Rng channel_rng, random_rng;

    // rebuilt every epoch
    Subregion sub;
    SubregionGeometry geo;
    std::vector<LinkSlot*> links; // local link index -> slot
    std::optional<stage2::Problem> problem;
    std::optional<stage2::QueueSpace> space;
    stage2::ReducedModel model;
    std::vector<double> U;
    bool greedy = false;
    std::optional<stage2::ValueTable> table;
};

} // namespace detail

/// Runs one simulation. Deterministic for a given config (seed included).
inline RunReport run(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
    using namespace detail;
    cfg.validate();
    if (cfg.total_rbs <= 0) throw ConfigError("scenario.total_rbs", "a run needs at least one RB");
    const long horizon = opt.horizon > 0 ? opt.horizon : cfg.horizon_slots;
    const PolicyKind policy = opt.policy.value_or(cfg.policy);
    const long per_epoch = cfg.slots_per_epoch();
    if (horizon < per_epoch)
        throw ConfigError("sim.horizon_slots", "horizon must cover at least one traffic epoch (" +
                                                   std::to_string(per_epoch) + " slots)");
    const long warmup = static_cast<long>(std::floor(cfg.warmup_fraction * horizon));
    const RadioParams rp = RadioParams::from(cfg);
    const stage1::UtilityParams up = stage1::UtilityParams::from(cfg);
    const stage2::SolveOptions sopt = stage2::SolveOptions::from(cfg);
    const ArrivalProcess arrivals = make_arrival_process(cfg);
    const RngStreams streams(cfg.rng_seed);

    RunReport rep;
    rep.policy = policy;
    rep.horizon = horizon;

    std::vector<SubregionSim> subs(kSubregions);
    for (int i = 0; i < kSubregions; ++i) {
        auto& s = subs[i];
        s.id = i;
        for (int k = 0; k < cfg.max_nds_links; ++k) {
            s.nds_slots.emplace_back(cfg.queue_capacity);
            s.nds_slots.back().arrivals = streams.stream("arrivals", i, k);
            s.nds_slots.back().gamma = cfg.gamma0;
            s.nds_slots.back().eta = cfg.eta0;
        }
        for (int k = 0; k < cfg.max_ds_links; ++k) {
            s.ds_slots.emplace_back(cfg.queue_capacity);
            s.ds_slots.back().arrivals = streams.stream("arrivals", i, 1000 + k);
            s.ds_slots.back().beta = cfg.beta0;
            s.ds_slots.back().eta = cfg.eta0;
        }
        s.lambda = cfg.lambda0;
        s.channel_rng = streams.stream("channel", i);
        s.random_rng = streams.stream("random", i);
    }

    double ds_sojourn_sum = 0;
    long ds_served = 0;
    SlotOutcome outcome;
    std::vector<int> q;

    for (long t = 0; t < horizon; ++t) {
        const long epoch = t / per_epoch;
        if (t % per_epoch == 0) {
            // ---- traffic epoch: stage one, placement, geometry, stage-two solve
            EpochRecord er;
            er.epoch = epoch;
            if (!cfg.tdi.empty()) {
                for (int i = 0; i < kSubregions; ++i) er.tdi[i] = cfg.tdi[i];
            } else {
                Rng r = streams.stream("tdi", static_cast<std::uint64_t>(epoch));
                er.tdi = sample_tdi(cfg.tdi_regime, r);
            }
            if (policy == PolicyKind::equal_split) {
                er.shares.epsilon.fill(1.0 / kSubregions);
                er.shares.active_count = kSubregions;
                er.shares.omega = std::nan("");
            } else {
                er.shares = stage1::allocate_shares(er.tdi, up);
            }
            er.rbs = stage1::budget_rbs(er.shares, cfg.total_rbs, cfg.leftover_rbs);
            Rng place_rng = streams.stream("placement", static_cast<std::uint64_t>(epoch));
            VehicleLayout layout = place_vehicles(er.tdi, cfg, place_rng);

            int first_rb = 0;
            for (int i = 0; i < kSubregions; ++i) {
                auto& s = subs[i];
                const auto& veh = layout.subregions[i];
                for (auto& sl : s.nds_slots) sl.vehicle = -1;
                for (auto& sl : s.ds_slots) sl.vehicle = -1;
                std::size_t next_nds = 0, next_ds = 0;
                for (int v = 0; v < static_cast<int>(veh.size()); ++v) {
                    if (veh[v].ds && next_ds < s.ds_slots.size()) s.ds_slots[next_ds++].vehicle = v;
                    if (!veh[v].ds && next_nds < s.nds_slots.size()) s.nds_slots[next_nds++].vehicle = v;
                }
                s.links.clear();
                for (auto* group : {&s.nds_slots, &s.ds_slots})
                    for (auto& sl : *group) {
                        sl.active = sl.vehicle >= 0;
                        if (!sl.active) {
                            rep.dropped_packets += sl.queue.length();
                            sl.queue.clear();
                        } else {
                            s.links.push_back(&sl);
                        }
                    }
                s.sub = Subregion{i, static_cast<int>(next_nds), static_cast<int>(next_ds), er.rbs[i], first_rb,
                                  subregion_segment(i, cfg)};
                first_rb += er.rbs[i];
                er.n_nds[i] = s.sub.n_nds;
                er.n_ds[i] = s.sub.n_ds;

                // large-scale gains with this epoch's shadowing
                Rng shadow = streams.stream("shadowing", static_cast<std::uint64_t>(epoch), i);
                s.geo = SubregionGeometry{};
                s.geo.n_nds = s.sub.n_nds;
                s.geo.n_ds = s.sub.n_ds;
                for (int l = 0; l < s.sub.n_links(); ++l) {
                    const Vehicle& tx = veh[s.links[l]->vehicle];
                    s.geo.to_bs.push_back(large_scale_gain(std::hypot(tx.x, tx.y), cfg, sample_shadowing_db(cfg, shadow)));
                    std::vector<double> nb;
                    if (s.sub.is_ds(l)) {
                        for (int j = 0; j < kSubregions; ++j)
                            for (int v = 0; v < static_cast<int>(layout.subregions[j].size()); ++v) {
                                if (j == i && v == s.links[l]->vehicle) continue;
                                const Vehicle& rx = layout.subregions[j][v];
                                double d = std::hypot(rx.x - tx.x, rx.y - tx.y);
                                if (d > cfg.neighbor_radius) continue;
                                nb.push_back(large_scale_gain(d, cfg, sample_shadowing_db(cfg, shadow)));
                            }
                    }
                    s.geo.to_neighbors.push_back(std::move(nb));
                }

                // stage two for this epoch
                s.problem.reset();
                s.space.reset();
                s.greedy = false;
                if (s.sub.n_links() == 0 || s.sub.n_rbs == 0) continue;
                stage2::Multipliers m;
                for (int l = 0; l < s.sub.n_links(); ++l) {
                    if (s.sub.is_ds(l))
                        m.beta.push_back(s.links[l]->beta);
                    else
                        m.gamma.push_back(s.links[l]->gamma);
                    m.eta.push_back(s.links[l]->eta);
                }
                m.lambda = s.lambda;
                std::vector<double> alpha;
                for (int k = 0; k < static_cast<int>(s.ds_slots.size()); ++k)
                    if (s.ds_slots[k].active) alpha.push_back(cfg.alpha(k));
                auto t0 = Clock::now();
                try {
                    s.problem = stage2::make_problem(cfg, s.sub.n_nds, s.sub.n_ds, s.sub.n_rbs, m, alpha);
                } catch (const ActionSpaceTooLarge& e) {
                    log::warn(std::string("subregion ") + std::to_string(i) + ": " + e.what());
                    stage2::Problem p;
                    p.n_nds = s.sub.n_nds;
                    p.n_ds = s.sub.n_ds;
                    p.n_rbs = s.sub.n_rbs;
                    p.capacity = cfg.queue_capacity;
                    p.arrival_rate.assign(s.sub.n_links(), cfg.arrival_rate);
                    p.alpha = alpha;
                    p.prr_floor = cfg.prr_floor;
                    p.rate_floor = cfg.rate_floor;
                    p.rate_unit = cfg.rate_unit;
                    p.mult = m;
                    p.radio = rp;
                    s.problem = std::move(p);
                    s.greedy = true;
                    rep.used_greedy = true;
                }
                if (!s.greedy && (policy == PolicyKind::two_stage || policy == PolicyKind::equal_split ||
                                  policy == PolicyKind::full_optimal)) {
                    s.space.emplace(s.sub.n_links(), cfg.queue_capacity);
                    const std::vector<double>* warm = nullptr;
                    if (s.table && static_cast<int>(s.table->values.size()) == s.space->size())
                        warm = &s.table->values;
                    else if (opt.warm_start && opt.warm_start->n_links == s.sub.n_links() &&
                             opt.warm_start->capacity == cfg.queue_capacity)
                        warm = &opt.warm_start->values;
                    Rng solver_rng = streams.stream("solver", static_cast<std::uint64_t>(epoch), i);
                    if (policy == PolicyKind::full_optimal) {
                        stage2::ChannelSet set =
                            cfg.full_channel_model == FullChannelModel::quantized
                                ? stage2::quantized_channel_set(s.geo, s.sub.n_rbs, cfg.n_tx_antennas,
                                                                cfg.quantization_levels)
                                : stage2::sample_channel_set(s.geo, s.sub.n_rbs, cfg.n_tx_antennas,
                                                             cfg.full_channel_samples, solver_rng);
                        s.table = stage2::solve_full_bellman(*s.problem, set, sopt, nullptr, warm);
                    } else {
                        s.table = stage2::solve_reduced_bellman(*s.problem, s.geo, cfg.n_tx_antennas, cfg.n_mc,
                                                                solver_rng, sopt, &s.model, warm);
                        rep.max_kernel_row_deviation =
                            std::max(rep.max_kernel_row_deviation, s.table->raw_row_deviation);
                    }
                    s.U = stage2::smooth_over_arrivals(*s.problem, *s.space, s.table->values);
                    rep.solver_sweeps += s.table->iterations;
                    rep.final_tables[i] = s.table;
                }
                rep.solve_seconds += seconds_since(t0);
            }
            rep.epochs.push_back(er);
        }

        // ---- one slot in every subregion
        const bool record = t >= warmup;
        if (record) ++rep.recorded_slots;
        for (auto& s : subs) {
            const int n_links = s.sub.n_links();
            const int n_nds = s.sub.n_nds;
            outcome.departures.assign(n_links, 0);
            if (n_links > 0) {
                Assignment action(n_links, -1);
                ChannelRealization h;
                if (s.sub.n_rbs > 0) {
                    h = realize_channels(s.geo, s.sub.n_rbs, cfg.n_tx_antennas, s.channel_rng);
                    q.resize(n_links);
                    for (int l = 0; l < n_links; ++l) q[l] = s.links[l]->queue.length();
                    auto t0 = Clock::now();
                    const auto& p = *s.problem;
                    if (s.greedy) {
                        action = stage2::greedy_schedule(p, q, h);
                    } else if (policy == PolicyKind::random) {
                        std::uniform_int_distribution<std::size_t> pick(0, p.actions.size() - 1);
                        action = p.actions[pick(s.random_rng)];
                    } else if (policy == PolicyKind::full_optimal) {
                        action = p.actions[stage2::schedule_full(p, *s.space, s.U, q, h)];
                    } else {
                        action = p.actions[stage2::schedule_two_stage(p, s.model, *s.space, s.U, q, h)];
                    }
                    rep.online_seconds += seconds_since(t0);
                    ++rep.decisions;
                } else {
                    std::vector<int> counts(n_links);
                    for (int l = 0; l < n_links; ++l) counts[l] = static_cast<int>(s.geo.to_neighbors[l].size());
                    h = ChannelRealization(n_links, 0, counts);
                }
                evaluate_action(n_nds, action, h, rp, outcome);

                for (int l = 0; l < n_links; ++l) {
                    LinkSlot& sl = *s.links[l];
                    int ql = sl.queue.length();
                    double prr_sample = l >= n_nds ? outcome.prr[l - n_nds] : 0.0;
                    double rate_sample = l < n_nds ? outcome.rate[l] : 0.0;
                    if (record)
                        (l >= n_nds ? rep.ds : rep.nds)
                            .add(ql, cfg.queue_capacity, cfg.arrival_rate, prr_sample, rate_sample);
                    ++sl.ep_slots;
                    sl.ep_queue += ql;
                    sl.ep_prr += prr_sample;
                    sl.ep_rate += rate_sample;
                    sl.ep_overflow += ql == cfg.queue_capacity;
                }
            }
            // arrivals are drawn for every slot, active or not, to keep streams aligned
            for (auto* group : {&s.nds_slots, &s.ds_slots})
                for (auto& sl : *group) {
                    int a = arrivals.draw(uniform01(sl.arrivals));
                    if (!sl.active) continue;
                    int l = static_cast<int>(std::find(s.links.begin(), s.links.end(), &sl) - s.links.begin());
                    int dep = outcome.departures[l];
                    long served_before = sl.queue.served();
                    double sojourn_before = sl.queue.sojourn_sum_slots();
                    rep.dropped_packets += sl.queue.step(t, dep, a);
                    if (group == &s.ds_slots && record) {
                        ds_served += sl.queue.served() - served_before;
                        ds_sojourn_sum += sl.queue.sojourn_sum_slots() - sojourn_before;
                    }
                }
        }

        // ---- end of epoch: dual update on the epoch's measured averages
        if ((t + 1) % per_epoch == 0 && cfg.dual_step > 0) {
            double step = cfg.dual_step / std::sqrt(static_cast<double>(epoch + 1));
            for (auto& s : subs) {
                if (s.sub.n_links() == 0) continue;
                stage2::Multipliers m;
                stage2::MeasuredAverages avg;
                for (int l = 0; l < s.sub.n_links(); ++l) {
                    LinkSlot& sl = *s.links[l];
                    double n = std::max<long>(1, sl.ep_slots);
                    if (s.sub.is_ds(l)) {
                        m.beta.push_back(sl.beta);
                        avg.prr.push_back(sl.ep_prr / n);
                    } else {
                        m.gamma.push_back(sl.gamma);
                        avg.rate.push_back(sl.ep_rate / n);
                    }
                    m.eta.push_back(sl.eta);
                    avg.delay.push_back(average_delay(sl.ep_queue / n, cfg.arrival_rate));
                    if (std::isnan(avg.delay.back())) avg.delay.back() = sl.ep_queue / n;
                    avg.overflow.push_back(static_cast<double>(sl.ep_overflow) / n);
                }
                m.lambda = s.lambda;
                m = stage2::update_multipliers(m, avg, cfg.prr_floor, cfg.rate_floor, cfg.rate_unit, step);
                std::size_t b = 0, g = 0;
                for (int l = 0; l < s.sub.n_links(); ++l) {
                    LinkSlot& sl = *s.links[l];
                    if (s.sub.is_ds(l))
                        sl.beta = m.beta[b++];
                    else
                        sl.gamma = m.gamma[g++];
                    sl.eta = m.eta[l];
                }
                s.lambda = m.lambda;
            }
        }
        if ((t + 1) % per_epoch == 0)
            for (auto& s : subs)
                for (auto* group : {&s.nds_slots, &s.ds_slots})
                    for (auto& sl : *group) {
                        sl.ep_slots = sl.ep_overflow = 0;
                        sl.ep_queue = sl.ep_prr = sl.ep_rate = 0;
                    }
    }
    rep.ds_mean_sojourn_s = ds_served ? ds_sojourn_sum / ds_served * cfg.slot_duration : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

inline const char* csv_header() {
    return "policy,tdi_regime,arrival_rate_pkt_s,seed,mean_delay_s,se_delay_s,mean_prr,mean_rate_bps,"
           "mean_queue_pkts,overflow_frac";
}

struct SweepCell {
    PolicyKind policy;
    Regime regime;
    double rate;
    std::uint64_t seed;
    std::vector<RunReport> runs;
    double mean_delay = 0, se_delay = 0, mean_prr = 0, mean_rate = 0, mean_queue = 0, overflow = 0;
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_row(const SweepCell& c) {
    std::ostringstream os;
    os << to_string(c.policy) << ',' << to_string(c.regime) << ',' << format_number(c.rate) << ',' << c.seed << ','
       << format_number(c.mean_delay) << ',' << format_number(c.se_delay) << ',' << format_number(c.mean_prr) << ','
       << format_number(c.mean_rate) << ',' << format_number(c.mean_queue) << ',' << format_number(c.overflow);
    return os.str();
}

/// Runs `reps` repetitions (seeds base, base+1, ...) of one grid cell and aggregates them.
inline SweepCell run_cell(const ScenarioConfig& base, PolicyKind policy, Regime regime, double rate, int reps,
                          const stage2::ValueTable* warm = nullptr) {
    SweepCell c{policy, regime, rate, base.rng_seed, {}};
    ScenarioConfig cfg = base;
    cfg.tdi_regime = regime;
    cfg.arrival_rate = rate;
    cfg.policy = policy;
    cfg.validate();
    std::vector<double> delay;
    auto mean_of = [&](auto f) {
        double s = 0;
        int n = 0;
        for (const auto& r : c.runs) {
            double v = f(r);
            if (std::isnan(v)) continue;
            s += v;
            ++n;
        }
        return n ? s / n : std::nan("");
    };
    for (int r = 0; r < reps; ++r) {
        cfg.rng_seed = base.rng_seed + static_cast<std::uint64_t>(r);
        RunOptions o;
        o.warm_start = warm;
        c.runs.push_back(run(cfg, o));
        double d = c.runs.back().mean_delay();
        if (!std::isnan(d)) delay.push_back(d);
    }
    c.mean_delay = mean_of([](const RunReport& r) { return r.mean_delay(); });
    if (delay.size() > 1) {
        double ss = 0;
        for (double d : delay) ss += (d - c.mean_delay) * (d - c.mean_delay);
        c.se_delay = std::sqrt(ss / (delay.size() - 1)) / std::sqrt(static_cast<double>(delay.size()));
    } else {
        c.se_delay = delay.empty() ? std::nan("") : 0.0;
    }
    c.mean_prr = mean_of([](const RunReport& r) { return r.mean_prr(); });
    c.mean_rate = mean_of([](const RunReport& r) { return r.mean_rate(); });
    c.mean_queue = mean_of([](const RunReport& r) { return r.mean_queue(); });
    c.overflow = mean_of([](const RunReport& r) { return r.overflow_frac(); });
    return c;
}

struct SweepGrid {
    std::vector<double> rates;
    std::vector<Regime> regimes;
    std::vector<PolicyKind> policies;
    int reps = 1;
};

/// Cartesian sweep (rate, regime, policy), one CSV row per cell, written as it completes.
inline std::vector<SweepCell> sweep(const ScenarioConfig& cfg, const SweepGrid& grid, std::ostream* csv = nullptr,
                                    bool write_header = true, const stage2::ValueTable* warm = nullptr) {
    if (grid.rates.empty() || grid.regimes.empty() || grid.policies.empty() || grid.reps < 1)
        throw ConfigError("sweep", "grid needs at least one rate, regime, policy and repetition");
    std::vector<SweepCell> cells;
    if (csv && write_header) *csv << csv_header() << '\n';
    for (double rate : grid.rates)
        for (Regime regime : grid.regimes)
            for (PolicyKind policy : grid.policies) {
                cells.push_back(run_cell(cfg, policy, regime, rate, grid.reps, warm));
                if (csv) *csv << csv_row(cells.back()) << '\n' << std::flush;
            }
    return cells;
}

} // namespace v2x::sim
