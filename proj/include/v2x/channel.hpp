#pragma once

// Channel gains: log-distance path loss with log-normal shadowing (held for a
// traffic epoch) times i.i.d. Rayleigh small-scale fading summed over the
// transmit antennas (redrawn every slot, independently per RB).

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "log.hpp"
#include "rng.hpp"

namespace v2x {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Large-scale gain at `distance` for a given shadowing sample in dB.
inline double large_scale_gain(double distance, const ScenarioConfig& cfg, double shadow_db = 0.0) {
    if (distance <= 0.0) {
        log::warn("non-positive distance " + std::to_string(distance) + " m clamped to the reference distance");
        distance = cfg.reference_distance;
    }
    double g = db_to_linear(cfg.reference_gain_db) * std::pow(distance / cfg.reference_distance, -cfg.path_loss_exponent);
    return g * db_to_linear(shadow_db);
}

inline double sample_shadowing_db(const ScenarioConfig& cfg, Rng& rng) {
    if (!cfg.shadowing_enabled || cfg.shadowing_std_db == 0.0) return 0.0;
    std::normal_distribution<double> n(0.0, cfg.shadowing_std_db);
    return n(rng);
}

/// n_tx i.i.d. CN(0,1) coefficients (real and imaginary parts each of variance 1/2).
inline std::vector<std::complex<double>> sample_small_scale(int n_tx, Rng& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    std::vector<std::complex<double>> h(n_tx);
    for (auto& c : h) {
        double re = n(rng);
        double im = n(rng);
        c = {re, im};
    }
    return h;
}

/// Sum of |h_m|^2 over the transmit antennas. Each |h_m|^2 of a CN(0,1)
/// coefficient is Exp(1), drawn directly by inversion (one uniform per antenna).
inline double small_scale_power(int n_tx, Rng& rng) {
    double s = 0;
    for (int m = 0; m < n_tx; ++m) s -= std::log1p(-uniform01(rng));
    return s;
}

/// Large-scale gains a subregion's scheduler needs for one epoch: every link
/// transmitter to the BS, and every DS transmitter to each of its neighbors.
struct SubregionGeometry {
    int n_nds = 0;
    int n_ds = 0;
    std::vector<double> to_bs;                     // per link
    std::vector<std::vector<double>> to_neighbors; // per link; empty for NDS links

    int n_links() const { return n_nds + n_ds; }
};

/// Per-slot gain powers |H|^2 of one subregion, indexed by local RB.
class ChannelRealization {
public:
    ChannelRealization() = default;
    ChannelRealization(int n_links, int n_rbs, const std::vector<int>& neighbor_counts)
        : n_links_(n_links), n_rbs_(n_rbs), bs_(static_cast<std::size_t>(n_links) * n_rbs, 0.0),
          nb_(n_links), nb_count_(neighbor_counts) {
        for (int l = 0; l < n_links; ++l) nb_[l].assign(static_cast<std::size_t>(neighbor_counts[l]) * n_rbs, 0.0);
    }

    int n_links() const { return n_links_; }
    int n_rbs() const { return n_rbs_; }
    int n_neighbors(int l) const { return nb_count_[l]; }

    double to_bs(int l, int k) const { return bs_[static_cast<std::size_t>(l) * n_rbs_ + k]; }
    double& to_bs(int l, int k) { return bs_[static_cast<std::size_t>(l) * n_rbs_ + k]; }
    double to_neighbor(int l, int j, int k) const { return nb_[l][static_cast<std::size_t>(j) * n_rbs_ + k]; }
    double& to_neighbor(int l, int j, int k) { return nb_[l][static_cast<std::size_t>(j) * n_rbs_ + k]; }

    /// Largest gain from link l to any of its neighbors on RB k; the BS gain when it has none.
    double max_to_neighbor(int l, int k) const {
        int n = n_neighbors(l);
        if (n == 0) return to_bs(l, k);
        double m = 0;
        for (int j = 0; j < n; ++j) m = std::max(m, to_neighbor(l, j, k));
        return m;
    }

private:
    int n_links_ = 0;
    int n_rbs_ = 0;
    std::vector<double> bs_;
    std::vector<std::vector<double>> nb_;
    std::vector<int> nb_count_;
};

/// Draws one slot of fading on top of the epoch's large-scale gains.
inline ChannelRealization realize_channels(const SubregionGeometry& geo, int n_rbs, int n_tx, Rng& rng) {
    std::vector<int> counts(geo.n_links());
    for (int l = 0; l < geo.n_links(); ++l) counts[l] = static_cast<int>(geo.to_neighbors[l].size());
    ChannelRealization ch(geo.n_links(), n_rbs, counts);
    for (int l = 0; l < geo.n_links(); ++l) {
        for (int k = 0; k < n_rbs; ++k) ch.to_bs(l, k) = geo.to_bs[l] * small_scale_power(n_tx, rng);
        for (int j = 0; j < counts[l]; ++j)
            for (int k = 0; k < n_rbs; ++k)
                ch.to_neighbor(l, j, k) = geo.to_neighbors[l][j] * small_scale_power(n_tx, rng);
    }
    return ch;
}

} // namespace v2x
