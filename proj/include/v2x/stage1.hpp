#pragma once

// Inter-subregion allocation. Each subregion's delay utility is
//   U_i = w_i * ln(1 + c2 * eps_i),   w_i = exp(-(kappa_i - kappa_jam/2)^2 / c1),
// and the shares maximize sum U_i over the simplex. The maximizer is a
// water-filling solution: only subregions whose threshold c2*w_i exceeds the
// common multiplier omega get a positive share.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "config.hpp"
#include "log.hpp"
#include "mobility.hpp"

namespace v2x::stage1 {

struct UtilityParams {
    double c1 = 0.5;
    double c2 = 10.0;
    double kappa_jam = 2.0;

    static UtilityParams from(const ScenarioConfig& c) { return {c.c1, c.c2, c.kappa_jam}; }
};

struct ShareVector {
    std::array<double, kSubregions> epsilon{};
    int active_count = 0; // M
    double omega = 0;
};

/// Density weight exp(-(kappa - kappa_jam/2)^2 / c1): 1 at half the jam density.
inline double density_weight(double kappa, const UtilityParams& p) {
    double d = kappa - p.kappa_jam / 2;
    return std::exp(-d * d / p.c1);
}

inline double utility(double kappa, double epsilon, const UtilityParams& p) {
    return density_weight(kappa, p) * std::log1p(p.c2 * epsilon);
}

inline double total_utility(const TdiVector& tdi, const std::array<double, kSubregions>& eps, const UtilityParams& p) {
    double s = 0;
    for (int i = 0; i < kSubregions; ++i) s += utility(tdi[i], eps[i], p);
    return s;
}

/// Marginal utility at zero share; a subregion is served iff this exceeds omega.
inline double lagrange_threshold(double kappa, const UtilityParams& p) {
    return p.c2 * density_weight(kappa, p);
}

/// Multiplier that makes the m largest weights' shares sum to one.
inline double omega_candidate(const double* sorted_weights, int m, const UtilityParams& p) {
    double s = 0;
    for (int i = 0; i < m; ++i) s += sorted_weights[i];
    return s / (1.0 + m / p.c2);
}

inline ShareVector allocate_shares(const TdiVector& tdi, const UtilityParams& p) {
    std::array<double, kSubregions> w{};
    for (int i = 0; i < kSubregions; ++i) w[i] = density_weight(tdi[i], p);

    std::array<int, kSubregions> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w[a] > w[b]; });
    std::array<double, kSubregions> sorted{};
    for (int i = 0; i < kSubregions; ++i) sorted[i] = w[order[i]];

    // grow the active set while the next threshold still beats the multiplier
    int M = 0;
    for (int m = 1; m <= kSubregions; ++m) {
        if (omega_candidate(sorted.data(), m, p) < p.c2 * sorted[m - 1])
            M = m;
        else
            break;
    }

    ShareVector out;
    out.active_count = M;
    // Mean of the active weights taken as an offset from the largest one, so
    // equal weights give eps = 1/M with no rounding at all.
    double ref = sorted[0];
    double dev = 0;
    for (int i = 0; i < M; ++i) dev += sorted[i] - ref;
    double mean = ref + dev / M;
    double S = M * mean;
    double scale = (1.0 + M / p.c2) / S;
    out.omega = S / (1.0 + M / p.c2);
    for (int r = 0; r < M; ++r) {
        int i = order[r];
        out.epsilon[i] = std::max(0.0, 1.0 / M + (w[i] - mean) * scale);
    }
    return out;
}

/// Per-subregion RB counts floor(eps_i * total). Leftover RBs go one at a
/// time to the largest fractional remainders (ties to the lower id) unless
/// strict flooring is requested.
inline std::array<int, kSubregions> budget_rbs(const ShareVector& s, int total, LeftoverMode mode) {
    std::array<int, kSubregions> n{};
    std::array<double, kSubregions> rem{};
    int used = 0;
    for (int i = 0; i < kSubregions; ++i) {
        double x = s.epsilon[i] * total;
        // shares like 0.25 * 4 can land a hair under the integer
        n[i] = static_cast<int>(std::floor(x + 1e-9));
        rem[i] = x - n[i];
        used += n[i];
    }
    if (mode == LeftoverMode::strict_floor || used >= total) return n;
    std::array<int, kSubregions> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    int left = total - used;
    for (int r = 0; left > 0; r = (r + 1) % kSubregions, --left) n[order[r]]++;
    log::debug("assigned " + std::to_string(total - used) + " leftover RBs by largest remainder");
    return n;
}

} // namespace v2x::stage1
