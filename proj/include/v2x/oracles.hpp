#pragma once

// Independent reference solvers used to cross-check the closed-form share
// allocation and the value-iteration schedulers. They share no code with the
// solvers they check beyond the model (costs, outcomes, arrival pmfs).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "stage1.hpp"
#include "stage2.hpp"

namespace v2x::oracle {

/// Euclidean projection onto the probability simplex (sort-based).
template <std::size_t N>
std::array<double, N> project_to_simplex(const std::array<double, N>& y) {
    std::array<double, N> u = y;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0, tau = 0;
    for (std::size_t j = 0; j < N; ++j) {
        cum += u[j];
        double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0) tau = t;
    }
    std::array<double, N> x{};
    for (std::size_t i = 0; i < N; ++i) x[i] = std::max(0.0, y[i] - tau);
    return x;
}

struct NumericShares {
    std::array<double, kSubregions> epsilon{};
    long iterations = 0;
};

/// Maximizes sum_i w_i ln(1 + c2 eps_i) over the simplex by accelerated
/// projected gradient ascent with adaptive restart, run to a fixed point.
inline NumericShares solve_shares_numerically(const TdiVector& tdi, const stage1::UtilityParams& p,
                                              long max_iterations = 2000000) {
    std::array<double, kSubregions> w{};
    double wmax = 0;
    for (int i = 0; i < kSubregions; ++i) {
        double d = tdi[i] - p.kappa_jam / 2;
        w[i] = std::exp(-d * d / p.c1);
        wmax = std::max(wmax, w[i]);
    }
    const double step = 1.0 / (wmax * p.c2 * p.c2); // inverse Lipschitz constant of the gradient
    auto objective = [&](const std::array<double, kSubregions>& e) {
        double s = 0;
        for (int i = 0; i < kSubregions; ++i) s += w[i] * std::log1p(p.c2 * e[i]);
        return s;
    };
    auto ascend = [&](const std::array<double, kSubregions>& y) {
        std::array<double, kSubregions> z{};
        for (int i = 0; i < kSubregions; ++i) z[i] = y[i] + step * w[i] * p.c2 / (1.0 + p.c2 * y[i]);
        return project_to_simplex(z);
    };

    NumericShares out;
    std::array<double, kSubregions> x{}, y{};
    x.fill(1.0 / kSubregions);
    y = x;
    double t = 1, fx = objective(x);
    int still = 0;
    for (long it = 1; it <= max_iterations; ++it) {
        std::array<double, kSubregions> xn = ascend(y);
        double fn = objective(xn);
        if (fn < fx) { // restart momentum when the objective drops
            t = 1;
            y = x;
            xn = ascend(y);
            fn = objective(xn);
        }
        double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        double change = 0;
        for (int i = 0; i < kSubregions; ++i) {
            change = std::max(change, std::abs(xn[i] - x[i]));
            y[i] = xn[i] + ((t - 1) / tn) * (xn[i] - x[i]);
        }
        x = xn;
        fx = fn;
        t = tn;
        out.iterations = it;
        still = change < 1e-15 ? still + 1 : 0;
        if (still >= 50) break;
    }
    out.epsilon = x;
    return out;
}

// ---------------------------------------------------------------------------

struct PolicySearchResult {
    double theta = std::numeric_limits<double>::infinity();
    long policies = 0;
};

namespace detail {

/// Average cost of every closed class of a finite chain; returns the smallest.
inline double min_class_gain(const std::vector<double>& P, const std::vector<double>& cost, int n) {
    std::vector<char> reach(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        reach[i * n + i] = 1;
        for (int j = 0; j < n; ++j)
            if (P[i * n + j] > 0) reach[i * n + j] = 1;
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (reach[i * n + k])
                for (int j = 0; j < n; ++j)
                    if (reach[k * n + j]) reach[i * n + j] = 1;
    std::vector<char> done(n, 0);
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n; ++s) {
        if (done[s]) continue;
        bool closed = true;
        std::vector<int> cls;
        for (int t = 0; t < n; ++t) {
            if (!reach[s * n + t]) continue;
            if (!reach[t * n + s]) closed = false;
            else cls.push_back(t);
        }
        for (int t : cls) done[t] = 1;
        if (!closed) continue;
        // stationary distribution on the class: pi (P - I) = 0, sum pi = 1
        int m = static_cast<int>(cls.size());
        std::vector<double> A(static_cast<std::size_t>(m) * (m + 1), 0.0);
        for (int r = 0; r < m - 1; ++r) {
            for (int c = 0; c < m; ++c) A[r * (m + 1) + c] = P[cls[c] * n + cls[r]] - (r == c ? 1.0 : 0.0);
        }
        for (int c = 0; c < m; ++c) A[(m - 1) * (m + 1) + c] = 1.0;
        A[(m - 1) * (m + 1) + m] = 1.0;
        for (int col = 0; col < m; ++col) {
            int piv = col;
            for (int r = col + 1; r < m; ++r)
                if (std::abs(A[r * (m + 1) + col]) > std::abs(A[piv * (m + 1) + col])) piv = r;
            for (int c = 0; c <= m; ++c) std::swap(A[col * (m + 1) + c], A[piv * (m + 1) + c]);
            double d = A[col * (m + 1) + col];
            for (int r = 0; r < m; ++r) {
                if (r == col) continue;
                double f = A[r * (m + 1) + col] / d;
                if (f == 0) continue;
                for (int c = col; c <= m; ++c) A[r * (m + 1) + c] -= f * A[col * (m + 1) + c];
            }
        }
        double g = 0;
        for (int r = 0; r < m; ++r) g += A[r * (m + 1) + m] / A[r * (m + 1) + r] * cost[cls[r]];
        best = std::min(best, g);
    }
    return best;
}

} // namespace detail

/// Minimum long-run average cost over every stationary deterministic policy
/// of the full-state MDP (channel state drawn i.i.d. from `set` each slot).
///
/// A policy picks an action for each (channel, queue) pair. Choices that give
/// the same post-service queues at a queue state have identical futures, so
/// only the cheapest of each is kept; likewise for whole per-queue-state
/// choice vectors with identical transition rows. Both reductions are exact.
inline PolicySearchResult enumerate_policies(const stage2::Problem& p, const stage2::ChannelSet& set,
                                             long max_policies = 50000000) {
    const int L = p.n_links(), N = p.capacity + 1;
    int n = 1;
    for (int l = 0; l < L; ++l) n *= N;
    const int n_h = static_cast<int>(set.size());
    const int n_a = static_cast<int>(p.actions.size());

    std::vector<std::vector<int>> dep(static_cast<std::size_t>(n_h) * n_a);
    std::vector<double> ccost(dep.size());
    for (int h = 0; h < n_h; ++h)
        for (int a = 0; a < n_a; ++a) {
            SlotOutcome o = evaluate_action(p.n_nds, p.actions[a], set.h[h], p.radio);
            dep[h * n_a + a] = o.departures;
            ccost[h * n_a + a] = stage2::channel_cost(p, o);
        }

    auto decode = [&](int s) {
        std::vector<int> q(L);
        for (int l = L - 1; l >= 0; --l) {
            q[l] = s % N;
            s /= N;
        }
        return q;
    };
    auto encode = [&](const std::vector<int>& q) {
        int s = 0;
        for (int l = 0; l < L; ++l) s = s * N + q[l];
        return s;
    };

    // distribution of the next state given post-service queues, by direct enumeration of arrival vectors
    auto next_row = [&](const std::vector<int>& served) {
        std::vector<double> row(n, 0.0);
        std::vector<int> a(L, 0);
        for (;;) {
            double pr = 1;
            std::vector<int> q2(L);
            for (int l = 0; l < L; ++l) {
                pr *= p.arrival_pmf[l][a[l]];
                q2[l] = std::min(p.capacity, served[l] + a[l]);
            }
            row[encode(q2)] += pr;
            int l = L - 1;
            while (l >= 0 && ++a[l] == N) a[l--] = 0;
            if (l < 0) break;
        }
        return row;
    };

    struct Choice {
        std::vector<double> row;
        double cost;
    };
    std::vector<std::vector<Choice>> choices(n);
    for (int s = 0; s < n; ++s) {
        std::vector<int> q = decode(s);
        double gq = stage2::queue_cost(p, q.data());
        // per channel state: distinct post-service vectors with their cheapest cost
        std::vector<std::vector<std::pair<std::vector<int>, double>>> per_h(n_h);
        for (int h = 0; h < n_h; ++h)
            for (int a = 0; a < n_a; ++a) {
                std::vector<int> served(L);
                for (int l = 0; l < L; ++l) served[l] = std::max(0, q[l] - dep[h * n_a + a][l]);
                double c = ccost[h * n_a + a];
                auto it = std::find_if(per_h[h].begin(), per_h[h].end(),
                                       [&](const auto& e) { return e.first == served; });
                if (it == per_h[h].end())
                    per_h[h].emplace_back(served, c);
                else
                    it->second = std::min(it->second, c);
            }
        // combine across channel states
        std::vector<int> pick(n_h, 0);
        for (;;) {
            Choice ch{std::vector<double>(n, 0.0), gq};
            for (int h = 0; h < n_h; ++h) {
                const auto& e = per_h[h][pick[h]];
                std::vector<double> r = next_row(e.first);
                for (int t = 0; t < n; ++t) ch.row[t] += set.prob[h] * r[t];
                ch.cost += set.prob[h] * e.second;
            }
            auto same = std::find_if(choices[s].begin(), choices[s].end(), [&](const Choice& c) {
                for (int t = 0; t < n; ++t)
                    if (std::abs(c.row[t] - ch.row[t]) > 1e-15) return false;
                return true;
            });
            if (same == choices[s].end())
                choices[s].push_back(std::move(ch));
            else
                same->cost = std::min(same->cost, ch.cost);
            int h = n_h - 1;
            while (h >= 0 && ++pick[h] == static_cast<int>(per_h[h].size())) pick[h--] = 0;
            if (h < 0) break;
        }
    }

    double total = 1;
    for (const auto& c : choices) total *= static_cast<double>(c.size());
    if (total > static_cast<double>(max_policies))
        throw std::length_error("policy enumeration would visit " + std::to_string(total) + " policies");

    PolicySearchResult res;
    std::vector<int> idx(n, 0);
    std::vector<double> P(static_cast<std::size_t>(n) * n), cost(n);
    for (;;) {
        for (int s = 0; s < n; ++s) {
            const Choice& c = choices[s][idx[s]];
            std::copy(c.row.begin(), c.row.end(), P.begin() + static_cast<std::ptrdiff_t>(s) * n);
            cost[s] = c.cost;
        }
        res.theta = std::min(res.theta, detail::min_class_gain(P, cost, n));
        ++res.policies;
        int s = n - 1;
        while (s >= 0 && ++idx[s] == static_cast<int>(choices[s].size())) idx[s--] = 0;
        if (s < 0) break;
    }
    return res;
}

} // namespace v2x::oracle
