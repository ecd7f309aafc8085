#pragma once

// Shared vocabulary: subregions, RB-to-link assignments and the feasible
// action set of one subregion.
//
// Link indexing is fixed everywhere: links 0..n_nds-1 are the
// non-delay-sensitive (cellular uplink) links, n_nds..n_links-1 the
// delay-sensitive (broadcast) links. RB indices are local to the subregion.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace v2x {

class ActionSpaceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One road arm of the intersection: vehicles lie on origin + s * axis, s in [0, length].
struct RoadSegment {
    double origin_x = 0, origin_y = 0;
    double axis_x = 1, axis_y = 0;
    double length = 0;
};

struct Subregion {
    int id = 0;           // 0..3
    int n_nds = 0;
    int n_ds = 0;
    int n_rbs = 0;        // assigned by stage one
    int first_rb = 0;     // global index of local RB 0
    RoadSegment geometry;

    int n_links() const { return n_nds + n_ds; }
    bool is_ds(int link) const { return link >= n_nds; }
};

/// Compact form of an allocation: rb[l] is the RB held by link l, or -1.
/// Valid by construction when produced by enumerate_assignments.
using Assignment = std::vector<std::int8_t>;

/// Binary s(k, l) with the RB index first.
class AllocationMatrix {
public:
    AllocationMatrix() = default;
    AllocationMatrix(int n_rbs, int n_links)
        : n_rbs_(n_rbs), n_links_(n_links), s_(static_cast<std::size_t>(n_rbs) * n_links, 0) {}

    static AllocationMatrix from_assignment(int n_rbs, const Assignment& a) {
        AllocationMatrix m(n_rbs, static_cast<int>(a.size()));
        for (std::size_t l = 0; l < a.size(); ++l)
            if (a[l] >= 0) m.set(a[l], static_cast<int>(l), true);
        return m;
    }

    int n_rbs() const { return n_rbs_; }
    int n_links() const { return n_links_; }
    bool at(int k, int l) const { return s_[index(k, l)] != 0; }
    void set(int k, int l, bool v) { s_[index(k, l)] = v ? 1 : 0; }

    /// RB held by link l, -1 if none. Only meaningful on a valid matrix.
    int rb_of(int l) const {
        for (int k = 0; k < n_rbs_; ++k)
            if (at(k, l)) return k;
        return -1;
    }

    Assignment assignment() const {
        Assignment a(n_links_);
        for (int l = 0; l < n_links_; ++l) a[l] = static_cast<std::int8_t>(rb_of(l));
        return a;
    }

    bool operator==(const AllocationMatrix&) const = default;

private:
    std::size_t index(int k, int l) const {
        if (k < 0 || k >= n_rbs_ || l < 0 || l >= n_links_)
            throw std::out_of_range("allocation index out of range");
        return static_cast<std::size_t>(k) * n_links_ + l;
    }

    int n_rbs_ = 0;
    int n_links_ = 0;
    std::vector<std::uint8_t> s_;
};

/// At most one NDS link and one DS link per RB, at most one RB per link.
inline bool validate_allocation(const AllocationMatrix& alloc, const Subregion& sub) {
    if (alloc.n_rbs() != sub.n_rbs || alloc.n_links() != sub.n_links())
        throw ConfigError("allocation", "matrix is " + std::to_string(alloc.n_rbs()) + "x" +
                                            std::to_string(alloc.n_links()) + ", subregion needs " +
                                            std::to_string(sub.n_rbs) + "x" + std::to_string(sub.n_links()));
    for (int k = 0; k < sub.n_rbs; ++k) {
        int nds = 0, ds = 0;
        for (int l = 0; l < sub.n_links(); ++l) {
            if (!alloc.at(k, l)) continue;
            (sub.is_ds(l) ? ds : nds)++;
        }
        if (nds > 1 || ds > 1) return false;
    }
    for (int l = 0; l < sub.n_links(); ++l) {
        int held = 0;
        for (int k = 0; k < sub.n_rbs; ++k) held += alloc.at(k, l);
        if (held > 1) return false;
    }
    return true;
}

/// All valid assignments in a fixed order: each link chooses idle or one RB,
/// link 0 is the most significant digit and idle sorts first, so index 0 is
/// always the all-idle action.
inline std::vector<Assignment> enumerate_assignments(int n_nds, int n_ds, int n_rbs, long cap = 200000) {
    if (n_nds < 0 || n_ds < 0 || n_rbs < 0) throw ConfigError("subregion", "negative dimension");
    if (n_rbs > 127) throw ActionSpaceTooLarge("more than 127 RBs in one subregion");
    const int n_links = n_nds + n_ds;
    std::vector<Assignment> out;
    Assignment cur(n_links, -1);
    std::vector<char> nds_used(n_rbs, 0), ds_used(n_rbs, 0);

    auto rec = [&](auto&& self, int l) -> void {
        if (l == n_links) {
            if (static_cast<long>(out.size()) >= cap)
                throw ActionSpaceTooLarge(
                    "feasible action set exceeds the enumeration cap of " + std::to_string(cap) +
                    " actions; use the per-slot greedy scheduler (stage2::greedy_schedule) for this size");
            out.push_back(cur);
            return;
        }
        auto& used = l < n_nds ? nds_used : ds_used;
        cur[l] = -1;
        self(self, l + 1);
        for (int k = 0; k < n_rbs; ++k) {
            if (used[k]) continue;
            used[k] = 1;
            cur[l] = static_cast<std::int8_t>(k);
            self(self, l + 1);
            used[k] = 0;
        }
        cur[l] = -1;
    };
    rec(rec, 0);
    return out;
}

inline std::vector<AllocationMatrix> enumerate_feasible_actions(const Subregion& sub, long cap = 200000) {
    std::vector<AllocationMatrix> out;
    for (const auto& a : enumerate_assignments(sub.n_nds, sub.n_ds, sub.n_rbs, cap))
        out.push_back(AllocationMatrix::from_assignment(sub.n_rbs, a));
    return out;
}

} // namespace v2x
