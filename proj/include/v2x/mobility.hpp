#pragma once

// Macroscopic traffic state: Greenshield flow/speed, traffic density samples
// and vehicle placement along the four road arms.

#include <array>
#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "log.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace v2x {

constexpr int kSubregions = 4;

using TdiVector = std::array<double, kSubregions>;

/// Flow = kappa * v_free - kappa^2 * v_free / kappa_jam. Negative beyond jam density, returned as is.
inline double greenshield_flow(double kappa, double v_free, double kappa_jam) {
    return kappa * v_free - kappa * kappa * v_free / kappa_jam;
}

inline double greenshield_speed(double kappa, double v_free, double kappa_jam) {
    if (kappa > kappa_jam) {
        log::warn("density " + std::to_string(kappa) + " above jam density, speed clamped to 0");
        return 0.0;
    }
    return v_free * (1.0 - kappa / kappa_jam);
}

inline TdiVector sample_tdi(Regime regime, Rng& rng) {
    double lo = regime == Regime::low ? 0.0 : 0.8;
    double hi = regime == Regime::low ? 0.5 : 1.2;
    TdiVector k{};
    for (double& v : k) v = lo + (hi - lo) * uniform01(rng);
    return k;
}

/// Arm i leaves the intersection along +x, +y, -x, -y for i = 0..3.
inline RoadSegment subregion_segment(int id, const ScenarioConfig& cfg) {
    static constexpr double ax[] = {1, 0, -1, 0};
    static constexpr double ay[] = {0, 1, 0, -1};
    RoadSegment s;
    s.axis_x = ax[id];
    s.axis_y = ay[id];
    s.origin_x = ax[id] * cfg.intersection_offset;
    s.origin_y = ay[id] * cfg.intersection_offset;
    s.length = cfg.segment_length;
    return s;
}

struct Vehicle {
    int subregion = 0;
    double x = 0, y = 0;
    bool ds = false;
    double speed = 0;
};

struct VehicleLayout {
    std::array<std::vector<Vehicle>, kSubregions> subregions;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& s : subregions) n += s.size();
        return n;
    }
};

inline int vehicle_count(double kappa, const ScenarioConfig& cfg) {
    return static_cast<int>(std::lround(kappa * (cfg.segment_length / cfg.density_unit) * cfg.lanes));
}

constexpr double kLaneWidth = 3.5;

/// Uniform placement along each arm; lanes are offset sideways by kLaneWidth.
inline VehicleLayout place_vehicles(const TdiVector& tdi, const ScenarioConfig& cfg, Rng& rng) {
    VehicleLayout out;
    for (int i = 0; i < kSubregions; ++i) {
        RoadSegment seg = subregion_segment(i, cfg);
        int n = vehicle_count(tdi[i], cfg);
        double speed = n > 0 ? greenshield_speed(tdi[i], cfg.v_free, cfg.kappa_jam) : 0.0;
        auto& list = out.subregions[i];
        list.reserve(n);
        for (int v = 0; v < n; ++v) {
            double s = seg.length * uniform01(rng);
            int lane = static_cast<int>(uniform01(rng) * cfg.lanes);
            double side = lane * kLaneWidth;
            Vehicle veh;
            veh.subregion = i;
            // sideways offset is the axis rotated by -90 degrees
            veh.x = seg.origin_x + s * seg.axis_x + side * seg.axis_y;
            veh.y = seg.origin_y + s * seg.axis_y - side * seg.axis_x;
            veh.ds = uniform01(rng) < cfg.ds_fraction;
            veh.speed = speed;
            list.push_back(veh);
        }
    }
    return out;
}

inline void write_layout_csv(std::ostream& os, const VehicleLayout& layout) {
    os << "subregion,x,y,class,speed\n";
    for (const auto& list : layout.subregions)
        for (const auto& v : list)
            os << v.subregion << ',' << v.x << ',' << v.y << ',' << (v.ds ? "DS" : "NDS") << ',' << v.speed
               << '\n';
}

} // namespace v2x
