#pragma once

// Scenario configuration: every static parameter of a simulation, its file
// representation and validation.
//
// The configuration file is JSON (comments allowed) with one object per
// section. Every key is optional; missing keys keep the documented default and
// unknown keys are rejected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace v2x {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class Regime { low, high };
enum class ArrivalKind { poisson, bernoulli };
enum class LeftoverMode { largest_remainder, strict_floor };
enum class LogBase { two, natural };
enum class PolicyKind { two_stage, full_optimal, random, equal_split };
enum class FullChannelModel { sampled, quantized };

inline const char* to_string(Regime r) { return r == Regime::low ? "low" : "high"; }
inline const char* to_string(ArrivalKind a) { return a == ArrivalKind::poisson ? "poisson" : "bernoulli"; }
inline const char* to_string(LeftoverMode m) {
    return m == LeftoverMode::largest_remainder ? "largest_remainder" : "strict_floor";
}
inline const char* to_string(LogBase b) { return b == LogBase::two ? "2" : "e"; }
inline const char* to_string(FullChannelModel m) { return m == FullChannelModel::sampled ? "sampled" : "quantized"; }
inline const char* to_string(PolicyKind p) {
    switch (p) {
    case PolicyKind::two_stage: return "two_stage";
    case PolicyKind::full_optimal: return "full_optimal";
    case PolicyKind::random: return "random";
    case PolicyKind::equal_split: return "equal_split";
    }
    return "?";
}

inline Regime parse_regime(const std::string& s) {
    if (s == "low") return Regime::low;
    if (s == "high") return Regime::high;
    throw ConfigError("tdi_regime", "expected low|high, got '" + s + "'");
}

inline PolicyKind parse_policy(const std::string& s) {
    if (s == "two_stage") return PolicyKind::two_stage;
    if (s == "full_optimal") return PolicyKind::full_optimal;
    if (s == "random") return PolicyKind::random;
    if (s == "equal_split") return PolicyKind::equal_split;
    throw ConfigError("policy", "expected two_stage|full_optimal|random|equal_split, got '" + s + "'");
}

struct ScenarioConfig {
    // [scenario]
    int total_rbs = 25;                 // N_RB^total over the whole intersection
    double bandwidth_per_rb = 180e3;    // Hz
    int n_tx_antennas = 2;              // N_T
    double slot_duration = 1e-3;        // s
    double tdi_update_interval = 0.5;   // s, integer multiple of the slot
    int queue_capacity = 10;            // N_Q, packets
    int packet_size_ds = 20;            // bytes
    int packet_size_nds = 300;          // bytes
    std::uint64_t rng_seed = 1;

    // [traffic]
    double kappa_jam = 2.0;
    double v_free = 15.0;               // m/s
    double segment_length = 100.0;      // m, one road arm per subregion
    double intersection_offset = 10.0;  // m from the BS to the start of each arm
    int lanes = 1;
    double density_unit = 1.0;          // m of road per unit of kappa
    double ds_fraction = 0.5;
    int max_ds_links = 2;               // scheduled delay-sensitive links per subregion
    int max_nds_links = 2;              // scheduled non-delay-sensitive links per subregion
    double arrival_rate = 5.0;          // packets/s per link
    ArrivalKind arrival_process = ArrivalKind::poisson;
    Regime tdi_regime = Regime::low;
    std::vector<double> tdi;            // pinned densities; empty means sample per epoch

    // [radio]
    double sinr_threshold = 3.1623;     // linear (5 dB)
    double noise_power = 5.69e-15;      // W over one RB
    double tx_power = 0.2;              // W
    double path_loss_exponent = 3.68;
    double reference_gain_db = -38.5;   // large-scale gain at the reference distance
    double reference_distance = 1.0;    // m
    double shadowing_std_db = 8.0;
    bool shadowing_enabled = true;
    double neighbor_radius = 150.0;     // m
    LogBase log_base = LogBase::two;

    // [stage1]
    double c1 = 0.5;
    double c2 = 10.0;
    LeftoverMode leftover_rbs = LeftoverMode::largest_remainder;

    // [stage2]
    double prr_floor = 0.9;             // p_i^(th)
    double rate_floor = 1e5;            // r_j^(th), bit/s
    std::vector<double> weights;        // alpha per delay-sensitive link slot; missing entries are 1
    double rate_unit = 1e6;             // bit/s per rate unit inside the Lagrangian
    int n_mc = 200;
    double rvi_tolerance = 1e-6;
    int rvi_max_iterations = 100000;
    long enumeration_cap = 200000;
    double beta0 = 0.0;
    double gamma0 = 0.0;
    double eta0 = 0.0;
    double lambda0 = 0.0;
    double dual_step = 0.0;             // 0 disables the multiplier updates
    FullChannelModel full_channel_model = FullChannelModel::sampled;
    int full_channel_samples = 200;
    int quantization_levels = 2;

    // [sim]
    long horizon_slots = 5000;
    PolicyKind policy = PolicyKind::two_stage;
    double warmup_fraction = 0.1;

    long slots_per_epoch() const {
        return std::lround(tdi_update_interval / slot_duration);
    }

    double alpha(std::size_t ds_slot) const {
        return ds_slot < weights.size() ? weights[ds_slot] : 1.0;
    }

    /// Checks every invariant; throws ConfigError naming the offending key.
    void validate() const {
        auto need = [](bool ok, const char* key, const char* what) {
            if (!ok) throw ConfigError(key, what);
        };
        need(slot_duration > 0, "scenario.slot_duration_s", "must be > 0");
        need(tdi_update_interval > 0, "scenario.tdi_update_interval_s", "must be > 0");
        double ratio = tdi_update_interval / slot_duration;
        need(std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio),
             "scenario.tdi_update_interval_s", "must be an integer multiple of the slot duration");
        need(queue_capacity >= 1 && queue_capacity <= 250, "scenario.queue_capacity_pkts",
             "must be in [1, 250]");
        need(total_rbs >= 0, "scenario.total_rbs", "must be >= 0");
        need(bandwidth_per_rb > 0, "scenario.bandwidth_per_rb_hz", "must be > 0");
        need(n_tx_antennas >= 1, "scenario.n_tx_antennas", "must be >= 1");
        need(packet_size_ds >= 1, "scenario.packet_size_ds_bytes", "must be >= 1");
        need(packet_size_nds >= 1, "scenario.packet_size_nds_bytes", "must be >= 1");
        need(kappa_jam > 0, "traffic.kappa_jam", "must be > 0");
        need(v_free >= 0, "traffic.v_free_mps", "must be >= 0");
        need(segment_length > 0, "traffic.segment_length_m", "must be > 0");
        need(intersection_offset >= 0, "traffic.intersection_offset_m", "must be >= 0");
        need(lanes >= 1, "traffic.lanes", "must be >= 1");
        need(density_unit > 0, "traffic.density_unit_m", "must be > 0");
        need(ds_fraction >= 0 && ds_fraction <= 1, "traffic.ds_fraction", "must be in [0, 1]");
        need(max_ds_links >= 0 && max_nds_links >= 0, "traffic.max_ds_links", "must be >= 0");
        need(arrival_rate >= 0, "traffic.arrival_rate_pkt_s", "must be >= 0");
        need(arrival_process != ArrivalKind::bernoulli || arrival_rate * slot_duration <= 1.0,
             "traffic.arrival_rate_pkt_s", "Bernoulli arrivals need rate * slot <= 1");
        need(tdi.empty() || tdi.size() == 4, "traffic.tdi", "must hold exactly 4 densities");
        for (double k : tdi) need(k >= 0, "traffic.tdi", "densities must be >= 0");
        need(sinr_threshold >= 0, "radio.sinr_threshold", "must be >= 0");
        need(noise_power >= 0, "radio.noise_power_w", "must be >= 0");
        need(tx_power >= 0, "radio.tx_power_w", "must be >= 0");
        need(reference_distance > 0, "radio.reference_distance_m", "must be > 0");
        need(shadowing_std_db >= 0, "radio.shadowing_std_db", "must be >= 0");
        need(neighbor_radius >= 0, "radio.neighbor_radius_m", "must be >= 0");
        need(c1 > 0, "stage1.c1", "must be > 0");
        need(c2 > 0, "stage1.c2", "must be > 0");
        need(prr_floor >= 0 && prr_floor <= 1, "stage2.prr_floor", "must be in [0, 1]");
        need(rate_floor >= 0, "stage2.rate_floor_bps", "must be >= 0");
        for (double w : weights) need(w >= 0, "stage2.weights", "weights must be >= 0");
        need(rate_unit > 0, "stage2.rate_unit_bps", "must be > 0");
        need(n_mc >= 1, "stage2.n_mc", "must be >= 1");
        need(rvi_tolerance > 0, "stage2.rvi_tolerance", "must be > 0");
        need(rvi_max_iterations >= 1, "stage2.rvi_max_iterations", "must be >= 1");
        need(enumeration_cap >= 1, "stage2.enumeration_cap", "must be >= 1");
        need(beta0 >= 0 && gamma0 >= 0 && eta0 >= 0 && lambda0 >= 0, "stage2.beta0",
             "initial multipliers must be >= 0");
        need(dual_step >= 0, "stage2.dual_step", "must be >= 0");
        need(full_channel_samples >= 1, "stage2.full_channel_samples", "must be >= 1");
        need(quantization_levels >= 1, "stage2.quantization_levels", "must be >= 1");
        need(horizon_slots >= 1, "sim.horizon_slots", "must be >= 1");
        need(warmup_fraction >= 0 && warmup_fraction < 1, "sim.warmup_fraction", "must be in [0, 1)");
    }
};

namespace detail {

struct ConfigField {
    const char* section;
    const char* key;
    std::function<void(ScenarioConfig&, const json&)> set;
    std::function<json(const ScenarioConfig&)> get;
};

template <class T>
void read_value(const json& j, T& out, const std::string& name) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw ConfigError(name, "expected a boolean");
            out = j.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) throw ConfigError(name, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)
                    throw ConfigError(name, "expected a non-negative integer");
            }
            out = j.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) throw ConfigError(name, "expected a number");
            out = j.get<T>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (j.is_number()) {
                out = {j.get<double>()};
            } else {
                if (!j.is_array()) throw ConfigError(name, "expected a number or an array of numbers");
                out.clear();
                for (const auto& e : j) {
                    if (!e.is_number()) throw ConfigError(name, "array entries must be numbers");
                    out.push_back(e.get<double>());
                }
            }
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    } catch (const json::exception& e) {
        throw ConfigError(name, e.what());
    }
}

template <class T>
ConfigField field(const char* section, const char* key, T ScenarioConfig::*member) {
    std::string name = std::string(section) + "." + key;
    return {section, key,
            [member, name](ScenarioConfig& c, const json& j) { read_value(j, c.*member, name); },
            [member](const ScenarioConfig& c) { return json(c.*member); }};
}

template <class E>
ConfigField enum_field(const char* section, const char* key, E ScenarioConfig::*member,
                       std::vector<E> options) {
    std::string name = std::string(section) + "." + key;
    return {section, key,
            [member, name, options](ScenarioConfig& c, const json& j) {
                std::string s = j.is_string() ? j.get<std::string>()
                                              : (j.is_number() ? j.dump() : std::string("<non-string>"));
                for (E o : options) {
                    if (s == to_string(o)) {
                        c.*member = o;
                        return;
                    }
                }
                std::string allowed;
                for (E o : options) allowed += (allowed.empty() ? "" : "|") + std::string(to_string(o));
                throw ConfigError(name, "expected " + allowed + ", got '" + s + "'");
            },
            [member](const ScenarioConfig& c) { return json(to_string(c.*member)); }};
}

inline const std::vector<ConfigField>& config_fields() {
    using C = ScenarioConfig;
    static const std::vector<ConfigField> fields = {
        field("scenario", "total_rbs", &C::total_rbs),
        field("scenario", "bandwidth_per_rb_hz", &C::bandwidth_per_rb),
        field("scenario", "n_tx_antennas", &C::n_tx_antennas),
        field("scenario", "slot_duration_s", &C::slot_duration),
        field("scenario", "tdi_update_interval_s", &C::tdi_update_interval),
        field("scenario", "queue_capacity_pkts", &C::queue_capacity),
        field("scenario", "packet_size_ds_bytes", &C::packet_size_ds),
        field("scenario", "packet_size_nds_bytes", &C::packet_size_nds),
        field("scenario", "rng_seed", &C::rng_seed),

        field("traffic", "kappa_jam", &C::kappa_jam),
        field("traffic", "v_free_mps", &C::v_free),
        field("traffic", "segment_length_m", &C::segment_length),
        field("traffic", "intersection_offset_m", &C::intersection_offset),
        field("traffic", "lanes", &C::lanes),
        field("traffic", "density_unit_m", &C::density_unit),
        field("traffic", "ds_fraction", &C::ds_fraction),
        field("traffic", "max_ds_links", &C::max_ds_links),
        field("traffic", "max_nds_links", &C::max_nds_links),
        field("traffic", "arrival_rate_pkt_s", &C::arrival_rate),
        enum_field("traffic", "arrival_process", &C::arrival_process,
                   {ArrivalKind::poisson, ArrivalKind::bernoulli}),
        enum_field("traffic", "tdi_regime", &C::tdi_regime, {Regime::low, Regime::high}),
        field("traffic", "tdi", &C::tdi),

        field("radio", "sinr_threshold", &C::sinr_threshold),
        field("radio", "noise_power_w", &C::noise_power),
        field("radio", "tx_power_w", &C::tx_power),
        field("radio", "path_loss_exponent", &C::path_loss_exponent),
        field("radio", "reference_gain_db", &C::reference_gain_db),
        field("radio", "reference_distance_m", &C::reference_distance),
        field("radio", "shadowing_std_db", &C::shadowing_std_db),
        field("radio", "shadowing_enabled", &C::shadowing_enabled),
        field("radio", "neighbor_radius_m", &C::neighbor_radius),
        enum_field("radio", "log_base", &C::log_base, {LogBase::two, LogBase::natural}),

        field("stage1", "c1", &C::c1),
        field("stage1", "c2", &C::c2),
        enum_field("stage1", "leftover_rbs", &C::leftover_rbs,
                   {LeftoverMode::largest_remainder, LeftoverMode::strict_floor}),

        field("stage2", "prr_floor", &C::prr_floor),
        field("stage2", "rate_floor_bps", &C::rate_floor),
        field("stage2", "weights", &C::weights),
        field("stage2", "rate_unit_bps", &C::rate_unit),
        field("stage2", "n_mc", &C::n_mc),
        field("stage2", "rvi_tolerance", &C::rvi_tolerance),
        field("stage2", "rvi_max_iterations", &C::rvi_max_iterations),
        field("stage2", "enumeration_cap", &C::enumeration_cap),
        field("stage2", "beta0", &C::beta0),
        field("stage2", "gamma0", &C::gamma0),
        field("stage2", "eta0", &C::eta0),
        field("stage2", "lambda0", &C::lambda0),
        field("stage2", "dual_step", &C::dual_step),
        enum_field("stage2", "full_channel_model", &C::full_channel_model,
                   {FullChannelModel::sampled, FullChannelModel::quantized}),
        field("stage2", "full_channel_samples", &C::full_channel_samples),
        field("stage2", "quantization_levels", &C::quantization_levels),

        field("sim", "horizon_slots", &C::horizon_slots),
        enum_field("sim", "policy", &C::policy,
                   {PolicyKind::two_stage, PolicyKind::full_optimal, PolicyKind::random,
                    PolicyKind::equal_split}),
        field("sim", "warmup_fraction", &C::warmup_fraction),
    };
    return fields;
}

} // namespace detail

/// Applies the keys present in `doc` on top of `base`. Unknown sections or keys throw.
inline ScenarioConfig apply_config(ScenarioConfig base, const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "configuration root must be an object");
    const auto& fields = detail::config_fields();
    for (const auto& [section, body] : doc.items()) {
        bool known_section = false;
        for (const auto& f : fields) known_section |= (section == f.section);
        if (!known_section) throw ConfigError(section, "unknown section");
        if (!body.is_object()) throw ConfigError(section, "section must be an object");
        for (const auto& [key, value] : body.items()) {
            auto it = std::find_if(fields.begin(), fields.end(), [&](const detail::ConfigField& f) {
                return section == f.section && key == f.key;
            });
            if (it == fields.end()) throw ConfigError(section + "." + key, "unknown key");
            it->set(base, value);
        }
    }
    base.validate();
    return base;
}

inline ScenarioConfig parse_config(const std::string& text, ScenarioConfig base = {}) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed configuration: ") + e.what());
    }
    return apply_config(std::move(base), doc);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open configuration file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Full resolved parameter set, defaults included, in file layout.
inline json config_to_json(const ScenarioConfig& c) {
    json out = json::object();
    for (const auto& f : detail::config_fields()) out[f.section][f.key] = f.get(c);
    return out;
}

} // namespace v2x
