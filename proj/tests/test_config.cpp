#include <gtest/gtest.h>

#include <fstream>

#include <v2x/config.hpp>

using namespace v2x;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Config, DefaultsMatchTableOne) {
    ScenarioConfig c;
    EXPECT_EQ(c.total_rbs, 25);
    EXPECT_DOUBLE_EQ(c.bandwidth_per_rb, 180e3);
    EXPECT_EQ(c.n_tx_antennas, 2);
    EXPECT_DOUBLE_EQ(c.slot_duration, 1e-3);
    EXPECT_DOUBLE_EQ(c.tdi_update_interval, 0.5);
    EXPECT_EQ(c.queue_capacity, 10);
    EXPECT_EQ(c.packet_size_ds, 20);
    EXPECT_EQ(c.packet_size_nds, 300);
    EXPECT_DOUBLE_EQ(c.kappa_jam, 2.0);
    EXPECT_DOUBLE_EQ(c.c1, 0.5);
    EXPECT_DOUBLE_EQ(c.c2, 10.0);
    EXPECT_EQ(c.slots_per_epoch(), 500);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ShippedDefaultFileEqualsBuiltInDefaults) {
    ScenarioConfig from_file = load_config(V2X_SOURCE_DIR "/configs/default.json");
    EXPECT_EQ(config_to_json(from_file), config_to_json(ScenarioConfig{}));
}

TEST(Config, DeskFixtureLoads) {
    ScenarioConfig c = load_config(V2X_SOURCE_DIR "/configs/desk.json");
    EXPECT_EQ(c.max_ds_links, 2);
    EXPECT_EQ(c.max_nds_links, 2);
    EXPECT_EQ(c.slots_per_epoch(), c.horizon_slots);
}

TEST(Config, PartialFileKeepsDefaults) {
    ScenarioConfig c = parse_config(R"({ "stage1": { "c2": 4 } })");
    EXPECT_DOUBLE_EQ(c.c2, 4.0);
    EXPECT_DOUBLE_EQ(c.c1, 0.5);
    EXPECT_EQ(c.total_rbs, 25);
}

TEST(Config, CommentsAllowed) {
    ScenarioConfig c = parse_config("// note\n{ \"sim\": { \"horizon_slots\": 1000 } // trailing\n}");
    EXPECT_EQ(c.horizon_slots, 1000);
}

TEST(Config, UnknownKeyNamesTheKey) {
    try {
        parse_config(R"({ "radio": { "noise_powr": 1 } })");
        FAIL() << "unknown key accepted";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "radio.noise_powr");
    }
}

TEST(Config, UnknownSectionRejected) {
    EXPECT_THROW(parse_config(R"({ "radios": {} })"), ConfigError);
}

TEST(Config, TypeErrorsNameTheKey) {
    try {
        parse_config(R"({ "scenario": { "total_rbs": 2.5 } })");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "scenario.total_rbs");
    }
    EXPECT_THROW(parse_config(R"({ "radio": { "shadowing_enabled": 1 } })"), ConfigError);
    EXPECT_THROW(parse_config(R"({ "scenario": { "rng_seed": -3 } })"), ConfigError);
    EXPECT_THROW(parse_config(R"({ "sim": { "policy": "optimal" } })"), ConfigError);
}

TEST(Config, InvariantsEnforced) {
    auto key_of = [](const char* text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.key();
        }
        return std::string("<accepted>");
    };
    EXPECT_EQ(key_of(R"({ "scenario": { "slot_duration_s": 0 } })"), "scenario.slot_duration_s");
    EXPECT_EQ(key_of(R"({ "scenario": { "tdi_update_interval_s": 0.0015 } })"), "scenario.tdi_update_interval_s");
    EXPECT_EQ(key_of(R"({ "scenario": { "queue_capacity_pkts": 0 } })"), "scenario.queue_capacity_pkts");
    EXPECT_EQ(key_of(R"({ "stage1": { "c1": 0 } })"), "stage1.c1");
    EXPECT_EQ(key_of(R"({ "stage1": { "c2": -1 } })"), "stage1.c2");
    EXPECT_EQ(key_of(R"({ "traffic": { "kappa_jam": 0 } })"), "traffic.kappa_jam");
    EXPECT_EQ(key_of(R"({ "radio": { "tx_power_w": -0.1 } })"), "radio.tx_power_w");
    EXPECT_EQ(key_of(R"({ "traffic": { "tdi": [1, 2] } })"), "traffic.tdi");
}

TEST(Config, MalformedJsonIsConfigError) {
    EXPECT_THROW(parse_config("{ \"sim\": "), ConfigError);
    EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
}

TEST(Config, MissingFileIsConfigError) { EXPECT_THROW(load_config("/nonexistent/v2x.json"), ConfigError); }

TEST(Config, RoundTripThroughJson) {
    ScenarioConfig c;
    c.tdi = {0.1, 0.2, 0.3, 0.4};
    c.weights = {2, 3};
    c.policy = PolicyKind::random;
    c.log_base = LogBase::natural;
    c.leftover_rbs = LeftoverMode::strict_floor;
    ScenarioConfig back = apply_config(ScenarioConfig{}, config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(back.tdi, c.tdi);
    EXPECT_DOUBLE_EQ(back.alpha(1), 3.0);
    EXPECT_DOUBLE_EQ(back.alpha(5), 1.0);
}

TEST(Config, ScalarWeightIsOneElementList) {
    ScenarioConfig c = parse_config(R"({ "stage2": { "weights": 2.5 } })");
    ASSERT_EQ(c.weights.size(), 1u);
    EXPECT_DOUBLE_EQ(c.alpha(0), 2.5);
    EXPECT_DOUBLE_EQ(c.alpha(1), 1.0);
}

TEST(Config, EnumsParse) {
    EXPECT_EQ(parse_regime("high"), Regime::high);
    EXPECT_THROW(parse_regime("medium"), ConfigError);
    EXPECT_EQ(parse_policy("equal_split"), PolicyKind::equal_split);
    EXPECT_STREQ(to_string(PolicyKind::full_optimal), "full_optimal");
}

TEST(Config, EveryDocumentedKeyAppearsInDefaultFile) {
    std::string text = read_file(V2X_SOURCE_DIR "/configs/default.json");
    for (const auto& [section, body] : config_to_json(ScenarioConfig{}).items())
        for (const auto& [key, value] : body.items())
            EXPECT_NE(text.find("\"" + key + "\""), std::string::npos) << section << "." << key;
}
