// v2xsim: command-line driver for the allocation simulator.
//
//   v2xsim run          one (policy, regime, rate) cell, CSV row to --out
//   v2xsim sweep        rates x regimes x policies grid, one CSV row per cell
//   v2xsim solve-stage1 shares for four densities, as CSV on stdout
//   v2xsim validate     resolved configuration (defaults included) on stdout
//   v2xsim oracle-check closed-form and value-iteration solvers against the oracles
//
// Every flag can also be set through an environment variable named
// V2XSIM_<FLAG> (upper case, dashes as underscores); command-line flags win.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <v2x/fixtures.hpp>
#include <v2x/sim.hpp>

namespace {

using namespace v2x;
using json = nlohmann::json;

struct Options {
    std::string config;
    std::string out = "v2xsim.csv";
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string policy;
    std::string rates;
    std::string regime;
    int reps = 0;
    std::string warm_start;
    std::string save_values;
    bool append = false;
    std::string kappa;
    int draws = 200;
    bool verbose = false;
};

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& item : split(s)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(what, "not a number: '" + item + "'");
        }
    }
    return out;
}

std::vector<Regime> parse_regimes(const std::string& s) {
    if (s == "both") return {Regime::low, Regime::high};
    return {parse_regime(s)};
}

ScenarioConfig resolve_config(const Options& o) {
    ScenarioConfig cfg = o.config.empty() ? ScenarioConfig{} : load_config(o.config);
    if (o.seed_given) cfg.rng_seed = o.seed;
    if (!o.policy.empty() && split(o.policy).size() == 1) cfg.policy = parse_policy(o.policy);
    if (!o.regime.empty() && o.regime != "both") cfg.tdi_regime = parse_regime(o.regime);
    cfg.validate();
    return cfg;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Opens the CSV for writing. With `append`, keeps existing rows after
/// checking that their header matches; returns whether a header is needed.
bool open_csv(std::ofstream& f, const std::string& path, bool append) {
    bool need_header = true;
    if (append && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
        std::ifstream in(path);
        std::string first;
        std::getline(in, first);
        if (first != sim::csv_header())
            throw std::runtime_error("cannot append to '" + path + "': its header does not match the current schema");
        need_header = false;
    }
    f.open(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    return need_header;
}

/// Writes (or extends, when appending) `<csv>.provenance.json`.
void write_provenance(const std::string& csv, const std::string& verb, const ScenarioConfig& cfg, bool append,
                      const std::vector<std::string>& argv, long rows) {
    std::string path = csv + ".provenance.json";
    json doc;
    if (append && std::filesystem::exists(path)) {
        std::ifstream in(path);
        try {
            doc = json::parse(in);
        } catch (const json::exception&) {
            throw std::runtime_error("existing provenance file '" + path + "' is not valid JSON");
        }
    }
    if (!doc.is_object() || !doc.contains("writes")) {
        doc = json::object();
        doc["artifact"] = "v2xsim";
        doc["csv"] = std::filesystem::path(csv).filename().string();
        doc["writes"] = json::array();
    }
    json resolved = config_to_json(cfg);
    json w;
    w["verb"] = verb;
    w["version"] = V2X_VERSION;
    w["config_hash_fnv1a"] = hex(fnv1a(resolved.dump()));
    w["seed"] = cfg.rng_seed;
    w["argv"] = argv;
    w["rows"] = rows;
    w["config"] = resolved;
    doc["writes"].push_back(w);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

std::optional<stage2::ValueTable> load_warm_start(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open warm-start table '" + path + "'");
    return stage2::read_value_table(in);
}

void save_tables(const std::string& stem, const sim::RunReport& rep) {
    for (int i = 0; i < kSubregions; ++i) {
        if (!rep.final_tables[i]) continue;
        std::string path = stem + "." + std::to_string(i);
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write '" + path + "'");
        stage2::write_value_table(out, *rep.final_tables[i]);
    }
}

int cmd_run(const Options& o, const std::vector<std::string>& argv) {
    ScenarioConfig cfg = resolve_config(o);
    if (!o.policy.empty() && split(o.policy).size() != 1) throw ConfigError("policy", "run takes a single policy");
    if (o.regime == "both") throw ConfigError("regime", "run takes a single regime");
    if (!o.rates.empty()) {
        auto r = parse_doubles(o.rates, "rates");
        if (r.size() != 1) throw ConfigError("rates", "run takes a single arrival rate");
        cfg.arrival_rate = r[0];
        cfg.validate();
    }
    auto warm = load_warm_start(o.warm_start);
    sim::SweepCell cell =
        sim::run_cell(cfg, cfg.policy, cfg.tdi_regime, cfg.arrival_rate, std::max(1, o.reps), warm ? &*warm : nullptr);
    std::ofstream f;
    bool header = open_csv(f, o.out, o.append);
    if (header) f << sim::csv_header() << '\n';
    f << sim::csv_row(cell) << '\n';
    f.close();
    write_provenance(o.out, "run", cfg, o.append, argv, 1);
    if (!o.save_values.empty()) save_tables(o.save_values, cell.runs.front());
    const auto& r = cell.runs.front();
    std::cerr << "mean delay " << sim::format_number(cell.mean_delay) << " s, DS PRR "
              << sim::format_number(cell.mean_prr) << ", NDS rate " << sim::format_number(cell.mean_rate)
              << " bit/s, dropped " << r.dropped_packets << ", " << r.decisions << " decisions\n";
    return 0;
}

int cmd_sweep(const Options& o, const std::vector<std::string>& argv) {
    ScenarioConfig cfg = resolve_config(o);
    sim::SweepGrid grid;
    grid.rates = parse_doubles(o.rates.empty() ? "5,10,15,20,25,30" : o.rates, "rates");
    grid.regimes = parse_regimes(o.regime.empty() ? "both" : o.regime);
    for (const auto& p : split(o.policy.empty() ? "full_optimal,two_stage,random" : o.policy))
        grid.policies.push_back(parse_policy(p));
    grid.reps = o.reps > 0 ? o.reps : 20;
    auto warm = load_warm_start(o.warm_start);
    std::ofstream f;
    bool header = open_csv(f, o.out, o.append);
    auto cells = sim::sweep(cfg, grid, &f, header, warm ? &*warm : nullptr);
    f.close();
    write_provenance(o.out, "sweep", cfg, o.append, argv, static_cast<long>(cells.size()));
    return 0;
}

int cmd_solve_stage1(const Options& o) {
    ScenarioConfig cfg = resolve_config(o);
    TdiVector tdi{};
    if (!o.kappa.empty()) {
        auto k = parse_doubles(o.kappa, "kappa");
        if (k.size() != kSubregions) throw ConfigError("kappa", "expected four comma-separated densities");
        std::copy(k.begin(), k.end(), tdi.begin());
    } else if (cfg.tdi.size() == kSubregions) {
        std::copy(cfg.tdi.begin(), cfg.tdi.end(), tdi.begin());
    } else {
        throw ConfigError("kappa", "give --kappa k1,k2,k3,k4 or traffic.tdi in the configuration");
    }
    auto s = stage1::allocate_shares(tdi, stage1::UtilityParams::from(cfg));
    auto rbs = stage1::budget_rbs(s, cfg.total_rbs, cfg.leftover_rbs);
    std::cout << "epsilon_1,epsilon_2,epsilon_3,epsilon_4,active_count,omega,rbs_1,rbs_2,rbs_3,rbs_4\n";
    for (double e : s.epsilon) std::cout << sim::format_number(e) << ',';
    std::cout << s.active_count << ',' << sim::format_number(s.omega);
    for (int n : rbs) std::cout << ',' << n;
    std::cout << '\n';
    return 0;
}

int cmd_validate(const Options& o) {
    ScenarioConfig cfg = resolve_config(o);
    std::cout << config_to_json(cfg).dump(2) << '\n';
    return 0;
}

int cmd_oracle_check(const Options& o) {
    ScenarioConfig cfg = resolve_config(o);
    auto params = stage1::UtilityParams::from(cfg);
    RngStreams streams(cfg.rng_seed);
    double worst_eps = 0, worst_u = 0;
    for (Regime r : {Regime::low, Regime::high}) {
        Rng rng = streams.stream("oracle-check", static_cast<std::uint64_t>(r));
        auto d = fixture::stage1_oracle_deviation(r, o.draws, rng, params);
        std::cout << "stage1 " << to_string(r) << " draws " << d.draws << " max|d_eps| " << d.max_epsilon
                  << " max|d_U| " << d.max_utility << '\n';
        worst_eps = std::max(worst_eps, d.max_epsilon);
        worst_u = std::max(worst_u, d.max_utility);
    }
    auto toy = fixture::toy_mdp();
    auto enumerated = oracle::enumerate_policies(toy.problem, toy.channels);
    auto full = stage2::solve_full_bellman(toy.problem, toy.channels, stage2::SolveOptions{});
    auto reduced = stage2::solve_reduced(toy.problem, stage2::reduce(stage2::tabulate_outcomes(toy.problem, toy.channels)),
                                         stage2::SolveOptions{});
    double d_full = std::abs(full.theta - enumerated.theta);
    double rel_reduced = std::abs(reduced.theta - full.theta) / std::abs(full.theta);
    std::cout.precision(12);
    std::cout << "stage2 toy policies " << enumerated.policies << " theta_enum " << enumerated.theta << " theta_full "
              << full.theta << " theta_reduced " << reduced.theta << '\n';
    std::cout.precision(6);
    std::cout << "stage2 |theta_full - theta_enum| " << d_full << " reduced/full relative gap " << rel_reduced << '\n';
    bool ok = worst_eps <= 1e-6 && worst_u <= 1e-9 && d_full <= 1e-6 && rel_reduced <= 0.10;
    std::cout << (ok ? "oracle-check passed" : "oracle-check FAILED") << '\n';
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"V2X two-stage radio resource allocation simulator"};
    app.set_version_flag("--version", std::string(V2X_VERSION));
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", o.config, "configuration file (JSON)")->envname("V2XSIM_CONFIG");
        c->add_option("--seed", o.seed, "root seed; overrides scenario.rng_seed")
            ->envname("V2XSIM_SEED")
            ->each([&](const std::string&) { o.seed_given = true; });
        c->add_flag("-v,--verbose", o.verbose, "log progress to stderr")->envname("V2XSIM_VERBOSE");
    };
    auto add_experiment = [&](CLI::App* c, bool sweep) {
        add_common(c);
        c->add_option("--out", o.out, "CSV output path (overwritten unless --append)")
            ->envname("V2XSIM_OUT")
            ->capture_default_str();
        c->add_option("--policy", o.policy, sweep ? "comma-separated policies" : "policy")->envname("V2XSIM_POLICY");
        c->add_option("--rates", o.rates, sweep ? "comma-separated arrival rates, pkt/s" : "arrival rate, pkt/s")
            ->envname("V2XSIM_RATES");
        c->add_option("--regime", o.regime, sweep ? "low|high|both" : "low|high")->envname("V2XSIM_REGIME");
        c->add_option("--reps", o.reps, "seeded repetitions per cell")->envname("V2XSIM_REPS")->check(CLI::PositiveNumber);
        c->add_option("--warm-start", o.warm_start, "value table to start the solvers from")
            ->envname("V2XSIM_WARM_START");
        c->add_flag("--append", o.append, "append rows to an existing CSV")->envname("V2XSIM_APPEND");
    };

    auto* run = app.add_subcommand("run", "simulate one policy at one regime and rate");
    add_experiment(run, false);
    run->add_option("--save-values", o.save_values, "write each subregion's final value table to <path>.<i>")
        ->envname("V2XSIM_SAVE_VALUES");
    auto* sweep = app.add_subcommand("sweep", "simulate a rates x regimes x policies grid");
    add_experiment(sweep, true);
    auto* s1 = app.add_subcommand("solve-stage1", "print the shares for four densities");
    add_common(s1);
    s1->add_option("--kappa", o.kappa, "four comma-separated densities")->envname("V2XSIM_KAPPA");
    auto* val = app.add_subcommand("validate", "check a configuration and print it with defaults filled in");
    add_common(val);
    auto* oc = app.add_subcommand("oracle-check", "compare the solvers with the reference oracles");
    add_common(oc);
    oc->add_option("--draws", o.draws, "density draws per regime")->envname("V2XSIM_DRAWS")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    log::set_level(o.verbose ? log::Level::info : log::Level::warn);
    std::vector<std::string> args(argv, argv + argc);

    try {
        if (run->parsed()) return cmd_run(o, args);
        if (sweep->parsed()) return cmd_sweep(o, args);
        if (s1->parsed()) return cmd_solve_stage1(o);
        if (val->parsed()) return cmd_validate(o);
        if (oc->parsed()) return cmd_oracle_check(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const stage2::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
