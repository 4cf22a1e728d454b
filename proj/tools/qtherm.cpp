// qtherm command-line tool: dataset generation, estimation on stored
// records, and sweep execution.
//
// Exit codes: 0 success, 2 usage/validation error, 3 I/O error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "qtherm/estimate.hpp"
#include "qtherm/harness.hpp"
#include "qtherm/io.hpp"
#include "qtherm/sim.hpp"
#include "qtherm/version.hpp"

namespace {

using namespace qtherm;

constexpr int exit_usage = 2;
constexpr int exit_io = 3;

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

io::json make_manifest(const std::string& subcommand, std::uint64_t config_digest,
                       std::uint64_t seed, const std::string& started,
                       const std::vector<std::string>& outputs) {
    io::json m;
    m["subcommand"] = subcommand;
    m["config_digest"] = io::hex64(config_digest);
    m["seed"] = seed;
    m["artifact_version"] = artifact_version;
    m["constants_table_version"] = constants_table_version;
    m["started_at"] = started;
    m["finished_at"] = iso_now();
    m["outputs"] = outputs;
    return m;
}

std::uint64_t draw_random_seed() {
    std::random_device rd;
    return (std::uint64_t(rd()) << 32) ^ rd();
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed, unsigned workers, bool to_stdout) {
    std::string started = iso_now();
    SimConfig cfg;
    bool config_has_seed = false;
    try {
        auto j = io::json::parse(io::read_file(config_path));
        cfg = io::sim_config_from_json(j);
        config_has_seed = j.contains("seed");
    } catch (const std::ios_base::failure& e) {
        std::cerr << "qtherm simulate: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "qtherm simulate: invalid config: " << e.what() << "\n";
        return exit_usage;
    }
    if (seed) cfg.seed = *seed;
    // No seed anywhere: draw one and record it in the manifest so the
    // run stays reproducible after the fact.
    else if (!config_has_seed) cfg.seed = draw_random_seed();

    Dataset ds = generate_dataset(cfg, workers);
    std::string csv = io::dataset_to_csv(ds);
    io::json sidecar = io::to_json(cfg);
    std::uint64_t digest = io::fnv1a(sidecar.dump());
    try {
        io::write_file(out_path, csv);
        io::write_file(out_path + ".json", sidecar.dump(2) + "\n");
        auto manifest = make_manifest("simulate", digest, cfg.seed, started,
                                      {out_path, out_path + ".json"});
        manifest["record_digest"] = io::hex64(io::fnv1a(csv));
        io::write_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
    } catch (const std::ios_base::failure& e) {
        std::cerr << "qtherm simulate: " << e.what() << "\n";
        return exit_io;
    }
    if (to_stdout) std::cout << csv;
    std::cerr << "wrote " << out_path << " (" << (ds.run1.size() + ds.run2.size() + ds.qutrit.size())
              << " records, digest " << io::hex64(io::fnv1a(csv)) << ")\n";
    return 0;
}

int cmd_estimate(const std::string& records_path, const std::string& method_name_str,
                 const std::string& out_path, bool to_stdout) {
    std::vector<ShotRecord> records;
    Method method;
    try {
        method = method_from_name(method_name_str);
    } catch (const std::exception& e) {
        std::cerr << "qtherm estimate: " << e.what() << "\n";
        return exit_usage;
    }
    try {
        std::string raw = io::read_file(records_path);
        std::istringstream in(raw);
        records = io::records_from_csv(in);
    } catch (const std::ios_base::failure& e) {
        std::cerr << "qtherm estimate: " << e.what() << "\n";
        return exit_io;
    } catch (const io::ParseError& e) {
        std::cerr << "qtherm estimate: " << e.what() << "\n";
        return exit_usage;
    }

    std::vector<ShotRecord> run1, run2, rabi;
    for (auto& r : records) {
        switch (r.prep.tag) {
            case PrepTag::none: run1.push_back(std::move(r)); break;
            case PrepTag::pi_ge: run2.push_back(std::move(r)); break;
            case PrepTag::pi_ef_rabi: rabi.push_back(std::move(r)); break;
        }
    }

    Estimate est;
    try {
        if (method == Method::qutrit) {
            if (rabi.empty()) {
                std::cerr << "qtherm estimate: qutrit method needs pi_ef_rabi records\n";
                return exit_usage;
            }
            est = qutrit_estimate(rabi);
        } else if (method == Method::direct_count) {
            if (run1.empty() || run2.empty()) {
                std::cerr << "qtherm estimate: direct_count needs Run I and Run II records\n";
                return exit_usage;
            }
            est = direct_count(run1, calibrate(run1, run2));
        } else {
            if (run1.empty() || run2.empty()) {
                std::cerr << "qtherm estimate: correlator methods need Run I and Run II records\n";
                return exit_usage;
            }
            est = estimate_correlator(run1, run2, method);
        }
    } catch (const std::exception& e) {
        std::cerr << "qtherm estimate: " << e.what() << "\n";
        return exit_usage;
    }
    std::string out = io::estimate_to_json(est).dump(2) + "\n";
    if (!out_path.empty()) {
        try {
            io::write_file(out_path, out);
        } catch (const std::ios_base::failure& e) {
            std::cerr << "qtherm estimate: " << e.what() << "\n";
            return exit_io;
        }
    }
    if (to_stdout || out_path.empty()) std::cout << out;
    return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, unsigned workers) {
    std::string started = iso_now();
    harness::SweepSpec spec;
    try {
        spec = harness::sweep_spec_from_json(io::json::parse(io::read_file(spec_path)));
    } catch (const std::ios_base::failure& e) {
        std::cerr << "qtherm sweep: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "qtherm sweep: invalid spec: " << e.what() << "\n";
        return exit_usage;
    }
    if (seed) spec.base_config.seed = *seed;

    harness::SweepResult result;
    try {
        result = harness::run_sweep(spec, workers);
    } catch (const std::exception& e) {
        std::cerr << "qtherm sweep: " << e.what() << "\n";
        return exit_usage;
    }
    std::string csv = harness::sweep_rows_to_csv(result.rows);
    try {
        std::filesystem::create_directories(out_dir);
        std::string csv_path = out_dir + "/sweep.csv";
        io::write_file(csv_path, csv);
        io::json spec_json = harness::sweep_spec_to_json(spec);
        auto manifest = make_manifest("sweep", io::fnv1a(spec_json.dump()),
                                      spec.base_config.seed, started, {csv_path});
        manifest["spec"] = spec_json;
        manifest["sweep_digest"] = io::hex64(io::fnv1a(csv));
        io::json seeds = io::json::array();
        for (const auto& row : result.rows)
            for (auto s : row.seeds) seeds.push_back(s);
        manifest["row_seeds"] = seeds;
        if (!result.slopes.empty()) {
            io::json slopes = io::json::array();
            for (const auto& [p, s] : result.slopes)
                slopes.push_back({{"power_dbm", p}, {"slope", s}});
            manifest["scaling_slopes"] = slopes;
        }
        io::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "qtherm sweep: " << e.what() << "\n";
        return exit_io;
    }
    std::cerr << "wrote " << out_dir << "/sweep.csv (" << result.rows.size() << " rows, digest "
              << io::hex64(io::fnv1a(csv)) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qtherm: QND measurement-correlation thermometry toolkit"};
    app.require_subcommand(1);

    std::string config_path, spec_path, records_path, out_path, method = "correlator_exact";
    std::optional<std::uint64_t> seed;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    bool to_stdout = false;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic record file");
    sim->add_option("--config", config_path, "simulation config JSON")->required();
    sim->add_option("--out", out_path, "output record CSV path")->required();
    sim->add_option("--seed", seed, "seed override (default: seed from config)");
    sim->add_option("--workers", workers, "worker thread count");
    sim->add_flag("--stdout", to_stdout, "also write records to stdout");

    auto* est = app.add_subcommand("estimate", "estimate P_e from a record file");
    est->add_option("--records", records_path, "record CSV path")->required();
    est->add_option("--method", method,
                    "correlator_exact|correlator_approx|correlator_general|direct_count|qutrit");
    est->add_option("--out", out_path, "output estimate JSON path");
    est->add_flag("--stdout", to_stdout, "write estimate JSON to stdout");

    auto* swp = app.add_subcommand("sweep", "run a sweep experiment");
    swp->add_option("--spec", spec_path, "sweep spec JSON")->required();
    swp->add_option("--out", out_path, "output directory")->required();
    swp->add_option("--seed", seed, "base seed override");
    swp->add_option("--workers", workers, "worker thread count");

    auto* ver = app.add_subcommand("version", "print version information");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    if (ver->parsed()) {
        std::cout << "qtherm " << qtherm::artifact_version << " (constants "
                  << qtherm::constants_table_version << ")\n";
        return 0;
    }
    if (sim->parsed()) return cmd_simulate(config_path, out_path, seed, workers, to_stdout);
    if (est->parsed()) return cmd_estimate(records_path, method, out_path, to_stdout);
    if (swp->parsed()) return cmd_sweep(spec_path, out_path, seed, workers);
    return exit_usage;
}
