#pragma once

// Composed experiments: correlator decay scan, temperature sweep,
// precision scaling, method comparison, frequency-profile replay.
// Each emits plot-ready rows with a fixed column contract:
//   x_name,x_value,method,p_e,std_error,truth_p_e,deviation

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estimate.hpp"
#include "io.hpp"
#include "model.hpp"
#include "sim.hpp"
#include "version.hpp"

namespace qtherm::harness {

enum class SweepVariable : std::uint8_t { tau, temperature, n_shots, power, frequency };

inline std::string sweep_variable_name(SweepVariable v) {
    switch (v) {
        case SweepVariable::tau: return "tau";
        case SweepVariable::temperature: return "temperature";
        case SweepVariable::n_shots: return "n_shots";
        case SweepVariable::power: return "power";
        case SweepVariable::frequency: return "frequency";
    }
    return "unknown";
}

struct PowerPoint {
    double power_dbm;
    double snr;
    double qnd_flip_prob;
};

struct FrequencyPoint {
    double frequency;   // Hz
    double gamma_up;    // hot-bath excitation rate, Hz
    double gamma_down;  // hot-bath relaxation rate, Hz
};

struct SweepSpec {
    SweepVariable variable = SweepVariable::tau;
    std::vector<double> values;
    SimConfig base_config;
    std::vector<PowerPoint> power_map;
    std::optional<BathModel> hot_bath;
    std::vector<FrequencyPoint> frequency_profile;
    std::uint64_t seeds_per_point = 1;
    std::vector<Method> methods{Method::correlator_exact};
    double fridge_temperature = 0.02;  // K; cold bath for frequency replay

    void validate() const {
        if (values.empty()) throw std::domain_error("SweepSpec: values must be non-empty");
        if (seeds_per_point < 1) throw std::domain_error("SweepSpec: seeds_per_point must be >= 1");
        if (variable == SweepVariable::power && power_map.empty())
            throw std::domain_error("SweepSpec: power sweep requires power_map");
        base_config.validate();
    }
};

struct SweepRow {
    std::string x_name;
    double x_value = 0.0;
    Method method = Method::correlator_exact;
    double p_e = 0.0;
    double std_error = 0.0;
    double truth_p_e = std::numeric_limits<double>::quiet_NaN();
    double deviation = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::uint64_t> seeds;
};

inline std::uint64_t point_seed(std::uint64_t base_seed, std::uint64_t point,
                                std::uint64_t rep) {
    return rng::mix64(rng::mix64(base_seed ^ 0x73776565700a0d1bULL) + point * 0x10001ULL + rep);
}

namespace detail {

inline std::vector<double> default_rabi_grid() {
    std::vector<double> g;
    for (int k = 0; k < 13; ++k) g.push_back(k * 6.283185307179586 / 12.0);
    return g;
}

inline Estimate estimate_one(const SimConfig& cfg, Method method, unsigned workers) {
    if (method == Method::qutrit) {
        SimConfig qc = cfg;
        qc.protocol = Protocol::qutrit;
        if (qc.rabi_angles.empty()) qc.rabi_angles = default_rabi_grid();
        auto recs = run_qutrit_protocol(qc, qc.rabi_angles, workers);
        return qutrit_estimate(recs);
    }
    auto runs = run_correlation_protocol(cfg, workers);
    if (method == Method::direct_count) {
        auto cal = calibrate(runs.run1, runs.run2);
        return direct_count(runs.run1, cal);
    }
    return estimate_correlator(runs.run1, runs.run2, method);
}

// One row per (point, method): mean over seeds; with several seeds the
// scatter across seeds supplies the error bar.
inline SweepRow aggregate(const std::string& x_name, double x_value, Method method,
                          const std::vector<Estimate>& ests,
                          const std::vector<std::uint64_t>& seeds, double truth) {
    SweepRow row;
    row.x_name = x_name;
    row.x_value = x_value;
    row.method = method;
    row.seeds = seeds;
    row.truth_p_e = truth;
    double mean = 0.0;
    for (const auto& e : ests) mean += e.p_e;
    mean /= double(ests.size());
    row.p_e = mean;
    if (ests.size() > 1) {
        double ss = 0.0;
        for (const auto& e : ests) ss += (e.p_e - mean) * (e.p_e - mean);
        row.std_error = std::sqrt(ss / double(ests.size() - 1) / double(ests.size()));
    } else {
        row.std_error = ests.front().std_error;
    }
    if (!std::isnan(truth)) row.deviation = row.p_e - truth;
    return row;
}

}  // namespace detail

// ---- decay scan (correlator vs delay) -------------------------------------

struct DecayPoint {
    double tau;
    double g1;
    double g1_err;
};

struct DecayScanResult {
    std::vector<DecayPoint> points;
    CorrelatorDecayFit fit{};
    double p_e_at_zero = 0.0;   // p_e_exact of the extrapolated tau=0 amplitude
    double p_e_at_zero_err = 0.0;
    std::vector<SweepRow> rows;
};

inline DecayScanResult exp_decay_scan(const SweepSpec& spec, unsigned workers = 1) {
    spec.validate();
    if (spec.variable != SweepVariable::tau)
        throw std::domain_error("exp_decay_scan: variable must be tau");
    DecayScanResult res;
    std::vector<std::pair<double, double>> fit_points;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        SimConfig cfg = spec.base_config;
        cfg.tau = spec.values[i];
        cfg.seed = point_seed(spec.base_config.seed, i, 0);
        auto runs = run_correlation_protocol(cfg, workers);
        auto cal = calibrate(runs.run1, runs.run2);
        auto pairs = qtherm::detail::normalized_pairs(runs.run1, cal);
        double g1 = correlator_g1_zero(pairs);
        double g1_err = g1_std_error(pairs);
        res.points.push_back({cfg.tau, g1, g1_err});
        fit_points.emplace_back(cfg.tau, g1);

        auto est = estimate_correlator(runs.run1, runs.run2, Method::correlator_exact);
        res.rows.push_back(detail::aggregate("tau", cfg.tau, Method::correlator_exact, {est},
                                             {cfg.seed}, cfg.qubit.p_e_equilibrium));
    }
    res.fit = fit_correlator_decay(fit_points);
    double amp0 = res.fit.amplitude + res.fit.offset;
    if (amp0 > -0.25) {
        res.p_e_at_zero = amp0 > 0 ? p_e_exact(amp0) : 0.0;
        double base = std::max(1.0 + 4.0 * std::max(amp0, 0.0), 1e-12);
        res.p_e_at_zero_err = res.fit.amp0_err * std::pow(base, -1.5);
    }
    return res;
}

// ---- temperature sweep ----------------------------------------------------

struct SweepResult {
    std::vector<SweepRow> rows;
    // per-power regression slopes for the precision-scaling experiment
    std::vector<std::pair<double, double>> slopes;  // (power_dbm, slope)
};

inline SweepResult exp_temperature_sweep(const SweepSpec& spec, unsigned workers = 1) {
    spec.validate();
    if (spec.variable != SweepVariable::temperature)
        throw std::domain_error("exp_temperature_sweep: variable must be temperature");
    if (!spec.hot_bath)
        throw std::domain_error("exp_temperature_sweep: hot_bath required");
    SweepResult res;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        double temperature = spec.values[i];
        BathModel cold = bath_rates_from_temperature(spec.base_config.qubit.t1,
                                                     spec.base_config.qubit.frequency,
                                                     temperature);
        auto ss = two_bath_steady_state({cold, *spec.hot_bath});
        SimConfig cfg = spec.base_config;
        cfg.qubit.p_e_equilibrium = ss.p_e;
        cfg.qubit.t1 = ss.t1_total;
        for (Method m : spec.methods) {
            std::vector<Estimate> ests;
            std::vector<std::uint64_t> seeds;
            for (std::uint64_t r = 0; r < spec.seeds_per_point; ++r) {
                cfg.seed = point_seed(spec.base_config.seed, i, r);
                seeds.push_back(cfg.seed);
                ests.push_back(detail::estimate_one(cfg, m, workers));
            }
            res.rows.push_back(
                detail::aggregate("temperature", temperature, m, ests, seeds, ss.p_e));
        }
    }
    return res;
}

// ---- precision scaling ----------------------------------------------------

inline SweepResult exp_precision_scaling(const SweepSpec& spec, unsigned workers = 1) {
    spec.validate();
    if (spec.variable != SweepVariable::n_shots)
        throw std::domain_error("exp_precision_scaling: variable must be n_shots");
    if (spec.seeds_per_point < 16)
        throw std::domain_error("exp_precision_scaling: seeds_per_point must be >= 16");

    std::vector<PowerPoint> settings = spec.power_map;
    if (settings.empty()) {
        settings.push_back({0.0, spec.base_config.apparatus.snr(),
                            spec.base_config.apparatus.qnd_flip_prob});
    }
    SweepResult res;
    for (std::size_t p = 0; p < settings.size(); ++p) {
        const auto& pw = settings[p];
        SimConfig base = spec.base_config;
        base.apparatus.noise_sigma =
            std::abs(base.apparatus.v_e - base.apparatus.v_g) / pw.snr;
        base.apparatus.qnd_flip_prob = pw.qnd_flip_prob;
        std::vector<double> log_n, log_std;
        for (std::size_t i = 0; i < spec.values.size(); ++i) {
            SimConfig cfg = base;
            cfg.n_shots = std::uint64_t(spec.values[i]);
            std::vector<Estimate> ests;
            std::vector<std::uint64_t> seeds;
            for (std::uint64_t r = 0; r < spec.seeds_per_point; ++r) {
                cfg.seed = point_seed(base.seed, (p << 32) + i, r);
                seeds.push_back(cfg.seed);
                auto runs = run_correlation_protocol(cfg, workers);
                auto est =
                    estimate_correlator(runs.run1, runs.run2, Method::correlator_exact);
                // Signed inversion: at small N the noise-dominated clamp
                // at zero would truncate the spread this experiment
                // measures, so negative g1 samples keep their sign here.
                if (est.diagnostics.noise_dominated && est.diagnostics.g1_0 > -0.25)
                    est.p_e = 0.5 - 0.5 / std::sqrt(1.0 + 4.0 * est.diagnostics.g1_0);
                ests.push_back(est);
            }
            auto row = detail::aggregate("n_shots", double(cfg.n_shots),
                                         Method::correlator_exact, ests, seeds,
                                         base.qubit.p_e_equilibrium);
            // For scaling, the interesting quantity is the spread across
            // seeds, not the error of the mean.
            double spread = row.std_error * std::sqrt(double(spec.seeds_per_point));
            row.std_error = spread;
            res.rows.push_back(row);
            log_n.push_back(std::log(double(cfg.n_shots)));
            log_std.push_back(std::log(std::max(spread, 1e-300)));
        }
        auto line = fit::linear_regression(log_n, log_std);
        res.slopes.emplace_back(pw.power_dbm, line.slope);
    }
    return res;
}

// ---- method comparison ----------------------------------------------------

inline SweepResult exp_method_comparison(const SweepSpec& spec, unsigned workers = 1) {
    if (spec.methods.size() < 2)
        throw std::domain_error("exp_method_comparison: need >= 2 methods");
    return exp_temperature_sweep(spec, workers);
}

// ---- frequency replay -----------------------------------------------------

inline SweepResult exp_frequency_replay(const SweepSpec& spec, unsigned workers = 1) {
    spec.validate();
    if (spec.variable != SweepVariable::frequency)
        throw std::domain_error("exp_frequency_replay: variable must be frequency");
    if (spec.frequency_profile.empty())
        throw std::domain_error("exp_frequency_replay: frequency_profile required");
    SweepResult res;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        double f = spec.values[i];
        const FrequencyPoint* prof = nullptr;
        for (const auto& fp : spec.frequency_profile)
            if (fp.frequency == f) prof = &fp;
        if (!prof)
            throw std::domain_error("exp_frequency_replay: no profile entry for frequency " +
                                    io::fmt_double(f));
        BathModel cold = bath_rates_from_temperature(spec.base_config.qubit.t1, f,
                                                     spec.fridge_temperature);
        BathModel hot{prof->gamma_up, prof->gamma_down};
        auto ss = two_bath_steady_state({cold, hot});
        SimConfig cfg = spec.base_config;
        cfg.qubit.frequency = f;
        cfg.qubit.p_e_equilibrium = ss.p_e;
        cfg.qubit.t1 = ss.t1_total;
        for (Method m : spec.methods) {
            std::vector<Estimate> ests;
            std::vector<std::uint64_t> seeds;
            for (std::uint64_t r = 0; r < spec.seeds_per_point; ++r) {
                cfg.seed = point_seed(spec.base_config.seed, i, r);
                seeds.push_back(cfg.seed);
                ests.push_back(detail::estimate_one(cfg, m, workers));
            }
            res.rows.push_back(detail::aggregate("frequency", f, m, ests, seeds, ss.p_e));
        }
    }
    return res;
}

// ---- serialization --------------------------------------------------------

inline constexpr const char* sweep_csv_header =
    "x_name,x_value,method,p_e,std_error,truth_p_e,deviation";

inline std::string sweep_rows_to_csv(std::span<const SweepRow> rows) {
    std::string out = sweep_csv_header;
    out += '\n';
    for (const auto& r : rows) {
        out += r.x_name;
        out += ',';
        out += io::fmt_double(r.x_value);
        out += ',';
        out += method_name(r.method);
        out += ',';
        out += io::fmt_double(r.p_e);
        out += ',';
        out += io::fmt_double(r.std_error);
        out += ',';
        out += std::isnan(r.truth_p_e) ? "" : io::fmt_double(r.truth_p_e);
        out += ',';
        out += std::isnan(r.deviation) ? "" : io::fmt_double(r.deviation);
        out += '\n';
    }
    return out;
}

inline io::json sweep_spec_to_json(const SweepSpec& spec) {
    io::json j;
    j["variable"] = sweep_variable_name(spec.variable);
    j["values"] = spec.values;
    j["base_config"] = io::to_json(spec.base_config);
    if (!spec.power_map.empty()) {
        io::json pm = io::json::array();
        for (const auto& p : spec.power_map)
            pm.push_back({{"power_dbm", p.power_dbm},
                          {"snr", p.snr},
                          {"qnd_flip_prob", p.qnd_flip_prob}});
        j["power_map"] = pm;
    }
    if (spec.hot_bath)
        j["hot_bath"] = {{"gamma_up_hz", spec.hot_bath->gamma_up},
                         {"gamma_down_hz", spec.hot_bath->gamma_down}};
    if (!spec.frequency_profile.empty()) {
        io::json fp = io::json::array();
        for (const auto& p : spec.frequency_profile)
            fp.push_back({{"frequency_hz", p.frequency},
                          {"gamma_up_hz", p.gamma_up},
                          {"gamma_down_hz", p.gamma_down}});
        j["frequency_profile"] = fp;
    }
    j["seeds_per_point"] = spec.seeds_per_point;
    io::json ms = io::json::array();
    for (Method m : spec.methods) ms.push_back(method_name(m));
    j["methods"] = ms;
    j["fridge_temperature_k"] = spec.fridge_temperature;
    return j;
}

inline SweepSpec sweep_spec_from_json(const io::json& j) {
    io::require_keys(j, "sweep spec", {"variable", "values", "base_config"},
                     {"power_map", "hot_bath", "frequency_profile", "seeds_per_point",
                      "methods", "fridge_temperature_k"});
    SweepSpec spec;
    std::string v = j.at("variable").get<std::string>();
    if (v == "tau") spec.variable = SweepVariable::tau;
    else if (v == "temperature") spec.variable = SweepVariable::temperature;
    else if (v == "n_shots") spec.variable = SweepVariable::n_shots;
    else if (v == "power") spec.variable = SweepVariable::power;
    else if (v == "frequency") spec.variable = SweepVariable::frequency;
    else throw io::ParseError("sweep spec: unknown variable '" + v + "'");
    spec.values = j.at("values").get<std::vector<double>>();
    spec.base_config = io::sim_config_from_json(j.at("base_config"));
    if (j.contains("power_map")) {
        for (const auto& p : j.at("power_map")) {
            io::require_keys(p, "power_map entry", {"power_dbm", "snr", "qnd_flip_prob"});
            spec.power_map.push_back({p.at("power_dbm").get<double>(), p.at("snr").get<double>(),
                                      p.at("qnd_flip_prob").get<double>()});
        }
    }
    if (j.contains("hot_bath")) {
        const auto& h = j.at("hot_bath");
        io::require_keys(h, "hot_bath", {"gamma_up_hz", "gamma_down_hz"});
        spec.hot_bath = BathModel{h.at("gamma_up_hz").get<double>(),
                                  h.at("gamma_down_hz").get<double>()};
    }
    if (j.contains("frequency_profile")) {
        for (const auto& p : j.at("frequency_profile")) {
            io::require_keys(p, "frequency_profile entry",
                             {"frequency_hz", "gamma_up_hz", "gamma_down_hz"});
            spec.frequency_profile.push_back({p.at("frequency_hz").get<double>(),
                                              p.at("gamma_up_hz").get<double>(),
                                              p.at("gamma_down_hz").get<double>()});
        }
    }
    if (j.contains("seeds_per_point"))
        spec.seeds_per_point = j.at("seeds_per_point").get<std::uint64_t>();
    if (j.contains("methods")) {
        spec.methods.clear();
        for (const auto& m : j.at("methods"))
            spec.methods.push_back(method_from_name(m.get<std::string>()));
        if (spec.methods.empty()) throw io::ParseError("sweep spec: methods must be non-empty");
    }
    if (j.contains("fridge_temperature_k"))
        spec.fridge_temperature = j.at("fridge_temperature_k").get<double>();
    spec.validate();
    return spec;
}

/// Dispatch on the sweep variable; used by the CLI.
inline SweepResult run_sweep(const SweepSpec& spec, unsigned workers = 1) {
    switch (spec.variable) {
        case SweepVariable::tau: {
            auto scan = exp_decay_scan(spec, workers);
            SweepResult res;
            res.rows = std::move(scan.rows);
            return res;
        }
        case SweepVariable::temperature:
            return exp_temperature_sweep(spec, workers);
        case SweepVariable::n_shots:
            return exp_precision_scaling(spec, workers);
        case SweepVariable::power: {
            // A power sweep is a scaling sweep over the declared power map
            // at fixed N; emit one row per power point.
            SweepResult res;
            for (std::size_t i = 0; i < spec.values.size(); ++i) {
                const PowerPoint* pw = nullptr;
                for (const auto& p : spec.power_map)
                    if (p.power_dbm == spec.values[i]) pw = &p;
                if (!pw)
                    throw std::domain_error("power sweep: no power_map entry for " +
                                            io::fmt_double(spec.values[i]));
                SimConfig cfg = spec.base_config;
                cfg.apparatus.noise_sigma =
                    std::abs(cfg.apparatus.v_e - cfg.apparatus.v_g) / pw->snr;
                cfg.apparatus.qnd_flip_prob = pw->qnd_flip_prob;
                for (Method m : spec.methods) {
                    std::vector<Estimate> ests;
                    std::vector<std::uint64_t> seeds;
                    for (std::uint64_t r = 0; r < spec.seeds_per_point; ++r) {
                        cfg.seed = point_seed(spec.base_config.seed, i, r);
                        seeds.push_back(cfg.seed);
                        ests.push_back(detail::estimate_one(cfg, m, workers));
                    }
                    res.rows.push_back(detail::aggregate("power", spec.values[i], m, ests,
                                                         seeds,
                                                         cfg.qubit.p_e_equilibrium));
                }
            }
            return res;
        }
        case SweepVariable::frequency:
            return exp_frequency_replay(spec, workers);
    }
    throw std::logic_error("run_sweep: unreachable");
}

}  // namespace qtherm::harness
