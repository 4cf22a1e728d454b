#pragma once

// File formats: record CSV + JSON config sidecar, sweep CSV, manifests.
// All floating-point output uses 17 significant digits so files
// round-trip exactly.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "estimate.hpp"
#include "sim.hpp"

namespace qtherm::io {

using json = nlohmann::ordered_json;

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// FNV-1a, used for config digests and determinism checks.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_keys(const json& j, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    for (const char* k : required)
        if (!j.contains(k)) throw ParseError(where + ": missing required field '" + k + "'");
    for (auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* k : required) known |= key == k;
        for (const char* k : optional) known |= key == k;
        if (!known) throw ParseError(where + ": unknown field '" + key + "'");
    }
}

// ---- SimConfig <-> JSON ---------------------------------------------------

inline json to_json(const SimConfig& cfg) {
    json j;
    j["qubit"] = {{"frequency_hz", cfg.qubit.frequency},
                  {"t1_s", cfg.qubit.t1},
                  {"p_e_equilibrium", cfg.qubit.p_e_equilibrium},
                  {"anharmonicity_hz", cfg.qubit.anharmonicity}};
    j["apparatus"] = {{"v_g", {cfg.apparatus.v_g.real(), cfg.apparatus.v_g.imag()}},
                      {"v_e", {cfg.apparatus.v_e.real(), cfg.apparatus.v_e.imag()}},
                      {"noise_sigma", cfg.apparatus.noise_sigma},
                      {"t_meas_s", cfg.apparatus.t_meas},
                      {"readout_excitation_prob", cfg.apparatus.readout_excitation_prob},
                      {"qnd_flip_prob", cfg.apparatus.qnd_flip_prob}};
    j["pulses"] = {{"pi_ge_error", cfg.pulses.pi_ge_error},
                   {"pi_ef_error", cfg.pulses.pi_ef_error},
                   {"ef_leakage_prob", cfg.pulses.ef_leakage_prob}};
    j["n_shots"] = cfg.n_shots;
    j["tau_s"] = cfg.tau;
    j["seed"] = cfg.seed;
    j["protocol"] = cfg.protocol == Protocol::correlation ? "correlation" : "qutrit";
    if (cfg.protocol == Protocol::qutrit) j["rabi_angles_rad"] = cfg.rabi_angles;
    return j;
}

inline complexd complex_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ParseError(where + ": expected [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline SimConfig sim_config_from_json(const json& j) {
    require_keys(j, "config", {"qubit", "apparatus", "n_shots"},
                 {"pulses", "tau_s", "seed", "protocol", "rabi_angles_rad"});
    SimConfig cfg;
    const json& q = j.at("qubit");
    require_keys(q, "config.qubit", {"frequency_hz", "t1_s", "p_e_equilibrium"},
                 {"anharmonicity_hz"});
    cfg.qubit.frequency = q.at("frequency_hz").get<double>();
    cfg.qubit.t1 = q.at("t1_s").get<double>();
    cfg.qubit.p_e_equilibrium = q.at("p_e_equilibrium").get<double>();
    if (q.contains("anharmonicity_hz")) cfg.qubit.anharmonicity = q.at("anharmonicity_hz").get<double>();

    const json& a = j.at("apparatus");
    require_keys(a, "config.apparatus", {"v_g", "v_e", "noise_sigma"},
                 {"t_meas_s", "readout_excitation_prob", "qnd_flip_prob"});
    cfg.apparatus.v_g = complex_from_json(a.at("v_g"), "config.apparatus.v_g");
    cfg.apparatus.v_e = complex_from_json(a.at("v_e"), "config.apparatus.v_e");
    cfg.apparatus.noise_sigma = a.at("noise_sigma").get<double>();
    if (a.contains("t_meas_s")) cfg.apparatus.t_meas = a.at("t_meas_s").get<double>();
    if (a.contains("readout_excitation_prob"))
        cfg.apparatus.readout_excitation_prob = a.at("readout_excitation_prob").get<double>();
    if (a.contains("qnd_flip_prob")) cfg.apparatus.qnd_flip_prob = a.at("qnd_flip_prob").get<double>();

    if (j.contains("pulses")) {
        const json& p = j.at("pulses");
        require_keys(p, "config.pulses", {}, {"pi_ge_error", "pi_ef_error", "ef_leakage_prob"});
        if (p.contains("pi_ge_error")) cfg.pulses.pi_ge_error = p.at("pi_ge_error").get<double>();
        if (p.contains("pi_ef_error")) cfg.pulses.pi_ef_error = p.at("pi_ef_error").get<double>();
        if (p.contains("ef_leakage_prob"))
            cfg.pulses.ef_leakage_prob = p.at("ef_leakage_prob").get<double>();
    }
    cfg.n_shots = j.at("n_shots").get<std::uint64_t>();
    if (j.contains("tau_s")) cfg.tau = j.at("tau_s").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("protocol")) {
        std::string p = j.at("protocol").get<std::string>();
        if (p == "correlation") cfg.protocol = Protocol::correlation;
        else if (p == "qutrit") cfg.protocol = Protocol::qutrit;
        else throw ParseError("config.protocol: must be 'correlation' or 'qutrit'");
    }
    if (j.contains("rabi_angles_rad"))
        cfg.rabi_angles = j.at("rabi_angles_rad").get<std::vector<double>>();
    cfg.validate();
    return cfg;
}

// ---- Record CSV -----------------------------------------------------------

inline constexpr const char* record_csv_header =
    "shot_index,prep,rabi_angle_rad,with_ge_pi,tau_s,v1_re,v1_im,v2_re,v2_im";

inline std::string prep_tag_name(PrepTag t) {
    switch (t) {
        case PrepTag::none: return "none";
        case PrepTag::pi_ge: return "pi_ge";
        case PrepTag::pi_ef_rabi: return "pi_ef_rabi";
    }
    return "none";
}

inline void append_record_csv(std::string& out, const ShotRecord& r) {
    out += std::to_string(r.shot_index);
    out += ',';
    out += prep_tag_name(r.prep.tag);
    out += ',';
    if (r.prep.tag == PrepTag::pi_ef_rabi) {
        out += fmt_double(r.prep.rabi_angle);
        out += ',';
        out += r.prep.with_ge_pi ? "1" : "0";
    } else {
        out += ',';
    }
    out += ',';
    out += fmt_double(r.tau);
    out += ',';
    out += fmt_double(r.v1.real());
    out += ',';
    out += fmt_double(r.v1.imag());
    out += ',';
    if (r.v2) {
        out += fmt_double(r.v2->real());
        out += ',';
        out += fmt_double(r.v2->imag());
    } else {
        out += ',';
    }
    out += '\n';
}

inline std::string records_to_csv(std::span<const ShotRecord> records) {
    std::string out = record_csv_header;
    out += '\n';
    for (const auto& r : records) append_record_csv(out, r);
    return out;
}

inline std::string dataset_to_csv(const Dataset& ds) {
    std::string out = record_csv_header;
    out += '\n';
    for (const auto& r : ds.run1) append_record_csv(out, r);
    for (const auto& r : ds.run2) append_record_csv(out, r);
    for (const auto& r : ds.qutrit) append_record_csv(out, r);
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else cur += c;
    }
    out.push_back(cur);
    return out;
}

inline std::vector<ShotRecord> records_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("record CSV: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != record_csv_header)
        throw ParseError("record CSV row 1: bad header, expected '" +
                         std::string(record_csv_header) + "'");
    std::vector<ShotRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 9)
            throw ParseError("record CSV row " + std::to_string(row) + ": expected 9 fields");
        try {
            ShotRecord r;
            r.shot_index = std::stoull(f[0]);
            if (f[1] == "none") r.prep.tag = PrepTag::none;
            else if (f[1] == "pi_ge") r.prep.tag = PrepTag::pi_ge;
            else if (f[1] == "pi_ef_rabi") r.prep.tag = PrepTag::pi_ef_rabi;
            else throw ParseError("bad prep tag '" + f[1] + "'");
            if (r.prep.tag == PrepTag::pi_ef_rabi) {
                if (f[2].empty() || f[3].empty())
                    throw ParseError("pi_ef_rabi rows need rabi_angle_rad and with_ge_pi");
                r.prep.rabi_angle = std::stod(f[2]);
                r.prep.with_ge_pi = f[3] == "1";
            } else if (!f[2].empty() || !f[3].empty()) {
                throw ParseError("rabi fields must be empty unless prep is pi_ef_rabi");
            }
            r.tau = std::stod(f[4]);
            r.v1 = {std::stod(f[5]), std::stod(f[6])};
            if (!f[7].empty() || !f[8].empty()) {
                if (f[7].empty() || f[8].empty())
                    throw ParseError("v2 must have both quadratures or neither");
                r.v2 = complexd{std::stod(f[7]), std::stod(f[8])};
            }
            if (r.prep.tag == PrepTag::none && !r.v2)
                throw ParseError("prep 'none' rows are Run I pairs and need v2");
            if (r.prep.tag != PrepTag::none && r.v2)
                throw ParseError("v2 present on a single-measurement prep");
            out.push_back(std::move(r));
        } catch (const ParseError& e) {
            throw ParseError("record CSV row " + std::to_string(row) + ": " + e.what());
        } catch (const std::exception& e) {
            throw ParseError("record CSV row " + std::to_string(row) + ": bad numeric field (" +
                             e.what() + ")");
        }
    }
    return out;
}

// ---- Estimate JSON --------------------------------------------------------

inline json estimate_to_json(const Estimate& est) {
    json j;
    j["method"] = method_name(est.method);
    j["p_e"] = est.p_e;
    j["std_error"] = est.std_error;
    j["n_shots"] = est.n_shots;
    j["diagnostics"] = {{"g0", est.diagnostics.g0},
                        {"g0_pi", est.diagnostics.g0_pi},
                        {"g1_0", est.diagnostics.g1_0},
                        {"g1_inf", est.diagnostics.g1_inf},
                        {"snr_hat", est.diagnostics.snr_hat},
                        {"t1_correction_applied", est.diagnostics.t1_correction_applied},
                        {"noise_dominated", est.diagnostics.noise_dominated}};
    return j;
}

// ---- files ----------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::ios_base::failure("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace qtherm::io
