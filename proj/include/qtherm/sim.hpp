#pragma once

// Synthetic shot generation for the two-run correlation protocol
// (Run I: measure-delay-measure, Run II: pi-pulse-measure) and for the
// qutrit Rabi protocol, under a configurable imperfection model.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace qtherm {

enum class State : std::uint8_t { g = 0, e = 1, f = 2 };

enum class PrepTag : std::uint8_t { none = 0, pi_ge = 1, pi_ef_rabi = 2 };

struct Prep {
    PrepTag tag = PrepTag::none;
    double rabi_angle = 0.0;   // radians, pi_ef_rabi only
    bool with_ge_pi = false;   // pi_ef_rabi only
};

struct ShotRecord {
    std::uint64_t shot_index = 0;
    Prep prep;
    complexd v1{};
    std::optional<complexd> v2;  // present only for Run I pairs
    double tau = 0.0;
    std::vector<State> truth;    // diagnostic only; never feeds an estimator
};

enum class Protocol : std::uint8_t { correlation = 0, qutrit = 1 };

struct SimConfig {
    QubitModel qubit;
    ApparatusModel apparatus;
    PulseModel pulses;
    std::uint64_t n_shots = 1;
    double tau = 0.0;
    std::uint64_t seed = 0;
    Protocol protocol = Protocol::correlation;
    std::vector<double> rabi_angles;  // qutrit protocol only
    bool collect_truth = false;

    void validate() const {
        qubit.validate();
        apparatus.validate();
        pulses.validate();
        if (n_shots < 1) throw std::domain_error("SimConfig: n_shots must be >= 1");
        if (tau < 0) throw std::domain_error("SimConfig: tau must be >= 0");
        if (protocol == Protocol::qutrit && rabi_angles.empty())
            throw std::domain_error("SimConfig: qutrit protocol needs rabi_angles");
    }
};

namespace stage {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t pi_ge = 2;
inline constexpr std::uint64_t meas1 = 3;
inline constexpr std::uint64_t delay = 4;
inline constexpr std::uint64_t meas2 = 5;
inline constexpr std::uint64_t ef_pulse = 6;
}  // namespace stage

inline State sample_initial_state(double p_e, rng::Stream& rs) {
    if (p_e < 0 || p_e > 1) throw std::domain_error("sample_initial_state: p_e must be in [0,1]");
    return rs.bernoulli(p_e) ? State::e : State::g;
}

/// Swap g <-> e with probability 1 - pi_ge_error.
inline State apply_pi_ge(State s, const PulseModel& pulses, rng::Stream& rs) {
    if (s == State::f || rs.bernoulli(pulses.pi_ge_error)) return s;
    return s == State::g ? State::e : State::g;
}

struct MeasureResult {
    complexd voltage;
    State post_state;
};

/// Dispersive readout: voltage is the state response plus complex
/// Gaussian noise (noise_sigma per quadrature). Post-state models QND
/// imperfections: randomization with qnd_flip_prob, spurious g -> e
/// excitation, then T1 decay over t_meas applied once after the voltage
/// is sampled.
inline MeasureResult measure(State s, const ApparatusModel& app, const QubitModel& qubit,
                             rng::Stream& rs) {
    complexd response;
    switch (s) {
        case State::g: response = app.v_g; break;
        case State::e: response = app.v_e; break;
        // Third response point for the qutrit protocol: the e response
        // displaced perpendicular to the g-e line.
        case State::f: response = app.v_e + complexd(0, 1) * (app.v_e - app.v_g); break;
    }
    complexd noise{0.0, 0.0};
    if (app.noise_sigma > 0)
        noise = app.noise_sigma * complexd(rs.normal(), rs.normal());

    State post = s;
    if (post != State::f) {
        if (app.qnd_flip_prob > 0 && rs.bernoulli(app.qnd_flip_prob))
            post = rs.bernoulli(0.5) ? State::e : State::g;
        if (post == State::g && app.readout_excitation_prob > 0 &&
            rs.bernoulli(app.readout_excitation_prob))
            post = State::e;
        if (post == State::e && app.t_meas > 0) {
            double stay = relax_probabilities(1.0, app.t_meas, qubit.p_e_equilibrium, qubit.t1);
            if (!rs.bernoulli(stay)) post = State::g;
        }
    }
    return {response + noise, post};
}

/// Free evolution for tau with the exact two-level Markov propagator;
/// transition probabilities come from relax_probabilities, no time stepping.
inline State evolve_delay(State s, double tau, const QubitModel& qubit, rng::Stream& rs) {
    if (tau < 0) throw std::domain_error("evolve_delay: tau must be >= 0");
    if (s == State::f) return s;
    double p_start = (s == State::e) ? 1.0 : 0.0;
    double p_e = relax_probabilities(p_start, tau, qubit.p_e_equilibrium, qubit.t1);
    return rs.bernoulli(p_e) ? State::e : State::g;
}

namespace detail {

template <typename Fn>
void parallel_for(std::uint64_t n, unsigned workers, Fn&& fn) {
    if (workers <= 1 || n < 2) {
        for (std::uint64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::uint64_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::uint64_t lo = w * chunk;
        std::uint64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::uint64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline ShotRecord correlation_shot_run1(const SimConfig& cfg, std::uint64_t shot) {
    rng::Stream init(cfg.seed, shot, stage::init);
    rng::Stream m1(cfg.seed, shot, stage::meas1);
    rng::Stream dl(cfg.seed, shot, stage::delay);
    rng::Stream m2(cfg.seed, shot, stage::meas2);

    ShotRecord rec;
    rec.shot_index = shot;
    rec.prep = {PrepTag::none, 0.0, false};
    rec.tau = cfg.tau;

    State s = sample_initial_state(cfg.qubit.p_e_equilibrium, init);
    if (cfg.collect_truth) rec.truth.push_back(s);
    auto r1 = measure(s, cfg.apparatus, cfg.qubit, m1);
    rec.v1 = r1.voltage;
    s = evolve_delay(r1.post_state, cfg.tau, cfg.qubit, dl);
    if (cfg.collect_truth) rec.truth.push_back(s);
    auto r2 = measure(s, cfg.apparatus, cfg.qubit, m2);
    rec.v2 = r2.voltage;
    return rec;
}

inline ShotRecord correlation_shot_run2(const SimConfig& cfg, std::uint64_t shot) {
    rng::Stream init(cfg.seed, shot, stage::init);
    rng::Stream pulse(cfg.seed, shot, stage::pi_ge);
    rng::Stream m1(cfg.seed, shot, stage::meas1);

    ShotRecord rec;
    rec.shot_index = shot;
    rec.prep = {PrepTag::pi_ge, 0.0, false};
    rec.tau = 0.0;

    State s = sample_initial_state(cfg.qubit.p_e_equilibrium, init);
    s = apply_pi_ge(s, cfg.pulses, pulse);
    if (cfg.collect_truth) rec.truth.push_back(s);
    rec.v1 = measure(s, cfg.apparatus, cfg.qubit, m1).voltage;
    return rec;
}

inline ShotRecord qutrit_shot(const SimConfig& cfg, std::uint64_t shot, double angle,
                              bool with_ge_pi) {
    rng::Stream init(cfg.seed, shot, stage::init);
    rng::Stream pulse(cfg.seed, shot, stage::pi_ge);
    rng::Stream ef(cfg.seed, shot, stage::ef_pulse);
    rng::Stream m1(cfg.seed, shot, stage::meas1);

    ShotRecord rec;
    rec.shot_index = shot;
    rec.prep = {PrepTag::pi_ef_rabi, angle, with_ge_pi};
    rec.tau = 0.0;

    State s = sample_initial_state(cfg.qubit.p_e_equilibrium, init);
    if (with_ge_pi) s = apply_pi_ge(s, cfg.pulses, pulse);

    // The e-f drive couples weakly to the g-e transition: any g
    // population leaks to e before the rotation and oscillates with it.
    if (s == State::g && cfg.pulses.ef_leakage_prob > 0 &&
        ef.bernoulli(cfg.pulses.ef_leakage_prob))
        s = State::e;
    if ((s == State::e || s == State::f) && !ef.bernoulli(cfg.pulses.pi_ef_error)) {
        double half = std::sin(angle / 2.0);
        if (ef.bernoulli(half * half)) s = (s == State::e) ? State::f : State::e;
    }
    if (cfg.collect_truth) rec.truth.push_back(s);
    rec.v1 = measure(s, cfg.apparatus, cfg.qubit, m1).voltage;
    return rec;
}

}  // namespace detail

struct Dataset {
    SimConfig config;
    std::vector<ShotRecord> run1;     // correlation pairs (prep none, v1+v2)
    std::vector<ShotRecord> run2;     // pi-pulse calibration shots
    std::vector<ShotRecord> qutrit;   // Rabi shots (qutrit protocol)
};

struct CorrelationRuns {
    std::vector<ShotRecord> run1;
    std::vector<ShotRecord> run2;
};

inline CorrelationRuns run_correlation_protocol(const SimConfig& cfg, unsigned workers = 1) {
    cfg.validate();
    CorrelationRuns out;
    out.run1.resize(cfg.n_shots);
    out.run2.resize(cfg.n_shots);
    detail::parallel_for(cfg.n_shots, workers, [&](std::uint64_t i) {
        out.run1[i] = detail::correlation_shot_run1(cfg, i);
    });
    // Run II shots draw from disjoint substreams via the index offset.
    detail::parallel_for(cfg.n_shots, workers, [&](std::uint64_t i) {
        out.run2[i] = detail::correlation_shot_run2(cfg, cfg.n_shots + i);
        out.run2[i].shot_index = cfg.n_shots + i;
    });
    return out;
}

inline std::vector<ShotRecord> run_qutrit_protocol(const SimConfig& cfg,
                                                   std::span<const double> rabi_angles,
                                                   unsigned workers = 1) {
    cfg.validate();
    if (rabi_angles.empty())
        throw std::domain_error("run_qutrit_protocol: empty angle list");
    std::uint64_t per = cfg.n_shots;
    std::uint64_t total = rabi_angles.size() * 2 * per;
    std::vector<ShotRecord> out(total);
    detail::parallel_for(total, workers, [&](std::uint64_t i) {
        std::uint64_t a = i / (2 * per);
        bool with_pi = ((i / per) % 2) == 1;
        out[i] = detail::qutrit_shot(cfg, i, rabi_angles[a], with_pi);
    });
    return out;
}

/// Deterministic dataset generation: output is a pure function of
/// (config, seed), bit-identical under any worker count.
inline Dataset generate_dataset(const SimConfig& cfg, unsigned workers = 1) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    if (cfg.protocol == Protocol::correlation) {
        auto runs = run_correlation_protocol(cfg, workers);
        ds.run1 = std::move(runs.run1);
        ds.run2 = std::move(runs.run2);
    } else {
        ds.qutrit = run_qutrit_protocol(cfg, cfg.rabi_angles, workers);
    }
    return ds;
}

}  // namespace qtherm
