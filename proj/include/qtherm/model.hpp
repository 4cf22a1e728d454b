#pragma once

// Physical formulas and parameter containers: thermal populations,
// effective temperature, bath models, relaxation propagators.

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace qtherm {

using complexd = std::complex<double>;

// CODATA 2018 (exact SI definitions).
namespace constants {
inline constexpr double planck = 6.62607015e-34;      // J*s
inline constexpr double boltzmann_k = 1.380649e-23;   // J/K
}  // namespace constants

struct QubitModel {
    double frequency = 5e9;        // g-e transition, Hz
    double t1 = 10e-6;             // s
    double p_e_equilibrium = 0.0;  // in [0, 0.5)
    double anharmonicity = -300e6; // e-f minus g-e frequency, Hz

    void validate() const {
        if (!(t1 > 0)) throw std::domain_error("QubitModel: t1 must be > 0");
        if (!(frequency > 0)) throw std::domain_error("QubitModel: frequency must be > 0");
        if (!(p_e_equilibrium >= 0 && p_e_equilibrium < 0.5))
            throw std::domain_error("QubitModel: p_e_equilibrium must be in [0, 0.5)");
    }
};

struct BathModel {
    double gamma_up = 0.0;    // excitation rate, Hz
    double gamma_down = 0.0;  // relaxation rate, Hz
};

struct ApparatusModel {
    complexd v_g{1.0, 0.0};
    complexd v_e{-1.0, 0.0};
    double noise_sigma = 0.0;             // per-quadrature std of eta
    double t_meas = 0.0;                  // readout duration, s
    double readout_excitation_prob = 0.0; // per measurement
    double qnd_flip_prob = 0.0;           // state randomization per measurement

    double snr() const {
        if (noise_sigma <= 0) return std::numeric_limits<double>::infinity();
        return std::abs(v_e - v_g) / noise_sigma;
    }

    void validate() const {
        if (v_g == v_e) throw std::domain_error("ApparatusModel: v_g and v_e must differ");
        if (noise_sigma < 0) throw std::domain_error("ApparatusModel: noise_sigma must be >= 0");
        if (readout_excitation_prob < 0 || readout_excitation_prob >= 1)
            throw std::domain_error("ApparatusModel: readout_excitation_prob must be in [0,1)");
        if (qnd_flip_prob < 0 || qnd_flip_prob >= 1)
            throw std::domain_error("ApparatusModel: qnd_flip_prob must be in [0,1)");
        if (t_meas < 0) throw std::domain_error("ApparatusModel: t_meas must be >= 0");
    }
};

struct PulseModel {
    double pi_ge_error = 0.0;     // probability the g-e pi-pulse fails to swap
    double pi_ef_error = 0.0;
    double ef_leakage_prob = 0.0; // probability an e-f pulse excites g -> e

    void validate() const {
        for (double p : {pi_ge_error, pi_ef_error, ef_leakage_prob})
            if (p < 0 || p >= 1)
                throw std::domain_error("PulseModel: pulse error probabilities must be in [0,1)");
    }
};

/// Equilibrium excited-state fraction of a two-level system,
/// P_e = exp(-hf/kT) / (1 + exp(-hf/kT)).
inline double boltzmann_population(double frequency, double temperature) {
    if (!(frequency > 0)) throw std::domain_error("boltzmann_population: frequency must be > 0");
    if (!(temperature > 0)) throw std::domain_error("boltzmann_population: temperature must be > 0");
    double x = constants::planck * frequency / (constants::boltzmann_k * temperature);
    double b = std::exp(-x);
    return b / (1.0 + b);
}

/// Temperature whose equilibrium population equals p_e at the given
/// frequency; exact inverse of boltzmann_population.
inline double effective_temperature(double p_e, double frequency) {
    if (!(frequency > 0)) throw std::domain_error("effective_temperature: frequency must be > 0");
    if (!(p_e > 0 && p_e < 0.5))
        throw std::domain_error("effective_temperature: p_e must be in (0, 0.5)");
    return constants::planck * frequency /
           (constants::boltzmann_k * std::log((1.0 - p_e) / p_e));
}

struct SteadyState {
    double p_e;
    double t1_total;
};

/// Markov rate addition for a two-level system coupled to several baths:
/// p_e = sum(gamma_up) / Gamma, T1 = 1/Gamma.
inline SteadyState two_bath_steady_state(std::span<const BathModel> baths) {
    double up = 0.0, total = 0.0;
    for (const auto& b : baths) {
        if (b.gamma_up < 0 || b.gamma_down < 0)
            throw std::domain_error("two_bath_steady_state: negative rate");
        up += b.gamma_up;
        total += b.gamma_up + b.gamma_down;
    }
    if (!(total > 0)) throw std::domain_error("two_bath_steady_state: zero total rate");
    return {up / total, 1.0 / total};
}

inline SteadyState two_bath_steady_state(std::initializer_list<BathModel> baths) {
    return two_bath_steady_state(std::span<const BathModel>(baths.begin(), baths.size()));
}

/// Detailed-balance closure: rates summing to 1/t1 with
/// gamma_up/gamma_down = exp(-hf/kT), so the single-bath steady state
/// reproduces boltzmann_population(frequency, temperature).
inline BathModel bath_rates_from_temperature(double t1, double frequency, double temperature) {
    if (!(t1 > 0)) throw std::domain_error("bath_rates_from_temperature: t1 must be > 0");
    double p = boltzmann_population(frequency, temperature);
    double gamma = 1.0 / t1;
    return {gamma * p, gamma * (1.0 - p)};
}

/// Excited-state probability after free evolution for tau:
/// p(tau) = p_eq + (p_start - p_eq) * exp(-tau/t1).
inline double relax_probabilities(double p_start, double tau, double p_eq, double t1) {
    if (tau < 0) throw std::domain_error("relax_probabilities: tau must be >= 0");
    return p_eq + (p_start - p_eq) * std::exp(-tau / t1);
}

}  // namespace qtherm
