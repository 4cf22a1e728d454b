#pragma once

// Estimators turning shot records into excited-state population values:
// correlator (exact, approximate, general un-normalized), direct
// counting, and the qutrit Rabi-amplitude method, plus calibration and
// bias corrections.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fit.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sim.hpp"

namespace qtherm {

enum class Method : std::uint8_t {
    correlator_approx,
    correlator_exact,
    correlator_general,
    direct_count,
    qutrit,
};

inline std::string method_name(Method m) {
    switch (m) {
        case Method::correlator_approx: return "correlator_approx";
        case Method::correlator_exact: return "correlator_exact";
        case Method::correlator_general: return "correlator_general";
        case Method::direct_count: return "direct_count";
        case Method::qutrit: return "qutrit";
    }
    return "unknown";
}

inline Method method_from_name(const std::string& s) {
    static const std::map<std::string, Method> table = {
        {"correlator_approx", Method::correlator_approx},
        {"correlator_exact", Method::correlator_exact},
        {"correlator_general", Method::correlator_general},
        {"direct_count", Method::direct_count},
        {"qutrit", Method::qutrit},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown method: " + s);
    return it->second;
}

struct Diagnostics {
    double g0 = 0.0;
    double g0_pi = 0.0;
    double g1_0 = 0.0;
    double g1_inf = 0.0;
    double snr_hat = 0.0;
    bool t1_correction_applied = false;
    bool noise_dominated = false;
};

struct Estimate {
    double p_e = 0.0;
    double std_error = 0.0;
    Method method = Method::correlator_exact;
    std::uint64_t n_shots = 0;
    Diagnostics diagnostics;
};

struct CalibrationResult {
    complexd v_g_hat{};   // mean no-pulse response
    complexd v_e_hat{};   // mean pi-pulse response
    std::uint64_t n_cal = 0;
    double snr_hat = 0.0; // |v_e_hat - v_g_hat| / pooled axis noise
};

/// Complex means of the no-pulse and pi-pulse calibration sets, plus a
/// pooled noise estimate along the g-e axis.
inline CalibrationResult calibrate(std::span<const ShotRecord> ground_records,
                                   std::span<const ShotRecord> pi_records) {
    if (ground_records.empty() || pi_records.empty())
        throw std::invalid_argument("calibrate: empty record collection");
    complexd sg{}, se{};
    for (const auto& r : ground_records) sg += r.v1;
    for (const auto& r : pi_records) se += r.v1;
    CalibrationResult cal;
    cal.v_g_hat = sg / double(ground_records.size());
    cal.v_e_hat = se / double(pi_records.size());
    cal.n_cal = ground_records.size() + pi_records.size();
    complexd d = cal.v_e_hat - cal.v_g_hat;
    double sep = std::abs(d);
    if (sep == 0.0) throw std::runtime_error("calibrate: degenerate calibration (v_g_hat == v_e_hat)");
    complexd axis = d / sep;
    // Pooled variance of the axis projection around each set's mean.
    double ss = 0.0;
    for (const auto& r : ground_records) {
        double p = std::real((r.v1 - cal.v_g_hat) * std::conj(axis));
        ss += p * p;
    }
    for (const auto& r : pi_records) {
        double p = std::real((r.v1 - cal.v_e_hat) * std::conj(axis));
        ss += p * p;
    }
    double sigma = std::sqrt(ss / double(cal.n_cal));
    cal.snr_hat = sigma > 0 ? sep / sigma : std::numeric_limits<double>::infinity();
    return cal;
}

/// Normalized voltage: Re[(v - Vg~)/(Ve~ - Vg~)]. Maps Vg~ to 0, Ve~ to 1
/// and projects away the component perpendicular to the g-e line.
inline double normalize(complexd v, const CalibrationResult& cal) {
    complexd d = cal.v_e_hat - cal.v_g_hat;
    if (d == complexd{}) throw std::runtime_error("normalize: degenerate calibration");
    return std::real((v - cal.v_g_hat) / d);
}

/// Mean of the products v1*v2: the g1(0) estimator. Independent noise on
/// the two measurements averages out in expectation.
inline double correlator_g1_zero(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("correlator_g1_zero: empty input");
    double s = 0.0;
    for (const auto& [a, b] : pairs) s += a * b;
    return s / double(pairs.size());
}

/// Exact inversion of the normalized correlator:
/// P_e = 1/2 - 1/(2*sqrt(1 + 4*g1_0)).
inline double p_e_exact(double g1_0) {
    if (g1_0 <= -0.25)
        throw std::domain_error("p_e_exact: g1_0 <= -1/4 (noise-dominated sample)");
    return 0.5 - 0.5 / std::sqrt(1.0 + 4.0 * g1_0);
}

/// Small-population approximation P_e ~= g1_0, clamped below at zero.
/// Overestimates by a factor (1-P)/(1-2P)^2 relative to truth.
inline double p_e_approx(double g1_0) {
    return std::max(0.0, g1_0);
}

/// Un-normalized estimator on raw real projections:
/// P_e ~= (g1_0 - g0^2) / (g0 + g0_pi - 2*sqrt(g1_0))^2.
inline double p_e_general(double g1_0, double g0, double g0_pi) {
    if (g1_0 < 0)
        throw std::domain_error("p_e_general: negative g1_0 (noise-dominated sample)");
    double denom = g0 + g0_pi - 2.0 * std::sqrt(g1_0);
    double scale = std::max({g0 * g0, g0_pi * g0_pi, g1_0, 1e-300});
    if (denom * denom < 1e-9 * scale)
        throw std::runtime_error("p_e_general: degenerate responses (vanishing denominator)");
    return (g1_0 - g0 * g0) / (denom * denom);
}

/// Undo the T1 decay during readout: multiply by exp(+t_meas/t1).
/// A relative correction; it never creates a population floor.
inline double t1_correction(double p_e_raw, double t_meas, double t1) {
    if (!(t1 > 0)) throw std::domain_error("t1_correction: t1 must be > 0");
    if (t_meas < 0) throw std::domain_error("t1_correction: t_meas must be >= 0");
    return p_e_raw * std::exp(t_meas / t1);
}

namespace detail {

inline std::vector<std::pair<double, double>> normalized_pairs(
    std::span<const ShotRecord> run1, const CalibrationResult& cal) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(run1.size());
    for (const auto& r : run1) {
        if (!r.v2) throw std::invalid_argument("correlator estimate: record lacks v2");
        pairs.emplace_back(normalize(r.v1, cal), normalize(*r.v2, cal));
    }
    return pairs;
}

// Delta-method std error of p_e_exact(g1): dP/dg = (1+4g)^(-3/2).
inline double propagate_exact(double g1, double g1_std) {
    double base = std::max(1.0 + 4.0 * std::max(g1, 0.0), 1e-12);
    return g1_std * std::pow(base, -1.5);
}

}  // namespace detail

/// Analytic standard error of the mean product: std(v1*v2)/sqrt(N).
inline double g1_std_error(std::span<const std::pair<double, double>> pairs) {
    std::size_t n = pairs.size();
    if (n < 2) return 0.0;
    double mean = correlator_g1_zero(pairs);
    double ss = 0.0;
    for (const auto& [a, b] : pairs) {
        double d = a * b - mean;
        ss += d * d;
    }
    return std::sqrt(ss / double(n - 1) / double(n));
}

struct CorrelatorOptions {
    bool apply_t1_correction = false;
    double t_meas = 0.0;
    double t1 = 0.0;
};

/// Full correlator pipeline on a two-run dataset: calibrate from Run I
/// first voltages and Run II, normalize, correlate, invert. Negative
/// empirical g1(0) is reported as p_e = 0 with the noise_dominated flag
/// rather than failing, so sweep automation keeps running.
inline Estimate estimate_correlator(std::span<const ShotRecord> run1,
                                    std::span<const ShotRecord> run2, Method method,
                                    const CorrelatorOptions& opt = {}) {
    if (method != Method::correlator_exact && method != Method::correlator_approx &&
        method != Method::correlator_general)
        throw std::invalid_argument("estimate_correlator: not a correlator method");
    auto cal = calibrate(run1, run2);

    Estimate est;
    est.method = method;
    est.n_shots = run1.size();
    est.diagnostics.snr_hat = cal.snr_hat;

    if (method == Method::correlator_general) {
        // Raw real projections, no normalization.
        std::vector<std::pair<double, double>> pairs;
        pairs.reserve(run1.size());
        double g0 = 0.0, g0_pi = 0.0;
        for (const auto& r : run1) {
            if (!r.v2) throw std::invalid_argument("correlator estimate: record lacks v2");
            pairs.emplace_back(std::real(r.v1), std::real(*r.v2));
            g0 += std::real(r.v1);
        }
        for (const auto& r : run2) g0_pi += std::real(r.v1);
        g0 /= double(run1.size());
        g0_pi /= double(run2.size());
        double g1 = correlator_g1_zero(pairs);
        est.diagnostics.g0 = g0;
        est.diagnostics.g0_pi = g0_pi;
        est.diagnostics.g1_0 = g1;
        est.diagnostics.g1_inf = g0 * g0;
        if (g1 < 0) {
            est.p_e = 0.0;
            est.diagnostics.noise_dominated = true;
        } else {
            est.p_e = p_e_general(g1, g0, g0_pi);
        }
        double g1_std = g1_std_error(pairs);
        double dn = g0 + g0_pi - 2.0 * std::sqrt(std::max(g1, 0.0));
        est.std_error = dn * dn > 0 ? g1_std / (dn * dn) : 0.0;
    } else {
        auto pairs = detail::normalized_pairs(run1, cal);
        double g1 = correlator_g1_zero(pairs);
        double m1 = 0.0, m2 = 0.0;
        for (const auto& [a, b] : pairs) { m1 += a; m2 += b; }
        m1 /= double(pairs.size());
        m2 /= double(pairs.size());
        double g0_pi = 0.0;
        for (const auto& r : run2) g0_pi += normalize(r.v1, cal);
        g0_pi /= double(run2.size());
        est.diagnostics.g0 = m1;
        est.diagnostics.g0_pi = g0_pi;
        est.diagnostics.g1_0 = g1;
        est.diagnostics.g1_inf = m1 * m2;
        double g1_std = g1_std_error(pairs);
        if (method == Method::correlator_approx) {
            est.p_e = p_e_approx(g1);
            est.std_error = g1_std;
            est.diagnostics.noise_dominated = g1 < 0;
        } else {
            if (g1 < 0) {
                est.p_e = 0.0;
                est.diagnostics.noise_dominated = true;
                est.std_error = detail::propagate_exact(0.0, g1_std);
            } else {
                est.p_e = p_e_exact(g1);
                est.std_error = detail::propagate_exact(g1, g1_std);
            }
        }
    }
    if (opt.apply_t1_correction) {
        double f = std::exp(opt.t_meas / opt.t1);
        est.p_e = t1_correction(est.p_e, opt.t_meas, opt.t1);
        est.std_error *= f;
        est.diagnostics.t1_correction_applied = true;
    }
    return est;
}

/// Threshold classification at the calibration midpoint (0.5 on the
/// normalized axis); binomial standard error. Misclassification bias is
/// about Phi(-snr/2) per state.
inline Estimate direct_count(std::span<const ShotRecord> records, const CalibrationResult& cal) {
    if (records.empty()) throw std::invalid_argument("direct_count: empty records");
    std::uint64_t n_e = 0;
    for (const auto& r : records)
        if (normalize(r.v1, cal) >= 0.5) ++n_e;
    Estimate est;
    est.method = Method::direct_count;
    est.n_shots = records.size();
    double n = double(records.size());
    est.p_e = double(n_e) / n;
    est.std_error = std::sqrt(est.p_e * (1.0 - est.p_e) / n);
    est.diagnostics.snr_hat = cal.snr_hat;
    est.diagnostics.g0 = est.p_e;
    return est;
}

namespace detail {

// Classify a voltage to the nearest of the three calibration responses.
inline State classify3(complexd v, const CalibrationResult& cal, complexd v_f_hat) {
    double dg = std::abs(v - cal.v_g_hat);
    double de = std::abs(v - cal.v_e_hat);
    double df = std::abs(v - v_f_hat);
    if (dg <= de && dg <= df) return State::g;
    if (de <= df) return State::e;
    return State::f;
}

}  // namespace detail

/// Build a calibration from qutrit records alone: the zero-angle no-pi
/// shots are (mostly) ground, the zero-angle pi shots (mostly) excited.
/// Requires an angle entry at (or numerically near) zero.
inline CalibrationResult calibrate_from_qutrit(std::span<const ShotRecord> records) {
    std::vector<ShotRecord> ground, excited;
    double min_angle = std::numeric_limits<double>::infinity();
    for (const auto& r : records) min_angle = std::min(min_angle, std::abs(r.prep.rabi_angle));
    for (const auto& r : records) {
        if (std::abs(r.prep.rabi_angle) > min_angle + 1e-12) continue;
        (r.prep.with_ge_pi ? excited : ground).push_back(r);
    }
    return calibrate(ground, excited);
}

/// Qutrit method: fit A*(1-cos(theta))/2 + c to the classified
/// e-population per angle for both variants; P_e = A/(A + A_pi).
inline Estimate qutrit_estimate(std::span<const ShotRecord> records) {
    if (records.empty()) throw std::invalid_argument("qutrit_estimate: empty records");
    auto cal = calibrate_from_qutrit(records);
    complexd v_f_hat = cal.v_e_hat + complexd(0, 1) * (cal.v_e_hat - cal.v_g_hat);

    // e-population per (angle, variant).
    std::map<std::pair<double, bool>, std::pair<std::uint64_t, std::uint64_t>> bins;
    for (const auto& r : records) {
        if (r.prep.tag != PrepTag::pi_ef_rabi)
            throw std::invalid_argument("qutrit_estimate: record is not a Rabi shot");
        auto& [n_e, n_tot] = bins[{r.prep.rabi_angle, r.prep.with_ge_pi}];
        if (detail::classify3(r.v1, cal, v_f_hat) == State::e) ++n_e;
        ++n_tot;
    }
    std::vector<double> phi_no, y_no, phi_pi, y_pi;
    for (const auto& [key, counts] : bins) {
        double phi = 0.5 * (1.0 - std::cos(key.first));
        double frac = double(counts.first) / double(counts.second);
        if (key.second) { phi_pi.push_back(phi); y_pi.push_back(frac); }
        else { phi_no.push_back(phi); y_no.push_back(frac); }
    }
    if (phi_no.size() < 6 || phi_pi.size() < 6)
        throw std::invalid_argument("qutrit_estimate: need both variants with >= 6 distinct angles");

    auto f_no = fit::fit_two_basis(phi_no, y_no);
    auto f_pi = fit::fit_two_basis(phi_pi, y_pi);
    double a_no = std::abs(f_no.a);
    double a_pi = std::abs(f_pi.a);
    double total = a_no + a_pi;
    if (!(total > 0)) throw std::runtime_error("qutrit_estimate: zero total Rabi amplitude");

    Estimate est;
    est.method = Method::qutrit;
    est.n_shots = records.size();
    est.p_e = a_no / total;
    // First-order propagation of the amplitude ratio.
    double d_no = a_pi / (total * total);
    double d_pi = a_no / (total * total);
    est.std_error = std::sqrt(d_no * d_no * f_no.a_err * f_no.a_err +
                              d_pi * d_pi * f_pi.a_err * f_pi.a_err);
    est.diagnostics.snr_hat = cal.snr_hat;
    return est;
}

/// Bootstrap standard deviation of an estimator over resamples with
/// replacement; deterministic per seed via counter-keyed substreams.
inline double bootstrap_std(std::span<const ShotRecord> records,
                            const std::function<double(std::span<const ShotRecord>)>& estimator,
                            std::uint64_t n_resamples, std::uint64_t seed) {
    if (n_resamples < 100) throw std::invalid_argument("bootstrap_std: n_resamples must be >= 100");
    if (records.size() < 10) throw std::invalid_argument("bootstrap_std: need >= 10 records");
    std::vector<double> vals(n_resamples);
    std::vector<ShotRecord> sample(records.size());
    for (std::uint64_t r = 0; r < n_resamples; ++r) {
        rng::Stream rs(seed, r, 0x626f6f74);  // per-resample stream
        for (std::size_t i = 0; i < records.size(); ++i)
            sample[i] = records[rs.next_u64() % records.size()];
        vals[r] = estimator(sample);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(n_resamples);
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(n_resamples - 1));
}

struct CorrelatorDecayFit {
    double amplitude;
    double t1_fit;
    double offset;
    double amp0_err;
    double t1_err;
};

/// Least-squares fit of A*exp(-tau/T) + c to correlator-vs-delay points.
inline CorrelatorDecayFit fit_correlator_decay(std::span<const std::pair<double, double>> points) {
    std::vector<double> taus, vals;
    taus.reserve(points.size());
    vals.reserve(points.size());
    for (const auto& [t, g] : points) { taus.push_back(t); vals.push_back(g); }
    auto f = fit::fit_exp_decay(taus, vals);
    return {f.amplitude, f.t1, f.offset, f.amp0_err, f.t1_err};
}

}  // namespace qtherm
