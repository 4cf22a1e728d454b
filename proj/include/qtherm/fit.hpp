#pragma once

// Small least-squares toolkit: straight lines, two-basis linear models,
// and the exponential decay A*exp(-tau/T) + c with T profiled out.

#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace qtherm::fit {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
};

inline LineFit linear_regression(std::span<const double> x, std::span<const double> y) {
    std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("linear_regression: need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0) throw std::invalid_argument("linear_regression: degenerate x");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    if (n > 2) {
        double sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - f.slope * x[i] - f.intercept;
            sse += r * r;
        }
        double s2 = sse / double(n - 2);
        f.slope_err = std::sqrt(s2 * n / denom);
    }
    return f;
}

// y ~ a*phi(x) + b for a given basis column phi; returns coefficients
// with standard errors from the residual variance.
struct TwoBasisFit {
    double a = 0.0;
    double b = 0.0;
    double a_err = 0.0;
    double b_err = 0.0;
};

inline TwoBasisFit fit_two_basis(std::span<const double> phi, std::span<const double> y) {
    std::size_t n = phi.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_two_basis: need >= 2 points");
    double s1 = double(n), sp = 0, spp = 0, sy = 0, spy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sp += phi[i]; spp += phi[i] * phi[i]; sy += y[i]; spy += phi[i] * y[i];
    }
    double det = s1 * spp - sp * sp;
    if (std::abs(det) < 1e-12 * (s1 * spp + sp * sp + 1e-300))
        throw std::runtime_error("fit_two_basis: singular design (constant basis)");
    TwoBasisFit f;
    f.a = (s1 * spy - sp * sy) / det;
    f.b = (spp * sy - sp * spy) / det;
    if (n > 2) {
        double sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - f.a * phi[i] - f.b;
            sse += r * r;
        }
        double s2 = sse / double(n - 2);
        f.a_err = std::sqrt(std::max(0.0, s2 * s1 / det));
        f.b_err = std::sqrt(std::max(0.0, s2 * spp / det));
    }
    return f;
}

struct ExpDecayFit {
    double amplitude = 0.0;  // A in A*exp(-tau/T) + c
    double t1 = 0.0;         // T
    double offset = 0.0;     // c
    double amplitude_err = 0.0;
    double t1_err = 0.0;
    double offset_err = 0.0;
    double amp0_err = 0.0;   // std error of A + c (value extrapolated to tau = 0)
    double sse = 0.0;
};

namespace detail {

struct ProfileEval {
    double sse;
    double a;
    double c;
};

inline ProfileEval eval_profile(double t1, std::span<const double> tau,
                                std::span<const double> y) {
    std::size_t n = tau.size();
    double s1 = double(n), sp = 0, spp = 0, sy = 0, spy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = std::exp(-tau[i] / t1);
        sp += p; spp += p * p; sy += y[i]; spy += p * y[i];
    }
    double det = s1 * spp - sp * sp;
    if (std::abs(det) < 1e-300) return {std::numeric_limits<double>::infinity(), 0, 0};
    double a = (s1 * spy - sp * sy) / det;
    double c = (spp * sy - sp * spy) / det;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - a * std::exp(-tau[i] / t1) - c;
        sse += r * r;
    }
    return {sse, a, c};
}

// 3x3 symmetric inverse via cofactors; returns false if singular.
inline bool invert3(const double m[3][3], double inv[3][3]) {
    double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    double det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if (std::abs(det) < 1e-300) return false;
    double d = 1.0 / det;
    inv[0][0] = c00 * d;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d;
    inv[1][0] = c01 * d;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d;
    inv[2][0] = c02 * d;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d;
    return true;
}

}  // namespace detail

/// Fit A*exp(-tau/T) + c. T is profiled on a log grid and refined by
/// golden section; (A, c) solved linearly at each T. Standard errors
/// come from the Gauss-Newton covariance at the optimum.
inline ExpDecayFit fit_exp_decay(std::span<const double> tau, std::span<const double> y) {
    std::size_t n = tau.size();
    if (n != y.size() || n < 4) throw std::invalid_argument("fit_exp_decay: need >= 4 points");
    std::set<double> distinct(tau.begin(), tau.end());
    if (distinct.size() < 4)
        throw std::invalid_argument("fit_exp_decay: need >= 4 distinct tau values");

    double tmin = *distinct.begin(), tmax = *distinct.rbegin();
    double span = tmax - tmin;
    if (!(span > 0)) throw std::invalid_argument("fit_exp_decay: zero tau span");

    // Coarse scan over plausible decay constants.
    double lo = span * 1e-3, hi = span * 1e3;
    double best_t = lo, best_sse = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 240; ++k) {
        double t = lo * std::pow(hi / lo, k / 240.0);
        auto ev = detail::eval_profile(t, tau, y);
        if (ev.sse < best_sse) { best_sse = ev.sse; best_t = t; }
    }
    // Golden section refinement in log T.
    double a = std::log(best_t) - 0.12, b = std::log(best_t) + 0.12;
    constexpr double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = detail::eval_profile(std::exp(x1), tau, y).sse;
    double f2 = detail::eval_profile(std::exp(x2), tau, y).sse;
    for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = detail::eval_profile(std::exp(x1), tau, y).sse;
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = detail::eval_profile(std::exp(x2), tau, y).sse;
        }
    }
    double t_opt = std::exp(0.5 * (a + b));
    auto ev = detail::eval_profile(t_opt, tau, y);

    ExpDecayFit out;
    out.amplitude = ev.a;
    out.t1 = t_opt;
    out.offset = ev.c;
    out.sse = ev.sse;

    if (n > 3) {
        // Gauss-Newton covariance, params (A, T, c).
        double jtj[3][3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            double p = std::exp(-tau[i] / t_opt);
            double j[3] = {p, ev.a * tau[i] / (t_opt * t_opt) * p, 1.0};
            for (int r = 0; r < 3; ++r)
                for (int c2 = 0; c2 < 3; ++c2) jtj[r][c2] += j[r] * j[c2];
        }
        double inv[3][3];
        if (detail::invert3(jtj, inv)) {
            double s2 = ev.sse / double(n - 3);
            out.amplitude_err = std::sqrt(std::max(0.0, s2 * inv[0][0]));
            out.t1_err = std::sqrt(std::max(0.0, s2 * inv[1][1]));
            out.offset_err = std::sqrt(std::max(0.0, s2 * inv[2][2]));
            out.amp0_err =
                std::sqrt(std::max(0.0, s2 * (inv[0][0] + inv[2][2] + 2.0 * inv[0][2])));
        }
    }
    return out;
}

}  // namespace qtherm::fit
