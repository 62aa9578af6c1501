#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cusploc/errors.hpp"
#include "cusploc/quadrature.hpp"
#include "cusploc/scenario.hpp"

namespace cusploc {

/// Cusp signal shape S_j at time offset s from the arrival instant:
/// 0 before arrival, lambda_j(s) |s/delta|^kappa on the cusp window [0, delta],
/// the plain baseline afterwards. Continuous everywhere, with an infinite
/// one-sided derivative at s = 0 for kappa in (0, 1/2).
inline double signal_value(double s, const BaselineProfile& profile, double kappa,
                           double delta) {
    if (s < 0.0) return 0.0;
    if (s <= delta) return profile(s) * std::pow(s / delta, kappa);
    return profile(s);
}

/// Maximum of S_j over offsets [0, horizon] (used as the thinning majorant).
inline double signal_max(const BaselineProfile& profile, double kappa, double delta,
                         double horizon) {
    double m = profile.max_on(horizon);
    // on the cusp window the factor |s/delta|^kappa <= 1, so for profiles that
    // peak inside [0, delta] the window endpoint still dominates
    return std::max(m, signal_value(std::min(delta, horizon), profile, kappa, delta));
}

/// Intensity of the process at detector j for a candidate source location.
inline double intensity(const Scenario& sc, Vec2 theta, std::size_t j, double t) {
    if (t < 0.0 || t > sc.horizon)
        throw domain_error("intensity: t outside [0, T]");
    const double s = t - sc.tau(j, theta);
    return sc.n * (signal_value(s, sc.detectors[j].profile, sc.kappa, sc.delta) + sc.lambda0);
}

/// Expected count int_0^t lambda_{j,n}(theta, s) ds.
///
/// Constant baselines use the closed form
///   n lambda0 t + n lambda_j [ delta/(kappa+1) (min(a,delta)/delta)^{kappa+1} ]_{a>0}
///                + n lambda_j max(a - delta, 0),   a = t - tau_j(theta);
/// linear baselines fall back to adaptive quadrature of the signal part with
/// hard breakpoints at the cusp window edges.
inline double cumulative_intensity(const Scenario& sc, Vec2 theta, std::size_t j, double t) {
    if (t < 0.0 || t > sc.horizon)
        throw domain_error("cumulative_intensity: t outside [0, T]");
    const double tau = sc.tau(j, theta);
    const BaselineProfile& prof = sc.detectors[j].profile;
    const double a = t - tau;
    double signal_part = 0.0;
    if (a > 0.0) {
        if (prof.kind == BaselineProfile::Kind::constant) {
            const double b = std::min(a, sc.delta);
            signal_part = prof.value_at_0 *
                          (sc.delta / (sc.kappa + 1.0) *
                               std::pow(b / sc.delta, sc.kappa + 1.0) +
                           std::max(a - sc.delta, 0.0));
        } else {
            signal_part = integrate(
                [&](double s) { return signal_value(s, prof, sc.kappa, sc.delta); }, 0.0, a,
                1e-10, {sc.delta});
        }
    }
    return sc.n * (sc.lambda0 * t + signal_part);
}

/// Sum over detectors of int_0^T (sqrt(lambda_{j,n}(theta1, t)) -
/// sqrt(lambda_{j,n}(theta2, t)))^2 dt. Panels are forced to split at each
/// arrival time and cusp-window end of both candidate locations.
inline double hellinger_integral(const Scenario& sc, Vec2 theta1, Vec2 theta2,
                                 double rel_tol = 1e-10) {
    double total = 0.0;
    for (std::size_t j = 0; j < sc.k(); ++j) {
        const double t1 = sc.tau(j, theta1);
        const double t2 = sc.tau(j, theta2);
        if (t1 == t2) continue; // identical intensities
        const BaselineProfile& prof = sc.detectors[j].profile;
        auto f = [&](double t) {
            const double s1 = signal_value(t - t1, prof, sc.kappa, sc.delta) + sc.lambda0;
            const double s2 = signal_value(t - t2, prof, sc.kappa, sc.delta) + sc.lambda0;
            const double d = std::sqrt(s1) - std::sqrt(s2);
            return d * d;
        };
        total += sc.n * integrate(f, 0.0, sc.horizon, rel_tol,
                                  {t1, t2, t1 + sc.delta, t2 + sc.delta});
    }
    return total;
}

} // namespace cusploc
