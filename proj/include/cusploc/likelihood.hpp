#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cusploc/errors.hpp"
#include "cusploc/simulate.hpp"

namespace cusploc {

struct LogLikelihoodValue {
    double value = 0.0;
    Vec2 theta;
};

/// Log-likelihood contribution of one detector as a function of the scalar
/// arrival time tau. Events strictly before tau sit on the noise floor, events
/// past the cusp window sit on the full baseline (a single multiply for
/// constant profiles), and only the events inside (tau, tau + delta] need the
/// cusp formula. This is what makes dense grid evaluation affordable.
inline double detector_log_likelihood(const EventRecord& rec, const Scenario& sc,
                                      std::size_t j, double tau) {
    const BaselineProfile& prof = sc.detectors[j].profile;
    const double n = sc.n;
    const double log_floor = std::log(n * sc.lambda0);
    const auto& t = rec.times;

    const auto i0 = std::upper_bound(t.begin(), t.end(), tau) - t.begin();
    const auto i1 = std::upper_bound(t.begin(), t.end(), tau + sc.delta) - t.begin();

    double sum = static_cast<double>(i0) * log_floor;
    for (auto i = i0; i < i1; ++i) {
        const double s = t[i] - tau;
        sum += std::log(n * (prof(s) * std::pow(s / sc.delta, sc.kappa) + sc.lambda0));
    }
    if (prof.kind == BaselineProfile::Kind::constant) {
        sum += static_cast<double>(t.size() - i1) *
               std::log(n * (prof.value_at_0 + sc.lambda0));
    } else {
        for (auto i = i1; i < static_cast<decltype(i1)>(t.size()); ++i)
            sum += std::log(n * (prof(t[i] - tau) + sc.lambda0));
    }

    // compensator
    const double a = sc.horizon - tau;
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
    return sum - n * (sc.lambda0 * sc.horizon + signal_part);
}

/// Exact log-likelihood of the observation set at a candidate location:
/// sum_j [ sum_i ln lambda_{j,n}(theta, t_i) - Lambda_j(theta, T) ].
/// Equals the model's log likelihood ratio up to a theta-independent constant,
/// so argmax and posterior ratios are unchanged.
inline LogLikelihoodValue log_likelihood(const ObservationSet& obs, Vec2 theta) {
    const Scenario& sc = obs.scenario;
    if (!sc.evaluation_region().contains(theta))
        throw domain_error("log_likelihood: theta outside the evaluation region");
    double total = 0.0;
    for (std::size_t j = 0; j < sc.k(); ++j) {
        const double rho = distance(sc.detectors[j].position, theta);
        if (rho == 0.0)
            throw degenerate_geometry_error("log_likelihood: theta at a detector position");
        total += detector_log_likelihood(obs.records[j], sc, j, rho / sc.nu);
    }
    return {total, theta};
}

/// Normalized likelihood-ratio field log Z_n(u) on a list of u points,
/// with phi_n = n^(-1/(2 kappa + 1)) and the reparametrization
/// theta_u = theta0 + nu phi_n u.
struct NormalizedField {
    std::vector<Vec2> u_points;
    std::vector<double> log_z;
    Vec2 theta0;
    double phi_n = 0.0;
};

inline double normalizing_rate(const Scenario& sc) {
    return std::pow(sc.n, -1.0 / (2.0 * sc.kappa + 1.0));
}

inline NormalizedField normalized_field(const ObservationSet& obs, Vec2 theta0,
                                        const std::vector<Vec2>& u_points) {
    const Scenario& sc = obs.scenario;
    NormalizedField f;
    f.theta0 = theta0;
    f.phi_n = normalizing_rate(sc);
    f.u_points = u_points;
    f.log_z.reserve(u_points.size());
    const double base = log_likelihood(obs, theta0).value;
    const Rect region = sc.evaluation_region();
    for (const Vec2& u : u_points) {
        const Vec2 theta_u = theta0 + (sc.nu * f.phi_n) * u;
        if (!region.contains(theta_u)) {
            char msg[128];
            std::snprintf(msg, sizeof msg,
                          "normalized_field: u=(%g, %g) leaves the evaluation region", u.x,
                          u.y);
            throw domain_error(msg);
        }
        f.log_z.push_back(u.x == 0.0 && u.y == 0.0
                              ? 0.0
                              : log_likelihood(obs, theta_u).value - base);
    }
    return f;
}

inline void save_field_csv(const NormalizedField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open output file: " + path);
    out << "u_x,u_y,log_z\n";
    char buf[128];
    for (std::size_t i = 0; i < f.u_points.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.u_points[i].x, f.u_points[i].y,
                      f.log_z[i]);
        out << buf;
    }
}

} // namespace cusploc
