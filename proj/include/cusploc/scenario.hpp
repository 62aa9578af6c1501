#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cusploc/errors.hpp"
#include "cusploc/geometry.hpp"

namespace cusploc {

/// Smooth strictly positive baseline of the signal intensity. Restricted to
/// constant and linear shapes: both satisfy the smoothness condition and keep
/// the compensator in closed form for the constant case.
struct BaselineProfile {
    enum class Kind { constant, linear };
    Kind kind = Kind::constant;
    double value_at_0 = 1.0; // lambda_j(0) > 0
    double slope = 0.0;      // 0 for constant

    double operator()(double s) const {
        return kind == Kind::constant ? value_at_0 : value_at_0 + slope * s;
    }
    /// Maximum over [0, horizon]; linear profiles peak at an endpoint.
    double max_on(double horizon) const {
        return std::max(value_at_0, (*this)(horizon));
    }
    bool positive_on(double horizon) const {
        return value_at_0 > 0.0 && (*this)(horizon) > 0.0;
    }
};

struct Detector {
    Vec2 position;
    BaselineProfile profile;
};

/// Prior density over the domain, up to an arbitrary positive factor.
/// The factor is irrelevant in the Bayes ratio and is dropped on evaluation,
/// which makes prior rescaling a bit-exact no-op.
struct Prior {
    enum class Kind { uniform, gaussian };
    Kind kind = Kind::uniform;
    Vec2 mean;            // gaussian only
    double sigma = 1.0;   // gaussian only, > 0
    double scale = 1.0;   // carried for round-trips, never evaluated

    double log_density(Vec2 p) const {
        if (kind == Kind::uniform) return 0.0;
        const double dx = (p.x - mean.x) / sigma;
        const double dy = (p.y - mean.y) / sigma;
        return -0.5 * (dx * dx + dy * dy);
    }
};

/// Full experiment description: detector layout, source, domain, signal
/// shape parameters and observation horizon.
struct Scenario {
    std::vector<Detector> detectors;
    Vec2 source;       // true location used by the simulator
    Rect domain;       // Theta
    double kappa = 0.25;
    double delta = 0.1;
    double lambda0 = 1.0; // noise floor rate (per unit n)
    double nu = 1.0;      // propagation speed
    double horizon = 1.0; // T
    double n = 1.0;       // intensity scale factor
    Prior prior;

    std::size_t k() const { return detectors.size(); }

    double tau(std::size_t j, Vec2 at) const {
        return arrival_time(detectors[j].position, at, nu);
    }

    /// Region on which likelihood-type quantities may be evaluated: the
    /// domain closure inflated by one half-width per side, so that the
    /// normalized field can be probed beyond Theta as the theory requires.
    Rect evaluation_region() const {
        return domain.inflated(0.5 * domain.width(), 0.5 * domain.height());
    }

    /// [alpha_j, beta_j]: exact arrival-time range over the domain rectangle.
    std::pair<double, double> arrival_window(std::size_t j) const {
        const Vec2 d = detectors[j].position;
        return {min_distance_to_rect(d, domain) / nu, max_distance_to_rect(d, domain) / nu};
    }
};

/// Per-detector local expansion quantities at a reference point.
struct LocalGeometry {
    struct Entry {
        double tau = 0.0;   // arrival time
        Vec2 m;             // unit direction from the point toward the detector
        double rho = 0.0;   // distance
        double gamma = 0.0; // lambda_j(0) / (delta^kappa sqrt(lambda0))
    };
    std::vector<Entry> per_detector;
};

inline LocalGeometry local_geometry(const Scenario& sc, Vec2 at) {
    LocalGeometry g;
    g.per_detector.reserve(sc.k());
    const double denom = std::pow(sc.delta, sc.kappa) * std::sqrt(sc.lambda0);
    for (const auto& det : sc.detectors) {
        LocalGeometry::Entry e;
        e.rho = distance(det.position, at);
        if (e.rho == 0.0)
            throw degenerate_geometry_error("local_geometry: reference point is a detector");
        e.m = unit_direction(det.position, at);
        e.tau = e.rho / sc.nu;
        e.gamma = det.profile.value_at_0 / denom;
        g.per_detector.push_back(e);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Scenario validation (model conditions C1-C5)

struct ConditionReport {
    std::string id;     // "C1".."C5"
    bool pass = false;
    std::string detail; // offending quantities on failure, summary on pass
};

struct ValidationReport {
    std::vector<ConditionReport> conditions;
    bool all_pass() const {
        for (const auto& c : conditions)
            if (!c.pass) return false;
        return true;
    }
    std::string to_string() const {
        std::ostringstream os;
        for (const auto& c : conditions)
            os << c.id << (c.pass ? " PASS  " : " FAIL  ") << c.detail << '\n';
        return os.str();
    }
};

inline ValidationReport validate_scenario(const Scenario& sc) {
    ValidationReport rep;

    { // C1: Theta open bounded rectangle, 0 < alpha_j < beta_j < T
        ConditionReport c{"C1", true, ""};
        std::ostringstream os;
        if (!sc.domain.valid()) {
            c.pass = false;
            os << "domain rectangle is empty; ";
        } else {
            for (std::size_t j = 0; j < sc.k(); ++j) {
                const auto [alpha, beta] = sc.arrival_window(j);
                if (!(alpha > 0.0 && beta < sc.horizon)) {
                    c.pass = false;
                    os << "detector " << j << ": alpha=" << alpha << " beta=" << beta
                       << " T=" << sc.horizon << "; ";
                }
            }
        }
        c.detail = c.pass ? "arrival windows strictly inside (0, T)" : os.str();
        rep.conditions.push_back(c);
    }
    { // C2: source distinct from detectors and inside Theta; detectors outside closure
        ConditionReport c{"C2", true, ""};
        std::ostringstream os;
        for (std::size_t j = 0; j < sc.k(); ++j) {
            if (sc.detectors[j].position == sc.source) {
                c.pass = false;
                os << "source coincides with detector " << j << "; ";
            }
            if (sc.domain.contains(sc.detectors[j].position)) {
                c.pass = false;
                os << "detector " << j << " lies in the closure of the domain; ";
            }
        }
        if (!sc.domain.strictly_contains(sc.source)) {
            c.pass = false;
            os << "source not strictly inside the domain; ";
        }
        c.detail = c.pass ? "source interior, detectors excluded" : os.str();
        rep.conditions.push_back(c);
    }
    { // C3: kappa in (0, 1/2), delta in (0, T)
        ConditionReport c{"C3", true, ""};
        std::ostringstream os;
        if (!(sc.kappa > 0.0 && sc.kappa < 0.5)) {
            c.pass = false;
            os << "kappa=" << sc.kappa << " outside (0, 0.5); ";
        }
        if (!(sc.delta > 0.0 && sc.delta < sc.horizon)) {
            c.pass = false;
            os << "delta=" << sc.delta << " outside (0, T=" << sc.horizon << "); ";
        }
        c.detail = c.pass ? "kappa and delta in range" : os.str();
        rep.conditions.push_back(c);
    }
    { // C4: baselines strictly positive with continuous derivative on [0, T]
        ConditionReport c{"C4", true, ""};
        std::ostringstream os;
        for (std::size_t j = 0; j < sc.k(); ++j) {
            if (!sc.detectors[j].profile.positive_on(sc.horizon)) {
                c.pass = false;
                os << "profile " << j << " not strictly positive on [0, T]; ";
            }
        }
        if (!(sc.lambda0 > 0.0)) {
            c.pass = false;
            os << "lambda0=" << sc.lambda0 << " not positive; ";
        }
        c.detail = c.pass ? "baselines positive and smooth" : os.str();
        rep.conditions.push_back(c);
    }
    { // C5: at least three detectors, not all on one line
        ConditionReport c{"C5", true, ""};
        std::vector<Vec2> pts;
        for (const auto& d : sc.detectors) pts.push_back(d.position);
        if (sc.k() < 3) {
            c.pass = false;
            c.detail = "fewer than three detectors";
        } else if (all_collinear(pts)) {
            c.pass = false;
            c.detail = "all detectors collinear";
        } else {
            c.detail = "non-collinear detector set";
        }
        rep.conditions.push_back(c);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Identifiability margin

/// q1 = min over unit vectors e of Q(e) = sum_j |<m_j, e>|^(2 kappa + 1),
/// evaluated at the reference point. Positive exactly when the unit
/// directions m_j do not share a common orthogonal direction.
///
/// Q has period pi in the angle and |.|-kinks where <m_j, e> = 0; a 4096-point
/// scan brackets every kink and golden-section refinement polishes the best
/// bracket to 1e-8 in angle.
inline double identifiability_margin(const Scenario& sc, Vec2 at) {
    const LocalGeometry g = local_geometry(sc, at);
    const double p = 2.0 * sc.kappa + 1.0;
    auto q = [&](double angle) {
        const Vec2 e{std::cos(angle), std::sin(angle)};
        double sum = 0.0;
        for (const auto& d : g.per_detector) sum += std::pow(std::abs(dot(d.m, e)), p);
        return sum;
    };

    constexpr int kScan = 4096;
    const double pi = 3.14159265358979323846;
    double best_angle = 0.0, best = q(0.0);
    for (int i = 1; i < kScan; ++i) {
        const double a = pi * i / kScan;
        if (const double v = q(a); v < best) { best = v; best_angle = a; }
    }

    double lo = best_angle - pi / kScan;
    double hi = best_angle + pi / kScan;
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = q(x1), f2 = q(x2);
    while (hi - lo > 1e-8) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo); f1 = q(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo); f2 = q(x2);
        }
    }
    return std::min(best, std::min(f1, f2));
}

// ---------------------------------------------------------------------------
// JSON serialization

inline nlohmann::json to_json(const Scenario& sc) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : sc.detectors) {
        dets.push_back({{"x", d.position.x},
                        {"y", d.position.y},
                        {"profile",
                         {{"kind", d.profile.kind == BaselineProfile::Kind::constant
                                       ? "constant"
                                       : "linear"},
                          {"value_at_0", d.profile.value_at_0},
                          {"slope", d.profile.slope}}}});
    }
    nlohmann::json prior{{"kind", sc.prior.kind == Prior::Kind::uniform ? "uniform" : "gaussian"},
                         {"scale", sc.prior.scale}};
    if (sc.prior.kind == Prior::Kind::gaussian) {
        prior["mean"] = {{"x", sc.prior.mean.x}, {"y", sc.prior.mean.y}};
        prior["sigma"] = sc.prior.sigma;
    }
    return nlohmann::json{
        {"detectors", dets},
        {"source", {{"x", sc.source.x}, {"y", sc.source.y}}},
        {"domain",
         {{"xmin", sc.domain.xmin},
          {"xmax", sc.domain.xmax},
          {"ymin", sc.domain.ymin},
          {"ymax", sc.domain.ymax}}},
        {"kappa", sc.kappa},
        {"delta", sc.delta},
        {"lambda0", sc.lambda0},
        {"nu", sc.nu},
        {"horizon", sc.horizon},
        {"n", sc.n},
        {"prior", prior}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario sc;
    for (const auto& d : j.at("detectors")) {
        Detector det;
        det.position = {d.at("x").get<double>(), d.at("y").get<double>()};
        if (d.contains("profile")) {
            const auto& p = d.at("profile");
            const std::string kind = p.value("kind", "constant");
            det.profile.kind = kind == "linear" ? BaselineProfile::Kind::linear
                                                : BaselineProfile::Kind::constant;
            det.profile.value_at_0 = p.value("value_at_0", 1.0);
            det.profile.slope = p.value("slope", 0.0);
        }
        sc.detectors.push_back(det);
    }
    sc.source = {j.at("source").at("x").get<double>(), j.at("source").at("y").get<double>()};
    const auto& dom = j.at("domain");
    sc.domain = {dom.at("xmin").get<double>(), dom.at("xmax").get<double>(),
                 dom.at("ymin").get<double>(), dom.at("ymax").get<double>()};
    sc.kappa = j.at("kappa").get<double>();
    sc.delta = j.at("delta").get<double>();
    sc.lambda0 = j.at("lambda0").get<double>();
    sc.nu = j.at("nu").get<double>();
    sc.horizon = j.at("horizon").get<double>();
    sc.n = j.value("n", 1.0);
    if (j.contains("prior")) {
        const auto& p = j.at("prior");
        const std::string kind = p.value("kind", "uniform");
        sc.prior.kind = kind == "gaussian" ? Prior::Kind::gaussian : Prior::Kind::uniform;
        sc.prior.scale = p.value("scale", 1.0);
        if (sc.prior.kind == Prior::Kind::gaussian) {
            sc.prior.mean = {p.at("mean").at("x").get<double>(),
                             p.at("mean").at("y").get<double>()};
            sc.prior.sigma = p.at("sigma").get<double>();
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scenario file: " + path);
    nlohmann::json j;
    in >> j;
    return scenario_from_json(j);
}

} // namespace cusploc
