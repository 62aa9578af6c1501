#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cusploc/estimators.hpp"
#include "cusploc/limit_field.hpp"
#include "cusploc/parallel.hpp"
#include "cusploc/simulate.hpp"
#include "cusploc/stats.hpp"

namespace cusploc {

inline std::string scenario_hash(const Scenario& sc) {
    // FNV-1a over the canonical JSON encoding
    const std::string s = to_json(sc).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Rate study

struct RateStudyRow {
    double n = 0.0;
    std::size_t replicates = 0;
    double mse_bayes = 0.0, mse_bayes_se = 0.0;
    double mse_two_step = 0.0, mse_two_step_se = 0.0;
    std::size_t boundary_warnings = 0;
};

struct StudyReport {
    std::vector<RateStudyRow> rows;
    double slope_bayes = 0.0, slope_bayes_se = 0.0;
    double slope_two_step = 0.0, slope_two_step_se = 0.0;
    std::string scenario_hash;
    std::uint64_t seed = 0;
};

struct RateStudyConfig {
    std::vector<double> n_list{200.0, 2000.0, 20000.0};
    std::size_t replicates = 200;
    int grid_resolution = 33;
    int grid_levels = 4;
    bool with_two_step = true;
    int threads = 1;
};

/// Monte Carlo mean square error of the Bayes (and optionally two-step)
/// estimator across the intensity scales in n_list, with the log-log slope
/// fit. Replicate seeds derive from (master seed, n, replicate), so extending
/// n_list or the replicate count never changes existing draws.
inline StudyReport rate_study(const Scenario& base, const RateStudyConfig& cfg,
                              std::uint64_t seed) {
    if (cfg.n_list.size() < 2)
        throw configuration_error("rate_study: need at least two n values for a slope");
    StudyReport report;
    report.scenario_hash = scenario_hash(base);
    report.seed = seed;

    for (double n : cfg.n_list) {
        Scenario sc = base;
        sc.n = n;
        const GridSpec grid =
            GridSpec::for_domain(sc.domain, cfg.grid_resolution, cfg.grid_levels);
        RateStudyRow row;
        row.n = n;
        row.replicates = cfg.replicates;

        std::vector<double> err_b(cfg.replicates), err_t(cfg.replicates);
        std::vector<unsigned char> warn(cfg.replicates, 0);
        parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
            const std::uint64_t rep_seed =
                derive_seed(seed, static_cast<std::uint64_t>(std::llround(n)), r);
            const ObservationSet obs = simulate(sc, rep_seed);
            const EstimateResult be = bayes_estimate(obs, sc.prior, grid);
            const Vec2 db = be.theta_hat - sc.source;
            err_b[r] = dot(db, db);
            warn[r] = be.diagnostics.boundary_warning ? 1 : 0;
            if (cfg.with_two_step) {
                const Vec2 dt = two_step_estimate(obs).theta_hat - sc.source;
                err_t[r] = dot(dt, dt);
            }
        });
        row.mse_bayes = mean(err_b);
        row.mse_bayes_se = standard_error(err_b);
        if (cfg.with_two_step) {
            row.mse_two_step = mean(err_t);
            row.mse_two_step_se = standard_error(err_t);
        }
        for (auto w : warn) row.boundary_warnings += w;
        report.rows.push_back(row);
    }

    std::vector<double> ln_n, ln_b, ln_t;
    for (const auto& row : report.rows) {
        ln_n.push_back(std::log(row.n));
        ln_b.push_back(std::log(row.mse_bayes));
        if (cfg.with_two_step) ln_t.push_back(std::log(row.mse_two_step));
    }
    const LineFit fb = fit_line(ln_n, ln_b);
    report.slope_bayes = fb.slope;
    report.slope_bayes_se = fb.slope_se;
    if (cfg.with_two_step) {
        const LineFit ft = fit_line(ln_n, ln_t);
        report.slope_two_step = ft.slope;
        report.slope_two_step_se = ft.slope_se;
    }
    return report;
}

inline nlohmann::json to_json(const StudyReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"replicates", row.replicates},
                        {"mse_bayes", row.mse_bayes},
                        {"mse_bayes_se", row.mse_bayes_se},
                        {"mse_two_step", row.mse_two_step},
                        {"mse_two_step_se", row.mse_two_step_se},
                        {"boundary_warnings", row.boundary_warnings}});
    return {{"rows", rows},
            {"slope_bayes", r.slope_bayes},
            {"slope_bayes_se", r.slope_bayes_se},
            {"slope_two_step", r.slope_two_step},
            {"slope_two_step_se", r.slope_two_step_se},
            {"scenario_hash", r.scenario_hash},
            {"seed", r.seed}};
}

inline void save_rows_csv(const StudyReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open output file: " + path);
    out << "n,replicates,mse_bayes,mse_bayes_se,mse_two_step,mse_two_step_se,"
           "boundary_warnings\n";
    char buf[256];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%zu\n", row.n,
                      row.replicates, row.mse_bayes, row.mse_bayes_se, row.mse_two_step,
                      row.mse_two_step_se, row.boundary_warnings);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Finite-dimensional distribution check (limit of log Z_n(u))

struct FddRow {
    Vec2 u;
    double sample_mean = 0.0;
    double sample_var = 0.0;
    double limit_mean = 0.0; // -v/2
    double limit_var = 0.0;  // v = sum_j |<m_j,u>|^(2k+1) R_j(u)
    double ks_statistic = 0.0;
    double ks_p = 1.0;
};

struct FddReport {
    std::vector<FddRow> rows;
    double n = 0.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
};

/// Limit variance of log Z_n(u) at the scenario source.
inline double limit_log_variance(const Scenario& sc, Vec2 u) {
    const LocalGeometry geom = local_geometry(sc, sc.source);
    const double p = 2.0 * sc.kappa + 1.0;
    double v = 0.0;
    for (const auto& d : geom.per_detector) {
        const RateConstants rc = rate_constants(d.gamma, sc.kappa);
        const double h = dot(d.m, u);
        v += std::pow(std::abs(h), p) * branch(rc, h);
    }
    return v;
}

/// Simulate at scale n and compare the empirical law of log Z_n(u) with the
/// limit Gaussian N(-v/2, v) via a KS test, per u point.
inline FddReport fdd_check(const Scenario& base, const std::vector<Vec2>& u_points, double n,
                           std::size_t reps, std::uint64_t seed, int threads = 1) {
    Scenario sc = base;
    sc.n = n;
    FddReport report;
    report.n = n;
    report.replicates = reps;
    report.seed = seed;

    std::vector<std::vector<double>> samples(u_points.size(),
                                             std::vector<double>(reps, 0.0));
    parallel_for(reps, threads, [&](std::size_t r) {
        const std::uint64_t rep_seed =
            derive_seed(seed, static_cast<std::uint64_t>(std::llround(n)), r);
        const ObservationSet obs = simulate(sc, rep_seed);
        const NormalizedField f = normalized_field(obs, sc.source, u_points);
        for (std::size_t i = 0; i < u_points.size(); ++i) samples[i][r] = f.log_z[i];
    });

    for (std::size_t i = 0; i < u_points.size(); ++i) {
        FddRow row;
        row.u = u_points[i];
        row.limit_var = limit_log_variance(sc, u_points[i]);
        row.limit_mean = -0.5 * row.limit_var;
        row.sample_mean = mean(samples[i]);
        row.sample_var = variance(samples[i]);
        if (row.limit_var == 0.0) {
            bool all_zero = true;
            for (double v : samples[i]) all_zero = all_zero && v == 0.0;
            row.ks_statistic = all_zero ? 0.0 : 1.0;
            row.ks_p = all_zero ? 1.0 : 0.0;
        } else {
            const double m = row.limit_mean, sd = std::sqrt(row.limit_var);
            const KsResult ks =
                ks_test(samples[i], [&](double x) { return normal_cdf((x - m) / sd); });
            row.ks_statistic = ks.statistic;
            row.ks_p = ks.p_value;
        }
        report.rows.push_back(row);
    }
    return report;
}

inline nlohmann::json to_json(const FddReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"u", {{"x", row.u.x}, {"y", row.u.y}}},
                        {"sample_mean", row.sample_mean},
                        {"sample_var", row.sample_var},
                        {"limit_mean", row.limit_mean},
                        {"limit_var", row.limit_var},
                        {"ks_statistic", row.ks_statistic},
                        {"ks_p", row.ks_p}});
    return {{"rows", rows}, {"n", r.n}, {"replicates", r.replicates}, {"seed", r.seed}};
}

// ---------------------------------------------------------------------------
// Bound checks (increment Hoelder bound and Hellinger tail growth)

struct HolderRow {
    Vec2 u1, u2;
    double separation = 0.0; // ||u1 - u2||
    double ratio = 0.0;      // E|sqrt Z(u1) - sqrt Z(u2)|^2 / separation^(2k+1)
    double ratio_se = 0.0;
};

struct RayRow {
    Vec2 direction;
    double fitted_exponent = 0.0; // slope of ln H vs ln r
    double min_ratio = 0.0;       // min_r H / (n r^(2k+1))
};

struct BoundReport {
    std::vector<HolderRow> holder;
    SpearmanResult holder_trend; // against increase with separation
    std::vector<RayRow> rays;
    double n = 0.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
};

/// Deterministic Hellinger values along a theta-space ray from the source.
inline std::vector<double> hellinger_ray(const Scenario& sc, Vec2 direction,
                                         const std::vector<double>& radii) {
    std::vector<double> out;
    out.reserve(radii.size());
    for (double r : radii)
        out.push_back(hellinger_integral(sc, sc.source, sc.source + r * direction));
    return out;
}

inline BoundReport bound_checks(const Scenario& base,
                                const std::vector<std::pair<Vec2, Vec2>>& pairs,
                                const std::vector<Vec2>& ray_directions,
                                const std::vector<double>& ray_radii, double n,
                                std::size_t reps, std::uint64_t seed, int threads = 1) {
    Scenario sc = base;
    sc.n = n;
    BoundReport report;
    report.n = n;
    report.replicates = reps;
    report.seed = seed;

    if (!pairs.empty()) {
        std::vector<Vec2> pts;
        for (const auto& [a, b] : pairs) {
            pts.push_back(a);
            pts.push_back(b);
        }
        std::vector<std::vector<double>> sq_diff(pairs.size(),
                                                 std::vector<double>(reps, 0.0));
        parallel_for(reps, threads, [&](std::size_t r) {
            const std::uint64_t rep_seed =
                derive_seed(seed, static_cast<std::uint64_t>(std::llround(n)), r);
            const ObservationSet obs = simulate(sc, rep_seed);
            const NormalizedField f = normalized_field(obs, sc.source, pts);
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const double a = std::exp(0.5 * f.log_z[2 * i]);
                const double b = std::exp(0.5 * f.log_z[2 * i + 1]);
                sq_diff[i][r] = (a - b) * (a - b);
            }
        });
        const double p = 2.0 * sc.kappa + 1.0;
        std::vector<double> seps, ratios;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            HolderRow row;
            row.u1 = pairs[i].first;
            row.u2 = pairs[i].second;
            row.separation = norm(row.u1 - row.u2);
            if (row.separation > 0.0) {
                const double denom = std::pow(row.separation, p);
                row.ratio = mean(sq_diff[i]) / denom;
                row.ratio_se = standard_error(sq_diff[i]) / denom;
            }
            report.holder.push_back(row);
            seps.push_back(row.separation);
            ratios.push_back(row.ratio);
        }
        report.holder_trend = spearman_trend(seps, ratios);
    }

    const double p = 2.0 * sc.kappa + 1.0;
    for (const Vec2& e : ray_directions) {
        const std::vector<double> h = hellinger_ray(sc, e, ray_radii);
        std::vector<double> ln_r, ln_h;
        RayRow row;
        row.direction = e;
        row.min_ratio = 1e300;
        for (std::size_t i = 0; i < ray_radii.size(); ++i) {
            row.min_ratio =
                std::min(row.min_ratio, h[i] / (sc.n * std::pow(ray_radii[i], p)));
            if (h[i] > 0.0) {
                ln_r.push_back(std::log(ray_radii[i]));
                ln_h.push_back(std::log(h[i]));
            }
        }
        row.fitted_exponent = ln_r.size() >= 2 ? fit_line(ln_r, ln_h).slope : 0.0;
        report.rays.push_back(row);
    }
    return report;
}

inline nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json holder = nlohmann::json::array();
    for (const auto& row : r.holder)
        holder.push_back({{"u1", {{"x", row.u1.x}, {"y", row.u1.y}}},
                          {"u2", {{"x", row.u2.x}, {"y", row.u2.y}}},
                          {"separation", row.separation},
                          {"ratio", row.ratio},
                          {"ratio_se", row.ratio_se}});
    nlohmann::json rays = nlohmann::json::array();
    for (const auto& row : r.rays)
        rays.push_back({{"direction", {{"x", row.direction.x}, {"y", row.direction.y}}},
                        {"fitted_exponent", row.fitted_exponent},
                        {"min_ratio", row.min_ratio}});
    return {{"holder", holder},
            {"holder_trend_rho", r.holder_trend.rho},
            {"holder_trend_p_increasing", r.holder_trend.p_increasing},
            {"rays", rays},
            {"n", r.n},
            {"replicates", r.replicates},
            {"seed", r.seed}};
}

// ---------------------------------------------------------------------------
// Efficiency check

struct EfficiencyRow {
    double n = 0.0;
    double scaled_mse = 0.0; // n^(2/(2k+1)) * MSE
    double scaled_mse_se = 0.0;
    double ratio = 0.0; // scaled_mse / E||zeta||^2
    double ratio_se = 0.0;
};

struct EfficiencyReport {
    std::vector<EfficiencyRow> rows;
    EfficiencyBound bound;
    StudyReport study;
};

/// Compares n^(2/(2k+1)) MSE of the Bayes estimator against the limit
/// constant E||zeta||^2 across n, with joint Monte Carlo errors.
inline EfficiencyReport efficiency_check(const Scenario& base, const RateStudyConfig& cfg,
                                         std::size_t field_reps, int field_resolution,
                                         std::uint64_t seed) {
    EfficiencyReport report;
    report.study = rate_study(base, cfg, seed);
    report.bound = efficiency_bound(base, field_reps, field_resolution, derive_seed(seed, 77));
    const double rate = 2.0 / (2.0 * base.kappa + 1.0);
    for (const auto& row : report.study.rows) {
        EfficiencyRow er;
        er.n = row.n;
        const double scale = std::pow(row.n, rate);
        er.scaled_mse = scale * row.mse_bayes;
        er.scaled_mse_se = scale * row.mse_bayes_se;
        er.ratio = er.scaled_mse / report.bound.e_norm2;
        const double rel = std::hypot(er.scaled_mse_se / er.scaled_mse,
                                      report.bound.e_norm2_se / report.bound.e_norm2);
        er.ratio_se = er.ratio * rel;
        report.rows.push_back(er);
    }
    return report;
}

inline nlohmann::json to_json(const EfficiencyReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"scaled_mse", row.scaled_mse},
                        {"scaled_mse_se", row.scaled_mse_se},
                        {"ratio", row.ratio},
                        {"ratio_se", row.ratio_se}});
    return {{"rows", rows},
            {"e_norm2", r.bound.e_norm2},
            {"e_norm2_se", r.bound.e_norm2_se},
            {"e_norm1", r.bound.e_norm1},
            {"e_norm1_se", r.bound.e_norm1_se},
            {"field_half_width", r.bound.half_width},
            {"field_resolution", r.bound.resolution},
            {"field_reps", r.bound.reps},
            {"boundary_warnings", r.bound.boundary_warnings},
            {"study", to_json(r.study)}};
}

} // namespace cusploc
