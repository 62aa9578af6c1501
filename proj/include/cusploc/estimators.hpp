#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusploc/errors.hpp"
#include "cusploc/likelihood.hpp"
#include "cusploc/parallel.hpp"
#include "cusploc/stats.hpp"

namespace cusploc {

/// Rectangular evaluation grid with iterative refinement. Each level re-grids
/// the sub-rectangle holding all but 1e-6 of the posterior mass (plus one cell
/// of margin), so the final level resolves the posterior even when it is far
/// narrower than the domain.
struct GridSpec {
    Rect rect;
    int nx = 33;
    int ny = 33;
    int levels = 4;

    static GridSpec for_domain(const Rect& domain, int resolution = 33, int levels = 4) {
        return {domain, resolution, resolution, levels};
    }
};

/// Log-posterior surface on one grid level (prior folded in, trapezoid
/// weights applied, normalizer in log-sum-exp form).
struct PosteriorSurface {
    GridSpec spec;                  // rect describes this level, levels unused
    std::vector<double> log_weight; // log prior + log likelihood + log w_quad
    double log_normalizer = 0.0;

    std::size_t size() const { return log_weight.size(); }
    Vec2 node(std::size_t idx) const {
        const auto i = static_cast<int>(idx) / spec.ny;
        const auto j = static_cast<int>(idx) % spec.ny;
        return {coord(spec.rect.xmin, spec.rect.xmax, i, spec.nx),
                coord(spec.rect.ymin, spec.rect.ymax, j, spec.ny)};
    }
    double normalized_weight(std::size_t idx) const {
        return std::exp(log_weight[idx] - log_normalizer);
    }

    static double coord(double lo, double hi, int i, int count) {
        const auto m = static_cast<double>(count - 1);
        return (lo * (m - static_cast<double>(i)) + hi * static_cast<double>(i)) / m;
    }
};

struct EstimateDiagnostics {
    int levels_used = 0;
    double posterior_spread = 0.0; // sqrt(tr posterior covariance), bayes only
    bool boundary_warning = false; // posterior mass piled on the domain edge
    bool multimodal = false;       // mle only: distinct maxima within tie tolerance
    Rect final_rect;
};

struct EstimateResult {
    Vec2 theta_hat;
    std::string method;
    EstimateDiagnostics diagnostics;
};

namespace detail {

/// Evaluate the log-posterior surface over one rectangle. The prior is
/// re-based by its grid maximum, so multiplying the prior by any positive
/// constant leaves every downstream quantity bit-identical.
inline PosteriorSurface evaluate_surface(const ObservationSet& obs, const Prior& prior,
                                         const Rect& rect, int nx, int ny, int threads) {
    PosteriorSurface s;
    s.spec = {rect, nx, ny, 1};
    const std::size_t count = static_cast<std::size_t>(nx) * ny;
    s.log_weight.resize(count);

    std::vector<double> log_prior(count);
    parallel_for(count, threads, [&](std::size_t idx) {
        const Vec2 p = s.node(idx);
        log_prior[idx] = prior.log_density(p);
        s.log_weight[idx] = log_likelihood(obs, p).value;
    });
    const double prior_max = *std::max_element(log_prior.begin(), log_prior.end());
    for (std::size_t idx = 0; idx < count; ++idx) {
        const auto i = static_cast<int>(idx) / ny;
        const auto j = static_cast<int>(idx) % ny;
        const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
        const double wy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
        s.log_weight[idx] += (log_prior[idx] - prior_max) + std::log(wx * wy);
    }

    const double amax = *std::max_element(s.log_weight.begin(), s.log_weight.end());
    std::vector<double> w(count);
    for (std::size_t i = 0; i < count; ++i) w[i] = std::exp(s.log_weight[i] - amax);
    s.log_normalizer = amax + std::log(pairwise_sum(w));
    return s;
}

/// Smallest node set holding all but `tail_mass` of the posterior, returned
/// as its bounding rectangle inflated by one cell and clipped to `bounds`.
inline Rect mass_region(const PosteriorSurface& s, double tail_mass, const Rect& bounds) {
    const std::size_t count = s.size();
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s.log_weight[a] > s.log_weight[b];
    });
    double cum = 0.0;
    Rect box{1e300, -1e300, 1e300, -1e300};
    for (std::size_t i : order) {
        const Vec2 p = s.node(i);
        box.xmin = std::min(box.xmin, p.x);
        box.xmax = std::max(box.xmax, p.x);
        box.ymin = std::min(box.ymin, p.y);
        box.ymax = std::max(box.ymax, p.y);
        cum += s.normalized_weight(i);
        if (cum >= 1.0 - tail_mass) break;
    }
    const double hx = (s.spec.rect.xmax - s.spec.rect.xmin) / (s.spec.nx - 1);
    const double hy = (s.spec.rect.ymax - s.spec.rect.ymin) / (s.spec.ny - 1);
    box = box.inflated(hx, hy);
    return {std::max(box.xmin, bounds.xmin), std::min(box.xmax, bounds.xmax),
            std::max(box.ymin, bounds.ymin), std::min(box.ymax, bounds.ymax)};
}

inline double boundary_mass(const PosteriorSurface& s) {
    double edge = 0.0;
    for (std::size_t idx = 0; idx < s.size(); ++idx) {
        const auto i = static_cast<int>(idx) / s.spec.ny;
        const auto j = static_cast<int>(idx) % s.spec.ny;
        if (i == 0 || i == s.spec.nx - 1 || j == 0 || j == s.spec.ny - 1)
            edge += s.normalized_weight(idx);
    }
    return edge;
}

} // namespace detail

/// Bayes estimator: posterior mean over the domain under the scenario prior,
/// by trapezoid quadrature on the refined grid.
inline EstimateResult bayes_estimate(const ObservationSet& obs, const Prior& prior,
                                     GridSpec grid, int threads = 1) {
    if (grid.nx < 2 || grid.ny < 2 || grid.levels < 1)
        throw configuration_error("bayes_estimate: need nx, ny >= 2 and levels >= 1");
    const Rect bounds = grid.rect;
    Rect rect = grid.rect;
    EstimateResult res;
    res.method = "bayes";

    Vec2 mean_theta;
    for (int level = 0; level < grid.levels; ++level) {
        const PosteriorSurface s =
            detail::evaluate_surface(obs, prior, rect, grid.nx, grid.ny, threads);
        if (level == 0) res.diagnostics.boundary_warning = detail::boundary_mass(s) > 1e-3;

        const std::size_t count = s.size();
        std::vector<double> w(count), wx(count), wy(count);
        for (std::size_t i = 0; i < count; ++i) {
            w[i] = s.normalized_weight(i);
            const Vec2 p = s.node(i);
            wx[i] = w[i] * p.x;
            wy[i] = w[i] * p.y;
        }
        const double total = pairwise_sum(w);
        mean_theta = {pairwise_sum(wx) / total, pairwise_sum(wy) / total};
        res.diagnostics.levels_used = level + 1;
        res.diagnostics.final_rect = rect;

        if (level + 1 == grid.levels) {
            std::vector<double> vxx(count), vyy(count);
            for (std::size_t i = 0; i < count; ++i) {
                const Vec2 p = s.node(i);
                vxx[i] = w[i] * (p.x - mean_theta.x) * (p.x - mean_theta.x);
                vyy[i] = w[i] * (p.y - mean_theta.y) * (p.y - mean_theta.y);
            }
            res.diagnostics.posterior_spread =
                std::sqrt((pairwise_sum(vxx) + pairwise_sum(vyy)) / total);
            break;
        }
        const Rect next = detail::mass_region(s, 1e-6, bounds);
        if (next.xmin == rect.xmin && next.xmax == rect.xmax && next.ymin == rect.ymin &&
            next.ymax == rect.ymax)
            break; // no shrink; finishing early changes nothing
        rect = next;
    }
    res.theta_hat = mean_theta;
    return res;
}

/// Grid maximum-likelihood estimate (no derivatives; the cusp surface is not
/// differentiable along arrival-time crossings). Ties within 1e-9 of the
/// maximum are broken toward the smallest (x, y) and flagged as multimodal
/// when they span distinct locations.
inline EstimateResult mle_estimate(const ObservationSet& obs, GridSpec grid, int threads = 1) {
    if (grid.nx < 1 || grid.ny < 1 || grid.levels < 1)
        throw configuration_error("mle_estimate: need nx, ny >= 1 and levels >= 1");
    const Prior uniform{}; // refinement region tracking only
    const Rect bounds = grid.rect;
    Rect rect = grid.rect;
    EstimateResult res;
    res.method = "mle";

    for (int level = 0; level < grid.levels; ++level) {
        const int nx = std::max(grid.nx, 2), ny = std::max(grid.ny, 2);
        if (grid.nx == 1 && grid.ny == 1) {
            // single-node grid: the estimate is that node
            res.theta_hat = rect.center();
            res.diagnostics.levels_used = level + 1;
            res.diagnostics.final_rect = rect;
            return res;
        }
        const PosteriorSurface s = detail::evaluate_surface(obs, uniform, rect, nx, ny, threads);

        // strip quadrature weights: argmax works on raw log-likelihood
        std::vector<double> log_lik(s.size());
        for (std::size_t idx = 0; idx < s.size(); ++idx) {
            const auto i = static_cast<int>(idx) / ny;
            const auto j = static_cast<int>(idx) % ny;
            const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
            const double wy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
            log_lik[idx] = s.log_weight[idx] - std::log(wx * wy);
        }
        const double best = *std::max_element(log_lik.begin(), log_lik.end());
        Vec2 arg{1e300, 1e300};
        bool multimodal = false;
        for (std::size_t idx = 0; idx < s.size(); ++idx) {
            if (log_lik[idx] >= best - 1e-9) {
                const Vec2 p = s.node(idx);
                if (p.x < arg.x || (p.x == arg.x && p.y < arg.y)) {
                    if (arg.x < 1e300 && (p.x != arg.x || p.y != arg.y)) multimodal = true;
                    arg = p;
                } else if (p.x != arg.x || p.y != arg.y) {
                    multimodal = true;
                }
            }
        }
        res.theta_hat = arg;
        res.diagnostics.multimodal = multimodal;
        res.diagnostics.levels_used = level + 1;
        res.diagnostics.final_rect = rect;
        if (level + 1 == grid.levels) break;
        const Rect next = detail::mass_region(s, 1e-6, bounds);
        if (next.xmin == rect.xmin && next.xmax == rect.xmax && next.ymin == rect.ymin &&
            next.ymax == rect.ymax)
            break;
        rect = next;
    }
    return res;
}

/// One-dimensional Bayes posterior mean of the arrival time tau_j over the
/// window [alpha_j, beta_j] under a uniform prior, with the same mass-region
/// refinement as the planar estimator.
inline double arrival_time_estimate(const EventRecord& rec, const Scenario& sc, std::size_t j,
                                    int resolution = 65, int levels = 4) {
    auto [alpha, beta] = sc.arrival_window(j);
    if (!(alpha < beta))
        throw configuration_error("arrival_time_estimate: empty arrival window");

    double lo = alpha, hi = beta;
    double mean_tau = 0.5 * (lo + hi);
    for (int level = 0; level < levels; ++level) {
        const auto m = static_cast<double>(resolution - 1);
        std::vector<double> a(resolution), tau(resolution);
        for (int i = 0; i < resolution; ++i) {
            tau[i] = (lo * (m - i) + hi * i) / m;
            const double w = (i == 0 || i == resolution - 1) ? 0.5 : 1.0;
            a[i] = detector_log_likelihood(rec, sc, j, tau[i]) + std::log(w);
        }
        const double amax = *std::max_element(a.begin(), a.end());
        std::vector<double> w(resolution), wt(resolution);
        for (int i = 0; i < resolution; ++i) {
            w[i] = std::exp(a[i] - amax);
            wt[i] = w[i] * tau[i];
        }
        const double total = pairwise_sum(w);
        mean_tau = pairwise_sum(wt) / total;
        if (level + 1 == levels) break;

        std::vector<int> order(resolution);
        for (int i = 0; i < resolution; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int x, int y) { return w[x] > w[y]; });
        double cum = 0.0, bmin = 1e300, bmax = -1e300;
        for (int i : order) {
            bmin = std::min(bmin, tau[i]);
            bmax = std::max(bmax, tau[i]);
            cum += w[i] / total;
            if (cum >= 1.0 - 1e-6) break;
        }
        const double h = (hi - lo) / m;
        const double nlo = std::max(alpha, bmin - h), nhi = std::min(beta, bmax + h);
        if (nlo == lo && nhi == hi) break;
        lo = nlo;
        hi = nhi;
    }
    return mean_tau;
}

/// Two-step location estimate from per-detector arrival times: linearized
/// multilateration (pairwise-differenced circle equations solved by least
/// squares) followed by Gauss-Newton on sum_j (||d_j - theta|| - nu tau_j)^2.
inline EstimateResult two_step_lse(const std::vector<double>& taus, const Scenario& sc) {
    const std::size_t k = sc.k();
    if (taus.size() != k)
        throw configuration_error("two_step_lse: one arrival time per detector required");
    if (k < 3) throw degenerate_geometry_error("two_step_lse: need at least 3 detectors");
    std::vector<Vec2> pts;
    for (const auto& d : sc.detectors) pts.push_back(d.position);
    if (all_collinear(pts))
        throw degenerate_geometry_error(
            "two_step_lse: collinear detectors admit mirror-symmetric sources");

    const double nu2 = sc.nu * sc.nu;
    Eigen::MatrixXd A(k - 1, 2);
    Eigen::VectorXd b(k - 1);
    const Vec2 d0 = pts[0];
    const double c0 = d0.x * d0.x + d0.y * d0.y - nu2 * taus[0] * taus[0];
    for (std::size_t j = 1; j < k; ++j) {
        A(j - 1, 0) = 2.0 * (pts[j].x - d0.x);
        A(j - 1, 1) = 2.0 * (pts[j].y - d0.y);
        b(j - 1) =
            (pts[j].x * pts[j].x + pts[j].y * pts[j].y - nu2 * taus[j] * taus[j]) - c0;
    }
    Eigen::Vector2d theta = A.colPivHouseholderQr().solve(b);

    // Gauss-Newton refinement of the nonlinear range residuals
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::MatrixXd J(k, 2);
        Eigen::VectorXd r(k);
        for (std::size_t j = 0; j < k; ++j) {
            const double dx = theta(0) - pts[j].x;
            const double dy = theta(1) - pts[j].y;
            const double rho = std::hypot(dx, dy);
            if (rho < 1e-14) {
                J(j, 0) = J(j, 1) = 0.0;
                r(j) = -sc.nu * taus[j];
                continue;
            }
            r(j) = rho - sc.nu * taus[j];
            J(j, 0) = dx / rho;
            J(j, 1) = dy / rho;
        }
        const Eigen::Vector2d step = (J.transpose() * J).ldlt().solve(-J.transpose() * r);
        theta += step;
        if (step.norm() <= 1e-12 * (1.0 + theta.norm())) break;
    }

    EstimateResult res;
    res.method = "two_step";
    res.theta_hat = {theta(0), theta(1)};
    res.diagnostics.levels_used = 1;
    res.diagnostics.final_rect = sc.domain;
    return res;
}

/// Convenience wrapper: arrival-time estimates for every detector followed by
/// the least-squares localization.
inline EstimateResult two_step_estimate(const ObservationSet& obs, int resolution = 65,
                                        int levels = 4) {
    std::vector<double> taus(obs.scenario.k());
    for (std::size_t j = 0; j < obs.scenario.k(); ++j)
        taus[j] = arrival_time_estimate(obs.records[j], obs.scenario, j, resolution, levels);
    return two_step_lse(taus, obs.scenario);
}

inline nlohmann::json to_json(const EstimateResult& r) {
    return nlohmann::json{
        {"theta_hat", {{"x", r.theta_hat.x}, {"y", r.theta_hat.y}}},
        {"method", r.method},
        {"diagnostics",
         {{"levels_used", r.diagnostics.levels_used},
          {"posterior_spread", r.diagnostics.posterior_spread},
          {"boundary_warning", r.diagnostics.boundary_warning},
          {"multimodal", r.diagnostics.multimodal},
          {"final_rect",
           {{"xmin", r.diagnostics.final_rect.xmin},
            {"xmax", r.diagnostics.final_rect.xmax},
            {"ymin", r.diagnostics.final_rect.ymin},
            {"ymax", r.diagnostics.final_rect.ymax}}}}}};
}

} // namespace cusploc
