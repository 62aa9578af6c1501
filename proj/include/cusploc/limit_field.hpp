#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusploc/errors.hpp"
#include "cusploc/quadrature.hpp"
#include "cusploc/rng.hpp"
#include "cusploc/scenario.hpp"
#include "cusploc/stats.hpp"

namespace cusploc {

// ---------------------------------------------------------------------------
// Rate constants R_{j,-}, R_{j,+}

/// Kernel of the limit Gaussian process: f_h(s) = (s+h)_+^kappa - (s)_+^kappa.
/// J_j(u) = gamma_j int f_{<m_j,u>}(s) dW_j(s); the two one-sided displays
/// (arrival earlier / later) are this single kernel restricted to its support.
inline double limit_kernel(double s, double h, double kappa) {
    const double a = s + h > 0.0 ? std::pow(s + h, kappa) : 0.0;
    const double b = s > 0.0 ? std::pow(s, kappa) : 0.0;
    return a - b;
}

struct RateConstants {
    double r_minus = 0.0;
    double r_plus = 0.0;
    double gamma = 1.0;
    double kappa = 0.0;
};

namespace detail {
/// Analytic continuation of int_M^inf kappa^2 s^(2 kappa - 2) ds, the leading
/// tail of the squared kernel for |h| = 1.
inline double kernel_tail(double kappa, double M) {
    return kappa * kappa * std::pow(M, 2.0 * kappa - 1.0) / (1.0 - 2.0 * kappa);
}
} // namespace detail

/// R_{j,-} and R_{j,+} for a given gamma and kappa: truncated quadrature of
/// the squared kernel on [0, M] (resp. [-1, M]) plus the analytic tail,
/// with M = 1e4. Relative accuracy ~1e-8. Both constants coincide (the kernel
/// has stationary increments in h) but are integrated independently as defined.
inline RateConstants rate_constants(double gamma, double kappa, double M = 1e4) {
    if (!(kappa > 0.0 && kappa < 0.5))
        throw domain_error("rate_constants: kappa outside (0, 1/2), integrals diverge");
    if (gamma < 0.0) throw invalid_parameter_error("rate_constants: gamma must be >= 0");
    RateConstants rc;
    rc.gamma = gamma;
    rc.kappa = kappa;
    if (gamma == 0.0) return rc;

    auto sq_minus = [kappa](double s) {
        const double v = limit_kernel(s, -1.0, kappa);
        return v * v;
    };
    auto sq_plus = [kappa](double s) {
        const double v = limit_kernel(s, 1.0, kappa);
        return v * v;
    };
    const double tail = detail::kernel_tail(kappa, M);
    const double g2 = gamma * gamma;
    rc.r_minus = g2 * (integrate(sq_minus, 0.0, M, 1e-9, {1.0}) + tail);
    rc.r_plus = g2 * (integrate(sq_plus, -1.0, M, 1e-9, {0.0}) + tail);
    return rc;
}

/// Branch selector R_j(u): R_minus on {<m_j,u> < 0}, R_plus otherwise.
inline double branch(const RateConstants& rc, double h) {
    return h < 0.0 ? rc.r_minus : rc.r_plus;
}

// ---------------------------------------------------------------------------
// Covariance of the limit Gaussian process

/// Cov(J_j(u1), J_j(u2)) / gamma_j^2 where h_i = <m_j, u_i>, by direct
/// quadrature of the kernel product with the truncation-plus-tail scheme used
/// for the rate constants (truncation scales with max(1, |h1|, |h2|)).
inline double j_covariance(double h1, double h2, double kappa) {
    if (!(kappa > 0.0 && kappa < 0.5))
        throw domain_error("j_covariance: kappa outside (0, 1/2)");
    if (h1 == 0.0 || h2 == 0.0) return 0.0; // f_0 vanishes identically
    const double M = 1e4 * std::max({1.0, std::abs(h1), std::abs(h2)});
    const double lo = std::max(std::min(0.0, -h1), std::min(0.0, -h2));
    auto prod = [=](double s) {
        return limit_kernel(s, h1, kappa) * limit_kernel(s, h2, kappa);
    };
    const double tail =
        kappa * kappa * h1 * h2 * std::pow(M, 2.0 * kappa - 1.0) / (1.0 - 2.0 * kappa);
    return integrate(prod, lo, M, 1e-9, {-h1, -h2, 0.0}) + tail;
}

/// Same covariance through the stationary-increment (polarization) identity
///   Cov(h1, h2) = (V(h1) + V(h2) - V(h1 - h2)) / 2,
///   V(h) = |h|^(2 kappa + 1) R_sign(h)(gamma = 1),
/// which costs O(1) once the rate constants are known. Agrees with
/// j_covariance to quadrature accuracy; used to assemble large covariance
/// matrices where per-entry quadrature would be prohibitive.
inline double j_covariance_fast(double h1, double h2, const RateConstants& unit_rc) {
    const double p = 2.0 * unit_rc.kappa + 1.0;
    auto V = [&](double h) { return std::pow(std::abs(h), p) * branch(unit_rc, h); };
    return 0.5 * (V(h1) + V(h2) - V(h1 - h2));
}

// ---------------------------------------------------------------------------
// Field grid

/// Inclusive lattice over a rectangle; node (i, j) at linear index i * ny + j.
struct FieldGrid {
    Rect rect;
    int nx = 0;
    int ny = 0;

    static FieldGrid square(double half_width, int resolution) {
        return {{-half_width, half_width, -half_width, half_width}, resolution, resolution};
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    Vec2 node(std::size_t idx) const {
        const auto i = static_cast<int>(idx) / ny;
        const auto j = static_cast<int>(idx) % ny;
        return {coord(rect.xmin, rect.xmax, i, nx), coord(rect.ymin, rect.ymax, j, ny)};
    }
    /// Trapezoid weight (cell areas folded in; constant factors cancel in ratios).
    double weight(std::size_t idx) const {
        const auto i = static_cast<int>(idx) / ny;
        const auto j = static_cast<int>(idx) % ny;
        const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
        const double wy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
        return wx * wy;
    }
    bool is_boundary(std::size_t idx) const {
        const auto i = static_cast<int>(idx) / ny;
        const auto j = static_cast<int>(idx) % ny;
        return i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
    }

private:
    // endpoint-exact linear interpolation; odd resolutions on symmetric
    // rectangles hit u = 0 exactly
    static double coord(double lo, double hi, int i, int count) {
        const auto m = static_cast<double>(count - 1);
        return (lo * (m - static_cast<double>(i)) + hi * static_cast<double>(i)) / m;
    }
};

/// One sampled realization of the limit field on a grid.
struct LimitFieldRealization {
    FieldGrid grid;
    std::vector<double> log_z;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Field sampler

/// Samples log Z(u) = sum_j [J_j(u) - |<m_j,u>|^(2k+1) R_j(u) / 2] on a grid.
///
/// J_j depends on u only through the projection h = <m_j, u>, so grid nodes
/// are collapsed to the distinct projections per detector and one Gaussian
/// vector per (detector, replicate) is drawn through a Cholesky factor of the
/// projected covariance. Zero projections map to J = 0 identically.
class LimitFieldSampler {
public:
    LimitFieldSampler(const LocalGeometry& geometry, double kappa, const FieldGrid& grid)
        : grid_(grid), kappa_(kappa) {
        if (grid.nx < 2 || grid.ny < 2)
            throw configuration_error("LimitFieldSampler: grid resolution must be >= 2");
        const RateConstants unit = rate_constants(1.0, kappa);
        const std::size_t nodes = grid.size();
        dets_.reserve(geometry.per_detector.size());
        for (std::size_t j = 0; j < geometry.per_detector.size(); ++j) {
            const auto& e = geometry.per_detector[j];
            DetectorPart part;
            part.gamma2 = e.gamma * e.gamma;

            std::vector<double> h(nodes);
            double scale = 0.0;
            for (std::size_t idx = 0; idx < nodes; ++idx) {
                h[idx] = dot(e.m, grid.node(idx));
                scale = std::max(scale, std::abs(h[idx]));
            }
            const double tol = 1e-9 * std::max(scale, 1e-300);

            std::vector<std::size_t> order(nodes);
            for (std::size_t i = 0; i < nodes; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });

            part.node_to_cluster.resize(nodes);
            std::vector<double> reps; // representative projection per cluster
            for (std::size_t i = 0; i < nodes; ++i) {
                if (reps.empty() || h[order[i]] - reps.back() > tol)
                    reps.push_back(h[order[i]]);
                part.node_to_cluster[order[i]] = static_cast<int>(reps.size()) - 1;
            }

            // separate the (near-)zero cluster: J(0) = 0 by construction
            part.cluster_active.resize(reps.size());
            std::vector<double> active;
            for (std::size_t c = 0; c < reps.size(); ++c) {
                if (std::abs(reps[c]) <= tol) {
                    part.cluster_active[c] = -1;
                } else {
                    part.cluster_active[c] = static_cast<int>(active.size());
                    active.push_back(reps[c]);
                }
            }
            part.drift.resize(reps.size());
            const double p = 2.0 * kappa + 1.0;
            for (std::size_t c = 0; c < reps.size(); ++c) {
                const double hc = part.cluster_active[c] < 0 ? 0.0 : reps[c];
                part.drift[c] =
                    0.5 * part.gamma2 * std::pow(std::abs(hc), p) * branch(unit, hc);
            }

            const auto P = static_cast<Eigen::Index>(active.size());
            if (P > 3000)
                throw configuration_error(
                    "LimitFieldSampler: detector " + std::to_string(j) + " induces " +
                    std::to_string(P) +
                    " distinct projections; coarsen the grid (cost grows cubically)");
            if (P > 0) {
                Eigen::MatrixXd C(P, P);
                for (Eigen::Index a = 0; a < P; ++a)
                    for (Eigen::Index b = 0; b <= a; ++b) {
                        const double v =
                            part.gamma2 * j_covariance_fast(active[a], active[b], unit);
                        C(a, b) = v;
                        C(b, a) = v;
                    }
                Eigen::LLT<Eigen::MatrixXd> llt(C);
                if (llt.info() != Eigen::Success) {
                    const double jitter = 1e-10 * C.diagonal().maxCoeff();
                    C.diagonal().array() += jitter;
                    llt.compute(C);
                    if (llt.info() != Eigen::Success)
                        throw conditioning_error(
                            "LimitFieldSampler: covariance factorization failed for detector " +
                            std::to_string(j));
                }
                part.chol = llt.matrixL();
            }
            dets_.push_back(std::move(part));
        }
    }

    const FieldGrid& grid() const { return grid_; }
    double kappa() const { return kappa_; }

    /// Fill log Z values for one replicate; deterministic in (seed, replicate).
    void realize(std::uint64_t seed, std::uint64_t replicate, std::vector<double>& log_z) const {
        log_z.assign(grid_.size(), 0.0);
        Eigen::VectorXd z, jvec;
        for (std::size_t j = 0; j < dets_.size(); ++j) {
            const DetectorPart& part = dets_[j];
            const auto P = part.chol.rows();
            Rng rng(derive_seed(seed, replicate, j));
            z.resize(P);
            for (Eigen::Index i = 0; i < P; ++i) z(i) = rng.normal();
            jvec = part.chol.triangularView<Eigen::Lower>() * z;
            for (std::size_t idx = 0; idx < log_z.size(); ++idx) {
                const int c = part.node_to_cluster[idx];
                const int a = part.cluster_active[c];
                log_z[idx] += (a < 0 ? 0.0 : jvec(a)) - part.drift[c];
            }
        }
    }

    /// Cluster index of a node for one detector (nodes with equal projection
    /// share a cluster and therefore receive identical J samples).
    int cluster_of(std::size_t detector, std::size_t node) const {
        return dets_[detector].node_to_cluster[node];
    }

private:
    struct DetectorPart {
        double gamma2 = 0.0;
        std::vector<int> node_to_cluster;
        std::vector<int> cluster_active; // -1 for the zero-projection cluster
        std::vector<double> drift;       // per cluster
        Eigen::MatrixXd chol;            // lower factor over active clusters
    };
    FieldGrid grid_;
    double kappa_;
    std::vector<DetectorPart> dets_;
};

inline std::vector<LimitFieldRealization> sample_field(const LocalGeometry& geometry,
                                                       double kappa, const FieldGrid& grid,
                                                       std::size_t reps, std::uint64_t seed) {
    LimitFieldSampler sampler(geometry, kappa, grid);
    std::vector<LimitFieldRealization> out(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        out[r].grid = grid;
        out[r].seed = seed;
        sampler.realize(seed, r, out[r].log_z);
    }
    return out;
}

// ---------------------------------------------------------------------------
// zeta samples and the efficiency constant

struct ZetaSample {
    Vec2 zeta;
    double boundary_mass = 0.0; // posterior-mass fraction on the grid edge
};

/// nu * int u Z(u) du / int Z(u) du by trapezoid quadrature in log-sum-exp
/// form over one realization.
inline ZetaSample zeta_from_log_field(const FieldGrid& grid, std::span<const double> log_z,
                                      double nu) {
    double amax = -1e300;
    for (std::size_t i = 0; i < log_z.size(); ++i) {
        const double a = log_z[i] + std::log(grid.weight(i));
        if (a > amax) amax = a;
    }
    double denom = 0.0, num_x = 0.0, num_y = 0.0, edge = 0.0;
    for (std::size_t i = 0; i < log_z.size(); ++i) {
        const double w = std::exp(log_z[i] + std::log(grid.weight(i)) - amax);
        const Vec2 u = grid.node(i);
        denom += w;
        num_x += w * u.x;
        num_y += w * u.y;
        if (grid.is_boundary(i)) edge += w;
    }
    return {{nu * num_x / denom, nu * num_y / denom}, edge / denom};
}

inline std::vector<ZetaSample> zeta_samples(const std::vector<LimitFieldRealization>& fields,
                                            double nu) {
    std::vector<ZetaSample> out;
    out.reserve(fields.size());
    for (const auto& f : fields) out.push_back(zeta_from_log_field(f.grid, f.log_z, nu));
    return out;
}

/// Monte Carlo moment E ||zeta||^p of a sample set.
inline double zeta_moment(const std::vector<ZetaSample>& samples, double p) {
    if (samples.empty()) return 0.0;
    std::vector<double> v(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) v[i] = std::pow(norm(samples[i].zeta), p);
    return mean(v);
}

struct EfficiencyBound {
    double e_norm1 = 0.0, e_norm1_se = 0.0; // E ||zeta||
    double e_norm2 = 0.0, e_norm2_se = 0.0; // E ||zeta||^2
    double half_width = 0.0;
    int resolution = 0;
    std::size_t reps = 0;
    std::size_t boundary_warnings = 0; // realizations with > 1e-3 edge mass
    double pilot_e_norm2 = 0.0;
};

/// Monte Carlo estimate of the efficiency constant E ||zeta||^p, p in {1, 2},
/// for the geometry of a scenario at its source point. A 41x41 pilot pass
/// sizes the grid; the main pass uses a square of half-width
/// 6 sqrt(pilot E ||zeta||^2) at the requested resolution.
inline EfficiencyBound efficiency_bound(const Scenario& sc, std::size_t reps, int resolution,
                                        std::uint64_t seed) {
    const LocalGeometry geom = local_geometry(sc, sc.source);
    const RateConstants unit = rate_constants(1.0, sc.kappa);
    const double p = 2.0 * sc.kappa + 1.0;

    // pilot half-width from the drift scale: the smallest directional drift
    // reaches ~12 at the grid edge, so exp(log Z) is negligible there
    double qmin = 1e300;
    for (int a = 0; a < 128; ++a) {
        const double ang = 3.14159265358979323846 * a / 128.0;
        const Vec2 e{std::cos(ang), std::sin(ang)};
        double q = 0.0;
        for (const auto& d : geom.per_detector) {
            const double h = dot(d.m, e);
            q += d.gamma * d.gamma * std::pow(std::abs(h), p) * branch(unit, h);
        }
        qmin = std::min(qmin, q);
    }
    if (!(qmin > 0.0))
        throw degenerate_geometry_error("efficiency_bound: degenerate direction set");
    const double pilot_hw = std::pow(24.0 / qmin, 1.0 / p);

    EfficiencyBound out;
    out.reps = reps;
    out.resolution = resolution;

    const std::size_t pilot_reps = std::min<std::size_t>(500, std::max<std::size_t>(reps, 50));
    {
        LimitFieldSampler sampler(geom, sc.kappa, FieldGrid::square(pilot_hw, 41));
        std::vector<double> log_z, n2(pilot_reps);
        for (std::size_t r = 0; r < pilot_reps; ++r) {
            sampler.realize(derive_seed(seed, 1), r, log_z);
            const auto zs = zeta_from_log_field(sampler.grid(), log_z, sc.nu);
            const double nz = norm(zs.zeta) / sc.nu; // grid sizing is in u units
            n2[r] = nz * nz;
        }
        out.pilot_e_norm2 = mean(n2);
    }

    out.half_width = 6.0 * std::sqrt(out.pilot_e_norm2);
    LimitFieldSampler sampler(geom, sc.kappa, FieldGrid::square(out.half_width, resolution));
    std::vector<double> log_z, n1(reps), n2(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        sampler.realize(derive_seed(seed, 2), r, log_z);
        const auto zs = zeta_from_log_field(sampler.grid(), log_z, sc.nu);
        n1[r] = norm(zs.zeta);
        n2[r] = n1[r] * n1[r];
        if (zs.boundary_mass > 1e-3) ++out.boundary_warnings;
    }
    out.e_norm1 = mean(n1);
    out.e_norm1_se = standard_error(n1);
    out.e_norm2 = mean(n2);
    out.e_norm2_se = standard_error(n2);
    return out;
}

} // namespace cusploc
