#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cusploc {

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1].
// Column layout: abscissa, Gauss weight (0 for Kronrod-only nodes), Kronrod weight.
inline constexpr double kGk15[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0,               0.204432940075298},
    {0.586087235467691, 0.0,               0.169004726639267},
    {0.864864423359769, 0.0,               0.104790010322250},
    {0.991455371120813, 0.0,               0.022935322010529},
};

template <class F>
inline double gk15_panel(const F& f, double a, double b, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double y0 = f(c);
    double g7 = kGk15[0][1] * y0;
    double k15 = kGk15[0][2] * y0;
    for (int i = 1; i < 8; ++i) {
        const double dx = h * kGk15[i][0];
        const double yi = f(c + dx) + f(c - dx);
        g7 += kGk15[i][1] * yi;
        k15 += kGk15[i][2] * yi;
    }
    g7 *= h;
    k15 *= h;
    err = std::abs(k15 - g7);
    return k15;
}

template <class F>
inline double adapt_segment(const F& f, double a, double b, double abs_tol, int depth,
                            int max_depth) {
    double err = 0.0;
    const double val = gk15_panel(f, a, b, err);
    if (err <= abs_tol || depth >= max_depth) return val;
    const double m = 0.5 * (a + b);
    return adapt_segment(f, a, m, 0.5 * abs_tol, depth + 1, max_depth) +
           adapt_segment(f, m, b, 0.5 * abs_tol, depth + 1, max_depth);
}

} // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b].
///
/// `breakpoints` are interior locations (kinks, integrable singularities) that
/// become hard panel boundaries; the G7/K15 rule never evaluates segment
/// endpoints, so |s|^kappa-type endpoint singularities are integrated without
/// special casing. Panels are bisected until the local error estimate meets a
/// proportional share of rel_tol * |integral| or `max_depth` levels are spent.
template <class F>
inline double integrate(const F& f, double a, double b, double rel_tol = 1e-10,
                        std::vector<double> breakpoints = {}, int max_depth = 60) {
    if (a == b) return 0.0;
    const double sign = (a < b) ? 1.0 : -1.0;
    if (a > b) std::swap(a, b);

    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    std::vector<double> edges;
    for (double t : breakpoints)
        if (t >= a && t <= b && (edges.empty() || t > edges.back())) edges.push_back(t);

    // first pass: rough magnitude to convert the relative tolerance into an
    // absolute per-segment budget
    double rough = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        double e = 0.0;
        rough += std::abs(detail::gk15_panel(f, edges[i], edges[i + 1], e));
    }
    const double abs_tol = std::max(rel_tol * rough, 1e-300);

    double total = 0.0;
    const auto nseg = static_cast<double>(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        total += detail::adapt_segment(f, edges[i], edges[i + 1], abs_tol / nseg, 0, max_depth);
    return sign * total;
}

} // namespace cusploc
