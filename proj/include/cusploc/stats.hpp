#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace cusploc {

/// Pairwise (cascade) summation in fixed index order; the result does not
/// depend on how the values were produced, only on their order.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
    return pairwise_sum(d) / static_cast<double>(v.size() - 1);
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

/// Standard error of the sample mean.
inline double standard_error(std::span<const double> v) {
    return v.size() < 2 ? 0.0 : stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0; // sup |F_hat - F|
    double p_value = 1.0;
};

/// One-sample two-sided KS test of `samples` against the CDF values
/// `cdf(sample)`. Uses the Stephens finite-sample correction for the p-value.
template <class Cdf>
inline KsResult ks_test(std::vector<double> samples, const Cdf& cdf) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, f - lo, hi - f});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    return {d, kolmogorov_sf(lambda)};
}

/// Chi-square upper tail probability via the Wilson-Hilferty cube-root
/// normal approximation. Adequate for goodness-of-fit screening.
inline double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    const double z = (std::cbrt(x / dof) - (1.0 - 2.0 / (9.0 * dof))) /
                     std::sqrt(2.0 / (9.0 * dof));
    return 1.0 - normal_cdf(z);
}

namespace detail {
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}
} // namespace detail

struct SpearmanResult {
    double rho = 0.0;
    double p_increasing = 1.0; // one-sided p-value against an increasing trend
};

/// Spearman rank correlation with a normal null approximation
/// (rho * sqrt(n-1) ~ N(0,1) under independence).
inline SpearmanResult spearman_trend(std::span<const double> x, std::span<const double> y) {
    const auto rx = detail::ranks(x);
    const auto ry = detail::ranks(y);
    const auto n = static_cast<double>(x.size());
    if (n < 3) return {};
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return {};
    const double rho = sxy / std::sqrt(sxx * syy);
    return {rho, 1.0 - normal_cdf(rho * std::sqrt(n - 1.0))};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = a + b x with the usual residual-based slope SE.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            ss += r * r;
        }
        f.slope_se = std::sqrt(ss / (n - 2.0) / sxx);
    }
    return f;
}

} // namespace cusploc
