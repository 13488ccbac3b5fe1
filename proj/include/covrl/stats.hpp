#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace covrl {

// Linear-interpolation percentile (the numpy default), q in [0,1].
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("least_squares: need >= 2 matched points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("least_squares: degenerate x values");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    const double ss_tot = syy - sy * sy / n;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += e * e;
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

// One-sided sign-test p-value: P[Bin(n, 1/2) >= k] with ties dropped by the
// caller. Exact summation; n is small here.
inline double sign_test_p_value(int k, int n) {
    if (n <= 0) return 1.0;
    if (k < 0 || k > n) throw std::invalid_argument("sign_test_p_value: bad counts");
    double p = 0.0;
    for (int i = k; i <= n; ++i) {
        double log_binom = 0.0;
        for (int j = 0; j < i; ++j)
            log_binom += std::log(static_cast<double>(n - j)) - std::log(static_cast<double>(j + 1));
        p += std::exp(log_binom - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

} // namespace covrl
