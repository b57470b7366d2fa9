#include "byzsim/numstats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "byzsim/aggregation.hpp"
#include "byzsim/errors.hpp"

namespace byzsim {

namespace {

// Rational approximations to erf/erfc on three intervals (Cody's scheme).
// Relative error is around 1e-16, far inside the 1e-7 budget.

constexpr double kErfA[5] = {
    3.16112374387056560e+00, 1.13864154151050156e+02, 3.77485237685302021e+02,
    3.20937758913846947e+03, 1.85777706184603153e-01};
constexpr double kErfB[4] = {
    2.36012909523441209e+01, 2.44024637934444173e+02, 1.28261652607737228e+03,
    2.84423683343917062e+03};

constexpr double kErfcC[9] = {
    5.64188496988670089e-01, 8.88314979438837594e+00, 6.61191906371416295e+01,
    2.98635138197400131e+02, 8.81952221241769090e+02, 1.71204761263407058e+03,
    2.05107837782607147e+03, 1.23033935479799725e+03, 2.15311535474403846e-08};
constexpr double kErfcD[8] = {
    1.57449261107098347e+01, 1.17693950891312499e+02, 5.37181101862009858e+02,
    1.62138957456669019e+03, 3.29079923573345963e+03, 4.36261909014324716e+03,
    3.43936767414372164e+03, 1.23033935480374942e+03};

constexpr double kErfcP[6] = {
    3.05326634961232344e-01, 3.60344899949804439e-01, 1.25781726111229246e-01,
    1.60837851487422766e-02, 6.58749161529837803e-04, 1.63153871373020978e-02};
constexpr double kErfcQ[5] = {
    2.56852019228982242e+00, 1.87295284992346047e+00, 5.27905102951428412e-01,
    6.05183413124413191e-02, 2.33520497626869185e-03};

constexpr double kInvSqrtPi = 5.6418958354775628695e-01;

// erf(x) for |x| <= 0.46875.
double erf_small(double x) {
    const double z = x * x;
    double num = kErfA[4] * z;
    double den = z;
    for (int i = 0; i < 3; ++i) {
        num = (num + kErfA[i]) * z;
        den = (den + kErfB[i]) * z;
    }
    return x * (num + kErfA[3]) / (den + kErfB[3]);
}

// erfc(y) for 0.46875 < y <= 4.
double erfc_mid(double y) {
    double num = kErfcC[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
        num = (num + kErfcC[i]) * y;
        den = (den + kErfcD[i]) * y;
    }
    return std::exp(-y * y) * (num + kErfcC[7]) / (den + kErfcD[7]);
}

// erfc(y) for y > 4.
double erfc_far(double y) {
    const double z = 1.0 / (y * y);
    double num = kErfcP[5] * z;
    double den = z;
    for (int i = 0; i < 4; ++i) {
        num = (num + kErfcP[i]) * z;
        den = (den + kErfcQ[i]) * z;
    }
    double r = z * (num + kErfcP[4]) / (den + kErfcQ[4]);
    r = (kInvSqrtPi - r) / y;
    if (y >= 26.6) return 0.0; // exp underflows; true value < 1e-308
    return std::exp(-y * y) * r;
}

// erfc on the whole axis.
double erfc_rational(double x) {
    const double y = std::fabs(x);
    double result;
    if (y <= 0.46875) {
        result = 1.0 - erf_small(x);
        return result; // already signed
    } else if (y <= 4.0) {
        result = erfc_mid(y);
    } else {
        result = erfc_far(y);
    }
    return x < 0.0 ? 2.0 - result : result;
}

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Acklam's rational approximation for the normal quantile; initial estimate
// only, callers refine.
double inverse_cdf_estimate(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

} // namespace

double standard_normal_cdf(double z) {
    if (!std::isfinite(z)) {
        throw DomainError("standard_normal_cdf: non-finite input");
    }
    return 0.5 * erfc_rational(-z / kSqrt2);
}

double standard_normal_inverse_cdf(double p) {
    if (!std::isfinite(p) || p <= 0.0 || p >= 1.0) {
        throw DomainError("standard_normal_inverse_cdf: p must be in (0, 1)");
    }
    double x = inverse_cdf_estimate(p);
    // One Halley step against the rational CDF.
    const double e = standard_normal_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

AttackBudget compute_z_max(int n, int m) {
    if (m < 1 || m >= n) {
        throw ConfigError("compute_z_max: requires 1 <= m < n, got n=" +
                          std::to_string(n) + " m=" + std::to_string(m));
    }
    AttackBudget budget;
    budget.n = n;
    budget.m = m;
    budget.s = n / 2 + 1 - m; // floor(n/2 + 1) - m
    if (budget.s <= 0) {
        throw ConfigError("compute_z_max: attacker already holds a majority (s=" +
                          std::to_string(budget.s) + ")");
    }
    budget.threshold = static_cast<double>(n - budget.s) / static_cast<double>(n);

    // z-table emulation: scan the 0.01 grid upward; z_max is the last value
    // strictly below the threshold.
    if (standard_normal_cdf(0.0) >= budget.threshold) {
        throw ConfigError(
            "compute_z_max: no non-negative grid value stays below threshold " +
            std::to_string(budget.threshold) +
            " (m=1 with even n leaves no undetected upward deviation)");
    }
    int k = 0;
    while (standard_normal_cdf((k + 1) / 100.0) < budget.threshold) {
        ++k;
        if (k > 10000) {
            throw ConfigError("compute_z_max: grid scan failed to bracket threshold");
        }
    }
    budget.z_max = k / 100.0;
    budget.z_max_continuous = standard_normal_inverse_cdf(budget.threshold) - 1e-9;
    return budget;
}

DimensionStats per_dimension_stats(std::span<const WorkerUpdate> updates) {
    if (updates.size() < 2) {
        throw InsufficientDataError(
            "per_dimension_stats: need at least 2 updates, got " +
            std::to_string(updates.size()));
    }
    const std::size_t d = updates.front().params.size();
    for (const auto& u : updates) {
        if (u.params.size() != d) {
            throw ShapeError("per_dimension_stats: update length mismatch (" +
                             std::to_string(u.params.size()) + " vs " +
                             std::to_string(d) + ")");
        }
    }
    const double count = static_cast<double>(updates.size());
    DimensionStats stats;
    stats.mu.assign(d, 0.0);
    stats.sigma.assign(d, 0.0);
    for (const auto& u : updates) {
        for (std::size_t j = 0; j < d; ++j) stats.mu[j] += u.params[j];
    }
    for (std::size_t j = 0; j < d; ++j) stats.mu[j] /= count;
    for (const auto& u : updates) {
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = u.params[j] - stats.mu[j];
            stats.sigma[j] += delta * delta;
        }
    }
    // Population standard deviation: divide by count, not count-1.
    for (std::size_t j = 0; j < d; ++j) {
        stats.sigma[j] = std::sqrt(stats.sigma[j] / count);
    }
    return stats;
}

} // namespace byzsim
