#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "byzsim/matrix.hpp"

namespace byzsim {

struct WorkerUpdate; // aggregation.hpp

// Per-dimension mean and population standard deviation over a set of
// worker updates. mu and sigma always have the same length.
struct DimensionStats {
    std::vector<double> mu;
    std::vector<double> sigma;

    std::size_t dim() const { return mu.size(); }
};

// How far an attacker controlling m of n workers can push a value, in units
// of the per-dimension standard deviation, while still capturing the median
// with high probability.
//
//   s          workers that must end up on the far side of the malicious value
//   threshold  (n - s) / n, the CDF level the malicious value must stay below
//   z_max      largest z on the 0.01 grid with cdf(z) < threshold (z-table
//              emulation at two-decimal granularity)
//   z_max_continuous  the exact supremum, inverse_cdf(threshold) - 1e-9
struct AttackBudget {
    int n = 0;
    int m = 0;
    int s = 0;
    double threshold = 0.0;
    double z_max = 0.0;
    double z_max_continuous = 0.0;
};

// Standard normal CDF, evaluated via a rational approximation of erf/erfc
// (three-interval Cody scheme). Absolute error well below 1e-7.
// Throws DomainError for non-finite input.
double standard_normal_cdf(double z);

// Inverse of standard_normal_cdf on (0, 1); rational initial estimate
// polished with one Halley step. Throws DomainError outside (0, 1).
double standard_normal_inverse_cdf(double p);

// Computes the undetected-deviation budget for m corrupted workers out of n.
// Requires 1 <= m < n. Throws ConfigError when s <= 0 (the attacker already
// holds a majority, the bound is vacuous) and when no grid value satisfies
// cdf(z) < threshold (threshold <= 1/2, only reachable with m == 1 and
// n even: no upward deviation goes undetected).
AttackBudget compute_z_max(int n, int m);

// Mean and population standard deviation of every dimension across updates.
// Requires at least 2 updates of identical length.
DimensionStats per_dimension_stats(std::span<const WorkerUpdate> updates);

} // namespace byzsim
