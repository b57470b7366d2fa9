// Test-only reference implementations. Everything here recomputes results
// from the definitions with the most literal code possible and stays
// independent of the library's implementation choices.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "byzsim/aggregation.hpp"
#include "byzsim/matrix.hpp"
#include "byzsim/rng.hpp"

namespace oracle {

inline double normal_density(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Trapezoid integration of the standard normal density over [lo, hi].
inline double integrate_density(double lo, double hi, std::size_t steps) {
    const double h = (hi - lo) / static_cast<double>(steps);
    double sum = 0.5 * (normal_density(lo) + normal_density(hi));
    for (std::size_t i = 1; i < steps; ++i) {
        sum += normal_density(lo + h * static_cast<double>(i));
    }
    return sum * h;
}

// Phi(z) by integrating the density from far in the left tail (the mass
// below -12 is ~1.8e-33, irrelevant at the tolerances used here).
inline double normal_cdf(double z) {
    const double lo = -12.0;
    if (z <= lo) return 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil((z - lo) / 1e-5));
    return integrate_density(lo, z, std::max<std::size_t>(steps, 10));
}

// Phi at every node lo + i*(hi-lo)/(count-1), one cumulative pass.
inline std::vector<double> normal_cdf_grid(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    double acc = normal_cdf(lo);
    out[0] = acc;
    for (std::size_t i = 1; i < count; ++i) {
        const double a = lo + step * static_cast<double>(i - 1);
        const double b = lo + step * static_cast<double>(i);
        acc += integrate_density(a, b, 200);
        out[i] = acc;
    }
    return out;
}

// Largest z on the 0.00/0.01/... grid with Phi(z) < threshold, scanning with
// the integration-based CDF. Returns -1 when even z=0 fails.
inline double z_table_scan(double threshold) {
    double acc = normal_cdf(0.0);
    if (acc >= threshold) return -1.0;
    int k = 0;
    while (true) {
        const double a = k / 100.0;
        const double b = (k + 1) / 100.0;
        const double next = acc + integrate_density(a, b, 1000);
        if (next >= threshold) return k / 100.0;
        acc = next;
        ++k;
        if (k > 1000) return k / 100.0;
    }
}

// Two-pass mean / population standard deviation per dimension.
inline std::pair<std::vector<double>, std::vector<double>> mean_std(
    std::span<const byzsim::WorkerUpdate> updates) {
    const std::size_t d = updates.front().params.size();
    const double n = static_cast<double>(updates.size());
    std::vector<double> mu(d, 0.0), sigma(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (const auto& u : updates) s += u.params[j];
        mu[j] = s / n;
        double sq = 0.0;
        for (const auto& u : updates) {
            sq += (u.params[j] - mu[j]) * (u.params[j] - mu[j]);
        }
        sigma[j] = std::sqrt(sq / n);
    }
    return {mu, sigma};
}

inline std::vector<double> mean(std::span<const byzsim::WorkerUpdate> updates) {
    const std::size_t d = updates.front().params.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (const auto& u : updates) out[j] += u.params[j];
        out[j] /= static_cast<double>(updates.size());
    }
    return out;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[(values.size() + 1) / 2 - 1];
}

// Brute-force trimmed mean: rank every entry by the documented tie-break and
// keep the closest to the median (variants 1/2) or strip the m outermost
// order statistics (variant 3).
inline std::vector<double> trimmed_mean(std::span<const byzsim::WorkerUpdate> updates,
                                        int m, int variant) {
    const std::size_t n = updates.size();
    const std::size_t d = updates.front().params.size();
    std::size_t keep = variant == 1 ? n - m : n - 2 * m;
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> column;
        for (const auto& u : updates) column.push_back(u.params[j]);
        if (variant == 3) {
            std::sort(column.begin(), column.end());
            double s = 0.0;
            for (std::size_t i = m; i < n - m; ++i) s += column[i];
            out[j] = s / static_cast<double>(keep);
            continue;
        }
        const double med = median(column);
        struct Entry {
            double dist, abs_v;
            int id;
            double v;
        };
        std::vector<Entry> entries;
        for (const auto& u : updates) {
            entries.push_back({std::fabs(u.params[j] - med), std::fabs(u.params[j]),
                               u.worker_id, u.params[j]});
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return std::tie(a.dist, a.abs_v, a.id) < std::tie(b.dist, b.abs_v, b.id);
        });
        double s = 0.0;
        for (std::size_t i = 0; i < keep; ++i) s += entries[i].v;
        out[j] = s / static_cast<double>(keep);
    }
    return out;
}

// Exhaustive 1-D 2-means per dimension: every contiguous split of the sorted
// values, within-cluster sum of squares recomputed naively.
inline std::vector<double> kmeans_defense(std::span<const byzsim::WorkerUpdate> updates,
                                          double threshold) {
    const std::size_t n = updates.size();
    const std::size_t d = updates.front().params.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> v;
        for (const auto& u : updates) v.push_back(u.params[j]);
        std::sort(v.begin(), v.end());

        auto cluster_cost = [&](std::size_t begin, std::size_t end) {
            double c = 0.0;
            for (std::size_t i = begin; i < end; ++i) c += v[i];
            c /= static_cast<double>(end - begin);
            double cost = 0.0;
            for (std::size_t i = begin; i < end; ++i) cost += (v[i] - c) * (v[i] - c);
            return std::pair(cost, c);
        };

        std::size_t best_split = 1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t split = 1; split < n; ++split) {
            const double cost =
                cluster_cost(0, split).first + cluster_cost(split, n).first;
            if (cost < best_cost) {
                best_cost = cost;
                best_split = split;
            }
        }
        const auto [lc, lcenter] = cluster_cost(0, best_split);
        const auto [rc, rcenter] = cluster_cost(best_split, n);
        (void)lc;
        (void)rc;

        std::size_t begin = 0, end = n;
        if (std::fabs(rcenter - lcenter) > threshold) {
            const std::size_t left_n = best_split, right_n = n - best_split;
            bool keep_left;
            if (left_n != right_n) {
                keep_left = left_n > right_n;
            } else {
                const double med = median(v);
                // The lower median sits at sorted index (n+1)/2-1.
                keep_left = (n + 1) / 2 - 1 < best_split;
                (void)med;
            }
            if (keep_left) end = best_split;
            else begin = best_split;
        }
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += v[i];
        out[j] = s / static_cast<double>(end - begin);
    }
    return out;
}

// O(n^2) Krum with the neighbour count clamped to the pool, mirroring the
// definition bulyan iterates. Returns the winning position.
inline std::size_t krum_select(std::span<const byzsim::WorkerUpdate> updates, int m,
                               std::vector<double>* scores_out = nullptr) {
    const std::size_t n = updates.size();
    const long want = static_cast<long>(n) - m - 2;
    const std::size_t neighbours = static_cast<std::size_t>(
        std::clamp<long>(want, 0, static_cast<long>(n) - 1));
    std::vector<double> scores(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dists;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d2 = 0.0;
            for (std::size_t k = 0; k < updates[i].params.size(); ++k) {
                const double delta = updates[i].params[k] - updates[j].params[k];
                d2 += delta * delta;
            }
            dists.push_back(d2);
        }
        std::partial_sort(dists.begin(),
                          dists.begin() + static_cast<std::ptrdiff_t>(neighbours),
                          dists.end());
        for (std::size_t k = 0; k < neighbours; ++k) scores[i] += dists[k];
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (scores[i] < scores[best] ||
            (scores[i] == scores[best] &&
             updates[i].worker_id < updates[best].worker_id)) {
            best = i;
        }
    }
    if (scores_out) *scores_out = scores;
    return best;
}

// Bulyan by composition: repeated brute-force Krum picks, then the
// brute-force variant-2 trim on the selected set.
inline std::vector<double> bulyan(std::span<const byzsim::WorkerUpdate> updates, int m) {
    std::vector<byzsim::WorkerUpdate> pool(updates.begin(), updates.end());
    std::vector<byzsim::WorkerUpdate> selected;
    const std::size_t target = updates.size() - 2 * static_cast<std::size_t>(m);
    while (selected.size() < target) {
        const std::size_t pick = oracle::krum_select(pool, m);
        selected.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return oracle::trimmed_mean(selected, m, 2);
}

// Random instances shared by the differential tests.
inline std::vector<byzsim::WorkerUpdate> random_updates(byzsim::Rng& rng,
                                                        std::size_t n, std::size_t d,
                                                        double lo = -1.0,
                                                        double hi = 1.0) {
    std::vector<byzsim::WorkerUpdate> updates(n);
    for (std::size_t i = 0; i < n; ++i) {
        updates[i].worker_id = static_cast<int>(i);
        updates[i].params.resize(d);
        for (auto& v : updates[i].params) v = rng.uniform(lo, hi);
    }
    return updates;
}

} // namespace oracle
