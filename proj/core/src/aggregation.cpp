#include "byzsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "byzsim/errors.hpp"

namespace byzsim {

namespace {

void require_uniform_updates(std::span<const WorkerUpdate> updates,
                             const char* who) {
    if (updates.empty()) {
        throw InsufficientDataError(std::string(who) + ": no updates");
    }
    const std::size_t d = updates.front().params.size();
    for (const auto& u : updates) {
        if (u.params.size() != d) {
            throw ShapeError(std::string(who) + ": update length mismatch");
        }
    }
}

double squared_distance(const ParameterVector& a, const ParameterVector& b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double delta = a[j] - b[j];
        sum += delta * delta;
    }
    return sum;
}

// Krum scores for an arbitrary pool; neighbour count clamped to [0, n-1] so
// bulyan's shrinking selection rounds stay well defined.
std::vector<double> krum_scores(std::span<const WorkerUpdate> updates, int m) {
    const std::size_t n = updates.size();
    const long want = static_cast<long>(n) - static_cast<long>(m) - 2;
    const std::size_t neighbours =
        static_cast<std::size_t>(std::clamp<long>(want, 0, static_cast<long>(n) - 1));

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d2 = squared_distance(updates[i].params, updates[j].params);
            dist[i * n + j] = d2;
            dist[j * n + i] = d2;
        }
    }

    std::vector<double> scores(n, 0.0);
    std::vector<double> others;
    others.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) others.push_back(dist[i * n + j]);
        }
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (std::size_t k = 0; k < neighbours; ++k) score += others[k];
        scores[i] = score;
    }
    return scores;
}

std::size_t argmin_by_worker_id(std::span<const WorkerUpdate> updates,
                                const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] < scores[best] ||
            (scores[i] == scores[best] &&
             updates[i].worker_id < updates[best].worker_id)) {
            best = i;
        }
    }
    return best;
}

} // namespace

std::string defense_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::NoDefense: return "none";
        case DefenseKind::TrimmedMeanV1: return "trimmed_mean_v1";
        case DefenseKind::TrimmedMeanV2: return "trimmed_mean_v2";
        case DefenseKind::TrimmedMeanV3: return "trimmed_mean_v3";
        case DefenseKind::KMeansCluster: return "kmeans";
        case DefenseKind::Krum: return "krum";
        case DefenseKind::Bulyan: return "bulyan";
    }
    return "none";
}

std::optional<DefenseKind> parse_defense(const std::string& name) {
    if (name == "none" || name == "no_defense") return DefenseKind::NoDefense;
    if (name == "trimmed_mean_v1") return DefenseKind::TrimmedMeanV1;
    if (name == "trimmed_mean_v2" || name == "trimmed_mean") return DefenseKind::TrimmedMeanV2;
    if (name == "trimmed_mean_v3") return DefenseKind::TrimmedMeanV3;
    if (name == "kmeans") return DefenseKind::KMeansCluster;
    if (name == "krum") return DefenseKind::Krum;
    if (name == "bulyan") return DefenseKind::Bulyan;
    return std::nullopt;
}

ParameterVector mean_aggregate(std::span<const WorkerUpdate> updates) {
    require_uniform_updates(updates, "mean_aggregate");
    const std::size_t d = updates.front().params.size();
    ParameterVector out(d, 0.0);
    for (const auto& u : updates) {
        for (std::size_t j = 0; j < d; ++j) out[j] += u.params[j];
    }
    const double n = static_cast<double>(updates.size());
    for (std::size_t j = 0; j < d; ++j) out[j] /= n;
    return out;
}

double median_of(std::span<const double> values) {
    if (values.empty()) {
        throw InsufficientDataError("median_of: empty input");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    // Lower median: index ceil(k/2) - 1.
    const std::size_t idx = (sorted.size() + 1) / 2 - 1;
    return sorted[idx];
}

ParameterVector trimmed_mean(std::span<const WorkerUpdate> updates, int m,
                             int variant) {
    require_uniform_updates(updates, "trimmed_mean");
    const int n = static_cast<int>(updates.size());
    if (variant < 1 || variant > 3) {
        throw ConfigError("trimmed_mean: variant must be 1, 2 or 3");
    }
    if (m < 0) throw ConfigError("trimmed_mean: m must be non-negative");
    int keep = 0;
    switch (variant) {
        case 1: keep = n - m; break;
        case 2: keep = n - 2 * m; break;
        case 3: keep = n - 2 * m; break;
    }
    if (keep < 1) {
        throw ConfigError("trimmed_mean: variant " + std::to_string(variant) +
                          " needs n > " + std::to_string(variant == 1 ? m : 2 * m) +
                          ", got n=" + std::to_string(n));
    }

    const std::size_t d = updates.front().params.size();
    ParameterVector out(d, 0.0);
    std::vector<double> column(n);
    // (distance to median, |value|, worker_id) per entry; variant 3 sorts by
    // plain value instead.
    std::vector<std::tuple<double, double, int, double>> ranked(n);

    for (std::size_t j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) column[i] = updates[i].params[j];

        if (variant == 3) {
            std::sort(column.begin(), column.end());
            double sum = 0.0;
            for (int i = m; i < n - m; ++i) sum += column[i];
            out[j] = sum / keep;
            continue;
        }

        const double med = median_of(column);
        for (int i = 0; i < n; ++i) {
            const double v = updates[i].params[j];
            ranked[i] = {std::fabs(v - med), std::fabs(v), updates[i].worker_id, v};
        }
        std::sort(ranked.begin(), ranked.end(),
                  [](const auto& a, const auto& b) {
                      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
                      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                      return std::get<2>(a) < std::get<2>(b);
                  });
        double sum = 0.0;
        for (int i = 0; i < keep; ++i) sum += std::get<3>(ranked[i]);
        out[j] = sum / keep;
    }
    return out;
}

ParameterVector kmeans_cluster_defense(std::span<const WorkerUpdate> updates,
                                       double cluster_threshold) {
    require_uniform_updates(updates, "kmeans_cluster_defense");
    if (updates.size() < 2) {
        throw InsufficientDataError("kmeans_cluster_defense: need at least 2 updates");
    }
    const std::size_t n = updates.size();
    const std::size_t d = updates.front().params.size();
    const std::size_t median_idx = (n + 1) / 2 - 1; // lower median in sorted order

    ParameterVector out(d, 0.0);
    std::vector<double> sorted(n);
    std::vector<double> prefix(n + 1), prefix_sq(n + 1);

    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) sorted[i] = updates[i].params[j];
        std::sort(sorted.begin(), sorted.end());

        prefix[0] = prefix_sq[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            prefix[i + 1] = prefix[i] + sorted[i];
            prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
        }

        // The optimal 1-D 2-means clustering is a split of the sorted values;
        // scan every split point for the lowest within-cluster sum of squares.
        std::size_t best_split = 1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < n; ++k) {
            const double left_n = static_cast<double>(k);
            const double right_n = static_cast<double>(n - k);
            const double left_sum = prefix[k];
            const double right_sum = prefix[n] - prefix[k];
            const double cost = (prefix_sq[k] - left_sum * left_sum / left_n) +
                                (prefix_sq[n] - prefix_sq[k] - right_sum * right_sum / right_n);
            if (cost < best_cost) {
                best_cost = cost;
                best_split = k;
            }
        }

        const std::size_t left_count = best_split;
        const std::size_t right_count = n - best_split;
        const double left_center = prefix[best_split] / left_count;
        const double right_center = (prefix[n] - prefix[best_split]) / right_count;

        std::size_t keep_begin = 0, keep_end = n;
        if (std::fabs(right_center - left_center) > cluster_threshold) {
            bool keep_left;
            if (left_count != right_count) {
                keep_left = left_count > right_count;
            } else {
                keep_left = median_idx < best_split;
            }
            if (keep_left) {
                keep_end = best_split;
            } else {
                keep_begin = best_split;
            }
        }
        double sum = 0.0;
        for (std::size_t i = keep_begin; i < keep_end; ++i) sum += sorted[i];
        out[j] = sum / static_cast<double>(keep_end - keep_begin);
    }
    return out;
}

std::size_t krum_select(std::span<const WorkerUpdate> updates, int m) {
    require_uniform_updates(updates, "krum_select");
    const auto scores = krum_scores(updates, m);
    return argmin_by_worker_id(updates, scores);
}

KrumResult krum(std::span<const WorkerUpdate> updates, int m) {
    require_uniform_updates(updates, "krum");
    const int n = static_cast<int>(updates.size());
    if (m < 0 || n < m + 3) {
        throw ConfigError("krum: requires n >= m + 3, got n=" + std::to_string(n) +
                          " m=" + std::to_string(m));
    }
    KrumResult result;
    result.scores = krum_scores(updates, m);
    const std::size_t best = argmin_by_worker_id(updates, result.scores);
    result.params = updates[best].params;
    result.selected_worker_id = updates[best].worker_id;
    return result;
}

BulyanResult bulyan(std::span<const WorkerUpdate> updates, int m) {
    // Same selection sequence as the generic overload with krum_select, but
    // the pairwise distances are computed once and reused across rounds.
    require_uniform_updates(updates, "bulyan");
    const int n = static_cast<int>(updates.size());
    if (m < 0 || n < 4 * m + 3) {
        throw ConfigError("bulyan: requires n >= 4m + 3, got n=" + std::to_string(n) +
                          " m=" + std::to_string(m));
    }

    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d2 = squared_distance(updates[i].params, updates[j].params);
            dist[static_cast<std::size_t>(i) * n + j] = d2;
            dist[static_cast<std::size_t>(j) * n + i] = d2;
        }
    }

    std::vector<int> alive(n);
    std::iota(alive.begin(), alive.end(), 0);
    const std::size_t target = static_cast<std::size_t>(n - 2 * m);

    BulyanResult result;
    std::vector<WorkerUpdate> selection;
    selection.reserve(target);
    std::vector<double> others;

    while (selection.size() < target) {
        const std::size_t pool = alive.size();
        const long want = static_cast<long>(pool) - m - 2;
        const std::size_t neighbours =
            static_cast<std::size_t>(std::clamp<long>(want, 0, static_cast<long>(pool) - 1));

        std::size_t best_pos = 0;
        double best_score = std::numeric_limits<double>::infinity();
        int best_id = 0;
        for (std::size_t a = 0; a < pool; ++a) {
            others.clear();
            for (std::size_t b = 0; b < pool; ++b) {
                if (b != a) {
                    others.push_back(dist[static_cast<std::size_t>(alive[a]) * n + alive[b]]);
                }
            }
            std::sort(others.begin(), others.end());
            double score = 0.0;
            for (std::size_t k = 0; k < neighbours; ++k) score += others[k];
            const int id = updates[alive[a]].worker_id;
            if (a == 0 || score < best_score ||
                (score == best_score && id < best_id)) {
                best_pos = a;
                best_score = score;
                best_id = id;
            }
        }
        result.selection_order.push_back(updates[alive[best_pos]].worker_id);
        selection.push_back(updates[alive[best_pos]]);
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    result.params = trimmed_mean(selection, m, 2);
    return result;
}

BulyanResult bulyan(std::span<const WorkerUpdate> updates, int m,
                    InnerSelectionRule inner) {
    require_uniform_updates(updates, "bulyan");
    const int n = static_cast<int>(updates.size());
    if (m < 0 || n < 4 * m + 3) {
        throw ConfigError("bulyan: requires n >= 4m + 3, got n=" + std::to_string(n) +
                          " m=" + std::to_string(m));
    }

    std::vector<WorkerUpdate> remaining(updates.begin(), updates.end());
    std::vector<WorkerUpdate> selection;
    const std::size_t target = static_cast<std::size_t>(n - 2 * m);
    selection.reserve(target);

    BulyanResult result;
    while (selection.size() < target) {
        const std::size_t pick = inner(remaining, m);
        result.selection_order.push_back(remaining[pick].worker_id);
        selection.push_back(std::move(remaining[pick]));
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    result.params = trimmed_mean(selection, m, 2);
    return result;
}

AggregateOutcome apply_defense(const DefenseChoice& defense,
                               std::span<const WorkerUpdate> updates) {
    AggregateOutcome outcome;
    switch (defense.kind) {
        case DefenseKind::NoDefense:
            outcome.params = mean_aggregate(updates);
            break;
        case DefenseKind::TrimmedMeanV1:
            outcome.params = trimmed_mean(updates, defense.m_assumed, 1);
            break;
        case DefenseKind::TrimmedMeanV2:
            outcome.params = trimmed_mean(updates, defense.m_assumed, 2);
            break;
        case DefenseKind::TrimmedMeanV3:
            outcome.params = trimmed_mean(updates, defense.m_assumed, 3);
            break;
        case DefenseKind::KMeansCluster:
            outcome.params = kmeans_cluster_defense(updates, defense.cluster_threshold);
            break;
        case DefenseKind::Krum: {
            KrumResult r = krum(updates, defense.m_assumed);
            outcome.params = std::move(r.params);
            outcome.krum_selected = r.selected_worker_id;
            break;
        }
        case DefenseKind::Bulyan:
            outcome.params = bulyan(updates, defense.m_assumed).params;
            break;
    }
    return outcome;
}

} // namespace byzsim
