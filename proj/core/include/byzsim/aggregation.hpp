#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzsim/matrix.hpp"

namespace byzsim {

// One worker's reported parameters for a round.
struct WorkerUpdate {
    int worker_id = 0;
    ParameterVector params;
};

enum class DefenseKind {
    NoDefense,
    TrimmedMeanV1,
    TrimmedMeanV2,
    TrimmedMeanV3,
    KMeansCluster,
    Krum,
    Bulyan,
};

// Server-side aggregation rule plus its parameters.
struct DefenseChoice {
    DefenseKind kind = DefenseKind::NoDefense;
    int m_assumed = 0;               // corrupted count the rule is built for
    double cluster_threshold = 1.0;  // KMeansCluster only
};

std::string defense_name(DefenseKind kind);
std::optional<DefenseKind> parse_defense(const std::string& name);

// Coordinate-wise arithmetic mean. Requires >= 1 update.
ParameterVector mean_aggregate(std::span<const WorkerUpdate> updates);

// Lower median: element at index ceil(k/2)-1 of the sorted values.
double median_of(std::span<const double> values);

// Per-dimension trimmed average around the median.
//   variant 1: keep the n-m values nearest the median
//   variant 2: keep the n-2m values nearest the median
//   variant 3: drop the m largest and m smallest values
// Distance ties are broken by smaller |value|, then smaller worker_id.
ParameterVector trimmed_mean(std::span<const WorkerUpdate> updates, int m, int variant);

// Per-dimension two-cluster split (exact 1-D 2-means). When the cluster
// centers are farther apart than the threshold, only the larger cluster is
// averaged (size tie: the cluster holding the median survives); otherwise
// all values are averaged.
ParameterVector kmeans_cluster_defense(std::span<const WorkerUpdate> updates,
                                       double cluster_threshold);

struct KrumResult {
    ParameterVector params;
    int selected_worker_id = 0;
    std::vector<double> scores; // indexed like `updates`
};

// Selects the update whose summed squared distance to its n-m-2 nearest
// neighbours is smallest. Score ties go to the smaller worker_id.
// Requires n >= m + 3.
KrumResult krum(std::span<const WorkerUpdate> updates, int m);

struct BulyanResult {
    ParameterVector params;
    std::vector<int> selection_order; // worker ids in selection order
};

// Repeated selection by `inner` builds a set of n-2m candidates, then
// variant-2 trimmed mean (same m) aggregates it. Requires n >= 4m + 3.
// The default inner rule is Krum with the neighbour count clamped to the
// shrinking candidate pool (the last picks see fewer than m+3 updates).
BulyanResult bulyan(std::span<const WorkerUpdate> updates, int m);

using InnerSelectionRule = std::size_t (*)(std::span<const WorkerUpdate>, int);

BulyanResult bulyan(std::span<const WorkerUpdate> updates, int m,
                    InnerSelectionRule inner);

// Krum selection tolerating any pool size >= 1 (neighbour count clamped to
// [0, n-1]); the building block bulyan() iterates.
std::size_t krum_select(std::span<const WorkerUpdate> updates, int m);

struct AggregateOutcome {
    ParameterVector params;
    std::optional<int> krum_selected; // set for Krum runs only
};

// Dispatch on DefenseChoice; the simulation loop's single entry point.
AggregateOutcome apply_defense(const DefenseChoice& defense,
                               std::span<const WorkerUpdate> updates);

} // namespace byzsim
