#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzsim/aggregation.hpp"
#include "byzsim/dataset.hpp"
#include "byzsim/matrix.hpp"
#include "byzsim/mlp.hpp"
#include "byzsim/numstats.hpp"

namespace byzsim {

enum class AttackKind { None, PreventConvergence, Backdoor };

enum class BackdoorKind { Sample, Pattern };

// What to inject. Sample backdoors carry explicit (input, target) pairs;
// pattern backdoors stamp a bright square into the image corner.
struct BackdoorSpec {
    BackdoorKind kind = BackdoorKind::Pattern;

    // Sample
    Matrix sample_inputs;
    std::vector<int> sample_targets;

    // Pattern
    std::size_t pattern_size = 5;
    double pattern_intensity = 1.0;
    int pattern_target = 0;
    std::size_t samples_per_round = 1000;
};

struct AttackConfig {
    AttackKind kind = AttackKind::None;
    double z = 1.5;          // deviation budget in units of sigma
    bool omniscient = false; // estimate stats from all workers, not just corrupted
    double alpha = 0.2;      // backdoor loss weight
    std::size_t local_epochs = 5;
    // Inner-loop optimizer for backdoor crafting. The band-scaled objective
    // needs smaller steps than worker training; momentum would keep pushing
    // against the projection.
    double backdoor_learning_rate = 0.02;
    double backdoor_momentum = 0.0;
    BackdoorSpec backdoor;
};

std::string attack_name(AttackKind kind);
std::optional<AttackKind> parse_attack(const std::string& name);

// mu + z * sigma per dimension, estimated from the given updates (the
// corrupted workers' own reports in the non-omniscient setting). Every
// corrupted worker submits this same vector.
ParameterVector craft_prevent_convergence(std::span<const WorkerUpdate> stat_updates,
                                          double z);

struct DeltaLoss {
    double value = 0.0;
    ParameterVector gradient; // w.r.t. new_params
};

// Sigma-normalized squared drift from the round's consensus:
//   sum_j ((new_j - old_j) / max(z * sigma_j, 1e-5))^2.
// Denominators below 1e-5 are clamped to avoid near-zero division.
DeltaLoss delta_loss(const ParameterVector& new_params,
                     const ParameterVector& old_params,
                     const std::vector<double>& sigma, double z);

// Element-wise clamp of v to [mu - z*sigma, mu + z*sigma], written as the
// max/min composition.
ParameterVector clamp_to_band(const ParameterVector& v,
                              const std::vector<double>& mu,
                              const std::vector<double>& sigma, double z);

// Stamps the top-left pattern_size x pattern_size block of every image to
// the pattern intensity and rewrites labels to the target class.
Dataset apply_backdoor_pattern(const Dataset& images, const BackdoorSpec& spec);

struct BackdoorCraft {
    ParameterVector params;               // clamped malicious parameters
    std::vector<double> backdoor_losses;  // pure backdoor loss per epoch, plus final
};

// Trains a model seeded at the per-dimension mean on the backdoor batch for
// local_epochs full-batch steps, optimizing
//   alpha * backdoor_cross_entropy + (1 - alpha) * delta_loss / d,
// with every iterate projected into the mu +- z*sigma band; the returned
// parameters satisfy the band clamp exactly.
BackdoorCraft craft_backdoor(std::span<const WorkerUpdate> stat_updates,
                             const Matrix& backdoor_inputs,
                             const std::vector<int>& backdoor_targets,
                             double z, double alpha, std::size_t local_epochs,
                             const std::vector<std::size_t>& layer_sizes,
                             const TrainingConfig& train_config);

} // namespace byzsim
