#include "byzsim/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "byzsim/errors.hpp"

namespace byzsim {

std::string attack_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::PreventConvergence: return "prevent_convergence";
        case AttackKind::Backdoor: return "backdoor";
    }
    return "none";
}

std::optional<AttackKind> parse_attack(const std::string& name) {
    if (name == "none") return AttackKind::None;
    if (name == "prevent_convergence") return AttackKind::PreventConvergence;
    if (name == "backdoor") return AttackKind::Backdoor;
    return std::nullopt;
}

ParameterVector craft_prevent_convergence(std::span<const WorkerUpdate> stat_updates,
                                          double z) {
    if (z < 0.0) {
        throw ConfigError("craft_prevent_convergence: z must be non-negative");
    }
    const DimensionStats stats = per_dimension_stats(stat_updates);
    ParameterVector out(stats.dim());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = stats.mu[j] + z * stats.sigma[j];
    }
    return out;
}

DeltaLoss delta_loss(const ParameterVector& new_params,
                     const ParameterVector& old_params,
                     const std::vector<double>& sigma, double z) {
    const std::size_t d = new_params.size();
    if (old_params.size() != d || sigma.size() != d) {
        throw ShapeError("delta_loss: length mismatch");
    }
    DeltaLoss result;
    result.gradient.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double denom = std::max(z * sigma[j], 1e-5);
        const double ratio = (new_params[j] - old_params[j]) / denom;
        result.value += ratio * ratio;
        result.gradient[j] = 2.0 * ratio / denom;
    }
    return result;
}

ParameterVector clamp_to_band(const ParameterVector& v,
                              const std::vector<double>& mu,
                              const std::vector<double>& sigma, double z) {
    const std::size_t d = v.size();
    if (mu.size() != d || sigma.size() != d) {
        throw ShapeError("clamp_to_band: length mismatch");
    }
    ParameterVector out(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double band = z * sigma[j];
        out[j] = std::max(mu[j] - band, std::min(v[j], mu[j] + band));
    }
    return out;
}

Dataset apply_backdoor_pattern(const Dataset& images, const BackdoorSpec& spec) {
    const std::size_t k = spec.pattern_size;
    const std::size_t width = images.image_width;
    if (width < k || images.feature_count() / width < k) {
        throw ShapeError("apply_backdoor_pattern: image smaller than pattern");
    }
    Dataset out = images;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double* row = out.inputs.row(i);
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < k; ++c) {
                row[r * width + c] = spec.pattern_intensity;
            }
        }
        out.labels[i] = spec.pattern_target;
    }
    return out;
}

BackdoorCraft craft_backdoor(std::span<const WorkerUpdate> stat_updates,
                             const Matrix& backdoor_inputs,
                             const std::vector<int>& backdoor_targets,
                             double z, double alpha, std::size_t local_epochs,
                             const std::vector<std::size_t>& layer_sizes,
                             const TrainingConfig& train_config) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ConfigError("craft_backdoor: alpha must lie in [0, 1]");
    }
    if (z < 0.0) {
        throw ConfigError("craft_backdoor: z must be non-negative");
    }
    const DimensionStats stats = per_dimension_stats(stat_updates);
    if (stats.dim() != mlp_param_count(layer_sizes)) {
        throw ShapeError("craft_backdoor: stats length does not match model layout");
    }

    MlpModel model = unflatten(stats.mu, layer_sizes);
    ParameterVector velocity(stats.dim(), 0.0);
    const double dims = static_cast<double>(stats.dim());

    // The drift penalty enters the step as its per-dimension mean; the raw
    // sum grows with d and its near-zero denominators make the combined
    // objective too stiff for any fixed learning rate. Each iterate is also
    // projected back into the mu +- z*sigma band, so the clamp invariant
    // holds throughout, not only at the end.
    BackdoorCraft craft;
    for (std::size_t epoch = 0; epoch < local_epochs; ++epoch) {
        const BackwardResult bd =
            backward(model, backdoor_inputs, backdoor_targets, train_config.l2_weight);
        const DeltaLoss drift = delta_loss(flatten(model), stats.mu, stats.sigma, z);
        craft.backdoor_losses.push_back(bd.loss);

        ParameterVector grad(stats.dim());
        for (std::size_t j = 0; j < grad.size(); ++j) {
            grad[j] = alpha * bd.gradient[j] +
                      (1.0 - alpha) * drift.gradient[j] / dims;
        }
        sgd_step(model, grad, velocity, train_config);
        model = unflatten(clamp_to_band(flatten(model), stats.mu, stats.sigma, z),
                          layer_sizes);
    }
    if (local_epochs > 0) {
        const BackwardResult final_bd =
            backward(model, backdoor_inputs, backdoor_targets, train_config.l2_weight);
        craft.backdoor_losses.push_back(final_bd.loss);
    }

    craft.params = clamp_to_band(flatten(model), stats.mu, stats.sigma, z);
    return craft;
}

} // namespace byzsim
