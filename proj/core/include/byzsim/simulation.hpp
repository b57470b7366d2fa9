#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "byzsim/aggregation.hpp"
#include "byzsim/attacks.hpp"
#include "byzsim/dataset.hpp"
#include "byzsim/mlp.hpp"

namespace byzsim {

enum class DatasetSource { Synthetic, Idx };

// Desk-scale synthetic default: 4-class blobs in 64 dimensions (8x8 images).
struct SyntheticSpec {
    std::size_t classes = 4;
    std::size_t dim = 64;
    std::size_t train_per_class = 250;
    std::size_t test_per_class = 100;
    double spread = 0.15;
};

struct IdxPaths {
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

// Everything that determines a run. Two runs with equal configs (seed
// included) produce byte-identical CSV output, whatever the thread count.
struct ExperimentConfig {
    std::size_t n = 51;
    std::size_t m = 12;
    std::size_t rounds = 60;
    DefenseChoice defense;
    AttackConfig attack;
    TrainingConfig training;
    std::vector<std::size_t> layer_sizes = {64, 16, 4};
    DatasetSource source = DatasetSource::Synthetic;
    SyntheticSpec synth;
    IdxPaths idx;
    // Sample-backdoor inputs are these training-set rows; their malicious
    // targets are (y + 1) mod class_count.
    std::vector<std::size_t> backdoor_sample_indices;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string out_csv;
    std::string out_json;
};

struct RoundRecord {
    std::size_t round = 0; // 1-based
    double accuracy = 0.0;
    std::optional<double> backdoor_rate;
    double param_norm = 0.0;
    std::optional<int> krum_selected;
};

struct ExperimentSummary {
    std::size_t best_round = 0;
    double best_accuracy = 0.0;
    std::optional<double> backdoor_at_best;
    double wall_seconds = 0.0;
};

struct ExperimentResult {
    std::vector<RoundRecord> records;
    ExperimentSummary summary;
};

struct Evaluation {
    double accuracy = 0.0;
    std::optional<double> backdoor_success;
};

// Benign accuracy over the test set; when a backdoor spec is given, also the
// fraction of backdoored inputs classified as the malicious target.
Evaluation evaluate(const MlpModel& model, const Dataset& test,
                    const BackdoorSpec* backdoor);

// The synchronous-SGD round loop with attacker interception between local
// training and aggregation. The summary reports the round that maximized
// test accuracy (earliest on ties).
ExperimentResult run_experiment(const ExperimentConfig& config);

// Seed stream conventions; exposed so callers can reproduce a single
// worker's trajectory outside the harness.
std::uint64_t worker_stream_seed(std::uint64_t master, std::size_t round,
                                 std::size_t worker);
std::uint64_t model_init_seed(std::uint64_t master);
std::uint64_t train_data_seed(std::uint64_t master);
std::uint64_t test_data_seed(std::uint64_t master);
std::uint64_t split_seed(std::uint64_t master);
std::uint64_t backdoor_draw_seed(std::uint64_t master, std::size_t round);

// CSV (header `round,accuracy,backdoor_rate,param_norm,krum_selected`) and
// JSON summary with a config echo. Either path may be empty to skip it.
void write_results(const std::vector<RoundRecord>& records,
                   const ExperimentSummary& summary,
                   const ExperimentConfig& config, const std::string& csv_path,
                   const std::string& json_path);

std::string render_csv(const std::vector<RoundRecord>& records);
std::string render_json_summary(const ExperimentSummary& summary,
                                const ExperimentConfig& config);

// Flat `key = value` config file; '#' starts a comment. Unknown keys are
// rejected. Returns defaults overlaid with the file's entries.
ExperimentConfig parse_config_file(const std::string& path);

// Applies one key/value pair (the config file grammar; also backs CLI
// overrides). Throws ConfigError on unknown keys or unparsable values.
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

// Validates cross-field invariants (m < n, defense feasibility, model/data
// agreement) before a run; run_experiment calls this itself.
void validate_config(const ExperimentConfig& config);

} // namespace byzsim
