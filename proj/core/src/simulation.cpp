#include "byzsim/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "byzsim/errors.hpp"
#include "byzsim/numstats.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

namespace {

// Fixed tag words for deriving independent seed streams from the master seed.
enum SeedTag : std::uint64_t {
    kTagModelInit = 1,
    kTagTrainData = 2,
    kTagTestData = 3,
    kTagSplit = 4,
    kTagWorker = 5,
    kTagBackdoorDraw = 6,
};

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Runs fn(0..count) on up to `threads` workers. Each index is processed by
// exactly one thread; output slots are disjoint, so scheduling cannot change
// results.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

double l2_norm(const ParameterVector& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

std::size_t predict_class(const Matrix& probs, std::size_t row) {
    const double* p = probs.row(row);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols; ++c) {
        if (p[c] > p[best]) best = c;
    }
    return best;
}

double accuracy_on(const MlpModel& model, const Dataset& data) {
    const Matrix probs = forward(model, data.inputs);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (predict_class(probs, r) == static_cast<std::size_t>(data.labels[r])) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

Dataset backdoor_eval_set(const Dataset& test, const BackdoorSpec& spec) {
    if (spec.kind == BackdoorKind::Pattern) {
        return apply_backdoor_pattern(test, spec);
    }
    Dataset eval;
    eval.inputs = spec.sample_inputs;
    eval.labels = spec.sample_targets;
    eval.class_count = test.class_count;
    eval.image_width = test.image_width;
    return eval;
}

template <typename Fn>
auto with_round_context(std::size_t round, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError("round " + std::to_string(round) + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError("round " + std::to_string(round) + ": " + e.what());
    } catch (const InsufficientDataError& e) {
        throw InsufficientDataError("round " + std::to_string(round) + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError("round " + std::to_string(round) + ": " + e.what());
    }
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    return out;
}

bool parse_bool(const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("expected a boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

} // namespace

std::uint64_t worker_stream_seed(std::uint64_t master, std::size_t round,
                                 std::size_t worker) {
    return derive_seed(master, kTagWorker, round, worker);
}
std::uint64_t model_init_seed(std::uint64_t master) {
    return derive_seed(master, kTagModelInit);
}
std::uint64_t train_data_seed(std::uint64_t master) {
    return derive_seed(master, kTagTrainData);
}
std::uint64_t test_data_seed(std::uint64_t master) {
    return derive_seed(master, kTagTestData);
}
std::uint64_t split_seed(std::uint64_t master) {
    return derive_seed(master, kTagSplit);
}
std::uint64_t backdoor_draw_seed(std::uint64_t master, std::size_t round) {
    return derive_seed(master, kTagBackdoorDraw, round);
}

Evaluation evaluate(const MlpModel& model, const Dataset& test,
                    const BackdoorSpec* backdoor) {
    if (test.size() == 0) {
        throw InsufficientDataError("evaluate: empty test set");
    }
    Evaluation eval;
    eval.accuracy = accuracy_on(model, test);
    if (backdoor != nullptr) {
        const Dataset poisoned = backdoor_eval_set(test, *backdoor);
        if (poisoned.size() == 0) {
            throw InsufficientDataError("evaluate: empty backdoor evaluation set");
        }
        eval.backdoor_success = accuracy_on(model, poisoned);
    }
    return eval;
}

void validate_config(const ExperimentConfig& config) {
    if (config.n < 1) throw ConfigError("config: n must be at least 1");
    if (config.m >= config.n) throw ConfigError("config: requires m < n");
    if (config.rounds < 1) throw ConfigError("config: rounds must be at least 1");
    if (config.layer_sizes.size() < 2) {
        throw ConfigError("config: layers needs at least input and output sizes");
    }
    const int n = static_cast<int>(config.n);
    const int ma = config.defense.m_assumed;
    if (ma < 0) throw ConfigError("config: defense m_assumed must be non-negative");
    switch (config.defense.kind) {
        case DefenseKind::TrimmedMeanV1:
            if (n <= ma) throw ConfigError("config: trimmed_mean_v1 needs n > m_assumed");
            break;
        case DefenseKind::TrimmedMeanV2:
        case DefenseKind::TrimmedMeanV3:
            if (n <= 2 * ma) {
                throw ConfigError("config: trimmed mean variants 2/3 need n > 2*m_assumed");
            }
            break;
        case DefenseKind::Krum:
            if (n < ma + 3) throw ConfigError("config: krum needs n >= m_assumed + 3");
            break;
        case DefenseKind::Bulyan:
            if (n < 4 * ma + 3) throw ConfigError("config: bulyan needs n >= 4*m_assumed + 3");
            break;
        case DefenseKind::NoDefense:
        case DefenseKind::KMeansCluster:
            break;
    }
    if (config.training.learning_rate <= 0.0) {
        throw ConfigError("config: learning_rate must be positive");
    }
    if (config.training.momentum < 0.0 || config.training.momentum >= 1.0) {
        throw ConfigError("config: momentum must lie in [0, 1)");
    }
    if (config.training.l2_weight < 0.0) {
        throw ConfigError("config: l2_weight must be non-negative");
    }
    if (config.training.batch_size < 1) {
        throw ConfigError("config: batch_size must be at least 1");
    }
    if (config.attack.kind != AttackKind::None) {
        if (config.attack.z < 0.0) throw ConfigError("config: z must be non-negative");
        if (config.attack.alpha < 0.0 || config.attack.alpha > 1.0) {
            throw ConfigError("config: alpha must lie in [0, 1]");
        }
    }
    if (config.source == DatasetSource::Idx) {
        if (config.idx.train_images.empty() || config.idx.train_labels.empty() ||
            config.idx.test_images.empty() || config.idx.test_labels.empty()) {
            throw ConfigError("config: dataset=idx requires all four idx_* paths");
        }
    }
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const auto start_time = std::chrono::steady_clock::now();

    Dataset train, test;
    if (config.source == DatasetSource::Synthetic) {
        train = synth_blobs(config.synth.classes, config.synth.dim,
                            config.synth.train_per_class, config.synth.spread,
                            train_data_seed(config.seed));
        test = synth_blobs(config.synth.classes, config.synth.dim,
                           config.synth.test_per_class, config.synth.spread,
                           test_data_seed(config.seed));
    } else {
        train = load_idx(config.idx.train_images, config.idx.train_labels);
        test = load_idx(config.idx.test_images, config.idx.test_labels);
    }
    if (config.layer_sizes.front() != train.feature_count()) {
        throw ConfigError("config: model input dim " +
                          std::to_string(config.layer_sizes.front()) +
                          " does not match dataset features " +
                          std::to_string(train.feature_count()));
    }
    if (config.layer_sizes.back() < train.class_count) {
        throw ConfigError("config: model output dim smaller than class count");
    }

    const DataSplit split = split_iid(train, config.n, split_seed(config.seed));
    std::vector<Dataset> worker_data;
    worker_data.reserve(config.n);
    for (const auto& chunk : split.chunks) worker_data.push_back(gather(train, chunk));

    // Resolve the attack's backdoor spec against the loaded data.
    AttackConfig attack = config.attack;
    const bool backdoored = attack.kind == AttackKind::Backdoor;
    Dataset corrupted_pool; // pattern backdoors draw from the corrupted chunks
    if (backdoored) {
        if (attack.backdoor.kind == BackdoorKind::Pattern &&
            (attack.backdoor.pattern_target < 0 ||
             static_cast<std::size_t>(attack.backdoor.pattern_target) >=
                 train.class_count)) {
            throw ConfigError("config: backdoor target class out of range");
        }
        if (attack.backdoor.kind == BackdoorKind::Sample) {
            if (attack.backdoor.sample_inputs.rows == 0) {
                const auto& indices = config.backdoor_sample_indices;
                if (indices.empty()) {
                    throw ConfigError("config: sample backdoor needs sample indices");
                }
                std::vector<std::size_t> rows(indices.begin(), indices.end());
                for (std::size_t r : rows) {
                    if (r >= train.size()) {
                        throw ConfigError("config: backdoor sample index out of range");
                    }
                }
                const Dataset picked = gather(train, rows);
                attack.backdoor.sample_inputs = picked.inputs;
                attack.backdoor.sample_targets.clear();
                for (int y : picked.labels) {
                    attack.backdoor.sample_targets.push_back(
                        (y + 1) % static_cast<int>(train.class_count));
                }
            }
        } else {
            std::vector<std::size_t> pool_rows;
            for (std::size_t w = 0; w < config.m; ++w) {
                pool_rows.insert(pool_rows.end(), split.chunks[w].begin(),
                                 split.chunks[w].end());
            }
            if (pool_rows.empty()) {
                throw ConfigError("config: pattern backdoor requires m >= 1");
            }
            corrupted_pool = gather(train, pool_rows);
        }
    }

    MlpModel global =
        MlpModel::seeded_init(config.layer_sizes, model_init_seed(config.seed));
    ParameterVector params = flatten(global);

    ExperimentResult result;
    result.records.reserve(config.rounds);

    std::vector<WorkerUpdate> updates(config.n);

    for (std::size_t round = 1; round <= config.rounds; ++round) {
        with_round_context(round, [&] {
            // Local training, fanned out over the worker pool. Every worker's
            // stream seed depends only on (master seed, round, worker id).
            parallel_for(config.n, config.threads, [&](std::size_t w) {
                const MlpModel local = unflatten(params, config.layer_sizes);
                updates[w].worker_id = static_cast<int>(w);
                updates[w].params = train_local(
                    local, worker_data[w].inputs, worker_data[w].labels,
                    config.training, worker_stream_seed(config.seed, round, w));
            });

            // Malicious intervention: workers 0..m-1 are corrupted and all
            // report one crafted vector.
            if (attack.kind != AttackKind::None && config.m > 0) {
                const std::span<const WorkerUpdate> all(updates);
                const std::span<const WorkerUpdate> stat_updates =
                    attack.omniscient ? all : all.subspan(0, config.m);
                ParameterVector malicious;
                if (attack.kind == AttackKind::PreventConvergence) {
                    malicious = craft_prevent_convergence(stat_updates, attack.z);
                } else {
                    Matrix bd_inputs;
                    std::vector<int> bd_targets;
                    if (attack.backdoor.kind == BackdoorKind::Sample) {
                        bd_inputs = attack.backdoor.sample_inputs;
                        bd_targets = attack.backdoor.sample_targets;
                    } else {
                        // Fresh patched draw from the corrupted chunks.
                        Rng rng(backdoor_draw_seed(config.seed, round));
                        const std::size_t k = attack.backdoor.samples_per_round;
                        std::vector<std::size_t> rows(k);
                        for (std::size_t i = 0; i < k; ++i) {
                            rows[i] = rng.index(corrupted_pool.size());
                        }
                        Dataset drawn = gather(corrupted_pool, rows);
                        drawn = apply_backdoor_pattern(drawn, attack.backdoor);
                        bd_inputs = std::move(drawn.inputs);
                        bd_targets = std::move(drawn.labels);
                    }
                    TrainingConfig inner = config.training;
                    inner.learning_rate = attack.backdoor_learning_rate;
                    inner.momentum = attack.backdoor_momentum;
                    malicious = craft_backdoor(stat_updates, bd_inputs, bd_targets,
                                               attack.z, attack.alpha,
                                               attack.local_epochs, config.layer_sizes,
                                               inner)
                                    .params;
                }
                for (std::size_t w = 0; w < config.m; ++w) {
                    updates[w].params = malicious;
                }
            }

            const AggregateOutcome outcome = apply_defense(config.defense, updates);
            params = outcome.params;

            const MlpModel current = unflatten(params, config.layer_sizes);
            const Evaluation eval =
                evaluate(current, test, backdoored ? &attack.backdoor : nullptr);

            RoundRecord record;
            record.round = round;
            record.accuracy = eval.accuracy;
            record.backdoor_rate = eval.backdoor_success;
            record.param_norm = l2_norm(params);
            record.krum_selected = outcome.krum_selected;
            result.records.push_back(record);
        });
    }

    // Return whichever round maximized test accuracy (earliest on ties).
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.records.size(); ++i) {
        if (result.records[i].accuracy > result.records[best].accuracy) best = i;
    }
    result.summary.best_round = result.records[best].round;
    result.summary.best_accuracy = result.records[best].accuracy;
    result.summary.backdoor_at_best = result.records[best].backdoor_rate;
    result.summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
            .count();
    return result;
}

std::string render_csv(const std::vector<RoundRecord>& records) {
    std::string out = "round,accuracy,backdoor_rate,param_norm,krum_selected\n";
    for (const auto& r : records) {
        out += std::to_string(r.round);
        out += ',';
        out += format_double(r.accuracy);
        out += ',';
        if (r.backdoor_rate) out += format_double(*r.backdoor_rate);
        out += ',';
        out += format_double(r.param_norm);
        out += ',';
        if (r.krum_selected) out += std::to_string(*r.krum_selected);
        out += '\n';
    }
    return out;
}

std::string render_json_summary(const ExperimentSummary& summary,
                                const ExperimentConfig& config) {
    nlohmann::json j;
    j["config"] = {
        {"n", config.n},
        {"m", config.m},
        {"rounds", config.rounds},
        {"defense", defense_name(config.defense.kind)},
        {"defense_m", config.defense.m_assumed},
        {"cluster_threshold", config.defense.cluster_threshold},
        {"attack", attack_name(config.attack.kind)},
        {"z", config.attack.z},
        {"alpha", config.attack.alpha},
        {"omniscient", config.attack.omniscient},
        {"attack_local_epochs", config.attack.local_epochs},
        {"layers", config.layer_sizes},
        {"dataset", config.source == DatasetSource::Synthetic ? "synth" : "idx"},
        {"seed", config.seed},
        {"learning_rate", config.training.learning_rate},
        {"momentum", config.training.momentum},
        {"l2_weight", config.training.l2_weight},
        {"batch_size", config.training.batch_size},
        {"epochs_per_round", config.training.epochs},
        {"threads", config.threads},
    };
    if (config.source == DatasetSource::Synthetic) {
        j["config"]["synth"] = {
            {"classes", config.synth.classes},
            {"dim", config.synth.dim},
            {"train_per_class", config.synth.train_per_class},
            {"test_per_class", config.synth.test_per_class},
            {"spread", config.synth.spread},
        };
    }
    j["best_round"] = summary.best_round;
    j["best_accuracy"] = summary.best_accuracy;
    if (summary.backdoor_at_best) {
        j["backdoor_rate_at_best"] = *summary.backdoor_at_best;
    } else {
        j["backdoor_rate_at_best"] = nullptr;
    }
    j["wall_seconds"] = summary.wall_seconds;
    return j.dump(2) + "\n";
}

void write_results(const std::vector<RoundRecord>& records,
                   const ExperimentSummary& summary,
                   const ExperimentConfig& config, const std::string& csv_path,
                   const std::string& json_path) {
    if (!csv_path.empty()) {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + csv_path);
        out << render_csv(records);
        if (!out) throw IoError("write failed for " + csv_path);
    }
    if (!json_path.empty()) {
        std::ofstream out(json_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + json_path);
        out << render_json_summary(summary, config);
        if (!out) throw IoError("write failed for " + json_path);
    }
}

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
    try {
        if (key == "n") {
            config.n = std::stoull(value);
        } else if (key == "m") {
            config.m = std::stoull(value);
        } else if (key == "rounds") {
            config.rounds = std::stoull(value);
        } else if (key == "defense") {
            const auto kind = parse_defense(value);
            if (!kind) throw ConfigError("unknown defense '" + value + "'");
            config.defense.kind = *kind;
        } else if (key == "defense_m") {
            config.defense.m_assumed = std::stoi(value);
        } else if (key == "cluster_threshold") {
            config.defense.cluster_threshold = std::stod(value);
        } else if (key == "attack") {
            const auto kind = parse_attack(value);
            if (!kind) throw ConfigError("unknown attack '" + value + "'");
            config.attack.kind = *kind;
        } else if (key == "z") {
            config.attack.z = std::stod(value);
        } else if (key == "alpha") {
            config.attack.alpha = std::stod(value);
        } else if (key == "omniscient") {
            config.attack.omniscient = parse_bool(value);
        } else if (key == "attack_local_epochs") {
            config.attack.local_epochs = std::stoull(value);
        } else if (key == "backdoor_learning_rate") {
            config.attack.backdoor_learning_rate = std::stod(value);
        } else if (key == "backdoor_momentum") {
            config.attack.backdoor_momentum = std::stod(value);
        } else if (key == "backdoor_kind") {
            if (value == "sample") {
                config.attack.backdoor.kind = BackdoorKind::Sample;
            } else if (value == "pattern") {
                config.attack.backdoor.kind = BackdoorKind::Pattern;
            } else {
                throw ConfigError("unknown backdoor kind '" + value + "'");
            }
        } else if (key == "backdoor_target") {
            config.attack.backdoor.pattern_target = std::stoi(value);
        } else if (key == "backdoor_pattern_size") {
            config.attack.backdoor.pattern_size = std::stoull(value);
        } else if (key == "backdoor_intensity") {
            config.attack.backdoor.pattern_intensity = std::stod(value);
        } else if (key == "backdoor_samples_per_round") {
            config.attack.backdoor.samples_per_round = std::stoull(value);
        } else if (key == "backdoor_sample_indices") {
            config.backdoor_sample_indices = parse_size_list(value);
        } else if (key == "learning_rate" || key == "lr") {
            config.training.learning_rate = std::stod(value);
        } else if (key == "momentum") {
            config.training.momentum = std::stod(value);
        } else if (key == "l2_weight") {
            config.training.l2_weight = std::stod(value);
        } else if (key == "batch_size") {
            config.training.batch_size = std::stoull(value);
        } else if (key == "epochs_per_round") {
            config.training.epochs = std::stoull(value);
        } else if (key == "layers") {
            config.layer_sizes = parse_size_list(value);
        } else if (key == "dataset") {
            if (value == "synth") {
                config.source = DatasetSource::Synthetic;
            } else if (value == "idx") {
                config.source = DatasetSource::Idx;
            } else {
                throw ConfigError("unknown dataset source '" + value + "'");
            }
        } else if (key == "synth_classes") {
            config.synth.classes = std::stoull(value);
        } else if (key == "synth_dim") {
            config.synth.dim = std::stoull(value);
        } else if (key == "synth_train_per_class") {
            config.synth.train_per_class = std::stoull(value);
        } else if (key == "synth_test_per_class") {
            config.synth.test_per_class = std::stoull(value);
        } else if (key == "synth_spread") {
            config.synth.spread = std::stod(value);
        } else if (key == "idx_train_images") {
            config.idx.train_images = value;
        } else if (key == "idx_train_labels") {
            config.idx.train_labels = value;
        } else if (key == "idx_test_images") {
            config.idx.test_images = value;
        } else if (key == "idx_test_labels") {
            config.idx.test_labels = value;
        } else if (key == "seed") {
            config.seed = std::stoull(value);
        } else if (key == "threads") {
            config.threads = std::stoull(value);
        } else if (key == "out_csv") {
            config.out_csv = value;
        } else if (key == "out_json") {
            config.out_json = value;
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("config key '" + key + "': cannot parse value '" + value + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("config key '" + key + "': value '" + value + "' out of range");
    }
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ExperimentConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(trimmed.substr(0, eq));
        const std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        try {
            apply_config_entry(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

} // namespace byzsim
