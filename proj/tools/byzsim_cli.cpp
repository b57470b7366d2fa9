// Command-line front end: `byzsim run --config experiment.cfg [overrides]`.
// Exit codes: 0 success, 2 configuration error, 3 data format / I/O error,
// 4 other runtime failure.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "byzsim/errors.hpp"
#include "byzsim/simulation.hpp"

namespace {

struct Overrides {
    std::optional<std::size_t> n, m, rounds, threads;
    std::optional<std::string> defense, attack, dataset;
    std::optional<double> z, alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_csv, out_json;
};

int run_command(const std::string& config_path, const Overrides& ov) {
    byzsim::ExperimentConfig config;
    if (!config_path.empty()) {
        config = byzsim::parse_config_file(config_path);
    }
    if (ov.n) byzsim::apply_config_entry(config, "n", std::to_string(*ov.n));
    if (ov.m) byzsim::apply_config_entry(config, "m", std::to_string(*ov.m));
    if (ov.rounds) byzsim::apply_config_entry(config, "rounds", std::to_string(*ov.rounds));
    if (ov.threads) byzsim::apply_config_entry(config, "threads", std::to_string(*ov.threads));
    if (ov.defense) byzsim::apply_config_entry(config, "defense", *ov.defense);
    if (ov.attack) byzsim::apply_config_entry(config, "attack", *ov.attack);
    if (ov.dataset) byzsim::apply_config_entry(config, "dataset", *ov.dataset);
    if (ov.z) byzsim::apply_config_entry(config, "z", std::to_string(*ov.z));
    if (ov.alpha) byzsim::apply_config_entry(config, "alpha", std::to_string(*ov.alpha));
    if (ov.seed) byzsim::apply_config_entry(config, "seed", std::to_string(*ov.seed));
    if (ov.out_csv) config.out_csv = *ov.out_csv;
    if (ov.out_json) config.out_json = *ov.out_json;

    // Defense m defaults to the simulated corruption count unless set.
    if (config.defense.kind != byzsim::DefenseKind::NoDefense &&
        config.defense.m_assumed == 0) {
        config.defense.m_assumed = static_cast<int>(config.m);
    }

    const byzsim::ExperimentResult result = byzsim::run_experiment(config);
    byzsim::write_results(result.records, result.summary, config, config.out_csv,
                          config.out_json);

    std::printf("rounds=%zu best_round=%zu best_accuracy=%.4f", config.rounds,
                result.summary.best_round, result.summary.best_accuracy);
    if (result.summary.backdoor_at_best) {
        std::printf(" backdoor_rate=%.4f", *result.summary.backdoor_at_best);
    }
    std::printf(" wall_seconds=%.2f\n", result.summary.wall_seconds);
    if (!config.out_csv.empty()) std::printf("csv: %s\n", config.out_csv.c_str());
    if (!config.out_json.empty()) std::printf("json: %s\n", config.out_json.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synchronous distributed SGD simulator with Byzantine attacks "
                 "and robust aggregation defenses"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one seeded experiment");
    std::string config_path;
    Overrides ov;
    run->add_option("--config", config_path, "Flat key=value experiment file");
    run->add_option("--n", ov.n, "Total worker count");
    run->add_option("--m", ov.m, "Corrupted worker count");
    run->add_option("--rounds", ov.rounds, "Training rounds");
    run->add_option("--defense", ov.defense,
                    "none|trimmed_mean_v1|trimmed_mean_v2|trimmed_mean_v3|kmeans|krum|bulyan");
    run->add_option("--attack", ov.attack, "none|prevent_convergence|backdoor");
    run->add_option("--z", ov.z, "Deviation budget in sigmas");
    run->add_option("--alpha", ov.alpha, "Backdoor loss weight");
    run->add_option("--seed", ov.seed, "Master seed");
    run->add_option("--dataset", ov.dataset, "synth|idx");
    run->add_option("--threads", ov.threads, "Worker-training pool size");
    run->add_option("--out-csv", ov.out_csv, "Per-round CSV output path");
    run->add_option("--out-json", ov.out_json, "Summary JSON output path");

    CLI11_PARSE(app, argc, argv);

    try {
        return run_command(config_path, ov);
    } catch (const byzsim::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const byzsim::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 3;
    } catch (const byzsim::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const byzsim::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
