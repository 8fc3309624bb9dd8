#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfl/federation.hpp"

namespace cfl::cli {

enum class DatasetKind { Synthetic, TwoPop, Mnist };

// Fully resolved experiment description: the federation RunConfig plus the
// dataset/model construction knobs.
struct ExperimentConfig {
    RunConfig run;
    DatasetKind dataset = DatasetKind::Synthetic;
    ModelKind model = ModelKind::MCLR;
    int n_clients = 50;
    int classes_per_client = 2;
    int input_dim = 60;
    int num_classes = 10;
    int hidden_dim = 128;
    double syn_alpha = 1.0;
    double syn_beta = 1.0;
    double mix_sigma = 1.2;  // two_pop per-client mixture spread
    int samples_per_client = 100;
    double size_exponent = 1.1;
    int min_samples = 10;
    double test_fraction = 0.2;
    std::string out_dir = "out";
    std::string data_dir;            // MNIST root; falls back to CFL_LAB_DATA_DIR
    std::string partition_manifest;  // load this manifest instead of partitioning
};

// Applies one `key = value` setting; throws ConfigError naming unknown keys
// or out-of-domain values.
void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value);

// Line-oriented `key = value` file ('#' comments, blank lines allowed).
ExperimentConfig parse_config(const std::string& path);

// The resolved config serialized back to `key = value` lines (round-trips
// through apply_setting).
std::string config_text(const ExperimentConfig& config);

struct RunManifest {
    std::string config;            // resolved key = value block
    std::uint64_t dataset_fingerprint = 0;
    std::string code_version;
    std::uint64_t master_seed = 0;
};

std::uint64_t dataset_fingerprint(const std::vector<ClientData>& clients);

// Builds the dataset described by the config. For Mnist, writes the partition
// manifest to out_dir (or replays config.partition_manifest).
std::vector<ClientData> build_dataset(const ExperimentConfig& config);

// Writes metrics.csv and summary.txt (LF newlines, reals with 6 significant
// digits) into out_dir.
void emit_metrics(const std::vector<RoundRecord>& records,
                  const CommLedger& ledger, const RunManifest& manifest,
                  const std::string& out_dir);

// End-to-end: build dataset, run framework, emit outputs. Returns 0.
int run_experiment(const ExperimentConfig& config);

}  // namespace cfl::cli
