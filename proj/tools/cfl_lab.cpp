// Experiment runner: builds a federated dataset, trains the selected
// framework, writes metrics.csv and summary.txt into --out.

#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cfl/cli.hpp"
#include "cfl/errors.hpp"
#include "cfl/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{std::string(cfl::kVersion) +
                 " - clustered federated learning simulator"};
    app.set_version_flag("--version", cfl::kVersion);

    std::string config_path;
    app.add_option("--config", config_path, "key = value config file");

    // every other flag is a `key value` pair applied on top of the file
    std::vector<std::pair<std::string, std::string>> settings;
    auto add = [&](const std::string& flag, const std::string& key,
                   const std::string& help) {
        app.add_option_function<std::string>(
            flag,
            [&settings, key](const std::string& v) {
                settings.emplace_back(key, v);
            },
            help);
    };
    add("--framework", "framework", "flexcfl|fedgroup|fedavg|fedprox|ifca|fesem");
    add("--dataset", "dataset", "synthetic|two_pop|mnist");
    add("--model", "model", "mclr|mlp");
    add("--measure", "measure", "edc|madc (FlexCFL clustering measure)");
    add("--shift", "shift", "none|swap_all|swap_part|incremental");
    add("--migration", "migration", "on|off (off = static FedGroup mode)");
    add("--rounds", "rounds", "communication rounds T");
    add("--clients-per-round", "clients_per_round", "selected clients K");
    add("--local-epochs", "local_epochs", "local epochs E");
    add("--batch-size", "batch_size", "local mini-batch size B");
    add("--eta", "eta", "local learning rate");
    add("--eta-g", "eta_g", "inter-group learning rate");
    add("--mu", "mu", "proximal term weight");
    add("--groups", "groups", "group count m");
    add("--pretrain-scale", "pretrain_scale", "cold-start scale alpha");
    add("--seed", "seed", "master seed");
    add("--swap-prob", "swap_prob", "per-round swap probability");
    add("--release-fraction", "release_fraction", "incremental release fraction");
    add("--release-period", "release_period", "incremental release period");
    add("--n-clients", "n_clients", "client count");
    add("--classes-per-client", "classes_per_client", "labels per client");
    add("--input-dim", "input_dim", "feature dimension (synthetic)");
    add("--num-classes", "num_classes", "class count");
    add("--hidden-dim", "hidden_dim", "MLP hidden units");
    add("--syn-alpha", "syn_alpha", "synthetic model heterogeneity");
    add("--syn-beta", "syn_beta", "synthetic feature heterogeneity");
    add("--mix-sigma", "mix_sigma", "two_pop per-client mixture spread");
    add("--samples-per-client", "samples_per_client", "mean train samples per client");
    add("--size-exponent", "size_exponent", "client size power-law exponent");
    add("--min-samples", "min_samples", "minimum client train size");
    add("--test-fraction", "test_fraction", "per-client test split fraction");
    add("--out", "out", "output directory");
    add("--data-dir", "data_dir", "MNIST IDX root (or CFL_LAB_DATA_DIR)");
    add("--partition-manifest", "partition_manifest",
        "replay a saved partition manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        cfl::cli::ExperimentConfig config;
        if (!config_path.empty()) config = cfl::cli::parse_config(config_path);
        for (const auto& [key, value] : settings)
            cfl::cli::apply_setting(config, key, value);
        return cfl::cli::run_experiment(config);
    } catch (const cfl::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const cfl::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const cfl::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
