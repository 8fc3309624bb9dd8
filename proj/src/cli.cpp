#include "cfl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfl/errors.hpp"
#include "cfl/version.hpp"

namespace cfl::cli {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" +
                          value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" +
                          value + "'");
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const char* framework_name(Framework f) {
    switch (f) {
        case Framework::FlexCFL: return "flexcfl";
        case Framework::FedAvg: return "fedavg";
        case Framework::FedProx: return "fedprox";
        case Framework::IFCA: return "ifca";
        case Framework::FeSEM: return "fesem";
    }
    return "?";
}

const char* dataset_name(DatasetKind d) {
    switch (d) {
        case DatasetKind::Synthetic: return "synthetic";
        case DatasetKind::TwoPop: return "two_pop";
        case DatasetKind::Mnist: return "mnist";
    }
    return "?";
}

const char* shift_name(ShiftKind s) {
    switch (s) {
        case ShiftKind::None: return "none";
        case ShiftKind::SwapAll: return "swap_all";
        case ShiftKind::SwapPart: return "swap_part";
        case ShiftKind::Incremental: return "incremental";
    }
    return "?";
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& raw_key,
                   const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    auto positive = [&](long v) {
        if (v < 1) throw ConfigError("config: key '" + key + "' must be >= 1");
        return static_cast<int>(v);
    };
    auto nonnegative = [&](double v) {
        if (v < 0.0) throw ConfigError("config: key '" + key + "' must be >= 0");
        return v;
    };

    if (key == "framework") {
        if (value == "flexcfl") c.run.framework = Framework::FlexCFL;
        else if (value == "fedgroup") {  // static FlexCFL, no client migration
            c.run.framework = Framework::FlexCFL;
            c.run.migration = false;
        } else if (value == "fedavg") c.run.framework = Framework::FedAvg;
        else if (value == "fedprox") c.run.framework = Framework::FedProx;
        else if (value == "ifca") c.run.framework = Framework::IFCA;
        else if (value == "fesem") c.run.framework = Framework::FeSEM;
        else throw ConfigError("config: unknown framework '" + value + "'");
    } else if (key == "dataset") {
        if (value == "synthetic") c.dataset = DatasetKind::Synthetic;
        else if (value == "two_pop") c.dataset = DatasetKind::TwoPop;
        else if (value == "mnist") c.dataset = DatasetKind::Mnist;
        else throw ConfigError("config: unknown dataset '" + value + "'");
    } else if (key == "model") {
        if (value == "mclr") c.model = ModelKind::MCLR;
        else if (value == "mlp") c.model = ModelKind::MLP;
        else throw ConfigError("config: unknown model '" + value + "'");
    } else if (key == "measure") {
        if (value == "edc") c.run.measure = Measure::EDC;
        else if (value == "madc") c.run.measure = Measure::MADC;
        else throw ConfigError("config: unknown measure '" + value + "'");
    } else if (key == "shift") {
        if (value == "none") c.run.shift.kind = ShiftKind::None;
        else if (value == "swap_all") c.run.shift.kind = ShiftKind::SwapAll;
        else if (value == "swap_part") c.run.shift.kind = ShiftKind::SwapPart;
        else if (value == "incremental") c.run.shift.kind = ShiftKind::Incremental;
        else throw ConfigError("config: unknown shift '" + value + "'");
    } else if (key == "migration") {
        if (value == "on") c.run.migration = true;
        else if (value == "off") c.run.migration = false;
        else throw ConfigError("config: migration must be on|off");
    } else if (key == "rounds") {
        const long v = to_long(key, value);
        if (v < 0) throw ConfigError("config: rounds must be >= 0");
        c.run.rounds = static_cast<int>(v);
    } else if (key == "clients_per_round") {
        c.run.clients_per_round = positive(to_long(key, value));
    } else if (key == "local_epochs") {
        c.run.local_epochs = positive(to_long(key, value));
    } else if (key == "batch_size") {
        c.run.batch_size = positive(to_long(key, value));
    } else if (key == "eta") {
        c.run.eta = nonnegative(to_double(key, value));
    } else if (key == "eta_g") {
        c.run.eta_g = nonnegative(to_double(key, value));
    } else if (key == "mu") {
        c.run.mu = nonnegative(to_double(key, value));
    } else if (key == "groups") {
        c.run.num_groups = positive(to_long(key, value));
    } else if (key == "pretrain_scale") {
        c.run.pretrain_scale = positive(to_long(key, value));
    } else if (key == "seed") {
        c.run.seed = static_cast<std::uint64_t>(to_long(key, value));
    } else if (key == "swap_prob") {
        const double v = to_double(key, value);
        if (v < 0.0 || v > 1.0)
            throw ConfigError("config: swap_prob must be in [0, 1]");
        c.run.shift.swap_probability = v;
    } else if (key == "release_fraction") {
        const double v = to_double(key, value);
        if (v <= 0.0 || v > 1.0)
            throw ConfigError("config: release_fraction must be in (0, 1]");
        c.run.shift.release_fraction = v;
    } else if (key == "release_period") {
        c.run.shift.release_period_rounds = positive(to_long(key, value));
    } else if (key == "n_clients") {
        c.n_clients = positive(to_long(key, value));
    } else if (key == "classes_per_client") {
        c.classes_per_client = positive(to_long(key, value));
    } else if (key == "input_dim") {
        c.input_dim = positive(to_long(key, value));
    } else if (key == "num_classes") {
        c.num_classes = positive(to_long(key, value));
    } else if (key == "hidden_dim") {
        c.hidden_dim = positive(to_long(key, value));
    } else if (key == "syn_alpha") {
        c.syn_alpha = to_double(key, value);
    } else if (key == "syn_beta") {
        c.syn_beta = to_double(key, value);
    } else if (key == "mix_sigma") {
        c.mix_sigma = nonnegative(to_double(key, value));
    } else if (key == "samples_per_client") {
        c.samples_per_client = positive(to_long(key, value));
    } else if (key == "size_exponent") {
        c.size_exponent = nonnegative(to_double(key, value));
    } else if (key == "min_samples") {
        c.min_samples = positive(to_long(key, value));
    } else if (key == "test_fraction") {
        const double v = to_double(key, value);
        if (v < 0.0 || v >= 1.0)
            throw ConfigError("config: test_fraction must be in [0, 1)");
        c.test_fraction = v;
    } else if (key == "out") {
        c.out_dir = value;
    } else if (key == "data_dir") {
        c.data_dir = value;
    } else if (key == "partition_manifest") {
        c.partition_manifest = value;
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not 'key = value': " + t);
        apply_setting(c, t.substr(0, eq), t.substr(eq + 1));
    }
    return c;
}

std::string config_text(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "framework = "
        << (c.run.framework == Framework::FlexCFL && !c.run.migration
                ? "fedgroup"
                : framework_name(c.run.framework))
        << "\n";
    out << "dataset = " << dataset_name(c.dataset) << "\n";
    out << "model = " << (c.model == ModelKind::MCLR ? "mclr" : "mlp") << "\n";
    out << "measure = " << (c.run.measure == Measure::EDC ? "edc" : "madc") << "\n";
    out << "shift = " << shift_name(c.run.shift.kind) << "\n";
    out << "migration = " << (c.run.migration ? "on" : "off") << "\n";
    out << "rounds = " << c.run.rounds << "\n";
    out << "clients_per_round = " << c.run.clients_per_round << "\n";
    out << "local_epochs = " << c.run.local_epochs << "\n";
    out << "batch_size = " << c.run.batch_size << "\n";
    out << "eta = " << fmt(c.run.eta) << "\n";
    out << "eta_g = " << fmt(c.run.eta_g) << "\n";
    out << "mu = " << fmt(c.run.mu) << "\n";
    out << "groups = " << c.run.num_groups << "\n";
    out << "pretrain_scale = " << c.run.pretrain_scale << "\n";
    out << "seed = " << c.run.seed << "\n";
    out << "swap_prob = " << fmt(c.run.shift.swap_probability) << "\n";
    out << "release_fraction = " << fmt(c.run.shift.release_fraction) << "\n";
    out << "release_period = " << c.run.shift.release_period_rounds << "\n";
    out << "n_clients = " << c.n_clients << "\n";
    out << "classes_per_client = " << c.classes_per_client << "\n";
    out << "input_dim = " << c.input_dim << "\n";
    out << "num_classes = " << c.num_classes << "\n";
    out << "hidden_dim = " << c.hidden_dim << "\n";
    out << "syn_alpha = " << fmt(c.syn_alpha) << "\n";
    out << "syn_beta = " << fmt(c.syn_beta) << "\n";
    out << "mix_sigma = " << fmt(c.mix_sigma) << "\n";
    out << "samples_per_client = " << c.samples_per_client << "\n";
    out << "size_exponent = " << fmt(c.size_exponent) << "\n";
    out << "min_samples = " << c.min_samples << "\n";
    out << "test_fraction = " << fmt(c.test_fraction) << "\n";
    out << "out = " << c.out_dir << "\n";
    if (!c.data_dir.empty()) out << "data_dir = " << c.data_dir << "\n";
    if (!c.partition_manifest.empty())
        out << "partition_manifest = " << c.partition_manifest << "\n";
    return out.str();
}

std::uint64_t dataset_fingerprint(const std::vector<ClientData>& clients) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& c : clients) {
        for (const LabeledDataset* ds : {&c.train, &c.test, &c.held_back}) {
            const auto n = static_cast<std::int64_t>(ds->size());
            feed(&n, sizeof n);
            if (ds->size() > 0) {
                feed(ds->features.data(),
                     sizeof(double) * static_cast<std::size_t>(ds->features.size()));
                feed(ds->labels.data(),
                     sizeof(int) * static_cast<std::size_t>(ds->labels.size()));
            }
        }
    }
    return h;
}

std::vector<ClientData> build_dataset(const ExperimentConfig& c) {
    const SizeLaw sizes{c.samples_per_client, c.size_exponent, c.min_samples};
    switch (c.dataset) {
        case DatasetKind::Synthetic:
            return generate_synthetic(c.syn_alpha, c.syn_beta, c.n_clients,
                                      c.input_dim, c.num_classes, sizes, c.run.seed,
                                      c.test_fraction);
        case DatasetKind::TwoPop:
            return generate_two_population(c.n_clients, c.num_classes, c.input_dim,
                                           c.mix_sigma, sizes, c.run.seed,
                                           c.test_fraction);
        case DatasetKind::Mnist: {
            std::string root = c.data_dir;
            if (root.empty()) {
                const char* env = std::getenv("CFL_LAB_DATA_DIR");
                if (env) root = env;
            }
            if (root.empty())
                throw IoError("mnist: set data_dir or CFL_LAB_DATA_DIR");
            const LabeledDataset source =
                load_idx(root + "/train-images-idx3-ubyte",
                         root + "/train-labels-idx1-ubyte");
            if (!c.partition_manifest.empty()) {
                const PartitionManifest manifest =
                    PartitionManifest::load(c.partition_manifest);
                return materialize(source, manifest);
            }
            auto [manifest, clients] = partition_noniid(
                source, c.n_clients, c.classes_per_client, c.size_exponent,
                c.test_fraction, c.run.seed,
                static_cast<long>(c.samples_per_client) * c.n_clients,
                c.min_samples);
            std::filesystem::create_directories(c.out_dir);
            manifest.save(c.out_dir + "/partition_manifest.txt");
            return clients;
        }
    }
    throw ConfigError("config: unreachable dataset kind");
}

void emit_metrics(const std::vector<RoundRecord>& records,
                  const CommLedger& ledger, const RunManifest& manifest,
                  const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream csv(out_dir + "/metrics.csv", std::ios::binary);
    if (!csv) throw IoError("emit: cannot write " + out_dir + "/metrics.csv");
    csv << "round,weighted_accuracy,accuracy_valid,mean_train_loss,discrepancy,"
           "migrations,down_scalars,up_scalars\n";
    for (const auto& r : records) {
        csv << r.round << ',' << fmt(r.weighted_accuracy) << ','
            << (r.accuracy_valid ? 1 : 0) << ',' << fmt(r.mean_train_loss) << ','
            << fmt(r.discrepancy) << ',' << r.migrations << ',' << r.down_scalars
            << ',' << r.up_scalars << "\n";
    }
    if (!csv) throw IoError("emit: write failure for metrics.csv");

    std::ofstream sum(out_dir + "/summary.txt", std::ios::binary);
    if (!sum) throw IoError("emit: cannot write " + out_dir + "/summary.txt");
    const ScoreResult score = early_stop_score(records);
    sum << manifest.code_version << "\n";
    sum << "master_seed " << manifest.master_seed << "\n";
    sum << "dataset_fingerprint " << std::hex << manifest.dataset_fingerprint
        << std::dec << "\n";
    sum << "rounds_recorded " << records.size() << "\n";
    if (score.defined)
        sum << "early_stop_score " << fmt(score.score) << "\n";
    else
        sum << "early_stop_score undefined (no round covered all clients)\n";
    long long migrations = 0;
    for (const auto& r : records) migrations += r.migrations;
    sum << "migrations_total " << migrations << "\n";
    sum << "down_scalars_total " << ledger.total(Direction::Down) << "\n";
    sum << "up_scalars_total " << ledger.total(Direction::Up) << "\n";
    sum << "migration_scalars " << ledger.migration_scalars << "\n";
    sum << "transferred_bytes " << ledger.bytes() << "\n";
    static const char* kDir[] = {"down", "up"};
    static const char* kPurpose[] = {"model", "pretrain_delta", "group_directions",
                                     "init_model"};
    for (int d = 0; d < 2; ++d)
        for (int p = 0; p < 4; ++p)
            if (ledger.totals[d][p] != 0)
                sum << "ledger " << kDir[d] << ' ' << kPurpose[p] << ' '
                    << ledger.totals[d][p] << "\n";
    sum << "config:\n" << manifest.config;
    if (!sum) throw IoError("emit: write failure for summary.txt");
}

int run_experiment(const ExperimentConfig& config) {
    ModelSpec spec;
    spec.kind = config.model;
    spec.num_classes = config.num_classes;
    spec.hidden_dim = config.model == ModelKind::MLP ? config.hidden_dim : 0;
    spec.input_dim = config.input_dim;

    std::vector<ClientData> clients = build_dataset(config);
    if (config.dataset == DatasetKind::Mnist && !clients.empty())
        spec.input_dim = static_cast<int>(clients.front().train.features.cols());

    RunManifest manifest;
    manifest.code_version = kVersion;
    manifest.master_seed = config.run.seed;
    manifest.dataset_fingerprint = dataset_fingerprint(clients);
    manifest.config = config_text(config);

    const RunResult result = run_framework(config.run, spec, std::move(clients));
    emit_metrics(result.rounds, result.ledger, manifest, config.out_dir);
    return 0;
}

}  // namespace cfl::cli
