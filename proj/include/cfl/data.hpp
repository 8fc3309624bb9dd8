#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfl/rng.hpp"
#include "cfl/types.hpp"

namespace cfl {

struct LabeledDataset {
    Matrix features;    // n x dim
    IntVector labels;   // n, values in [0, num_classes)
    int num_classes = 0;

    Eigen::Index size() const { return features.rows(); }
    bool empty() const { return features.rows() == 0; }
};

// Appends the rows of `extra` to `base` (same dim and class count).
void append_samples(LabeledDataset& base, const LabeledDataset& extra);

struct ClientData {
    int client_id = 0;
    LabeledDataset train;
    LabeledDataset test;
    LabeledDataset held_back;            // staged rows for incremental release
    std::vector<int> held_chunk_sizes;   // release chunk row counts, in order
};

// Reproducible description of a non-IID split: (source, manifest) regenerates
// identical client datasets.
struct PartitionManifest {
    std::uint64_t seed = 0;
    int classes_per_client = 0;
    double power_exponent = 0.0;
    double test_fraction = 0.0;
    long train_budget = 0;  // total train samples across clients; 0 = fill source
    std::vector<std::vector<long>> train_indices;  // per client, into source
    std::vector<std::vector<long>> test_indices;

    void save(const std::string& path) const;
    static PartitionManifest load(const std::string& path);
};

enum class ShiftKind { None, SwapAll, SwapPart, Incremental };

struct ShiftConfig {
    ShiftKind kind = ShiftKind::None;
    double swap_probability = 0.05;
    double release_fraction = 0.25;
    int release_period_rounds = 50;
};

struct ShiftRecord {
    bool mutated = false;
    int client_a = -1;
    int client_b = -1;
    int label_a = -1;  // swap-part only
    int label_b = -1;
};

// Client sizes proportional to rank^(-exponent), clamped to at least
// min_samples. exponent = 0 gives equal sizes.
struct SizeLaw {
    int base_size = 100;
    double exponent = 1.1;
    int min_samples = 10;
};

// IDX (big-endian) ingestion; pixels scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);
// Inverse of load_idx for fixtures and exports; values quantized to bytes.
void write_idx(const LabeledDataset& data, const std::string& images_path,
               const std::string& labels_path);

// Synthetic(alpha, beta) federated dataset. alpha controls model
// heterogeneity across clients, beta controls feature heterogeneity.
std::vector<ClientData> generate_synthetic(double alpha, double beta,
                                           int n_clients, int input_dim,
                                           int num_classes, const SizeLaw& sizes,
                                           std::uint64_t seed,
                                           double test_fraction = 0.2);

// Two client populations over shared feature clusters with the labels of the
// second population permuted (c -> C-1-c): opposed optimization goals for a
// single consensus model. Every client samples all feature classes under its
// own skewed mixture (lognormal weights, spread mix_sigma), so client label
// histograms differ while update directions align within a population.
std::vector<ClientData> generate_two_population(int n_clients, int num_classes,
                                                int input_dim, double mix_sigma,
                                                const SizeLaw& sizes,
                                                std::uint64_t seed,
                                                double test_fraction = 0.2);

// Non-IID split: every client holds exactly classes_per_client distinct
// labels, train sizes follow the power law, sampling without replacement.
std::pair<PartitionManifest, std::vector<ClientData>> partition_noniid(
    const LabeledDataset& source, int n_clients, int classes_per_client,
    double power_exponent, double test_fraction, std::uint64_t seed,
    long train_budget = 0, int min_samples = 10);

// Rebuilds client datasets from the manifest's index lists.
std::vector<ClientData> materialize(const LabeledDataset& source,
                                    const PartitionManifest& manifest);

LabelHistogram label_histogram(const LabeledDataset& train, int num_classes);

// n_old * W1(normalize(old), normalize(new)) with unit label spacing;
// 0 when either histogram is empty.
double shift_distance(const LabelHistogram& old_counts,
                      const LabelHistogram& new_counts);

// Distribution shift threshold: a 20% training data change, spread over
// the label axis, counts as a shift.
double threshold_tau(long n_i, int label_size);

// Swap the entire datasets of two random clients with the given per-round
// probability (ids stay in place).
ShiftRecord shift_swap_all(std::vector<ClientData>& clients, double probability,
                           rng::Engine& eng);

// Exchange all samples of one label unique to each of two random clients;
// no-op (with record) when the picked pair has no unique label on each side.
ShiftRecord shift_swap_part(std::vector<ClientData>& clients, double probability,
                            rng::Engine& eng);

// Stages all but `release_fraction` of each client's train set into
// held-back chunks with the train set's label mix.
void prepare_incremental(std::vector<ClientData>& clients,
                         double release_fraction);

// On rounds that are multiples of `period`, moves each client's next
// held-back chunk into its train set.
ShiftRecord shift_incremental(std::vector<ClientData>& clients, int round,
                              double release_fraction, int period);

}  // namespace cfl
