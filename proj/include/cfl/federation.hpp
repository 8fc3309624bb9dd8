#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfl/data.hpp"
#include "cfl/metrics.hpp"
#include "cfl/model.hpp"
#include "cfl/types.hpp"

namespace cfl {

enum class Measure { EDC, MADC };
enum class Framework { FlexCFL, FedAvg, FedProx, IFCA, FeSEM };

struct RunConfig {
    int rounds = 300;            // T
    int clients_per_round = 20;  // K
    int local_epochs = 10;       // E
    int batch_size = 10;         // B
    double eta = 0.03;
    double eta_g = 0.0;
    double mu = 0.0;
    int num_groups = 3;      // m
    int pretrain_scale = 20; // alpha; alpha*m clients are pre-trained
    Measure measure = Measure::EDC;
    Framework framework = Framework::FlexCFL;
    bool migration = true;  // false = static grouping (FedGroup mode)
    std::uint64_t seed = 0;
    ShiftConfig shift;

    void validate(int n_clients) const;  // throws ConfigError
};

struct GroupState {
    int group_id = 0;
    ParamVector params;     // w^(g), updated every round
    ParamVector direction;  // delta-w0^(g), fixed after group cold start
    std::vector<int> members;
};

struct ClientRuntime {
    int client_id = 0;
    std::optional<int> assigned_group;
    ParamVector cached_w0;
    std::vector<ParamVector> cached_directions;
    LabelHistogram snapshot;  // taken at last (re-)cold-start
    double tau = 0.0;
    bool received_directions = false;  // the one-time (W0, w0) transfer happened
};

struct AuxServerState {
    ParamVector w0;
    std::vector<ParamVector> group_directions;  // immutable after cold start
    std::vector<GroupState> groups;
};

struct RunResult {
    std::vector<RoundRecord> rounds;
    CommLedger ledger;
    std::vector<std::vector<ParamVector>> round_group_params;  // [round][group]
    std::vector<int> final_assignment;  // -1 = never assigned
    long long total_migrations = 0;
    AuxServerState server;
    int skipped_clients = 0;  // empty-data clients encountered
};

// Uniform K-subset of `eligible`, ascending; a pure function of (seed, round).
std::vector<int> select_clients(int round, int k, const std::vector<int>& eligible,
                                std::uint64_t master_seed);

// base + sum_i (n_i / sum n) * delta_i, reduced in the given order.
ParamVector weighted_aggregate(const ParamVector& base,
                               const std::vector<ParamVector>& deltas,
                               const std::vector<long>& sizes);

// Client cold start rule: the group whose stored direction minimizes the
// normalized cosine dissimilarity (-cos + 1)/2; ties to the lowest index.
int nearest_group_by_direction(const std::vector<ParamVector>& directions,
                               const ParamVector& delta_pre);

// argmin_j ||local - group_j|| with ties to the lowest index.
int nearest_group_l2(const std::vector<ParamVector>& group_params,
                     const ParamVector& local_params);

// Migration triggers only strictly past the threshold.
bool migration_due(const LabelHistogram& snapshot, const LabelHistogram& current,
                   double tau);

// Simultaneous inter-group aggregation from a snapshot of all temp models:
// out_j = temp_j + eta_g * sum_{l != j} temp_l / ||temp_l||.
// Zero-norm contributions are skipped. eta_g = 0 or a single group returns
// the input unchanged.
std::vector<ParamVector> inter_group_aggregate(const std::vector<ParamVector>& temp,
                                               double eta_g);

// Runs the configured framework over a copy of the client datasets.
RunResult run_framework(const RunConfig& config, const ModelSpec& spec,
                        std::vector<ClientData> clients);

}  // namespace cfl
