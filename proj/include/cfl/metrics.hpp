#pragma once

#include <array>
#include <utility>
#include <vector>

#include "cfl/data.hpp"
#include "cfl/model.hpp"
#include "cfl/types.hpp"

namespace cfl {

struct RoundRecord {
    int round = 0;
    std::vector<std::pair<long, long>> group_eval;  // (correct, total) per group
    double weighted_accuracy = 0.0;
    bool accuracy_valid = false;  // false until every client is covered
    double mean_train_loss = 0.0;
    double discrepancy = 0.0;
    int migrations = 0;
    long long down_scalars = 0;  // cumulative at round end
    long long up_scalars = 0;
};

enum class Direction { Down = 0, Up = 1 };
enum class Purpose { Model = 0, PretrainDelta = 1, GroupDirections = 2, InitModel = 3 };

struct TransferEvent {
    int round;  // 0 = cold start phase
    Direction direction;
    Purpose purpose;
    long long scalars;
    int client_id;   // -1 when not client-specific
    bool migration;  // attributable to a migration event
};

// Cumulative scalar-transfer counts per (direction, purpose) plus the
// per-event log the totals are reconciled against.
struct CommLedger {
    static constexpr int scalar_size_bytes = 4;

    std::array<std::array<long long, 4>, 2> totals{};  // [direction][purpose]
    std::vector<TransferEvent> events;
    long long migration_scalars = 0;

    long long total(Direction d) const {
        long long s = 0;
        for (long long v : totals[static_cast<int>(d)]) s += v;
        return s;
    }
    long long grand_total() const { return total(Direction::Down) + total(Direction::Up); }
    long long bytes() const { return grand_total() * scalar_size_bytes; }
};

void record_transfer(CommLedger& ledger, Direction direction, Purpose purpose,
                     long long scalar_count, int round = 0, int client_id = -1,
                     bool migration = false);

// Arithmetic mean of ||w_i - reference|| over the client list.
double discrepancy(const std::vector<ParamVector>& client_params,
                   const ParamVector& reference);

struct AccuracyResult {
    std::vector<std::pair<long, long>> per_group;  // (correct, total)
    double value = 0.0;
    bool valid = false;
};

// Evaluates each group model on the union of test sets of the clients whose
// latest assignment is that group (assignment[i] < 0 = still cold). valid is
// false until every client has an assignment.
AccuracyResult weighted_accuracy(const ModelSpec& spec,
                                 const std::vector<ParamVector>& group_params,
                                 const std::vector<ClientData>& clients,
                                 const std::vector<int>& latest_assignment);

struct ScoreResult {
    double score = 0.0;
    bool defined = false;  // no valid record yet
};

// Early-stopping score: max weighted accuracy over valid rounds.
ScoreResult early_stop_score(const std::vector<RoundRecord>& records);

struct VirtualProbeResult {
    std::vector<double> divergence;    // ||sum_k p_k w_e^k - v_e|| for e = 1..E
    double delta_hat = 0.0;            // empirical intra-group gradient divergence
    double lipschitz_hat = 0.0;        // empirical smoothness constant
    std::vector<double> lemma_bound;   // (delta/L)((eta L + 1)^e - 1) per epoch
    bool within_bound = true;          // informational, constants are estimates
};

// Full-batch probe of the divergence between the aggregated member models and
// a virtual group model trained on the pooled objective, epoch by epoch.
VirtualProbeResult virtual_divergence_probe(
    const ModelSpec& spec, const std::vector<const LabeledDataset*>& members,
    const std::vector<double>& weights, const ParamVector& start, int epochs,
    double eta);

}  // namespace cfl
