#include "cfl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cfl/errors.hpp"

namespace cfl {

void record_transfer(CommLedger& ledger, Direction direction, Purpose purpose,
                     long long scalar_count, int round, int client_id,
                     bool migration) {
    if (scalar_count < 0) throw NumericError("ledger: negative transfer");
    ledger.totals[static_cast<int>(direction)][static_cast<int>(purpose)] +=
        scalar_count;
    ledger.events.push_back(
        {round, direction, purpose, scalar_count, client_id, migration});
    if (migration) ledger.migration_scalars += scalar_count;
}

double discrepancy(const std::vector<ParamVector>& client_params,
                   const ParamVector& reference) {
    if (client_params.empty()) throw NumericError("discrepancy: empty client list");
    double sum = 0.0;
    for (const auto& w : client_params) {
        if (w.size() != reference.size())
            throw NumericError("discrepancy: dimension mismatch");
        sum += (w - reference).norm();
    }
    return sum / static_cast<double>(client_params.size());
}

AccuracyResult weighted_accuracy(const ModelSpec& spec,
                                 const std::vector<ParamVector>& group_params,
                                 const std::vector<ClientData>& clients,
                                 const std::vector<int>& latest_assignment) {
    AccuracyResult res;
    res.per_group.assign(group_params.size(), {0, 0});
    bool all_covered = true;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const int g = latest_assignment[i];
        if (g < 0) {
            all_covered = false;
            continue;
        }
        const auto [correct, total] =
            evaluate(spec, group_params[static_cast<std::size_t>(g)], clients[i].test);
        res.per_group[static_cast<std::size_t>(g)].first += correct;
        res.per_group[static_cast<std::size_t>(g)].second += total;
    }
    long correct = 0, total = 0;
    for (const auto& [c, t] : res.per_group) {
        correct += c;
        total += t;
    }
    res.value = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    res.valid = all_covered && total > 0;
    return res;
}

ScoreResult early_stop_score(const std::vector<RoundRecord>& records) {
    ScoreResult res;
    for (const auto& r : records) {
        if (!r.accuracy_valid) continue;
        if (!res.defined || r.weighted_accuracy > res.score)
            res.score = r.weighted_accuracy;
        res.defined = true;
    }
    return res;
}

VirtualProbeResult virtual_divergence_probe(
    const ModelSpec& spec, const std::vector<const LabeledDataset*>& members,
    const std::vector<double>& weights, const ParamVector& start, int epochs,
    double eta) {
    if (members.empty() || members.size() != weights.size())
        throw ConfigError("probe: members/weights mismatch");

    const std::size_t k = members.size();
    auto group_gradient = [&](const ParamVector& w) {
        ParamVector g = ParamVector::Zero(w.size());
        for (std::size_t i = 0; i < k; ++i)
            g += weights[i] * gradient(spec, w, members[i]->features,
                                       members[i]->labels);
        return g;
    };

    VirtualProbeResult res;
    ParamVector virtual_model = start;
    std::vector<ParamVector> member_models(k, start);

    // visited iterates for the empirical constants
    std::vector<ParamVector> trajectory{start};

    for (int e = 1; e <= epochs; ++e) {
        virtual_model -= eta * group_gradient(virtual_model);
        trajectory.push_back(virtual_model);
        ParamVector aggregated = ParamVector::Zero(start.size());
        for (std::size_t i = 0; i < k; ++i) {
            member_models[i] -=
                eta * gradient(spec, member_models[i], members[i]->features,
                               members[i]->labels);
            trajectory.push_back(member_models[i]);
            aggregated += weights[i] * member_models[i];
        }
        res.divergence.push_back((aggregated - virtual_model).norm());
    }

    // delta-hat: worst per-client deviation from the group gradient over the
    // visited iterates, combined with the aggregation weights
    std::vector<double> delta_k(k, 0.0);
    for (const auto& w : trajectory) {
        const ParamVector g = group_gradient(w);
        for (std::size_t i = 0; i < k; ++i) {
            const double d = (gradient(spec, w, members[i]->features,
                                       members[i]->labels) -
                              g)
                                 .norm();
            delta_k[i] = std::max(delta_k[i], d);
        }
    }
    res.delta_hat = 0.0;
    for (std::size_t i = 0; i < k; ++i) res.delta_hat += weights[i] * delta_k[i];

    // L-hat: max gradient-difference ratio over consecutive iterate pairs
    res.lipschitz_hat = 0.0;
    for (std::size_t a = 0; a + 1 < trajectory.size(); ++a) {
        const ParamVector& u = trajectory[a];
        const ParamVector& v = trajectory[a + 1];
        const double dist = (u - v).norm();
        if (dist < 1e-12) continue;
        for (std::size_t i = 0; i < k; ++i) {
            const double dg =
                (gradient(spec, u, members[i]->features, members[i]->labels) -
                 gradient(spec, v, members[i]->features, members[i]->labels))
                    .norm();
            res.lipschitz_hat = std::max(res.lipschitz_hat, dg / dist);
        }
    }

    if (res.lipschitz_hat > 0.0) {
        for (int e = 1; e <= epochs; ++e) {
            const double bound = res.delta_hat / res.lipschitz_hat *
                                 (std::pow(eta * res.lipschitz_hat + 1.0, e) - 1.0);
            res.lemma_bound.push_back(bound);
            if (res.divergence[static_cast<std::size_t>(e - 1)] > bound)
                res.within_bound = false;
        }
    } else {
        res.lemma_bound.assign(static_cast<std::size_t>(epochs), 0.0);
    }
    return res;
}

}  // namespace cfl
