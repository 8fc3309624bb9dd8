#include "cfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "cfl/clustering.hpp"
#include "cfl/errors.hpp"

namespace cfl {

void RunConfig::validate(int n_clients) const {
    if (rounds < 0) throw ConfigError("config: rounds must be >= 0");
    if (clients_per_round < 1) throw ConfigError("config: clients_per_round must be >= 1");
    if (clients_per_round > n_clients)
        throw ConfigError("config: clients_per_round exceeds client count");
    if (local_epochs < 1) throw ConfigError("config: local_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (eta < 0.0) throw ConfigError("config: eta must be >= 0");
    if (eta_g < 0.0) throw ConfigError("config: eta_g must be >= 0");
    if (mu < 0.0) throw ConfigError("config: mu must be >= 0");
    if (num_groups < 1) throw ConfigError("config: groups must be >= 1");
    const bool clustered = framework == Framework::FlexCFL ||
                           framework == Framework::IFCA ||
                           framework == Framework::FeSEM;
    if (clustered && num_groups > n_clients)
        throw ConfigError("config: more groups than clients");
    if (framework == Framework::FlexCFL && num_groups > 1) {
        if (pretrain_scale < 1) throw ConfigError("config: pretrain_scale must be >= 1");
        if (pretrain_scale * num_groups > n_clients)
            throw ConfigError("config: pretrain_scale * groups exceeds client count");
    }
    if (shift.kind == ShiftKind::SwapAll || shift.kind == ShiftKind::SwapPart) {
        if (shift.swap_probability < 0.0 || shift.swap_probability > 1.0)
            throw ConfigError("config: swap_prob must be in [0, 1]");
    }
    if (shift.kind == ShiftKind::Incremental) {
        if (shift.release_fraction <= 0.0 || shift.release_fraction > 1.0)
            throw ConfigError("config: release_fraction must be in (0, 1]");
        if (shift.release_period_rounds < 1)
            throw ConfigError("config: release_period must be >= 1");
    }
}

std::vector<int> select_clients(int round, int k, const std::vector<int>& eligible,
                                std::uint64_t master_seed) {
    if (k > static_cast<int>(eligible.size()))
        throw ConfigError("select_clients: K exceeds eligible set");
    rng::Engine eng(rng::derive(master_seed, "selection",
                                static_cast<std::uint64_t>(round)));
    const std::vector<int> pick =
        rng::sample_without_replacement(static_cast<int>(eligible.size()), k, eng);
    std::vector<int> out;
    out.reserve(pick.size());
    for (int p : pick) out.push_back(eligible[static_cast<std::size_t>(p)]);
    return out;
}

ParamVector weighted_aggregate(const ParamVector& base,
                               const std::vector<ParamVector>& deltas,
                               const std::vector<long>& sizes) {
    if (deltas.size() != sizes.size())
        throw NumericError("aggregate: deltas/sizes mismatch");
    long total = 0;
    for (long s : sizes) total += s;
    if (total <= 0) return base;
    ParamVector out = base;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        out += (static_cast<double>(sizes[i]) / static_cast<double>(total)) * deltas[i];
    return out;
}

int nearest_group_by_direction(const std::vector<ParamVector>& directions,
                               const ParamVector& delta_pre) {
    if (directions.empty()) throw NumericError("cold start: no group directions");
    if (delta_pre.norm() == 0.0)
        throw NumericError("cold start: zero pre-training update");
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < directions.size(); ++j) {
        const double dn = directions[j].norm();
        if (dn == 0.0)
            throw NumericError("cold start: zero direction for group " +
                               std::to_string(j));
        const double cosine = directions[j].dot(delta_pre) / (dn * delta_pre.norm());
        const double dissimilarity = (-cosine + 1.0) / 2.0;
        if (dissimilarity < best_score) {  // strict: ties keep the lowest index
            best_score = dissimilarity;
            best = static_cast<int>(j);
        }
    }
    return best;
}

bool migration_due(const LabelHistogram& snapshot, const LabelHistogram& current,
                   double tau) {
    return shift_distance(snapshot, current) > tau;
}

int nearest_group_l2(const std::vector<ParamVector>& group_params,
                     const ParamVector& local_params) {
    if (group_params.empty()) throw NumericError("fesem: no groups");
    int best = 0;
    double best_d = (local_params - group_params[0]).norm();
    for (std::size_t j = 1; j < group_params.size(); ++j) {
        const double d = (local_params - group_params[j]).norm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

std::vector<ParamVector> inter_group_aggregate(const std::vector<ParamVector>& temp,
                                               double eta_g) {
    if (eta_g == 0.0 || temp.size() < 2) return temp;
    // simultaneous update from the pre-aggregation snapshot
    std::vector<ParamVector> out = temp;
    for (std::size_t j = 0; j < temp.size(); ++j) {
        for (std::size_t l = 0; l < temp.size(); ++l) {
            if (l == j) continue;
            const double norm = temp[l].norm();
            if (norm == 0.0) {
                std::fprintf(stderr,
                             "inter-group: skipping zero-norm model of group %zu\n",
                             l);
                continue;
            }
            out[j] += (eta_g / norm) * temp[l];
        }
    }
    return out;
}

namespace {

class Simulator {
public:
    Simulator(RunConfig config, ModelSpec spec, std::vector<ClientData> clients)
        : cfg_(std::move(config)), spec_(std::move(spec)), clients_(std::move(clients)) {
        spec_.validate();
        cfg_.validate(static_cast<int>(clients_.size()));
        num_classes_ = 0;
        for (const auto& c : clients_)
            num_classes_ = std::max(num_classes_, c.train.num_classes);
        if (num_classes_ < 1) throw ConfigError("run: dataset has no classes");
        all_ids_.resize(clients_.size());
        for (std::size_t i = 0; i < clients_.size(); ++i)
            all_ids_[i] = static_cast<int>(i);
        for (std::size_t i = 0; i < clients_.size(); ++i)
            engines_.emplace_back(rng::derive(cfg_.seed, "shuffle",
                                              static_cast<std::uint64_t>(i)));
        runtimes_.resize(clients_.size());
        for (std::size_t i = 0; i < clients_.size(); ++i)
            runtimes_[i].client_id = static_cast<int>(i);
        d_w_ = spec_.param_count();
    }

    RunResult run() {
        if (cfg_.shift.kind == ShiftKind::Incremental)
            prepare_incremental(clients_, cfg_.shift.release_fraction);
        switch (cfg_.framework) {
            case Framework::FedAvg:
            case Framework::FedProx:
                run_single_model();
                break;
            case Framework::FlexCFL:
                run_flexcfl();
                break;
            case Framework::IFCA:
                run_ifca();
                break;
            case Framework::FeSEM:
                run_fesem();
                break;
        }
        return std::move(result_);
    }

private:
    long train_size(int ci) const {
        return static_cast<long>(clients_[static_cast<std::size_t>(ci)].train.size());
    }
    const LabeledDataset& train(int ci) const {
        return clients_[static_cast<std::size_t>(ci)].train;
    }
    rng::Engine& engine(int ci) { return engines_[static_cast<std::size_t>(ci)]; }
    ClientRuntime& runtime(int ci) { return runtimes_[static_cast<std::size_t>(ci)]; }

    void apply_shift(int round) {
        switch (cfg_.shift.kind) {
            case ShiftKind::None:
                break;
            case ShiftKind::SwapAll: {
                rng::Engine eng(rng::derive(cfg_.seed, "shift",
                                            static_cast<std::uint64_t>(round)));
                shift_swap_all(clients_, cfg_.shift.swap_probability, eng);
                break;
            }
            case ShiftKind::SwapPart: {
                rng::Engine eng(rng::derive(cfg_.seed, "shift",
                                            static_cast<std::uint64_t>(round)));
                shift_swap_part(clients_, cfg_.shift.swap_probability, eng);
                break;
            }
            case ShiftKind::Incremental:
                shift_incremental(clients_, round, cfg_.shift.release_fraction,
                                  cfg_.shift.release_period_rounds);
                break;
        }
    }

    struct RoundStats {
        double loss_sum = 0.0;
        long loss_weight = 0;
        double delta_norm_sum = 0.0;
        int participants = 0;
    };

    void finish_round(int round, const std::vector<ParamVector>& group_params,
                      const std::vector<int>& latest, int migrations,
                      const RoundStats& stats) {
        const AccuracyResult acc =
            weighted_accuracy(spec_, group_params, clients_, latest);
        RoundRecord rec;
        rec.round = round;
        rec.group_eval = acc.per_group;
        rec.weighted_accuracy = acc.value;
        rec.accuracy_valid = acc.valid;
        rec.mean_train_loss =
            stats.loss_weight > 0 ? stats.loss_sum / static_cast<double>(stats.loss_weight) : 0.0;
        rec.discrepancy = stats.participants > 0
                              ? stats.delta_norm_sum / static_cast<double>(stats.participants)
                              : 0.0;
        rec.migrations = migrations;
        rec.down_scalars = result_.ledger.total(Direction::Down);
        rec.up_scalars = result_.ledger.total(Direction::Up);
        result_.rounds.push_back(std::move(rec));
        result_.round_group_params.push_back(group_params);
    }

    std::vector<int> assignment_vector() const {
        std::vector<int> latest(clients_.size(), -1);
        for (std::size_t i = 0; i < clients_.size(); ++i)
            if (runtimes_[i].assigned_group) latest[i] = *runtimes_[i].assigned_group;
        return latest;
    }

    // ----- FedAvg / FedProx ------------------------------------------------

    void run_single_model() {
        ParamVector global = init_params(spec_, rng::derive(cfg_.seed, "init"));
        result_.server.w0 = global;
        std::vector<int> latest(clients_.size(), 0);

        for (int t = 1; t <= cfg_.rounds; ++t) {
            apply_shift(t);
            const std::vector<int> selected =
                select_clients(t, cfg_.clients_per_round, all_ids_, cfg_.seed);
            RoundStats stats;
            std::vector<ParamVector> deltas;
            std::vector<long> sizes;
            for (int ci : selected) {
                record_transfer(result_.ledger, Direction::Down, Purpose::Model,
                                d_w_, t, ci);
                if (train_size(ci) == 0) {
                    ++result_.skipped_clients;
                    continue;
                }
                stats.loss_sum += static_cast<double>(train_size(ci)) *
                                  forward_loss(spec_, global, train(ci).features,
                                               train(ci).labels)
                                      .loss;
                stats.loss_weight += train_size(ci);
                const UpdateResult upd =
                    client_update(spec_, global, train(ci), cfg_.local_epochs,
                                  cfg_.batch_size, cfg_.eta, cfg_.mu, global,
                                  engine(ci));
                record_transfer(result_.ledger, Direction::Up, Purpose::Model,
                                d_w_, t, ci);
                stats.delta_norm_sum += upd.delta.norm();
                ++stats.participants;
                deltas.push_back(upd.delta);
                sizes.push_back(train_size(ci));
            }
            global = weighted_aggregate(global, deltas, sizes);
            finish_round(t, {global}, latest, 0, stats);
        }
        result_.final_assignment = latest;
        result_.server.groups = {GroupState{0, global, ParamVector::Zero(d_w_),
                                            all_ids_}};
    }

    // ----- FlexCFL ----------------------------------------------------------

    void warm_client(int ci, int group, const ParamVector& w0,
                     const std::vector<ParamVector>& directions) {
        ClientRuntime& rt = runtime(ci);
        rt.assigned_group = group;
        rt.cached_w0 = w0;
        rt.cached_directions = directions;
        rt.snapshot = label_histogram(train(ci), num_classes_);
        rt.tau = threshold_tau(train_size(ci), num_classes_);
    }

    void group_cold_start(const ParamVector& w0) {
        const int m = cfg_.num_groups;
        const int cohort_size = cfg_.pretrain_scale * m;
        const std::vector<int> cohort =
            select_clients(0, cohort_size, all_ids_, cfg_.seed);

        std::vector<int> usable;
        std::vector<ParamVector> pretrain_deltas;  // after one epoch, for clustering
        std::vector<ParamVector> full_deltas;      // after E epochs, first aggregation
        for (int ci : cohort) {
            record_transfer(result_.ledger, Direction::Down, Purpose::InitModel,
                            d_w_, 0, ci);
            if (train_size(ci) == 0) {
                ++result_.skipped_clients;
                continue;
            }
            ParamVector after_first;
            const UpdateResult upd = client_update(
                spec_, w0, train(ci), cfg_.local_epochs, cfg_.batch_size, cfg_.eta,
                cfg_.mu, w0, engine(ci), &after_first);
            const ParamVector delta_pre = after_first - w0;
            if (delta_pre.norm() == 0.0) {
                // zero update direction: excluded from clustering, stays cold
                ++result_.skipped_clients;
                continue;
            }
            record_transfer(result_.ledger, Direction::Up, Purpose::PretrainDelta,
                            d_w_, 0, ci);
            record_transfer(result_.ledger, Direction::Up, Purpose::Model, d_w_, 0,
                            ci);
            usable.push_back(ci);
            pretrain_deltas.push_back(delta_pre);
            full_deltas.push_back(upd.delta);
        }
        if (static_cast<int>(usable.size()) < m)
            throw ConfigError("cold start: fewer usable pre-training clients than groups");

        Matrix delta_w(static_cast<Eigen::Index>(usable.size()), d_w_);
        for (std::size_t i = 0; i < usable.size(); ++i)
            delta_w.row(static_cast<Eigen::Index>(i)) = pretrain_deltas[i];

        std::vector<int> assignment;
        if (cfg_.measure == Measure::EDC) {
            const DirectionBasis basis = truncated_svd(delta_w.transpose(), m);
            const Matrix embedding = edc_embed(delta_w, basis);
            rng::Engine kmeans_eng(rng::derive(cfg_.seed, "kmeans"));
            assignment = kmeanspp(embedding, m, kmeans_eng).assignments;
        } else {
            const Matrix cosine = cosine_kernel(delta_w, delta_w);
            assignment = hierarchical_complete(madc(cosine), m).assignments;
        }

        groups_.assign(static_cast<std::size_t>(m), GroupState{});
        for (int j = 0; j < m; ++j) groups_[static_cast<std::size_t>(j)].group_id = j;
        for (std::size_t i = 0; i < usable.size(); ++i)
            groups_[static_cast<std::size_t>(assignment[i])].members.push_back(usable[i]);

        std::vector<ParamVector> directions;
        for (int j = 0; j < m; ++j) {
            GroupState& g = groups_[static_cast<std::size_t>(j)];
            std::sort(g.members.begin(), g.members.end());
            if (g.members.empty()) {
                g.direction = ParamVector::Zero(d_w_);
                g.params = w0;
            } else {
                // the retained full-E updates make the first intra-group
                // aggregation: plain average, then re-based on w0
                ParamVector mean = ParamVector::Zero(d_w_);
                for (int ci : g.members) {
                    const auto it = std::find(usable.begin(), usable.end(), ci);
                    mean += full_deltas[static_cast<std::size_t>(it - usable.begin())];
                }
                mean /= static_cast<double>(g.members.size());
                g.direction = mean;
                g.params = w0 + mean;
            }
            directions.push_back(groups_[static_cast<std::size_t>(j)].direction);
        }
        result_.server.group_directions = directions;

        // one-time (W0, w0) broadcast to the pre-trained clients; they already
        // hold w0, so only the m group vectors travel
        for (std::size_t i = 0; i < usable.size(); ++i) {
            const int ci = usable[i];
            warm_client(ci, assignment[i], w0, directions);
            runtime(ci).received_directions = true;
            record_transfer(result_.ledger, Direction::Down,
                            Purpose::GroupDirections,
                            static_cast<long long>(m) * d_w_, 0, ci);
        }
    }

    // Selected cold client: one-time (w0, W0) transfer, one local pre-training
    // epoch, cosine assignment. Returns false when the client stays cold.
    bool newcomer_cold_start(int ci, int round) {
        ClientRuntime& rt = runtime(ci);
        if (!rt.received_directions) {
            record_transfer(result_.ledger, Direction::Down, Purpose::InitModel,
                            d_w_, round, ci);
            record_transfer(result_.ledger, Direction::Down,
                            Purpose::GroupDirections,
                            static_cast<long long>(cfg_.num_groups) * d_w_, round,
                            ci);
            rt.received_directions = true;
            rt.cached_w0 = result_.server.w0;
            rt.cached_directions = result_.server.group_directions;
        }
        const UpdateResult upd =
            client_update(spec_, rt.cached_w0, train(ci), 1, cfg_.batch_size,
                          cfg_.eta, cfg_.mu, rt.cached_w0, engine(ci));
        if (upd.skipped || upd.delta.norm() == 0.0) {
            ++result_.skipped_clients;
            return false;  // stays cold
        }
        const int g = nearest_group_by_direction(rt.cached_directions, upd.delta);
        warm_client(ci, g, rt.cached_w0, rt.cached_directions);
        auto& members = groups_[static_cast<std::size_t>(g)].members;
        members.insert(std::upper_bound(members.begin(), members.end(), ci), ci);
        return true;
    }

    // Local re-cold-start against the cached directions: zero network transfer.
    int run_migrations(int round) {
        int migrations = 0;
        for (int ci : all_ids_) {
            ClientRuntime& rt = runtime(ci);
            if (!rt.assigned_group) continue;
            const LabelHistogram current = label_histogram(train(ci), num_classes_);
            if (!migration_due(rt.snapshot, current, rt.tau)) continue;

            const int old_group = *rt.assigned_group;
            const UpdateResult upd =
                client_update(spec_, rt.cached_w0, train(ci), 1, cfg_.batch_size,
                              cfg_.eta, cfg_.mu, rt.cached_w0, engine(ci));
            auto& old_members = groups_[static_cast<std::size_t>(old_group)].members;
            old_members.erase(
                std::find(old_members.begin(), old_members.end(), ci));
            if (upd.skipped || upd.delta.norm() == 0.0) {
                rt.assigned_group.reset();
                ++result_.skipped_clients;
            } else {
                const int g = nearest_group_by_direction(rt.cached_directions, upd.delta);
                rt.assigned_group = g;
                auto& members = groups_[static_cast<std::size_t>(g)].members;
                members.insert(std::upper_bound(members.begin(), members.end(), ci),
                               ci);
            }
            rt.snapshot = current;
            rt.tau = threshold_tau(train_size(ci), num_classes_);
            // the move is local: an explicit zero-scalar ledger event keeps
            // migration cost visible in the accounting
            record_transfer(result_.ledger, Direction::Down,
                            Purpose::GroupDirections, 0, round, ci, true);
            ++migrations;
            ++result_.total_migrations;
        }
        return migrations;
    }

    void run_flexcfl() {
        const int m = cfg_.num_groups;
        const ParamVector w0 = init_params(spec_, rng::derive(cfg_.seed, "init"));
        result_.server.w0 = w0;

        if (m == 1) {
            // a single group degrades the framework to FedAvg: clustering has
            // no decision to make, so pre-training is skipped and every client
            // starts in the group at w0
            groups_.assign(1, GroupState{0, w0, ParamVector::Zero(d_w_), all_ids_});
            result_.server.group_directions = {groups_[0].direction};
            for (int ci : all_ids_) {
                warm_client(ci, 0, w0, result_.server.group_directions);
                runtime(ci).received_directions = true;
            }
        } else {
            group_cold_start(w0);
        }

        for (int t = 1; t <= cfg_.rounds; ++t) {
            apply_shift(t);
            const int migrations =
                (m > 1 && cfg_.migration) ? run_migrations(t) : 0;
            const std::vector<int> selected =
                select_clients(t, cfg_.clients_per_round, all_ids_, cfg_.seed);

            std::vector<char> fresh(clients_.size(), 0);
            if (m > 1) {
                for (int ci : selected)
                    if (!runtime(ci).assigned_group && newcomer_cold_start(ci, t))
                        fresh[static_cast<std::size_t>(ci)] = 1;
            }

            RoundStats stats;
            std::vector<ParamVector> temps(static_cast<std::size_t>(m));
            for (int j = 0; j < m; ++j) {
                GroupState& group = groups_[static_cast<std::size_t>(j)];
                std::vector<int> in_group;
                std::set_intersection(selected.begin(), selected.end(),
                                      group.members.begin(), group.members.end(),
                                      std::back_inserter(in_group));
                std::vector<ParamVector> deltas;
                std::vector<long> sizes;
                const ParamVector start = group.params;
                for (int ci : in_group) {
                    record_transfer(result_.ledger, Direction::Down, Purpose::Model,
                                    d_w_, t, ci);
                    if (train_size(ci) == 0) {
                        ++result_.skipped_clients;
                        continue;
                    }
                    stats.loss_sum +=
                        static_cast<double>(train_size(ci)) *
                        forward_loss(spec_, start, train(ci).features,
                                     train(ci).labels)
                            .loss;
                    stats.loss_weight += train_size(ci);
                    // a client cold-started this round already spent one
                    // pre-training epoch; it continues with E-1 regular epochs
                    const int epochs = fresh[static_cast<std::size_t>(ci)]
                                           ? cfg_.local_epochs - 1
                                           : cfg_.local_epochs;
                    ParamVector delta = ParamVector::Zero(d_w_);
                    if (epochs > 0)
                        delta = client_update(spec_, start, train(ci), epochs,
                                              cfg_.batch_size, cfg_.eta, cfg_.mu,
                                              start, engine(ci))
                                    .delta;
                    record_transfer(result_.ledger, Direction::Up, Purpose::Model,
                                    d_w_, t, ci);
                    stats.delta_norm_sum += delta.norm();
                    ++stats.participants;
                    deltas.push_back(std::move(delta));
                    sizes.push_back(train_size(ci));
                }
                temps[static_cast<std::size_t>(j)] =
                    deltas.empty() ? group.params
                                   : weighted_aggregate(group.params, deltas, sizes);
            }
            const std::vector<ParamVector> updated =
                inter_group_aggregate(temps, cfg_.eta_g);
            for (int j = 0; j < m; ++j)
                groups_[static_cast<std::size_t>(j)].params =
                    updated[static_cast<std::size_t>(j)];

            finish_round(t, updated, assignment_vector(), migrations, stats);
        }
        result_.final_assignment = assignment_vector();
        result_.server.groups = groups_;
    }

    // ----- IFCA-lite --------------------------------------------------------

    void run_ifca() {
        const int m = cfg_.num_groups;
        const ParamVector w0 = init_params(spec_, rng::derive(cfg_.seed, "init"));
        result_.server.w0 = w0;
        rng::Engine perturb(rng::derive(cfg_.seed, "ifca-init"));
        std::vector<ParamVector> params(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            params[static_cast<std::size_t>(j)] = w0;
            for (Eigen::Index i = 0; i < d_w_; ++i)
                params[static_cast<std::size_t>(j)](i) += 0.01 * perturb.normal();
        }
        std::vector<int> latest(clients_.size(), -1);

        for (int t = 1; t <= cfg_.rounds; ++t) {
            apply_shift(t);
            const std::vector<int> selected =
                select_clients(t, cfg_.clients_per_round, all_ids_, cfg_.seed);
            RoundStats stats;
            std::vector<std::vector<ParamVector>> group_deltas(
                static_cast<std::size_t>(m));
            for (int ci : selected) {
                // every selected client downloads all m group models
                record_transfer(result_.ledger, Direction::Down, Purpose::Model,
                                static_cast<long long>(m) * d_w_, t, ci);
                if (train_size(ci) == 0) {
                    ++result_.skipped_clients;
                    continue;
                }
                int best = 0;
                double best_loss = std::numeric_limits<double>::infinity();
                for (int j = 0; j < m; ++j) {
                    const double loss =
                        forward_loss(spec_, params[static_cast<std::size_t>(j)],
                                     train(ci).features, train(ci).labels)
                            .loss;
                    if (loss < best_loss) {  // ties keep the lowest group index
                        best_loss = loss;
                        best = j;
                    }
                }
                latest[static_cast<std::size_t>(ci)] = best;
                stats.loss_sum += static_cast<double>(train_size(ci)) * best_loss;
                stats.loss_weight += train_size(ci);
                const UpdateResult upd = client_update(
                    spec_, params[static_cast<std::size_t>(best)], train(ci),
                    cfg_.local_epochs, cfg_.batch_size, cfg_.eta, cfg_.mu,
                    params[static_cast<std::size_t>(best)], engine(ci));
                record_transfer(result_.ledger, Direction::Up, Purpose::Model, d_w_,
                                t, ci);
                stats.delta_norm_sum += upd.delta.norm();
                ++stats.participants;
                group_deltas[static_cast<std::size_t>(best)].push_back(upd.delta);
            }
            for (int j = 0; j < m; ++j) {
                auto& deltas = group_deltas[static_cast<std::size_t>(j)];
                if (deltas.empty()) continue;  // empty cluster: carried over
                ParamVector mean = ParamVector::Zero(d_w_);
                for (const auto& d : deltas) mean += d;
                params[static_cast<std::size_t>(j)] +=
                    mean / static_cast<double>(deltas.size());
            }
            finish_round(t, params, latest, 0, stats);
        }
        result_.final_assignment = latest;
        for (int j = 0; j < m; ++j)
            result_.server.groups.push_back(
                GroupState{j, params[static_cast<std::size_t>(j)],
                           ParamVector::Zero(d_w_), {}});
    }

    // ----- FeSEM-lite -------------------------------------------------------

    void run_fesem() {
        const int m = cfg_.num_groups;
        const ParamVector w0 = init_params(spec_, rng::derive(cfg_.seed, "init"));
        result_.server.w0 = w0;
        std::vector<ParamVector> params(static_cast<std::size_t>(m), w0);
        // identical initial group models: every client tie-breaks to group 0
        std::vector<int> latest(clients_.size(), 0);

        for (int t = 1; t <= cfg_.rounds; ++t) {
            apply_shift(t);
            const std::vector<int> selected =
                select_clients(t, cfg_.clients_per_round, all_ids_, cfg_.seed);
            RoundStats stats;
            const std::vector<ParamVector> reference = params;  // E-step snapshot
            std::vector<std::vector<ParamVector>> group_models(
                static_cast<std::size_t>(m));
            for (int ci : selected) {
                record_transfer(result_.ledger, Direction::Down, Purpose::Model,
                                d_w_, t, ci);
                if (train_size(ci) == 0) {
                    ++result_.skipped_clients;
                    continue;
                }
                const int g = latest[static_cast<std::size_t>(ci)];
                stats.loss_sum +=
                    static_cast<double>(train_size(ci)) *
                    forward_loss(spec_, reference[static_cast<std::size_t>(g)],
                                 train(ci).features, train(ci).labels)
                        .loss;
                stats.loss_weight += train_size(ci);
                const UpdateResult upd = client_update(
                    spec_, reference[static_cast<std::size_t>(g)], train(ci),
                    cfg_.local_epochs, cfg_.batch_size, cfg_.eta, cfg_.mu,
                    reference[static_cast<std::size_t>(g)], engine(ci));
                record_transfer(result_.ledger, Direction::Up, Purpose::Model, d_w_,
                                t, ci);
                stats.delta_norm_sum += upd.delta.norm();
                ++stats.participants;
                const ParamVector local =
                    reference[static_cast<std::size_t>(g)] + upd.delta;
                const int assigned = nearest_group_l2(reference, local);
                latest[static_cast<std::size_t>(ci)] = assigned;
                group_models[static_cast<std::size_t>(assigned)].push_back(local);
            }
            for (int j = 0; j < m; ++j) {
                auto& models = group_models[static_cast<std::size_t>(j)];
                if (models.empty()) continue;  // carried over
                ParamVector mean = ParamVector::Zero(d_w_);
                for (const auto& w : models) mean += w;
                params[static_cast<std::size_t>(j)] =
                    mean / static_cast<double>(models.size());
            }
            finish_round(t, params, latest, 0, stats);
        }
        result_.final_assignment = latest;
        for (int j = 0; j < m; ++j)
            result_.server.groups.push_back(
                GroupState{j, params[static_cast<std::size_t>(j)],
                           ParamVector::Zero(d_w_), {}});
    }

    RunConfig cfg_;
    ModelSpec spec_;
    std::vector<ClientData> clients_;
    std::vector<int> all_ids_;
    std::vector<rng::Engine> engines_;
    std::vector<ClientRuntime> runtimes_;
    std::vector<GroupState> groups_;
    int num_classes_ = 0;
    Eigen::Index d_w_ = 0;
    RunResult result_;
};

}  // namespace

RunResult run_framework(const RunConfig& config, const ModelSpec& spec,
                        std::vector<ClientData> clients) {
    return Simulator(config, spec, std::move(clients)).run();
}

}  // namespace cfl
