#pragma once

#include <cstdint>
#include <utility>

#include "cfl/data.hpp"
#include "cfl/rng.hpp"
#include "cfl/types.hpp"

namespace cfl {

enum class ModelKind { MCLR, MLP };

// Architecture of one of the two flat-parameter classifiers.
//
// Parameter layout (column-major weight blocks, biases after each block):
//   MCLR: [W (C x D)] [b (C)]
//   MLP:  [W1 (H x D)] [b1 (H)] [W2 (C x H)] [b2 (C)]
struct ModelSpec {
    ModelKind kind = ModelKind::MCLR;
    int input_dim = 0;
    int hidden_dim = 0;  // 0 for MCLR
    int num_classes = 0;

    // d_w
    int param_count() const;
    void validate() const;  // throws ConfigError
};

struct ForwardResult {
    double loss = 0.0;
    int correct = 0;
};

// Deterministic per (spec, seed). Weights uniform in (-1/sqrt(fan_in),
// +1/sqrt(fan_in)), biases zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Mean softmax cross-entropy over the batch plus argmax match count
// (ties break to the lowest class index).
ForwardResult forward_loss(const ModelSpec& spec, const ParamVector& params,
                           const Matrix& features, const IntVector& labels);

// Gradient of L(batch; params) + (mu/2)*||params - anchor||^2.
ParamVector gradient(const ModelSpec& spec, const ParamVector& params,
                     const Matrix& features, const IntVector& labels,
                     double mu = 0.0, const ParamVector& anchor = ParamVector());

struct UpdateResult {
    ParamVector delta;     // final minus initial parameters
    bool skipped = false;  // empty training set
};

// E epochs of mini-batch SGD over shuffled batches of size B (last partial
// batch kept; batch contents sorted ascending so the full-batch case is
// order-exact). Input params are not modified. `after_first_epoch`, when
// non-null, receives the parameters after epoch 1 (the pre-training state).
UpdateResult client_update(const ModelSpec& spec, const ParamVector& params,
                           const LabeledDataset& train, int epochs,
                           int batch_size, double eta, double mu,
                           const ParamVector& anchor, rng::Engine& shuffle_eng,
                           ParamVector* after_first_epoch = nullptr);

// (correct, total); empty set evaluates to (0, 0).
std::pair<long, long> evaluate(const ModelSpec& spec, const ParamVector& params,
                               const LabeledDataset& test);

}  // namespace cfl
