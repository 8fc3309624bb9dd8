#include "cfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cfl/errors.hpp"

namespace cfl {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MutMap = Eigen::Map<Matrix>;
using MutVecMap = Eigen::Map<Eigen::VectorXd>;

// Row-wise softmax cross-entropy pieces shared by forward and backward.
struct SoftmaxCE {
    Matrix probs;   // B x C
    double loss;    // mean over the batch
    int correct;
};

SoftmaxCE softmax_ce(const Matrix& logits, const IntVector& labels) {
    const Eigen::Index b = logits.rows();
    SoftmaxCE out;
    out.probs.resize(b, logits.cols());
    double loss = 0.0;
    int correct = 0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto row = logits.row(i);
        Eigen::Index best = 0;
        double maxv = row(0);
        for (Eigen::Index c = 1; c < row.size(); ++c) {
            if (row(c) > maxv) {  // strict: ties keep the lowest class index
                maxv = row(c);
                best = c;
            }
        }
        const Eigen::ArrayXd shifted = (row.array() - maxv).transpose();
        const Eigen::ArrayXd expz = shifted.exp();
        const double denom = expz.sum();
        out.probs.row(i) = (expz / denom).transpose();
        loss += std::log(denom) - shifted(labels(i));
        if (best == labels(i)) ++correct;
    }
    out.loss = loss / static_cast<double>(b);
    out.correct = correct;
    return out;
}

void check_batch(const ModelSpec& spec, const Matrix& features,
                 const IntVector& labels) {
    if (features.rows() == 0 || features.rows() != labels.size())
        throw ConfigError("batch: features and labels must have equal length >= 1");
    if (features.cols() != spec.input_dim)
        throw ConfigError("batch: feature dim " + std::to_string(features.cols()) +
                          " != input_dim " + std::to_string(spec.input_dim));
}

void check_params(const ModelSpec& spec, const ParamVector& params,
                  const char* what) {
    if (params.size() != spec.param_count())
        throw ConfigError(std::string(what) + ": length " +
                          std::to_string(params.size()) + " != d_w " +
                          std::to_string(spec.param_count()));
}

}  // namespace

int ModelSpec::param_count() const {
    if (kind == ModelKind::MCLR) return (input_dim + 1) * num_classes;
    return (input_dim + 1) * hidden_dim + (hidden_dim + 1) * num_classes;
}

void ModelSpec::validate() const {
    if (input_dim <= 0) throw ConfigError("model: input_dim must be positive");
    if (num_classes <= 0) throw ConfigError("model: num_classes must be positive");
    if (kind == ModelKind::MCLR && hidden_dim != 0)
        throw ConfigError("model: MCLR requires hidden_dim = 0");
    if (kind == ModelKind::MLP && hidden_dim <= 0)
        throw ConfigError("model: MLP requires hidden_dim > 0");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamVector p = ParamVector::Zero(spec.param_count());
    rng::Engine eng(seed);
    auto fill_layer = [&](double* w, Eigen::Index count, int fan_in) {
        const double range = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < count; ++i)
            w[i] = (2.0 * eng.uniform() - 1.0) * range;
    };
    if (spec.kind == ModelKind::MCLR) {
        fill_layer(p.data(), static_cast<Eigen::Index>(spec.num_classes) * spec.input_dim,
                   spec.input_dim);
    } else {
        const Eigen::Index w1 = static_cast<Eigen::Index>(spec.hidden_dim) * spec.input_dim;
        fill_layer(p.data(), w1, spec.input_dim);
        const Eigen::Index off2 = w1 + spec.hidden_dim;
        fill_layer(p.data() + off2,
                   static_cast<Eigen::Index>(spec.num_classes) * spec.hidden_dim,
                   spec.hidden_dim);
    }
    return p;
}

ForwardResult forward_loss(const ModelSpec& spec, const ParamVector& params,
                           const Matrix& features, const IntVector& labels) {
    check_params(spec, params, "forward_loss");
    check_batch(spec, features, labels);
    Matrix logits;
    if (spec.kind == ModelKind::MCLR) {
        ConstMap w(params.data(), spec.num_classes, spec.input_dim);
        ConstVecMap b(params.data() + w.size(), spec.num_classes);
        logits = features * w.transpose();
        logits.rowwise() += b.transpose();
    } else {
        const int d = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
        ConstMap w1(params.data(), h, d);
        ConstVecMap b1(params.data() + static_cast<Eigen::Index>(h) * d, h);
        ConstMap w2(params.data() + static_cast<Eigen::Index>(h) * d + h, c, h);
        ConstVecMap b2(params.data() + static_cast<Eigen::Index>(h) * d + h +
                           static_cast<Eigen::Index>(c) * h,
                       c);
        Matrix hidden = features * w1.transpose();
        hidden.rowwise() += b1.transpose();
        hidden = hidden.cwiseMax(0.0);
        logits = hidden * w2.transpose();
        logits.rowwise() += b2.transpose();
    }
    const SoftmaxCE ce = softmax_ce(logits, labels);
    return {ce.loss, ce.correct};
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& params,
                     const Matrix& features, const IntVector& labels, double mu,
                     const ParamVector& anchor) {
    check_params(spec, params, "gradient");
    check_batch(spec, features, labels);
    if (mu != 0.0 && anchor.size() != params.size())
        throw ConfigError("gradient: anchor length mismatch");

    const Eigen::Index b = features.rows();
    ParamVector g = ParamVector::Zero(params.size());

    if (spec.kind == ModelKind::MCLR) {
        ConstMap w(params.data(), spec.num_classes, spec.input_dim);
        ConstVecMap bias(params.data() + w.size(), spec.num_classes);
        Matrix logits = features * w.transpose();
        logits.rowwise() += bias.transpose();
        Matrix gz = softmax_ce(logits, labels).probs;  // B x C
        for (Eigen::Index i = 0; i < b; ++i) gz(i, labels(i)) -= 1.0;
        gz /= static_cast<double>(b);
        MutMap gw(g.data(), spec.num_classes, spec.input_dim);
        MutVecMap gb(g.data() + gw.size(), spec.num_classes);
        gw = gz.transpose() * features;
        gb = gz.colwise().sum().transpose();
    } else {
        const int d = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
        ConstMap w1(params.data(), h, d);
        ConstVecMap b1(params.data() + static_cast<Eigen::Index>(h) * d, h);
        ConstMap w2(params.data() + static_cast<Eigen::Index>(h) * d + h, c, h);
        ConstVecMap b2(params.data() + static_cast<Eigen::Index>(h) * d + h +
                           static_cast<Eigen::Index>(c) * h,
                       c);
        Matrix pre = features * w1.transpose();
        pre.rowwise() += b1.transpose();
        const Matrix hidden = pre.cwiseMax(0.0);
        Matrix logits = hidden * w2.transpose();
        logits.rowwise() += b2.transpose();
        Matrix gz = softmax_ce(logits, labels).probs;
        for (Eigen::Index i = 0; i < b; ++i) gz(i, labels(i)) -= 1.0;
        gz /= static_cast<double>(b);
        Matrix ghidden = gz * w2;  // B x H
        ghidden = (pre.array() > 0.0).cast<double>() * ghidden.array();
        MutMap gw1(g.data(), h, d);
        MutVecMap gb1(g.data() + static_cast<Eigen::Index>(h) * d, h);
        MutMap gw2(g.data() + static_cast<Eigen::Index>(h) * d + h, c, h);
        MutVecMap gb2(g.data() + static_cast<Eigen::Index>(h) * d + h +
                          static_cast<Eigen::Index>(c) * h,
                      c);
        gw2 = gz.transpose() * hidden;
        gb2 = gz.colwise().sum().transpose();
        gw1 = ghidden.transpose() * features;
        gb1 = ghidden.colwise().sum().transpose();
    }
    if (mu != 0.0) g += mu * (params - anchor);
    return g;
}

UpdateResult client_update(const ModelSpec& spec, const ParamVector& params,
                           const LabeledDataset& train, int epochs,
                           int batch_size, double eta, double mu,
                           const ParamVector& anchor, rng::Engine& shuffle_eng,
                           ParamVector* after_first_epoch) {
    check_params(spec, params, "client_update");
    if (epochs < 1) throw ConfigError("client_update: E must be >= 1");
    if (batch_size < 1) throw ConfigError("client_update: B must be >= 1");
    if (eta < 0.0) throw ConfigError("client_update: eta must be >= 0");

    const Eigen::Index n = train.size();
    if (n == 0) {
        if (after_first_epoch) *after_first_epoch = params;
        return {ParamVector::Zero(params.size()), true};
    }

    ParamVector w = params;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> batch_idx;
    for (int e = 0; e < epochs; ++e) {
        rng::shuffle(order, shuffle_eng);
        for (Eigen::Index start = 0; start < n; start += batch_size) {
            const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
            batch_idx.assign(order.begin() + start, order.begin() + start + len);
            std::sort(batch_idx.begin(), batch_idx.end());
            const Matrix bx = train.features(batch_idx, Eigen::all);
            const IntVector by = train.labels(batch_idx);
            w -= eta * gradient(spec, w, bx, by, mu, anchor);
        }
        if (e == 0 && after_first_epoch) *after_first_epoch = w;
    }
    if (!w.allFinite())
        throw NumericError("client_update: non-finite parameters (diverged)");
    return {w - params, false};
}

std::pair<long, long> evaluate(const ModelSpec& spec, const ParamVector& params,
                               const LabeledDataset& test) {
    if (test.size() == 0) return {0, 0};
    const ForwardResult r = forward_loss(spec, params, test.features, test.labels);
    return {r.correct, static_cast<long>(test.size())};
}

}  // namespace cfl
