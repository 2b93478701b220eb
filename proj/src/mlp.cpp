#include "cvote/mlp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cvote/errors.hpp"
#include "cvote/rng.hpp"
#include "cvote/textio.hpp"

namespace cvote::pipeline {

RandomState sample_state(const StateDistribution& dist, std::uint64_t i) {
    RandomState s;
    switch (dist.kind) {
        case StateKind::RandomSeed:
            s.seed = mix64_pair(dist.base_seed, i);
            break;
        case StateKind::LeaveOneOut: {
            if (!dist.train_size || *dist.train_size == 0) {
                throw ConfigError("LeaveOneOut distribution requires a positive train_size");
            }
            s.seed = dist.base_seed;
            s.loo_index =
                static_cast<std::size_t>(bounded(mix64_pair(dist.base_seed, i), *dist.train_size));
            break;
        }
    }
    return s;
}

void PipelineConfig::validate() const {
    if (hidden_layer_sizes.empty() ||
        std::any_of(hidden_layer_sizes.begin(), hidden_layer_sizes.end(),
                    [](int h) { return h <= 0; })) {
        throw ConfigError("hidden_layer_sizes must be non-empty and positive");
    }
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (optimizer.kind == OptimizerConfig::Kind::Adam) {
        const auto& a = optimizer.adam;
        if (!(a.beta1 > 0.0 && a.beta1 < 1.0) || !(a.beta2 > 0.0 && a.beta2 < 1.0) ||
            !(a.epsilon > 0.0)) {
            throw ConfigError("adam parameters out of range");
        }
    }
}

std::string PipelineConfig::fingerprint() const {
    std::ostringstream os;
    os << "mlp[";
    for (std::size_t i = 0; i < hidden_layer_sizes.size(); ++i) {
        if (i) os << ',';
        os << hidden_layer_sizes[i];
    }
    os << "];act=" << (activation == Activation::Relu ? "relu" : "tanh");
    os << ";epochs=" << epochs << ";batch=" << batch_size;
    os << ";lr=" << fmt_double(learning_rate);
    if (optimizer.kind == OptimizerConfig::Kind::Sgd) {
        os << ";opt=sgd";
    } else {
        os << ";opt=adam(" << fmt_double(optimizer.adam.beta1) << ','
           << fmt_double(optimizer.adam.beta2) << ',' << fmt_double(optimizer.adam.epsilon) << ')';
    }
    os << ";prep=";
    switch (preprocessing) {
        case Preprocessing::Standardize: os << "standardize"; break;
        case Preprocessing::MinMax: os << "minmax"; break;
        case Preprocessing::None: os << "none"; break;
    }
    return fnv1a_hex(os.str());
}

void MlpModel::validate() const {
    if (layers.empty()) throw std::invalid_argument("model has no layers");
    if (num_classes < 2) throw std::invalid_argument("model num_classes must be >= 2");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weights.rows() != layer.bias.size()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": bias size mismatch");
        }
        if (l > 0 && layers[l - 1].weights.rows() != layer.weights.cols()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": width chain broken");
        }
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite parameter");
        }
    }
    if (layers.back().weights.rows() != num_classes) {
        throw std::invalid_argument("output layer width != num_classes");
    }
}

namespace {

inline void apply_activation(Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Relu) {
        z = z.cwiseMax(0.0);
    } else {
        z = z.array().tanh().matrix();
    }
}

}  // namespace

Eigen::VectorXd MlpModel::logits(Eigen::Ref<const Eigen::VectorXd> x) const {
    if (x.size() != input_width()) {
        throw std::invalid_argument("input width " + std::to_string(x.size()) +
                                    " != model width " + std::to_string(input_width()));
    }
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd z = layers[l].weights * a + layers[l].bias;
        if (l + 1 == layers.size()) return z;
        if (activation == Activation::Relu) {
            a = z.cwiseMax(0.0);
        } else {
            a = z.array().tanh().matrix();
        }
    }
    return a;  // unreachable; layers is non-empty
}

Eigen::MatrixXd MlpModel::logits_batch(const Eigen::MatrixXd& X) const {
    if (X.cols() != input_width()) {
        throw std::invalid_argument("input width " + std::to_string(X.cols()) +
                                    " != model width " + std::to_string(input_width()));
    }
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z =
            (a * layers[l].weights.transpose()).rowwise() + layers[l].bias.transpose();
        if (l + 1 == layers.size()) return z;
        apply_activation(z, activation);
        a = std::move(z);
    }
    return a;
}

MlpModel::Trace MlpModel::forward_trace(Eigen::Ref<const Eigen::VectorXd> x) const {
    if (x.size() != input_width()) {
        throw std::invalid_argument("input width mismatch in forward_trace");
    }
    Trace t;
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd z = layers[l].weights * a + layers[l].bias;
        t.pre_activations.push_back(z);
        if (l + 1 == layers.size()) {
            t.activations.push_back(z);
        } else {
            if (activation == Activation::Relu) {
                a = z.cwiseMax(0.0);
            } else {
                a = z.array().tanh().matrix();
            }
            t.activations.push_back(a);
        }
    }
    return t;
}

int predict_label(const MlpModel& model, Eigen::Ref<const Eigen::VectorXd> x) {
    const Eigen::VectorXd z = model.logits(x);
    int best = 0;
    for (int c = 1; c < static_cast<int>(z.size()); ++c) {
        if (z(c) > z(best)) best = c;  // strict: ties keep the lowest index
    }
    return best;
}

std::vector<int> predict_labels(const MlpModel& model, const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd Z = model.logits_batch(X);
    std::vector<int> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index r = 0; r < Z.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < static_cast<int>(Z.cols()); ++c) {
            if (Z(r, c) > Z(r, best)) best = c;
        }
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

namespace {

/// Row-wise softmax cross-entropy; loss is the batch mean. dZ, when
/// requested, receives (softmax - one_hot) / batch_size.
double softmax_ce(const Eigen::MatrixXd& Z, const std::vector<int>& y,
                  const std::vector<Eigen::Index>& rows, Eigen::MatrixXd* dZ) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    double loss = 0.0;
    if (dZ) dZ->resize(m, Z.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index r = i;  // Z holds only the batch rows
        const double zmax = Z.row(r).maxCoeff();
        const Eigen::ArrayXd shifted = Z.row(r).transpose().array() - zmax;
        const double lse = std::log(shifted.exp().sum()) + zmax;
        const int label = y[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
        loss += lse - Z(r, label);
        if (dZ) {
            dZ->row(r) = (shifted - (lse - zmax)).exp().matrix().transpose();
            (*dZ)(r, label) -= 1.0;
        }
    }
    loss /= static_cast<double>(m);
    if (dZ) *dZ /= static_cast<double>(m);
    return loss;
}

struct AdamSlot {
    Eigen::MatrixXd mw, vw;
    Eigen::VectorXd mb, vb;
};

}  // namespace

double mean_cross_entropy(const MlpModel& model, const Dataset& data) {
    if (data.rows() == 0) throw std::invalid_argument("mean_cross_entropy: empty dataset");
    const Eigen::MatrixXd Z = model.logits_batch(data.features);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    return softmax_ce(Z, data.labels, rows, nullptr);
}

MlpModel train_model(const PipelineConfig& config, const Dataset& train, const RandomState& state) {
    config.validate();
    train.validate();

    // Leave-one-out removal is the only data change a state may induce.
    const Dataset* data = &train;
    Dataset reduced;
    if (state.loo_index) {
        if (*state.loo_index >= static_cast<std::size_t>(train.rows())) {
            throw std::invalid_argument("loo_index " + std::to_string(*state.loo_index) +
                                        " out of range for " + std::to_string(train.rows()) +
                                        " training rows");
        }
        if (train.rows() <= 1) throw std::invalid_argument("training set empty after leave-one-out");
        auto [rest, removed] = split_rows(train, {*state.loo_index});
        reduced = std::move(rest);
        data = &reduced;
    }
    if (data->rows() == 0) throw std::invalid_argument("training set is empty");

    const Eigen::Index input_dim = data->cols();
    std::vector<int> dims;
    dims.push_back(static_cast<int>(input_dim));
    for (int h : config.hidden_layer_sizes) dims.push_back(h);
    dims.push_back(data->num_classes);

    MlpModel model;
    model.activation = config.activation;
    model.num_classes = data->num_classes;

    // Glorot-uniform init, biases zero, drawn in fixed layer/row/col order.
    SplitMix64 rng(state.seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        MlpModel::Layer layer;
        layer.weights.resize(fan_out, fan_in);
        layer.bias.setZero(fan_out);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.weights(r, c) = rng.uniform(-limit, limit);
            }
        }
        model.layers.push_back(std::move(layer));
    }

    if (config.epochs == 0) return model;

    const auto n = static_cast<std::size_t>(data->rows());
    const std::size_t num_layers = model.layers.size();
    const bool use_adam = config.optimizer.kind == OptimizerConfig::Kind::Adam;
    std::vector<AdamSlot> adam(num_layers);
    if (use_adam) {
        for (std::size_t l = 0; l < num_layers; ++l) {
            adam[l].mw.setZero(model.layers[l].weights.rows(), model.layers[l].weights.cols());
            adam[l].vw = adam[l].mw;
            adam[l].mb.setZero(model.layers[l].bias.size());
            adam[l].vb = adam[l].mb;
        }
    }
    long long adam_step = 0;

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<Eigen::MatrixXd> acts(num_layers + 1);  // acts[0] = batch input
    std::vector<Eigen::MatrixXd> pre(num_layers);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        int batch_index = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size),
                         ++batch_index) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            const auto m = static_cast<Eigen::Index>(stop - start);
            std::vector<Eigen::Index> batch_rows(static_cast<std::size_t>(m));
            acts[0].resize(m, input_dim);
            for (Eigen::Index i = 0; i < m; ++i) {
                batch_rows[static_cast<std::size_t>(i)] = order[start + static_cast<std::size_t>(i)];
                acts[0].row(i) = data->features.row(order[start + static_cast<std::size_t>(i)]);
            }

            // Forward
            for (std::size_t l = 0; l < num_layers; ++l) {
                pre[l] = (acts[l] * model.layers[l].weights.transpose()).rowwise() +
                         model.layers[l].bias.transpose();
                if (l + 1 < num_layers) {
                    acts[l + 1] = pre[l];
                    apply_activation(acts[l + 1], config.activation);
                } else {
                    acts[l + 1] = pre[l];
                }
            }

            Eigen::MatrixXd delta;
            const double loss = softmax_ce(acts[num_layers], data->labels, batch_rows, &delta);
            if (!std::isfinite(loss)) throw TrainingDivergedError(epoch, batch_index);

            // Backward + update, output layer first.
            ++adam_step;
            for (std::size_t l = num_layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w = delta.transpose() * acts[l];
                const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
                if (l > 0) {
                    Eigen::MatrixXd back = delta * model.layers[l].weights;
                    if (config.activation == Activation::Relu) {
                        back = back.cwiseProduct(
                            (pre[l - 1].array() > 0.0).cast<double>().matrix());
                    } else {
                        back = back.cwiseProduct(
                            (1.0 - pre[l - 1].array().tanh().square()).matrix());
                    }
                    delta = std::move(back);
                }
                auto& layer = model.layers[l];
                if (!use_adam) {
                    layer.weights -= config.learning_rate * grad_w;
                    layer.bias -= config.learning_rate * grad_b;
                } else {
                    const auto& ap = config.optimizer.adam;
                    auto& slot = adam[l];
                    const double t = static_cast<double>(adam_step);
                    const double c1 = 1.0 - std::pow(ap.beta1, t);
                    const double c2 = 1.0 - std::pow(ap.beta2, t);
                    slot.mw = ap.beta1 * slot.mw + (1.0 - ap.beta1) * grad_w;
                    slot.vw = ap.beta2 * slot.vw + (1.0 - ap.beta2) * grad_w.cwiseProduct(grad_w);
                    slot.mb = ap.beta1 * slot.mb + (1.0 - ap.beta1) * grad_b;
                    slot.vb = ap.beta2 * slot.vb + (1.0 - ap.beta2) * grad_b.cwiseProduct(grad_b);
                    layer.weights -=
                        (config.learning_rate * (slot.mw / c1).array() /
                         ((slot.vw / c2).array().sqrt() + ap.epsilon))
                            .matrix();
                    layer.bias -= (config.learning_rate * (slot.mb / c1).array() /
                                   ((slot.vb / c2).array().sqrt() + ap.epsilon))
                                      .matrix();
                }
            }
        }
    }
    model.validate();
    return model;
}

void ModelPool::validate() const {
    if (models.empty()) throw std::invalid_argument("model pool is empty");
    if (models.size() != states.size()) {
        throw std::invalid_argument("model pool: models/states length mismatch");
    }
    const Eigen::Index width = models.front().input_width();
    const int classes = models.front().num_classes;
    const std::size_t depth = models.front().layers.size();
    for (const auto& m : models) {
        m.validate();
        if (m.input_width() != width || m.num_classes != classes || m.layers.size() != depth) {
            throw std::invalid_argument("model pool: architecture mismatch");
        }
    }
}

}  // namespace cvote::pipeline
