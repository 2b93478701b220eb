#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvote/dataset.hpp"

namespace cvote::pipeline {

/// One draw of everything arbitrary about a training run: the PRNG seed plus
/// an optional index of a single training row to leave out.
struct RandomState {
    std::uint64_t seed = 0;
    std::optional<std::size_t> loo_index;

    bool operator==(const RandomState&) const = default;
};

enum class StateKind { RandomSeed, LeaveOneOut };

/// The distribution the random states are drawn from. Draws are a pure
/// function of (kind, base_seed, draw index).
struct StateDistribution {
    StateKind kind = StateKind::RandomSeed;
    std::uint64_t base_seed = 0;
    std::optional<std::size_t> train_size;  ///< required for LeaveOneOut
};

/// Deterministic i-th draw from the distribution. RandomSeed varies the seed
/// and never sets loo_index; LeaveOneOut keeps the base seed and draws the
/// excluded row uniformly from [0, train_size).
RandomState sample_state(const StateDistribution& dist, std::uint64_t i);

enum class Activation { Relu, Tanh };

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerConfig {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Sgd;
    AdamParams adam;
};

struct PipelineConfig {
    std::vector<int> hidden_layer_sizes = {8};
    Activation activation = Activation::Relu;
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.1;
    OptimizerConfig optimizer;
    Preprocessing preprocessing = Preprocessing::Standardize;

    void validate() const;
    /// Stable hash of the canonical textual form; stored in pool files.
    std::string fingerprint() const;
};

/// A trained fully-connected network. Weight matrices are (fan_out, fan_in);
/// the final layer emits one logit per class with no activation.
struct MlpModel {
    struct Layer {
        Eigen::MatrixXd weights;
        Eigen::VectorXd bias;
    };
    std::vector<Layer> layers;
    Activation activation = Activation::Relu;
    int num_classes = 0;

    Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
    void validate() const;

    /// Logits for a single point.
    Eigen::VectorXd logits(Eigen::Ref<const Eigen::VectorXd> x) const;
    /// Logits for a batch (rows = examples).
    Eigen::MatrixXd logits_batch(const Eigen::MatrixXd& X) const;

    /// Per-layer pre-activations and activations for one point; used by
    /// gradient-based attribution and kink detection.
    struct Trace {
        std::vector<Eigen::VectorXd> pre_activations;  ///< z_l, one per layer
        std::vector<Eigen::VectorXd> activations;      ///< a_l = act(z_l), last = logits
    };
    Trace forward_trace(Eigen::Ref<const Eigen::VectorXd> x) const;
};

/// Argmax over logits; ties go to the lowest class index.
int predict_label(const MlpModel& model, Eigen::Ref<const Eigen::VectorXd> x);

/// predict_label for every row of a feature matrix.
std::vector<int> predict_labels(const MlpModel& model, const Eigen::MatrixXd& X);

/// Mean softmax cross-entropy of the model on a dataset.
double mean_cross_entropy(const MlpModel& model, const Dataset& data);

/// Trains a network on `train` (minus the state's leave-one-out row, if any).
/// Every random choice derives from state.seed through a fixed SplitMix64
/// stream, so identical inputs give bit-identical parameters.
MlpModel train_model(const PipelineConfig& config, const Dataset& train, const RandomState& state);

/// An ordered collection of trained models plus the states that produced
/// them. All models share one architecture and class count.
struct ModelPool {
    std::vector<MlpModel> models;
    std::vector<RandomState> states;
    std::string config_fingerprint;

    std::size_t size() const { return models.size(); }
    void validate() const;
};

}  // namespace cvote::pipeline
