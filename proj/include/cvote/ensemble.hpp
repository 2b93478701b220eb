#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cvote/mlp.hpp"
#include "cvote/stats.hpp"

namespace cvote::ensemble {

using pipeline::Dataset;
using pipeline::MlpModel;
using pipeline::ModelPool;
using pipeline::PipelineConfig;
using pipeline::RandomState;
using pipeline::StateDistribution;

/// Outcome of a selective prediction: either a certified label or an
/// abstention, always carrying the test evidence.
struct SelectiveDecision {
    bool abstained = true;
    int label = -1;  ///< valid only when !abstained
    stats::PValue p_value;
    stats::VoteTally tally;
    double alpha = 0.0;  ///< threshold in force when the decision was made

    bool predicted() const { return !abstained; }
};

/// Trains one model per state, in order. Training errors are annotated with
/// the offending state index.
ModelPool create_ensemble(const PipelineConfig& config, const Dataset& train,
                          std::span<const RandomState> states);

/// create_ensemble over states sampled at draw indices
/// [draw_offset, draw_offset + n).
ModelPool sample_ensemble(const PipelineConfig& config, const Dataset& train,
                          const StateDistribution& dist, int n, std::uint64_t draw_offset = 0);

/// The decision rule on a finished tally: two-sided binomial test on the
/// top-two counts, predict the plurality class iff the p-value is <= alpha.
SelectiveDecision decide(const stats::VoteTally& tally, double alpha);

/// Tallies the constituents' votes on x and applies decide() at level alpha.
SelectiveDecision selective_predict(const ModelPool& pool, double alpha,
                                    Eigen::Ref<const Eigen::VectorXd> x);

/// Plain plurality vote; ties go to the lowest class index.
int plurality_predict(const ModelPool& pool, Eigen::Ref<const Eigen::VectorXd> x);

/// Monte-Carlo estimate of the most probable label over fresh pipeline draws
/// at indices [draw_offset, draw_offset + num_samples).
int estimate_mode_predictor(const PipelineConfig& config, const Dataset& train,
                            const StateDistribution& dist, int num_samples,
                            Eigen::Ref<const Eigen::VectorXd> x, std::uint64_t draw_offset = 0);

/// Batched form of estimate_mode_predictor: trains the sample models once and
/// returns the estimated mode label for every row of `points`.
std::vector<int> estimate_mode_labels(const PipelineConfig& config, const Dataset& train,
                                      const StateDistribution& dist, int num_samples,
                                      std::uint64_t draw_offset, const Eigen::MatrixXd& points);

/// Disagreement that ignores abstentions: true iff both sides predicted and
/// the labels differ.
bool abs_neq(const SelectiveDecision& a, const SelectiveDecision& b);
bool abs_neq(const SelectiveDecision& a, int label_b);
bool abs_neq(int label_a, int label_b);

/// Any-outcome mismatch: abstain-vs-label counts, abstain-vs-abstain does not.
bool strict_neq(const SelectiveDecision& a, const SelectiveDecision& b);

enum class DisagreementPolicy { AbsNeq, StrictNeq };

struct DisagreementReport {
    std::vector<double> p_flip;       ///< per test point: disagreeing pairs / num_pairs
    double fraction_points_flipping = 0.0;
    int num_pairs = 0;
    DisagreementPolicy policy = DisagreementPolicy::AbsNeq;
};

/// Pairwise disagreement across predictors on every test point. With an
/// alpha, predictors decide selectively; without one they emit plain
/// plurality labels (the singleton-model comparison) and the two policies
/// coincide.
DisagreementReport disagreement_report(const std::vector<ModelPool>& predictors,
                                       std::optional<double> alpha, const Dataset& test,
                                       DisagreementPolicy policy);

/// Selective decisions of one pool over every row of a feature matrix.
/// Constituent votes are computed model-by-model over the full batch.
std::vector<SelectiveDecision> decide_all(const ModelPool& pool, double alpha,
                                          const Eigen::MatrixXd& X);

/// Plurality labels of one pool over every row of a feature matrix.
std::vector<int> plurality_all(const ModelPool& pool, const Eigen::MatrixXd& X);

}  // namespace cvote::ensemble
