#include "cvote/ensemble.hpp"

#include <mutex>
#include <stdexcept>
#include <string>

#include "cvote/parallel.hpp"

namespace cvote::ensemble {

ModelPool create_ensemble(const PipelineConfig& config, const Dataset& train,
                          std::span<const RandomState> states) {
    if (states.empty()) throw std::invalid_argument("create_ensemble: no states given");
    ModelPool pool;
    pool.config_fingerprint = config.fingerprint();
    pool.states.assign(states.begin(), states.end());
    pool.models.resize(states.size());

    std::mutex error_mutex;
    std::string first_error;
    std::size_t first_error_index = states.size();
    parallel_for(states.size(), [&](std::size_t i) {
        try {
            pool.models[i] = pipeline::train_model(config, train, states[i]);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (i < first_error_index) {
                first_error_index = i;
                first_error = e.what();
            }
        }
    });
    if (first_error_index < states.size()) {
        throw std::runtime_error("training failed for state " +
                                 std::to_string(first_error_index) + ": " + first_error);
    }
    pool.validate();
    return pool;
}

ModelPool sample_ensemble(const PipelineConfig& config, const Dataset& train,
                          const StateDistribution& dist, int n, std::uint64_t draw_offset) {
    if (n < 1) throw std::invalid_argument("sample_ensemble: n must be >= 1");
    std::vector<RandomState> states(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        states[static_cast<std::size_t>(i)] =
            pipeline::sample_state(dist, draw_offset + static_cast<std::uint64_t>(i));
    }
    return create_ensemble(config, train, states);
}

SelectiveDecision decide(const stats::VoteTally& tally, double alpha) {
    const auto top = stats::top_two(tally);
    SelectiveDecision d;
    d.tally = tally;
    d.alpha = alpha;
    d.p_value = stats::binom_p_value(top.n_a, top.n_a + top.n_b);
    if (d.p_value.value <= alpha) {
        d.abstained = false;
        d.label = top.class_a;
    }
    return d;
}

SelectiveDecision selective_predict(const ModelPool& pool, double alpha,
                                    Eigen::Ref<const Eigen::VectorXd> x) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("selective_predict: alpha must lie in (0,1)");
    }
    pool.validate();
    std::vector<int> votes(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        votes[i] = pipeline::predict_label(pool.models[i], x);
    }
    return decide(stats::tally(votes, pool.models.front().num_classes), alpha);
}

int plurality_predict(const ModelPool& pool, Eigen::Ref<const Eigen::VectorXd> x) {
    pool.validate();
    std::vector<int> votes(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        votes[i] = pipeline::predict_label(pool.models[i], x);
    }
    return stats::top_two(stats::tally(votes, pool.models.front().num_classes)).class_a;
}

std::vector<int> estimate_mode_labels(const PipelineConfig& config, const Dataset& train,
                                      const StateDistribution& dist, int num_samples,
                                      std::uint64_t draw_offset, const Eigen::MatrixXd& points) {
    if (num_samples < 1) throw std::invalid_argument("mode estimate needs num_samples >= 1");
    const auto npoints = static_cast<std::size_t>(points.rows());
    std::vector<std::vector<int>> votes(npoints,
                                        std::vector<int>(static_cast<std::size_t>(num_samples)));
    parallel_for(static_cast<std::size_t>(num_samples), [&](std::size_t s) {
        const auto state = pipeline::sample_state(dist, draw_offset + s);
        const MlpModel model = pipeline::train_model(config, train, state);
        const auto labels = pipeline::predict_labels(model, points);
        for (std::size_t p = 0; p < npoints; ++p) votes[p][s] = labels[p];
    });
    std::vector<int> out(npoints);
    for (std::size_t p = 0; p < npoints; ++p) {
        out[p] = stats::top_two(stats::tally(votes[p], train.num_classes)).class_a;
    }
    return out;
}

int estimate_mode_predictor(const PipelineConfig& config, const Dataset& train,
                            const StateDistribution& dist, int num_samples,
                            Eigen::Ref<const Eigen::VectorXd> x, std::uint64_t draw_offset) {
    Eigen::MatrixXd points(1, x.size());
    points.row(0) = x.transpose();
    return estimate_mode_labels(config, train, dist, num_samples, draw_offset, points).front();
}

bool abs_neq(const SelectiveDecision& a, const SelectiveDecision& b) {
    return a.predicted() && b.predicted() && a.label != b.label;
}

bool abs_neq(const SelectiveDecision& a, int label_b) {
    return a.predicted() && a.label != label_b;
}

bool abs_neq(int label_a, int label_b) { return label_a != label_b; }

bool strict_neq(const SelectiveDecision& a, const SelectiveDecision& b) {
    if (a.abstained != b.abstained) return true;
    if (a.abstained) return false;
    return a.label != b.label;
}

std::vector<SelectiveDecision> decide_all(const ModelPool& pool, double alpha,
                                          const Eigen::MatrixXd& X) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("decide_all: alpha must lie in (0,1)");
    }
    pool.validate();
    const auto npoints = static_cast<std::size_t>(X.rows());
    const int num_classes = pool.models.front().num_classes;
    // votes[point][model]
    std::vector<std::vector<int>> votes(npoints, std::vector<int>(pool.size()));
    parallel_for(pool.size(), [&](std::size_t m) {
        const auto labels = pipeline::predict_labels(pool.models[m], X);
        for (std::size_t p = 0; p < npoints; ++p) votes[p][m] = labels[p];
    });
    std::vector<SelectiveDecision> out(npoints);
    for (std::size_t p = 0; p < npoints; ++p) {
        out[p] = decide(stats::tally(votes[p], num_classes), alpha);
    }
    return out;
}

std::vector<int> plurality_all(const ModelPool& pool, const Eigen::MatrixXd& X) {
    pool.validate();
    const auto npoints = static_cast<std::size_t>(X.rows());
    const int num_classes = pool.models.front().num_classes;
    std::vector<std::vector<int>> votes(npoints, std::vector<int>(pool.size()));
    parallel_for(pool.size(), [&](std::size_t m) {
        const auto labels = pipeline::predict_labels(pool.models[m], X);
        for (std::size_t p = 0; p < npoints; ++p) votes[p][m] = labels[p];
    });
    std::vector<int> out(npoints);
    for (std::size_t p = 0; p < npoints; ++p) {
        out[p] = stats::top_two(stats::tally(votes[p], num_classes)).class_a;
    }
    return out;
}

DisagreementReport disagreement_report(const std::vector<ModelPool>& predictors,
                                       std::optional<double> alpha, const Dataset& test,
                                       DisagreementPolicy policy) {
    if (predictors.size() < 2) {
        throw std::invalid_argument("disagreement_report needs at least 2 predictors");
    }
    const auto npred = predictors.size();
    const auto npoints = static_cast<std::size_t>(test.rows());

    // Outcomes per predictor per point: label index, or -1 for abstain.
    std::vector<std::vector<int>> outcome(npred);
    for (std::size_t q = 0; q < npred; ++q) {
        if (alpha) {
            const auto decisions = decide_all(predictors[q], *alpha, test.features);
            outcome[q].resize(npoints);
            for (std::size_t p = 0; p < npoints; ++p) {
                outcome[q][p] = decisions[p].predicted() ? decisions[p].label : -1;
            }
        } else {
            outcome[q] = plurality_all(predictors[q], test.features);
        }
    }

    DisagreementReport report;
    report.policy = policy;
    report.num_pairs = static_cast<int>(npred * (npred - 1) / 2);
    report.p_flip.resize(npoints, 0.0);
    std::size_t flipping = 0;
    for (std::size_t p = 0; p < npoints; ++p) {
        int disagreeing = 0;
        for (std::size_t i = 0; i < npred; ++i) {
            for (std::size_t j = i + 1; j < npred; ++j) {
                const int a = outcome[i][p];
                const int b = outcome[j][p];
                const bool conflict = policy == DisagreementPolicy::AbsNeq
                                          ? (a >= 0 && b >= 0 && a != b)
                                          : (a != b);
                if (conflict) ++disagreeing;
            }
        }
        report.p_flip[p] = static_cast<double>(disagreeing) / report.num_pairs;
        if (disagreeing > 0) ++flipping;
    }
    report.fraction_points_flipping = static_cast<double>(flipping) / static_cast<double>(npoints);
    return report;
}

}  // namespace cvote::ensemble
