#pragma once

#include <span>
#include <string>
#include <vector>

#include "cvote/ensemble.hpp"

namespace cvote::theory {

using pipeline::Dataset;
using pipeline::PipelineConfig;
using pipeline::StateDistribution;

/// Binomial(n, p) probability mass at k. Exact double arithmetic while the
/// binomial coefficients are representable (n <= 56), log-space with lgamma
/// beyond that.
double binom_pmf(int k, int n, double p);

/// Probability that a selective n-ensemble abstains under the two-class
/// agreement model: each constituent independently votes the mode class with
/// probability p, otherwise the runner-up. Exact summation over vote splits
/// whose top-two test stays above alpha.
double abstention_probability(double p, int n, double alpha);

/// max(0, 1 - 2 * (alpha + beta)): the pairwise-agreement floor.
double consistency_lower_bound(double alpha, double beta);

/// min(1, alpha + beta): the ceiling on expected loss variance.
double loss_variance_bound(double alpha, double beta);

struct CurvePoint {
    double agreement_prob = 0.0;
    int n = 0;
    double alpha = 0.0;
    double abstention_prob = 0.0;
    double consistency_lower_bound = 0.0;
};

/// Abstention and consistency curves over a uniform agreement grid on
/// [0.5, 1], one block per (n, alpha).
std::vector<CurvePoint> emit_abstention_curves(std::span<const int> n_list,
                                            std::span<const double> alpha_list,
                                            int grid_resolution);

/// Outcome of one Monte-Carlo bound check.
struct BoundCheckReport {
    std::string check_name;
    double empirical_rate = 0.0;  ///< the quantity compared against the bound
    double bound = 0.0;
    int trials = 0;
    bool passed = false;
    double slack = 0.0;  ///< 3-sigma binomial allowance for finite trials
    double mean_rate = 0.0;   ///< mean per-point rate (the maximum is what the per-point bound compares)
    double beta_hat = 0.0;    ///< empirical abstention rate (consistency check only)

    bool consistent() const { return passed == (empirical_rate <= bound + slack); }
};

/// Checks that fresh selective ensembles contradict the estimated mode
/// predictor (abstentions ignored) at a per-point rate of at most alpha.
/// The mode oracle uses draw indices [0, oracle_samples); trial t uses
/// [oracle_samples + t*n, oracle_samples + (t+1)*n).
BoundCheckReport check_mode_agreement_bound(const PipelineConfig& config, const Dataset& train,
                                   const StateDistribution& dist, int n, double alpha,
                                   const Dataset& test, int trials, int oracle_samples);

/// Checks that pairs of fresh selective ensembles disagree (any outcome
/// mismatch, abstentions included) at a mean rate of at most
/// 2*(alpha + beta_hat), with beta_hat measured on the same ensembles.
BoundCheckReport check_pairwise_consistency_bound(const PipelineConfig& config, const Dataset& train,
                                     const StateDistribution& dist, int n, double alpha,
                                     const Dataset& test, int trials);

}  // namespace cvote::theory
