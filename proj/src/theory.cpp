#include "cvote/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvote/parallel.hpp"
#include "cvote/stats.hpp"

namespace cvote::theory {

double binom_pmf(int k, int n, double p) {
    if (n < 0 || k < 0 || k > n) throw std::domain_error("binom_pmf: bad (k, n)");
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binom_pmf: p out of [0,1]");
    if (p == 0.0) return k == 0 ? 1.0 : 0.0;
    if (p == 1.0) return k == n ? 1.0 : 0.0;
    if (n <= 56) {
        // C(n, k) is exact in a double up to n = 56.
        double coeff = 1.0;
        for (int i = 1; i <= k; ++i) {
            coeff = coeff * static_cast<double>(n - k + i) / static_cast<double>(i);
        }
        coeff = std::round(coeff);
        return coeff * std::pow(p, k) * std::pow(1.0 - p, n - k);
    }
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                           k * std::log(p) + (n - k) * std::log1p(-p);
    return std::exp(log_pmf);
}

double abstention_probability(double p, int n, double alpha) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("abstention_probability: p out of [0,1]");
    if (n < 1) throw std::domain_error("abstention_probability: n must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("abstention_probability: alpha must lie in (0,1)");
    }
    // Sum the certified side (the two tails that pass the test) and return
    // the complement; the certified set is small and the degenerate cases
    // (nothing certified, everything certified) stay exact.
    double certified = 0.0;
    for (int k = 0; k <= n; ++k) {
        // k mode-class votes vs n-k runner-up votes.
        if (stats::binom_p_value(std::max(k, n - k), n).value <= alpha) {
            certified += binom_pmf(k, n, p);
        }
    }
    return std::clamp(1.0 - certified, 0.0, 1.0);
}

double consistency_lower_bound(double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) {
        throw std::domain_error("consistency_lower_bound: alpha and beta must be >= 0");
    }
    return std::max(0.0, 1.0 - 2.0 * (alpha + beta));
}

double loss_variance_bound(double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) {
        throw std::domain_error("loss_variance_bound: alpha and beta must be >= 0");
    }
    return std::min(1.0, alpha + beta);
}

std::vector<CurvePoint> emit_abstention_curves(std::span<const int> n_list,
                                            std::span<const double> alpha_list,
                                            int grid_resolution) {
    if (grid_resolution < 2) throw std::domain_error("grid_resolution must be >= 2");
    std::vector<CurvePoint> out;
    out.reserve(n_list.size() * alpha_list.size() * static_cast<std::size_t>(grid_resolution));
    for (int n : n_list) {
        for (double alpha : alpha_list) {
            for (int j = 0; j < grid_resolution; ++j) {
                CurvePoint pt;
                pt.n = n;
                pt.alpha = alpha;
                pt.agreement_prob =
                    0.5 + 0.5 * static_cast<double>(j) / static_cast<double>(grid_resolution - 1);
                pt.abstention_prob = abstention_probability(pt.agreement_prob, n, alpha);
                pt.consistency_lower_bound =
                    theory::consistency_lower_bound(alpha, pt.abstention_prob);
                out.push_back(pt);
            }
        }
    }
    return out;
}

namespace {

double three_sigma_slack(double rate, int trials) {
    const double q = std::clamp(rate, 0.0, 1.0);
    return 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
}

}  // namespace

BoundCheckReport check_mode_agreement_bound(const PipelineConfig& config, const Dataset& train,
                                   const StateDistribution& dist, int n, double alpha,
                                   const Dataset& test, int trials, int oracle_samples) {
    if (trials < 1) throw std::invalid_argument("check_mode_agreement_bound: trials must be >= 1");
    const auto npoints = static_cast<std::size_t>(test.rows());

    const std::vector<int> mode_labels = ensemble::estimate_mode_labels(
        config, train, dist, oracle_samples, /*draw_offset=*/0, test.features);

    // disagreements[point] = number of trials whose decision contradicts the
    // mode label under abs_neq.
    std::vector<std::vector<char>> contradicts(
        static_cast<std::size_t>(trials), std::vector<char>(npoints, 0));
    const auto offset0 = static_cast<std::uint64_t>(oracle_samples);
    for (int t = 0; t < trials; ++t) {
        const auto pool = ensemble::sample_ensemble(
            config, train, dist, n, offset0 + static_cast<std::uint64_t>(t) * n);
        const auto decisions = ensemble::decide_all(pool, alpha, test.features);
        for (std::size_t p = 0; p < npoints; ++p) {
            contradicts[static_cast<std::size_t>(t)][p] =
                ensemble::abs_neq(decisions[p], mode_labels[p]) ? 1 : 0;
        }
    }

    double max_rate = 0.0;
    double sum_rate = 0.0;
    for (std::size_t p = 0; p < npoints; ++p) {
        int count = 0;
        for (int t = 0; t < trials; ++t) count += contradicts[static_cast<std::size_t>(t)][p];
        const double rate = static_cast<double>(count) / trials;
        max_rate = std::max(max_rate, rate);
        sum_rate += rate;
    }

    BoundCheckReport report;
    report.check_name = "mode_agreement";
    report.trials = trials;
    report.bound = alpha;
    report.slack = three_sigma_slack(alpha, trials);
    report.empirical_rate = max_rate;  // the bound holds per point, so compare the worst one
    report.mean_rate = sum_rate / static_cast<double>(npoints);
    report.passed = report.empirical_rate <= report.bound + report.slack;
    return report;
}

BoundCheckReport check_pairwise_consistency_bound(const PipelineConfig& config, const Dataset& train,
                                     const StateDistribution& dist, int n, double alpha,
                                     const Dataset& test, int trials) {
    if (trials < 1) throw std::invalid_argument("check_pairwise_consistency_bound: trials must be >= 1");
    const auto npoints = static_cast<std::size_t>(test.rows());

    long long disagreements = 0;
    long long abstentions = 0;
    for (int t = 0; t < trials; ++t) {
        const auto offset_a = static_cast<std::uint64_t>(2 * t) * n;
        const auto offset_b = static_cast<std::uint64_t>(2 * t + 1) * n;
        const auto pool_a = ensemble::sample_ensemble(config, train, dist, n, offset_a);
        const auto pool_b = ensemble::sample_ensemble(config, train, dist, n, offset_b);
        const auto dec_a = ensemble::decide_all(pool_a, alpha, test.features);
        const auto dec_b = ensemble::decide_all(pool_b, alpha, test.features);
        for (std::size_t p = 0; p < npoints; ++p) {
            if (ensemble::strict_neq(dec_a[p], dec_b[p])) ++disagreements;
            abstentions += dec_a[p].abstained ? 1 : 0;
            abstentions += dec_b[p].abstained ? 1 : 0;
        }
    }

    BoundCheckReport report;
    report.check_name = "pairwise_consistency";
    report.trials = trials;
    report.empirical_rate =
        static_cast<double>(disagreements) / (static_cast<double>(trials) * npoints);
    report.mean_rate = report.empirical_rate;
    report.beta_hat =
        static_cast<double>(abstentions) / (2.0 * static_cast<double>(trials) * npoints);
    report.bound = 2.0 * (alpha + report.beta_hat);
    report.slack = three_sigma_slack(report.bound, trials);
    report.passed = report.empirical_rate <= report.bound + report.slack;
    return report;
}

}  // namespace cvote::theory
