#pragma once

#include <span>
#include <vector>

namespace cvote::stats {

/// A probability in [0, 1]; construction enforces the range.
struct PValue {
    double value = 1.0;

    PValue() = default;
    explicit PValue(double v);
};

/// Per-class vote counts from an ensemble. sum(counts) == num_models.
struct VoteTally {
    std::vector<int> counts;
    int num_models = 0;

    int num_classes() const { return static_cast<int>(counts.size()); }
    void validate() const;
};

struct TopTwo {
    int class_a = 0;  ///< plurality class (ties broken by lowest index)
    int n_a = 0;
    int class_b = 0;  ///< runner-up class
    int n_b = 0;
};

/// Counts label multiplicities. Labels must lie in [0, num_classes).
VoteTally tally(std::span<const int> labels, int num_classes);

/// The two largest counts; equal counts are ordered by lowest class index.
TopTwo top_two(const VoteTally& tally);

/// Exact two-sided p-value for k successes in t fair-coin trials:
///   min(1, 2 * P[X >= max(k, t-k)]),  X ~ Binomial(t, 1/2).
/// Computed in log space (tail summed from the extreme inward), absolute
/// error below 1e-12 for t up to 1e4. Unanimous outcomes are exact:
/// binom_p_value(t, t) == 2^(1-t).
PValue binom_p_value(int k, int t);

}  // namespace cvote::stats
