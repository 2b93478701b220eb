#include "cvote/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cvote::stats {

PValue::PValue(double v) : value(v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("p-value out of [0,1]: " + std::to_string(v));
    }
}

void VoteTally::validate() const {
    if (counts.size() < 2) throw std::invalid_argument("tally needs at least 2 classes");
    long long sum = 0;
    for (int c : counts) {
        if (c < 0) throw std::invalid_argument("negative vote count");
        sum += c;
    }
    if (sum != num_models) {
        throw std::invalid_argument("tally counts sum to " + std::to_string(sum) +
                                    ", expected " + std::to_string(num_models));
    }
}

VoteTally tally(std::span<const int> labels, int num_classes) {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (labels.empty()) throw std::invalid_argument("cannot tally an empty label sequence");
    VoteTally t;
    t.counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw std::domain_error("label " + std::to_string(label) + " out of range [0," +
                                    std::to_string(num_classes) + ")");
        }
        ++t.counts[static_cast<std::size_t>(label)];
    }
    t.num_models = static_cast<int>(labels.size());
    return t;
}

TopTwo top_two(const VoteTally& tally) {
    tally.validate();
    TopTwo r;
    r.class_a = -1;
    r.class_b = -1;
    for (int c = 0; c < tally.num_classes(); ++c) {
        int count = tally.counts[static_cast<std::size_t>(c)];
        if (r.class_a < 0 || count > r.n_a) {
            r.class_b = r.class_a;
            r.n_b = r.n_a;
            r.class_a = c;
            r.n_a = count;
        } else if (r.class_b < 0 || count > r.n_b) {
            r.class_b = c;
            r.n_b = count;
        }
    }
    return r;
}

namespace {

double log_add_exp(double a, double b) {
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

}  // namespace

PValue binom_p_value(int k, int t) {
    if (t < 1) throw std::domain_error("binom_p_value: t must be >= 1");
    if (k < 0 || k > t) {
        throw std::domain_error("binom_p_value: k=" + std::to_string(k) +
                                " out of [0," + std::to_string(t) + "]");
    }
    const int m = std::max(k, t - k);
    if (2 * m == t) return PValue(1.0);  // perfect tie
    if (m == t) {
        // Unanimous vote: the tail is the single term 2^(-t), kept exact.
        return PValue(std::min(1.0, std::ldexp(2.0, -t)));
    }
    // P[X >= m] summed from i = t inward; terms grow toward the mode, so the
    // running log-sum-exp accumulates smallest-first.
    double log_term = -static_cast<double>(t) * M_LN2;  // log pmf(t)
    double log_sum = log_term;
    for (int i = t; i > m; --i) {
        // pmf(i-1) = pmf(i) * i / (t - i + 1)
        log_term += std::log(static_cast<double>(i)) - std::log(static_cast<double>(t - i + 1));
        log_sum = log_add_exp(log_sum, log_term);
    }
    return PValue(std::min(1.0, 2.0 * std::exp(log_sum)));
}

}  // namespace cvote::stats
