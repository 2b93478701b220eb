#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cvote::attribution {

/// Average ranks (1-based; ties share the mean of the ranks they span).
template <typename Derived>
Eigen::VectorXd average_ranks(const Eigen::DenseBase<Derived>& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) ==
                                v(order[static_cast<std::size_t>(i)])) {
            ++j;
        }
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = shared;
        i = j + 1;
    }
    return ranks;
}

/// Product-moment correlation. Throws std::domain_error when either input is
/// constant (correlation undefined).
template <typename DerivedA, typename DerivedB>
double pearson_r(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson_r: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("pearson_r: need at least 2 entries");
    const auto n = static_cast<double>(a.size());
    const double mean_a = a.derived().template cast<double>().sum() / n;
    const double mean_b = b.derived().template cast<double>().sum() / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double da = static_cast<double>(a(i)) - mean_a;
        const double db = static_cast<double>(b(i)) - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        throw std::domain_error("pearson_r: undefined for a constant input");
    }
    return sab / std::sqrt(saa * sbb);
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
template <typename DerivedA, typename DerivedB>
double spearman_rho(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman_rho: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("spearman_rho: need at least 2 entries");
    const Eigen::VectorXd ra = average_ranks(a);
    const Eigen::VectorXd rb = average_ranks(b);
    try {
        return pearson_r(ra, rb);
    } catch (const std::domain_error&) {
        throw std::domain_error("spearman_rho: undefined for a constant input");
    }
}

/// Indices of the k largest entries by raw signed value; equal values are
/// taken lowest-index first.
template <typename Derived>
std::vector<Eigen::Index> top_k_indices(const Eigen::DenseBase<Derived>& v, int k) {
    if (k < 0 || static_cast<Eigen::Index>(k) > v.size()) {
        throw std::invalid_argument("top_k: k out of range");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

/// |top-k(a) ∩ top-k(b)| / k.
template <typename DerivedA, typename DerivedB>
double top_k_intersection(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b,
                          int k) {
    if (a.size() != b.size()) throw std::invalid_argument("top_k_intersection: length mismatch");
    if (k <= 0) throw std::invalid_argument("top_k_intersection: k must be positive");
    auto ta = top_k_indices(a, k);
    auto tb = top_k_indices(b, k);
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    std::vector<Eigen::Index> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(k);
}

/// Euclidean distance.
template <typename DerivedA, typename DerivedB>
double l2_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l2_distance: length mismatch");
    return (a.derived().template cast<double>() - b.derived().template cast<double>()).norm();
}

/// Mean structural similarity over all fully-interior 7x7 uniform windows.
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the joint value range of both
/// images (L = 1 when both are constant). Variances use the unbiased (N-1)
/// normalization.
double ssim_grid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace cvote::attribution
