#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvote/ensemble.hpp"
#include "cvote/metrics.hpp"

namespace cvote::attribution {

using pipeline::Dataset;
using pipeline::MlpModel;
using pipeline::ModelPool;

/// Per-feature saliency scores for one model (or one ensemble) at one point.
struct AttributionVector {
    Eigen::VectorXd scores;
    int target_class = 0;
    /// (height, width) interpretation for image-like inputs; enables SSIM.
    std::optional<std::pair<int, int>> shape;

    void validate() const;
    Eigen::MatrixXd as_image() const;  ///< requires shape
};

/// Exact gradient of the target-class logit with respect to the input,
/// by reverse-mode differentiation through the layers. The ReLU subgradient
/// at 0 is taken as 0.
AttributionVector saliency(const MlpModel& model, Eigen::Ref<const Eigen::VectorXd> x, int target);

/// Mean constituent saliency toward the ensemble's plurality class.
AttributionVector ensemble_saliency(const ModelPool& pool, Eigen::Ref<const Eigen::VectorXd> x,
                                    std::optional<std::pair<int, int>> shape = std::nullopt);

/// SSIM between two image-shaped attributions (same shape, min side >= 7).
double ssim(const AttributionVector& a, const AttributionVector& b);

struct SimilarityRecord {
    double spearman_rho = 0.0;
    double pearson_r = 0.0;
    double top_k_intersection = 0.0;
    double l2_distance = 0.0;
    std::optional<double> ssim;
    int k = 5;
};

/// All similarity metrics between two attributions; SSIM only when both carry
/// the same image shape with min side >= 7.
SimilarityRecord compare_attributions(const AttributionVector& a, const AttributionVector& b,
                                      int k);

/// One aggregate row of the stability report.
struct StabilityRow {
    int n = 0;                  ///< ensemble size
    std::string metric;         ///< "spearman_rho", "pearson_r", "top_k", "l2", "ssim"
    double mean = 0.0;          ///< over (test point, pool pair) items
    double stddev = 0.0;
    double baseline_mean = 0.0; ///< same-pool attributions at random distinct points
    std::size_t undefined_pairs = 0;  ///< comparisons skipped (constant inputs)
};

/// Cross-pool attribution similarity per ensemble size, aggregated over
/// every test point and every pool pair, next to the within-pool
/// random-point baseline. `baseline_seed` drives the baseline point pairs.
std::vector<StabilityRow> attribution_stability_report(
    const std::map<int, std::vector<ModelPool>>& pools_by_size, const Dataset& test, int k,
    std::uint64_t baseline_seed = 0xba5e11ull,
    std::optional<std::pair<int, int>> shape = std::nullopt);

}  // namespace cvote::attribution
