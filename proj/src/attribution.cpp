#include "cvote/attribution.hpp"

#include <cmath>
#include <stdexcept>

#include "cvote/rng.hpp"

namespace cvote::attribution {

void AttributionVector::validate() const {
    if (!scores.allFinite()) throw std::invalid_argument("attribution: non-finite score");
    if (shape) {
        const auto [h, w] = *shape;
        if (static_cast<Eigen::Index>(h) * w != scores.size()) {
            throw std::invalid_argument("attribution: shape does not match score length");
        }
    }
}

Eigen::MatrixXd AttributionVector::as_image() const {
    if (!shape) throw std::invalid_argument("attribution carries no 2-D shape");
    const auto [h, w] = *shape;
    Eigen::MatrixXd img(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            img(r, c) = scores(static_cast<Eigen::Index>(r) * w + c);
        }
    }
    return img;
}

AttributionVector saliency(const MlpModel& model, Eigen::Ref<const Eigen::VectorXd> x,
                           int target) {
    model.validate();
    if (target < 0 || target >= model.num_classes) {
        throw std::invalid_argument("saliency: target class out of range");
    }
    if (!x.allFinite()) throw std::invalid_argument("saliency: non-finite input");
    const auto trace = model.forward_trace(x);
    const std::size_t num_layers = model.layers.size();

    // d(logit_target)/dz for the output layer is the unit vector at target.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.num_classes);
    grad(target) = 1.0;
    for (std::size_t l = num_layers; l-- > 0;) {
        Eigen::VectorXd upstream = model.layers[l].weights.transpose() * grad;
        if (l == 0) {
            AttributionVector out;
            out.scores = std::move(upstream);
            out.target_class = target;
            return out;
        }
        const Eigen::VectorXd& z = trace.pre_activations[l - 1];
        if (model.activation == pipeline::Activation::Relu) {
            grad = upstream.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        } else {
            grad = upstream.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
        }
    }
    throw std::logic_error("saliency: model has no layers");
}

AttributionVector ensemble_saliency(const ModelPool& pool, Eigen::Ref<const Eigen::VectorXd> x,
                                    std::optional<std::pair<int, int>> shape) {
    pool.validate();
    const int target = ensemble::plurality_predict(pool, x);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.size());
    for (const auto& model : pool.models) {
        sum += saliency(model, x, target).scores;
    }
    AttributionVector out;
    out.scores = sum / static_cast<double>(pool.size());
    out.target_class = target;
    out.shape = shape;
    out.validate();
    return out;
}

double ssim(const AttributionVector& a, const AttributionVector& b) {
    if (!a.shape || !b.shape || *a.shape != *b.shape) {
        throw std::invalid_argument("ssim: both attributions need the same 2-D shape");
    }
    if (std::min(a.shape->first, a.shape->second) < 7) {
        throw std::invalid_argument("ssim: min side must be >= 7");
    }
    return ssim_grid(a.as_image(), b.as_image());
}

double ssim_grid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("ssim_grid: shape mismatch");
    }
    constexpr int win = 7;
    if (a.rows() < win || a.cols() < win) throw std::invalid_argument("ssim_grid: side < 7");

    const double joint_max = std::max(a.maxCoeff(), b.maxCoeff());
    const double joint_min = std::min(a.minCoeff(), b.minCoeff());
    double range = joint_max - joint_min;
    if (range == 0.0) range = 1.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    constexpr double np = static_cast<double>(win * win);
    double total = 0.0;
    std::size_t windows = 0;
    for (Eigen::Index r = 0; r + win <= a.rows(); ++r) {
        for (Eigen::Index c = 0; c + win <= a.cols(); ++c) {
            const auto wa = a.block(r, c, win, win);
            const auto wb = b.block(r, c, win, win);
            const double mu_a = wa.sum() / np;
            const double mu_b = wb.sum() / np;
            const double var_a = (wa.array() - mu_a).square().sum() / (np - 1.0);
            const double var_b = (wb.array() - mu_b).square().sum() / (np - 1.0);
            const double cov = ((wa.array() - mu_a) * (wb.array() - mu_b)).sum() / (np - 1.0);
            const double s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += s;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

SimilarityRecord compare_attributions(const AttributionVector& a, const AttributionVector& b,
                                      int k) {
    SimilarityRecord rec;
    rec.k = k;
    rec.spearman_rho = spearman_rho(a.scores, b.scores);
    rec.pearson_r = pearson_r(a.scores, b.scores);
    rec.top_k_intersection = top_k_intersection(a.scores, b.scores, k);
    rec.l2_distance = l2_distance(a.scores, b.scores);
    if (a.shape && b.shape && *a.shape == *b.shape &&
        std::min(a.shape->first, a.shape->second) >= 7) {
        rec.ssim = ssim(a, b);
    }
    return rec;
}

namespace {

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double stddev() const {
        if (count < 2) return 0.0;
        const double m = mean();
        const double var =
            (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
        return var > 0.0 ? std::sqrt(var) : 0.0;
    }
};

struct MetricAccumulators {
    Accumulator rho, r, topk, l2, ssim_acc;
    std::size_t undefined = 0;

    void add_pair(const AttributionVector& a, const AttributionVector& b, int k) {
        try {
            SimilarityRecord rec = compare_attributions(a, b, k);
            rho.add(rec.spearman_rho);
            r.add(rec.pearson_r);
            topk.add(rec.top_k_intersection);
            l2.add(rec.l2_distance);
            if (rec.ssim) ssim_acc.add(*rec.ssim);
        } catch (const std::domain_error&) {
            ++undefined;  // constant attribution: correlation undefined
        }
    }
};

}  // namespace

std::vector<StabilityRow> attribution_stability_report(
    const std::map<int, std::vector<ModelPool>>& pools_by_size, const Dataset& test, int k,
    std::uint64_t baseline_seed, std::optional<std::pair<int, int>> shape) {
    const auto npoints = static_cast<std::size_t>(test.rows());
    if (npoints == 0) throw std::invalid_argument("stability report: empty test set");

    std::vector<StabilityRow> rows;
    for (const auto& [n, pools] : pools_by_size) {
        if (pools.size() < 2) {
            throw std::invalid_argument("stability report: need >= 2 pools per size, size " +
                                        std::to_string(n) + " has " +
                                        std::to_string(pools.size()));
        }
        // Attributions per (pool, point).
        std::vector<std::vector<AttributionVector>> attr(pools.size());
        for (std::size_t q = 0; q < pools.size(); ++q) {
            attr[q].resize(npoints);
            for (std::size_t p = 0; p < npoints; ++p) {
                attr[q][p] = ensemble_saliency(
                    pools[q], test.features.row(static_cast<Eigen::Index>(p)).transpose(), shape);
            }
        }

        MetricAccumulators cross;
        for (std::size_t p = 0; p < npoints; ++p) {
            for (std::size_t i = 0; i < pools.size(); ++i) {
                for (std::size_t j = i + 1; j < pools.size(); ++j) {
                    cross.add_pair(attr[i][p], attr[j][p], k);
                }
            }
        }

        // Baseline: same pool, two random distinct points. One pair per
        // (pool, pool-pair) keeps the sample sizes comparable.
        MetricAccumulators base;
        SplitMix64 rng(mix64_pair(baseline_seed, static_cast<std::uint64_t>(n)));
        const std::size_t pairs_per_pool = pools.size() * (pools.size() - 1) / 2;
        for (std::size_t q = 0; npoints >= 2 && q < pools.size(); ++q) {
            for (std::size_t s = 0; s < pairs_per_pool; ++s) {
                const auto p1 = static_cast<std::size_t>(rng.below(npoints));
                auto p2 = static_cast<std::size_t>(rng.below(npoints - 1));
                if (p2 >= p1) ++p2;
                base.add_pair(attr[q][p1], attr[q][p2], k);
            }
        }

        auto push = [&](const std::string& name, const Accumulator& c, const Accumulator& b,
                        std::size_t undefined) {
            StabilityRow row;
            row.n = n;
            row.metric = name;
            row.mean = c.mean();
            row.stddev = c.stddev();
            row.baseline_mean = b.mean();
            row.undefined_pairs = undefined;
            rows.push_back(row);
        };
        push("spearman_rho", cross.rho, base.rho, cross.undefined);
        push("pearson_r", cross.r, base.r, cross.undefined);
        push("top_k", cross.topk, base.topk, cross.undefined);
        push("l2", cross.l2, base.l2, cross.undefined);
        if (cross.ssim_acc.count > 0) push("ssim", cross.ssim_acc, base.ssim_acc, cross.undefined);
    }
    return rows;
}

}  // namespace cvote::attribution
