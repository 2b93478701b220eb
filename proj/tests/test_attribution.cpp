#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "cvote/attribution.hpp"
#include "cvote/rng.hpp"
#include "oracles.hpp"

using namespace cvote;
using namespace cvote::attribution;
using pipeline::Activation;
using pipeline::make_overlapping_gaussians;
using pipeline::MlpModel;
using pipeline::RandomState;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double x : vals) v(i++) = x;
    return v;
}

/// Random small MLP with the given widths.
MlpModel random_model(const std::vector<int>& dims, Activation act, std::uint64_t seed) {
    SplitMix64 rng(seed);
    MlpModel m;
    m.activation = act;
    m.num_classes = dims.back();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        MlpModel::Layer layer;
        layer.weights.resize(dims[l + 1], dims[l]);
        layer.bias.resize(dims[l + 1]);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = rng.uniform(-1.0, 1.0);
            }
            layer.bias(r) = rng.uniform(-0.3, 0.3);
        }
        m.layers.push_back(std::move(layer));
    }
    return m;
}

bool away_from_kinks(const MlpModel& m, const Eigen::VectorXd& x, double margin) {
    const auto trace = m.forward_trace(x);
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        for (Eigen::Index i = 0; i < trace.pre_activations[l].size(); ++i) {
            if (std::abs(trace.pre_activations[l](i)) < margin) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("saliency of a linear model is the weight row") {
    MlpModel m;
    m.num_classes = 3;
    MlpModel::Layer layer;
    layer.weights.resize(3, 4);
    layer.weights << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    layer.bias = Eigen::VectorXd::Zero(3);
    m.layers.push_back(layer);
    const auto attr = saliency(m, vec({0.1, 0.2, 0.3, 0.4}), 1);
    CHECK(attr.scores == layer.weights.row(1).transpose());
    CHECK(attr.target_class == 1);
    CHECK_THROWS_AS(saliency(m, vec({1.0, 2.0}), 0), std::invalid_argument);
    CHECK_THROWS_AS(saliency(m, vec({0.1, 0.2, 0.3, 0.4}), 5), std::invalid_argument);
}

TEST_CASE("tanh one-hidden-layer gradient at zero input equals W2*W1 row") {
    auto m = random_model({3, 5, 2}, Activation::Tanh, 99);
    m.layers[0].bias.setZero();
    m.layers[1].bias.setZero();
    const Eigen::MatrixXd chain = m.layers[1].weights * m.layers[0].weights;
    const auto attr = saliency(m, Eigen::VectorXd::Zero(3), 1);
    CHECK((attr.scores - chain.row(1).transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("saliency matches central finite differences away from kinks") {
    SplitMix64 rng(0xfd);
    int checked = 0;
    while (checked < 100) {
        const bool relu = rng.below(2) == 0;
        const auto m = random_model({4, 8, 6, 3}, relu ? Activation::Relu : Activation::Tanh,
                                    rng.next());
        Eigen::VectorXd x(4);
        for (Eigen::Index i = 0; i < 4; ++i) x(i) = rng.uniform(-2.0, 2.0);
        if (relu && !away_from_kinks(m, x, 1e-3)) continue;
        const int target = static_cast<int>(rng.below(3));
        const auto grad = saliency(m, x, target).scores;
        const auto fd = oracle::central_differences(
            [&](const Eigen::VectorXd& q) { return m.logits(q)(target); }, x, 1e-5);
        const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
        CHECK((fd - grad).cwiseAbs().maxCoeff() <= 1e-4 * scale);
        ++checked;
    }
}

TEST_CASE("ensemble saliency bases and invariances") {
    auto [train, test] = make_overlapping_gaussians(80, 10, 3);
    pipeline::PipelineConfig cfg;
    cfg.hidden_layer_sizes = {4};
    cfg.epochs = 10;
    const pipeline::StateDistribution dist{pipeline::StateKind::RandomSeed, 17, std::nullopt};
    const auto pool = ensemble::sample_ensemble(cfg, train, dist, 5, 0);
    const Eigen::VectorXd x = test.features.row(0).transpose();

    // singleton: equals the model's own saliency toward its own prediction
    pipeline::ModelPool one;
    one.models = {pool.models[0]};
    one.states = {pool.states[0]};
    one.config_fingerprint = "x";
    const auto single = ensemble_saliency(one, x);
    const int own = pipeline::predict_label(pool.models[0], x);
    CHECK(single.target_class == own);
    CHECK(single.scores == saliency(pool.models[0], x, own).scores);

    // two identical models equal the single-model saliency
    pipeline::ModelPool two = one;
    two.models.push_back(pool.models[0]);
    two.states.push_back(pool.states[0]);
    const auto dup = ensemble_saliency(two, x);
    CHECK((dup.scores - single.scores).cwiseAbs().maxCoeff() < 1e-15);

    // permutation invariance + equality with the constituent mean
    auto reversed = pool;
    std::reverse(reversed.models.begin(), reversed.models.end());
    std::reverse(reversed.states.begin(), reversed.states.end());
    const auto fwd = ensemble_saliency(pool, x);
    const auto rev = ensemble_saliency(reversed, x);
    CHECK((fwd.scores - rev.scores).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.size());
    const int target = ensemble::plurality_predict(pool, x);
    for (const auto& m : pool.models) mean += saliency(m, x, target).scores;
    mean /= static_cast<double>(pool.size());
    CHECK((fwd.scores - mean).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("spearman examples") {
    CHECK(spearman_rho(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(spearman_rho(vec({1, 2, 3, 4}), vec({4, 3, 2, 1})) ==
          doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(spearman_rho(vec({1, 2, 3, 4}), vec({1, 3, 2, 4})) ==
          doctest::Approx(0.8).epsilon(1e-14));
    CHECK_THROWS_AS(spearman_rho(vec({1, 1, 1}), vec({1, 2, 3})), std::domain_error);
    CHECK_THROWS_AS(spearman_rho(vec({1, 2}), vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("spearman matches the tie-free rank formula on random data") {
    SplitMix64 rng(0x5e);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(20));
        std::vector<double> a(static_cast<std::size_t>(n)), b(a.size());
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        Eigen::Map<Eigen::VectorXd> va(a.data(), n), vb(b.data(), n);
        CHECK(spearman_rho(va, vb) ==
              doctest::Approx(oracle::spearman_no_ties(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("spearman handles ties with average ranks") {
    // ranks of a: [1.5, 1.5, 3]; b: [1, 2, 3] -> rho = sqrt(3)/2
    CHECK(spearman_rho(vec({5, 5, 9}), vec({1, 2, 3})) ==
          doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("pearson examples and invariances") {
    const auto a = vec({1, 2, 3});
    CHECK(pearson_r(a, vec({5, 7, 9})) == doctest::Approx(1.0).epsilon(1e-14));   // 2a + 3
    CHECK(pearson_r(a, vec({-1, -2, -3})) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(pearson_r(a, vec({1, 2, 4})) == doctest::Approx(0.9819805060619659).epsilon(1e-10));
    CHECK_THROWS_AS(pearson_r(vec({2, 2, 2}), a), std::domain_error);

    // positive affine invariance on random input
    SplitMix64 rng(0xaf);
    Eigen::VectorXd u(9), w(9);
    for (Eigen::Index i = 0; i < 9; ++i) {
        u(i) = rng.uniform(-1, 1);
        w(i) = rng.uniform(-1, 1);
    }
    const double base = pearson_r(u, w);
    CHECK(pearson_r((3.7 * u.array() + 11.0).matrix(), w) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("monotone transforms preserve spearman and top-k") {
    SplitMix64 rng(0xbe);
    Eigen::VectorXd u(12), w(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
        u(i) = rng.uniform(-2, 2);
        w(i) = rng.uniform(-2, 2);
    }
    auto monotone = [](const Eigen::VectorXd& v) {
        return (v.array().exp() + v.array() * 3.0).matrix().eval();  // strictly increasing
    };
    CHECK(spearman_rho(monotone(u), monotone(w)) ==
          doctest::Approx(spearman_rho(u, w)).epsilon(1e-12));
    CHECK(top_k_intersection(monotone(u), monotone(w), 5) == top_k_intersection(u, w, 5));
}

TEST_CASE("top_k_intersection definition") {
    const auto a = vec({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(top_k_intersection(a, a, 5) == 1.0);
    const auto b = vec({9, 8, 7, 6, 5, 4, 3, 2, 1, 0});
    CHECK(top_k_intersection(a, b, 5) == 0.0);  // disjoint top halves
    // constructed disjoint top-5 sets
    const auto c = vec({9, 9, 9, 9, 9, 0, 0, 0, 0, 0});
    const auto d = vec({0, 0, 0, 0, 0, 9, 9, 9, 9, 9});
    CHECK(top_k_intersection(c, d, 5) == 0.0);
    // ties break toward the lowest feature index
    const auto e = vec({1, 1, 1, 1});
    CHECK(top_k_intersection(e, vec({4, 3, 2, 1}), 2) == 1.0);  // {0,1} on both sides
    CHECK_THROWS_AS(top_k_intersection(a, b, 11), std::invalid_argument);
}

TEST_CASE("l2 distance") {
    CHECK(l2_distance(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(l2_distance(vec({0, 0}), vec({3, 4})) == doctest::Approx(5.0).epsilon(1e-15));
    SplitMix64 rng(0x12);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd a(5), b(5), c(5);
        for (Eigen::Index i = 0; i < 5; ++i) {
            a(i) = rng.uniform(-1, 1);
            b(i) = rng.uniform(-1, 1);
            c(i) = rng.uniform(-1, 1);
        }
        CHECK(l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-12);
    }
}

TEST_CASE("ssim properties and oracle agreement") {
    auto image_attr = [](const Eigen::MatrixXd& img) {
        AttributionVector a;
        a.shape = {static_cast<int>(img.rows()), static_cast<int>(img.cols())};
        a.scores.resize(img.size());
        for (Eigen::Index r = 0; r < img.rows(); ++r) {
            for (Eigen::Index c = 0; c < img.cols(); ++c) {
                a.scores(r * img.cols() + c) = img(r, c);
            }
        }
        return a;
    };

    // checkerboard and its inversion
    Eigen::MatrixXd board(8, 8), inverted(8, 8);
    for (Eigen::Index r = 0; r < 8; ++r) {
        for (Eigen::Index c = 0; c < 8; ++c) {
            board(r, c) = (r + c) % 2 == 0 ? 1.0 : 0.0;
            inverted(r, c) = 1.0 - board(r, c);
        }
    }
    const auto a = image_attr(board);
    const auto b = image_attr(inverted);
    CHECK(ssim(a, b) == doctest::Approx(oracle::ssim_windowed(board, inverted)).epsilon(1e-10));
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == ssim(b, a));

    // constant shift with the same joint range is strictly below 1
    SplitMix64 rng(0x88);
    Eigen::MatrixXd noise(9, 9);
    for (Eigen::Index r = 0; r < 9; ++r) {
        for (Eigen::Index c = 0; c < 9; ++c) noise(r, c) = rng.uniform();
    }
    const Eigen::MatrixXd shifted = noise.array() + 0.2;
    CHECK(ssim(image_attr(noise), image_attr(shifted)) < 1.0);
    CHECK(ssim(image_attr(noise), image_attr(shifted)) ==
          doctest::Approx(oracle::ssim_windowed(noise, shifted)).epsilon(1e-10));

    // domain errors: shape mismatch and too-small sides
    auto small = image_attr(Eigen::MatrixXd::Ones(5, 12));
    CHECK_THROWS_AS(ssim(small, small), std::invalid_argument);
    auto c9 = image_attr(Eigen::MatrixXd::Ones(9, 9));
    CHECK_THROWS_AS(ssim(a, c9), std::invalid_argument);
    AttributionVector no_shape;
    no_shape.scores = Eigen::VectorXd::Ones(64);
    CHECK_THROWS_AS(ssim(no_shape, a), std::invalid_argument);
}

TEST_CASE("compare_attributions fills every metric") {
    AttributionVector a, b;
    a.scores = vec({1, 2, 3, 4, 5, 6, 7, 8});
    b.scores = vec({2, 1, 3, 4, 5, 6, 8, 7});
    const auto rec = compare_attributions(a, b, 3);
    CHECK(rec.k == 3);
    CHECK(rec.spearman_rho == doctest::Approx(spearman_rho(a.scores, b.scores)));
    CHECK(rec.pearson_r == doctest::Approx(pearson_r(a.scores, b.scores)));
    CHECK(rec.top_k_intersection == top_k_intersection(a.scores, b.scores, 3));
    CHECK(rec.l2_distance == l2_distance(a.scores, b.scores));
    CHECK_FALSE(rec.ssim.has_value());
}

TEST_CASE("stability report: identical pools give perfect correlations") {
    auto [train, test] = make_overlapping_gaussians(60, 12, 5);
    pipeline::PipelineConfig cfg;
    cfg.hidden_layer_sizes = {4};
    cfg.epochs = 8;
    const pipeline::StateDistribution dist{pipeline::StateKind::RandomSeed, 3, std::nullopt};
    const auto pool = ensemble::sample_ensemble(cfg, train, dist, 3, 0);

    std::map<int, std::vector<pipeline::ModelPool>> by_size;
    by_size[3] = {pool, pool};
    const auto rows = attribution_stability_report(by_size, test, 2);
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
        if (row.metric == "spearman_rho" || row.metric == "pearson_r" || row.metric == "top_k") {
            CHECK(row.mean == doctest::Approx(1.0).epsilon(1e-12));
        }
        if (row.metric == "l2") CHECK(row.mean == 0.0);
    }

    std::map<int, std::vector<pipeline::ModelPool>> bad;
    bad[3] = {pool};
    CHECK_THROWS_AS(attribution_stability_report(bad, test, 2), std::invalid_argument);
}

TEST_CASE("stability report: ensembles beat singletons and the random-point baseline") {
    auto [train, test] = make_overlapping_gaussians(200, 60, 7);
    pipeline::PipelineConfig cfg;
    cfg.hidden_layer_sizes = {8};
    cfg.epochs = 25;
    const pipeline::StateDistribution dist{pipeline::StateKind::RandomSeed, 23, std::nullopt};

    std::map<int, std::vector<pipeline::ModelPool>> by_size;
    for (int q = 0; q < 6; ++q) {
        by_size[15].push_back(
            ensemble::sample_ensemble(cfg, train, dist, 15, static_cast<std::uint64_t>(q) * 15));
    }
    for (int q = 0; q < 6; ++q) {
        by_size[1].push_back(
            ensemble::sample_ensemble(cfg, train, dist, 1, 90 + static_cast<std::uint64_t>(q)));
    }
    const auto rows = attribution_stability_report(by_size, test, 2);
    double rho1 = 0.0, rho15 = 0.0, base15 = 0.0;
    for (const auto& row : rows) {
        if (row.metric != "spearman_rho") continue;
        if (row.n == 1) rho1 = row.mean;
        if (row.n == 15) {
            rho15 = row.mean;
            base15 = row.baseline_mean;
        }
    }
    CHECK(rho15 > rho1);    // the ensemble-size trend
    CHECK(rho15 > base15);  // cross-model similarity beats random-point baseline
}
