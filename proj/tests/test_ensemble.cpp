#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "cvote/ensemble.hpp"
#include "cvote/pool_io.hpp"
#include "cvote/rng.hpp"

using namespace cvote;
using namespace cvote::ensemble;
using pipeline::make_overlapping_gaussians;
using pipeline::RandomState;
using pipeline::StateDistribution;
using pipeline::StateKind;

namespace {

pipeline::PipelineConfig tiny_config(int epochs = 15) {
    pipeline::PipelineConfig cfg;
    cfg.hidden_layer_sizes = {4};
    cfg.epochs = epochs;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.1;
    return cfg;
}

bool models_equal(const pipeline::MlpModel& a, const pipeline::MlpModel& b) {
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights != b.layers[l].weights) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
    }
    return a.layers.size() == b.layers.size();
}

/// A hand-built pool that always votes a fixed label pattern, for vote-level
/// tests: one linear model per desired vote, emitting that class.
ModelPool constant_pool(const std::vector<int>& votes, int num_classes) {
    ModelPool pool;
    for (int v : votes) {
        pipeline::MlpModel m;
        m.num_classes = num_classes;
        pipeline::MlpModel::Layer layer;
        layer.weights = Eigen::MatrixXd::Zero(num_classes, 2);
        layer.bias = Eigen::VectorXd::Zero(num_classes);
        layer.bias(v) = 1.0;
        m.layers.push_back(layer);
        pool.models.push_back(std::move(m));
        pool.states.push_back(RandomState{0, std::nullopt});
    }
    pool.config_fingerprint = "constant";
    return pool;
}

const Eigen::Vector2d kOrigin{0.0, 0.0};

}  // namespace

TEST_CASE("create_ensemble base cases") {
    auto [train, test] = make_overlapping_gaussians(80, 8, 3);
    const auto cfg = tiny_config();
    const StateDistribution dist{StateKind::RandomSeed, 5, std::nullopt};

    const auto s0 = pipeline::sample_state(dist, 0);
    std::vector<RandomState> single = {s0};
    const auto pool1 = create_ensemble(cfg, train, single);
    CHECK(pool1.size() == 1);
    CHECK(models_equal(pool1.models[0], pipeline::train_model(cfg, train, s0)));

    std::vector<RandomState> dup = {s0, s0};
    const auto pool2 = create_ensemble(cfg, train, dup);
    CHECK(models_equal(pool2.models[0], pool2.models[1]));
}

TEST_CASE("create_ensemble annotates training failures with the state index") {
    auto [train, test] = make_overlapping_gaussians(60, 6, 3);
    auto cfg = tiny_config(5);
    cfg.learning_rate = 1e160;  // diverges
    const StateDistribution dist{StateKind::RandomSeed, 5, std::nullopt};
    std::vector<RandomState> states = {pipeline::sample_state(dist, 0),
                                       pipeline::sample_state(dist, 1)};
    CHECK_THROWS_WITH_AS(create_ensemble(cfg, train, states),
                         doctest::Contains("state 0"), std::runtime_error);
}

TEST_CASE("sample_ensemble determinism and disjoint offsets") {
    auto [train, test] = make_overlapping_gaussians(80, 8, 3);
    const auto cfg = tiny_config(5);
    const StateDistribution dist{StateKind::RandomSeed, 5, std::nullopt};

    const auto a = sample_ensemble(cfg, train, dist, 5, 0);
    const auto b = sample_ensemble(cfg, train, dist, 5, 0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(models_equal(a.models[i], b.models[i]));

    const auto c = sample_ensemble(cfg, train, dist, 5, 5);
    std::vector<std::uint64_t> seeds;
    for (const auto& s : a.states) seeds.push_back(s.seed);
    for (const auto& s : c.states) seeds.push_back(s.seed);
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());  // pairwise distinct
}

TEST_CASE("selective_predict on forced vote splits") {
    SUBCASE("unanimous 5 abstains at 0.05") {
        const auto pool = constant_pool({1, 1, 1, 1, 1}, 2);
        const auto d = selective_predict(pool, 0.05, kOrigin);
        CHECK(d.abstained);
        CHECK(d.p_value.value == doctest::Approx(0.0625).epsilon(1e-15));
    }
    SUBCASE("9-1 of 10 predicts at 0.05") {
        const auto pool = constant_pool({0, 1, 1, 1, 1, 1, 1, 1, 1, 1}, 2);
        const auto d = selective_predict(pool, 0.05, kOrigin);
        CHECK(d.predicted());
        CHECK(d.label == 1);
        CHECK(d.p_value.value == doctest::Approx(0.021484375).epsilon(1e-14));
    }
    SUBCASE("8-2 of 10 abstains at 0.05") {
        const auto pool = constant_pool({0, 0, 1, 1, 1, 1, 1, 1, 1, 1}, 2);
        const auto d = selective_predict(pool, 0.05, kOrigin);
        CHECK(d.abstained);
        CHECK(d.p_value.value == doctest::Approx(0.109375).epsilon(1e-14));
    }
    SUBCASE("multi-class tests only the top two") {
        // votes (6, 3, 1): test is 6 vs 3 -> p = 0.5078125
        std::vector<int> votes(6, 0);
        votes.insert(votes.end(), 3, 1);
        votes.push_back(2);
        const auto pool = constant_pool(votes, 3);
        const auto d = selective_predict(pool, 0.05, kOrigin);
        CHECK(d.abstained);
        CHECK(d.p_value.value == doctest::Approx(0.5078125).epsilon(1e-14));
    }
}

TEST_CASE("decision invariants on random tallies") {
    SplitMix64 rng(0xd00d);
    for (int trial = 0; trial < 300; ++trial) {
        const int num_classes = 2 + static_cast<int>(rng.below(3));
        const int n = 1 + static_cast<int>(rng.below(25));
        std::vector<int> votes(static_cast<std::size_t>(n));
        for (auto& v : votes) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
        const double alpha = 0.01 + 0.2 * rng.uniform();
        const auto tally = stats::tally(votes, num_classes);
        const auto d = decide(tally, alpha);
        const auto top = stats::top_two(tally);
        // abstention correctness by recomputation
        const double p = stats::binom_p_value(top.n_a, top.n_a + top.n_b).value;
        CHECK(d.p_value.value == p);
        CHECK(d.abstained == (p > alpha));
        if (d.predicted()) CHECK(d.label == top.class_a);  // predicted implies plurality
    }
}

TEST_CASE("unanimity thresholds by alpha") {
    for (int n = 1; n <= 10; ++n) {
        const auto pool = constant_pool(std::vector<int>(static_cast<std::size_t>(n), 1), 2);
        const bool predicts_05 = selective_predict(pool, 0.05, kOrigin).predicted();
        const bool predicts_01 = selective_predict(pool, 0.01, kOrigin).predicted();
        CHECK(predicts_05 == (n >= 6));
        CHECK(predicts_01 == (n >= 8));
    }
}

TEST_CASE("permutation invariance of selective and plurality prediction") {
    auto [train, test] = make_overlapping_gaussians(80, 20, 17);
    const auto cfg = tiny_config();
    const StateDistribution dist{StateKind::RandomSeed, 29, std::nullopt};
    auto pool = sample_ensemble(cfg, train, dist, 7, 0);

    auto permuted = pool;
    SplitMix64 rng(4);
    std::vector<std::size_t> perm(pool.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        permuted.models[i] = pool.models[perm[i]];
        permuted.states[i] = pool.states[perm[i]];
    }

    for (Eigen::Index r = 0; r < test.rows(); ++r) {
        const Eigen::VectorXd x = test.features.row(r).transpose();
        const auto d1 = selective_predict(pool, 0.05, x);
        const auto d2 = selective_predict(permuted, 0.05, x);
        CHECK(d1.abstained == d2.abstained);
        CHECK(d1.label == d2.label);
        CHECK(plurality_predict(pool, x) == plurality_predict(permuted, x));
        if (d1.predicted()) CHECK(d1.label == plurality_predict(pool, x));
    }
}

TEST_CASE("monotone certification: duplicating majority voters never flips to abstain") {
    SplitMix64 rng(0xabc);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(12));
        std::vector<int> votes(static_cast<std::size_t>(n));
        for (auto& v : votes) v = static_cast<int>(rng.below(2));
        const auto tally = stats::tally(votes, 2);
        const auto d = decide(tally, 0.05);
        if (!d.predicted()) continue;
        auto bigger = votes;
        bigger.push_back(d.label);
        bigger.push_back(d.label);
        const auto d2 = decide(stats::tally(bigger, 2), 0.05);
        CHECK(d2.predicted());
        CHECK(d2.label == d.label);
    }
}

TEST_CASE("abs_neq and strict_neq definitions") {
    const auto abstain = decide(stats::tally(std::vector<int>{0, 1}, 2), 0.05);
    REQUIRE(abstain.abstained);
    const auto pred0 = decide(stats::tally(std::vector<int>(8, 0), 2), 0.05);
    const auto pred1 = decide(stats::tally(std::vector<int>(8, 1), 2), 0.05);
    REQUIRE(pred0.predicted());
    REQUIRE(pred1.predicted());

    CHECK_FALSE(abs_neq(abstain, pred1));
    CHECK_FALSE(abs_neq(abstain, abstain));
    CHECK(abs_neq(pred0, pred1));
    CHECK_FALSE(abs_neq(pred1, pred1));
    CHECK(abs_neq(pred0, 1));
    CHECK_FALSE(abs_neq(abstain, 1));
    CHECK(abs_neq(0, 1));
    CHECK_FALSE(abs_neq(1, 1));

    CHECK(strict_neq(abstain, pred1));
    CHECK_FALSE(strict_neq(abstain, abstain));
    CHECK(strict_neq(pred0, pred1));
    CHECK_FALSE(strict_neq(pred1, pred1));
}

TEST_CASE("estimate_mode_predictor degenerate and base cases") {
    auto [train, test] = make_overlapping_gaussians(40, 4, 23);
    const Eigen::VectorXd x = test.features.row(0).transpose();

    // State-independent pipeline: no training, and a distribution whose every
    // draw is the same state (leave-one-out over a single candidate row).
    auto cfg = tiny_config(0);
    const StateDistribution constant{StateKind::LeaveOneOut, 99, 1};
    const auto constant_model =
        pipeline::train_model(cfg, train, pipeline::sample_state(constant, 12345));
    const int expected = pipeline::predict_label(constant_model, x);
    CHECK(estimate_mode_predictor(cfg, train, constant, 25, x) == expected);

    // num_samples = 1 equals that single model's prediction.
    auto cfg2 = tiny_config(3);
    const StateDistribution dist{StateKind::RandomSeed, 7, std::nullopt};
    const auto single = pipeline::train_model(cfg2, train, pipeline::sample_state(dist, 0));
    CHECK(estimate_mode_predictor(cfg2, train, dist, 1, x) ==
          pipeline::predict_label(single, x));
}

TEST_CASE("mode estimate is stable across disjoint draws on confident points") {
    auto [train, test] = make_overlapping_gaussians(150, 40, 31);
    const auto cfg = tiny_config(20);
    const StateDistribution dist{StateKind::RandomSeed, 41, std::nullopt};
    const auto first = estimate_mode_labels(cfg, train, dist, 60, 0, test.features);
    const auto second = estimate_mode_labels(cfg, train, dist, 60, 1000, test.features);

    // Check stability on points where the first estimate was confident.
    std::vector<std::vector<int>> votes(static_cast<std::size_t>(test.rows()));
    for (int s = 0; s < 60; ++s) {
        const auto m = pipeline::train_model(cfg, train, pipeline::sample_state(dist, s));
        const auto labels = predict_labels(m, test.features);
        for (std::size_t p = 0; p < labels.size(); ++p) votes[p].push_back(labels[p]);
    }
    std::size_t confident = 0;
    for (Eigen::Index p = 0; p < test.rows(); ++p) {
        const auto t = stats::top_two(stats::tally(votes[static_cast<std::size_t>(p)], 2));
        if (t.n_a >= 54) {  // >= 0.9 empirical agreement
            ++confident;
            CHECK(first[static_cast<std::size_t>(p)] == second[static_cast<std::size_t>(p)]);
        }
    }
    CHECK(confident > 0);
}

TEST_CASE("disagreement_report on constant predictors") {
    auto [train, test] = make_overlapping_gaussians(40, 12, 53);

    const auto same = constant_pool({1, 1, 1, 1, 1, 1, 1}, 2);
    const auto rep = disagreement_report({same, same}, std::nullopt, test,
                                         DisagreementPolicy::AbsNeq);
    CHECK(rep.fraction_points_flipping == 0.0);
    CHECK(rep.num_pairs == 1);

    const auto zeros = constant_pool({0, 0, 0, 0, 0, 0, 0}, 2);
    const auto rep2 = disagreement_report({same, zeros}, std::nullopt, test,
                                          DisagreementPolicy::AbsNeq);
    CHECK(rep2.fraction_points_flipping == 1.0);
    for (double f : rep2.p_flip) CHECK(f == 1.0);

    // Selective with alpha: a 7-model unanimous pool predicts at 0.05, so the
    // conflict survives the abs_neq policy too.
    const auto rep3 =
        disagreement_report({same, zeros}, 0.05, test, DisagreementPolicy::AbsNeq);
    CHECK(rep3.fraction_points_flipping == 1.0);

    CHECK_THROWS_AS(disagreement_report({same}, std::nullopt, test, DisagreementPolicy::AbsNeq),
                    std::invalid_argument);
}

TEST_CASE("selective ensembles at desk scale do not disagree under abs_neq") {
    auto [train, test] = make_overlapping_gaussians(150, 60, 67);
    const auto cfg = tiny_config(25);
    const StateDistribution dist{StateKind::RandomSeed, 71, std::nullopt};
    std::vector<ModelPool> ensembles;
    for (int e = 0; e < 6; ++e) {
        ensembles.push_back(sample_ensemble(cfg, train, dist, 15,
                                            static_cast<std::uint64_t>(e) * 15));
    }
    const auto rep = disagreement_report(ensembles, 0.05, test, DisagreementPolicy::AbsNeq);
    CHECK(rep.fraction_points_flipping == 0.0);
}
