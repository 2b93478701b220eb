#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cvote/dataset.hpp"
#include "cvote/mlp.hpp"

namespace cvote::cli {

inline constexpr int kReportFormatVersion = 1;

/// Generated two-class benchmark request.
struct SyntheticSource {
    std::string name = "overlapping_gaussians";
    std::size_t train_size = 500;
    std::size_t test_size = 200;
    std::uint64_t seed = pipeline::kDeskBenchmarkSeed;
    double spread = 1.2;
};

/// CSV-backed dataset request. Explicit test_indices win over the seeded
/// fraction split.
struct CsvSource {
    std::filesystem::path path;
    pipeline::DatasetSchema schema;
    double test_fraction = 0.3;
    std::uint64_t split_seed = 7;
    std::vector<std::size_t> test_indices;
};

/// Bound-check harness sizes; mirrors the experimental protocol at desk
/// scale.
struct BoundsConfig {
    double alpha = 0.05;
    int agreement_n = 10;
    int agreement_trials = 100;
    int oracle_samples = 200;
    int consistency_n = 15;
    int consistency_trials = 50;
};

struct RunConfig {
    std::variant<SyntheticSource, CsvSource> source = SyntheticSource{};
    pipeline::PipelineConfig pipeline;
    pipeline::StateKind state_kind = pipeline::StateKind::RandomSeed;
    std::uint64_t base_seed = 42;
    std::size_t pool_size = 50;
    std::vector<int> ensemble_sizes = {5, 10, 15, 20};
    int num_resamples = 10;
    std::vector<double> alphas = {0.05, 0.01};
    std::uint64_t resample_seed = 1;
    int metrics_k = 2;
    std::optional<std::string> group_by;
    double group_abstention_margin = 0.1;
    std::optional<std::pair<int, int>> image_shape;
    BoundsConfig bounds;

    void validate() const;
    /// Hash over everything that shapes a trained pool: data source,
    /// pipeline, state distribution and pool size.
    std::string pool_fingerprint() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// The desk-scale defaults (synthetic benchmark, pool of 50).
RunConfig default_desk_config();

/// Loads or generates the configured dataset, fits the configured
/// preprocessing on the training rows and applies it to all rows.
pipeline::TrainTest prepare_data(const RunConfig& config);

/// The state distribution the run draws from; LeaveOneOut picks up the
/// training-set size.
pipeline::StateDistribution make_distribution(const RunConfig& config, Eigen::Index train_rows);

}  // namespace cvote::cli
