#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvote/runconfig.hpp"

namespace cvote::cli {

/// Trains pool_size models from state draws 0..pool_size-1 and writes
/// <out_dir>/pool.json. Reruns with the same config are byte-identical.
int cmd_train_pool(const RunConfig& config, const std::filesystem::path& out_dir,
                   bool verbose = false);

/// Resampled-ensemble evaluation over every (n, alpha): selective accuracy
/// (abstain = error), abstention rate, plain plurality accuracy, disagreement
/// fractions, optional per-group breakdown. Writes evaluation.csv,
/// evaluation.json, per-point decision dumps and groups.csv when grouping.
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& pool_file,
                 const std::filesystem::path& out_dir, bool verbose = false);

/// Analytic abstention/consistency curves; writes abstention_curves.csv and a
/// JSON sidecar describing the generative model.
int cmd_curves(const std::vector<int>& sizes, const std::vector<double>& alphas, int resolution,
               const std::filesystem::path& out_dir);

/// Attribution-similarity aggregates per ensemble size; writes
/// attribution_stability.csv/.json.
int cmd_attribution_stability(const RunConfig& config, const std::filesystem::path& pool_file,
                              const std::filesystem::path& out_dir, bool verbose = false);

struct CounterexampleSpec {
    std::string classifier_expr = "x";         ///< classifier = sign of this expression
    std::string gradient_expr = "sin(x)";    ///< target gradient field
    double x_lo = -3.14159265358979323846;
    double x_hi = 3.14159265358979323846;
    std::optional<double> y_lo;       ///< both present => 2-D domain
    std::optional<double> y_hi;
    int cells = 1024;                 ///< per axis
    double epsilon = 0.2;
    std::optional<double> offset_c;   ///< defaults to 0.1 * (sup g - inf g + 1)
    double grad_tol = 1e-6;
};

/// Builds the same-labels/arbitrary-gradients construction, verifies it, and
/// writes classifier.csv, gradient_target.csv, constructed.csv and verification.json. Nonzero on failure.
int cmd_counterexample(const CounterexampleSpec& spec, const std::filesystem::path& out_dir);

struct BoundsOptions {
    /// When set, checks run on resampled subsets of this pre-trained pool
    /// instead of freshly drawn ensembles.
    std::optional<std::filesystem::path> pool_file;
};

/// Runs the mode-agreement and pairwise-consistency bound checks configured
/// in RunConfig::bounds; writes bounds.json. Nonzero if any check fails.
int cmd_check_bounds(const RunConfig& config, const BoundsOptions& options,
                     const std::filesystem::path& out_dir, bool verbose = false);

}  // namespace cvote::cli
