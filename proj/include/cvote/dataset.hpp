#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cvote::pipeline {

/// A fully numeric tabular dataset: categorical columns have already been
/// one-hot encoded and the label column mapped to contiguous class indices.
struct Dataset {
    Eigen::MatrixXd features;  ///< rows = examples, cols = features
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    int num_classes = 0;
    /// Raw value of the group-by column per row; empty when no grouping was
    /// requested at load time.
    std::vector<std::string> groups;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }
    void validate() const;
};

struct ColumnSpec {
    enum class Type { Numeric, Categorical, Label };
    std::string name;
    Type type = Type::Numeric;
    /// Optional closed category list; values outside it are ingestion errors.
    /// When empty, categories are inferred from the file (sorted, unique).
    std::vector<std::string> categories;
};

struct DatasetSchema {
    std::vector<ColumnSpec> columns;
    /// Categorical column whose raw values are carried into Dataset::groups.
    std::optional<std::string> group_by;
};

/// Reads a CSV (RFC-4180, UTF-8, header row required) against a schema that
/// names every column. Row order is preserved.
Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);

enum class Preprocessing { Standardize, MinMax, None };

/// Column-wise preprocessing fitted on the rows where fit_on is true and
/// applied to every row. Standardize maps fitted mean/sample-variance to
/// (0, 1); MinMax maps the fitted range onto [0, 1]. Zero-variance (or
/// zero-range) columns map to 0.
Dataset preprocess(const Dataset& dataset, Preprocessing kind, const std::vector<bool>& fit_on);
Dataset preprocess(const Dataset& dataset, Preprocessing kind);

/// Rows split by index list; complement goes to the first result.
std::pair<Dataset, Dataset> split_rows(const Dataset& dataset,
                                       const std::vector<std::size_t>& second_indices);

/// Deterministic seeded split: floor(fraction * rows) rows go to the second
/// result, chosen by a seeded permutation.
std::pair<Dataset, Dataset> split_fraction(const Dataset& dataset, double fraction,
                                           std::uint64_t seed);

struct TrainTest {
    Dataset train;
    Dataset test;
};

inline constexpr std::uint64_t kDeskBenchmarkSeed = 0xd35cbe11ull;

/// The built-in desk benchmark: two overlapping 2-D Gaussian classes
/// (centers at x = -1 and x = +1, isotropic spread), fixed seed,
/// 500 train / 200 test by default. Features are not preprocessed.
TrainTest make_overlapping_gaussians(std::size_t train_size = 500, std::size_t test_size = 200,
                                     std::uint64_t seed = kDeskBenchmarkSeed, double spread = 1.2);

/// Two clearly separated Gaussian blobs; used by trainability checks.
TrainTest make_separable_blobs(std::size_t train_size = 200, std::size_t test_size = 50,
                               std::uint64_t seed = 0xb10b5ull);

}  // namespace cvote::pipeline
