#include "cvote/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <stdexcept>

#include "cvote/errors.hpp"
#include "cvote/rng.hpp"
#include "cvote/textio.hpp"

namespace cvote::pipeline {

void Dataset::validate() const {
    if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
        throw std::invalid_argument("dataset: feature rows != label count");
    }
    if (num_classes < 2) throw std::invalid_argument("dataset: num_classes must be >= 2");
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("dataset: label " + std::to_string(y) + " out of range");
        }
    }
    if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature value");
    if (!groups.empty() && groups.size() != labels.size()) {
        throw std::invalid_argument("dataset: group column length mismatch");
    }
}

namespace {

bool parse_double(const std::string& token, double& out) {
    if (token.empty()) return false;
    char* end = nullptr;
    out = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) return false;
    return std::isfinite(out);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
    if (!std::filesystem::exists(path)) {
        throw IngestionError("dataset file not found: " + path.string());
    }
    const auto rows = read_csv(path);
    if (rows.empty()) throw IngestionError("no data rows in " + path.string() + " (missing header)");
    const CsvRow& header = rows.front();
    if (rows.size() < 2) throw IngestionError("no data rows in " + path.string());

    // Column lookup: every header column must be declared in the schema.
    std::vector<const ColumnSpec*> specs(header.size(), nullptr);
    int label_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        for (const auto& spec : schema.columns) {
            if (spec.name == header[c]) {
                specs[c] = &spec;
                break;
            }
        }
        if (!specs[c]) {
            throw IngestionError("column '" + header[c] + "' not declared in schema");
        }
        if (specs[c]->type == ColumnSpec::Type::Label) {
            if (label_col >= 0) throw IngestionError("multiple label columns declared");
            label_col = static_cast<int>(c);
        }
    }
    if (label_col < 0) throw IngestionError("schema declares no label column");

    const std::size_t ncols = header.size();
    const std::size_t nrows = rows.size() - 1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != ncols) {
            throw IngestionError("malformed row " + std::to_string(r) + ": has " +
                                 std::to_string(rows[r].size()) + " fields, expected " +
                                 std::to_string(ncols));
        }
    }

    // Pass 1: category inventories (per categorical column) and label values.
    std::vector<std::vector<std::string>> cats(ncols);
    std::vector<std::string> label_values;
    for (std::size_t c = 0; c < ncols; ++c) {
        if (specs[c]->type == ColumnSpec::Type::Categorical) {
            if (!specs[c]->categories.empty()) {
                cats[c] = specs[c]->categories;
            } else {
                std::set<std::string> seen;
                for (std::size_t r = 1; r < rows.size(); ++r) seen.insert(rows[r][c]);
                cats[c].assign(seen.begin(), seen.end());
            }
        }
    }
    {
        std::set<std::string> seen;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            seen.insert(rows[r][static_cast<std::size_t>(label_col)]);
        }
        label_values.assign(seen.begin(), seen.end());
        if (label_values.size() < 2) {
            throw IngestionError("label column has fewer than 2 distinct values");
        }
    }

    // Feature layout: original column order, categoricals expanded in place.
    Dataset ds;
    for (std::size_t c = 0; c < ncols; ++c) {
        switch (specs[c]->type) {
            case ColumnSpec::Type::Numeric:
                ds.feature_names.push_back(header[c]);
                break;
            case ColumnSpec::Type::Categorical:
                for (const auto& cat : cats[c]) ds.feature_names.push_back(header[c] + "=" + cat);
                break;
            case ColumnSpec::Type::Label:
                break;
        }
    }

    ds.features.setZero(static_cast<Eigen::Index>(nrows),
                        static_cast<Eigen::Index>(ds.feature_names.size()));
    ds.labels.resize(nrows);
    ds.num_classes = static_cast<int>(label_values.size());
    const bool want_groups = schema.group_by.has_value();
    if (want_groups) ds.groups.resize(nrows);

    for (std::size_t r = 1; r < rows.size(); ++r) {
        Eigen::Index out_col = 0;
        const std::size_t row_idx = r - 1;
        for (std::size_t c = 0; c < ncols; ++c) {
            const std::string& token = rows[r][c];
            switch (specs[c]->type) {
                case ColumnSpec::Type::Numeric: {
                    double v;
                    if (!parse_double(token, v)) {
                        throw IngestionError("row " + std::to_string(r) + ", column '" +
                                             header[c] + "': non-numeric token '" + token + "'");
                    }
                    ds.features(static_cast<Eigen::Index>(row_idx), out_col++) = v;
                    break;
                }
                case ColumnSpec::Type::Categorical: {
                    auto it = std::find(cats[c].begin(), cats[c].end(), token);
                    if (it == cats[c].end()) {
                        throw IngestionError("row " + std::to_string(r) + ", column '" +
                                             header[c] + "': unknown category '" + token + "'");
                    }
                    ds.features(static_cast<Eigen::Index>(row_idx),
                                out_col + (it - cats[c].begin())) = 1.0;
                    out_col += static_cast<Eigen::Index>(cats[c].size());
                    break;
                }
                case ColumnSpec::Type::Label: {
                    auto it = std::find(label_values.begin(), label_values.end(), token);
                    ds.labels[row_idx] = static_cast<int>(it - label_values.begin());
                    break;
                }
            }
            if (want_groups && header[c] == *schema.group_by) {
                ds.groups[row_idx] = token;
            }
        }
    }
    ds.validate();
    return ds;
}

Dataset preprocess(const Dataset& dataset, Preprocessing kind, const std::vector<bool>& fit_on) {
    if (fit_on.size() != static_cast<std::size_t>(dataset.rows())) {
        throw std::invalid_argument("preprocess: fit_on mask length != dataset rows");
    }
    std::vector<Eigen::Index> fit_rows;
    for (std::size_t i = 0; i < fit_on.size(); ++i) {
        if (fit_on[i]) fit_rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (fit_rows.empty()) throw std::invalid_argument("preprocess: fit_on selects no rows");

    Dataset out = dataset;
    if (kind == Preprocessing::None) return out;

    const Eigen::Index d = dataset.cols();
    const auto nfit = static_cast<double>(fit_rows.size());
    for (Eigen::Index c = 0; c < d; ++c) {
        double offset = 0.0, scale = 1.0;
        if (kind == Preprocessing::Standardize) {
            double mean = 0.0;
            for (Eigen::Index r : fit_rows) mean += dataset.features(r, c);
            mean /= nfit;
            double ss = 0.0;
            for (Eigen::Index r : fit_rows) {
                const double dlt = dataset.features(r, c) - mean;
                ss += dlt * dlt;
            }
            const double var = fit_rows.size() > 1 ? ss / (nfit - 1.0) : 0.0;
            offset = mean;
            scale = var > 0.0 ? std::sqrt(var) : 0.0;
        } else {  // MinMax
            double lo = dataset.features(fit_rows.front(), c), hi = lo;
            for (Eigen::Index r : fit_rows) {
                lo = std::min(lo, dataset.features(r, c));
                hi = std::max(hi, dataset.features(r, c));
            }
            offset = lo;
            scale = hi - lo;
        }
        if (scale > 0.0) {
            out.features.col(c) = (dataset.features.col(c).array() - offset) / scale;
        } else {
            out.features.col(c).setZero();  // degenerate column rule
        }
    }
    out.validate();
    return out;
}

Dataset preprocess(const Dataset& dataset, Preprocessing kind) {
    return preprocess(dataset, kind,
                      std::vector<bool>(static_cast<std::size_t>(dataset.rows()), true));
}

namespace {

Dataset take_rows(const Dataset& dataset, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = dataset.feature_names;
    out.num_classes = dataset.num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.cols());
    out.labels.resize(rows.size());
    if (!dataset.groups.empty()) out.groups.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= static_cast<std::size_t>(dataset.rows())) {
            throw std::invalid_argument("split: row index out of range");
        }
        out.features.row(static_cast<Eigen::Index>(i)) =
            dataset.features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels[i] = dataset.labels[rows[i]];
        if (!dataset.groups.empty()) out.groups[i] = dataset.groups[rows[i]];
    }
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_rows(const Dataset& dataset,
                                       const std::vector<std::size_t>& second_indices) {
    std::vector<bool> in_second(static_cast<std::size_t>(dataset.rows()), false);
    for (std::size_t idx : second_indices) {
        if (idx >= in_second.size()) throw std::invalid_argument("split index out of range");
        in_second[idx] = true;
    }
    std::vector<std::size_t> first;
    for (std::size_t i = 0; i < in_second.size(); ++i) {
        if (!in_second[i]) first.push_back(i);
    }
    return {take_rows(dataset, first), take_rows(dataset, second_indices)};
}

std::pair<Dataset, Dataset> split_fraction(const Dataset& dataset, double fraction,
                                           std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split fraction must lie in [0, 1)");
    }
    const auto n = static_cast<std::size_t>(dataset.rows());
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    SplitMix64 rng(mix64_pair(seed, 0x5911ull));
    auto second = rng.sample_without_replacement(n, k);
    std::sort(second.begin(), second.end());
    return split_rows(dataset, second);
}

namespace {

TrainTest make_gaussian_pair(std::size_t train_size, std::size_t test_size, std::uint64_t seed,
                             double center_x, double spread) {
    const std::size_t total = train_size + test_size;
    Dataset all;
    all.num_classes = 2;
    all.feature_names = {"x0", "x1"};
    all.features.resize(static_cast<Eigen::Index>(total), 2);
    all.labels.resize(total);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < total; ++i) {
        const int label = static_cast<int>(rng.below(2));
        // Box–Muller
        const double u1 = rng.uniform_pos();
        const double u2 = rng.uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double z0 = r * std::cos(2.0 * M_PI * u2);
        const double z1 = r * std::sin(2.0 * M_PI * u2);
        const double cx = label == 0 ? -center_x : center_x;
        all.features(static_cast<Eigen::Index>(i), 0) = cx + spread * z0;
        all.features(static_cast<Eigen::Index>(i), 1) = spread * z1;
        all.labels[i] = label;
    }
    std::vector<std::size_t> test_idx(test_size);
    for (std::size_t i = 0; i < test_size; ++i) test_idx[i] = train_size + i;
    auto [train, test] = split_rows(all, test_idx);
    return {std::move(train), std::move(test)};
}

}  // namespace

TrainTest make_overlapping_gaussians(std::size_t train_size, std::size_t test_size,
                                     std::uint64_t seed, double spread) {
    return make_gaussian_pair(train_size, test_size, seed, 1.0, spread);
}

TrainTest make_separable_blobs(std::size_t train_size, std::size_t test_size,
                               std::uint64_t seed) {
    return make_gaussian_pair(train_size, test_size, seed, 2.0, 0.4);
}

}  // namespace cvote::pipeline
