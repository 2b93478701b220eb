#include "cvote/runconfig.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cvote/errors.hpp"
#include "cvote/rng.hpp"
#include "cvote/textio.hpp"

namespace cvote::cli {

using nlohmann::json;

void RunConfig::validate() const {
    pipeline.validate();
    if (pool_size == 0) throw ConfigError("pool_size must be positive");
    if (ensemble_sizes.empty()) throw ConfigError("ensemble_sizes must be non-empty");
    for (int n : ensemble_sizes) {
        if (n < 1) throw ConfigError("ensemble sizes must be >= 1");
        if (static_cast<std::size_t>(n) > pool_size) {
            throw ConfigError("ensemble size " + std::to_string(n) + " exceeds pool_size " +
                              std::to_string(pool_size));
        }
    }
    if (num_resamples < 1) throw ConfigError("num_resamples must be >= 1");
    if (alphas.empty()) throw ConfigError("alphas must be non-empty");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha values must lie in (0,1)");
    }
    if (metrics_k < 1) throw ConfigError("metrics_k must be >= 1");
    if (const auto* csv = std::get_if<CsvSource>(&source)) {
        if (csv->schema.columns.empty()) throw ConfigError("csv source needs a schema");
        if (group_by) {
            bool found = false;
            for (const auto& col : csv->schema.columns) {
                if (col.name == *group_by) {
                    if (col.type != pipeline::ColumnSpec::Type::Categorical) {
                        throw ConfigError("group_by column '" + *group_by +
                                          "' must be categorical");
                    }
                    found = true;
                }
            }
            if (!found) throw ConfigError("group_by column '" + *group_by + "' not in schema");
        }
    } else if (group_by) {
        throw ConfigError("group_by requires a csv dataset with a declared schema");
    }
}

std::string RunConfig::pool_fingerprint() const {
    std::ostringstream os;
    if (const auto* syn = std::get_if<SyntheticSource>(&source)) {
        os << "synthetic:" << syn->name << ':' << syn->train_size << '/' << syn->test_size << ':'
           << syn->seed << ':' << fmt_double(syn->spread);
    } else {
        const auto& csv = std::get<CsvSource>(source);
        os << "csv:" << csv.path.string() << ":frac=" << fmt_double(csv.test_fraction)
           << ":split_seed=" << csv.split_seed << ":explicit=" << csv.test_indices.size();
    }
    os << ";pipeline=" << pipeline.fingerprint();
    os << ";states=" << (state_kind == pipeline::StateKind::RandomSeed ? "rs" : "loo") << ':'
       << base_seed;
    os << ";pool=" << pool_size;
    return fnv1a_hex(os.str());
}

namespace {

pipeline::Activation parse_activation(const std::string& s) {
    if (s == "relu") return pipeline::Activation::Relu;
    if (s == "tanh") return pipeline::Activation::Tanh;
    throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

pipeline::Preprocessing parse_preprocessing(const std::string& s) {
    if (s == "standardize") return pipeline::Preprocessing::Standardize;
    if (s == "minmax") return pipeline::Preprocessing::MinMax;
    if (s == "none") return pipeline::Preprocessing::None;
    throw ConfigError("unknown preprocessing '" + s + "'");
}

pipeline::PipelineConfig parse_pipeline(const json& j) {
    pipeline::PipelineConfig cfg;
    if (j.contains("hidden_layers")) {
        cfg.hidden_layer_sizes = j["hidden_layers"].get<std::vector<int>>();
    }
    if (j.contains("activation")) cfg.activation = parse_activation(j["activation"]);
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("optimizer")) {
        const auto& jo = j["optimizer"];
        const std::string kind = jo.value("kind", "sgd");
        if (kind == "sgd") {
            cfg.optimizer.kind = pipeline::OptimizerConfig::Kind::Sgd;
        } else if (kind == "adam") {
            cfg.optimizer.kind = pipeline::OptimizerConfig::Kind::Adam;
            cfg.optimizer.adam.beta1 = jo.value("beta1", 0.9);
            cfg.optimizer.adam.beta2 = jo.value("beta2", 0.999);
            cfg.optimizer.adam.epsilon = jo.value("epsilon", 1e-8);
        } else {
            throw ConfigError("unknown optimizer kind '" + kind + "'");
        }
    }
    if (j.contains("preprocessing")) cfg.preprocessing = parse_preprocessing(j["preprocessing"]);
    return cfg;
}

pipeline::DatasetSchema parse_schema(const json& j) {
    pipeline::DatasetSchema schema;
    for (const auto& jc : j.at("columns")) {
        pipeline::ColumnSpec col;
        col.name = jc.at("name").get<std::string>();
        const std::string type = jc.at("type").get<std::string>();
        if (type == "numeric") col.type = pipeline::ColumnSpec::Type::Numeric;
        else if (type == "categorical") col.type = pipeline::ColumnSpec::Type::Categorical;
        else if (type == "label") col.type = pipeline::ColumnSpec::Type::Label;
        else throw ConfigError("unknown column type '" + type + "' for column " + col.name);
        if (jc.contains("categories")) {
            col.categories = jc["categories"].get<std::vector<std::string>>();
        }
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed run config " + path.string() + ": " + e.what());
    }

    try {
        RunConfig cfg;
        if (j.contains("dataset")) {
            const auto& jd = j["dataset"];
            if (jd.contains("synthetic")) {
                SyntheticSource syn;
                const auto& js = jd["synthetic"];
                syn.name = js.value("name", syn.name);
                if (syn.name != "overlapping_gaussians" && syn.name != "separable_blobs") {
                    throw ConfigError("unknown synthetic dataset '" + syn.name + "'");
                }
                syn.train_size = js.value("train_size", syn.train_size);
                syn.test_size = js.value("test_size", syn.test_size);
                syn.seed = js.value("seed", syn.seed);
                syn.spread = js.value("spread", syn.spread);
                cfg.source = syn;
            } else if (jd.contains("csv")) {
                CsvSource csv;
                const auto& jc = jd["csv"];
                csv.path = jc.at("path").get<std::string>();
                csv.schema = parse_schema(jc.at("schema"));
                csv.test_fraction = jc.value("test_fraction", csv.test_fraction);
                csv.split_seed = jc.value("split_seed", csv.split_seed);
                if (jc.contains("test_indices")) {
                    csv.test_indices = jc["test_indices"].get<std::vector<std::size_t>>();
                }
                cfg.source = std::move(csv);
            } else {
                throw ConfigError("dataset must declare either 'synthetic' or 'csv'");
            }
        }
        if (j.contains("pipeline")) cfg.pipeline = parse_pipeline(j["pipeline"]);
        if (j.contains("states")) {
            const auto& js = j["states"];
            const std::string kind = js.value("kind", "random_seed");
            if (kind == "random_seed") cfg.state_kind = pipeline::StateKind::RandomSeed;
            else if (kind == "leave_one_out") cfg.state_kind = pipeline::StateKind::LeaveOneOut;
            else throw ConfigError("unknown state kind '" + kind + "'");
            cfg.base_seed = js.value("base_seed", cfg.base_seed);
        }
        cfg.pool_size = j.value("pool_size", cfg.pool_size);
        if (j.contains("ensemble_sizes")) {
            cfg.ensemble_sizes = j["ensemble_sizes"].get<std::vector<int>>();
        }
        cfg.num_resamples = j.value("num_resamples", cfg.num_resamples);
        if (j.contains("alphas")) cfg.alphas = j["alphas"].get<std::vector<double>>();
        cfg.resample_seed = j.value("resample_seed", cfg.resample_seed);
        cfg.metrics_k = j.value("metrics_k", cfg.metrics_k);
        if (j.contains("group_by") && !j["group_by"].is_null()) {
            cfg.group_by = j["group_by"].get<std::string>();
            if (auto* csv = std::get_if<CsvSource>(&cfg.source)) {
                csv->schema.group_by = cfg.group_by;
            }
        }
        cfg.group_abstention_margin = j.value("group_abstention_margin", cfg.group_abstention_margin);
        if (j.contains("image_shape")) {
            const auto shape = j["image_shape"].get<std::vector<int>>();
            if (shape.size() != 2) throw ConfigError("image_shape must be [height, width]");
            cfg.image_shape = {shape[0], shape[1]};
        }
        if (j.contains("bounds")) {
            const auto& jb = j["bounds"];
            cfg.bounds.alpha = jb.value("alpha", cfg.bounds.alpha);
            cfg.bounds.agreement_n = jb.value("agreement_n", cfg.bounds.agreement_n);
            cfg.bounds.agreement_trials = jb.value("agreement_trials", cfg.bounds.agreement_trials);
            cfg.bounds.oracle_samples = jb.value("oracle_samples", cfg.bounds.oracle_samples);
            cfg.bounds.consistency_n = jb.value("consistency_n", cfg.bounds.consistency_n);
            cfg.bounds.consistency_trials = jb.value("consistency_trials", cfg.bounds.consistency_trials);
        }
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("malformed run config " + path.string() + ": " + e.what());
    }
}

RunConfig default_desk_config() {
    RunConfig cfg;
    cfg.validate();
    return cfg;
}

pipeline::TrainTest prepare_data(const RunConfig& config) {
    config.validate();
    using pipeline::Dataset;

    Dataset full;
    std::vector<std::size_t> test_idx;
    if (const auto* syn = std::get_if<SyntheticSource>(&config.source)) {
        pipeline::TrainTest raw =
            syn->name == "separable_blobs"
                ? pipeline::make_separable_blobs(syn->train_size, syn->test_size, syn->seed)
                : pipeline::make_overlapping_gaussians(syn->train_size, syn->test_size, syn->seed,
                                                       syn->spread);
        // Concatenate so preprocessing can be fitted on the training block.
        full = raw.train;
        full.features.conservativeResize(raw.train.rows() + raw.test.rows(), raw.train.cols());
        full.features.bottomRows(raw.test.rows()) = raw.test.features;
        full.labels.insert(full.labels.end(), raw.test.labels.begin(), raw.test.labels.end());
        for (Eigen::Index i = 0; i < raw.test.rows(); ++i) {
            test_idx.push_back(static_cast<std::size_t>(raw.train.rows() + i));
        }
    } else {
        const auto& csv = std::get<CsvSource>(config.source);
        full = pipeline::load_dataset(csv.path, csv.schema);
        if (!csv.test_indices.empty()) {
            std::set<std::size_t> unique(csv.test_indices.begin(), csv.test_indices.end());
            if (unique.size() != csv.test_indices.size()) {
                throw ConfigError("test_indices contains duplicates");
            }
            test_idx = csv.test_indices;
        } else {
            const auto n = static_cast<std::size_t>(full.rows());
            const auto k =
                static_cast<std::size_t>(std::floor(csv.test_fraction * static_cast<double>(n)));
            SplitMix64 rng(mix64_pair(csv.split_seed, 0x5911ull));
            test_idx = rng.sample_without_replacement(n, k);
            std::sort(test_idx.begin(), test_idx.end());
        }
    }

    std::vector<bool> fit_on(static_cast<std::size_t>(full.rows()), true);
    for (std::size_t idx : test_idx) {
        if (idx >= fit_on.size()) throw ConfigError("test index out of range");
        fit_on[idx] = false;
    }
    const Dataset scaled = pipeline::preprocess(full, config.pipeline.preprocessing, fit_on);
    auto [train, test] = pipeline::split_rows(scaled, test_idx);
    if (train.rows() == 0 || test.rows() == 0) {
        throw ConfigError("train/test split left an empty side");
    }
    return {std::move(train), std::move(test)};
}

pipeline::StateDistribution make_distribution(const RunConfig& config, Eigen::Index train_rows) {
    pipeline::StateDistribution dist;
    dist.kind = config.state_kind;
    dist.base_seed = config.base_seed;
    if (config.state_kind == pipeline::StateKind::LeaveOneOut) {
        dist.train_size = static_cast<std::size_t>(train_rows);
    }
    return dist;
}

}  // namespace cvote::cli
