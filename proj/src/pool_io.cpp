#include "cvote/pool_io.hpp"

#include <fstream>
#include <json.hpp>

#include "cvote/errors.hpp"
#include "cvote/textio.hpp"

namespace cvote::pipeline {

using nlohmann::json;

namespace {

json encode_matrix(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out.push_back(double_to_hex(m(r, c)));
        }
    }
    return out;
}

Eigen::MatrixXd decode_matrix(const json& arr, Eigen::Index rows, Eigen::Index cols) {
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols)) {
        throw PersistenceError("parameter array has wrong length");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = hex_to_double(arr[i++].get<std::string>());
        }
    }
    return m;
}

}  // namespace

void save_pool(const ModelPool& pool, const std::filesystem::path& path) {
    pool.validate();
    json doc;
    doc["format_version"] = kPoolFormatVersion;
    doc["config_fingerprint"] = pool.config_fingerprint;

    json states = json::array();
    for (const auto& s : pool.states) {
        json js;
        js["seed"] = s.seed;
        if (s.loo_index) js["loo_index"] = *s.loo_index;
        else js["loo_index"] = nullptr;
        states.push_back(js);
    }
    doc["states"] = states;

    json models = json::array();
    for (const auto& m : pool.models) {
        json jm;
        jm["activation"] = m.activation == Activation::Relu ? "relu" : "tanh";
        jm["num_classes"] = m.num_classes;
        json layers = json::array();
        for (const auto& layer : m.layers) {
            json jl;
            jl["rows"] = layer.weights.rows();
            jl["cols"] = layer.weights.cols();
            jl["weights"] = encode_matrix(layer.weights);
            jl["bias"] = encode_matrix(layer.bias);
            layers.push_back(jl);
        }
        jm["layers"] = layers;
        models.push_back(jm);
    }
    doc["models"] = models;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw PersistenceError("cannot open for writing: " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw PersistenceError("write failed: " + path.string());
}

ModelPool load_pool(const std::filesystem::path& path,
                    const std::optional<std::string>& expected_fingerprint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open pool file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw PersistenceError("corrupt pool file " + path.string() + ": " + e.what());
    }

    try {
        if (!doc.contains("format_version") || doc["format_version"].get<int>() != kPoolFormatVersion) {
            throw PersistenceError("pool file " + path.string() + ": unsupported format version");
        }
        ModelPool pool;
        pool.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
        if (expected_fingerprint && pool.config_fingerprint != *expected_fingerprint) {
            throw PersistenceError("pool file " + path.string() + ": config fingerprint " +
                                   pool.config_fingerprint + " does not match expected " +
                                   *expected_fingerprint);
        }
        for (const auto& js : doc.at("states")) {
            RandomState s;
            s.seed = js.at("seed").get<std::uint64_t>();
            if (js.contains("loo_index") && !js["loo_index"].is_null()) {
                s.loo_index = js["loo_index"].get<std::size_t>();
            }
            pool.states.push_back(s);
        }
        for (const auto& jm : doc.at("models")) {
            MlpModel m;
            m.activation =
                jm.at("activation").get<std::string>() == "tanh" ? Activation::Tanh : Activation::Relu;
            m.num_classes = jm.at("num_classes").get<int>();
            for (const auto& jl : jm.at("layers")) {
                MlpModel::Layer layer;
                const auto rows = jl.at("rows").get<Eigen::Index>();
                const auto cols = jl.at("cols").get<Eigen::Index>();
                layer.weights = decode_matrix(jl.at("weights"), rows, cols);
                layer.bias = decode_matrix(jl.at("bias"), rows, 1);
                m.layers.push_back(std::move(layer));
            }
            pool.models.push_back(std::move(m));
        }
        pool.validate();
        return pool;
    } catch (const PersistenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw PersistenceError("corrupt pool file " + path.string() + ": " + e.what());
    }
}

}  // namespace cvote::pipeline
