#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "cvote/commands.hpp"
#include "cvote/parallel.hpp"

namespace {

cvote::cli::RunConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return cvote::cli::default_desk_config();
    return cvote::cli::load_run_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"selective ensembles: training, evaluation and verification harnesses"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int threads = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "run configuration file (JSON)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads,
                   "worker threads (0 = CONSISTENT_VOTE_THREADS env or hardware)");
    app.add_flag("--verbose", verbose, "progress output on stderr");

    auto* train = app.add_subcommand("train-pool", "train a model pool and write pool.json");

    auto* evaluate = app.add_subcommand("evaluate", "resampled-ensemble evaluation reports");
    std::string pool_file;
    evaluate->add_option("--pool", pool_file, "pool file (default <out>/pool.json)");

    auto* curves = app.add_subcommand("curves", "analytic abstention/consistency curves");
    std::vector<int> curve_sizes = {1, 5, 10, 15, 20};
    std::vector<double> curve_alphas = {0.05, 0.01};
    int resolution = 101;
    curves->add_option("--sizes", curve_sizes, "ensemble sizes");
    curves->add_option("--alphas", curve_alphas, "significance levels");
    curves->add_option("--resolution", resolution, "grid points on [0.5, 1]");

    auto* attrib = app.add_subcommand("attribution-stability",
                                      "attribution similarity across resampled ensembles");
    std::string attrib_pool;
    attrib->add_option("--pool", attrib_pool, "pool file (default <out>/pool.json)");

    auto* cex = app.add_subcommand("counterexample",
                                   "same-labels / arbitrary-gradients construction");
    cvote::cli::CounterexampleSpec spec;
    double y_lo = 0.0, y_hi = 0.0;
    bool has_y = false;
    cex->add_option("--classifier-expr", spec.classifier_expr, "classifier = sign(this expression)");
    cex->add_option("--gradient-expr", spec.gradient_expr, "target gradient field");
    cex->add_option("--x-lo", spec.x_lo, "domain lower bound (axis 0)");
    cex->add_option("--x-hi", spec.x_hi, "domain upper bound (axis 0)");
    auto* ylo_opt = cex->add_option("--y-lo", y_lo, "domain lower bound (axis 1; makes it 2-D)");
    auto* yhi_opt = cex->add_option("--y-hi", y_hi, "domain upper bound (axis 1)");
    cex->add_option("--cells", spec.cells, "grid cells per axis");
    cex->add_option("--epsilon", spec.epsilon, "blend-zone width");
    double offset_c = 0.0;
    auto* c_opt = cex->add_option("--offset-c", offset_c, "region offset constant");
    cex->add_option("--grad-tol", spec.grad_tol, "gradient verification tolerance");

    auto* bounds = app.add_subcommand("check-bounds", "mode-agreement and consistency bounds");
    std::string bounds_pool;
    bounds->add_option("--pool", bounds_pool,
                       "check resampled subsets of this pool instead of fresh ensembles");

    CLI11_PARSE(app, argc, argv);
    cvote::set_max_threads(threads);

    try {
        if (*train) {
            return cvote::cli::cmd_train_pool(load_or_default(config_path), out_dir, verbose);
        }
        if (*evaluate) {
            const std::string pool = pool_file.empty() ? out_dir + "/pool.json" : pool_file;
            return cvote::cli::cmd_evaluate(load_or_default(config_path), pool, out_dir, verbose);
        }
        if (*curves) {
            return cvote::cli::cmd_curves(curve_sizes, curve_alphas, resolution, out_dir);
        }
        if (*attrib) {
            const std::string pool = attrib_pool.empty() ? out_dir + "/pool.json" : attrib_pool;
            return cvote::cli::cmd_attribution_stability(load_or_default(config_path), pool,
                                                         out_dir, verbose);
        }
        if (*cex) {
            has_y = ylo_opt->count() > 0 && yhi_opt->count() > 0;
            if (has_y) {
                spec.y_lo = y_lo;
                spec.y_hi = y_hi;
            }
            if (c_opt->count() > 0) spec.offset_c = offset_c;
            return cvote::cli::cmd_counterexample(spec, out_dir);
        }
        if (*bounds) {
            cvote::cli::BoundsOptions options;
            if (!bounds_pool.empty()) options.pool_file = bounds_pool;
            return cvote::cli::cmd_check_bounds(load_or_default(config_path), options, out_dir,
                                                verbose);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
