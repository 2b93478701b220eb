#include "cvote/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <map>

#include "cvote/attribution.hpp"
#include "cvote/counterexample.hpp"
#include "cvote/ensemble.hpp"
#include "cvote/errors.hpp"
#include "cvote/expr.hpp"
#include "cvote/parallel.hpp"
#include "cvote/pool_io.hpp"
#include "cvote/rng.hpp"
#include "cvote/textio.hpp"
#include "cvote/theory.hpp"

namespace cvote::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void note(bool verbose, const std::string& msg) {
    if (verbose) std::cerr << "[cvote] " << msg << "\n";
}

std::string state_kind_name(pipeline::StateKind kind) {
    return kind == pipeline::StateKind::RandomSeed ? "random_seed" : "leave_one_out";
}

/// Short rendering for filenames and labels: "0.05", not "0.050000...".
std::string fmt_short(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

struct Accumulator {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    void add(double v) { sum += v; sum_sq += v * v; ++count; }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double stddev() const {
        if (count < 2) return 0.0;
        const double m = mean();
        const double var =
            (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
        return var > 0.0 ? std::sqrt(var) : 0.0;
    }
};

/// Member indices for resample r of size n: a seeded draw without
/// replacement from the pool.
std::vector<std::size_t> resample_members(const RunConfig& config, int n, int r) {
    SplitMix64 rng(mix64_pair(config.resample_seed,
                              mix64_pair(static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(r))));
    return rng.sample_without_replacement(config.pool_size, static_cast<std::size_t>(n));
}

}  // namespace

int cmd_train_pool(const RunConfig& config, const fs::path& out_dir, bool verbose) {
    config.validate();
    fs::create_directories(out_dir);
    const auto data = prepare_data(config);
    const auto dist = make_distribution(config, data.train.rows());

    std::vector<pipeline::RandomState> states(config.pool_size);
    for (std::size_t i = 0; i < config.pool_size; ++i) {
        states[i] = pipeline::sample_state(dist, i);
    }
    note(verbose, "training pool of " + std::to_string(config.pool_size) + " models");
    auto pool = ensemble::create_ensemble(config.pipeline, data.train, states);
    pool.config_fingerprint = config.pool_fingerprint();
    const fs::path pool_path = out_dir / "pool.json";
    pipeline::save_pool(pool, pool_path);
    note(verbose, "wrote " + pool_path.string());
    return 0;
}

namespace {

/// Everything cmd_evaluate needs about one (n, alpha) cell.
struct EvalCell {
    int n = 0;
    double alpha = 0.0;
    Accumulator selective_acc, abstention, plain_acc;
    double pflip_selective_absneq = 0.0;
    double pflip_selective_strictneq = 0.0;
    double pflip_plain = 0.0;
};

double fraction_points_flipping(const std::vector<std::vector<int>>& outcomes, bool strict,
                                std::size_t npoints) {
    std::size_t flipping = 0;
    const std::size_t npred = outcomes.size();
    for (std::size_t p = 0; p < npoints; ++p) {
        bool flips = false;
        for (std::size_t i = 0; i < npred && !flips; ++i) {
            for (std::size_t j = i + 1; j < npred && !flips; ++j) {
                const int a = outcomes[i][p];
                const int b = outcomes[j][p];
                flips = strict ? (a != b) : (a >= 0 && b >= 0 && a != b);
            }
        }
        if (flips) ++flipping;
    }
    return static_cast<double>(flipping) / static_cast<double>(npoints);
}

}  // namespace

int cmd_evaluate(const RunConfig& config, const fs::path& pool_file, const fs::path& out_dir,
                 bool verbose) {
    config.validate();
    fs::create_directories(out_dir);
    const auto data = prepare_data(config);
    const auto pool = pipeline::load_pool(pool_file, config.pool_fingerprint());
    if (pool.size() < config.pool_size) {
        throw ConfigError("pool file holds " + std::to_string(pool.size()) +
                          " models, config expects " + std::to_string(config.pool_size));
    }
    const auto npoints = static_cast<std::size_t>(data.test.rows());
    const int num_classes = data.test.num_classes;

    // Constituent votes, computed once: votes[model][point].
    std::vector<std::vector<int>> votes(pool.size());
    parallel_for(pool.size(), [&](std::size_t m) {
        votes[m] = pipeline::predict_labels(pool.models[m], data.test.features);
    });
    note(verbose, "tallied " + std::to_string(pool.size()) + " models on " +
                      std::to_string(npoints) + " test points");

    const bool grouped = config.group_by.has_value();
    if (grouped && data.test.groups.empty()) {
        throw ConfigError("group_by configured but the dataset carries no group column");
    }

    std::vector<EvalCell> cells;
    json jrows = json::array();
    json jgroups = json::array();

    for (int n : config.ensemble_sizes) {
        // Tallies per resample per point, shared across alphas.
        std::vector<std::vector<stats::VoteTally>> tallies(
            static_cast<std::size_t>(config.num_resamples));
        std::vector<std::vector<int>> plain(static_cast<std::size_t>(config.num_resamples));
        for (int r = 0; r < config.num_resamples; ++r) {
            const auto members = resample_members(config, n, r);
            auto& row_t = tallies[static_cast<std::size_t>(r)];
            auto& row_p = plain[static_cast<std::size_t>(r)];
            row_t.resize(npoints);
            row_p.resize(npoints);
            std::vector<int> point_votes(members.size());
            for (std::size_t p = 0; p < npoints; ++p) {
                for (std::size_t m = 0; m < members.size(); ++m) {
                    point_votes[m] = votes[members[m]][p];
                }
                row_t[p] = stats::tally(point_votes, num_classes);
                row_p[p] = stats::top_two(row_t[p]).class_a;
            }
        }

        const double plain_flip = fraction_points_flipping(plain, true, npoints);

        for (double alpha : config.alphas) {
            EvalCell cell;
            cell.n = n;
            cell.alpha = alpha;
            cell.pflip_plain = plain_flip;

            // outcomes[r][p] = label or -1 for abstain
            std::vector<std::vector<int>> outcomes(static_cast<std::size_t>(config.num_resamples),
                                                   std::vector<int>(npoints, -1));
            std::vector<std::vector<double>> pvals(static_cast<std::size_t>(config.num_resamples),
                                                   std::vector<double>(npoints, 1.0));
            for (int r = 0; r < config.num_resamples; ++r) {
                std::size_t correct = 0, abstained = 0, plain_correct = 0;
                for (std::size_t p = 0; p < npoints; ++p) {
                    const auto d =
                        ensemble::decide(tallies[static_cast<std::size_t>(r)][p], alpha);
                    pvals[static_cast<std::size_t>(r)][p] = d.p_value.value;
                    if (d.predicted()) {
                        outcomes[static_cast<std::size_t>(r)][p] = d.label;
                        if (d.label == data.test.labels[p]) ++correct;
                    } else {
                        ++abstained;
                    }
                    if (plain[static_cast<std::size_t>(r)][p] == data.test.labels[p]) {
                        ++plain_correct;
                    }
                }
                cell.selective_acc.add(static_cast<double>(correct) / npoints);
                cell.abstention.add(static_cast<double>(abstained) / npoints);
                cell.plain_acc.add(static_cast<double>(plain_correct) / npoints);
            }
            cell.pflip_selective_absneq = fraction_points_flipping(outcomes, false, npoints);
            cell.pflip_selective_strictneq = fraction_points_flipping(outcomes, true, npoints);
            cells.push_back(cell);

            // Per-point decision dump.
            {
                CsvWriter dump(out_dir / ("decisions_n" + std::to_string(n) + "_alpha" +
                                          fmt_short(alpha) + ".csv"));
                CsvRow header = {"index", "true_label"};
                for (int r = 0; r < config.num_resamples; ++r) {
                    header.push_back("decision_r" + std::to_string(r));
                    header.push_back("p_value_r" + std::to_string(r));
                }
                header.push_back("p_flip_absneq");
                header.push_back("p_flip_strictneq");
                dump.write_row(header);
                const double num_pairs =
                    config.num_resamples * (config.num_resamples - 1) / 2.0;
                for (std::size_t p = 0; p < npoints; ++p) {
                    CsvRow row = {std::to_string(p), std::to_string(data.test.labels[p])};
                    int abs_pairs = 0, strict_pairs = 0;
                    for (int r = 0; r < config.num_resamples; ++r) {
                        const int o = outcomes[static_cast<std::size_t>(r)][p];
                        row.push_back(o < 0 ? "ABSTAIN" : std::to_string(o));
                        row.push_back(fmt_double(pvals[static_cast<std::size_t>(r)][p]));
                    }
                    for (int i = 0; i < config.num_resamples; ++i) {
                        for (int j = i + 1; j < config.num_resamples; ++j) {
                            const int a = outcomes[static_cast<std::size_t>(i)][p];
                            const int b = outcomes[static_cast<std::size_t>(j)][p];
                            if (a >= 0 && b >= 0 && a != b) ++abs_pairs;
                            if (a != b) ++strict_pairs;
                        }
                    }
                    row.push_back(fmt_double(abs_pairs / num_pairs));
                    row.push_back(fmt_double(strict_pairs / num_pairs));
                    dump.write_row(row);
                }
            }

            // Group-by breakdown.
            if (grouped) {
                std::map<std::string, std::vector<std::size_t>> members_of;
                for (std::size_t p = 0; p < npoints; ++p) {
                    members_of[data.test.groups[p]].push_back(p);
                }
                const double overall_abst = cell.abstention.mean();
                for (const auto& [group, idx] : members_of) {
                    Accumulator g_acc, g_abst;
                    for (int r = 0; r < config.num_resamples; ++r) {
                        std::size_t correct = 0, abst = 0;
                        for (std::size_t p : idx) {
                            const int o = outcomes[static_cast<std::size_t>(r)][p];
                            if (o < 0) ++abst;
                            else if (o == data.test.labels[p]) ++correct;
                        }
                        g_acc.add(static_cast<double>(correct) / idx.size());
                        g_abst.add(static_cast<double>(abst) / idx.size());
                    }
                    json jg;
                    jg["n"] = n;
                    jg["alpha"] = alpha;
                    jg["group"] = group;
                    jg["count"] = idx.size();
                    jg["selective_accuracy_mean"] = g_acc.mean();
                    jg["abstention_rate_mean"] = g_abst.mean();
                    jg["overall_abstention_mean"] = overall_abst;
                    jg["flagged"] =
                        g_abst.mean() > overall_abst + config.group_abstention_margin;
                    jgroups.push_back(jg);
                }
            }
        }
    }

    // evaluation.csv
    {
        CsvWriter out(out_dir / "evaluation.csv");
        out.write_row({"state_kind", "n", "alpha", "num_resamples", "selective_accuracy_mean",
                       "selective_accuracy_std", "abstention_rate_mean", "abstention_rate_std",
                       "plain_accuracy_mean", "plain_accuracy_std",
                       "pflip_selective_absneq_fraction", "pflip_selective_strictneq_fraction",
                       "pflip_plain_fraction"});
        for (const auto& c : cells) {
            out.write_row({state_kind_name(config.state_kind), std::to_string(c.n),
                           fmt_short(c.alpha), std::to_string(config.num_resamples),
                           fmt_double(c.selective_acc.mean()), fmt_double(c.selective_acc.stddev()),
                           fmt_double(c.abstention.mean()), fmt_double(c.abstention.stddev()),
                           fmt_double(c.plain_acc.mean()), fmt_double(c.plain_acc.stddev()),
                           fmt_double(c.pflip_selective_absneq),
                           fmt_double(c.pflip_selective_strictneq), fmt_double(c.pflip_plain)});
        }
    }

    for (const auto& c : cells) {
        json jr;
        jr["n"] = c.n;
        jr["alpha"] = c.alpha;
        jr["selective_accuracy_mean"] = c.selective_acc.mean();
        jr["selective_accuracy_std"] = c.selective_acc.stddev();
        jr["abstention_rate_mean"] = c.abstention.mean();
        jr["abstention_rate_std"] = c.abstention.stddev();
        jr["plain_accuracy_mean"] = c.plain_acc.mean();
        jr["plain_accuracy_std"] = c.plain_acc.stddev();
        jr["pflip_selective_absneq_fraction"] = c.pflip_selective_absneq;
        jr["pflip_selective_strictneq_fraction"] = c.pflip_selective_strictneq;
        jr["pflip_plain_fraction"] = c.pflip_plain;
        jrows.push_back(jr);
    }
    json summary;
    summary["format_version"] = kReportFormatVersion;
    summary["state_kind"] = state_kind_name(config.state_kind);
    summary["config_fingerprint"] = config.pool_fingerprint();
    summary["pool_size"] = config.pool_size;
    summary["num_resamples"] = config.num_resamples;
    summary["test_size"] = npoints;
    summary["rows"] = jrows;
    if (grouped) summary["groups"] = jgroups;
    write_text_file(out_dir / "evaluation.json", summary.dump(1) + "\n");

    if (grouped) {
        CsvWriter out(out_dir / "groups.csv");
        out.write_row({"state_kind", "n", "alpha", "group", "count", "selective_accuracy_mean",
                       "abstention_rate_mean", "overall_abstention_mean", "flagged"});
        for (const auto& jg : jgroups) {
            out.write_row({state_kind_name(config.state_kind),
                           std::to_string(jg["n"].get<int>()), fmt_short(jg["alpha"].get<double>()),
                           jg["group"].get<std::string>(),
                           std::to_string(jg["count"].get<std::size_t>()),
                           fmt_double(jg["selective_accuracy_mean"].get<double>()),
                           fmt_double(jg["abstention_rate_mean"].get<double>()),
                           fmt_double(jg["overall_abstention_mean"].get<double>()),
                           jg["flagged"].get<bool>() ? "1" : "0"});
        }
    }
    note(verbose, "wrote evaluation reports to " + out_dir.string());
    return 0;
}

int cmd_curves(const std::vector<int>& sizes, const std::vector<double>& alphas, int resolution,
               const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto points = theory::emit_abstention_curves(sizes, alphas, resolution);
    {
        CsvWriter out(out_dir / "abstention_curves.csv");
        out.write_row({"p", "n", "alpha", "abstention", "consistency_bound"});
        for (const auto& pt : points) {
            out.write_row({fmt_double(pt.agreement_prob), std::to_string(pt.n),
                           fmt_short(pt.alpha), fmt_double(pt.abstention_prob),
                           fmt_double(pt.consistency_lower_bound)});
        }
    }
    json meta;
    meta["format_version"] = kReportFormatVersion;
    meta["model"] =
        "two-class agreement: each constituent votes the mode class independently with "
        "probability p, otherwise the runner-up";
    meta["beta_source"] = "analytic abstention probability (not an empirical rate)";
    meta["grid"] = {{"p_min", 0.5}, {"p_max", 1.0}, {"resolution", resolution}};
    meta["sizes"] = sizes;
    meta["alphas"] = alphas;
    write_text_file(out_dir / "abstention_curves.json", meta.dump(1) + "\n");
    return 0;
}

int cmd_attribution_stability(const RunConfig& config, const fs::path& pool_file,
                              const fs::path& out_dir, bool verbose) {
    config.validate();
    fs::create_directories(out_dir);
    const auto data = prepare_data(config);
    const auto pool = pipeline::load_pool(pool_file, config.pool_fingerprint());

    std::map<int, std::vector<pipeline::ModelPool>> pools_by_size;
    for (int n : config.ensemble_sizes) {
        auto& list = pools_by_size[n];
        for (int r = 0; r < config.num_resamples; ++r) {
            const auto members = resample_members(config, n, r);
            pipeline::ModelPool sub;
            sub.config_fingerprint = pool.config_fingerprint;
            for (std::size_t m : members) {
                sub.models.push_back(pool.models[m]);
                sub.states.push_back(pool.states[m]);
            }
            list.push_back(std::move(sub));
        }
    }
    note(verbose, "computing attribution stability over " +
                      std::to_string(config.ensemble_sizes.size()) + " ensemble sizes");
    const auto rows = attribution::attribution_stability_report(
        pools_by_size, data.test, config.metrics_k,
        mix64_pair(config.resample_seed, 0xba5e11ull), config.image_shape);

    // Per-point attribution dump, one file per ensemble size, for external bar plots.
    for (const auto& [n, pools] : pools_by_size) {
        CsvWriter dump(out_dir / ("attributions_n" + std::to_string(n) + ".csv"));
        CsvRow header = {"point", "pool", "target_class"};
        for (const auto& name : data.test.feature_names) header.push_back(name);
        dump.write_row(header);
        for (Eigen::Index p = 0; p < data.test.rows(); ++p) {
            const Eigen::VectorXd x = data.test.features.row(p).transpose();
            for (std::size_t q = 0; q < pools.size(); ++q) {
                const auto attr = attribution::ensemble_saliency(pools[q], x, config.image_shape);
                CsvRow row = {std::to_string(p), std::to_string(q),
                              std::to_string(attr.target_class)};
                for (Eigen::Index f = 0; f < attr.scores.size(); ++f) {
                    row.push_back(fmt_double(attr.scores(f)));
                }
                dump.write_row(row);
            }
        }
    }

    {
        CsvWriter out(out_dir / "attribution_stability.csv");
        out.write_row({"n", "metric", "mean", "std", "baseline_mean", "undefined_pairs"});
        for (const auto& row : rows) {
            out.write_row({std::to_string(row.n), row.metric, fmt_double(row.mean),
                           fmt_double(row.stddev), fmt_double(row.baseline_mean),
                           std::to_string(row.undefined_pairs)});
        }
    }
    json doc;
    doc["format_version"] = kReportFormatVersion;
    doc["k"] = config.metrics_k;
    json jrows = json::array();
    for (const auto& row : rows) {
        json jr;
        jr["n"] = row.n;
        jr["metric"] = row.metric;
        jr["mean"] = row.mean;
        jr["std"] = row.stddev;
        jr["baseline_mean"] = row.baseline_mean;
        jr["undefined_pairs"] = row.undefined_pairs;
        jrows.push_back(jr);
    }
    doc["rows"] = jrows;
    write_text_file(out_dir / "attribution_stability.json", doc.dump(1) + "\n");
    note(verbose, "wrote attribution reports to " + out_dir.string());
    return 0;
}

int cmd_counterexample(const CounterexampleSpec& spec, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto sign_fn = expr::Expression::parse(spec.classifier_expr);
    const auto target_fn = expr::Expression::parse(spec.gradient_expr);

    std::vector<counterexample::GridFunction::Axis> axes;
    axes.push_back({spec.x_lo, spec.x_hi, spec.cells});
    if (spec.y_lo && spec.y_hi) axes.push_back({*spec.y_lo, *spec.y_hi, spec.cells});

    const auto classifier = counterexample::sample_grid(
        axes, [&](double x, double y) { return sign_fn(x, y) >= 0.0 ? 1.0 : -1.0; });
    const auto target = counterexample::sample_grid(
        axes, [&](double x, double y) { return target_fn(x, y); });
    const double c = spec.offset_c.value_or(counterexample::default_offset_constant(target));
    const auto constructed =
        counterexample::construct_matched_classifier(classifier, target, spec.epsilon, c);
    const auto report =
        counterexample::verify_construction(classifier, constructed, target, spec.epsilon,
                                            spec.grad_tol);

    counterexample::export_grid_csv(classifier, out_dir / "classifier.csv");
    counterexample::export_grid_csv(target, out_dir / "gradient_target.csv");
    counterexample::export_grid_csv(constructed, out_dir / "constructed.csv");

    json doc;
    doc["format_version"] = kReportFormatVersion;
    doc["classifier_expr"] = spec.classifier_expr;
    doc["gradient_expr"] = spec.gradient_expr;
    doc["epsilon"] = spec.epsilon;
    doc["offset_c"] = c;
    doc["grad_tol"] = spec.grad_tol;
    doc["sign_nodes_checked"] = report.sign_nodes_checked;
    doc["sign_mismatches"] = report.sign_mismatches;
    doc["zero_nodes"] = report.zero_nodes;
    doc["grad_nodes_checked"] = report.grad_nodes_checked;
    doc["grad_failures"] = report.grad_failures;
    doc["max_grad_error"] = report.max_grad_error;
    doc["passed"] = report.passed();
    write_text_file(out_dir / "verification.json", doc.dump(1) + "\n");
    return report.passed() ? 0 : 1;
}

namespace {

json report_to_json(const theory::BoundCheckReport& report, const std::string& mode) {
    json j;
    j["check"] = report.check_name;
    j["mode"] = mode;
    j["empirical_rate"] = report.empirical_rate;
    j["mean_rate"] = report.mean_rate;
    j["bound"] = report.bound;
    j["slack"] = report.slack;
    j["trials"] = report.trials;
    j["beta_hat"] = report.beta_hat;
    j["passed"] = report.passed;
    return j;
}

/// Pool-backed variant of the mode-agreement check: the mode oracle is the
/// plurality of the full pool, trials are resampled subsets.
theory::BoundCheckReport pool_agreement_check(const RunConfig& config,
                                            const pipeline::ModelPool& pool,
                                            const pipeline::Dataset& test) {
    const auto& b = config.bounds;
    const auto npoints = static_cast<std::size_t>(test.rows());
    std::vector<std::vector<int>> votes(pool.size());
    for (std::size_t m = 0; m < pool.size(); ++m) {
        votes[m] = pipeline::predict_labels(pool.models[m], test.features);
    }
    std::vector<int> mode_label(npoints);
    {
        std::vector<int> column(pool.size());
        for (std::size_t p = 0; p < npoints; ++p) {
            for (std::size_t m = 0; m < pool.size(); ++m) column[m] = votes[m][p];
            mode_label[p] = stats::top_two(stats::tally(column, test.num_classes)).class_a;
        }
    }
    std::vector<int> counts(npoints, 0);
    for (int t = 0; t < b.agreement_trials; ++t) {
        const auto members = resample_members(config, b.agreement_n, t);
        std::vector<int> column(members.size());
        for (std::size_t p = 0; p < npoints; ++p) {
            for (std::size_t m = 0; m < members.size(); ++m) column[m] = votes[members[m]][p];
            const auto d = ensemble::decide(stats::tally(column, test.num_classes), b.alpha);
            if (d.predicted() && d.label != mode_label[p]) ++counts[p];
        }
    }
    theory::BoundCheckReport report;
    report.check_name = "mode_agreement";
    report.trials = b.agreement_trials;
    report.bound = b.alpha;
    report.slack = 3.0 * std::sqrt(b.alpha * (1.0 - b.alpha) / b.agreement_trials);
    double max_rate = 0.0, sum = 0.0;
    for (std::size_t p = 0; p < npoints; ++p) {
        const double rate = static_cast<double>(counts[p]) / b.agreement_trials;
        max_rate = std::max(max_rate, rate);
        sum += rate;
    }
    report.empirical_rate = max_rate;
    report.mean_rate = sum / static_cast<double>(npoints);
    report.passed = report.empirical_rate <= report.bound + report.slack;
    return report;
}

/// Pool-backed variant of the pairwise-consistency check.
theory::BoundCheckReport pool_consistency_check(const RunConfig& config,
                                              const pipeline::ModelPool& pool,
                                              const pipeline::Dataset& test) {
    const auto& b = config.bounds;
    const auto npoints = static_cast<std::size_t>(test.rows());
    std::vector<std::vector<int>> votes(pool.size());
    for (std::size_t m = 0; m < pool.size(); ++m) {
        votes[m] = pipeline::predict_labels(pool.models[m], test.features);
    }
    auto decide_subset = [&](const std::vector<std::size_t>& members, std::size_t p) {
        std::vector<int> column(members.size());
        for (std::size_t m = 0; m < members.size(); ++m) column[m] = votes[members[m]][p];
        return ensemble::decide(stats::tally(column, test.num_classes), b.alpha);
    };
    long long disagreements = 0, abstentions = 0;
    for (int t = 0; t < b.consistency_trials; ++t) {
        const auto members_a = resample_members(config, b.consistency_n, 2 * t);
        const auto members_b = resample_members(config, b.consistency_n, 2 * t + 1);
        for (std::size_t p = 0; p < npoints; ++p) {
            const auto da = decide_subset(members_a, p);
            const auto db = decide_subset(members_b, p);
            if (ensemble::strict_neq(da, db)) ++disagreements;
            abstentions += (da.abstained ? 1 : 0) + (db.abstained ? 1 : 0);
        }
    }
    theory::BoundCheckReport report;
    report.check_name = "pairwise_consistency";
    report.trials = b.consistency_trials;
    report.empirical_rate =
        static_cast<double>(disagreements) / (static_cast<double>(b.consistency_trials) * npoints);
    report.mean_rate = report.empirical_rate;
    report.beta_hat = static_cast<double>(abstentions) /
                      (2.0 * static_cast<double>(b.consistency_trials) * npoints);
    report.bound = 2.0 * (b.alpha + report.beta_hat);
    const double q = std::clamp(report.bound, 0.0, 1.0);
    report.slack = 3.0 * std::sqrt(q * (1.0 - q) / b.consistency_trials);
    report.passed = report.empirical_rate <= report.bound + report.slack;
    return report;
}

}  // namespace

int cmd_check_bounds(const RunConfig& config, const BoundsOptions& options,
                     const fs::path& out_dir, bool verbose) {
    config.validate();
    fs::create_directories(out_dir);
    const auto data = prepare_data(config);

    theory::BoundCheckReport thm, cor;
    std::string mode;
    if (options.pool_file) {
        mode = "pool";
        const auto pool = pipeline::load_pool(*options.pool_file, config.pool_fingerprint());
        note(verbose, "checking bounds against resampled subsets of " + options.pool_file->string());
        thm = pool_agreement_check(config, pool, data.test);
        cor = pool_consistency_check(config, pool, data.test);
    } else {
        mode = "fresh";
        const auto dist = make_distribution(config, data.train.rows());
        note(verbose, "checking the mode-agreement bound with fresh ensembles");
        thm = theory::check_mode_agreement_bound(config.pipeline, data.train, dist, config.bounds.agreement_n,
                                        config.bounds.alpha, data.test,
                                        config.bounds.agreement_trials,
                                        config.bounds.oracle_samples);
        note(verbose, "checking the pairwise-consistency bound with fresh ensemble pairs");
        cor = theory::check_pairwise_consistency_bound(config.pipeline, data.train, dist,
                                          config.bounds.consistency_n, config.bounds.alpha,
                                          data.test, config.bounds.consistency_trials);
    }

    json doc;
    doc["format_version"] = kReportFormatVersion;
    doc["alpha"] = config.bounds.alpha;
    doc["checks"] = json::array({report_to_json(thm, mode), report_to_json(cor, mode)});
    doc["passed"] = thm.passed && cor.passed;
    write_text_file(out_dir / "bounds.json", doc.dump(1) + "\n");
    note(verbose, std::string("bound checks ") + (thm.passed && cor.passed ? "passed" : "FAILED"));
    return thm.passed && cor.passed ? 0 : 1;
}

}  // namespace cvote::cli
