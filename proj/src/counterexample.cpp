#include "cvote/counterexample.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "cvote/errors.hpp"
#include "cvote/textio.hpp"

namespace cvote::counterexample {

void GridFunction::validate() const {
    if (axes.empty() || axes.size() > 2) {
        throw std::invalid_argument("grid must have 1 or 2 axes");
    }
    for (const auto& ax : axes) {
        if (!(ax.hi > ax.lo)) throw std::invalid_argument("grid axis has empty extent");
        if (ax.cells < 8) throw std::invalid_argument("grid resolution must be >= 8 cells/axis");
    }
    const Eigen::Index rows = axes[0].cells + 1;
    const Eigen::Index cols = axes.size() == 2 ? axes[1].cells + 1 : 1;
    if (values.rows() != rows || values.cols() != cols) {
        throw std::invalid_argument("grid value array does not match axis resolution");
    }
    if (!values.allFinite()) throw std::invalid_argument("grid holds a non-finite value");
}

double GridFunction::max_cell_width() const {
    double w = 0.0;
    for (const auto& ax : axes) w = std::max(w, ax.cell_width());
    return w;
}

GridFunction sample_grid(const std::vector<GridFunction::Axis>& axes,
                         const std::function<double(double, double)>& fn) {
    GridFunction grid;
    grid.axes = axes;
    const Eigen::Index rows = axes.at(0).cells + 1;
    const Eigen::Index cols = axes.size() == 2 ? axes[1].cells + 1 : 1;
    grid.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double x = axes[0].node(static_cast<int>(i));
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double y = axes.size() == 2 ? axes[1].node(static_cast<int>(j)) : 0.0;
            grid.values(i, j) = fn(x, y);
        }
    }
    grid.validate();
    return grid;
}

RegionLabeling label_regions(const GridFunction& sign_grid) {
    sign_grid.validate();
    const Eigen::Index rows = sign_grid.values.rows();
    const Eigen::Index cols = sign_grid.values.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = sign_grid.values(i, j);
            if (v != 1.0 && v != -1.0) {
                throw std::invalid_argument("sign grid must hold only -1 and +1");
            }
        }
    }

    RegionLabeling lab;
    lab.label = sign_grid.values.cast<int>();
    lab.region_id.setConstant(rows, cols, -1);

    // Connected components under orthogonal adjacency.
    int next_region = 0;
    std::deque<std::pair<Eigen::Index, Eigen::Index>> queue;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (lab.region_id(i, j) >= 0) continue;
            const int sign = lab.label(i, j);
            lab.region_id(i, j) = next_region;
            queue.push_back({i, j});
            while (!queue.empty()) {
                auto [r, c] = queue.front();
                queue.pop_front();
                const Eigen::Index nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
                for (const auto& rc : nb) {
                    const Eigen::Index nr = rc[0], nc = rc[1];
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    if (lab.region_id(nr, nc) >= 0 || lab.label(nr, nc) != sign) continue;
                    lab.region_id(nr, nc) = next_region;
                    queue.push_back({nr, nc});
                }
            }
            ++next_region;
        }
    }
    lab.num_regions = next_region;

    // Exact distance to the nearest opposite-sign node. The nearest opposite
    // node always touches a node of the other sign (stepping toward the
    // query point from an interior node stays opposite and gets closer), so
    // only frontier nodes need scanning.
    const double wx = sign_grid.axes[0].cell_width();
    const double wy = sign_grid.axes.size() == 2 ? sign_grid.axes[1].cell_width() : 0.0;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> frontier[2];  // by sign: [0] = -1, [1] = +1
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const int sign = lab.label(i, j);
            const Eigen::Index nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& rc : nb) {
                const Eigen::Index nr = rc[0], nc = rc[1];
                if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                if (lab.label(nr, nc) != sign) {
                    frontier[sign > 0 ? 1 : 0].push_back({i, j});
                    break;
                }
            }
        }
    }

    lab.boundary_distance.setConstant(rows, cols, std::numeric_limits<double>::infinity());
    if (!frontier[0].empty() || !frontier[1].empty()) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                const auto& opposite = frontier[lab.label(i, j) > 0 ? 0 : 1];
                double best = std::numeric_limits<double>::infinity();
                for (const auto& [oi, oj] : opposite) {
                    const double dx = static_cast<double>(oi - i) * wx;
                    const double dy = static_cast<double>(oj - j) * wy;
                    best = std::min(best, dx * dx + dy * dy);
                }
                lab.boundary_distance(i, j) = std::sqrt(best);
            }
        }
    }
    return lab;
}

GridFunction construct_matched_classifier(const GridFunction& sign_grid,
                                          const GridFunction& target, double epsilon, double c) {
    return construct_matched_classifier(sign_grid, label_regions(sign_grid), target, epsilon, c);
}

GridFunction construct_matched_classifier(const GridFunction& sign_grid,
                                          const RegionLabeling& labeling,
                                          const GridFunction& target, double epsilon, double c) {
    sign_grid.validate();
    target.validate();
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("construct_matched_classifier: epsilon must be > 0");
    }
    if (!(c > 0.0)) throw std::invalid_argument("construct_matched_classifier: c must be > 0");
    if (sign_grid.values.rows() != target.values.rows() ||
        sign_grid.values.cols() != target.values.cols()) {
        throw std::invalid_argument(
            "construct_matched_classifier: classifier and target live on different grids");
    }

    const double inf_target = target.values.minCoeff();
    const double sup_target = target.values.maxCoeff();

    GridFunction constructed;
    constructed.axes = target.axes;
    constructed.values.resizeLike(target.values);
    for (Eigen::Index i = 0; i < target.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < target.values.cols(); ++j) {
            const double shifted = labeling.label(i, j) > 0
                                       ? target.values(i, j) - inf_target + c
                                       : target.values(i, j) - sup_target - c;
            const double d = labeling.boundary_distance(i, j);
            constructed.values(i, j) = d > epsilon / 2.0 ? shifted : shifted * (2.0 * d / epsilon);
        }
    }
    constructed.validate();
    return constructed;
}

double default_offset_constant(const GridFunction& target) {
    target.validate();
    return 0.1 * (target.values.maxCoeff() - target.values.minCoeff() + 1.0);
}

VerificationReport verify_construction(const GridFunction& sign_grid,
                                       const GridFunction& constructed,
                                       const GridFunction& target, double epsilon,
                                       double grad_tol) {
    sign_grid.validate();
    constructed.validate();
    target.validate();
    const auto labeling = label_regions(sign_grid);
    const Eigen::Index rows = target.values.rows();
    const Eigen::Index cols = target.values.cols();
    const bool two_d = target.dims() == 2;

    VerificationReport report;
    report.grad_tol = grad_tol;

    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (labeling.boundary_distance(i, j) <= 0.0) continue;
            const double v = constructed.values(i, j);
            if (v == 0.0) {
                ++report.zero_nodes;
                continue;
            }
            ++report.sign_nodes_checked;
            const int sign = v > 0.0 ? 1 : -1;
            if (sign != labeling.label(i, j)) ++report.sign_mismatches;
        }
    }

    const double margin = epsilon / 2.0 + 2.0 * target.max_cell_width();
    const double wx = target.axes[0].cell_width();
    const double wy = two_d ? target.axes[1].cell_width() : 1.0;
    for (Eigen::Index i = 1; i + 1 < rows; ++i) {
        for (Eigen::Index j = two_d ? 1 : 0; j < (two_d ? cols - 1 : cols); ++j) {
            if (!(labeling.boundary_distance(i, j) > margin)) continue;
            ++report.grad_nodes_checked;
            double err = std::abs((constructed.values(i + 1, j) - constructed.values(i - 1, j)) / (2.0 * wx) -
                                  (target.values(i + 1, j) - target.values(i - 1, j)) / (2.0 * wx));
            if (two_d) {
                err = std::max(
                    err, std::abs((constructed.values(i, j + 1) - constructed.values(i, j - 1)) / (2.0 * wy) -
                                  (target.values(i, j + 1) - target.values(i, j - 1)) / (2.0 * wy)));
            }
            report.max_grad_error = std::max(report.max_grad_error, err);
            if (err > grad_tol) ++report.grad_failures;
        }
    }
    return report;
}

void export_grid_csv(const GridFunction& grid, const std::filesystem::path& path) {
    grid.validate();
    CsvWriter out(path);
    if (grid.dims() == 1) {
        out.write_row({"x", "value"});
        for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
            out.write_row({fmt_double(grid.axes[0].node(static_cast<int>(i))),
                           fmt_double(grid.values(i, 0))});
        }
    } else {
        out.write_row({"x", "y", "value"});
        for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
            for (Eigen::Index j = 0; j < grid.values.cols(); ++j) {
                out.write_row({fmt_double(grid.axes[0].node(static_cast<int>(i))),
                               fmt_double(grid.axes[1].node(static_cast<int>(j))),
                               fmt_double(grid.values(i, j))});
            }
        }
    }
}

GridFunction import_grid_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    if (rows.size() < 2) throw IngestionError("grid CSV has no data rows: " + path.string());
    const bool two_d = rows.front().size() == 3;
    if (!two_d && rows.front().size() != 2) {
        throw IngestionError("grid CSV must have 2 or 3 columns");
    }
    auto parse = [&](const std::string& tok) {
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
            throw IngestionError("bad numeric token in grid CSV: '" + tok + "'");
        }
        return v;
    };
    // Rows are written x-major (y fastest), so distinct y values repeat with
    // a fixed period and x is non-decreasing.
    std::vector<double> xs, ys;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) {
            throw IngestionError("ragged grid CSV at row " + std::to_string(r));
        }
        const double x = parse(rows[r][0]);
        if (xs.empty() || x != xs.back()) xs.push_back(x);
        if (two_d && xs.size() == 1) ys.push_back(parse(rows[r][1]));
    }
    if (!two_d) ys = {0.0};

    GridFunction g;
    target.axes.push_back({xs.front(), xs.back(), static_cast<int>(xs.size()) - 1});
    if (two_d) target.axes.push_back({ys.front(), ys.back(), static_cast<int>(ys.size()) - 1});
    const auto cols = static_cast<Eigen::Index>(ys.size());
    if (rows.size() - 1 != xs.size() * ys.size()) {
        throw IngestionError("grid CSV row count does not form a full grid");
    }
    target.values.resize(static_cast<Eigen::Index>(xs.size()), cols);
    std::size_t r = 1;
    for (Eigen::Index i = 0; i < target.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < cols; ++j, ++r) {
            target.values(i, j) = parse(rows[r][two_d ? 2 : 1]);
        }
    }
    target.validate();
    return g;
}

}  // namespace cvote::counterexample
