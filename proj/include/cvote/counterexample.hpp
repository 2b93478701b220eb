#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <vector>

namespace cvote::counterexample {

/// A scalar function sampled on the nodes of a regular 1-D or 2-D grid.
/// values(i, j) is the sample at node (axes[0] node i, axes[1] node j);
/// 1-D grids have a single column.
struct GridFunction {
    struct Axis {
        double lo = 0.0;
        double hi = 1.0;
        int cells = 8;  ///< nodes = cells + 1

        double node(int i) const {
            return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cells);
        }
        double cell_width() const { return (hi - lo) / static_cast<double>(cells); }
    };

    std::vector<Axis> axes;  ///< 1 or 2 entries
    Eigen::MatrixXd values;

    int dims() const { return static_cast<int>(axes.size()); }
    void validate() const;
    double max_cell_width() const;
};

/// Samples fn over the grid. For 1-D grids fn receives (x, 0).
GridFunction sample_grid(const std::vector<GridFunction::Axis>& axes,
                         const std::function<double(double, double)>& fn);

/// Maximal orthogonally-connected same-sign regions of a sign grid, plus each
/// node's exact Euclidean distance to the nearest opposite-sign node
/// (+infinity when the grid carries a single sign).
struct RegionLabeling {
    Eigen::MatrixXi region_id;
    Eigen::MatrixXi label;  ///< -1 or +1 per node
    Eigen::MatrixXd boundary_distance;
    int num_regions = 0;
};

RegionLabeling label_regions(const GridFunction& sign_grid);

/// Builds a scalar field whose sign matches the given classifier everywhere
/// while its gradients follow an unrelated target function: on +1 regions the
/// target is shifted to target - inf(target) + c, on -1 regions to
/// target - sup(target) - c (inf/sup over all grid nodes). Within distance
/// epsilon/2 of the boundary the value is scaled by 2 d(x) / epsilon, which
/// reaches 0 on the boundary itself.
GridFunction construct_matched_classifier(const GridFunction& sign_grid,
                                          const GridFunction& target, double epsilon, double c);
GridFunction construct_matched_classifier(const GridFunction& sign_grid,
                                          const RegionLabeling& labeling,
                                          const GridFunction& target, double epsilon, double c);

/// Scale-aware default for the offset constant: 0.1 * (range of the target + 1).
double default_offset_constant(const GridFunction& target);

struct VerificationReport {
    // Condition 1: the constructed field carries the classifier's sign
    // wherever it is nonzero.
    std::size_t sign_nodes_checked = 0;
    std::size_t sign_mismatches = 0;
    std::size_t zero_nodes = 0;  ///< exact zeros: reported, not counted
    // Condition 2: central-difference gradients of the constructed field and
    // the target agree at interior nodes with d > epsilon/2 + 2 * cell_width.
    std::size_t grad_nodes_checked = 0;
    std::size_t grad_failures = 0;
    double max_grad_error = 0.0;
    double grad_tol = 0.0;

    bool sign_ok() const { return sign_mismatches == 0; }
    bool grad_ok() const { return grad_failures == 0; }
    bool passed() const { return sign_ok() && grad_ok(); }
};

VerificationReport verify_construction(const GridFunction& sign_grid,
                                       const GridFunction& constructed,
                                       const GridFunction& target, double epsilon,
                                       double grad_tol);

/// CSV export: one row per node (coordinates, then value).
void export_grid_csv(const GridFunction& grid, const std::filesystem::path& path);
GridFunction import_grid_csv(const std::filesystem::path& path);

}  // namespace cvote::counterexample
