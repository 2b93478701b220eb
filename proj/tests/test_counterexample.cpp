#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cvote/counterexample.hpp"
#include "cvote/expr.hpp"

using namespace cvote;
using namespace cvote::counterexample;
namespace fs = std::filesystem;

namespace {

GridFunction sign_of(const std::vector<GridFunction::Axis>& axes,
                     const std::function<double(double, double)>& fn) {
    return sample_grid(axes, [&](double x, double y) { return fn(x, y) >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace

TEST_CASE("label_regions on 1-D sign(x)") {
    const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 16}};
    const auto H = sign_of(axes, [](double x, double) { return x; });
    const auto lab = label_regions(H);
    CHECK(lab.num_regions == 2);
    // node 0 is x = -1 (label -1); last node is +1
    CHECK(lab.label(0, 0) == -1);
    CHECK(lab.label(16, 0) == 1);
    // distance to the nearest opposite-sign node is exact
    const double w = 2.0 / 16.0;
    CHECK(lab.boundary_distance(0, 0) == doctest::Approx(8 * w).epsilon(1e-12));
    // x = 0 holds sign +1; its nearest -1 node is one cell away
    CHECK(lab.boundary_distance(8, 0) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("label_regions on a single-label grid") {
    const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 8}};
    const auto H = sign_of(axes, [](double, double) { return 1.0; });
    const auto lab = label_regions(H);
    CHECK(lab.num_regions == 1);
    for (Eigen::Index i = 0; i < lab.boundary_distance.rows(); ++i) {
        CHECK(std::isinf(lab.boundary_distance(i, 0)));
    }
}

TEST_CASE("label_regions on the 2-D quadrant classifier") {
    // 33 cells: no node sits exactly on an axis, so the four quadrants stay
    // separate under orthogonal adjacency.
    {
        const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 33}, {-1.0, 1.0, 33}};
        const auto H = sign_of(axes, [](double x, double y) { return x * y; });
        const auto lab = label_regions(H);
        CHECK(lab.num_regions == 4);
    }
    // 32 cells: the axes hold sign(0) = +1 nodes that fuse the two positive
    // quadrants into one region.
    const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 32}, {-1.0, 1.0, 32}};
    const auto H = sign_of(axes, [](double x, double y) { return x * y; });
    const auto lab = label_regions(H);
    CHECK(lab.num_regions == 3);

    // distance at (0.5, 0.5) is 0.5 plus-or-minus one cell width
    const double w = 2.0 / 32.0;
    Eigen::Index i = 24, j = 24;  // node at (0.5, 0.5)
    CHECK(std::abs(H.axes[0].node(static_cast<int>(i)) - 0.5) < 1e-12);
    CHECK(lab.boundary_distance(i, j) >= 0.5 - w - 1e-12);
    CHECK(lab.boundary_distance(i, j) <= 0.5 + w + 1e-12);

    CHECK_THROWS_AS(label_regions(sample_grid(axes, [](double, double) { return 0.5; })),
                    std::invalid_argument);
}

TEST_CASE("construct_matched_classifier single-region case keeps g's shape everywhere") {
    const std::vector<GridFunction::Axis> axes = {{0.0, 2.0, 32}};
    const auto H = sign_of(axes, [](double, double) { return 1.0; });
    const auto g = sample_grid(axes, [](double x, double) { return std::sin(3 * x); });
    const double c = 0.25;
    const auto constructed = construct_matched_classifier(H, g, 0.2, c);
    const double inf_g = g.values.minCoeff();
    for (Eigen::Index i = 0; i < constructed.values.rows(); ++i) {
        CHECK(constructed.values(i, 0) ==
              doctest::Approx(g.values(i, 0) - inf_g + c).epsilon(1e-15));
    }
}

TEST_CASE("construct_matched_classifier on sign(x) with sine matches the formula off the blend zone") {
    const std::vector<GridFunction::Axis> axes = {{-M_PI, M_PI, 1024}};
    const auto H = sign_of(axes, [](double x, double) { return x; });
    const auto g = sample_grid(axes, [](double x, double) { return std::sin(x); });
    const double c = 0.3, epsilon = 0.2;
    const auto constructed = construct_matched_classifier(H, g, epsilon, c);

    // inf/sup over the grid hit the analytic extrema exactly at this
    // resolution (the grid contains -pi/2 and pi/2)
    CHECK(g.values.minCoeff() == -1.0);
    CHECK(g.values.maxCoeff() == 1.0);

    // at the node closest to x = 2: d > epsilon/2, positive region
    const int i2 = static_cast<int>(std::lround((2.0 + M_PI) / (2.0 * M_PI) * 1024));
    const double x2 = H.axes[0].node(i2);
    CHECK(std::abs(x2 - 2.0) < 0.01);
    CHECK(constructed.values(i2, 0) == doctest::Approx(std::sin(x2) + 1.0 + c).epsilon(1e-14));
    CHECK(constructed.values(i2, 0) > 0.0);

    // deep in the negative region
    const int im = static_cast<int>(std::lround((-2.0 + M_PI) / (2.0 * M_PI) * 1024));
    const double xm = H.axes[0].node(im);
    CHECK(constructed.values(im, 0) == doctest::Approx(std::sin(xm) - 1.0 - c).epsilon(1e-14));
    CHECK(constructed.values(im, 0) < 0.0);

    CHECK_THROWS_AS(construct_matched_classifier(H, g, 0.0, c), std::invalid_argument);
    CHECK_THROWS_AS(construct_matched_classifier(H, g, epsilon, 0.0), std::invalid_argument);
}

TEST_CASE("a node on the boundary (d = 0) makes constructed exactly zero") {
    const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 16}};
    const auto H = sign_of(axes, [](double x, double) { return x; });
    const auto g = sample_grid(axes, [](double x, double) { return std::cos(x); });
    auto lab = label_regions(H);
    lab.boundary_distance(8, 0) = 0.0;  // place the node exactly on the boundary
    const auto constructed = construct_matched_classifier(H, lab, g, 0.2, 0.1);
    CHECK(constructed.values(8, 0) == 0.0);
}

TEST_CASE("blend factor is continuous at the seam and shrinks toward the boundary") {
    const std::vector<GridFunction::Axis> axes = {{-1.0, 1.0, 64}};
    const auto H = sign_of(axes, [](double x, double) { return x; });
    const auto g = sample_grid(axes, [](double, double) { return 1.0; });  // constant g
    const double c = 0.5, epsilon = 0.25;
    const auto lab = label_regions(H);
    const auto constructed = construct_matched_classifier(H, lab, g, epsilon, c);
    // constant g: positive region value is c scaled by the blend factor
    for (Eigen::Index i = 33; i < 65; ++i) {
        const double d = lab.boundary_distance(i, 0);
        const double expect = d > epsilon / 2.0 ? c : c * 2.0 * d / epsilon;
        CHECK(constructed.values(i, 0) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("per-region constancy of constructed - g away from the blend zone") {
    const std::vector<GridFunction::Axis> axes = {{-M_PI, M_PI, 256}};
    const auto H = sign_of(axes, [](double x, double) { return std::sin(2 * x); });
    const auto g = sample_grid(axes, [](double x, double) { return 0.3 * x * x; });
    const double epsilon = 0.2;
    const auto lab = label_regions(H);
    const auto constructed = construct_matched_classifier(H, lab, g, epsilon, 0.2);
    std::map<int, double> region_offset;
    for (Eigen::Index i = 0; i < constructed.values.rows(); ++i) {
        if (!(lab.boundary_distance(i, 0) > epsilon / 2.0)) continue;
        const double offset = constructed.values(i, 0) - g.values(i, 0);
        auto [it, inserted] = region_offset.try_emplace(lab.region_id(i, 0), offset);
        if (!inserted) CHECK(offset == doctest::Approx(it->second).epsilon(1e-9));
    }
    CHECK(region_offset.size() >= 3);
}

TEST_CASE("verification passes on the 1-D instance and flags corruption") {
    const std::vector<GridFunction::Axis> axes = {{-M_PI, M_PI, 1024}};
    const auto H = sign_of(axes, [](double x, double) { return x; });
    const auto g = sample_grid(axes, [](double x, double) { return std::sin(x); });
    const double epsilon = 0.2;
    const auto constructed = construct_matched_classifier(H, g, epsilon, default_offset_constant(g));

    const auto report = verify_construction(H, constructed, g, epsilon, 1e-6);
    CHECK(report.sign_mismatches == 0);
    CHECK(report.sign_nodes_checked > 1000);
    CHECK(report.grad_failures == 0);
    CHECK(report.max_grad_error <= 1e-6);
    CHECK(report.passed());

    // negative control: shift one region across zero
    auto corrupted = constructed;
    const auto lab = label_regions(H);
    for (Eigen::Index i = 0; i < corrupted.values.rows(); ++i) {
        if (lab.label(i, 0) > 0) corrupted.values(i, 0) -= 1000.0;
    }
    const auto bad = verify_construction(H, corrupted, g, epsilon, 1e-6);
    CHECK(bad.sign_mismatches > 0);
    CHECK_FALSE(bad.passed());
}

TEST_CASE("verification passes on the 2-D instance") {
    const std::vector<GridFunction::Axis> axes = {{-M_PI, M_PI, 256}, {-M_PI, M_PI, 256}};
    const auto H = sign_of(axes, [](double x, double y) { return x * y; });
    const auto g = sample_grid(axes, [](double x, double y) { return std::cos(x) * std::sin(y); });
    const double epsilon = 0.2;
    const auto constructed = construct_matched_classifier(H, g, epsilon, default_offset_constant(g));
    const auto report = verify_construction(H, constructed, g, epsilon, 1e-3);
    CHECK(report.sign_mismatches == 0);
    CHECK(report.grad_failures == 0);
    CHECK(report.passed());
}

TEST_CASE("refinement: region count is stable and the seam error shrinks") {
    auto run = [](int cells) {
        const std::vector<GridFunction::Axis> axes = {{-M_PI, M_PI, cells}};
        const auto H = sign_of(axes, [](double x, double) { return std::sin(2 * x); });
        const auto g = sample_grid(axes, [](double x, double) { return std::cos(x); });
        const auto lab = label_regions(H);
        const double epsilon = 0.5, c = 0.2;
        const auto constructed = construct_matched_classifier(H, lab, g, epsilon, c);
        // measure |constructed - shifted g| at nodes just inside the blend zone
        const double inf_g = g.values.minCoeff(), sup_g = g.values.maxCoeff();
        double max_err = 0.0;
        for (Eigen::Index i = 0; i < constructed.values.rows(); ++i) {
            const double d = lab.boundary_distance(i, 0);
            if (d > epsilon / 2.0 || std::isinf(d)) continue;
            if (d < epsilon / 2.0 - 2.0 * H.axes[0].cell_width()) continue;
            const double shifted = lab.label(i, 0) > 0 ? g.values(i, 0) - inf_g + c
                                                       : g.values(i, 0) - sup_g - c;
            max_err = std::max(max_err, std::abs(constructed.values(i, 0) - shifted));
        }
        return std::pair{label_regions(H).num_regions, max_err};
    };
    const auto [regions_lo, err_lo] = run(256);
    const auto [regions_hi, err_hi] = run(512);
    CHECK(regions_lo == regions_hi);   // boundaries aligned with this grid family
    CHECK(err_hi <= 0.75 * err_lo);    // seam error shrinks with refinement
}

TEST_CASE("grid CSV export/import round-trip") {
    const auto tmp = fs::temp_directory_path() / "cvote_grid.csv";
    const std::vector<GridFunction::Axis> axes1d = {{-2.0, 2.0, 16}};
    const auto g1 = sample_grid(axes1d, [](double x, double) { return x * x; });
    export_grid_csv(g1, tmp);
    const auto r1 = import_grid_csv(tmp);
    CHECK(r1.dims() == 1);
    CHECK(r1.axes[0].cells == 16);
    CHECK((r1.values - g1.values).cwiseAbs().maxCoeff() == 0.0);

    const std::vector<GridFunction::Axis> axes2d = {{-1.0, 1.0, 8}, {0.0, 2.0, 12}};
    const auto g2 = sample_grid(axes2d, [](double x, double y) { return x + 10 * y; });
    export_grid_csv(g2, tmp);
    const auto r2 = import_grid_csv(tmp);
    CHECK(r2.dims() == 2);
    CHECK(r2.axes[1].cells == 12);
    CHECK((r2.values - g2.values).cwiseAbs().maxCoeff() == 0.0);
    fs::remove(tmp);
}

TEST_CASE("expression parser evaluates the built-in families") {
    using expr::Expression;
    CHECK(Expression::parse("sin(x)")(M_PI / 2) == doctest::Approx(1.0));
    CHECK(Expression::parse("x*y")(3, 4) == 12.0);
    CHECK(Expression::parse("x^2+y^2-0.5")(1, 2) == doctest::Approx(4.5));
    CHECK(Expression::parse("cos(x)*sin(y)")(0, M_PI / 2) == doctest::Approx(1.0));
    CHECK(Expression::parse("-x + 2")(3) == doctest::Approx(-1.0));
    CHECK(Expression::parse("2^3^1")(0) == doctest::Approx(8.0));
    CHECK(Expression::parse("pi")(0) == doctest::Approx(M_PI));
    CHECK(Expression::parse("(x+1)*(x-1)")(2) == doctest::Approx(3.0));
    CHECK_THROWS_AS(Expression::parse("sin(x"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse("foo(x)"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse("x +"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse(""), std::invalid_argument);
}

TEST_CASE("grid validation rejects degenerate inputs") {
    GridFunction g;
    g.axes = {{0.0, 1.0, 4}};  // below the 8-cell minimum
    g.values = Eigen::MatrixXd::Zero(5, 1);
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.axes = {{0.0, 1.0, 8}};
    g.values = Eigen::MatrixXd::Zero(3, 1);  // wrong node count
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
