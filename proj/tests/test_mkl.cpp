#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fkl/gmkl.hpp"
#include "fkl/mkl.hpp"
#include "fkl/synthetic.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using fkl::Index;
using fkl::KernelFamily;
using Mat = fkl::Matrix<double>;
using Vec = fkl::Vector<double>;

namespace {

std::vector<fkl::GroupRange> even_groups(Index total, Index block) {
    std::vector<fkl::GroupRange> groups;
    for (Index begin = 0; begin < total; begin += block)
        groups.push_back({begin, block});
    return groups;
}

Mat random_matrix(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    Mat x(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) x(i, j) = fkl::standard_normal(engine);
    return x;
}

/// Small grouped-feature instance with genuine kernel blocks.
fkl::GroupedFeatures<double> small_features(Index rows, Index blocks, Index width,
                                            std::uint64_t seed) {
    fkl::SyntheticSpec spec;
    spec.rows = rows;
    spec.input_dim = 4;
    spec.kernels = blocks;
    spec.features_per_block = width;
    spec.seed = seed;
    const fkl::SyntheticData data = fkl::make_synthetic(spec);
    return fkl::build_grouped_features(data.data.inputs, data.specs, width, seed + 17);
}

}  // namespace

TEST_CASE("softplus and logistic: stable at extreme arguments") {
    CHECK(fkl::softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(fkl::softplus(800.0) == 800.0);
    CHECK(fkl::softplus(-800.0) == 0.0);
    CHECK(std::isfinite(fkl::softplus(1e308)));

    CHECK(fkl::logistic(0.0) == 0.5);
    CHECK(fkl::logistic(800.0) == 1.0);
    CHECK(fkl::logistic(-800.0) == 0.0);
    for (double z = -30.0; z <= 30.0; z += 0.37)
        CHECK(fkl::logistic(z) + fkl::logistic(-z) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("igll_loss: pinned value, zero at the center, symmetry") {
    // epsilon 0.1, sharpness 10, residual 0.1; frozen high-precision value
    CHECK(std::abs(fkl::igll_loss(0.0, 0.1, 0.1, 10.0) - 0.019355181656647214) < 1e-15);

    // exactly zero loss at f == y by construction
    CHECK(fkl::igll_loss(0.7, 0.7, 0.1, 10.0) == 0.0);

    // even in the residual
    for (double d = 0.05; d < 3.0; d += 0.21)
        CHECK(fkl::igll_loss(0.0, d, 0.1, 10.0) == fkl::igll_loss(0.0, -d, 0.1, 10.0));
}

TEST_CASE("igll_loss: sandwiched around the epsilon-insensitive hinge") {
    for (const double gamma : {1.0, 5.0, 10.0, 50.0}) {
        for (const double epsilon : {0.0, 0.1, 0.5}) {
            double sup_gap = 0.0;
            for (double d = -3.0; d <= 3.0; d += 1e-3) {
                const double smooth = fkl::igll_loss(0.0, d, epsilon, gamma);
                const double hinge = std::max(0.0, std::abs(d) - epsilon);
                sup_gap = std::max(sup_gap, std::abs(smooth - hinge));
            }
            CHECK(sup_gap <= 2.0 * std::log(2.0) / gamma + 1e-12);
        }
    }
}

TEST_CASE("igll derivatives: match finite differences") {
    const double epsilon = 0.1, gamma = 10.0;
    for (double d = -2.0; d <= 2.0; d += 0.13) {
        const double h = 1e-6;
        const double fd_grad = (fkl::igll_loss(0.0, d + h, epsilon, gamma) -
                                fkl::igll_loss(0.0, d - h, epsilon, gamma)) /
                               (2.0 * h);
        CHECK(std::abs(fkl::igll_gradient(0.0, d, epsilon, gamma) - fd_grad) < 1e-7);

        const double fd_curv = (fkl::igll_gradient(0.0, d + h, epsilon, gamma) -
                                fkl::igll_gradient(0.0, d - h, epsilon, gamma)) /
                               (2.0 * h);
        CHECK(std::abs(fkl::igll_curvature(0.0, d, epsilon, gamma) - fd_curv) < 1e-5);
        CHECK(fkl::igll_curvature(0.0, d, epsilon, gamma) >= 0.0);
    }
}

TEST_CASE("loss spec: quadratic pieces and validation") {
    fkl::LossSpec<double> quad{fkl::LossKind::quadratic, 0.0, 1.0};
    CHECK(fkl::loss_value(quad, 1.0, 3.0) == 2.0);
    CHECK(fkl::loss_derivative(quad, 1.0, 3.0) == 2.0);
    CHECK(fkl::loss_curvature(quad, 1.0, 3.0) == 1.0);

    fkl::LossSpec<double> bad{fkl::LossKind::epsilon_igll, -0.1, 10.0};
    CHECK_THROWS_AS(fkl::validate(bad), std::invalid_argument);
    fkl::LossSpec<double> flat{fkl::LossKind::epsilon_igll, 0.1, 0.0};
    CHECK_THROWS_AS(fkl::validate(flat), std::invalid_argument);
}

TEST_CASE("block_prox: pinned shrinkage and hard zeros") {
    Vec w(2);
    w << 3.0, 4.0;
    const auto groups = even_groups(2, 2);

    Vec shrunk = fkl::block_prox(w, groups, 2.5);
    CHECK(shrunk[0] == 1.5);
    CHECK(shrunk[1] == 2.0);

    Vec zeroed = fkl::block_prox(w, groups, 5.0);
    CHECK(zeroed[0] == 0.0);
    CHECK(zeroed[1] == 0.0);

    Vec identity = fkl::block_prox(w, groups, 0.0);
    CHECK(identity == w);

    CHECK_THROWS_AS((void)fkl::block_prox(w, groups, -1.0), std::invalid_argument);

    // blockwise: the first group zeroes, the second only shrinks
    Vec two(4);
    two << 0.3, 0.4, 3.0, 4.0;
    Vec out = fkl::block_prox(two, even_groups(4, 2), 1.0);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(std::abs(out[2] - 3.0 * 0.8) < 1e-15);
    CHECK(std::abs(out[3] - 4.0 * 0.8) < 1e-15);
}

TEST_CASE("build_grouped_features: blocks are independent embeddings") {
    const Mat inputs = random_matrix(12, 4, 3).array().abs();
    const auto specs = fkl::synthetic_kernels(4, 3);
    const auto gf = fkl::build_grouped_features(inputs, specs, Index(8), 90);

    REQUIRE(gf.block_count() == 3);
    REQUIRE(gf.values.cols() == 24);
    for (Index t = 0; t < 3; ++t) {
        const auto base = fkl::sample_base<double>(4, 8, 90 + static_cast<std::uint64_t>(t));
        const Mat expected = fkl::embed(inputs, specs[static_cast<std::size_t>(t)], base).values;
        CHECK(Mat(gf.block(t)) == expected);
        CHECK(gf.groups[static_cast<std::size_t>(t)].begin == t * 8);
        CHECK(gf.groups[static_cast<std::size_t>(t)].size == 8);
    }

    // column-range variant embeds only the requested slice
    std::vector<fkl::KernelSpec<double>> narrow(2);
    narrow[0].family = KernelFamily::gaussian;
    narrow[0].sigma = Vec::Constant(2, 1.0);
    narrow[1].family = KernelFamily::gaussian;
    narrow[1].sigma = Vec::Constant(2, 2.0);
    std::vector<fkl::GroupRange> columns = {{0, 2}, {2, 2}};
    const auto split = fkl::build_grouped_features(inputs, narrow, Index(8), 91, columns);
    const auto base0 = fkl::sample_base<double>(2, 8, 91);
    const Mat left = fkl::embed(Mat(inputs.leftCols(2)), narrow[0], base0).values;
    CHECK(Mat(split.block(0)) == left);

    std::vector<fkl::GroupRange> overflow = {{0, 2}, {3, 2}};
    CHECK_THROWS_AS(
        (void)fkl::build_grouped_features(inputs, narrow, Index(8), 91, overflow),
        std::invalid_argument);
}

TEST_CASE("group_lasso_lambda_max: analytic for the quadratic loss") {
    const auto gf = small_features(40, 3, 8, 7);
    const Vec y = random_matrix(40, 1, 50).col(0);
    const fkl::LossSpec<double> quad{fkl::LossKind::quadratic, 0.0, 1.0};

    const double got = fkl::group_lasso_lambda_max(gf, y, quad);
    double want = 0.0;
    for (Index t = 0; t < gf.block_count(); ++t)
        want = std::max(want, (gf.block(t).transpose() * y).norm());
    CHECK(got == doctest::Approx(want).epsilon(1e-14));

    // at or above lambda_max the solution is exactly zero
    for (const double factor : {1.0, 2.0}) {
        const auto model = fkl::train_group_lasso(gf, y, factor * got, quad);
        CHECK(model.weights.norm() == 0.0);
        CHECK(model.converged);
        CHECK(model.kkt_residual <= 1e-5);
    }

    // just below, at least one block activates
    const auto active = fkl::train_group_lasso(gf, y, 0.5 * got, quad);
    CHECK(active.weights.norm() > 0.0);
}

TEST_CASE("train_group_lasso: agrees with a slow fixed-step reference") {
    const auto gf = small_features(30, 3, 4, 21);
    const Vec y = random_matrix(30, 1, 22).col(0);

    for (const auto loss :
         {fkl::LossSpec<double>{fkl::LossKind::quadratic, 0.0, 1.0},
          fkl::LossSpec<double>{fkl::LossKind::epsilon_igll, 0.1, 10.0}}) {
        const double lambda = 0.2 * fkl::group_lasso_lambda_max(gf, y, loss);
        const auto model = fkl::train_group_lasso(gf, y, lambda, loss);
        CHECK(model.converged);
        CHECK(model.kkt_residual <= 1e-5);

        const Vec slow =
            oracle::slow_group_lasso(gf.values, y, lambda, loss, gf.groups, 200000);
        const double obj_slow = oracle::group_lasso_objective_loops(gf.values, y, slow,
                                                                    lambda, loss, gf.groups);
        const double obj_fast = oracle::group_lasso_objective_loops(
            gf.values, y, model.weights, lambda, loss, gf.groups);
        CHECK(obj_fast <= obj_slow + 1e-6 * std::max(1.0, obj_slow));
        CHECK(std::abs(obj_fast - obj_slow) <= 1e-6 * std::max(1.0, obj_slow));

        // library objective accounting matches the loop version
        CHECK(std::abs(fkl::group_lasso_objective(gf, y, model.weights, lambda, loss) -
                       obj_fast) <= 1e-10 * std::max(1.0, obj_fast));
    }
}

TEST_CASE("train_group_lasso: monotone objective and momentum-free variant") {
    const auto gf = small_features(50, 3, 8, 33);
    const Vec y = random_matrix(50, 1, 34).col(0);
    const fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.0, 1.0};
    const double lambda = 0.15 * fkl::group_lasso_lambda_max(gf, y, loss);

    const auto fista = fkl::train_group_lasso(gf, y, lambda, loss);
    REQUIRE(fista.objective_history.size() >= 2);
    for (std::size_t i = 1; i < fista.objective_history.size(); ++i)
        CHECK(fista.objective_history[i] <=
              fista.objective_history[i - 1] +
                  1e-10 * std::max(1.0, fista.objective_history[i - 1]));

    fkl::GroupLassoOptions plain;
    plain.use_momentum = false;
    plain.max_iterations = 20000;
    const auto ista = fkl::train_group_lasso(gf, y, lambda, loss, plain);
    CHECK(ista.converged);
    CHECK(std::abs(fista.objective - ista.objective) <=
          1e-6 * std::max(1.0, fista.objective));

    // momentum should not need more iterations than the plain method
    CHECK(fista.iterations <= ista.iterations);
}

TEST_CASE("kernel_weights: block norms over sqrt two") {
    Vec w(4);
    w << 3.0, 4.0, 0.0, 0.0;
    const Vec kw = fkl::kernel_weights(w, even_groups(4, 2));
    REQUIRE(kw.size() == 2);
    CHECK(kw[0] == doctest::Approx(5.0 / std::numbers::sqrt2).epsilon(1e-15));
    CHECK(kw[1] == 0.0);
}

TEST_CASE("train_group_lasso: input validation") {
    const auto gf = small_features(20, 2, 4, 44);
    const Vec y = random_matrix(20, 1, 45).col(0);
    const fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.0, 1.0};

    CHECK_THROWS_AS((void)fkl::train_group_lasso(gf, y, -1.0, loss), std::invalid_argument);
    const Vec short_y = y.head(10);
    CHECK_THROWS_AS((void)fkl::train_group_lasso(gf, short_y, 1.0, loss),
                    std::invalid_argument);
}

TEST_CASE("gmkl_reference: equivalence with group lasso at lambda = sqrt2 / C") {
    const auto gf = small_features(60, 3, 8, 55);
    const Vec y = random_matrix(60, 1, 56).col(0);

    for (const auto loss :
         {fkl::LossSpec<double>{fkl::LossKind::quadratic, 0.0, 1.0},
          fkl::LossSpec<double>{fkl::LossKind::epsilon_igll, 0.1, 10.0}}) {
        // pick C so that lambda sits strictly inside the active range
        const double lambda_max = fkl::group_lasso_lambda_max(gf, y, loss);
        const double lambda = 0.3 * lambda_max;
        const double C = std::numbers::sqrt2 / lambda;

        fkl::GroupLassoOptions gl_options;
        gl_options.rel_tol = 1e-12;
        gl_options.max_iterations = 50000;
        const auto gl = fkl::train_group_lasso(gf, y, lambda, loss, gl_options);

        const auto gmkl = fkl::gmkl_reference(gf, y, C, loss);
        CHECK(gmkl.converged);

        // substituted objective over C equals the group-lasso objective
        const double scaled = gmkl.objective / C;
        CHECK(std::abs(scaled - gl.objective) <= 1e-4 * std::max(1.0, gl.objective));

        // recovered kernel scales agree
        const Vec gl_scales = fkl::kernel_weights(gl);
        CHECK((gmkl.kernel_scales - gl_scales).cwiseAbs().maxCoeff() <= 1e-3);

        // the scale step is the closed-form norm over sqrt two
        for (Index t = 0; t < gf.block_count(); ++t) {
            const auto g = gf.groups[static_cast<std::size_t>(t)];
            const double norm = gmkl.weights.segment(g.begin, g.size).norm();
            CHECK(std::abs(gmkl.kernel_scales[t] - norm / std::numbers::sqrt2) <= 1e-12);
        }
    }
}

TEST_CASE("gmkl_reference: C = 1 gives literal objective equality") {
    const auto gf = small_features(40, 2, 6, 66);
    Vec y = random_matrix(40, 1, 67).col(0);
    const fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.0, 1.0};

    // scale targets so lambda = sqrt2 is below lambda_max and blocks activate
    y *= 4.0 * std::numbers::sqrt2 / fkl::group_lasso_lambda_max(gf, y, loss);
    const double lambda_max = fkl::group_lasso_lambda_max(gf, y, loss);
    REQUIRE(std::numbers::sqrt2 < lambda_max);

    fkl::GroupLassoOptions gl_options;
    gl_options.rel_tol = 1e-12;
    gl_options.max_iterations = 50000;
    const auto gl =
        fkl::train_group_lasso(gf, y, std::numbers::sqrt2, loss, gl_options);
    const auto gmkl = fkl::gmkl_reference(gf, y, 1.0, loss);

    CHECK(std::abs(gmkl.objective - gl.objective) <= 1e-4 * std::max(1.0, gl.objective));
}

TEST_CASE("gmkl_reference: validation and the instance cap") {
    const auto gf = small_features(30, 2, 4, 77);
    const Vec y = random_matrix(30, 1, 78).col(0);
    const fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.0, 1.0};

    CHECK_THROWS_AS((void)fkl::gmkl_reference(gf, y, 0.0, loss), std::invalid_argument);
    CHECK_THROWS_AS((void)fkl::gmkl_reference(gf, y, -2.0, loss), std::invalid_argument);

    fkl::GmklOptions tight;
    tight.max_rows = 20;
    CHECK_THROWS_AS((void)fkl::gmkl_reference(gf, y, 1.0, loss, tight),
                    std::invalid_argument);
}
