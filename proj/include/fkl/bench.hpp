#pragma once

#include "fkl/gmkl.hpp"
#include "fkl/mkl.hpp"
#include "fkl/skl.hpp"
#include "fkl/synthetic.hpp"
#include "fkl/types.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <vector>

namespace fkl {

struct BenchOptions {
    std::vector<Index> group_lasso_rows = {1000, 3000, 10000, 30000};
    std::vector<Index> gmkl_rows = {200, 400, 800};
    std::vector<Index> skl_rows = {};  // empty disables the single-kernel runs
    Index input_dim = 6;
    Index kernels = 5;
    Index features_per_block = 100;  // kernels * features_per_block = 500 total
    Index skl_feature_count = 256;
    int group_lasso_iterations = 12;  // fixed counts: this measures cost per pass,
    int gmkl_iterations = 5;          // not time to convergence
    int skl_iterations = 3;
    double lambda_fraction = 0.1;  // of lambda_max
    double noise = 0.05;
    std::uint64_t seed = 11;
    LossSpec<double> loss{LossKind::quadratic, 0.1, 10.0};
};

struct BenchRow {
    std::string method;
    Index rows = 0;
    Index features = 0;  // total feature columns
    Index kernels = 0;
    double seconds = 0;
    double train_mse = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string status = "ok";
};

struct SlopeFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    int points = 0;
    bool valid = false;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    SlopeFit group_lasso;
    SlopeFit gmkl;
    SlopeFit skl;
};

/// Least-squares slope of log(seconds) against log(rows).
inline SlopeFit fit_loglog_slope(const std::vector<BenchRow>& rows, const std::string& method) {
    std::vector<double> xs, ys;
    for (const BenchRow& r : rows)
        if (r.method == method && r.status == "ok" && r.seconds > 0) {
            xs.push_back(std::log(static_cast<double>(r.rows)));
            ys.push_back(std::log(r.seconds));
        }
    SlopeFit fit;
    fit.points = static_cast<int>(xs.size());
    if (fit.points < 2) return fit;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= fit.points;
    my /= fit.points;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.valid = true;
    return fit;
}

namespace detail {

inline double mean_squared_error(const Vector<double>& predictions, const Vector<double>& targets) {
    return (predictions - targets).squaredNorm() / static_cast<double>(targets.size());
}

}  // namespace detail

/// Time the solvers across instance sizes on synthetic data.  Runs use
/// fixed iteration counts (tolerances disabled) so the measured quantity is
/// cost per pass times a constant, which is what the log-log slope needs.
/// Timing starts at embedding and excludes data generation; per-run
/// failures are recorded in the row status and do not abort the report.
inline BenchReport run_scaling_benchmark(const BenchOptions& options) {
    using clock = std::chrono::steady_clock;
    BenchReport report;

    {  // warm up the allocator and libm before anything is timed
        SyntheticSpec warm;
        warm.rows = 64;
        warm.input_dim = options.input_dim;
        warm.kernels = options.kernels;
        warm.features_per_block = 16;
        warm.seed = options.seed;
        const SyntheticData data = make_synthetic(warm);
        const GroupedFeatures<double> gf =
            build_grouped_features(data.data.inputs, data.specs, Index(16), options.seed);
        (void)(gf.values * Vector<double>::Zero(gf.values.cols())).sum();
    }

    for (const Index n : options.group_lasso_rows) {
        BenchRow row;
        row.method = "group_lasso";
        row.rows = n;
        row.kernels = options.kernels;
        row.features = options.kernels * options.features_per_block;
        try {
            SyntheticSpec spec;
            spec.rows = n;
            spec.input_dim = options.input_dim;
            spec.kernels = options.kernels;
            spec.features_per_block = options.features_per_block;
            spec.noise = options.noise;
            spec.seed = options.seed;
            const SyntheticData data = make_synthetic(spec);

            const auto t0 = clock::now();
            const GroupedFeatures<double> gf = build_grouped_features(
                data.data.inputs, data.specs, options.features_per_block, options.seed + 1);
            const double lambda =
                options.lambda_fraction * group_lasso_lambda_max(gf, data.data.targets, options.loss);
            GroupLassoOptions solver;
            solver.max_iterations = options.group_lasso_iterations;
            solver.rel_tol = 0.0;  // never triggers: run the full iteration budget
            const GroupedLinearModel<double> model =
                train_group_lasso(gf, data.data.targets, lambda, options.loss, solver);
            row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
            row.iterations = model.iterations;
            row.train_mse =
                detail::mean_squared_error(gf.values * model.weights, data.data.targets);
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
        report.rows.push_back(row);
    }

    for (const Index n : options.gmkl_rows) {
        BenchRow row;
        row.method = "gmkl";
        row.rows = n;
        row.kernels = options.kernels;
        row.features = options.kernels * options.features_per_block;
        try {
            SyntheticSpec spec;
            spec.rows = n;
            spec.input_dim = options.input_dim;
            spec.kernels = options.kernels;
            spec.features_per_block = options.features_per_block;
            spec.noise = options.noise;
            spec.seed = options.seed;
            const SyntheticData data = make_synthetic(spec);

            const auto t0 = clock::now();
            const GroupedFeatures<double> gf = build_grouped_features(
                data.data.inputs, data.specs, options.features_per_block, options.seed + 1);
            GmklOptions solver;
            solver.max_iterations = options.gmkl_iterations;
            solver.rel_tol = 0.0;
            const GmklResult<double> result =
                gmkl_reference(gf, data.data.targets, 1.0, options.loss, solver);
            row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
            row.iterations = result.iterations;
            row.train_mse =
                detail::mean_squared_error(gf.values * result.weights, data.data.targets);
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
        report.rows.push_back(row);
    }

    for (const Index n : options.skl_rows) {
        BenchRow row;
        row.method = "skl";
        row.rows = n;
        row.kernels = 1;
        row.features = options.skl_feature_count;
        try {
            SyntheticSpec spec;
            spec.rows = n;
            spec.input_dim = options.input_dim;
            spec.kernels = 1;
            spec.active_blocks = 1;
            spec.features_per_block = options.skl_feature_count;
            spec.noise = options.noise;
            spec.seed = options.seed;
            const SyntheticData data = make_synthetic(spec);
            const auto split =
                split_train_validation(data.data, 0.5, options.seed + 2);

            const auto t0 = clock::now();
            SklProblem<double> problem;
            problem.train_inputs = split.first.inputs;
            problem.train_targets = split.first.targets;
            problem.val_inputs = split.second.inputs;
            problem.val_targets = split.second.targets;
            const BaseSample<double> base = sample_base<double>(
                options.input_dim, options.skl_feature_count, options.seed + 3);
            SklOptions solver;
            solver.max_iterations = options.skl_iterations;
            solver.rel_tol = 0.0;
            solver.grad_tol = 0.0;
            const SklResult<double> result = learn_hyperparameters(
                problem, base,
                Vector<double>(Vector<double>::Constant(options.input_dim, 1.0)), solver);
            row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
            row.iterations = result.iterations;
            row.train_mse = detail::mean_squared_error(
                predict(result.model, split.first.inputs, base), split.first.targets);
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
        report.rows.push_back(row);
    }

    report.group_lasso = fit_loglog_slope(report.rows, "group_lasso");
    report.gmkl = fit_loglog_slope(report.rows, "gmkl");
    report.skl = fit_loglog_slope(report.rows, "skl");
    return report;
}

}  // namespace fkl
