// Command-line surface: embedding, training, prediction, benchmarks, and
// numerical self-checks on top of the fkl headers.  Commands read an optional
// JSON config; individual flags override config fields.  Metrics files are
// byte-stable across reruns with the same seed, wall-time fields excepted.
#include <CLI11.hpp>
#include <json.hpp>

#include "fkl/bench.hpp"
#include "fkl/data_io.hpp"
#include "fkl/exact_kernels.hpp"
#include "fkl/gmkl.hpp"
#include "fkl/mkl.hpp"
#include "fkl/serialize.hpp"
#include "fkl/skl.hpp"
#include "fkl/synthetic.hpp"

#include <Eigen/Core>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace {

using fkl::Index;
using json = nlohmann::json;
using Mat = fkl::Matrix<double>;
using Vec = fkl::Vector<double>;
using clock_type = std::chrono::steady_clock;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw fkl::IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw fkl::ParseError("config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw fkl::ParseError("config '" + path + "' is not a JSON object");
    return j;
}

std::filesystem::path prepare_output_dir(const std::string& dir) {
    std::filesystem::path p = dir.empty() ? "." : dir;
    std::filesystem::create_directories(p);
    return p;
}

void write_metrics(const json& metrics, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw fkl::IoError("cannot write metrics '" + path.string() + "'");
    out << metrics.dump(2) << '\n';
}

double mse(const Vec& predictions, const Vec& targets) {
    return (predictions - targets).squaredNorm() / static_cast<double>(targets.size());
}

// Shared command inputs; flags override the corresponding config fields.
struct CommonArgs {
    std::string config_path;
    std::string dataset;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
};

struct Resolved {
    json cfg;
    std::uint64_t seed = 1;
    std::filesystem::path out;
    std::string dataset;
};

Resolved resolve(const CommonArgs& args) {
    Resolved r;
    r.cfg = load_config(args.config_path);
    r.seed = args.seed ? *args.seed : r.cfg.value("seed", std::uint64_t{1});
    std::string dir = args.output_dir;
    if (dir.empty()) dir = r.cfg.value("output_dir", std::string("."));
    r.out = prepare_output_dir(dir);
    r.dataset = args.dataset.empty() ? r.cfg.value("dataset", std::string()) : args.dataset;
    return r;
}

fkl::Dataset load_dataset_or_throw(const Resolved& r) {
    if (r.dataset.empty())
        throw std::invalid_argument("no dataset given (config \"dataset\" or --dataset)");
    return fkl::parse_dataset(r.dataset);
}

fkl::LossSpec<double> loss_from_config(const json& cfg) {
    fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.1, 10.0};
    if (cfg.contains("loss")) loss = fkl::detail::loss_from_json(cfg.at("loss"));
    fkl::validate(loss);
    return loss;
}

// Kernel list for grouped features.  Each entry: family (required), sigma as
// a scalar broadcast over the block's input columns or a full array,
// skew_offset, and an optional [begin, size] column range.
std::vector<fkl::KernelSpec<double>> kernels_from_config(
    const json& cfg, Index input_dim, std::vector<fkl::GroupRange>& columns) {
    std::vector<fkl::KernelSpec<double>> specs;
    columns.clear();
    if (!cfg.contains("kernels") || cfg.at("kernels").empty()) {
        fkl::KernelSpec<double> spec;
        spec.family = fkl::KernelFamily::gaussian;
        spec.sigma = Vec::Constant(input_dim, 1.0);
        specs.push_back(spec);
        columns.push_back({0, input_dim});
        return specs;
    }
    for (const json& k : cfg.at("kernels")) {
        fkl::KernelSpec<double> spec;
        spec.family = fkl::family_from_name(k.at("family").get<std::string>());
        spec.skew_offset = k.value("skew_offset", 0.1);

        fkl::GroupRange range{0, input_dim};
        if (k.contains("columns")) {
            const auto c = k.at("columns").get<std::vector<Index>>();
            if (c.size() != 2)
                throw std::invalid_argument("kernel \"columns\" must be [begin, size]");
            range = {c[0], c[1]};
        }

        if (!k.contains("sigma")) {
            spec.sigma = Vec::Constant(range.size, 1.0);
        } else if (k.at("sigma").is_array()) {
            spec.sigma = fkl::detail::to_eigen(k.at("sigma").get<std::vector<double>>());
        } else {
            spec.sigma = Vec::Constant(range.size, k.at("sigma").get<double>());
        }
        specs.push_back(spec);
        columns.push_back(range);
    }
    return specs;
}

int cmd_embed(const CommonArgs& args) {
    const Resolved r = resolve(args);
    const fkl::Dataset ds = load_dataset_or_throw(r);

    std::vector<fkl::GroupRange> columns;
    const auto specs = kernels_from_config(r.cfg, ds.input_dim(), columns);
    const Index width =
        r.cfg.contains("mkl") ? r.cfg.at("mkl").value("features_per_block", Index{64})
                              : Index{64};

    const auto t0 = clock_type::now();
    const auto gf = fkl::build_grouped_features(ds.inputs, specs, width, r.seed, columns);
    const double wall = seconds_since(t0);

    const auto csv_path = r.out / "features.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw fkl::IoError("cannot write '" + csv_path.string() + "'");
    csv << "target";
    for (Index j = 0; j < gf.values.cols(); ++j) csv << ",phi_" << j;
    csv << '\n';
    for (Index i = 0; i < gf.values.rows(); ++i) {
        csv << format_double(ds.targets[i]);
        for (Index j = 0; j < gf.values.cols(); ++j)
            csv << ',' << format_double(gf.values(i, j));
        csv << '\n';
    }

    json metrics{{"command", "embed"},
                 {"rows", gf.values.rows()},
                 {"features", gf.values.cols()},
                 {"blocks", gf.block_count()},
                 {"seed", r.seed},
                 {"wall_seconds", wall}};
    write_metrics(metrics, r.out / "embed_metrics.json");
    std::cout << "embed: wrote " << gf.values.rows() << " x " << gf.values.cols()
              << " feature matrix to " << csv_path.string() << '\n';
    return 0;
}

int cmd_train_skl(const CommonArgs& args) {
    const Resolved r = resolve(args);
    const fkl::Dataset ds = load_dataset_or_throw(r);
    const double fraction = r.cfg.value("validation_fraction", 0.2);
    const auto [train, val] = fkl::split_train_validation(ds, fraction, r.seed);

    std::vector<fkl::GroupRange> columns;
    const auto specs = kernels_from_config(r.cfg, ds.input_dim(), columns);
    const auto& kernel = specs.front();
    if (kernel.input_dim() != ds.input_dim())
        throw std::invalid_argument("train-skl uses the first kernel over all columns");

    fkl::SklProblem<double> problem;
    problem.train_inputs = train.inputs;
    problem.train_targets = train.targets;
    problem.val_inputs = val.inputs;
    problem.val_targets = val.targets;
    problem.family = kernel.family;
    problem.skew_offset = kernel.skew_offset;
    problem.ridge_lambda = r.cfg.value("ridge_lambda", 1.0);
    problem.sigma_penalty = r.cfg.value("sigma_penalty", 1e-3);

    fkl::SklOptions options;
    if (r.cfg.contains("skl")) {
        const json& s = r.cfg.at("skl");
        options.max_iterations = s.value("max_iterations", options.max_iterations);
        options.rel_tol = s.value("rel_tol", options.rel_tol);
        options.grad_tol = s.value("grad_tol", options.grad_tol);
    }
    const Index feature_count = r.cfg.value("feature_count", Index{256});

    const auto t0 = clock_type::now();
    const auto base = fkl::sample_base<double>(ds.input_dim(), feature_count, r.seed + 1);
    const auto result = fkl::learn_hyperparameters(problem, base, kernel.sigma, options);
    const double wall = seconds_since(t0);

    fkl::save_ridge_model(result.model, (r.out / "skl_model.json").string());

    std::ofstream trace(r.out / "skl_trace.csv");
    trace << "iteration,objective,gradient_norm,step\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        const auto& rec = result.trace[i];
        trace << i << ',' << format_double(rec.objective) << ','
              << format_double(rec.gradient_norm) << ',' << format_double(rec.step) << '\n';
    }

    const double train_mse = mse(fkl::predict(result.model, train.inputs, base), train.targets);
    const double val_mse = mse(fkl::predict(result.model, val.inputs, base), val.targets);

    json metrics{{"command", "train-skl"},
                 {"converged", result.converged},
                 {"feature_count", feature_count},
                 {"iterations", result.iterations},
                 {"rows_train", train.rows()},
                 {"rows_validation", val.rows()},
                 {"seed", r.seed},
                 {"sigma", fkl::detail::to_std(result.sigma)},
                 {"train_mse", train_mse},
                 {"validation_mse", val_mse},
                 {"wall_seconds", wall}};
    write_metrics(metrics, r.out / "skl_metrics.json");
    std::cout << "train-skl: " << (result.converged ? "converged" : "stopped") << " after "
              << result.iterations << " iterations, validation mse "
              << format_double(val_mse) << '\n';
    return 0;
}

int cmd_train_mkl(const CommonArgs& args, std::optional<double> lambda_flag,
                  std::optional<double> fraction_flag) {
    const Resolved r = resolve(args);
    const fkl::Dataset ds = load_dataset_or_throw(r);

    std::vector<fkl::GroupRange> columns;
    const auto specs = kernels_from_config(r.cfg, ds.input_dim(), columns);
    const fkl::LossSpec<double> loss = loss_from_config(r.cfg);

    json mkl_cfg = r.cfg.value("mkl", json::object());
    const Index width = mkl_cfg.value("features_per_block", Index{64});

    fkl::GroupLassoOptions options;
    options.max_iterations = mkl_cfg.value("max_iterations", options.max_iterations);
    options.rel_tol = mkl_cfg.value("rel_tol", options.rel_tol);
    options.kkt_tol = mkl_cfg.value("kkt_tol", options.kkt_tol);

    const auto t0 = clock_type::now();
    const auto gf = fkl::build_grouped_features(ds.inputs, specs, width, r.seed, columns);
    const double lambda_max = fkl::group_lasso_lambda_max(gf, ds.targets, loss);

    double lambda = 0;
    double fraction_used = std::numeric_limits<double>::quiet_NaN();
    if (lambda_flag) {
        lambda = *lambda_flag;
    } else if (mkl_cfg.contains("lambda") && !fraction_flag) {
        lambda = mkl_cfg.at("lambda").get<double>();
    } else {
        fraction_used = fraction_flag ? *fraction_flag : mkl_cfg.value("lambda_fraction", 0.1);
        lambda = fraction_used * lambda_max;
    }

    const auto model = fkl::train_group_lasso(gf, ds.targets, lambda, loss, options);
    const double wall = seconds_since(t0);

    fkl::save_mkl_model(model, gf, (r.out / "mkl_model.json").string());

    std::ofstream trace(r.out / "mkl_trace.csv");
    trace << "iteration,objective\n";
    for (std::size_t i = 0; i < model.objective_history.size(); ++i)
        trace << i << ',' << format_double(model.objective_history[i]) << '\n';

    const Vec weights = fkl::kernel_weights(model);
    Index active = 0;
    for (Index t = 0; t < weights.size(); ++t)
        if (weights[t] > 0) ++active;

    json metrics{{"command", "train-mkl"},
                 {"active_blocks", active},
                 {"converged", model.converged},
                 {"features", gf.values.cols()},
                 {"iterations", model.iterations},
                 {"kernel_weights", fkl::detail::to_std(weights)},
                 {"kkt_residual", model.kkt_residual},
                 {"lambda", lambda},
                 {"lambda_fraction", fraction_used},
                 {"lambda_max", lambda_max},
                 {"loss", fkl::detail::loss_to_json(loss)},
                 {"rows", ds.rows()},
                 {"seed", r.seed},
                 {"train_mse", mse(gf.values * model.weights, ds.targets)},
                 {"wall_seconds", wall}};
    write_metrics(metrics, r.out / "mkl_metrics.json");
    std::cout << "train-mkl: " << (model.converged ? "converged" : "stopped") << " after "
              << model.iterations << " iterations, " << active << '/' << weights.size()
              << " kernels active\n";
    return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& model_path) {
    const Resolved r = resolve(args);
    const fkl::Dataset ds = load_dataset_or_throw(r);

    const json artifact = [&] {
        std::ifstream in(model_path);
        if (!in) throw fkl::IoError("cannot open model '" + model_path + "'");
        try {
            return json::parse(in);
        } catch (const json::parse_error& e) {
            throw fkl::ParseError("model '" + model_path + "': " + e.what());
        }
    }();
    const std::string kind = artifact.value("kind", std::string());

    const auto t0 = clock_type::now();
    Vec predictions;
    if (kind == "ridge_model") {
        const auto model = fkl::load_ridge_model(model_path);
        predictions = fkl::predict(model, ds.inputs);
    } else if (kind == "mkl_model") {
        const auto model = fkl::load_mkl_model(model_path);
        predictions = fkl::predict(model, ds.inputs);
    } else {
        throw fkl::ParseError("model '" + model_path + "' has unknown kind '" + kind + "'");
    }
    const double wall = seconds_since(t0);

    const auto csv_path = r.out / "predictions.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw fkl::IoError("cannot write '" + csv_path.string() + "'");
    csv << "row,prediction,target\n";
    for (Index i = 0; i < predictions.size(); ++i)
        csv << i << ',' << format_double(predictions[i]) << ','
            << format_double(ds.targets[i]) << '\n';

    json metrics{{"command", "predict"},
                 {"model", kind},
                 {"mse", mse(predictions, ds.targets)},
                 {"rows", ds.rows()},
                 {"wall_seconds", wall}};
    write_metrics(metrics, r.out / "predict_metrics.json");
    std::cout << "predict: wrote " << predictions.size() << " predictions, mse "
              << format_double(mse(predictions, ds.targets)) << '\n';
    return 0;
}

int cmd_bench_scaling(const CommonArgs& args, const std::vector<Index>& rows_flag,
                      std::optional<double> fraction_flag) {
    const Resolved r = resolve(args);
    json bench_cfg = r.cfg.value("bench", json::object());

    fkl::BenchOptions options;
    options.seed = bench_cfg.value("seed", r.seed);
    if (!rows_flag.empty()) options.group_lasso_rows = rows_flag;
    else if (bench_cfg.contains("rows"))
        options.group_lasso_rows = bench_cfg.at("rows").get<std::vector<Index>>();
    if (bench_cfg.contains("gmkl_rows"))
        options.gmkl_rows = bench_cfg.at("gmkl_rows").get<std::vector<Index>>();
    if (bench_cfg.contains("skl_rows"))
        options.skl_rows = bench_cfg.at("skl_rows").get<std::vector<Index>>();
    options.input_dim = bench_cfg.value("input_dim", options.input_dim);
    options.kernels = bench_cfg.value("kernels", options.kernels);
    options.features_per_block =
        bench_cfg.value("features_per_block", options.features_per_block);
    options.skl_feature_count = bench_cfg.value("skl_feature_count", options.skl_feature_count);
    options.group_lasso_iterations =
        bench_cfg.value("group_lasso_iterations", options.group_lasso_iterations);
    options.gmkl_iterations = bench_cfg.value("gmkl_iterations", options.gmkl_iterations);
    options.skl_iterations = bench_cfg.value("skl_iterations", options.skl_iterations);
    options.lambda_fraction =
        fraction_flag ? *fraction_flag : bench_cfg.value("lambda_fraction", options.lambda_fraction);
    options.noise = bench_cfg.value("noise", options.noise);
    options.loss = loss_from_config(r.cfg);

    const fkl::BenchReport report = fkl::run_scaling_benchmark(options);

    const auto csv_path = r.out / "bench_rows.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw fkl::IoError("cannot write '" + csv_path.string() + "'");
    csv << "method,rows,features,kernels,seconds,train_mse,iterations,status\n";
    for (const auto& row : report.rows)
        csv << row.method << ',' << row.rows << ',' << row.features << ',' << row.kernels
            << ',' << format_double(row.seconds) << ',' << format_double(row.train_mse)
            << ',' << row.iterations << ",\"" << row.status << "\"\n";

    const auto fit_json = [](const fkl::SlopeFit& fit) {
        json j{{"points", fit.points}, {"valid", fit.valid}};
        if (fit.valid) {
            j["slope"] = fit.slope;
            j["intercept"] = fit.intercept;
        } else {
            j["status"] = "insufficient points";
        }
        return j;
    };
    json metrics{{"command", "bench-scaling"},
                 {"group_lasso", fit_json(report.group_lasso)},
                 {"gmkl", fit_json(report.gmkl)},
                 {"skl", fit_json(report.skl)},
                 {"seed", options.seed}};
    write_metrics(metrics, r.out / "bench_metrics.json");

    const auto describe = [](const char* name, const fkl::SlopeFit& fit) {
        std::cout << "bench-scaling: " << name << " slope ";
        if (fit.valid)
            std::cout << format_double(fit.slope) << " over " << fit.points << " points\n";
        else
            std::cout << "n/a (insufficient points)\n";
    };
    describe("group_lasso", report.group_lasso);
    describe("gmkl", report.gmkl);
    if (!options.skl_rows.empty()) describe("skl", report.skl);
    for (const auto& row : report.rows)
        if (row.status != "ok")
            std::cout << "bench-scaling: " << row.method << " n=" << row.rows << " "
                      << row.status << '\n';
    return 0;
}

// Numerical self-checks: analytic gradients against finite differences,
// Monte Carlo feature products against exact kernels, and the substituted
// alternating-minimization objective against the group-Lasso one.  An
// explicit --tol replaces every property's default bound.
int cmd_verify(const CommonArgs& args, std::optional<double> tol_flag,
               const std::string& model_path) {
    const Resolved r = resolve(args);
    json eq_cfg = r.cfg.value("equivalence", json::object());

    bool all_pass = true;
    json properties = json::array();
    const auto report = [&](const std::string& name, bool pass, double measured,
                            double bound) {
        all_pass = all_pass && pass;
        std::cout << name << ": " << (pass ? "PASS" : "FAIL") << " (measured "
                  << format_double(measured) << ", bound " << format_double(bound) << ")\n";
        properties.push_back(
            {{"name", name}, {"pass", pass}, {"measured", measured}, {"bound", bound}});
    };

    // gradient fidelity on a small instance per family
    {
        const double tol = tol_flag ? *tol_flag : 1e-4;
        std::mt19937_64 engine(r.seed * 2654435761u + 1);
        double worst = 0;
        for (const auto family :
             {fkl::KernelFamily::gaussian, fkl::KernelFamily::skewed_chi2,
              fkl::KernelFamily::skewed_intersection}) {
            fkl::SklProblem<double> problem;
            Mat inputs(24, 3);
            Vec targets(24);
            for (Index i = 0; i < 24; ++i) {
                targets[i] = fkl::standard_normal(engine);
                for (Index j = 0; j < 3; ++j)
                    inputs(i, j) = fkl::uniform_unit(engine) + 0.05;
            }
            problem.train_inputs = inputs.topRows(16);
            problem.train_targets = targets.head(16);
            problem.val_inputs = inputs.bottomRows(8);
            problem.val_targets = targets.tail(8);
            problem.family = family;
            const auto base = fkl::sample_base<double>(3, 32, r.seed + 5);
            Vec sigma(3);
            for (Index j = 0; j < 3; ++j) sigma[j] = 0.5 + fkl::uniform_unit(engine);

            const Vec analytic = fkl::validation_gradient(sigma, problem, base);
            for (Index j = 0; j < 3; ++j) {
                const double h = 1e-5 * std::max(1.0, std::abs(sigma[j]));
                Vec hi = sigma, lo = sigma;
                hi[j] += h;
                lo[j] -= h;
                const double fd = (fkl::validation_objective(hi, problem, base) -
                                   fkl::validation_objective(lo, problem, base)) /
                                  (2 * h);
                const double rel =
                    std::abs(analytic[j] - fd) / std::max(1.0, std::abs(fd));
                worst = std::max(worst, rel);
            }
        }
        report("gradient_fidelity", worst <= tol, worst, tol);
    }

    // Monte Carlo consistency of the feature inner products
    {
        const double tol = tol_flag ? *tol_flag : 0.08;
        const Index d = eq_cfg.value("mc_features", Index{4000});
        const Index pairs = eq_cfg.value("mc_pairs", Index{50});
        std::mt19937_64 engine(r.seed * 0x9e3779b9u + 2);
        double worst = 0;
        for (const auto family :
             {fkl::KernelFamily::gaussian, fkl::KernelFamily::skewed_chi2,
              fkl::KernelFamily::skewed_intersection}) {
            fkl::KernelSpec<double> spec;
            spec.family = family;
            spec.sigma = Vec::Constant(4, 0.8);
            Mat points(2 * pairs, 4);
            for (Index i = 0; i < points.rows(); ++i)
                for (Index j = 0; j < 4; ++j)
                    points(i, j) = fkl::uniform_unit(engine) + 0.05;
            const auto base = fkl::sample_base<double>(4, d, r.seed + 6);
            const Mat phi = fkl::embed(points, spec, base).values;
            for (Index p = 0; p < pairs; ++p) {
                const Index a = 2 * p, b = 2 * p + 1;
                const double estimate = phi.row(a).dot(phi.row(b));
                const double exact =
                    fkl::kernel_eval(spec, Vec(points.row(a)), Vec(points.row(b)));
                worst = std::max(worst, std::abs(estimate - exact));
            }
        }
        report("monte_carlo_consistency", worst <= tol, worst, tol);
    }

    // alternating-minimization equivalence at lambda = sqrt2 / C
    {
        const double tol = tol_flag ? *tol_flag : 1e-3;
        fkl::SyntheticSpec spec;
        spec.rows = eq_cfg.value("rows", Index{120});
        spec.input_dim = eq_cfg.value("input_dim", Index{4});
        spec.kernels = eq_cfg.value("kernels", Index{3});
        spec.features_per_block = eq_cfg.value("features_per_block", Index{12});
        spec.seed = r.seed + 7;
        const auto data = fkl::make_synthetic(spec);
        const auto gf = fkl::build_grouped_features(
            data.data.inputs, data.specs, spec.features_per_block, r.seed + 8);
        const fkl::LossSpec<double> loss = loss_from_config(r.cfg);

        const double lambda_max = fkl::group_lasso_lambda_max(gf, data.data.targets, loss);
        const double fraction = eq_cfg.value("lambda_fraction", 0.3);
        const double lambda = fraction * lambda_max;
        const double C = std::numbers::sqrt2 / lambda;

        fkl::GroupLassoOptions gl_options;
        gl_options.rel_tol = 1e-12;
        gl_options.max_iterations = 50000;
        const auto gl =
            fkl::train_group_lasso(gf, data.data.targets, lambda, loss, gl_options);
        const auto am = fkl::gmkl_reference(gf, data.data.targets, C, loss);

        const double obj_gap = std::abs(am.objective / C - gl.objective) /
                               std::max(1.0, std::abs(gl.objective));
        const double scale_gap =
            (am.kernel_scales - fkl::kernel_weights(gl)).cwiseAbs().maxCoeff();
        report("equivalence_objective", obj_gap <= tol, obj_gap, tol);
        report("equivalence_kernel_scales", scale_gap <= tol, scale_gap, tol);
    }

    if (!model_path.empty()) {
        bool pass = true;
        std::string detail = "artifact loads and passes its hash check";
        try {
            std::ifstream in(model_path);
            if (!in) throw fkl::IoError("cannot open model '" + model_path + "'");
            const json artifact = json::parse(in);
            const std::string kind = artifact.value("kind", std::string());
            if (kind == "ridge_model")
                (void)fkl::load_ridge_model(model_path);
            else if (kind == "mkl_model")
                (void)fkl::load_mkl_model(model_path);
            else
                throw fkl::ParseError("unknown artifact kind '" + kind + "'");
        } catch (const std::exception& e) {
            pass = false;
            detail = e.what();
        }
        all_pass = all_pass && pass;
        std::cout << "model_artifact: " << (pass ? "PASS" : "FAIL") << " (" << detail
                  << ")\n";
        properties.push_back({{"name", "model_artifact"}, {"pass", pass}, {"detail", detail}});
    }

    json metrics{{"command", "verify-equivalence"},
                 {"all_pass", all_pass},
                 {"properties", properties},
                 {"seed", r.seed}};
    write_metrics(metrics, r.out / "verify_metrics.json");
    std::cout << (all_pass ? "verify-equivalence: all properties hold\n"
                           : "verify-equivalence: FAILURES above\n");
    return all_pass ? 0 : 1;
}

constexpr const char* kHelpFooter = R"(Output files (written to the output directory):
  embed               features.csv: target,phi_0..phi_{D-1}; embed_metrics.json
  train-skl           skl_model.json; skl_trace.csv: iteration,objective,gradient_norm,step;
                      skl_metrics.json
  train-mkl           mkl_model.json; mkl_trace.csv: iteration,objective; mkl_metrics.json
  predict             predictions.csv: row,prediction,target; predict_metrics.json
  bench-scaling       bench_rows.csv: method,rows,features,kernels,seconds,train_mse,
                      iterations,status; bench_metrics.json
  verify-equivalence  verify_metrics.json

Metrics JSON files are byte-stable across reruns with the same config and seed,
except the wall_seconds field.  Set FKL_NUM_THREADS to cap internal threading.

Config is a JSON object; flags override matching fields.  Recognized fields:
  dataset, seed, output_dir, validation_fraction, feature_count, ridge_lambda,
  sigma_penalty, kernels (array of {family, sigma, skew_offset, columns}),
  loss {kind, epsilon, sharpness}, skl {max_iterations, rel_tol, grad_tol},
  mkl {features_per_block, lambda, lambda_fraction, max_iterations, rel_tol, kkt_tol},
  bench {rows, gmkl_rows, skl_rows, kernels, features_per_block, input_dim,
  group_lasso_iterations, gmkl_iterations, skl_iterations, lambda_fraction, noise, seed},
  equivalence {rows, kernels, features_per_block, input_dim, lambda_fraction,
  mc_features, mc_pairs}
)";

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("FKL_NUM_THREADS"))
        Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    CLI::App app{"Random-feature kernel learning toolkit"};
    app.footer(kHelpFooter);
    app.require_subcommand(1);

    CommonArgs common;
    std::optional<double> lambda_flag, fraction_flag, tol_flag;
    std::vector<Index> rows_flag;
    std::string model_path;

    const auto add_common = [&](CLI::App* sub, bool needs_dataset) {
        sub->add_option("-c,--config", common.config_path, "JSON config file");
        sub->add_option("-o,--output-dir", common.output_dir, "directory for outputs");
        sub->add_option("--seed", common.seed, "override the config seed");
        if (needs_dataset)
            sub->add_option("--dataset", common.dataset, "sparse text dataset path");
        return sub;
    };

    auto* embed = add_common(app.add_subcommand("embed", "materialize random features"), true);
    auto* train_skl = add_common(
        app.add_subcommand("train-skl", "learn kernel bandwidths by validation descent"),
        true);
    auto* train_mkl = add_common(
        app.add_subcommand("train-mkl", "train the block-sparse multiple kernel model"),
        true);
    train_mkl->add_option("--lambda", lambda_flag, "group penalty (absolute)");
    train_mkl->add_option("--lambda-fraction", fraction_flag,
                          "group penalty as a fraction of lambda_max");
    auto* predict = add_common(app.add_subcommand("predict", "evaluate a stored model"), true);
    predict->add_option("--model", model_path, "model artifact path")->required();
    auto* bench = add_common(
        app.add_subcommand("bench-scaling", "wall-time scaling study on synthetic data"),
        false);
    bench->add_option("--rows", rows_flag, "row counts for the linear-memory solver")
        ->delimiter(',');
    bench->add_option("--lambda-fraction", fraction_flag,
                      "group penalty as a fraction of lambda_max");
    auto* verify = add_common(
        app.add_subcommand("verify-equivalence", "run the numerical self-checks"), false);
    verify->add_option("--tol", tol_flag, "override every property tolerance");
    verify->add_option("--model", model_path, "also verify a stored model artifact");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (embed->parsed()) return cmd_embed(common);
        if (train_skl->parsed()) return cmd_train_skl(common);
        if (train_mkl->parsed()) return cmd_train_mkl(common, lambda_flag, fraction_flag);
        if (predict->parsed()) return cmd_predict(common, model_path);
        if (bench->parsed()) return cmd_bench_scaling(common, rows_flag, fraction_flag);
        if (verify->parsed()) return cmd_verify(common, tol_flag, model_path);
    } catch (const fkl::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fkl::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
