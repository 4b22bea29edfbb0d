#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fkl/data_io.hpp"
#include "fkl/serialize.hpp"
#include "fkl/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using fkl::Index;
using Mat = fkl::Matrix<double>;
using Vec = fkl::Vector<double>;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("fkl_io_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("parse_dataset: sparse rows with one-based indices") {
    TempDir dir;
    const std::string path = dir.file("basic.txt");
    write_text(path,
               "# comment line\n"
               "1.5 1:2.0 3:0.25\n"
               "\n"
               "-0.5 2:1e-3\n");

    const fkl::Dataset ds = fkl::parse_dataset(path);
    REQUIRE(ds.rows() == 2);
    REQUIRE(ds.input_dim() == 3);
    CHECK(ds.targets[0] == 1.5);
    CHECK(ds.targets[1] == -0.5);
    CHECK(ds.inputs(0, 0) == 2.0);
    CHECK(ds.inputs(0, 1) == 0.0);
    CHECK(ds.inputs(0, 2) == 0.25);
    CHECK(ds.inputs(1, 0) == 0.0);
    CHECK(ds.inputs(1, 1) == 1e-3);
    CHECK(ds.inputs(1, 2) == 0.0);
}

TEST_CASE("parse_dataset: dimension override pads or rejects") {
    TempDir dir;
    const std::string path = dir.file("dim.txt");
    write_text(path, "1 1:1\n2 2:1\n");

    const fkl::Dataset wide = fkl::parse_dataset(path, 5);
    CHECK(wide.input_dim() == 5);
    CHECK(wide.inputs(0, 0) == 1.0);
    CHECK(wide.inputs(1, 1) == 1.0);
    CHECK(wide.inputs.col(4).cwiseAbs().sum() == 0.0);

    CHECK_THROWS_AS((void)fkl::parse_dataset(path, 1), fkl::ParseError);
}

TEST_CASE("parse_dataset: malformed lines carry line numbers") {
    TempDir dir;

    const auto expect_message = [&](const std::string& text, const std::string& needle) {
        const std::string path = dir.file("bad.txt");
        write_text(path, text);
        try {
            (void)fkl::parse_dataset(path);
            FAIL_CHECK("expected ParseError for: " << text);
        } catch (const fkl::ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(needle) != std::string::npos);
        }
    };

    expect_message("1 0:1\n", "line 1");
    expect_message("ok\n1 -3:1\n", "line");
    expect_message("1 1:1\n2 1:1 1:2\n", "line 2");
    expect_message("1 1:1\n2 7abc\n", "line 2");
    expect_message("1 1:\n", "line 1");
    expect_message("1 :2\n", "line 1");
    expect_message("notanumber 1:1\n", "line 1");

    const std::string empty = dir.file("empty.txt");
    write_text(empty, "# only comments\n\n");
    CHECK_THROWS_AS((void)fkl::parse_dataset(empty), fkl::ParseError);
}

TEST_CASE("parse_dataset: missing file raises IoError") {
    CHECK_THROWS_AS((void)fkl::parse_dataset("/nonexistent/nowhere.txt"), fkl::IoError);
}

TEST_CASE("write_dataset then parse_dataset is bit exact") {
    TempDir dir;
    std::mt19937_64 engine(123);
    fkl::Dataset ds;
    ds.inputs = Mat(17, 5);
    ds.targets = Vec(17);
    for (Index i = 0; i < 17; ++i) {
        ds.targets[i] = fkl::standard_normal(engine) * 1e3;
        for (Index j = 0; j < 5; ++j)
            ds.inputs(i, j) = fkl::standard_normal(engine) * std::pow(10.0, (j - 2) * 3);
    }
    // awkward values that expose sloppy formatting
    ds.inputs(0, 0) = 0.1;
    ds.inputs(0, 1) = 1.0 / 3.0;
    ds.inputs(0, 2) = 1e-300;
    ds.inputs(0, 3) = -0.0;
    ds.targets[0] = 4.9406564584124654e-324;

    const std::string path = dir.file("round.txt");
    fkl::write_dataset(ds, path);
    const fkl::Dataset back = fkl::parse_dataset(path, ds.input_dim());

    REQUIRE(back.rows() == ds.rows());
    REQUIRE(back.input_dim() == ds.input_dim());
    CHECK(back.inputs == ds.inputs);
    CHECK(back.targets == ds.targets);
}

TEST_CASE("split_train_validation: sizes, content, determinism") {
    fkl::Dataset ds;
    ds.inputs = Mat(20, 2);
    ds.targets = Vec(20);
    for (Index i = 0; i < 20; ++i) {
        ds.targets[i] = double(i);
        ds.inputs(i, 0) = double(i);
        ds.inputs(i, 1) = double(i) * 10;
    }

    const auto [train, val] = fkl::split_train_validation(ds, 0.25, 9);
    CHECK(train.rows() == 15);
    CHECK(val.rows() == 5);

    // every original row appears exactly once across the two pieces
    std::vector<double> seen;
    for (Index i = 0; i < train.rows(); ++i) seen.push_back(train.targets[i]);
    for (Index i = 0; i < val.rows(); ++i) seen.push_back(val.targets[i]);
    std::sort(seen.begin(), seen.end());
    for (Index i = 0; i < 20; ++i) CHECK(seen[static_cast<std::size_t>(i)] == double(i));

    // rows keep their input/target pairing
    for (Index i = 0; i < val.rows(); ++i)
        CHECK(val.inputs(i, 1) == val.targets[i] * 10);

    const auto [train2, val2] = fkl::split_train_validation(ds, 0.25, 9);
    CHECK(train2.inputs == train.inputs);
    CHECK(val2.targets == val.targets);

    const auto [train3, val3] = fkl::split_train_validation(ds, 0.25, 10);
    CHECK(val3.targets != val.targets);

    // extreme fractions still leave both sides nonempty
    const auto [t4, v4] = fkl::split_train_validation(ds, 1e-9, 1);
    CHECK(v4.rows() == 1);
    const auto [t5, v5] = fkl::split_train_validation(ds, 1.0 - 1e-12, 1);
    CHECK(t5.rows() == 1);

    CHECK_THROWS_AS((void)fkl::split_train_validation(ds, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)fkl::split_train_validation(ds, 1.5, 1), std::invalid_argument);
}

TEST_CASE("base sample save and load round trips bitwise") {
    TempDir dir;
    const auto base = fkl::sample_base<double>(3, 16, 404);
    const std::string path = dir.file("base.json");
    fkl::save_base_sample(base, path);
    const auto back = fkl::load_base_sample(path);
    CHECK(back.seed == base.seed);
    CHECK(back.uniforms == base.uniforms);
    CHECK(back.phases == base.phases);
}

TEST_CASE("ridge model save and load round trips, hash guards the kernel") {
    TempDir dir;
    fkl::RidgeModel<double> model;
    model.spec.family = fkl::KernelFamily::skewed_chi2;
    model.spec.sigma = Vec::Constant(3, 0.75);
    model.spec.skew_offset = 0.2;
    model.ridge_lambda = 0.5;
    model.seed = 31;
    std::mt19937_64 engine(5);
    model.coefficients = Vec(8);
    for (Index i = 0; i < 8; ++i) model.coefficients[i] = fkl::standard_normal(engine);
    model.hash = fkl::spec_hash(model.spec, model.seed, model.feature_count());

    const std::string path = dir.file("ridge.json");
    fkl::save_ridge_model(model, path);
    const auto back = fkl::load_ridge_model(path);
    CHECK(back.spec.family == model.spec.family);
    CHECK(back.spec.sigma == model.spec.sigma);
    CHECK(back.spec.skew_offset == model.spec.skew_offset);
    CHECK(back.ridge_lambda == model.ridge_lambda);
    CHECK(back.seed == model.seed);
    CHECK(back.hash == model.hash);
    CHECK(back.coefficients == model.coefficients);

    // tampering with a stored field breaks the hash check on load
    auto j = nlohmann::json::parse(std::ifstream(path));
    j["seed"] = 32;
    std::ofstream(path) << j.dump(2);
    CHECK_THROWS_AS((void)fkl::load_ridge_model(path), fkl::ParseError);
}

TEST_CASE("mkl model artifact round trips and predicts identically") {
    TempDir dir;
    fkl::SyntheticSpec spec;
    spec.rows = 40;
    spec.input_dim = 4;
    spec.kernels = 3;
    spec.features_per_block = 8;
    spec.seed = 77;
    const auto data = fkl::make_synthetic(spec);
    const auto gf =
        fkl::build_grouped_features(data.data.inputs, data.specs, Index(8), 78);
    const fkl::LossSpec<double> loss{fkl::LossKind::quadratic, 0.0, 1.0};
    const double lambda =
        0.2 * fkl::group_lasso_lambda_max(gf, data.data.targets, loss);
    const auto model = fkl::train_group_lasso(gf, data.data.targets, lambda, loss);

    const std::string path = dir.file("mkl.json");
    fkl::save_mkl_model(model, gf, path);
    const auto art = fkl::load_mkl_model(path);

    CHECK(art.seed == gf.seed);
    CHECK(art.lambda == model.lambda);
    CHECK(art.weights == model.weights);
    CHECK(art.objective == model.objective);
    CHECK(art.kernel_weight_values == fkl::kernel_weights(model));
    REQUIRE(art.specs.size() == gf.specs.size());
    for (std::size_t t = 0; t < art.specs.size(); ++t) {
        CHECK(art.specs[t].family == gf.specs[t].family);
        CHECK(art.specs[t].sigma == gf.specs[t].sigma);
    }

    // prediction through the artifact equals direct evaluation on the features
    const Vec direct = gf.values * model.weights;
    const Vec loaded = fkl::predict(art, data.data.inputs);
    CHECK(loaded == direct);

    // fresh inputs work too and stay deterministic
    const Mat fresh = Mat::Random(9, 4).cwiseAbs();
    CHECK(fkl::predict(art, fresh) == fkl::predict(art, fresh));
}

TEST_CASE("json loaders reject wrong kinds and unreadable files") {
    TempDir dir;
    const std::string path = dir.file("wrong.json");
    const auto base = fkl::sample_base<double>(2, 4, 1);
    fkl::save_base_sample(base, path);
    CHECK_THROWS_AS((void)fkl::load_ridge_model(path), fkl::ParseError);
    CHECK_THROWS_AS((void)fkl::load_mkl_model(path), fkl::ParseError);
    CHECK_THROWS_AS((void)fkl::load_base_sample("/nonexistent/b.json"), fkl::IoError);

    const std::string garbage = dir.file("garbage.json");
    write_text(garbage, "{ not json");
    CHECK_THROWS_AS((void)fkl::load_base_sample(garbage), fkl::ParseError);
}
