#pragma once

#include "fkl/data_io.hpp"
#include "fkl/feature_map.hpp"
#include "fkl/mkl.hpp"
#include "fkl/skl.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fkl {

// Artifacts are JSON with doubles emitted as shortest round-trip decimals,
// so save/load cycles are bit exact.  Base samples are normally NOT stored:
// they regenerate from (seed, dims) by construction, and the spec hash on
// each model catches any mismatch.

namespace detail {

inline nlohmann::json load_json(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(what) + " '" + path + "': " + e.what());
    }
    return j;
}

inline void save_json(const nlohmann::json& j, const std::string& path, const char* what) {
    std::ofstream out(path);
    if (!out) throw IoError(std::string("cannot write ") + what + " '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError(std::string("failed writing ") + what + " '" + path + "'");
}

template <typename Scalar>
std::vector<double> to_std(const Vector<Scalar>& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector<double> to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
}

inline void expect_kind(const nlohmann::json& j, const std::string& kind,
                        const std::string& path) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != kind)
        throw ParseError("'" + path + "' is not a " + kind + " artifact");
}

inline nlohmann::json spec_to_json(const KernelSpec<double>& spec) {
    return nlohmann::json{{"family", family_name(spec.family)},
                          {"sigma", to_std(spec.sigma)},
                          {"skew_offset", spec.skew_offset}};
}

inline KernelSpec<double> spec_from_json(const nlohmann::json& j) {
    KernelSpec<double> spec;
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.sigma = to_eigen(j.at("sigma").get<std::vector<double>>());
    spec.skew_offset = j.at("skew_offset").get<double>();
    validate(spec);
    return spec;
}

inline nlohmann::json loss_to_json(const LossSpec<double>& loss) {
    return nlohmann::json{{"kind", loss_name(loss.kind)},
                          {"epsilon", loss.epsilon},
                          {"sharpness", loss.sharpness}};
}

inline LossSpec<double> loss_from_json(const nlohmann::json& j) {
    LossSpec<double> loss;
    loss.kind = loss_from_name(j.at("kind").get<std::string>());
    loss.epsilon = j.at("epsilon").get<double>();
    loss.sharpness = j.at("sharpness").get<double>();
    validate(loss);
    return loss;
}

}  // namespace detail

inline void save_base_sample(const BaseSample<double>& base, const std::string& path) {
    std::vector<double> uniforms;
    uniforms.reserve(static_cast<std::size_t>(base.uniforms.size()));
    for (Index j = 0; j < base.uniforms.rows(); ++j)
        for (Index i = 0; i < base.uniforms.cols(); ++i)
            uniforms.push_back(base.uniforms(j, i));
    nlohmann::json j{{"kind", "base_sample"},
                     {"seed", base.seed},
                     {"feature_count", base.feature_count()},
                     {"input_dim", base.input_dim()},
                     {"uniforms", uniforms},  // row major
                     {"phases", detail::to_std(base.phases)}};
    detail::save_json(j, path, "base sample");
}

inline BaseSample<double> load_base_sample(const std::string& path) {
    const nlohmann::json j = detail::load_json(path, "base sample");
    detail::expect_kind(j, "base_sample", path);
    BaseSample<double> base;
    base.seed = j.at("seed").get<std::uint64_t>();
    const Index d = j.at("feature_count").get<Index>();
    const Index m = j.at("input_dim").get<Index>();
    const auto uniforms = j.at("uniforms").get<std::vector<double>>();
    const auto phases = j.at("phases").get<std::vector<double>>();
    if (static_cast<Index>(uniforms.size()) != d * m ||
        static_cast<Index>(phases.size()) != d)
        throw ParseError("base sample '" + path + "' has inconsistent sizes");
    base.uniforms.resize(d, m);
    for (Index jj = 0; jj < d; ++jj)
        for (Index i = 0; i < m; ++i)
            base.uniforms(jj, i) = uniforms[static_cast<std::size_t>(jj * m + i)];
    base.phases = detail::to_eigen(phases);
    return base;
}

inline void save_ridge_model(const RidgeModel<double>& model, const std::string& path) {
    nlohmann::json j{{"kind", "ridge_model"},
                     {"kernel", detail::spec_to_json(model.spec)},
                     {"ridge_lambda", model.ridge_lambda},
                     {"seed", model.seed},
                     {"hash", model.hash},
                     {"coefficients", detail::to_std(model.coefficients)}};
    detail::save_json(j, path, "ridge model");
}

inline RidgeModel<double> load_ridge_model(const std::string& path) {
    const nlohmann::json j = detail::load_json(path, "ridge model");
    detail::expect_kind(j, "ridge_model", path);
    RidgeModel<double> model;
    model.spec = detail::spec_from_json(j.at("kernel"));
    model.ridge_lambda = j.at("ridge_lambda").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.hash = j.at("hash").get<std::uint64_t>();
    model.coefficients = detail::to_eigen(j.at("coefficients").get<std::vector<double>>());
    if (model.hash != spec_hash(model.spec, model.seed, model.feature_count()))
        throw ParseError("ridge model '" + path + "' fails its hash check");
    return model;
}

/// Everything needed to re-embed new inputs and apply a grouped model.
struct MklArtifact {
    std::vector<KernelSpec<double>> specs;
    std::vector<GroupRange> input_columns;
    std::vector<GroupRange> groups;
    std::uint64_t seed = 0;
    double lambda = 0;
    LossSpec<double> loss;
    Vector<double> weights;
    Vector<double> kernel_weight_values;
    double objective = 0;
    double kkt_residual = 0;
    int iterations = 0;
    bool converged = false;
};

inline void save_mkl_model(const GroupedLinearModel<double>& model,
                           const GroupedFeatures<double>& features,
                           const std::string& path) {
    if (model.groups.size() != features.specs.size())
        throw std::invalid_argument("save_mkl_model: model and features disagree on blocks");
    const Vector<double> kw = kernel_weights(model);
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t t = 0; t < model.groups.size(); ++t) {
        const GroupRange g = model.groups[t];
        const GroupRange c = features.input_columns[t];
        nlohmann::json b{{"kernel", detail::spec_to_json(features.specs[t])},
                         {"input_begin", c.begin},
                         {"input_size", c.size},
                         {"feature_count", g.size},
                         {"weights", detail::to_std(
                                         Vector<double>(model.weights.segment(g.begin, g.size)))},
                         {"kernel_weight", kw[static_cast<Index>(t)]}};
        blocks.push_back(std::move(b));
    }
    nlohmann::json j{{"kind", "mkl_model"},
                     {"seed", features.seed},
                     {"lambda", model.lambda},
                     {"loss", detail::loss_to_json(model.loss)},
                     {"objective", model.objective},
                     {"kkt_residual", model.kkt_residual},
                     {"iterations", model.iterations},
                     {"converged", model.converged},
                     {"blocks", std::move(blocks)}};
    detail::save_json(j, path, "mkl model");
}

inline MklArtifact load_mkl_model(const std::string& path) {
    const nlohmann::json j = detail::load_json(path, "mkl model");
    detail::expect_kind(j, "mkl_model", path);
    MklArtifact art;
    art.seed = j.at("seed").get<std::uint64_t>();
    art.lambda = j.at("lambda").get<double>();
    art.loss = detail::loss_from_json(j.at("loss"));
    art.objective = j.at("objective").get<double>();
    art.kkt_residual = j.at("kkt_residual").get<double>();
    art.iterations = j.at("iterations").get<int>();
    art.converged = j.at("converged").get<bool>();

    const auto& blocks = j.at("blocks");
    if (!blocks.is_array() || blocks.empty())
        throw ParseError("mkl model '" + path + "' has no blocks");
    Index total = 0;
    for (const auto& b : blocks) total += b.at("feature_count").get<Index>();
    art.weights.resize(total);
    art.kernel_weight_values.resize(static_cast<Index>(blocks.size()));

    Index offset = 0;
    Index t = 0;
    for (const auto& b : blocks) {
        art.specs.push_back(detail::spec_from_json(b.at("kernel")));
        art.input_columns.push_back(
            GroupRange{b.at("input_begin").get<Index>(), b.at("input_size").get<Index>()});
        const Index width = b.at("feature_count").get<Index>();
        const auto wt = b.at("weights").get<std::vector<double>>();
        if (static_cast<Index>(wt.size()) != width)
            throw ParseError("mkl model '" + path + "' block weight length mismatch");
        art.weights.segment(offset, width) = detail::to_eigen(wt);
        art.groups.push_back(GroupRange{offset, width});
        art.kernel_weight_values[t] = b.at("kernel_weight").get<double>();
        offset += width;
        ++t;
    }
    return art;
}

/// Apply a grouped model to new inputs, re-embedding block by block so no
/// more than one block of features is alive at a time.
// Rebuilds the feature matrix in the training layout and applies the weights
// in one product, so artifact predictions match training-time evaluation bit
// for bit.
inline Vector<double> predict(const MklArtifact& art, const Matrix<double>& inputs) {
    Index total = 0;
    for (const GroupRange& g : art.groups) total += g.size;
    Matrix<double> features(inputs.rows(), total);
    for (std::size_t t = 0; t < art.specs.size(); ++t) {
        const GroupRange cols = art.input_columns[t];
        const GroupRange g = art.groups[t];
        if (cols.begin < 0 || cols.begin + cols.size > inputs.cols())
            throw std::invalid_argument("predict: input is narrower than the model expects");
        const Matrix<double> sub = inputs.middleCols(cols.begin, cols.size);
        const BaseSample<double> base = sample_base<double>(
            cols.size, g.size, art.seed + static_cast<std::uint64_t>(t));
        features.middleCols(g.begin, g.size) = embed(sub, art.specs[t], base).values;
    }
    return features * art.weights;
}

}  // namespace fkl
