#pragma once

#include "fkl/quantile.hpp"
#include "fkl/random.hpp"
#include "fkl/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace fkl {

/// Frozen per-frequency uniforms and phases.  Hyperparameters enter through
/// the quantile reparameterization gamma = sigma * h(omega), so the same
/// base sample serves every sigma without resampling; that is what makes
/// the hyperparameter objective differentiable in sigma.
template <typename Scalar = double>
struct BaseSample {
    Matrix<Scalar> uniforms;  // feature_count x input_dim, strictly inside (0, 1)
    Vector<Scalar> phases;    // feature_count, in [0, 1); multiplied by 2*pi when used
    std::uint64_t seed = 0;

    Index feature_count() const { return uniforms.rows(); }
    Index input_dim() const { return uniforms.cols(); }
};

// Uniforms at exactly 0 or 1 map to infinite frequencies; clamping this far
// out changes nothing at double precision but keeps the quantiles finite.
inline constexpr double kUniformMargin = 1e-12;

/// Draw the frozen base sample.  Fill order (uniforms row by row, then
/// phases) is part of the serialization contract: the same seed must
/// reproduce the same sample bit for bit on any platform.
template <typename Scalar = double>
BaseSample<Scalar> sample_base(Index input_dim, Index feature_count, std::uint64_t seed) {
    if (input_dim <= 0 || feature_count <= 0)
        throw std::invalid_argument("sample_base: dimensions must be positive");
    std::mt19937_64 engine(seed);
    BaseSample<Scalar> base;
    base.seed = seed;
    base.uniforms.resize(feature_count, input_dim);
    for (Index j = 0; j < feature_count; ++j)
        for (Index i = 0; i < input_dim; ++i) {
            double u = uniform_unit(engine);
            if (u < kUniformMargin) u = kUniformMargin;
            if (u > 1.0 - kUniformMargin) u = 1.0 - kUniformMargin;
            base.uniforms(j, i) = static_cast<Scalar>(u);
        }
    base.phases.resize(feature_count);
    for (Index j = 0; j < feature_count; ++j)
        base.phases[j] = static_cast<Scalar>(uniform_unit(engine));
    return base;
}

namespace detail {

template <typename Scalar>
void check_compatible(const KernelSpec<Scalar>& spec, const BaseSample<Scalar>& base) {
    validate(spec);
    if (base.input_dim() != spec.input_dim())
        throw std::invalid_argument("base sample input dim does not match kernel spec");
}

/// Quantiles h(omega) without the sigma scaling, feature_count x input_dim.
template <typename Scalar>
Matrix<Scalar> unscaled_frequencies(KernelFamily family, const Matrix<Scalar>& uniforms) {
    Matrix<Scalar> h(uniforms.rows(), uniforms.cols());
    for (Index j = 0; j < uniforms.rows(); ++j)
        for (Index i = 0; i < uniforms.cols(); ++i)
            h(j, i) = quantile<Scalar>(family, uniforms(j, i));
    return h;
}

/// Family input transform: identity for gaussian, log(x + c) for the skewed
/// families.  Throws domain_error when a skewed input leaves the log domain.
template <typename Scalar>
Matrix<Scalar> transform_inputs(const Matrix<Scalar>& inputs, KernelFamily family,
                                Scalar skew_offset) {
    if (!is_skewed(family)) return inputs;
    if (!(inputs.array() > -skew_offset).all())
        throw std::domain_error("skewed kernel input: x + c must be positive");
    return (inputs.array() + skew_offset).log().matrix();
}

}  // namespace detail

/// Sampled frequency matrix gamma(j, i) = sigma(i) * h(omega(j, i)).
template <typename Scalar = double>
Matrix<Scalar> materialize_frequencies(const KernelSpec<Scalar>& spec,
                                       const BaseSample<Scalar>& base) {
    detail::check_compatible(spec, base);
    Matrix<Scalar> gamma = detail::unscaled_frequencies(spec.family, base.uniforms);
    gamma.array().rowwise() *= spec.sigma.transpose().array();
    return gamma;
}

/// Row-wise random Fourier features with the identifier of the generating
/// spec and base sample.  Entries are bounded by the cosine scale
/// sqrt(2 / feature_count).
template <typename Scalar = double>
struct FeatureMatrix {
    Matrix<Scalar> values;  // one row per input row
    std::uint64_t spec_hash = 0;
};

/// Feature matrix plus the intermediates the hyperparameter derivative
/// needs.  Cached so the optimizer pays for sines once per sigma, not once
/// per component of the gradient.
template <typename Scalar = double>
struct Embedding {
    FeatureMatrix<Scalar> features;
    Matrix<Scalar> sines;        // sin of the projection angles
    Matrix<Scalar> transformed;  // inputs after the family transform
    Matrix<Scalar> unscaled;     // h(omega), without sigma
    Scalar scale = Scalar(0);    // sqrt(2 / feature_count)

    /// d features / d sigma(i):
    /// entry (k, j) = -scale * t(x_k)_i * h(omega_{j,i}) * sin(angle_{k,j}).
    Matrix<Scalar> derivative(Index i) const {
        if (i < 0 || i >= unscaled.cols())
            throw std::out_of_range("Embedding::derivative: hyperparameter index");
        return (-scale) *
               (transformed.col(i) * unscaled.col(i).transpose()).cwiseProduct(sines);
    }
};

template <typename Scalar = double>
Embedding<Scalar> embed_full(const Matrix<Scalar>& inputs, const KernelSpec<Scalar>& spec,
                             const BaseSample<Scalar>& base) {
    detail::check_compatible(spec, base);
    if (inputs.cols() != spec.input_dim())
        throw std::invalid_argument("embed: input columns do not match kernel spec");

    Embedding<Scalar> emb;
    emb.transformed = detail::transform_inputs(inputs, spec.family, spec.skew_offset);
    emb.unscaled = detail::unscaled_frequencies(spec.family, base.uniforms);
    emb.scale = std::sqrt(Scalar(2) / Scalar(base.feature_count()));

    Matrix<Scalar> gamma = emb.unscaled;
    gamma.array().rowwise() *= spec.sigma.transpose().array();

    // angles = t(X) gamma^T + 2 pi b^T; row-blocked products are bit
    // identical to the full product, so splitting rows across workers
    // cannot change the result.
    Matrix<Scalar> angles = emb.transformed * gamma.transpose();
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    angles.array().rowwise() += (two_pi * base.phases).transpose().array();

    emb.features.values = emb.scale * angles.array().cos().matrix();
    emb.features.spec_hash = spec_hash(spec, base.seed, base.feature_count());
    emb.sines = angles.array().sin().matrix();
    return emb;
}

/// Features only; skips the derivative intermediates.
template <typename Scalar = double>
FeatureMatrix<Scalar> embed(const Matrix<Scalar>& inputs, const KernelSpec<Scalar>& spec,
                            const BaseSample<Scalar>& base) {
    detail::check_compatible(spec, base);
    if (inputs.cols() != spec.input_dim())
        throw std::invalid_argument("embed: input columns do not match kernel spec");

    const Matrix<Scalar> transformed =
        detail::transform_inputs(inputs, spec.family, spec.skew_offset);
    Matrix<Scalar> gamma = detail::unscaled_frequencies(spec.family, base.uniforms);
    gamma.array().rowwise() *= spec.sigma.transpose().array();

    Matrix<Scalar> angles = transformed * gamma.transpose();
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    angles.array().rowwise() += (two_pi * base.phases).transpose().array();

    const Scalar scale = std::sqrt(Scalar(2) / Scalar(base.feature_count()));
    FeatureMatrix<Scalar> out;
    out.values = scale * angles.array().cos().matrix();
    out.spec_hash = spec_hash(spec, base.seed, base.feature_count());
    return out;
}

/// Derivative of the feature matrix with respect to sigma(i) alone.
template <typename Scalar = double>
Matrix<Scalar> embed_derivative(const Matrix<Scalar>& inputs, const KernelSpec<Scalar>& spec,
                                const BaseSample<Scalar>& base, Index i) {
    Embedding<Scalar> emb = embed_full(inputs, spec, base);
    return emb.derivative(i);
}

}  // namespace fkl
