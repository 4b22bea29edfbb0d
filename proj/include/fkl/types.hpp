#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fkl {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class KernelFamily { gaussian, skewed_chi2, skewed_intersection };

inline const char* family_name(KernelFamily family) {
    switch (family) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::skewed_chi2: return "skewed_chi2";
        case KernelFamily::skewed_intersection: return "skewed_intersection";
    }
    throw std::invalid_argument("family_name: unknown kernel family");
}

inline KernelFamily family_from_name(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "skewed_chi2") return KernelFamily::skewed_chi2;
    if (name == "skewed_intersection") return KernelFamily::skewed_intersection;
    throw std::invalid_argument("unknown kernel family '" + name + "'");
}

/// The skewed families act on log-shifted histogram inputs; the gaussian
/// family acts on raw inputs.
inline bool is_skewed(KernelFamily family) {
    return family != KernelFamily::gaussian;
}

/// A kernel family together with its hyperparameters: one frequency scale
/// per input dimension and, for the skewed families, the offset of the
/// log transform applied to inputs.  Larger sigma spreads the sampled
/// frequencies wider and therefore narrows the kernel.
template <typename Scalar = double>
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    Vector<Scalar> sigma;              // strictly positive, length = input dim
    Scalar skew_offset = Scalar(0.1);  // c >= 0; ignored by gaussian

    Index input_dim() const { return sigma.size(); }
};

template <typename Scalar>
void validate(const KernelSpec<Scalar>& spec) {
    if (spec.sigma.size() == 0)
        throw std::invalid_argument("KernelSpec: sigma must be non-empty");
    if (!(spec.sigma.array() > Scalar(0)).all())
        throw std::invalid_argument("KernelSpec: sigma must be strictly positive");
    if (!(spec.skew_offset >= Scalar(0)))
        throw std::invalid_argument("KernelSpec: skew offset must be nonnegative");
}

/// Contiguous half-open column range [begin, begin + size).
struct GroupRange {
    Index begin = 0;
    Index size = 0;
};

namespace detail {

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t h) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_begin() { return 0xcbf29ce484222325ull; }

}  // namespace detail

/// Identifier tying a feature matrix to the spec and base sample that
/// generated it.  Stable across runs; used to reject mismatched artifacts.
template <typename Scalar>
std::uint64_t spec_hash(const KernelSpec<Scalar>& spec, std::uint64_t seed,
                        Index feature_count) {
    std::uint64_t h = detail::fnv1a_begin();
    const int fam = static_cast<int>(spec.family);
    h = detail::fnv1a_bytes(&fam, sizeof fam, h);
    const double c = static_cast<double>(spec.skew_offset);
    h = detail::fnv1a_bytes(&c, sizeof c, h);
    for (Index i = 0; i < spec.sigma.size(); ++i) {
        const double s = static_cast<double>(spec.sigma[i]);
        h = detail::fnv1a_bytes(&s, sizeof s, h);
    }
    h = detail::fnv1a_bytes(&seed, sizeof seed, h);
    const std::int64_t d = feature_count;
    h = detail::fnv1a_bytes(&d, sizeof d, h);
    return h;
}

}  // namespace fkl
