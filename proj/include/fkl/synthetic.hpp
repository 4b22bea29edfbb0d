#pragma once

#include "fkl/data_io.hpp"
#include "fkl/mkl.hpp"
#include "fkl/random.hpp"
#include "fkl/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fkl {

/// Recipe for a regression instance with kernel-level structure: targets
/// come from a sparse combination of feature blocks drawn with a seed the
/// learner never uses, plus gaussian noise.
struct SyntheticSpec {
    Index rows = 400;
    Index input_dim = 6;
    Index kernels = 3;
    Index features_per_block = 64;
    Index active_blocks = 2;  // leading blocks carry signal
    double noise = 0.05;
    std::uint64_t seed = 7;
};

struct SyntheticData {
    Dataset data;
    std::vector<KernelSpec<double>> specs;
    Vector<double> planted_weights;  // in the planting feature space
};

/// Kernel lineup used by synthetic instances and the benchmark: families
/// cycle through the three supported ones with per-block scale variation,
/// all reading the full input width.  Inputs are kept in [0, 1), so the
/// skewed families' log transform is always in domain at the default offset.
inline std::vector<KernelSpec<double>> synthetic_kernels(Index input_dim, Index kernels) {
    if (input_dim <= 0 || kernels <= 0)
        throw std::invalid_argument("synthetic_kernels: dimensions must be positive");
    static constexpr KernelFamily cycle[3] = {KernelFamily::gaussian,
                                              KernelFamily::skewed_chi2,
                                              KernelFamily::skewed_intersection};
    static constexpr double scales[3] = {2.0, 1.0, 1.5};
    std::vector<KernelSpec<double>> specs;
    specs.reserve(static_cast<std::size_t>(kernels));
    for (Index t = 0; t < kernels; ++t) {
        KernelSpec<double> spec;
        spec.family = cycle[t % 3];
        spec.sigma = Vector<double>::Constant(input_dim, scales[(t / 3 + t) % 3]);
        spec.skew_offset = 0.1;
        specs.push_back(std::move(spec));
    }
    return specs;
}

inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.rows < 2 || spec.input_dim <= 0 || spec.kernels <= 0 ||
        spec.features_per_block <= 0)
        throw std::invalid_argument("make_synthetic: sizes must be positive");
    if (spec.active_blocks < 1 || spec.active_blocks > spec.kernels)
        throw std::invalid_argument("make_synthetic: active_blocks out of range");

    SyntheticData out;
    out.specs = synthetic_kernels(spec.input_dim, spec.kernels);

    std::mt19937_64 engine(spec.seed);
    out.data.inputs.resize(spec.rows, spec.input_dim);
    for (Index i = 0; i < spec.rows; ++i)
        for (Index j = 0; j < spec.input_dim; ++j)
            out.data.inputs(i, j) = uniform_unit(engine);

    // the planting stream is decoupled from the learner's embedding seeds
    const std::uint64_t plant_seed = spec.seed ^ 0x9e3779b97f4a7c15ull;
    const GroupedFeatures<double> planted = build_grouped_features(
        out.data.inputs, out.specs, spec.features_per_block, plant_seed);

    std::mt19937_64 weight_engine(plant_seed ^ 0x2545f4914f6cdd1dull);
    out.planted_weights = Vector<double>::Zero(planted.values.cols());
    const double block_scale = 1.0 / std::sqrt(static_cast<double>(spec.features_per_block));
    for (Index t = 0; t < spec.active_blocks; ++t) {
        const GroupRange g = planted.groups[static_cast<std::size_t>(t)];
        for (Index k = 0; k < g.size; ++k)
            out.planted_weights[g.begin + k] = block_scale * standard_normal(weight_engine);
    }

    out.data.targets = planted.values * out.planted_weights;
    for (Index i = 0; i < spec.rows; ++i)
        out.data.targets[i] += spec.noise * standard_normal(weight_engine);
    return out;
}

}  // namespace fkl
