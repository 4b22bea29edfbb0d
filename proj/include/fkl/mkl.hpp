#pragma once

#include "fkl/feature_map.hpp"
#include "fkl/losses.hpp"
#include "fkl/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fkl {

/// Column-concatenated feature blocks, one block per candidate kernel.
/// Block t is embedded with its own base sample drawn from seed + t, so the
/// blocks are statistically independent draws.
template <typename Scalar = double>
struct GroupedFeatures {
    Matrix<Scalar> values;
    std::vector<GroupRange> groups;          // feature-column block t
    std::vector<KernelSpec<Scalar>> specs;   // kernel behind block t
    std::vector<GroupRange> input_columns;   // dataset columns block t embeds
    std::uint64_t seed = 0;

    Index block_count() const { return static_cast<Index>(groups.size()); }

    auto block(Index t) const {
        return values.middleCols(groups[t].begin, groups[t].size);
    }
};

/// Embed every candidate kernel and concatenate the blocks.  When
/// input_columns is empty each kernel reads the full input width;
/// otherwise block t embeds the given column range, which is how per-group
/// descriptors (several histograms side by side) are wired in.
template <typename Scalar = double>
GroupedFeatures<Scalar> build_grouped_features(
    const Matrix<Scalar>& inputs, const std::vector<KernelSpec<Scalar>>& specs,
    Index features_per_block, std::uint64_t seed,
    std::vector<GroupRange> input_columns = {}) {
    if (specs.empty())
        throw std::invalid_argument("build_grouped_features: need at least one kernel");
    if (features_per_block <= 0)
        throw std::invalid_argument("build_grouped_features: features_per_block must be positive");
    if (input_columns.empty())
        input_columns.assign(specs.size(), GroupRange{0, inputs.cols()});
    if (input_columns.size() != specs.size())
        throw std::invalid_argument("build_grouped_features: one column range per kernel");

    const Index r = static_cast<Index>(specs.size());
    GroupedFeatures<Scalar> gf;
    gf.specs = specs;
    gf.input_columns = std::move(input_columns);
    gf.seed = seed;
    gf.values.resize(inputs.rows(), r * features_per_block);
    gf.groups.reserve(specs.size());

    for (Index t = 0; t < r; ++t) {
        const GroupRange cols = gf.input_columns[t];
        if (cols.begin < 0 || cols.size <= 0 || cols.begin + cols.size > inputs.cols())
            throw std::invalid_argument("build_grouped_features: column range outside input");
        if (specs[t].input_dim() != cols.size)
            throw std::invalid_argument(
                "build_grouped_features: kernel sigma length does not match its columns");
        const Matrix<Scalar> sub = inputs.middleCols(cols.begin, cols.size);
        const BaseSample<Scalar> base =
            sample_base<Scalar>(cols.size, features_per_block, seed + static_cast<std::uint64_t>(t));
        gf.values.middleCols(t * features_per_block, features_per_block) =
            embed(sub, specs[t], base).values;
        gf.groups.push_back(GroupRange{t * features_per_block, features_per_block});
    }
    return gf;
}

template <typename Scalar>
Scalar group_norm_sum(const Vector<Scalar>& w, const std::vector<GroupRange>& groups) {
    Scalar sum = Scalar(0);
    for (const GroupRange& g : groups) sum += w.segment(g.begin, g.size).norm();
    return sum;
}

/// Proximal operator of tau * sum of group norms: each block shrinks
/// toward zero by tau in norm and lands exactly on zero once its norm is
/// at most tau.  This is where the block sparsity comes from.
template <typename Scalar = double>
Vector<Scalar> block_prox(const Vector<Scalar>& w, const std::vector<GroupRange>& groups,
                          Scalar tau) {
    if (!(tau >= Scalar(0)))
        throw std::invalid_argument("block_prox: tau must be nonnegative");
    Vector<Scalar> out = w;
    for (const GroupRange& g : groups) {
        auto seg = out.segment(g.begin, g.size);
        const Scalar n = seg.norm();
        if (n <= tau)
            seg.setZero();
        else
            seg *= (Scalar(1) - tau / n);
    }
    return out;
}

template <typename Scalar = double>
Scalar group_lasso_objective(const GroupedFeatures<Scalar>& gf, const Vector<Scalar>& y,
                             const Vector<Scalar>& w, Scalar lambda,
                             const LossSpec<Scalar>& loss) {
    const Vector<Scalar> f = gf.values * w;
    return lambda * group_norm_sum(w, gf.groups) + total_loss(loss, y, f);
}

/// Smallest lambda that forces every block to zero: the largest block norm
/// of the loss gradient pulled back through the features at w = 0.
template <typename Scalar = double>
Scalar group_lasso_lambda_max(const GroupedFeatures<Scalar>& gf, const Vector<Scalar>& y,
                              const LossSpec<Scalar>& loss) {
    const Vector<Scalar> g0 =
        loss_gradient(loss, y, Vector<Scalar>(Vector<Scalar>::Zero(y.size())));
    Scalar lm = Scalar(0);
    for (Index t = 0; t < gf.block_count(); ++t)
        lm = std::max(lm, (gf.block(t).transpose() * g0).norm());
    return lm;
}

/// Scaled violation of the group-lasso optimality conditions at w; at most
/// kkt_tol for a solution.  Zero blocks require the gradient block norm to
/// stay within lambda (violation measured relative to lambda); active
/// blocks require gradient plus lambda * w_t / ||w_t|| to vanish
/// (violation measured relative to the full gradient norm).
template <typename Scalar = double>
Scalar group_lasso_kkt_residual(const GroupedFeatures<Scalar>& gf, const Vector<Scalar>& y,
                                const Vector<Scalar>& w, Scalar lambda,
                                const LossSpec<Scalar>& loss) {
    const Vector<Scalar> f = gf.values * w;
    const Vector<Scalar> g = gf.values.transpose() * loss_gradient(loss, y, f);
    const Scalar gref = std::max(Scalar(1), g.norm());
    Scalar violation = Scalar(0);
    for (const GroupRange& range : gf.groups) {
        const auto wt = w.segment(range.begin, range.size);
        const auto gt = g.segment(range.begin, range.size);
        const Scalar wn = wt.norm();
        if (wn == Scalar(0)) {
            const Scalar denom = lambda > Scalar(0) ? lambda : gref;
            violation = std::max(violation, (gt.norm() - lambda) / denom);
        } else {
            violation = std::max(violation, (gt + (lambda / wn) * wt).norm() / gref);
        }
    }
    return std::max(violation, Scalar(0));
}

struct GroupLassoOptions {
    int max_iterations = 5000;
    double rel_tol = 1e-8;   // relative objective change that triggers the KKT check
    double kkt_tol = 1e-5;
    double initial_step = 1.0;
    int max_backtracks = 60;
    bool use_momentum = true;  // plain proximal gradient when false
};

template <typename Scalar = double>
struct GroupedLinearModel {
    Vector<Scalar> weights;
    std::vector<GroupRange> groups;
    Scalar lambda = Scalar(0);
    LossSpec<Scalar> loss;
    Scalar objective = std::numeric_limits<Scalar>::quiet_NaN();
    Scalar kkt_residual = std::numeric_limits<Scalar>::quiet_NaN();
    std::vector<Scalar> objective_history;  // one entry per accepted iterate
    int iterations = 0;
    bool converged = false;
};

/// Per-kernel weight recovered from a block: ||w_t|| / sqrt(2).
template <typename Scalar = double>
Vector<Scalar> kernel_weights(const Vector<Scalar>& w, const std::vector<GroupRange>& groups) {
    Vector<Scalar> d(static_cast<Index>(groups.size()));
    for (std::size_t t = 0; t < groups.size(); ++t)
        d[static_cast<Index>(t)] =
            w.segment(groups[t].begin, groups[t].size).norm() / std::numbers::sqrt2_v<Scalar>;
    return d;
}

template <typename Scalar = double>
Vector<Scalar> kernel_weights(const GroupedLinearModel<Scalar>& model) {
    return kernel_weights(model.weights, model.groups);
}

/// Accelerated proximal gradient (FISTA) with backtracking on the smooth
/// part and a monotone restart: whenever the momentum point overshoots the
/// objective, momentum is dropped and the step is retaken from the last
/// iterate, so the recorded objective never increases.  Convergence
/// requires both a small relative objective change and the KKT residual
/// under kkt_tol; the latter is only evaluated once the former triggers.
template <typename Scalar = double>
GroupedLinearModel<Scalar> train_group_lasso(const GroupedFeatures<Scalar>& gf,
                                             const Vector<Scalar>& y, Scalar lambda,
                                             const LossSpec<Scalar>& loss,
                                             const GroupLassoOptions& options = {}) {
    validate(loss);
    if (!(lambda >= Scalar(0)))
        throw std::invalid_argument("train_group_lasso: lambda must be nonnegative");
    if (gf.values.rows() != y.size())
        throw std::invalid_argument("train_group_lasso: targets do not match feature rows");
    if (gf.groups.empty())
        throw std::invalid_argument("train_group_lasso: no feature blocks");
    if (!gf.values.allFinite() || !y.allFinite())
        throw std::runtime_error("train_group_lasso: non-finite inputs");

    const Matrix<Scalar>& F = gf.values;
    const Index D = F.cols();

    GroupedLinearModel<Scalar> model;
    model.groups = gf.groups;
    model.lambda = lambda;
    model.loss = loss;

    Vector<Scalar> w = Vector<Scalar>::Zero(D);
    Vector<Scalar> w_prev = w;
    Vector<Scalar> z = w;
    Scalar momentum = Scalar(1);
    bool at_base = true;  // z == w exactly; a failed descent here is final

    Scalar objective = total_loss(loss, y, Vector<Scalar>(Vector<Scalar>::Zero(y.size())));
    model.objective_history.push_back(objective);
    Scalar step = static_cast<Scalar>(options.initial_step);

    for (int it = 0; it < options.max_iterations; ++it) {
        const Vector<Scalar> fz = F * z;
        const Vector<Scalar> gz = loss_gradient(loss, y, fz);
        const Vector<Scalar> grad = F.transpose() * gz;
        const Scalar smooth_z = total_loss(loss, y, fz);

        // shrink the step until the quadratic model majorizes the smooth part
        Vector<Scalar> candidate;
        Scalar smooth_c = Scalar(0);
        for (int bt = 0;; ++bt) {
            candidate = block_prox<Scalar>(z - step * grad, gf.groups, lambda * step);
            const Vector<Scalar> diff = candidate - z;
            smooth_c = total_loss(loss, y, (F * candidate).eval());
            const Scalar quad = smooth_z + grad.dot(diff) +
                                diff.squaredNorm() / (Scalar(2) * step);
            if (smooth_c <= quad + Scalar(1e-12) * (Scalar(1) + std::abs(smooth_z))) break;
            if (bt >= options.max_backtracks) break;
            step *= Scalar(0.5);
        }

        const Scalar candidate_objective =
            smooth_c + lambda * group_norm_sum(candidate, gf.groups);
        if (candidate_objective >
                objective + Scalar(1e-12) * (Scalar(1) + std::abs(objective)) &&
            !at_base) {
            // momentum overshoot: restart from the last iterate
            z = w;
            momentum = Scalar(1);
            at_base = true;
            continue;
        }

        const Scalar previous = objective;
        w_prev = w;
        w = candidate;
        objective = candidate_objective;
        model.objective_history.push_back(objective);
        ++model.iterations;

        if (options.use_momentum) {
            const Scalar next =
                Scalar(0.5) * (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * momentum * momentum));
            z = w + ((momentum - Scalar(1)) / next) * (w - w_prev);
            momentum = next;
            at_base = false;
        } else {
            z = w;
            at_base = true;
        }

        const Scalar relchange =
            std::abs(previous - objective) / std::max(Scalar(1), std::abs(previous));
        if (relchange < static_cast<Scalar>(options.rel_tol)) {
            const Scalar kkt = group_lasso_kkt_residual(gf, y, w, lambda, loss);
            if (kkt <= static_cast<Scalar>(options.kkt_tol)) {
                model.kkt_residual = kkt;
                model.converged = true;
                break;
            }
        }
    }

    model.weights = w;
    model.objective = objective;
    if (!model.converged)
        model.kkt_residual = group_lasso_kkt_residual(gf, y, w, lambda, loss);
    return model;
}

}  // namespace fkl
