#pragma once

#include "fkl/losses.hpp"
#include "fkl/mkl.hpp"
#include "fkl/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fkl {

struct GmklOptions {
    int max_iterations = 2000;
    double rel_tol = 1e-10;            // relative change of the substituted objective
    double freeze_tol = 1e-12;         // kernel scale below this is pinned to zero
    double newton_tol = 1e-9;          // gradient norm target of the inner solver
    int newton_max_iterations = 50;
    Index max_rows = 2000;             // Gram matrices are materialized: quadratic memory
};

template <typename Scalar = double>
struct GmklResult {
    Vector<Scalar> kernel_scales;  // d_t, one per block
    Vector<Scalar> weights;        // concatenated block weights, feature coordinates
    Vector<Scalar> dual;           // representer coefficients of the final inner solve
    Scalar objective = std::numeric_limits<Scalar>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/// Inner weight step of the alternating scheme, in representer
/// coordinates: minimize  alpha^T K_d alpha / 2 + C sum_i l(y_i, (K_d alpha)_i).
/// Quadratic loss has the closed form (K_d + I/C) alpha = y; otherwise a
/// damped Newton iteration with Armijo line search, warm-started from the
/// previous outer round.
template <typename Scalar>
void gmkl_weight_step(const Matrix<Scalar>& Kd, const Vector<Scalar>& y, Scalar C,
                      const LossSpec<Scalar>& loss, const GmklOptions& options,
                      Vector<Scalar>& alpha) {
    if (loss.kind == LossKind::quadratic) {
        Matrix<Scalar> A = Kd;
        A.diagonal().array() += Scalar(1) / C;
        alpha = Eigen::LLT<Matrix<Scalar>>(A).solve(y);
        return;
    }

    const Scalar tol = static_cast<Scalar>(options.newton_tol) *
                       std::max(Scalar(1), y.norm());
    const Scalar damp = Scalar(1e-10) * (Scalar(1) + Kd.diagonal().mean());

    auto objective = [&](const Vector<Scalar>& a) {
        const Vector<Scalar> f = Kd * a;
        return Scalar(0.5) * a.dot(f) + C * total_loss(loss, y, f);
    };

    Vector<Scalar> f = Kd * alpha;
    for (int it = 0; it < options.newton_max_iterations; ++it) {
        const Vector<Scalar> g = loss_gradient(loss, y, f);
        const Vector<Scalar> grad = Kd * (alpha + C * g);
        if (grad.norm() <= tol) return;

        const Vector<Scalar> curv = loss_curvatures(loss, y, f);
        Matrix<Scalar> H = Kd + C * (Kd * curv.asDiagonal() * Kd);
        H.diagonal().array() += damp;
        Eigen::LLT<Matrix<Scalar>> llt(H);
        const Vector<Scalar> dir = llt.info() == Eigen::Success
                                       ? Vector<Scalar>(-llt.solve(grad))
                                       : Vector<Scalar>(-Eigen::LDLT<Matrix<Scalar>>(H).solve(grad));

        const Scalar slope = grad.dot(dir);
        if (!(slope < Scalar(0))) return;  // numerically flat; alpha is as good as it gets
        const Scalar base = Scalar(0.5) * alpha.dot(f) + C * total_loss(loss, y, f);
        Scalar s = Scalar(1);
        for (int bt = 0; bt < 40; ++bt) {
            if (objective((alpha + s * dir).eval()) <= base + Scalar(1e-4) * s * slope) break;
            s *= Scalar(0.5);
        }
        alpha += s * dir;
        f = Kd * alpha;
    }
}

}  // namespace detail

/// Reference multiple kernel learner: alternating minimization of the
/// substituted objective
///   sum_t ||w_t||^2 / (2 d_t) + C sum_i l(y_i, f_i) + sum_t d_t
/// with the weight step run through materialized per-block Gram matrices
/// (the quadratic-memory path) and the scale step in closed form
/// d_t = ||w_t|| / sqrt(2).  At lambda = sqrt(2) / C its optimum matches
/// the group-lasso model: objective / C equals the group-lasso objective
/// and the kernel scales equal the recovered kernel weights.
template <typename Scalar = double>
GmklResult<Scalar> gmkl_reference(const GroupedFeatures<Scalar>& gf, const Vector<Scalar>& y,
                                  Scalar C, const LossSpec<Scalar>& loss,
                                  const GmklOptions& options = {}) {
    validate(loss);
    if (!(C > Scalar(0)))
        throw std::invalid_argument("gmkl_reference: C must be positive");
    if (gf.values.rows() != y.size())
        throw std::invalid_argument("gmkl_reference: targets do not match feature rows");
    if (gf.values.rows() > options.max_rows)
        throw std::invalid_argument(
            "gmkl_reference: instance too large for the quadratic-memory reference path");

    const Index N = y.size();
    const Index r = gf.block_count();
    const Scalar sqrt2 = std::numbers::sqrt2_v<Scalar>;

    // per-block Grams; this quadratic cost in N is intentional, it is what
    // the scaling benchmark measures against the feature-space solver
    std::vector<Matrix<Scalar>> K(static_cast<std::size_t>(r));
    for (Index t = 0; t < r; ++t)
        K[static_cast<std::size_t>(t)] = gf.block(t) * gf.block(t).transpose();

    GmklResult<Scalar> result;
    Vector<Scalar> d = Vector<Scalar>::Ones(r);
    Vector<Scalar> alpha = Vector<Scalar>::Zero(N);
    Vector<Scalar> w = Vector<Scalar>::Zero(gf.values.cols());

    Scalar objective =
        C * total_loss(loss, y, Vector<Scalar>(Vector<Scalar>::Zero(N))) + d.sum();

    for (int it = 0; it < options.max_iterations; ++it) {
        for (Index t = 0; t < r; ++t)
            if (d[t] < static_cast<Scalar>(options.freeze_tol)) d[t] = Scalar(0);

        Matrix<Scalar> Kd = Matrix<Scalar>::Zero(N, N);
        for (Index t = 0; t < r; ++t)
            if (d[t] > Scalar(0)) Kd += d[t] * K[static_cast<std::size_t>(t)];

        detail::gmkl_weight_step(Kd, y, C, loss, options, alpha);

        Scalar norm_sum = Scalar(0);
        for (Index t = 0; t < r; ++t) {
            auto wt = w.segment(gf.groups[t].begin, gf.groups[t].size);
            if (d[t] > Scalar(0)) {
                wt = d[t] * (gf.block(t).transpose() * alpha);
                const Scalar n = wt.norm();
                norm_sum += n;
                d[t] = n / sqrt2;  // closed-form scale step
            } else {
                wt.setZero();
            }
        }

        const Vector<Scalar> f = Kd * alpha;  // unchanged by the scale step
        const Scalar updated = sqrt2 * norm_sum + C * total_loss(loss, y, f);
        ++result.iterations;

        const Scalar relchange =
            std::abs(objective - updated) / std::max(Scalar(1), std::abs(objective));
        objective = updated;
        if (relchange < static_cast<Scalar>(options.rel_tol)) {
            result.converged = true;
            break;
        }
    }

    result.kernel_scales = d;
    result.weights = w;
    result.dual = alpha;
    result.objective = objective;
    return result;
}

}  // namespace fkl
