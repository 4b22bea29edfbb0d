#pragma once

#include "fkl/feature_map.hpp"
#include "fkl/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace fkl {

/// Hyperparameter learning instance: a train split that fits the ridge
/// coefficients and a held-out split that scores sigma.
template <typename Scalar = double>
struct SklProblem {
    Matrix<Scalar> train_inputs;
    Vector<Scalar> train_targets;
    Matrix<Scalar> val_inputs;
    Vector<Scalar> val_targets;
    KernelFamily family = KernelFamily::gaussian;
    Scalar skew_offset = Scalar(0.1);
    Scalar ridge_lambda = Scalar(1);    // regularizer of the inner ridge fit
    Scalar sigma_penalty = Scalar(1e-3);  // rho, keeps sigma from drifting off
};

template <typename Scalar>
void validate(const SklProblem<Scalar>& problem) {
    if (problem.train_inputs.rows() == 0 || problem.val_inputs.rows() == 0)
        throw std::invalid_argument("SklProblem: both splits must be non-empty");
    if (problem.train_inputs.rows() != problem.train_targets.size() ||
        problem.val_inputs.rows() != problem.val_targets.size())
        throw std::invalid_argument("SklProblem: targets do not match input rows");
    if (problem.train_inputs.cols() != problem.val_inputs.cols())
        throw std::invalid_argument("SklProblem: splits disagree on input dimension");
    if (!(problem.ridge_lambda > Scalar(0)))
        throw std::invalid_argument("SklProblem: ridge lambda must be positive");
    if (!(problem.sigma_penalty >= Scalar(0)))
        throw std::invalid_argument("SklProblem: sigma penalty must be nonnegative");
}

/// Fitted single-kernel model.  The base sample is not stored; it is
/// regenerated from the seed, and the hash guards against predicting with
/// a mismatched sample.
template <typename Scalar = double>
struct RidgeModel {
    KernelSpec<Scalar> spec;
    Scalar ridge_lambda = Scalar(1);
    Vector<Scalar> coefficients;
    std::uint64_t seed = 0;
    std::uint64_t hash = 0;

    Index feature_count() const { return coefficients.size(); }
};

namespace detail {

template <typename Scalar>
struct RidgeFactor {
    Eigen::LLT<Matrix<Scalar>> llt;
    Vector<Scalar> beta;
};

/// Cholesky of Q = Phi^T Phi + lambda I plus the ridge solution.  The
/// factor is reused by every component of the hyperparameter gradient.
/// Near-singular Q (rcond below 1e-12) gets one diagonal jitter of
/// 1e-8 * trace(Q) / dim, reported on stderr.
template <typename Scalar>
RidgeFactor<Scalar> ridge_factor(const Matrix<Scalar>& phi, const Vector<Scalar>& y,
                                 Scalar lambda) {
    if (!(lambda > Scalar(0)))
        throw std::invalid_argument("solve_ridge: lambda must be positive");
    if (phi.rows() != y.size())
        throw std::invalid_argument("solve_ridge: targets do not match feature rows");
    if (!phi.allFinite() || !y.allFinite())
        throw std::runtime_error("solve_ridge: non-finite values in the system");

    const Index d = phi.cols();
    Matrix<Scalar> Q = Matrix<Scalar>::Zero(d, d);
    Q.template selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
    Q.diagonal().array() += lambda;

    RidgeFactor<Scalar> factor;
    factor.llt.compute(Q);
    if (factor.llt.info() != Eigen::Success || factor.llt.rcond() < Scalar(1e-12)) {
        const Scalar jitter = Scalar(1e-8) * Q.trace() / Scalar(d);
        Q.diagonal().array() += jitter;
        factor.llt.compute(Q);
        std::cerr << "solve_ridge: near-singular system, added jitter " << jitter << "\n";
        if (factor.llt.info() != Eigen::Success)
            throw std::runtime_error("solve_ridge: factorization failed after jitter");
    }
    factor.beta = factor.llt.solve(phi.transpose() * y);
    return factor;
}

}  // namespace detail

/// Ridge coefficients beta = (Phi^T Phi + lambda I)^{-1} Phi^T y through a
/// Cholesky solve; the normal-equation residual stays below 1e-8 relative
/// to ||Phi^T y|| for well-scaled systems.
template <typename Scalar = double>
Vector<Scalar> solve_ridge(const Matrix<Scalar>& phi, const Vector<Scalar>& y, Scalar lambda) {
    return detail::ridge_factor(phi, y, lambda).beta;
}

template <typename Scalar = double>
Vector<Scalar> solve_ridge(const FeatureMatrix<Scalar>& phi, const Vector<Scalar>& y,
                           Scalar lambda) {
    return solve_ridge(phi.values, y, lambda);
}

namespace detail {

template <typename Scalar>
struct SklEvaluation {
    Scalar objective = Scalar(0);
    Vector<Scalar> gradient;  // d objective / d sigma; empty unless requested
    Vector<Scalar> beta;
};

template <typename Scalar>
KernelSpec<Scalar> spec_at(const SklProblem<Scalar>& problem, const Vector<Scalar>& sigma) {
    KernelSpec<Scalar> spec;
    spec.family = problem.family;
    spec.sigma = sigma;
    spec.skew_offset = problem.skew_offset;
    return spec;
}

/// Held-out objective J = ||phi(U) beta - v||^2 + rho ||sigma||^2 and,
/// when requested, its analytic sigma-gradient.  The gradient threads one
/// Cholesky factor through all m components: each costs two feature
/// derivatives and one triangular solve, never a refactorization.
template <typename Scalar>
SklEvaluation<Scalar> evaluate_validation(const Vector<Scalar>& sigma,
                                          const SklProblem<Scalar>& problem,
                                          const BaseSample<Scalar>& base,
                                          bool want_gradient) {
    validate(problem);
    const KernelSpec<Scalar> spec = spec_at(problem, sigma);

    SklEvaluation<Scalar> out;
    if (!want_gradient) {
        const FeatureMatrix<Scalar> phi = embed(problem.train_inputs, spec, base);
        RidgeFactor<Scalar> factor =
            ridge_factor(phi.values, problem.train_targets, problem.ridge_lambda);
        const FeatureMatrix<Scalar> psi = embed(problem.val_inputs, spec, base);
        const Vector<Scalar> resid = psi.values * factor.beta - problem.val_targets;
        out.objective =
            resid.squaredNorm() + problem.sigma_penalty * sigma.squaredNorm();
        out.beta = std::move(factor.beta);
        return out;
    }

    const Embedding<Scalar> train = embed_full(problem.train_inputs, spec, base);
    const Embedding<Scalar> val = embed_full(problem.val_inputs, spec, base);
    const Matrix<Scalar>& Phi = train.features.values;
    const Matrix<Scalar>& Psi = val.features.values;

    RidgeFactor<Scalar> factor =
        ridge_factor(Phi, problem.train_targets, problem.ridge_lambda);
    const Vector<Scalar>& beta = factor.beta;
    const Vector<Scalar> resid = Psi * beta - problem.val_targets;
    const Vector<Scalar> phi_beta = Phi * beta;
    out.objective = resid.squaredNorm() + problem.sigma_penalty * sigma.squaredNorm();

    const Index m = sigma.size();
    out.gradient.resize(m);
    for (Index i = 0; i < m; ++i) {
        const Matrix<Scalar> Gx = train.derivative(i);
        const Matrix<Scalar> Gu = val.derivative(i);
        // d beta = Q^{-1} (Gx^T y - (Gx^T Phi + Phi^T Gx) beta), with the
        // product against beta expanded to avoid forming the d x d term
        const Vector<Scalar> rhs = Gx.transpose() * problem.train_targets -
                                   (Gx.transpose() * phi_beta + Phi.transpose() * (Gx * beta));
        const Vector<Scalar> dbeta = factor.llt.solve(rhs);
        const Vector<Scalar> dresid = Gu * beta + Psi * dbeta;
        out.gradient[i] = Scalar(2) * resid.dot(dresid) +
                          Scalar(2) * problem.sigma_penalty * sigma[i];
    }
    out.beta = std::move(factor.beta);
    return out;
}

}  // namespace detail

template <typename Scalar = double>
Scalar validation_objective(const Vector<Scalar>& sigma, const SklProblem<Scalar>& problem,
                            const BaseSample<Scalar>& base) {
    return detail::evaluate_validation(sigma, problem, base, false).objective;
}

template <typename Scalar = double>
Vector<Scalar> validation_gradient(const Vector<Scalar>& sigma,
                                   const SklProblem<Scalar>& problem,
                                   const BaseSample<Scalar>& base) {
    return detail::evaluate_validation(sigma, problem, base, true).gradient;
}

struct SklOptions {
    int max_iterations = 200;
    double rel_tol = 1e-6;      // relative objective change
    double grad_tol = 1e-8;     // norm of the log-space gradient
    double armijo = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 40;
    double initial_step = 1.0;
};

template <typename Scalar = double>
struct IterationRecord {
    Vector<Scalar> sigma;
    Scalar objective = Scalar(0);
    Scalar gradient_norm = Scalar(0);  // log-space gradient
    Scalar step = Scalar(0);
};

template <typename Scalar = double>
struct SklResult {
    Vector<Scalar> sigma;
    RidgeModel<Scalar> model;
    std::vector<IterationRecord<Scalar>> trace;
    int iterations = 0;  // accepted steps
    bool converged = false;
};

/// Gradient descent on the held-out objective in log(sigma), which keeps
/// sigma positive without constraints and equalizes scale across
/// dimensions.  Armijo backtracking makes the recorded objective sequence
/// non-increasing; the best sigma seen is what gets refit and returned.
template <typename Scalar = double>
SklResult<Scalar> learn_hyperparameters(const SklProblem<Scalar>& problem,
                                        const BaseSample<Scalar>& base,
                                        const Vector<Scalar>& sigma_init,
                                        const SklOptions& options = {}) {
    validate(problem);
    if (sigma_init.size() != problem.train_inputs.cols())
        throw std::invalid_argument("learn_hyperparameters: sigma_init has wrong length");
    if (!(sigma_init.array() > Scalar(0)).all())
        throw std::invalid_argument("learn_hyperparameters: sigma_init must be positive");
    if (options.max_iterations < 0 || !(options.initial_step > 0))
        throw std::invalid_argument("learn_hyperparameters: bad options");

    Vector<Scalar> theta = sigma_init.array().log().matrix();
    Vector<Scalar> sigma = sigma_init;

    detail::SklEvaluation<Scalar> eval =
        detail::evaluate_validation(sigma, problem, base, true);
    if (!std::isfinite(static_cast<double>(eval.objective)))
        throw std::runtime_error(
            "learn_hyperparameters: objective is not finite at sigma_init");

    SklResult<Scalar> result;
    Vector<Scalar> grad_theta = eval.gradient.cwiseProduct(sigma);  // chain rule
    result.trace.push_back({sigma, eval.objective, grad_theta.norm(), Scalar(0)});

    Vector<Scalar> best_sigma = sigma;
    Scalar best_objective = eval.objective;
    Scalar step = static_cast<Scalar>(options.initial_step);

    for (int it = 0; it < options.max_iterations; ++it) {
        const Scalar gnorm2 = grad_theta.squaredNorm();
        if (std::sqrt(gnorm2) < static_cast<Scalar>(options.grad_tol)) {
            result.converged = true;
            break;
        }

        // backtracking line search along the negative gradient
        bool accepted = false;
        Scalar trial_objective = Scalar(0);
        Vector<Scalar> trial_sigma;
        for (int bt = 0; bt <= options.max_backtracks; ++bt) {
            trial_sigma = (theta - step * grad_theta).array().exp().matrix();
            trial_objective =
                detail::evaluate_validation(trial_sigma, problem, base, false).objective;
            const Scalar target =
                eval.objective - static_cast<Scalar>(options.armijo) * step * gnorm2;
            if (std::isfinite(static_cast<double>(trial_objective)) &&
                trial_objective <= target) {
                accepted = true;
                break;
            }
            step *= static_cast<Scalar>(options.shrink);
        }
        if (!accepted) break;  // gradient no longer trustworthy at this scale

        const Scalar previous = eval.objective;
        theta = (theta - step * grad_theta).eval();
        sigma = trial_sigma;
        eval = detail::evaluate_validation(sigma, problem, base, true);
        grad_theta = eval.gradient.cwiseProduct(sigma);
        ++result.iterations;
        result.trace.push_back({sigma, eval.objective, grad_theta.norm(), step});

        if (eval.objective < best_objective) {
            best_objective = eval.objective;
            best_sigma = sigma;
        }
        if (std::abs(previous - eval.objective) <=
            static_cast<Scalar>(options.rel_tol) * std::max(Scalar(1), std::abs(previous))) {
            result.converged = true;
            break;
        }
        step = std::min(step * Scalar(2), Scalar(1e3));  // recover from cautious steps
    }

    result.sigma = best_sigma;
    const KernelSpec<Scalar> spec = detail::spec_at(problem, best_sigma);
    const FeatureMatrix<Scalar> phi = embed(problem.train_inputs, spec, base);
    result.model.spec = spec;
    result.model.ridge_lambda = problem.ridge_lambda;
    result.model.coefficients =
        detail::ridge_factor(phi.values, problem.train_targets, problem.ridge_lambda).beta;
    result.model.seed = base.seed;
    result.model.hash = spec_hash(spec, base.seed, base.feature_count());
    return result;
}

/// Apply a fitted model to new inputs.  The base sample must be the one the
/// model was trained with; the hash check enforces that.
template <typename Scalar = double>
Vector<Scalar> predict(const RidgeModel<Scalar>& model, const Matrix<Scalar>& inputs,
                       const BaseSample<Scalar>& base) {
    if (spec_hash(model.spec, base.seed, base.feature_count()) != model.hash)
        throw std::invalid_argument("predict: base sample does not match the model");
    const FeatureMatrix<Scalar> phi = embed(inputs, model.spec, base);
    return phi.values * model.coefficients;
}

/// Convenience overload that regenerates the base sample from the stored seed.
template <typename Scalar = double>
Vector<Scalar> predict(const RidgeModel<Scalar>& model, const Matrix<Scalar>& inputs) {
    const BaseSample<Scalar> base =
        sample_base<Scalar>(model.spec.input_dim(), model.feature_count(), model.seed);
    return predict(model, inputs, base);
}

}  // namespace fkl
