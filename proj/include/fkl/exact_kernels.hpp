#pragma once

#include "fkl/types.hpp"

#include <cmath>
#include <stdexcept>

namespace fkl {
namespace detail {

/// log(cosh(z)) without overflow: |z| + log1p(e^{-2|z|}) - log 2.
template <typename Scalar>
Scalar log_cosh(Scalar z) {
    const Scalar a = std::abs(z);
    return a + std::log1p(std::exp(Scalar(-2) * a)) - Scalar(0.6931471805599453);
}

}  // namespace detail

/// Closed-form kernel value for one pair.  All three families are products
/// of per-dimension factors in (0, 1]; the product is accumulated in log
/// space so high-dimensional evaluations cannot underflow pairwise.
/// Skewed families compare inputs through differences of log(x + c).
template <typename Scalar = double, typename DerivedA, typename DerivedB>
Scalar kernel_eval(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& y) {
    validate(spec);
    const Index m = spec.input_dim();
    if (x.size() != m || y.size() != m)
        throw std::invalid_argument("kernel_eval: input length does not match kernel spec");

    Scalar log_k = Scalar(0);
    for (Index i = 0; i < m; ++i) {
        const Scalar s = spec.sigma[i];
        if (spec.family == KernelFamily::gaussian) {
            const Scalar d = x(i) - y(i);
            log_k -= Scalar(0.5) * s * s * d * d;
            continue;
        }
        const Scalar xc = x(i) + spec.skew_offset;
        const Scalar yc = y(i) + spec.skew_offset;
        if (!(xc > Scalar(0)) || !(yc > Scalar(0)))
            throw std::domain_error("kernel_eval: skewed input requires x + c > 0");
        const Scalar d = std::log(xc) - std::log(yc);
        if (spec.family == KernelFamily::skewed_chi2)
            log_k -= detail::log_cosh(s * d);  // sech(s d) per dimension
        else
            log_k -= s * std::abs(d);  // exp(-s |d|) per dimension
    }
    return std::exp(log_k);
}

/// Cross Gram matrix k(X_a, Y_b).  Symmetric with unit diagonal when called
/// with the same matrix twice; positive semidefinite up to round-off.
template <typename Scalar = double>
Matrix<Scalar> gram(const KernelSpec<Scalar>& spec, const Matrix<Scalar>& X,
                    const Matrix<Scalar>& Y) {
    validate(spec);
    if (X.cols() != spec.input_dim() || Y.cols() != spec.input_dim())
        throw std::invalid_argument("gram: input columns do not match kernel spec");
    Matrix<Scalar> K(X.rows(), Y.rows());
    for (Index a = 0; a < X.rows(); ++a)
        for (Index b = 0; b < Y.rows(); ++b)
            K(a, b) = kernel_eval(spec, X.row(a).transpose(), Y.row(b).transpose());
    return K;
}

}  // namespace fkl
