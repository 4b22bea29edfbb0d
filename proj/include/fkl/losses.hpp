#pragma once

#include "fkl/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fkl {

/// softplus(z) = log(1 + e^z) without overflow at either tail.
template <typename Scalar>
Scalar softplus(Scalar z) {
    return std::max(z, Scalar(0)) + std::log1p(std::exp(-std::abs(z)));
}

/// logistic(z) = 1 / (1 + e^{-z}), evaluated from the safe tail.
template <typename Scalar>
Scalar logistic(Scalar z) {
    if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
    const Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
}

/// Smoothed epsilon-insensitive loss.  sharpness (gamma) controls how
/// closely it tracks the hinge max(0, |f - y| - epsilon); the gap is at
/// most 2 log(2) / gamma everywhere, and the subtraction of the constant
/// 2 softplus(-gamma epsilon) / gamma zeroes the loss at f == y.
template <typename Scalar = double>
Scalar igll_loss(Scalar y, Scalar f, Scalar epsilon, Scalar sharpness) {
    const Scalar d = f - y;
    return (softplus(sharpness * (d - epsilon)) + softplus(sharpness * (-d - epsilon)) -
            Scalar(2) * softplus(-sharpness * epsilon)) /
           sharpness;
}

/// Derivative of igll_loss in f; lies in (-1, 1).
template <typename Scalar = double>
Scalar igll_gradient(Scalar y, Scalar f, Scalar epsilon, Scalar sharpness) {
    const Scalar d = f - y;
    return logistic(sharpness * (d - epsilon)) - logistic(sharpness * (-d - epsilon));
}

/// Second derivative of igll_loss in f; nonnegative, bounded by sharpness / 2.
template <typename Scalar = double>
Scalar igll_curvature(Scalar y, Scalar f, Scalar epsilon, Scalar sharpness) {
    const Scalar d = f - y;
    const Scalar s1 = logistic(sharpness * (d - epsilon));
    const Scalar s2 = logistic(sharpness * (-d - epsilon));
    return sharpness * (s1 * (Scalar(1) - s1) + s2 * (Scalar(1) - s2));
}

enum class LossKind { quadratic, epsilon_igll };

inline const char* loss_name(LossKind kind) {
    return kind == LossKind::quadratic ? "quadratic" : "epsilon_igll";
}

inline LossKind loss_from_name(const std::string& name) {
    if (name == "quadratic") return LossKind::quadratic;
    if (name == "epsilon_igll") return LossKind::epsilon_igll;
    throw std::invalid_argument("unknown loss '" + name + "'");
}

template <typename Scalar = double>
struct LossSpec {
    LossKind kind = LossKind::epsilon_igll;
    Scalar epsilon = Scalar(0.1);   // dead zone half-width
    Scalar sharpness = Scalar(10);  // gamma; larger hugs the hinge tighter
};

template <typename Scalar>
void validate(const LossSpec<Scalar>& loss) {
    if (!(loss.epsilon >= Scalar(0)))
        throw std::invalid_argument("LossSpec: epsilon must be nonnegative");
    if (loss.kind == LossKind::epsilon_igll && !(loss.sharpness > Scalar(0)))
        throw std::invalid_argument("LossSpec: sharpness must be positive");
}

template <typename Scalar>
Scalar loss_value(const LossSpec<Scalar>& loss, Scalar y, Scalar f) {
    if (loss.kind == LossKind::quadratic) {
        const Scalar d = f - y;
        return Scalar(0.5) * d * d;
    }
    return igll_loss(y, f, loss.epsilon, loss.sharpness);
}

template <typename Scalar>
Scalar loss_derivative(const LossSpec<Scalar>& loss, Scalar y, Scalar f) {
    if (loss.kind == LossKind::quadratic) return f - y;
    return igll_gradient(y, f, loss.epsilon, loss.sharpness);
}

template <typename Scalar>
Scalar loss_curvature(const LossSpec<Scalar>& loss, Scalar y, Scalar f) {
    if (loss.kind == LossKind::quadratic) return Scalar(1);
    return igll_curvature(y, f, loss.epsilon, loss.sharpness);
}

template <typename Scalar>
Scalar total_loss(const LossSpec<Scalar>& loss, const Vector<Scalar>& y,
                  const Vector<Scalar>& f) {
    if (y.size() != f.size())
        throw std::invalid_argument("total_loss: length mismatch");
    Scalar sum = Scalar(0);
    for (Index i = 0; i < y.size(); ++i) sum += loss_value(loss, y[i], f[i]);
    return sum;
}

template <typename Scalar>
Vector<Scalar> loss_gradient(const LossSpec<Scalar>& loss, const Vector<Scalar>& y,
                             const Vector<Scalar>& f) {
    if (y.size() != f.size())
        throw std::invalid_argument("loss_gradient: length mismatch");
    Vector<Scalar> g(y.size());
    for (Index i = 0; i < y.size(); ++i) g[i] = loss_derivative(loss, y[i], f[i]);
    return g;
}

template <typename Scalar>
Vector<Scalar> loss_curvatures(const LossSpec<Scalar>& loss, const Vector<Scalar>& y,
                               const Vector<Scalar>& f) {
    if (y.size() != f.size())
        throw std::invalid_argument("loss_curvatures: length mismatch");
    Vector<Scalar> c(y.size());
    for (Index i = 0; i < y.size(); ++i) c[i] = loss_curvature(loss, y[i], f[i]);
    return c;
}

}  // namespace fkl
