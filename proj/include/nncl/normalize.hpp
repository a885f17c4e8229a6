#pragma once

#include "nncl/types.hpp"

#include <cmath>
#include <utility>

namespace nncl {

/// Per-instance statistics plus the affine used when the instance was
/// normalized; denormalize() must see the same record.
template <typename Scalar>
struct RevinState {
    Scalar mean = 0;
    Scalar std = 1; // sqrt(population variance + epsilon)
    Scalar epsilon = Scalar(1e-5);
    Scalar gamma = 1;
    Scalar beta = 0;
};

/// Reversible instance normalization of one univariate window. The mean and
/// standard deviation are constants of the instance: no gradient flows
/// through them.
template <typename Derived, typename Scalar = typename Derived::Scalar>
std::pair<Vector<Scalar>, RevinState<Scalar>>
normalize(const Eigen::MatrixBase<Derived>& x, Scalar gamma = 1, Scalar beta = 0,
          Scalar epsilon = Scalar(1e-5))
{
    require(x.size() >= 1, "normalize: empty window");
    require(epsilon > 0, "normalize: epsilon must be positive");
    require(x.allFinite(), "normalize: non-finite input");
    RevinState<Scalar> state;
    state.mean = x.mean();
    const Scalar var = (x.array() - state.mean).square().mean();
    state.std = std::sqrt(var + epsilon);
    state.epsilon = epsilon;
    state.gamma = gamma;
    state.beta = beta;
    Vector<Scalar> out = (gamma * (x.array() - state.mean) / state.std + beta).matrix();
    return {std::move(out), state};
}

template <typename Scalar, typename Derived>
Vector<Scalar> denormalize(const Eigen::MatrixBase<Derived>& y, const RevinState<Scalar>& state)
{
    require(state.gamma != Scalar(0), "denormalize: gamma = 0 makes the affine non-invertible");
    return ((y.array() - state.beta) / state.gamma * state.std + state.mean).matrix();
}

/// Accumulates dL/dgamma and dL/dbeta given dL/d(normalized input).
template <typename Scalar, typename D1, typename D2>
void normalize_backward(const Eigen::MatrixBase<D1>& x, const RevinState<Scalar>& state,
                        const Eigen::MatrixBase<D2>& grad_out, Scalar& grad_gamma,
                        Scalar& grad_beta)
{
    grad_gamma += (grad_out.array() * (x.array() - state.mean) / state.std).sum();
    grad_beta += grad_out.sum();
}

/// Backward of denormalize(y). Returns dL/dy and accumulates the affine
/// gradients.
template <typename Scalar, typename D1, typename D2>
Vector<Scalar> denormalize_backward(const Eigen::MatrixBase<D1>& y,
                                    const RevinState<Scalar>& state,
                                    const Eigen::MatrixBase<D2>& grad_out, Scalar& grad_gamma,
                                    Scalar& grad_beta)
{
    const Scalar scale = state.std / state.gamma;
    grad_gamma -= (grad_out.array() * (y.array() - state.beta)).sum() * scale / state.gamma;
    grad_beta -= grad_out.sum() * scale;
    return (grad_out * scale).eval();
}

} // namespace nncl
