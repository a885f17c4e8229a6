#pragma once

#include "nncl/types.hpp"

#include <string>

namespace nncl {

struct PatchConfig {
    Index length = 16; // C
    Index stride = 8;  // S
    Index width = 64;  // D

    void validate(Index lookback) const
    {
        require(stride >= 1 && stride <= length, "PatchConfig: need 1 <= stride <= patch length");
        require(length <= lookback, "PatchConfig: patch length " + std::to_string(length)
                                        + " exceeds look-back " + std::to_string(lookback));
        require(width >= 1, "PatchConfig: embedding width must be positive");
    }
};

/// floor((T - C) / S) + 2: the windows of a series padded with S copies of
/// its final value.
inline Index patch_count(Index lookback, Index patch_length, Index stride)
{
    require(lookback >= patch_length, "patch_count: look-back shorter than patch length");
    require(stride >= 1, "patch_count: stride must be positive");
    return (lookback - patch_length) / stride + 2;
}

/// Overlapping patches of a normalized window, one per row (N x C).
template <typename Derived>
Matrix<typename Derived::Scalar> patchify(const Eigen::MatrixBase<Derived>& x,
                                          const PatchConfig& cfg)
{
    using Scalar = typename Derived::Scalar;
    const Index T = x.size();
    require(T >= cfg.length, "patchify: series length " + std::to_string(T)
                                 + " shorter than patch length " + std::to_string(cfg.length));
    cfg.validate(T);
    const Index n = patch_count(T, cfg.length, cfg.stride);
    Matrix<Scalar> patches(n, cfg.length);
    for (Index p = 0; p < n; ++p)
        for (Index j = 0; j < cfg.length; ++j)
            patches(p, j) = x[std::min(p * cfg.stride + j, T - 1)];
    return patches;
}

/// Adjoint of patchify: folds patch gradients back onto the series. Padded
/// positions fold onto the final value they replicate.
template <typename Scalar>
Vector<Scalar> patchify_backward(const Matrix<Scalar>& grad_patches, Index lookback,
                                 const PatchConfig& cfg)
{
    Vector<Scalar> grad = Vector<Scalar>::Zero(lookback);
    for (Index p = 0; p < grad_patches.rows(); ++p)
        for (Index j = 0; j < cfg.length; ++j)
            grad[std::min(p * cfg.stride + j, lookback - 1)] += grad_patches(p, j);
    return grad;
}

/// 1D convolution with kernel C over the padded series, written as a shared
/// affine map per patch: P = patches * A^T + b. `weight` is D x C, `bias`
/// 1 x D.
template <typename Scalar>
Matrix<Scalar> embed_patches(const Matrix<Scalar>& patches, const Matrix<Scalar>& weight,
                             const Matrix<Scalar>& bias)
{
    require(weight.cols() == patches.cols(), "embed_patches: weight expects "
                                                 + std::to_string(weight.cols())
                                                 + " inputs per patch");
    require(bias.rows() == 1 && bias.cols() == weight.rows(), "embed_patches: bias shape mismatch");
    Matrix<Scalar> out = patches * weight.transpose();
    out.rowwise() += bias.row(0);
    return out;
}

template <typename Scalar>
Matrix<Scalar> embed_patches_backward(const Matrix<Scalar>& patches, const Matrix<Scalar>& weight,
                                      const Matrix<Scalar>& grad_out, Matrix<Scalar>& grad_weight,
                                      Matrix<Scalar>& grad_bias)
{
    grad_weight.noalias() += grad_out.transpose() * patches;
    grad_bias += grad_out.colwise().sum();
    return grad_out * weight;
}

/// How the N x D patch embeddings are reduced to the 1 x D series embedding.
enum class SeriesPooling {
    patch_linear, // Z = w^T P + c, w in R^N, scalar c
    flatten,      // Z = L flatten(P) + c, L in R^{D x ND}
    mean,         // Z = L mean_n(P) + c, L in R^{D x D}
};

inline std::string to_string(SeriesPooling p)
{
    switch (p) {
    case SeriesPooling::patch_linear: return "patch_linear";
    case SeriesPooling::flatten: return "flatten";
    case SeriesPooling::mean: return "mean";
    }
    return "patch_linear";
}

inline SeriesPooling series_pooling_from_string(const std::string& s)
{
    if (s == "patch_linear")
        return SeriesPooling::patch_linear;
    if (s == "flatten")
        return SeriesPooling::flatten;
    if (s == "mean")
        return SeriesPooling::mean;
    throw InvalidArgument("unknown series pooling '" + s + "'");
}

/// Parameter shapes (rows, cols) of the series layer weight and bias.
inline std::pair<std::pair<Index, Index>, std::pair<Index, Index>>
series_layer_shapes(SeriesPooling pooling, Index patches, Index width)
{
    switch (pooling) {
    case SeriesPooling::patch_linear: return {{1, patches}, {1, 1}};
    case SeriesPooling::flatten: return {{width, patches * width}, {1, width}};
    case SeriesPooling::mean: return {{width, width}, {1, width}};
    }
    return {{1, patches}, {1, 1}};
}

template <typename Scalar>
Vector<Scalar> series_embedding(const Matrix<Scalar>& P, SeriesPooling pooling,
                                const Matrix<Scalar>& weight, const Matrix<Scalar>& bias)
{
    const auto [wshape, bshape] = series_layer_shapes(pooling, P.rows(), P.cols());
    require(weight.rows() == wshape.first && weight.cols() == wshape.second,
            "series_embedding: weight shape does not match " + std::to_string(P.rows())
                + " patches of width " + std::to_string(P.cols()));
    require(bias.rows() == bshape.first && bias.cols() == bshape.second,
            "series_embedding: bias shape mismatch");
    switch (pooling) {
    case SeriesPooling::patch_linear:
        return ((weight * P).transpose().array() + bias(0, 0)).matrix();
    case SeriesPooling::flatten:
        return weight * flatten_rows(P) + bias.row(0).transpose();
    case SeriesPooling::mean:
        return weight * P.colwise().mean().transpose() + bias.row(0).transpose();
    }
    return {};
}

template <typename Scalar>
Matrix<Scalar> series_embedding_backward(const Matrix<Scalar>& P, SeriesPooling pooling,
                                         const Matrix<Scalar>& weight,
                                         const Vector<Scalar>& grad_z, Matrix<Scalar>& grad_weight,
                                         Matrix<Scalar>& grad_bias)
{
    const Index n = P.rows(), d = P.cols();
    Matrix<Scalar> grad_p(n, d);
    switch (pooling) {
    case SeriesPooling::patch_linear:
        grad_weight.noalias() += grad_z.transpose() * P.transpose();
        grad_bias(0, 0) += grad_z.sum();
        grad_p.noalias() = weight.transpose() * grad_z.transpose();
        break;
    case SeriesPooling::flatten: {
        grad_weight.noalias() += grad_z * flatten_rows(P).transpose();
        grad_bias.row(0) += grad_z.transpose();
        const Vector<Scalar> flat = weight.transpose() * grad_z;
        for (Index r = 0; r < n; ++r)
            grad_p.row(r) = flat.segment(r * d, d).transpose();
        break;
    }
    case SeriesPooling::mean: {
        grad_weight.noalias() += grad_z * P.colwise().mean();
        grad_bias.row(0) += grad_z.transpose();
        const RowVector<Scalar> g = (weight.transpose() * grad_z).transpose() / Scalar(n);
        grad_p.rowwise() = g;
        break;
    }
    }
    return grad_p;
}

} // namespace nncl
