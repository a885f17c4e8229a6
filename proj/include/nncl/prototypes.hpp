#pragma once

#include "nncl/types.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace nncl {

template <typename D1, typename D2>
typename D1::Scalar squared_distance(const Eigen::MatrixBase<D1>& a, const Eigen::MatrixBase<D2>& b)
{
    require(a.size() == b.size(), "distance: dimension mismatch (" + std::to_string(a.size())
                                      + " vs " + std::to_string(b.size()) + ")");
    typename D1::Scalar acc = 0;
    for (Index i = 0; i < a.size(); ++i) {
        const auto d = a.derived().coeff(i) - b.derived().coeff(i);
        acc += d * d;
    }
    return acc;
}

/// Euclidean distance between a token embedding and a prototype.
template <typename D1, typename D2>
typename D1::Scalar distance(const Eigen::MatrixBase<D1>& w, const Eigen::MatrixBase<D2>& e)
{
    return std::sqrt(squared_distance(w, e));
}

template <typename Scalar>
struct Assignment {
    Index index = -1;
    Scalar distance = 0;
};

/// Nearest row of `bank`; ties go to the lowest row index.
template <typename Scalar, typename Derived>
Assignment<Scalar> nearest_prototype(const Eigen::MatrixBase<Derived>& w, const Matrix<Scalar>& bank)
{
    require(bank.rows() > 0, "nearest_prototype: empty prototype bank");
    require(bank.cols() == w.size(), "nearest_prototype: dimension mismatch");
    Index best = 0;
    Scalar best_sq = std::numeric_limits<Scalar>::infinity();
    for (Index u = 0; u < bank.rows(); ++u) {
        const Scalar d = squared_distance(w, bank.row(u));
        if (d < best_sq) {
            best_sq = d;
            best = u;
        }
    }
    return {best, std::sqrt(best_sq)};
}

/// Mean squared distance from each vocabulary row to its nearest prototype.
/// Assignments are recomputed on every call and held fixed for the gradient,
/// which flows to the prototypes only. When `rows` is non-empty only those
/// vocabulary rows enter the mean (minibatch estimate).
template <typename Scalar>
Scalar proto_loss(const Matrix<Scalar>& vocabulary, const Matrix<Scalar>& prototypes,
                  Matrix<Scalar>* grad_prototypes = nullptr, std::span<const Index> rows = {})
{
    require(vocabulary.rows() > 0, "proto_loss: empty vocabulary");
    require(vocabulary.cols() == prototypes.cols(), "proto_loss: dimension mismatch");
    require(prototypes.rows() > 0, "proto_loss: empty prototype bank");
    const Index count = rows.empty() ? vocabulary.rows() : static_cast<Index>(rows.size());
    const Scalar inv = Scalar(1) / Scalar(count);
    Scalar loss = 0;
    for (Index i = 0; i < count; ++i) {
        const Index v = rows.empty() ? i : rows[static_cast<std::size_t>(i)];
        const auto a = nearest_prototype<Scalar>(vocabulary.row(v), prototypes);
        loss += a.distance * a.distance;
        if (grad_prototypes)
            grad_prototypes->row(a.index) += Scalar(2) * inv
                                           * (prototypes.row(a.index) - vocabulary.row(v));
    }
    return loss * inv;
}

/// U distinct vocabulary rows drawn uniformly without replacement.
template <typename Scalar>
Matrix<Scalar> sample_prototypes(const Matrix<Scalar>& vocabulary, Index count, std::mt19937_64& rng)
{
    require(count >= 1 && count < vocabulary.rows(),
            "sample_prototypes: need 1 <= U < V (U = " + std::to_string(count)
                + ", V = " + std::to_string(vocabulary.rows()) + ")");
    std::vector<Index> order(static_cast<std::size_t>(vocabulary.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    Matrix<Scalar> out(count, vocabulary.cols());
    for (Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<Index> pick(i, vocabulary.rows() - 1);
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(pick(rng))]);
        out.row(i) = vocabulary.row(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

} // namespace nncl
