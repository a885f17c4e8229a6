#pragma once

#include "nncl/prototypes.hpp"
#include "nncl/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nncl {

/// Fixed-capacity FIFO of prototype snapshots. Each push appends one U-row
/// block and, once full, overwrites the oldest block. Stored rows are plain
/// values with no link to the parameters they were copied from.
template <typename Scalar>
class SupportQueue {
public:
    SupportQueue() = default;

    SupportQueue(Index capacity, Index block_rows, Index width)
        : buffer_(Matrix<Scalar>::Zero(capacity, width)), block_(block_rows)
    {
        require(block_rows >= 1, "SupportQueue: block size must be positive");
        require(block_rows <= capacity, "SupportQueue: snapshot of " + std::to_string(block_rows)
                                            + " rows exceeds capacity "
                                            + std::to_string(capacity));
        require(capacity % block_rows == 0, "SupportQueue: capacity must be a multiple of U");
        require(width >= 1, "SupportQueue: width must be positive");
    }

    Index capacity() const { return buffer_.rows(); }
    Index width() const { return buffer_.cols(); }
    Index block_rows() const { return block_; }
    Index fill() const { return fill_; }
    Index head() const { return head_; }
    bool empty() const { return fill_ == 0; }

    /// Physical storage; only the first fill() rows in ring order are valid.
    const Matrix<Scalar>& buffer() const { return buffer_; }

    void push_batch(const Matrix<Scalar>& snapshot)
    {
        require(snapshot.rows() <= capacity(), "push_batch: snapshot wider than queue capacity");
        require(snapshot.rows() == block_, "push_batch: snapshot must have exactly U rows");
        require(snapshot.cols() == width(), "push_batch: snapshot width mismatch");
        buffer_.middleRows(head_, block_) = snapshot;
        head_ = (head_ + block_) % capacity();
        fill_ = std::min(fill_ + block_, capacity());
    }

    /// Filled rows from oldest to newest.
    Matrix<Scalar> ordered() const
    {
        Matrix<Scalar> out(fill_, width());
        const Index start = fill_ < capacity() ? 0 : head_;
        for (Index i = 0; i < fill_; ++i)
            out.row(i) = buffer_.row((start + i) % capacity());
        return out;
    }

    /// Restores a saved state (checkpoint load).
    void restore(Matrix<Scalar> buffer, Index fill, Index head)
    {
        require(buffer.rows() == capacity() && buffer.cols() == width(),
                "SupportQueue::restore: buffer shape mismatch");
        require(fill >= 0 && fill <= capacity() && fill % block_ == 0,
                "SupportQueue::restore: invalid fill");
        require(head >= 0 && head < capacity() && head % block_ == 0,
                "SupportQueue::restore: invalid head");
        require(fill == capacity() || head == fill, "SupportQueue::restore: inconsistent head");
        buffer_ = std::move(buffer);
        fill_ = fill;
        head_ = head;
    }

private:
    Matrix<Scalar> buffer_;
    Index block_ = 1;
    Index fill_ = 0;
    Index head_ = 0;
};

template <typename Scalar>
struct Neighbors {
    std::vector<Index> indices;
    std::vector<Scalar> distances;
    Matrix<Scalar> rows; // k x D in retrieval order
};

/// The k rows among the first `count` rows of `pool` closest to z in raw L2
/// distance, nondecreasing, ties to the lower row index.
template <typename Scalar, typename Derived>
Neighbors<Scalar> top_k_rows(const Eigen::MatrixBase<Derived>& z, const Matrix<Scalar>& pool,
                             Index count, Index k)
{
    require(k >= 0, "top_k: k must be non-negative");
    require(count <= pool.rows(), "top_k: row count exceeds pool");
    require(k <= count, "top_k: only " + std::to_string(count) + " rows available, k = "
                            + std::to_string(k));
    require(pool.cols() == z.size(), "top_k: dimension mismatch");
    std::vector<std::pair<Scalar, Index>> scored(static_cast<std::size_t>(count));
    for (Index j = 0; j < count; ++j)
        scored[static_cast<std::size_t>(j)] = {squared_distance(z, pool.row(j)), j};
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    Neighbors<Scalar> out;
    out.rows.resize(k, pool.cols());
    for (Index i = 0; i < k; ++i) {
        const auto& [d, j] = scored[static_cast<std::size_t>(i)];
        out.indices.push_back(j);
        out.distances.push_back(std::sqrt(d));
        out.rows.row(i) = pool.row(j);
    }
    return out;
}

/// Top-k retrieval over the filled rows of the queue. Indices are physical
/// buffer rows.
template <typename Scalar, typename Derived>
Neighbors<Scalar> top_k_nn(const Eigen::MatrixBase<Derived>& z, const SupportQueue<Scalar>& queue,
                           Index k)
{
    require(queue.fill() >= k, "top_k_nn: queue holds " + std::to_string(queue.fill())
                                   + " rows, fewer than k = " + std::to_string(k));
    return top_k_rows(z, queue.buffer(), queue.fill(), k);
}

enum class NnclAggregation { mean, sum };

/// Contrastive loss with nearest-neighbor positives. For item i and each of
/// its neighbors n the term is -log softmax_b(n . z_b / tau)[i] over the batch,
/// with every vector unit-normalized. Neighbors are constants; when
/// `grad_z` is given it receives dL/dZ (B x D).
template <typename Scalar>
Scalar nncl_loss(const Matrix<Scalar>& Z, const std::vector<Matrix<Scalar>>& neighbors, Scalar tau,
                 Matrix<Scalar>* grad_z = nullptr,
                 NnclAggregation aggregation = NnclAggregation::mean)
{
    require(tau > 0, "nncl_loss: temperature must be positive");
    const Index B = Z.rows();
    require(B >= 1, "nncl_loss: empty batch");
    require(static_cast<Index>(neighbors.size()) == B, "nncl_loss: one neighbor set per item");

    Vector<Scalar> norms(B);
    Matrix<Scalar> zhat(B, Z.cols());
    for (Index b = 0; b < B; ++b) {
        norms[b] = Z.row(b).norm();
        require(norms[b] > 0, "nncl_loss: zero-norm embedding cannot be normalized");
        zhat.row(b) = Z.row(b) / norms[b];
    }

    Index terms = 0;
    for (const auto& n : neighbors) {
        require(n.cols() == Z.cols(), "nncl_loss: neighbor width mismatch");
        terms += n.rows();
    }
    if (grad_z)
        grad_z->setZero(B, Z.cols());
    if (terms == 0)
        return 0;
    const Scalar weight = aggregation == NnclAggregation::mean ? Scalar(1) / Scalar(terms)
                                                               : Scalar(1);

    Matrix<Scalar> grad_hat = Matrix<Scalar>::Zero(B, Z.cols());
    Scalar loss = 0;
    for (Index i = 0; i < B; ++i) {
        const auto& n = neighbors[static_cast<std::size_t>(i)];
        for (Index j = 0; j < n.rows(); ++j) {
            const Scalar nn = n.row(j).norm();
            require(nn > 0, "nncl_loss: zero-norm neighbor cannot be normalized");
            const RowVector<Scalar> nhat = n.row(j) / nn;
            const Vector<Scalar> logits = zhat * nhat.transpose() / tau;
            const Scalar mx = logits.maxCoeff();
            const Vector<Scalar> e = (logits.array() - mx).exp();
            const Scalar denom = e.sum();
            loss += weight * (mx + std::log(denom) - logits[i]);
            if (grad_z) {
                Vector<Scalar> coeff = e / denom;
                coeff[i] -= 1;
                grad_hat.noalias() += (weight / tau) * coeff * nhat;
            }
        }
    }
    if (grad_z) {
        for (Index b = 0; b < B; ++b) {
            const RowVector<Scalar> g = grad_hat.row(b);
            grad_z->row(b) = (g - zhat.row(b) * zhat.row(b).dot(g)) / norms[b];
        }
    }
    return loss;
}

} // namespace nncl
