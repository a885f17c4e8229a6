#include "nncl/support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

using namespace nncl;

namespace {

MatrixXr random_matrix(Index r, Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0, 1);
    MatrixXr m(r, c);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = n(rng);
    return m;
}

MatrixXr snapshot(Index U, Index D, double tag)
{
    MatrixXr m(U, D);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = tag + 0.01 * double(i);
    return m;
}

// Exhaustive scan: every distance, sorted by (distance, index).
std::vector<Index> top_k_oracle(const RowVectorXr& z, const MatrixXr& rows, Index count, Index k)
{
    std::vector<std::pair<double, Index>> all;
    for (Index j = 0; j < count; ++j) {
        double sq = 0;
        for (Index d = 0; d < z.size(); ++d)
            sq += (z[d] - rows(j, d)) * (z[d] - rows(j, d));
        all.push_back({sq, j});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Index> out;
    for (Index i = 0; i < k; ++i)
        out.push_back(all[std::size_t(i)].second);
    return out;
}

} // namespace

TEST_CASE("push_batch examples")
{
    SupportQueue<double> q(4, 2, 3);
    CHECK(q.empty());
    const MatrixXr A = snapshot(2, 3, 1), B = snapshot(2, 3, 2), C = snapshot(2, 3, 3);
    q.push_batch(A);
    CHECK(q.fill() == 2);
    CHECK(q.ordered() == A);
    q.push_batch(B);
    q.push_batch(C);
    CHECK(q.fill() == 4);
    MatrixXr expected(4, 3);
    expected << B, C;
    CHECK(q.ordered() == expected);

    CHECK_THROWS_AS(SupportQueue<double>(2, 4, 3), InvalidArgument);
    CHECK_THROWS_AS(q.push_batch(snapshot(2, 4, 0)), InvalidArgument);
}

TEST_CASE("FIFO law against a ring-buffer trace oracle")
{
    for (Index blocks : {1, 2, 3, 5}) {
        const Index U = 2, D = 3, capacity = blocks * U;
        for (int m = 1; m <= 12; ++m) {
            SupportQueue<double> q(capacity, U, D);
            std::deque<MatrixXr> fifo;
            MatrixXr ring = MatrixXr::Zero(capacity, D);
            Index head = 0;
            for (int i = 0; i < m; ++i) {
                const MatrixXr s = snapshot(U, D, double(i + 1));
                q.push_batch(s);
                fifo.push_back(s);
                if (Index(fifo.size()) > blocks)
                    fifo.pop_front();
                ring.middleRows(head, U) = s;
                head = (head + U) % capacity;
            }
            MatrixXr expected(Index(fifo.size()) * U, D);
            for (std::size_t i = 0; i < fifo.size(); ++i)
                expected.middleRows(Index(i) * U, U) = fifo[i];
            CHECK(q.ordered() == expected);
            CHECK(q.buffer() == ring);
            CHECK(q.head() == head);
            CHECK(q.fill() == std::min<Index>(m * U, capacity));
        }
    }
}

TEST_CASE("restore validates its input")
{
    SupportQueue<double> q(6, 2, 3);
    q.push_batch(snapshot(2, 3, 1));
    SupportQueue<double> r(6, 2, 3);
    r.restore(q.buffer(), q.fill(), q.head());
    CHECK(r.ordered() == q.ordered());
    CHECK_THROWS_AS(r.restore(q.buffer(), 3, 0), InvalidArgument);
    CHECK_THROWS_AS(r.restore(MatrixXr::Zero(4, 3), 2, 2), InvalidArgument);
}

TEST_CASE("top_k_nn examples")
{
    SupportQueue<double> q(4, 1, 2);
    MatrixXr rows(3, 2);
    rows << 0, 0, 1, 0, 0, 2;
    for (Index i = 0; i < 3; ++i)
        q.push_batch(MatrixXr(rows.row(i)));
    RowVectorXr z(2);
    z << 0.9, 0;
    const auto nn = top_k_nn(z, q, 2);
    CHECK(nn.indices == std::vector<Index>{1, 0});
    CHECK(nn.distances[0] == doctest::Approx(0.1));
    CHECK(nn.distances[1] == doctest::Approx(0.9));
    CHECK(nn.rows.row(0) == rows.row(1));

    const auto hit = top_k_nn(RowVectorXr(rows.row(2)), q, 1);
    CHECK(hit.indices == std::vector<Index>{2});
    CHECK(hit.distances[0] == 0.0);

    const auto all = top_k_nn(z, q, 3);
    CHECK(all.indices == std::vector<Index>{1, 0, 2});
    CHECK(std::is_sorted(all.distances.begin(), all.distances.end()));

    CHECK_THROWS_AS(top_k_nn(z, q, 4), InvalidArgument);
}

TEST_CASE("top_k_nn agrees with an exhaustive scan, ties included")
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> grid(-2, 2);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index U = 1 + trial % 4, blocks = 2 + trial % 3, D = 1 + trial % 4;
        SupportQueue<double> q(U * blocks, U, D);
        const int pushes = 1 + trial % (int(blocks) + 2);
        const bool integral = trial % 2 == 0;
        for (int p = 0; p < pushes; ++p) {
            MatrixXr s(U, D);
            for (Index i = 0; i < s.size(); ++i)
                s.data()[i] = integral ? grid(rng) : n(rng);
            q.push_batch(s);
        }
        RowVectorXr z(D);
        for (Index i = 0; i < D; ++i)
            z[i] = integral ? grid(rng) : n(rng);
        const Index k = 1 + trial % q.fill();
        const auto got = top_k_nn(z, q, k);
        CHECK(got.indices == top_k_oracle(z, q.buffer(), q.fill(), k));
        for (Index i = 0; i < k; ++i)
            CHECK(got.rows.row(i) == q.buffer().row(got.indices[std::size_t(i)]));
    }
}

TEST_CASE("nncl_loss analytic values")
{
    SUBCASE("single item batch")
    {
        std::mt19937_64 rng(7);
        for (Index k : {1, 3, 8})
            for (double tau : {0.05, 1.0, 20.0}) {
                const MatrixXr Z = random_matrix(1, 5, rng);
                CHECK(nncl_loss(Z, {random_matrix(k, 5, rng)}, tau) == 0.0);
            }
    }
    SUBCASE("orthonormal hand case")
    {
        MatrixXr Z(2, 2);
        Z << 1, 0, 0, 1;
        const std::vector<MatrixXr> nb = {MatrixXr(Z.row(0)), MatrixXr(Z.row(1))};
        const double loss = nncl_loss(Z, nb, 1.0);
        CHECK(std::abs(loss - 0.31326) < 1e-4);
        CHECK(std::abs(loss + std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))) < 1e-12);
    }
    SUBCASE("uniform-softmax limit")
    {
        std::mt19937_64 rng(8);
        const MatrixXr Z = random_matrix(2, 6, rng);
        const std::vector<MatrixXr> nb = {random_matrix(3, 6, rng), random_matrix(3, 6, rng)};
        CHECK(std::abs(nncl_loss(Z, nb, 1e6) - std::log(2.0)) < 1e-3);
    }
    SUBCASE("errors")
    {
        MatrixXr Z = MatrixXr::Ones(2, 2);
        const std::vector<MatrixXr> nb = {MatrixXr::Ones(1, 2), MatrixXr::Ones(1, 2)};
        CHECK_THROWS_AS(nncl_loss(Z, nb, 0.0), InvalidArgument);
        CHECK_THROWS_AS(nncl_loss(Z, nb, -1.0), InvalidArgument);
        Z.row(1).setZero();
        CHECK_THROWS_AS(nncl_loss(Z, nb, 0.1), InvalidArgument);
    }
}

TEST_CASE("nncl_loss properties")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> scale(0.01, 100);
    for (int trial = 0; trial < 200; ++trial) {
        const Index B = 2 + trial % 5, k = 1 + trial % 4, D = 2 + trial % 6;
        const double tau = 0.05 + 0.1 * (trial % 10);
        const MatrixXr Z = random_matrix(B, D, rng);
        std::vector<MatrixXr> nb;
        for (Index b = 0; b < B; ++b)
            nb.push_back(random_matrix(k, D, rng));
        const double loss = nncl_loss(Z, nb, tau);
        CHECK(loss > 0.0);

        MatrixXr scaled = Z;
        for (Index b = 0; b < B; ++b)
            scaled.row(b) *= scale(rng);
        CHECK(std::abs(nncl_loss(scaled, nb, tau) - loss) < 1e-10);

        const double sum = nncl_loss<double>(Z, nb, tau, nullptr, NnclAggregation::sum);
        CHECK(std::abs(sum - loss * double(B * k)) < 1e-9 * std::max(1.0, sum));
    }
}

TEST_CASE("nncl_loss gradient matches central differences")
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Index B = 2 + trial % 3, k = 1 + trial % 3, D = 3 + trial % 3;
        MatrixXr Z = random_matrix(B, D, rng);
        std::vector<MatrixXr> nb;
        for (Index b = 0; b < B; ++b)
            nb.push_back(random_matrix(k, D, rng));
        const double tau = 0.3;
        MatrixXr grad;
        nncl_loss(Z, nb, tau, &grad);
        MatrixXr fd(B, D);
        for (Index i = 0; i < Z.size(); ++i) {
            const double keep = Z.data()[i];
            Z.data()[i] = keep + 1e-6;
            const double up = nncl_loss(Z, nb, tau);
            Z.data()[i] = keep - 1e-6;
            const double down = nncl_loss(Z, nb, tau);
            Z.data()[i] = keep;
            fd.data()[i] = (up - down) / 2e-6;
        }
        CHECK((fd - grad).norm() / std::max(fd.norm(), grad.norm()) < 1e-4);
    }
}
