#include "nncl/normalize.hpp"

#include <doctest.h>

#include <random>

using namespace nncl;

TEST_CASE("normalize examples")
{
    SUBCASE("constant window maps to zeros")
    {
        const VectorXr x = VectorXr::Constant(3, 5.0);
        const auto [y, st] = normalize(x);
        CHECK(y.cwiseAbs().maxCoeff() == 0.0);
        CHECK(st.mean == 5.0);
        CHECK(st.std == doctest::Approx(std::sqrt(1e-5)));
    }
    SUBCASE("two points")
    {
        VectorXr x(2);
        x << 1, 3;
        const auto [y, st] = normalize(x);
        CHECK(st.mean == 2.0);
        CHECK(st.std == doctest::Approx(std::sqrt(1.0 + 1e-5)));
        CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-5));
        CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-5));
    }
    SUBCASE("non-finite input")
    {
        VectorXr x(3);
        x << 1, std::nan(""), 2;
        CHECK_THROWS_AS(normalize(x), InvalidArgument);
    }
}

TEST_CASE("denormalize examples")
{
    RevinState<double> st;
    st.mean = 2;
    st.std = 1;
    VectorXr y(2);
    y << 0, 1;
    const VectorXr out = denormalize(y, st);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 3.0);
    st.gamma = 0;
    CHECK_THROWS_AS(denormalize(y, st), InvalidArgument);
}

TEST_CASE("round-trip and moments")
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index T = 1 + trial % 97;
        VectorXr x(T);
        const bool constant = trial % 10 == 0;
        const double offset = u(rng), spread = std::exp(u(rng) / 4);
        for (Index i = 0; i < T; ++i)
            x[i] = constant ? offset : offset + spread * n(rng);

        const auto [y, st] = normalize(x);
        CHECK((denormalize(y, st) - x).cwiseAbs().maxCoeff() < 1e-6);
        if (!constant && T > 1) {
            CHECK(std::abs(y.mean()) < 1e-6);
            const double var = (y.array() - y.mean()).square().mean();
            const double sample_var = (x.array() - x.mean()).square().mean();
            CHECK(std::abs(var - sample_var / (sample_var + 1e-5)) < 1e-9);
            if (sample_var > 1e-1)
                CHECK(std::abs(var - 1.0) < 1e-4);
        }

        const double gamma = u(rng) >= 0 ? 0.5 + u(rng) / 20 : -0.5 + u(rng) / 20;
        const double beta = u(rng) / 5;
        const auto [ya, sa] = normalize(x, gamma, beta);
        CHECK((denormalize(ya, sa) - x).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("affine gradients match finite differences with statistics held fixed")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    VectorXr x(12), y(5), gx(12), gy(5);
    for (auto* v : {&x, &y, &gx, &gy})
        for (Index i = 0; i < v->size(); ++i)
            (*v)[i] = n(rng);
    const double gamma = 1.3, beta = -0.4;

    // L = gx . normalize(x) + gy . denormalize(y)
    auto loss = [&](double g, double b) {
        const auto [xn, st] = normalize(x, g, b);
        return gx.dot(xn) + gy.dot(denormalize(y, st));
    };
    const auto [xn, st] = normalize(x, gamma, beta);
    double dg = 0, db = 0;
    normalize_backward(x, st, gx, dg, db);
    const VectorXr dy = denormalize_backward(y, st, gy, dg, db);

    const double h = 1e-6;
    CHECK(dg == doctest::Approx((loss(gamma + h, beta) - loss(gamma - h, beta)) / (2 * h)).epsilon(1e-6));
    CHECK(db == doctest::Approx((loss(gamma, beta + h) - loss(gamma, beta - h)) / (2 * h)).epsilon(1e-6));
    for (Index i = 0; i < y.size(); ++i) {
        VectorXr yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        const double fd = gy.dot(denormalize(yp, st) - denormalize(ym, st)) / (2 * h);
        CHECK(dy[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}
