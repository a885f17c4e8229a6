#include "nncl/backbone.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nncl;

namespace {

using Grid = std::vector<std::vector<double>>;

void fill(MatrixXr& m, std::mt19937_64& rng, double std)
{
    std::normal_distribution<double> n(0, std);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = n(rng);
}

struct Net {
    BackboneConfig cfg;
    BackboneTrainable<double> tp;
    BackboneFrozen<double> fp;
};

Net random_net(BackboneConfig cfg, std::uint64_t seed)
{
    Net net{cfg, {}, {}};
    allocate_backbone(cfg, net.tp, net.fp);
    std::mt19937_64 rng(seed);
    net.tp.visit([&](const std::string& name, MatrixXr& m) {
        fill(m, rng, 0.3);
        if (name.find("weight") != std::string::npos)
            m.array() += 1.0;
    });
    net.fp.visit([&](const std::string&, MatrixXr& m) { fill(m, rng, 0.4); });
    return net;
}

Grid to_grid(const MatrixXr& m)
{
    Grid g(std::size_t(m.rows()), std::vector<double>(std::size_t(m.cols())));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            g[std::size_t(r)][std::size_t(c)] = m(r, c);
    return g;
}

Grid oracle_layer_norm(const Grid& x, const MatrixXr& w, const MatrixXr& b, double eps)
{
    Grid y = x;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const std::size_t d = x[r].size();
        double mu = 0;
        for (double v : x[r])
            mu += v;
        mu /= double(d);
        double var = 0;
        for (double v : x[r])
            var += (v - mu) * (v - mu);
        var /= double(d);
        for (std::size_t c = 0; c < d; ++c)
            y[r][c] = (x[r][c] - mu) / std::sqrt(var + eps) * w(0, Index(c)) + b(0, Index(c));
    }
    return y;
}

Grid oracle_linear(const Grid& x, const MatrixXr& w, const MatrixXr& b)
{
    Grid y(x.size(), std::vector<double>(std::size_t(w.cols())));
    for (std::size_t r = 0; r < x.size(); ++r)
        for (Index o = 0; o < w.cols(); ++o) {
            double acc = b(0, o);
            for (Index i = 0; i < w.rows(); ++i)
                acc += x[r][std::size_t(i)] * w(i, o);
            y[r][std::size_t(o)] = acc;
        }
    return y;
}

// Block equations written out with scalar loops only.
Grid oracle_forward(const Net& net, const MatrixXr& prompt)
{
    const auto& cfg = net.cfg;
    const std::size_t n = std::size_t(prompt.rows()), d = std::size_t(cfg.width);
    const std::size_t hd = d / std::size_t(cfg.heads);
    Grid h = to_grid(prompt);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
            h[r][c] += net.tp.wpe(Index(r), Index(c));
    for (Index l = 0; l < cfg.layers; ++l) {
        const auto& bt = net.tp.blocks[std::size_t(l)];
        const auto& bf = net.fp.blocks[std::size_t(l)];
        const Grid a = oracle_layer_norm(h, bt.ln_1.weight, bt.ln_1.bias, cfg.layer_norm_eps);
        const Grid qkv = oracle_linear(a, bf.c_attn_weight, bf.c_attn_bias);
        Grid att(n, std::vector<double>(d, 0.0));
        for (std::size_t head = 0; head < std::size_t(cfg.heads); ++head)
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> score(n, -INFINITY);
                double mx = -INFINITY;
                for (std::size_t j = 0; j < n; ++j) {
                    if (cfg.causal && j > i)
                        continue;
                    double dot = 0;
                    for (std::size_t e = 0; e < hd; ++e)
                        dot += qkv[i][head * hd + e] * qkv[j][d + head * hd + e];
                    score[j] = dot / std::sqrt(double(hd));
                    mx = std::max(mx, score[j]);
                }
                double z = 0;
                for (std::size_t j = 0; j < n; ++j)
                    z += std::isinf(score[j]) ? 0.0 : std::exp(score[j] - mx);
                for (std::size_t j = 0; j < n; ++j) {
                    if (std::isinf(score[j]))
                        continue;
                    const double p = std::exp(score[j] - mx) / z;
                    for (std::size_t e = 0; e < hd; ++e)
                        att[i][head * hd + e] += p * qkv[j][2 * d + head * hd + e];
                }
            }
        const Grid proj = oracle_linear(att, bf.c_proj_weight, bf.c_proj_bias);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c)
                h[r][c] += proj[r][c];
        const Grid m = oracle_layer_norm(h, bt.ln_2.weight, bt.ln_2.bias, cfg.layer_norm_eps);
        Grid fc = oracle_linear(m, bf.c_fc_weight, bf.c_fc_bias);
        for (auto& row : fc)
            for (double& v : row)
                v = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
        const Grid out = oracle_linear(fc, bf.mlp_proj_weight, bf.mlp_proj_bias);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c)
                h[r][c] += out[r][c];
    }
    return oracle_layer_norm(h, net.tp.ln_f.weight, net.tp.ln_f.bias, cfg.layer_norm_eps);
}

BackboneConfig tiny(Index layers = 1, bool causal = true)
{
    BackboneConfig cfg;
    cfg.layers = layers;
    cfg.heads = 2;
    cfg.width = 8;
    cfg.max_positions = 12;
    cfg.vocab_size = 20;
    cfg.causal = causal;
    return cfg;
}

} // namespace

TEST_CASE("formulate_prompt")
{
    std::mt19937_64 rng(1);
    MatrixXr P(2, 4), nb(1, 4);
    fill(P, rng, 1);
    fill(nb, rng, 1);
    const MatrixXr prompt = formulate_prompt(P, nb);
    REQUIRE(prompt.rows() == 3);
    CHECK(prompt.row(0) == P.row(0));
    CHECK(prompt.row(1) == P.row(1));
    CHECK(prompt.row(2) == nb.row(0));
    CHECK(formulate_prompt(P, MatrixXr(0, 4)) == P);
    CHECK(formulate_prompt(MatrixXr(MatrixXr::Zero(64, 768)), MatrixXr(MatrixXr::Zero(8, 768))).rows() == 72);
    CHECK_THROWS_AS(formulate_prompt(P, MatrixXr(MatrixXr::Zero(1, 3))), InvalidArgument);
}

TEST_CASE("forward matches the straight-line oracle")
{
    for (Index layers : {1, 2})
        for (bool causal : {true, false}) {
            const Net net = random_net(tiny(layers, causal), 42 + std::uint64_t(layers));
            std::mt19937_64 rng(5);
            MatrixXr prompt(7, 8);
            fill(prompt, rng, 1);
            const MatrixXr got = backbone_forward(prompt, net.cfg, net.tp, net.fp);
            const Grid want = oracle_forward(net, prompt);
            double worst = 0;
            for (Index r = 0; r < got.rows(); ++r)
                for (Index c = 0; c < got.cols(); ++c)
                    worst = std::max(worst, std::abs(got(r, c) - want[std::size_t(r)][std::size_t(c)]));
            CHECK(worst < 1e-10);
        }
}

TEST_CASE("zero layers reduce to positional embedding plus final norm")
{
    const Net net = random_net(tiny(0), 3);
    std::mt19937_64 rng(6);
    MatrixXr prompt(5, 8);
    fill(prompt, rng, 1);
    detail::LayerNormCache<double> cache;
    const MatrixXr expected = detail::layer_norm(MatrixXr(prompt + net.tp.wpe.topRows(5)), net.tp.ln_f,
                                                 net.cfg.layer_norm_eps, cache);
    CHECK(backbone_forward(prompt, net.cfg, net.tp, net.fp) == expected);
}

TEST_CASE("forward is deterministic, position-aware and bounded by max_positions")
{
    const Net net = random_net(tiny(2), 4);
    std::mt19937_64 rng(7);
    MatrixXr prompt(6, 8);
    fill(prompt, rng, 1);
    const MatrixXr a = backbone_forward(prompt, net.cfg, net.tp, net.fp);
    CHECK(a == backbone_forward(prompt, net.cfg, net.tp, net.fp));

    MatrixXr swapped = prompt;
    swapped.row(0).swap(swapped.row(4));
    MatrixXr b = backbone_forward(swapped, net.cfg, net.tp, net.fp);
    b.row(0).swap(b.row(4));
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);

    MatrixXr too_long(13, 8);
    fill(too_long, rng, 1);
    CHECK_THROWS_AS(backbone_forward(too_long, net.cfg, net.tp, net.fp), InvalidArgument);
}

TEST_CASE("backward matches central differences for trainable parameters and the prompt")
{
    for (bool causal : {true, false}) {
        Net net = random_net(tiny(2, causal), 9);
        std::mt19937_64 rng(8);
        MatrixXr prompt(6, 8), gout(6, 8);
        fill(prompt, rng, 1);
        fill(gout, rng, 1);
        auto f = [&] {
            return (backbone_forward(prompt, net.cfg, net.tp, net.fp).array() * gout.array()).sum();
        };

        BackboneCache<double> cache;
        backbone_forward(prompt, net.cfg, net.tp, net.fp, &cache);
        BackboneTrainable<double> grad = net.tp;
        grad.visit([](const std::string&, MatrixXr& m) { m.setZero(); });
        const MatrixXr gprompt = backbone_backward(gout, net.cfg, net.tp, net.fp, cache, grad);

        auto check = [&](const std::string& name, MatrixXr& param, const MatrixXr& analytic) {
            MatrixXr fd(param.rows(), param.cols());
            for (Index i = 0; i < param.size(); ++i) {
                const double keep = param.data()[i];
                param.data()[i] = keep + 1e-6;
                const double up = f();
                param.data()[i] = keep - 1e-6;
                const double down = f();
                param.data()[i] = keep;
                fd.data()[i] = (up - down) / 2e-6;
            }
            const double denom = std::max({fd.norm(), analytic.norm(), 1e-12});
            CAPTURE(name);
            CHECK((fd - analytic).norm() / denom < 1e-4);
        };
        std::vector<std::pair<std::string, MatrixXr*>> params;
        net.tp.visit([&](const std::string& n, MatrixXr& m) { params.push_back({n, &m}); });
        std::vector<const MatrixXr*> grads;
        grad.visit([&](const std::string&, MatrixXr& m) { grads.push_back(&m); });
        for (std::size_t i = 0; i < params.size(); ++i) {
            // Rows of wpe beyond the prompt never influence the output.
            if (params[i].first == "backbone/wpe") {
                CHECK(grads[i]->bottomRows(net.cfg.max_positions - 6).isZero(0));
            }
            check(params[i].first, *params[i].second, *grads[i]);
        }
        check("prompt", prompt, gprompt);
    }
}

TEST_CASE("layout partitions parameters into trainable and frozen sets")
{
    const auto layout = backbone_layout(tiny(2));
    for (const auto& t : layout) {
        const bool frozen_kind = t.name == "vocab/W" || t.name.find(".attn.") != std::string::npos
                              || t.name.find(".mlp.") != std::string::npos;
        CHECK(t.trainable == !frozen_kind);
    }
    const auto none = backbone_layout(tiny(0));
    for (const auto& t : none)
        CHECK(t.name.find("attn") == std::string::npos);
}
