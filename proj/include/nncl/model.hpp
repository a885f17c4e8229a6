#pragma once

#include "nncl/backbone.hpp"
#include "nncl/config.hpp"
#include "nncl/embed.hpp"
#include "nncl/prototypes.hpp"
#include "nncl/support.hpp"
#include "nncl/types.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nncl {

/// Everything the optimizer may update. The same type doubles as the
/// gradient and the Adam moment buffers.
template <typename Scalar>
struct TrainableParams {
    Matrix<Scalar> revin_gamma, revin_beta; // 1 x M, empty when the affine is off
    Matrix<Scalar> patch_weight, patch_bias;
    Matrix<Scalar> series_weight, series_bias;
    Matrix<Scalar> prototypes; // U x D
    BackboneTrainable<Scalar> backbone;
    Matrix<Scalar> head_weight, head_bias;

    template <typename F>
    void visit(F&& f)
    {
        if (revin_gamma.size() > 0) {
            f(std::string("revin/gamma"), revin_gamma);
            f(std::string("revin/beta"), revin_beta);
        }
        f(std::string("patch/weight"), patch_weight);
        f(std::string("patch/bias"), patch_bias);
        f(std::string("series/weight"), series_weight);
        f(std::string("series/bias"), series_bias);
        f(std::string("tctp/E"), prototypes);
        backbone.visit(f);
        f(std::string("head/weight"), head_weight);
        f(std::string("head/bias"), head_bias);
    }

    template <typename F>
    void visit(F&& f) const
    {
        const_cast<TrainableParams*>(this)->visit(
            [&](const std::string& name, Matrix<Scalar>& m) { f(name, std::as_const(m)); });
    }

    std::vector<Matrix<Scalar>*> tensors()
    {
        std::vector<Matrix<Scalar>*> out;
        visit([&](const std::string&, Matrix<Scalar>& m) { out.push_back(&m); });
        return out;
    }

    TrainableParams zeros_like() const
    {
        TrainableParams z = *this;
        z.set_zero();
        return z;
    }

    void set_zero()
    {
        visit([](const std::string&, Matrix<Scalar>& m) { m.setZero(); });
    }

    TrainableParams& operator+=(const TrainableParams& other)
    {
        auto mine = tensors();
        auto theirs = const_cast<TrainableParams&>(other).tensors();
        for (std::size_t i = 0; i < mine.size(); ++i)
            *mine[i] += *theirs[i];
        return *this;
    }
};

template <typename Scalar>
struct FrozenParams {
    BackboneFrozen<Scalar> backbone;

    const Matrix<Scalar>& vocabulary() const { return backbone.wte; }

    template <typename F>
    void visit(F&& f)
    {
        backbone.visit(f);
    }

    template <typename F>
    void visit(F&& f) const
    {
        const_cast<FrozenParams*>(this)->visit(
            [&](const std::string& name, Matrix<Scalar>& m) { f(name, std::as_const(m)); });
    }
};

/// Named shapes of every parameter for a configuration, in archive order,
/// without allocating anything.
inline std::vector<TensorShape> parameter_layout(const RunConfig& cfg, Index channels)
{
    const Index n = cfg.patch_count(), d = cfg.width;
    const auto [sw, sb] = series_layer_shapes(cfg.series_pooling, n, d);
    std::vector<TensorShape> out;
    if (cfg.revin_affine) {
        out.push_back({"revin/gamma", 1, channels, true});
        out.push_back({"revin/beta", 1, channels, true});
    }
    out.push_back({"patch/weight", d, cfg.patch_length, true});
    out.push_back({"patch/bias", 1, d, true});
    out.push_back({"series/weight", sw.first, sw.second, true});
    out.push_back({"series/bias", sb.first, sb.second, true});
    out.push_back({"tctp/E", cfg.prototypes, d, true});
    for (auto& t : backbone_layout(cfg.backbone_config()))
        out.push_back(std::move(t));
    out.push_back({"head/weight", cfg.horizon, cfg.head_inputs(), true});
    out.push_back({"head/bias", 1, cfg.horizon, true});
    return out;
}

struct ParameterCounts {
    Index trainable = 0;
    Index total = 0;

    double ratio() const { return total > 0 ? double(trainable) / double(total) : 0.0; }
};

inline ParameterCounts parameter_counts(const std::vector<TensorShape>& layout)
{
    ParameterCounts c;
    for (const auto& t : layout) {
        c.total += t.size();
        if (t.trainable)
            c.trainable += t.size();
    }
    return c;
}

template <typename Scalar>
struct Model {
    RunConfig config;
    Index channels = 1;
    TrainableParams<Scalar> trainable;
    FrozenParams<Scalar> frozen;
    SupportQueue<Scalar> queue;
    Index step = 0;

    /// (name, trainable) for every parameter in archive order.
    std::vector<std::pair<std::string, bool>> parameter_names() const
    {
        std::vector<std::pair<std::string, bool>> out;
        trainable.visit([&](const std::string& n, const Matrix<Scalar>&) { out.emplace_back(n, true); });
        frozen.visit([&](const std::string& n, const Matrix<Scalar>&) { out.emplace_back(n, false); });
        return out;
    }

    ParameterCounts counts() const
    {
        ParameterCounts c;
        trainable.visit([&](const std::string&, const Matrix<Scalar>& m) {
            c.trainable += m.size();
            c.total += m.size();
        });
        frozen.visit([&](const std::string&, const Matrix<Scalar>& m) { c.total += m.size(); });
        return c;
    }
};

namespace detail {

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, double std, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, std);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = Scalar(std > 0 ? dist(rng) : 0.0);
}

template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = Scalar(dist(rng));
}

} // namespace detail

/// Seeded initialization. Without pretrained weights the backbone is a
/// randomly initialized GPT-2-shaped stack and the vocabulary a Gaussian
/// matrix; prototypes start as distinct vocabulary rows.
template <typename Scalar>
Model<Scalar> init_model(const RunConfig& cfg, Index channels)
{
    cfg.validate();
    require(channels >= 1, "init_model: need at least one channel");
    Model<Scalar> m;
    m.config = cfg;
    m.channels = channels;
    std::mt19937_64 rng(cfg.seed);

    const auto bcfg = cfg.backbone_config();
    allocate_backbone(bcfg, m.trainable.backbone, m.frozen.backbone);
    auto& fb = m.frozen.backbone;
    detail::fill_normal(fb.wte, cfg.init_std, rng);
    detail::fill_normal(m.trainable.backbone.wpe, cfg.init_std / 2, rng);
    const double proj_std = cfg.init_std / std::sqrt(2.0 * double(std::max<Index>(cfg.layers, 1)));
    for (auto& b : fb.blocks) {
        detail::fill_normal(b.c_attn_weight, cfg.init_std, rng);
        detail::fill_normal(b.c_proj_weight, proj_std, rng);
        detail::fill_normal(b.c_fc_weight, cfg.init_std, rng);
        detail::fill_normal(b.mlp_proj_weight, proj_std, rng);
    }

    auto& tp = m.trainable;
    if (cfg.revin_affine) {
        tp.revin_gamma = Matrix<Scalar>::Ones(1, channels);
        tp.revin_beta = Matrix<Scalar>::Zero(1, channels);
    }
    const Index n = cfg.patch_count(), d = cfg.width;
    tp.patch_weight.resize(d, cfg.patch_length);
    tp.patch_bias.resize(1, d);
    const double patch_bound = 1.0 / std::sqrt(double(cfg.patch_length));
    detail::fill_uniform(tp.patch_weight, patch_bound, rng);
    detail::fill_uniform(tp.patch_bias, patch_bound, rng);

    const auto [sw, sb] = series_layer_shapes(cfg.series_pooling, n, d);
    tp.series_weight.resize(sw.first, sw.second);
    tp.series_bias.resize(sb.first, sb.second);
    const double series_bound = 1.0 / std::sqrt(double(sw.second));
    detail::fill_uniform(tp.series_weight, series_bound, rng);
    detail::fill_uniform(tp.series_bias, series_bound, rng);

    tp.prototypes = sample_prototypes(fb.wte, cfg.prototypes, rng);

    tp.head_weight.resize(cfg.horizon, cfg.head_inputs());
    tp.head_bias.resize(1, cfg.horizon);
    const double head_bound = 1.0 / std::sqrt(double(cfg.head_inputs()));
    detail::fill_uniform(tp.head_weight, head_bound, rng);
    detail::fill_uniform(tp.head_bias, head_bound, rng);

    m.queue = SupportQueue<Scalar>(cfg.queue_size, cfg.prototypes, d);
    return m;
}

} // namespace nncl
