#pragma once

#include "nncl/types.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace nncl {

struct BackboneConfig {
    Index layers = 3;
    Index heads = 4;
    Index width = 64;
    Index max_positions = 32;
    Index vocab_size = 1000;
    Index ffn_multiplier = 4;
    bool causal = true;
    double layer_norm_eps = 1e-5;

    void validate() const
    {
        require(layers >= 0, "BackboneConfig: negative layer count");
        require(heads >= 1 && width >= 1, "BackboneConfig: heads and width must be positive");
        require(width % heads == 0, "BackboneConfig: width " + std::to_string(width)
                                        + " not divisible by " + std::to_string(heads)
                                        + " heads");
        require(max_positions >= 1 && vocab_size >= 1 && ffn_multiplier >= 1,
                "BackboneConfig: sizes must be positive");
    }
};

template <typename Scalar>
struct LayerNormParams {
    Matrix<Scalar> weight; // 1 x D
    Matrix<Scalar> bias;   // 1 x D
};

// GPT-2 naming and layout: the c_* weights are stored input-major (D_in x D_out).
template <typename Scalar>
struct BlockFrozen {
    Matrix<Scalar> c_attn_weight, c_attn_bias;
    Matrix<Scalar> c_proj_weight, c_proj_bias;
    Matrix<Scalar> c_fc_weight, c_fc_bias;
    Matrix<Scalar> mlp_proj_weight, mlp_proj_bias;
};

template <typename Scalar>
struct BlockTrainable {
    LayerNormParams<Scalar> ln_1, ln_2;
};

/// Parameters updated during fine-tuning: positional embeddings and every
/// layer norm.
template <typename Scalar>
struct BackboneTrainable {
    Matrix<Scalar> wpe; // max_positions x D
    std::vector<BlockTrainable<Scalar>> blocks;
    LayerNormParams<Scalar> ln_f;

    template <typename F>
    void visit(F&& f)
    {
        f(std::string("backbone/wpe"), wpe);
        for (std::size_t l = 0; l < blocks.size(); ++l) {
            const std::string p = "backbone/h." + std::to_string(l) + ".";
            f(p + "ln_1.weight", blocks[l].ln_1.weight);
            f(p + "ln_1.bias", blocks[l].ln_1.bias);
            f(p + "ln_2.weight", blocks[l].ln_2.weight);
            f(p + "ln_2.bias", blocks[l].ln_2.bias);
        }
        f(std::string("backbone/ln_f.weight"), ln_f.weight);
        f(std::string("backbone/ln_f.bias"), ln_f.bias);
    }
};

/// Parameters that never change after construction: token embeddings,
/// attention and feed-forward weights.
template <typename Scalar>
struct BackboneFrozen {
    Matrix<Scalar> wte; // V x D, the vocabulary
    std::vector<BlockFrozen<Scalar>> blocks;

    template <typename F>
    void visit(F&& f)
    {
        f(std::string("vocab/W"), wte);
        for (std::size_t l = 0; l < blocks.size(); ++l) {
            const std::string p = "backbone/h." + std::to_string(l) + ".";
            auto& b = blocks[l];
            f(p + "attn.c_attn.weight", b.c_attn_weight);
            f(p + "attn.c_attn.bias", b.c_attn_bias);
            f(p + "attn.c_proj.weight", b.c_proj_weight);
            f(p + "attn.c_proj.bias", b.c_proj_bias);
            f(p + "mlp.c_fc.weight", b.c_fc_weight);
            f(p + "mlp.c_fc.bias", b.c_fc_bias);
            f(p + "mlp.c_proj.weight", b.mlp_proj_weight);
            f(p + "mlp.c_proj.bias", b.mlp_proj_bias);
        }
    }
};

struct TensorShape {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    bool trainable = false;

    Index size() const { return rows * cols; }
};

inline std::vector<TensorShape> backbone_layout(const BackboneConfig& cfg)
{
    const Index d = cfg.width, f = cfg.width * cfg.ffn_multiplier;
    std::vector<TensorShape> out;
    out.push_back({"vocab/W", cfg.vocab_size, d, false});
    out.push_back({"backbone/wpe", cfg.max_positions, d, true});
    for (Index l = 0; l < cfg.layers; ++l) {
        const std::string p = "backbone/h." + std::to_string(l) + ".";
        out.push_back({p + "ln_1.weight", 1, d, true});
        out.push_back({p + "ln_1.bias", 1, d, true});
        out.push_back({p + "attn.c_attn.weight", d, 3 * d, false});
        out.push_back({p + "attn.c_attn.bias", 1, 3 * d, false});
        out.push_back({p + "attn.c_proj.weight", d, d, false});
        out.push_back({p + "attn.c_proj.bias", 1, d, false});
        out.push_back({p + "ln_2.weight", 1, d, true});
        out.push_back({p + "ln_2.bias", 1, d, true});
        out.push_back({p + "mlp.c_fc.weight", d, f, false});
        out.push_back({p + "mlp.c_fc.bias", 1, f, false});
        out.push_back({p + "mlp.c_proj.weight", f, d, false});
        out.push_back({p + "mlp.c_proj.bias", 1, d, false});
    }
    out.push_back({"backbone/ln_f.weight", 1, d, true});
    out.push_back({"backbone/ln_f.bias", 1, d, true});
    return out;
}

template <typename Scalar>
void allocate_backbone(const BackboneConfig& cfg, BackboneTrainable<Scalar>& trainable,
                       BackboneFrozen<Scalar>& frozen)
{
    cfg.validate();
    const Index d = cfg.width, f = cfg.width * cfg.ffn_multiplier;
    auto ln = [d] {
        return LayerNormParams<Scalar>{Matrix<Scalar>::Ones(1, d), Matrix<Scalar>::Zero(1, d)};
    };
    trainable.wpe = Matrix<Scalar>::Zero(cfg.max_positions, d);
    trainable.blocks.assign(static_cast<std::size_t>(cfg.layers), BlockTrainable<Scalar>{ln(), ln()});
    trainable.ln_f = ln();
    frozen.wte = Matrix<Scalar>::Zero(cfg.vocab_size, d);
    frozen.blocks.resize(static_cast<std::size_t>(cfg.layers));
    for (auto& b : frozen.blocks) {
        b.c_attn_weight = Matrix<Scalar>::Zero(d, 3 * d);
        b.c_attn_bias = Matrix<Scalar>::Zero(1, 3 * d);
        b.c_proj_weight = Matrix<Scalar>::Zero(d, d);
        b.c_proj_bias = Matrix<Scalar>::Zero(1, d);
        b.c_fc_weight = Matrix<Scalar>::Zero(d, f);
        b.c_fc_bias = Matrix<Scalar>::Zero(1, f);
        b.mlp_proj_weight = Matrix<Scalar>::Zero(f, d);
        b.mlp_proj_bias = Matrix<Scalar>::Zero(1, d);
    }
}

/// Rows [0, N) hold the patch embeddings, rows [N, N+k) the retrieved
/// prototypes in retrieval order.
template <typename Scalar>
Matrix<Scalar> formulate_prompt(const Matrix<Scalar>& patches, const Matrix<Scalar>& neighbors)
{
    require(neighbors.rows() == 0 || neighbors.cols() == patches.cols(),
            "formulate_prompt: width mismatch (" + std::to_string(patches.cols()) + " vs "
                + std::to_string(neighbors.cols()) + ")");
    Matrix<Scalar> prompt(patches.rows() + neighbors.rows(), patches.cols());
    prompt.topRows(patches.rows()) = patches;
    if (neighbors.rows() > 0)
        prompt.bottomRows(neighbors.rows()) = neighbors;
    return prompt;
}

namespace detail {

template <typename Scalar>
struct LayerNormCache {
    Matrix<Scalar> xhat;
    Vector<Scalar> rstd;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const LayerNormParams<Scalar>& p, Scalar eps,
                          LayerNormCache<Scalar>& cache)
{
    const Index n = x.rows(), d = x.cols();
    cache.xhat.resize(n, d);
    cache.rstd.resize(n);
    for (Index r = 0; r < n; ++r) {
        const Scalar mu = x.row(r).mean();
        const Scalar var = (x.row(r).array() - mu).square().mean();
        cache.rstd[r] = Scalar(1) / std::sqrt(var + eps);
        cache.xhat.row(r) = (x.row(r).array() - mu) * cache.rstd[r];
    }
    Matrix<Scalar> y = cache.xhat.array().rowwise() * p.weight.row(0).array();
    y.rowwise() += p.bias.row(0);
    return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& grad_out, const LayerNormParams<Scalar>& p,
                                   const LayerNormCache<Scalar>& cache,
                                   LayerNormParams<Scalar>& grad)
{
    grad.weight += (grad_out.array() * cache.xhat.array()).colwise().sum().matrix();
    grad.bias += grad_out.colwise().sum();
    const Matrix<Scalar> gxhat = grad_out.array().rowwise() * p.weight.row(0).array();
    Matrix<Scalar> gx(gxhat.rows(), gxhat.cols());
    for (Index r = 0; r < gx.rows(); ++r) {
        const Scalar m1 = gxhat.row(r).mean();
        const Scalar m2 = (gxhat.row(r).array() * cache.xhat.row(r).array()).mean();
        gx.row(r) = cache.rstd[r]
                  * (gxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2).matrix();
    }
    return gx;
}

template <typename Scalar>
Scalar gelu(Scalar x)
{
    constexpr Scalar c = Scalar(0.7978845608028654); // sqrt(2/pi)
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x)
{
    constexpr Scalar c = Scalar(0.7978845608028654);
    const Scalar t = std::tanh(c * (x + Scalar(0.044715) * x * x * x));
    return Scalar(0.5) * (Scalar(1) + t)
         + Scalar(0.5) * x * (Scalar(1) - t * t) * c * (Scalar(1) + Scalar(3 * 0.044715) * x * x);
}

template <typename Scalar>
Matrix<Scalar> affine(const Matrix<Scalar>& x, const Matrix<Scalar>& w, const Matrix<Scalar>& b)
{
    Matrix<Scalar> y = x * w;
    y.rowwise() += b.row(0);
    return y;
}

template <typename Scalar>
struct BlockCache {
    LayerNormCache<Scalar> ln_1, ln_2;
    Matrix<Scalar> ln_1_out, qkv, attn_out, ln_2_out, fc_pre, fc_act;
    std::vector<Matrix<Scalar>> probs; // per head, n x n
};

} // namespace detail

template <typename Scalar>
struct BackboneCache {
    std::vector<detail::BlockCache<Scalar>> blocks;
    detail::LayerNormCache<Scalar> ln_f;
};

/// Pre-norm GPT-2 stack over a prompt of embedding rows: positional
/// embeddings, `layers` blocks of (masked) self-attention and GELU MLP with
/// residuals, and a final layer norm.
template <typename Scalar>
Matrix<Scalar> backbone_forward(const Matrix<Scalar>& prompt, const BackboneConfig& cfg,
                                const BackboneTrainable<Scalar>& tp,
                                const BackboneFrozen<Scalar>& fp, BackboneCache<Scalar>* cache = nullptr)
{
    const Index n = prompt.rows(), d = cfg.width;
    require(prompt.cols() == d, "backbone_forward: prompt width mismatch");
    require(n <= cfg.max_positions, "backbone_forward: prompt of " + std::to_string(n)
                                        + " rows exceeds max_positions "
                                        + std::to_string(cfg.max_positions));
    const Index hd = d / cfg.heads;
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(hd));
    const Scalar eps = Scalar(cfg.layer_norm_eps);

    BackboneCache<Scalar> local;
    BackboneCache<Scalar>& c = cache ? *cache : local;
    c.blocks.resize(static_cast<std::size_t>(cfg.layers));

    Matrix<Scalar> h = prompt + tp.wpe.topRows(n);
    for (Index l = 0; l < cfg.layers; ++l) {
        auto& bc = c.blocks[static_cast<std::size_t>(l)];
        const auto& bt = tp.blocks[static_cast<std::size_t>(l)];
        const auto& bf = fp.blocks[static_cast<std::size_t>(l)];

        bc.ln_1_out = detail::layer_norm(h, bt.ln_1, eps, bc.ln_1);
        bc.qkv = detail::affine(bc.ln_1_out, bf.c_attn_weight, bf.c_attn_bias);
        bc.attn_out.resize(n, d);
        bc.probs.resize(static_cast<std::size_t>(cfg.heads));
        for (Index hh = 0; hh < cfg.heads; ++hh) {
            const auto q = bc.qkv.middleCols(hh * hd, hd);
            const auto k = bc.qkv.middleCols(d + hh * hd, hd);
            const auto v = bc.qkv.middleCols(2 * d + hh * hd, hd);
            Matrix<Scalar> s = (q * k.transpose()) * scale;
            for (Index i = 0; i < n; ++i) {
                const Index visible = cfg.causal ? i + 1 : n;
                const Scalar mx = s.row(i).head(visible).maxCoeff();
                Scalar sum = 0;
                for (Index j = 0; j < n; ++j) {
                    s(i, j) = j < visible ? std::exp(s(i, j) - mx) : Scalar(0);
                    sum += s(i, j);
                }
                s.row(i) /= sum;
            }
            bc.attn_out.middleCols(hh * hd, hd).noalias() = s * v;
            bc.probs[static_cast<std::size_t>(hh)] = std::move(s);
        }
        h += detail::affine(bc.attn_out, bf.c_proj_weight, bf.c_proj_bias);

        bc.ln_2_out = detail::layer_norm(h, bt.ln_2, eps, bc.ln_2);
        bc.fc_pre = detail::affine(bc.ln_2_out, bf.c_fc_weight, bf.c_fc_bias);
        bc.fc_act = bc.fc_pre.unaryExpr([](Scalar x) { return detail::gelu(x); });
        h += detail::affine(bc.fc_act, bf.mlp_proj_weight, bf.mlp_proj_bias);
    }
    return detail::layer_norm(h, tp.ln_f, eps, c.ln_f);
}

/// Backward of backbone_forward. Accumulates gradients of the trainable
/// parameters into `grad` and returns dL/dprompt. Frozen weights only
/// propagate gradients.
template <typename Scalar>
Matrix<Scalar> backbone_backward(const Matrix<Scalar>& grad_out, const BackboneConfig& cfg,
                                 const BackboneTrainable<Scalar>& tp,
                                 const BackboneFrozen<Scalar>& fp, const BackboneCache<Scalar>& c,
                                 BackboneTrainable<Scalar>& grad)
{
    const Index n = grad_out.rows(), d = cfg.width;
    const Index hd = d / cfg.heads;
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(hd));

    Matrix<Scalar> gh = detail::layer_norm_backward(grad_out, tp.ln_f, c.ln_f, grad.ln_f);
    for (Index l = cfg.layers - 1; l >= 0; --l) {
        const auto& bc = c.blocks[static_cast<std::size_t>(l)];
        const auto& bt = tp.blocks[static_cast<std::size_t>(l)];
        const auto& bf = fp.blocks[static_cast<std::size_t>(l)];
        auto& bg = grad.blocks[static_cast<std::size_t>(l)];

        // MLP branch
        Matrix<Scalar> g_act = gh * bf.mlp_proj_weight.transpose();
        const Matrix<Scalar> g_pre =
            g_act.array() * bc.fc_pre.unaryExpr([](Scalar x) { return detail::gelu_grad(x); }).array();
        const Matrix<Scalar> g_ln2 = g_pre * bf.c_fc_weight.transpose();
        gh += detail::layer_norm_backward(g_ln2, bt.ln_2, bc.ln_2, bg.ln_2);

        // Attention branch
        const Matrix<Scalar> g_attn = gh * bf.c_proj_weight.transpose();
        Matrix<Scalar> g_qkv(n, 3 * d);
        for (Index hh = 0; hh < cfg.heads; ++hh) {
            const auto q = bc.qkv.middleCols(hh * hd, hd);
            const auto k = bc.qkv.middleCols(d + hh * hd, hd);
            const auto v = bc.qkv.middleCols(2 * d + hh * hd, hd);
            const auto& p = bc.probs[static_cast<std::size_t>(hh)];
            const auto g_o = g_attn.middleCols(hh * hd, hd);
            const Matrix<Scalar> g_p = g_o * v.transpose();
            g_qkv.middleCols(2 * d + hh * hd, hd).noalias() = p.transpose() * g_o;
            Matrix<Scalar> g_s(n, n);
            for (Index i = 0; i < n; ++i) {
                const Scalar dot = p.row(i).dot(g_p.row(i));
                g_s.row(i) = p.row(i).array() * (g_p.row(i).array() - dot);
            }
            g_qkv.middleCols(hh * hd, hd).noalias() = (g_s * k) * scale;
            g_qkv.middleCols(d + hh * hd, hd).noalias() = (g_s.transpose() * q) * scale;
        }
        const Matrix<Scalar> g_ln1 = g_qkv * bf.c_attn_weight.transpose();
        gh += detail::layer_norm_backward(g_ln1, bt.ln_1, bc.ln_1, bg.ln_1);
    }
    grad.wpe.topRows(n) += gh;
    return gh;
}

} // namespace nncl
