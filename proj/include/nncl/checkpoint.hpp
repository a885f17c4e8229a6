#pragma once

#include "nncl/archive.hpp"
#include "nncl/data.hpp"
#include "nncl/model.hpp"

#include <filesystem>
#include <optional>
#include <random>

namespace nncl {

/// Stores every parameter, the support queue and the configuration. The
/// queue buffer is stored physically with its ring head and fill.
template <typename Scalar>
TensorArchive to_archive(const Model<Scalar>& model, DType dtype = DType::f32)
{
    TensorArchive a;
    model.trainable.visit(
        [&](const std::string& name, const Matrix<Scalar>& m) { a.put_matrix(name, m, dtype); });
    model.frozen.visit(
        [&](const std::string& name, const Matrix<Scalar>& m) { a.put_matrix(name, m, dtype); });
    a.put_matrix("support/buffer", model.queue.buffer(), dtype);
    a.metadata["config"] = model.config.to_text();
    a.metadata["channels"] = model.channels;
    a.metadata["step"] = model.step;
    a.metadata["queue"] = {{"head", model.queue.head()},
                           {"fill", model.queue.fill()},
                           {"capacity", model.queue.capacity()}};
    return a;
}

template <typename Scalar>
Model<Scalar> from_archive(const TensorArchive& a)
{
    if (!a.metadata.contains("config") || !a.metadata.contains("channels"))
        throw RuntimeError("checkpoint is missing its configuration");
    const RunConfig cfg = RunConfig::parse(a.metadata.at("config").get<std::string>());
    const Index channels = a.metadata.at("channels").get<Index>();
    Model<Scalar> m;
    m.config = cfg;
    m.channels = channels;
    allocate_backbone(cfg.backbone_config(), m.trainable.backbone, m.frozen.backbone);
    if (cfg.revin_affine) {
        m.trainable.revin_gamma.resize(1, channels);
        m.trainable.revin_beta.resize(1, channels);
    }
    for (const auto& shape : parameter_layout(cfg, channels)) {
        Matrix<Scalar> value = a.matrix<Scalar>(shape.name, shape.rows, shape.cols);
        bool placed = false;
        auto assign = [&](const std::string& name, Matrix<Scalar>& target) {
            if (name == shape.name) {
                target = value;
                placed = true;
            }
        };
        m.trainable.visit(assign);
        m.frozen.visit(assign);
        require(placed, "checkpoint tensor '" + shape.name + "' has no slot");
    }
    m.queue = SupportQueue<Scalar>(cfg.queue_size, cfg.prototypes, cfg.width);
    const auto& q = a.metadata.at("queue");
    m.queue.restore(a.matrix<Scalar>("support/buffer", cfg.queue_size, cfg.width),
                    q.at("fill").get<Index>(), q.at("head").get<Index>());
    m.step = a.metadata.value("step", Index{0});
    return m;
}

inline void attach_scaler(TensorArchive& a, const data::StandardScaler& s)
{
    a.put_matrix("scaler/mean", s.mean.transpose(), DType::f64, true);
    a.put_matrix("scaler/scale", s.scale.transpose(), DType::f64, true);
}

inline std::optional<data::StandardScaler> read_scaler(const TensorArchive& a)
{
    if (!a.contains("scaler/mean"))
        return std::nullopt;
    data::StandardScaler s;
    const auto& mean = a.at("scaler/mean").data;
    const auto& scale = a.at("scaler/scale").data;
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Index(mean.size()));
    s.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), Index(scale.size()));
    return s;
}

/// Replaces the vocabulary and frozen backbone weights with those of a
/// pretrained archive and re-samples the prototypes from the new vocabulary.
template <typename Scalar>
void load_pretrained(Model<Scalar>& model, const TensorArchive& a)
{
    const auto& cfg = model.config;
    for (const auto& shape : backbone_layout(cfg.backbone_config())) {
        if (!a.contains(shape.name)) {
            if (shape.trainable)
                continue;
            throw RuntimeError("pretrained archive lacks frozen tensor '" + shape.name + "'");
        }
        Matrix<Scalar> value = a.matrix<Scalar>(shape.name, shape.rows, shape.cols);
        auto assign = [&](const std::string& name, Matrix<Scalar>& target) {
            if (name == shape.name)
                target = value;
        };
        model.trainable.backbone.visit(assign);
        model.frozen.backbone.visit(assign);
    }
    std::mt19937_64 rng(cfg.seed + 7);
    model.trainable.prototypes = sample_prototypes(model.frozen.vocabulary(), cfg.prototypes, rng);
}

template <typename Scalar>
void save_checkpoint(const Model<Scalar>& model, const std::filesystem::path& path,
                     const std::optional<data::StandardScaler>& scaler = {},
                     DType dtype = DType::f32)
{
    TensorArchive a = to_archive(model, dtype);
    if (scaler)
        attach_scaler(a, *scaler);
    a.save(path);
}

template <typename Scalar>
std::pair<Model<Scalar>, std::optional<data::StandardScaler>>
load_checkpoint(const std::filesystem::path& path)
{
    const TensorArchive a = TensorArchive::load(path);
    return {from_archive<Scalar>(a), read_scaler(a)};
}

} // namespace nncl
