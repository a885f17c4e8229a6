#pragma once

#include "nncl/backbone.hpp"
#include "nncl/config.hpp"
#include "nncl/data.hpp"
#include "nncl/embed.hpp"
#include "nncl/metrics.hpp"
#include "nncl/model.hpp"
#include "nncl/normalize.hpp"
#include "nncl/optimizer.hpp"
#include "nncl/prototypes.hpp"
#include "nncl/support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <thread>
#include <vector>

namespace nncl {

struct StepReport {
    Index step = 0;
    double loss_forecast = 0;
    double loss_nncl = 0;
    double loss_proto = 0;
    double loss_total = 0;
};

/// Worker count for per-sample work: NNCL_TLLM_THREADS if set, else the
/// hardware concurrency.
inline unsigned worker_threads()
{
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NNCL_TLLM_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1)
            n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Runs f(i) for i in [0, count) over contiguous chunks.
template <typename F>
void parallel_for(Index count, unsigned threads, F&& f)
{
    if (threads <= 1 || count <= 1) {
        for (Index i = 0; i < count; ++i)
            f(i);
        return;
    }
    const Index workers = std::min<Index>(threads, count);
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
        const Index begin = count * w / workers, end = count * (w + 1) / workers;
        pool.emplace_back([&f, begin, end] {
            for (Index i = begin; i < end; ++i)
                f(i);
        });
    }
}

/// Forward state of one window kept for the backward pass.
template <typename Scalar>
struct SampleTrace {
    Index channel = 0;
    Vector<Scalar> input, target;
    RevinState<Scalar> revin;
    Vector<Scalar> normalized;
    Matrix<Scalar> patches, patch_embeddings;
    Vector<Scalar> series;
    Neighbors<Scalar> neighbors;
    bool neighbors_from_bank = false;
    Matrix<Scalar> prompt;
    BackboneCache<Scalar> backbone;
    Matrix<Scalar> hidden;
    Vector<Scalar> head_input;
    Vector<Scalar> forecast_normalized;
    Vector<Scalar> forecast;
};

/// Whether retrieval reads the support queue (true) or the live prototype
/// bank: the bank is used with NNCL disabled and while the queue holds fewer
/// than k rows.
template <typename Scalar>
bool retrieves_from_queue(const Model<Scalar>& model)
{
    const auto& cfg = model.config;
    return !cfg.disable_nncl && cfg.neighbors > 0 && model.queue.fill() >= cfg.neighbors;
}

template <typename Scalar>
std::pair<Scalar, Scalar> revin_affine(const Model<Scalar>& model, Index channel)
{
    if (model.trainable.revin_gamma.size() == 0)
        return {Scalar(1), Scalar(0)};
    require(channel >= 0 && channel < model.channels, "channel index out of range");
    return {model.trainable.revin_gamma(0, channel), model.trainable.revin_beta(0, channel)};
}

/// normalize -> patch -> embed -> Z -> retrieve -> prompt -> backbone ->
/// head -> denormalize for one window.
template <typename Scalar>
SampleTrace<Scalar> sample_forward(const Model<Scalar>& model, const Vector<Scalar>& input,
                                   Index channel, bool from_queue)
{
    const auto& cfg = model.config;
    const auto& tp = model.trainable;
    require(input.size() == cfg.lookback, "forward: input length " + std::to_string(input.size())
                                              + " differs from lookback "
                                              + std::to_string(cfg.lookback));
    SampleTrace<Scalar> s;
    s.channel = channel;
    s.input = input;
    const auto [gamma, beta] = revin_affine(model, channel);
    std::tie(s.normalized, s.revin) = normalize(input, gamma, beta, Scalar(cfg.revin_eps));
    s.patches = patchify(s.normalized, cfg.patch_config());
    s.patch_embeddings = embed_patches(s.patches, tp.patch_weight, tp.patch_bias);
    s.series = series_embedding(s.patch_embeddings, cfg.series_pooling, tp.series_weight,
                                tp.series_bias);

    const Index k = cfg.neighbors;
    s.neighbors_from_bank = !from_queue;
    if (k > 0)
        s.neighbors = from_queue ? top_k_nn(s.series, model.queue, k)
                                 : top_k_rows(s.series, tp.prototypes, tp.prototypes.rows(), k);
    else
        s.neighbors.rows.resize(0, cfg.width);
    s.prompt = formulate_prompt(s.patch_embeddings, s.neighbors.rows);

    s.hidden = backbone_forward(s.prompt, cfg.backbone_config(), tp.backbone,
                                model.frozen.backbone, &s.backbone);
    const Index rows = cfg.head_positions == HeadPositions::all ? s.hidden.rows()
                                                                : s.patch_embeddings.rows();
    s.head_input = flatten_rows(s.hidden.topRows(rows));
    s.forecast_normalized = tp.head_weight * s.head_input + tp.head_bias.row(0).transpose();
    s.forecast = denormalize(s.forecast_normalized, s.revin);
    return s;
}

/// Backward of sample_forward given dL/dforecast and dL/dZ.
template <typename Scalar>
void sample_backward(const Model<Scalar>& model, const SampleTrace<Scalar>& s,
                     const Vector<Scalar>& grad_forecast, const Vector<Scalar>& grad_series,
                     TrainableParams<Scalar>& g)
{
    const auto& cfg = model.config;
    const auto& tp = model.trainable;
    const bool affine = tp.revin_gamma.size() > 0;
    Scalar g_gamma = 0, g_beta = 0;

    const Vector<Scalar> g_yn =
        denormalize_backward(s.forecast_normalized, s.revin, grad_forecast, g_gamma, g_beta);
    g.head_weight.noalias() += g_yn * s.head_input.transpose();
    g.head_bias.row(0) += g_yn.transpose();
    const Vector<Scalar> g_flat = tp.head_weight.transpose() * g_yn;
    Matrix<Scalar> g_hidden = Matrix<Scalar>::Zero(s.hidden.rows(), s.hidden.cols());
    const Index d = cfg.width;
    for (Index r = 0; r < g_flat.size() / d; ++r)
        g_hidden.row(r) = g_flat.segment(r * d, d).transpose();

    const Matrix<Scalar> g_prompt = backbone_backward(g_hidden, cfg.backbone_config(), tp.backbone,
                                                      model.frozen.backbone, s.backbone, g.backbone);
    const Index n = s.patch_embeddings.rows();
    if (s.neighbors_from_bank)
        for (std::size_t j = 0; j < s.neighbors.indices.size(); ++j)
            g.prototypes.row(s.neighbors.indices[j]) += g_prompt.row(n + static_cast<Index>(j));

    Matrix<Scalar> g_p = g_prompt.topRows(n);
    g_p += series_embedding_backward(s.patch_embeddings, cfg.series_pooling, tp.series_weight,
                                     grad_series, g.series_weight, g.series_bias);
    const Matrix<Scalar> g_patches =
        embed_patches_backward(s.patches, tp.patch_weight, g_p, g.patch_weight, g.patch_bias);
    const Vector<Scalar> g_norm = patchify_backward(g_patches, cfg.lookback, cfg.patch_config());
    normalize_backward(s.input, s.revin, g_norm, g_gamma, g_beta);
    if (affine) {
        g.revin_gamma(0, s.channel) += g_gamma;
        g.revin_beta(0, s.channel) += g_beta;
    }
}

template <typename Scalar>
struct BatchView {
    std::vector<Vector<Scalar>> inputs;
    std::vector<Vector<Scalar>> targets;
    std::vector<Index> channels;

    Index size() const { return static_cast<Index>(inputs.size()); }

    static BatchView from_samples(std::span<const data::WindowSample> samples)
    {
        BatchView b;
        for (const auto& s : samples) {
            b.inputs.push_back(s.input.cast<Scalar>());
            b.targets.push_back(s.target.cast<Scalar>());
            b.channels.push_back(s.channel_index);
        }
        return b;
    }
};

/// Vocabulary rows entering the prototype loss at a step: all of them, or a
/// seeded sample of proto_vocab_sample rows (an unbiased minibatch estimate).
inline std::vector<Index> proto_rows(const RunConfig& cfg, Index step)
{
    if (cfg.proto_vocab_sample == 0 || cfg.proto_vocab_sample >= cfg.vocab_size)
        return {};
    std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * std::uint64_t(step + 1)));
    std::vector<Index> all(static_cast<std::size_t>(cfg.vocab_size));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < cfg.proto_vocab_sample; ++i) {
        std::uniform_int_distribution<Index> pick(i, cfg.vocab_size - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    all.resize(static_cast<std::size_t>(cfg.proto_vocab_sample));
    return all;
}

/// Total loss L_forecast + lambda (L_nncl + L_proto) of a batch under the
/// current state. When `grads` is given it receives the gradient of the
/// total with respect to every trainable parameter (it is overwritten).
template <typename Scalar>
StepReport compute_loss(const Model<Scalar>& model, const BatchView<Scalar>& batch,
                        TrainableParams<Scalar>* grads = nullptr, unsigned threads = 1)
{
    const auto& cfg = model.config;
    const Index B = batch.size();
    require(B >= 1, "train_step: empty batch");
    const bool from_queue = retrieves_from_queue(model);

    std::vector<SampleTrace<Scalar>> traces(static_cast<std::size_t>(B));
    parallel_for(B, threads, [&](Index i) {
        const auto& y = batch.targets[static_cast<std::size_t>(i)];
        require(y.size() == cfg.horizon, "train_step: target length differs from horizon");
        traces[static_cast<std::size_t>(i)] =
            sample_forward(model, batch.inputs[static_cast<std::size_t>(i)],
                           batch.channels[static_cast<std::size_t>(i)], from_queue);
    });

    StepReport report;
    report.step = model.step;
    Scalar forecast_loss = 0;
    for (Index i = 0; i < B; ++i)
        forecast_loss += (traces[static_cast<std::size_t>(i)].forecast
                          - batch.targets[static_cast<std::size_t>(i)])
                             .squaredNorm();
    forecast_loss /= Scalar(B);

    Matrix<Scalar> grad_z = Matrix<Scalar>::Zero(B, cfg.width);
    Scalar nncl = 0;
    if (from_queue) {
        Matrix<Scalar> Z(B, cfg.width);
        std::vector<Matrix<Scalar>> sets;
        for (Index i = 0; i < B; ++i) {
            Z.row(i) = traces[static_cast<std::size_t>(i)].series.transpose();
            sets.push_back(traces[static_cast<std::size_t>(i)].neighbors.rows);
        }
        nncl = nncl_loss(Z, sets, Scalar(cfg.tau), grads ? &grad_z : nullptr,
                         cfg.nncl_aggregation);
    }

    Scalar proto = 0;
    std::optional<Matrix<Scalar>> proto_grad;
    if (!cfg.disable_neighborhood_tctp) {
        const auto rows = proto_rows(cfg, model.step);
        if (grads)
            proto_grad = Matrix<Scalar>::Zero(cfg.prototypes, cfg.width);
        proto = proto_loss(model.frozen.vocabulary(), model.trainable.prototypes,
                           proto_grad ? &*proto_grad : nullptr, std::span<const Index>(rows));
    }

    const Scalar lambda = Scalar(cfg.lambda);
    report.loss_forecast = double(forecast_loss);
    report.loss_nncl = double(nncl);
    report.loss_proto = double(proto);
    report.loss_total = report.loss_forecast + cfg.lambda * (report.loss_nncl + report.loss_proto);

    if (grads) {
        *grads = model.trainable.zeros_like();
        // Each sample is differentiated into a zeroed buffer and the buffers
        // are summed in sample order, so the result does not depend on the
        // thread count.
        const unsigned workers = std::max<unsigned>(1, std::min<unsigned>(threads, unsigned(B)));
        std::vector<TrainableParams<Scalar>> buffers(workers, model.trainable.zeros_like());
        for (Index base = 0; base < B; base += workers) {
            const Index chunk = std::min<Index>(workers, B - base);
            parallel_for(chunk, workers, [&](Index w) {
                const Index i = base + w;
                auto& buf = buffers[static_cast<std::size_t>(w)];
                buf.set_zero();
                const auto& s = traces[static_cast<std::size_t>(i)];
                const Vector<Scalar> g_fc =
                    (Scalar(2) / Scalar(B)) * (s.forecast - batch.targets[static_cast<std::size_t>(i)]);
                const Vector<Scalar> g_z = lambda * grad_z.row(i).transpose();
                sample_backward(model, s, g_fc, g_z, buf);
            });
            for (Index w = 0; w < chunk; ++w)
                *grads += buffers[static_cast<std::size_t>(w)];
        }
        if (proto_grad)
            grads->prototypes += lambda * *proto_grad;
    }
    return report;
}

/// Trainable state plus optimizer moments.
template <typename Scalar>
struct TrainState {
    Model<Scalar> model;
    Adam<Scalar> optimizer;
    Index planned_steps = 1;

    explicit TrainState(Model<Scalar> m, Index planned = 1)
        : model(std::move(m)),
          optimizer(model.trainable, model.config.adam_beta1, model.config.adam_beta2,
                    model.config.adam_eps, model.config.weight_decay),
          planned_steps(planned)
    {
    }
};

/// One optimizer step on the trainable parameters followed by pushing the
/// updated prototype bank into the support queue.
template <typename Scalar>
StepReport train_step(TrainState<Scalar>& state, const BatchView<Scalar>& batch,
                      unsigned threads = 1)
{
    auto& model = state.model;
    TrainableParams<Scalar> grads;
    StepReport report = compute_loss(model, batch, &grads, threads);
    if (!std::isfinite(report.loss_total)) {
        std::ostringstream msg;
        msg << "training diverged at step " << model.step << ": forecast=" << report.loss_forecast
            << " nncl=" << report.loss_nncl << " proto=" << report.loss_proto;
        throw RuntimeError(msg.str());
    }
    const double lr = scheduled_learning_rate(model.config, model.step, state.planned_steps);
    state.optimizer.step(model.trainable, grads, lr);
    model.queue.push_batch(model.trainable.prototypes);
    ++model.step;
    return report;
}

/// H-step forecast for one raw look-back window of a channel.
template <typename Scalar>
Vector<Scalar> forecast(const Model<Scalar>& model, const Vector<Scalar>& input, Index channel)
{
    return sample_forward(model, input, channel, retrieves_from_queue(model)).forecast;
}

struct EvalOptions {
    Index stride = 1;           // evaluate every stride-th window start
    bool short_term = false;    // also report SMAPE, MASE and OWA
    Index period = 1;           // seasonal period for MASE and the naive reference
    bool history_mase = false;  // scale MASE by the look-back window
};

struct EvalReport {
    double mse = 0;
    double mae = 0;
    double smape = 0;
    double mase = 0;
    double owa = 0;
    Index windows = 0;
};

using Forecaster = std::function<Eigen::VectorXd(const Eigen::VectorXd& input, Index channel)>;

/// Metrics of a forecaster over every (channel, start) window of a frame.
/// MSE and MAE average over all forecast points; the short-term metrics
/// average per window, with seasonal-naive forecasts as the OWA reference.
inline EvalReport evaluate_forecaster(const Forecaster& f, const data::SeriesFrame& frame,
                                      Index lookback, Index horizon, const EvalOptions& opt = {})
{
    const auto refs = data::window_refs(frame, lookback, horizon);
    require(!refs.empty(), "evaluate: empty test set");
    require(opt.stride >= 1, "evaluate: stride must be positive");
    EvalReport r;
    double naive_smape = 0, naive_mase = 0;
    for (const auto& ref : refs) {
        if (ref.window_start % opt.stride != 0)
            continue;
        const auto w = data::materialize(frame, ref, lookback, horizon);
        const Eigen::VectorXd y_hat = f(w.input, w.channel_index);
        r.mse += metrics::mse(w.target, y_hat);
        r.mae += metrics::mae(w.target, y_hat);
        if (opt.short_term) {
            const Eigen::VectorXd naive = metrics::seasonal_naive(w.input, opt.period, horizon);
            auto scaled = [&](const Eigen::VectorXd& pred) {
                return opt.history_mase ? metrics::mase_history(w.target, pred, w.input, opt.period)
                                        : metrics::mase(w.target, pred, opt.period);
            };
            r.smape += metrics::smape(w.target, y_hat);
            r.mase += scaled(y_hat);
            naive_smape += metrics::smape(w.target, naive);
            naive_mase += scaled(naive);
        }
        ++r.windows;
    }
    const double n = double(r.windows);
    r.mse /= n;
    r.mae /= n;
    if (opt.short_term) {
        r.smape /= n;
        r.mase /= n;
        r.owa = metrics::owa(r.smape, r.mase, naive_smape / n, naive_mase / n);
    }
    return r;
}

template <typename Scalar>
EvalReport evaluate(const Model<Scalar>& model, const data::SeriesFrame& frame,
                    const EvalOptions& opt = {})
{
    require(frame.channels() == model.channels, "evaluate: frame has "
                                                    + std::to_string(frame.channels())
                                                    + " channels, model expects "
                                                    + std::to_string(model.channels));
    const Forecaster f = [&](const Eigen::VectorXd& input, Index channel) {
        return forecast(model, Vector<Scalar>(input.cast<Scalar>()), channel).template cast<double>().eval();
    };
    return evaluate_forecaster(f, frame, model.config.lookback, model.config.horizon, opt);
}

struct ValidationPoint {
    Index step = 0;
    double mse = 0;
};

template <typename Scalar>
struct FitResult {
    Model<Scalar> best;
    Model<Scalar> last;
    std::vector<StepReport> history;
    std::vector<ValidationPoint> validation;
    Index train_windows = 0;
    Index best_step = 0;
};

/// Trains on the windows of `train` with early stopping on the validation
/// MSE and returns the best-validation model. Deterministic for a seed.
template <typename Scalar>
FitResult<Scalar> fit(const RunConfig& cfg, const data::SeriesFrame& train,
                      const data::SeriesFrame& val, std::optional<Model<Scalar>> initial = {})
{
    cfg.validate();
    require(val.channels() == train.channels(), "fit: train and validation channel counts differ");
    Model<Scalar> model = initial ? std::move(*initial) : init_model<Scalar>(cfg, train.channels());

    auto refs = data::window_refs(train, cfg.lookback, cfg.horizon);
    if (cfg.few_shot_fraction < 1.0)
        refs = data::few_shot_subset(refs, cfg.few_shot_fraction);

    const Index batches_per_epoch =
        (static_cast<Index>(refs.size()) + cfg.batch_size - 1) / cfg.batch_size;
    Index planned = cfg.epochs * batches_per_epoch;
    if (cfg.max_steps > 0)
        planned = std::min(planned, cfg.max_steps);

    FitResult<Scalar> result{model, model, {}, {}, static_cast<Index>(refs.size()), 0};
    TrainState<Scalar> state(std::move(model), std::max<Index>(planned, 1));
    const unsigned threads = worker_threads();
    std::mt19937_64 shuffle_rng(cfg.seed + 1);

    double best_mse = std::numeric_limits<double>::infinity();
    Index stale = 0;
    bool stop = false;
    EvalOptions eval_opt;
    eval_opt.stride = cfg.eval_stride;

    auto validate_now = [&] {
        const double mse = evaluate(state.model, val, eval_opt).mse;
        result.validation.push_back({state.model.step, mse});
        if (mse < best_mse) {
            best_mse = mse;
            stale = 0;
            result.best = state.model;
            result.best_step = state.model.step;
        } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
            stop = true;
        }
    };

    for (Index epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
        std::vector<data::WindowRef> order = refs;
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (Index b = 0; b < batches_per_epoch && !stop; ++b) {
            if (cfg.max_steps > 0 && state.model.step >= cfg.max_steps) {
                stop = true;
                break;
            }
            BatchView<Scalar> batch;
            const Index end = std::min<Index>((b + 1) * cfg.batch_size, Index(order.size()));
            for (Index i = b * cfg.batch_size; i < end; ++i) {
                const auto w = data::materialize(train, order[static_cast<std::size_t>(i)],
                                                 cfg.lookback, cfg.horizon);
                batch.inputs.push_back(w.input.cast<Scalar>());
                batch.targets.push_back(w.target.cast<Scalar>());
                batch.channels.push_back(w.channel_index);
            }
            result.history.push_back(train_step(state, batch, threads));
            if (cfg.eval_every > 0 && state.model.step % cfg.eval_every == 0)
                validate_now();
        }
        if (cfg.eval_every == 0 && !stop)
            validate_now();
    }
    if (!result.history.empty()
        && (result.validation.empty() || result.validation.back().step != state.model.step))
        validate_now();
    result.last = std::move(state.model);
    if (result.validation.empty())
        result.best = result.last;
    return result;
}

} // namespace nncl
