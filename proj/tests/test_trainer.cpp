#include "gradcheck.hpp"

#include "nncl/trainer.hpp"

#include <doctest.h>

#include <random>

using namespace nncl;
using namespace nncl::testing;

namespace {

std::vector<MatrixXr> frozen_copy(const Model<double>& m)
{
    std::vector<MatrixXr> out;
    m.frozen.visit([&](const std::string&, const MatrixXr& t) { out.push_back(t); });
    return out;
}

std::vector<MatrixXr> trainable_copy(const Model<double>& m)
{
    std::vector<MatrixXr> out;
    m.trainable.visit([&](const std::string&, const MatrixXr& t) { out.push_back(t); });
    return out;
}

data::SeriesFrame synthetic(Index length)
{
    data::SyntheticSpec spec;
    spec.length = length;
    return data::make_synthetic(spec);
}

} // namespace

TEST_CASE("full-loss gradients match central differences")
{
    struct Variant {
        const char* label;
        SeriesPooling pooling;
        HeadPositions head;
        bool warm_queue;
        bool disable_nncl;
    };
    const Variant variants[] = {
        {"queue retrieval", SeriesPooling::patch_linear, HeadPositions::all, true, false},
        {"cold start from the bank", SeriesPooling::patch_linear, HeadPositions::all, false, false},
        {"flatten pooling, patch-only head", SeriesPooling::flatten, HeadPositions::patches, true, false},
        {"mean pooling without nncl", SeriesPooling::mean, HeadPositions::all, true, true},
    };
    for (const auto& v : variants) {
        CAPTURE(v.label);
        RunConfig cfg = tiny_config();
        cfg.series_pooling = v.pooling;
        cfg.head_positions = v.head;
        cfg.disable_nncl = v.disable_nncl;
        auto model = init_model<double>(cfg, 2);
        perturb(model, 17);
        if (v.warm_queue) {
            MatrixXr older = model.trainable.prototypes;
            older.array() += 0.3;
            model.queue.push_batch(older);
            model.queue.push_batch(model.trainable.prototypes);
        }
        const auto batch = random_batch(cfg, 2, 2, 5);
        const auto report = compute_loss(model, batch);
        if (v.warm_queue && !v.disable_nncl)
            CHECK(report.loss_nncl > 0);
        for (const auto& e : gradient_errors(model, batch)) {
            CAPTURE(e.name);
            CHECK(e.relative < 1e-4);
        }
    }
}

TEST_CASE("every trainable tensor receives gradient")
{
    RunConfig cfg = tiny_config();
    auto model = init_model<double>(cfg, 2);
    perturb(model, 3);
    model.queue.push_batch(model.trainable.prototypes);
    TrainableParams<double> grads;
    compute_loss(model, random_batch(cfg, 4, 2, 9), &grads);
    grads.visit([](const std::string& name, const MatrixXr& g) {
        CAPTURE(name);
        CHECK(g.norm() > 0);
    });
}

TEST_CASE("step report composition and lambda boundary")
{
    RunConfig cfg = tiny_config();
    for (double lambda : {0.0, 0.01, 0.7}) {
        cfg.lambda = lambda;
        TrainState<double> state(init_model<double>(cfg, 2), 20);
        for (int s = 0; s < 12; ++s) {
            const auto r = train_step(state, random_batch(cfg, 2, 2, std::uint64_t(s)));
            CHECK(std::abs(r.loss_total - (r.loss_forecast + lambda * (r.loss_nncl + r.loss_proto))) < 1e-10);
            if (lambda == 0.0)
                CHECK(r.loss_total == r.loss_forecast);
        }
    }
}

TEST_CASE("forecast loss is the batch mean of squared norms")
{
    RunConfig cfg = tiny_config();
    cfg.lambda = 0;
    const auto model = init_model<double>(cfg, 1);
    auto batch = random_batch(cfg, 2, 1, 1);
    const VectorXr f0 = forecast(model, batch.inputs[0], 0);
    const VectorXr f1 = forecast(model, batch.inputs[1], 1 % model.channels);
    batch.targets[0] = f0;
    batch.targets[1] = f1;
    CHECK(compute_loss(model, batch).loss_forecast == 0.0);
    batch.targets[0] = f0 + VectorXr::Constant(cfg.horizon, 1.0);
    batch.targets[1] = f1 + VectorXr::Constant(cfg.horizon, std::sqrt(2.0));
    // Squared norms are H and 2H; their mean is 1.5H.
    CHECK(compute_loss(model, batch).loss_forecast == doctest::Approx(1.5 * double(cfg.horizon)));
}

TEST_CASE("queue fill grows by U per step until capacity")
{
    RunConfig cfg = tiny_config();
    TrainState<double> state(init_model<double>(cfg, 1), 10);
    for (Index s = 1; s <= 6; ++s) {
        train_step(state, random_batch(cfg, 2, 1, std::uint64_t(s)));
        CHECK(state.model.queue.fill() == std::min(s * cfg.prototypes, cfg.queue_size));
        CHECK(state.model.queue.ordered().bottomRows(cfg.prototypes) == state.model.trainable.prototypes);
    }
}

TEST_CASE("frozen parameters are bitwise unchanged by training")
{
    RunConfig cfg = tiny_config();
    TrainState<double> state(init_model<double>(cfg, 2), 10);
    const auto frozen = frozen_copy(state.model);
    const auto before = trainable_copy(state.model);
    for (int s = 0; s < 10; ++s)
        train_step(state, random_batch(cfg, 2, 2, std::uint64_t(100 + s)));
    const auto after = frozen_copy(state.model);
    REQUIRE(frozen.size() == after.size());
    for (std::size_t i = 0; i < frozen.size(); ++i)
        CHECK(std::memcmp(frozen[i].data(), after[i].data(), sizeof(double) * std::size_t(frozen[i].size())) == 0);
    const auto moved = trainable_copy(state.model);
    bool changed = false;
    for (std::size_t i = 0; i < moved.size(); ++i)
        changed = changed || moved[i] != before[i];
    CHECK(changed);
}

TEST_CASE("ablation flags zero exactly their own loss terms")
{
    for (int variant = 0; variant < 4; ++variant) {
        RunConfig cfg = tiny_config();
        cfg.disable_nncl = variant & 1;
        cfg.disable_neighborhood_tctp = variant & 2;
        TrainState<double> state(init_model<double>(cfg, 2), 10);
        for (int s = 0; s < 6; ++s) {
            const auto r = train_step(state, random_batch(cfg, 2, 2, std::uint64_t(s)));
            CHECK(r.loss_forecast > 0);
            CHECK((r.loss_proto == 0.0) == bool(variant & 2));
            // The nncl term switches on once the queue holds k rows.
            if (s > 0)
                CHECK((r.loss_nncl == 0.0) == bool(variant & 1));
            else
                CHECK(r.loss_nncl == 0.0);
        }
        // The forecast path keeps its shape.
        const auto trace = sample_forward(state.model, random_batch(cfg, 1, 1, 1).inputs[0], 0,
                                          retrieves_from_queue(state.model));
        CHECK(trace.prompt.rows() == cfg.prompt_length());
        CHECK(trace.forecast.size() == cfg.horizon);
        CHECK(trace.neighbors_from_bank == bool(variant & 1));
    }
}

TEST_CASE("gradients are independent of the thread count")
{
    RunConfig cfg = tiny_config();
    auto model = init_model<double>(cfg, 2);
    model.queue.push_batch(model.trainable.prototypes);
    const auto batch = random_batch(cfg, 7, 2, 4);
    TrainableParams<double> g1, g4;
    const auto r1 = compute_loss(model, batch, &g1, 1);
    const auto r4 = compute_loss(model, batch, &g4, 4);
    CHECK(r1.loss_total == r4.loss_total);
    const auto a = g1.tensors(), b = g4.tensors();
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(*a[i] == *b[i]);
}

TEST_CASE("fit")
{
    RunConfig cfg = tiny_config();
    cfg.lookback = 48;
    cfg.horizon = 12;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.max_steps = 15;
    cfg.eval_stride = 8;
    const auto frame = synthetic(1200);
    const auto s = data::split(frame, data::SplitSpec::preset("ratio_7_1_2"), cfg.lookback);

    SUBCASE("zero epochs return the initial state")
    {
        RunConfig c = cfg;
        c.epochs = 0;
        const auto r = fit<double>(c, s.train, s.val);
        CHECK(r.history.empty());
        CHECK(trainable_copy(r.best) == trainable_copy(init_model<double>(c, 2)));
    }
    SUBCASE("same seed gives identical trajectories")
    {
        const auto a = fit<double>(cfg, s.train, s.val);
        const auto b = fit<double>(cfg, s.train, s.val);
        REQUIRE(a.history.size() == 15);
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i)
            CHECK(a.history[i].loss_total == b.history[i].loss_total);
        CHECK(trainable_copy(a.best) == trainable_copy(b.best));
    }
    SUBCASE("few-shot prefix reduces the training windows")
    {
        RunConfig c = cfg;
        c.few_shot_fraction = 0.05;
        c.max_steps = 1;
        const auto r = fit<double>(c, s.train, s.val);
        const Index per_channel = s.train.length() - c.lookback - c.horizon + 1;
        CHECK(r.train_windows == 2 * data::few_shot_count(per_channel, 0.05));
    }
    SUBCASE("early stopping keeps the best validation model")
    {
        RunConfig c = cfg;
        c.max_steps = 0;
        c.epochs = 30;
        c.eval_every = 2;
        c.patience = 2;
        c.learning_rate = 0.2; // unstable on purpose
        c.batch_size = 64;
        try {
            const auto r = fit<double>(c, s.train, s.val);
            double best = std::numeric_limits<double>::infinity();
            for (const auto& v : r.validation)
                best = std::min(best, v.mse);
            CHECK(evaluate(r.best, s.val, EvalOptions{c.eval_stride}).mse == doctest::Approx(best));
        } catch (const RuntimeError& e) {
            CHECK(std::string(e.what()).find("diverged") != std::string::npos);
        }
    }
}

TEST_CASE("divergence aborts with a diagnostic")
{
    RunConfig cfg = tiny_config();
    TrainState<double> state(init_model<double>(cfg, 1), 10);
    auto batch = random_batch(cfg, 2, 1, 3);
    batch.targets[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(train_step(state, batch), doctest::Contains("diverged"), RuntimeError);
}

TEST_CASE("evaluate_forecaster examples")
{
    SUBCASE("a perfect forecaster scores zero")
    {
        data::SeriesFrame f;
        f.values.resize(2, 200);
        for (Index t = 0; t < 200; ++t) {
            f.values(0, t) = double(t % 4);
            f.values(1, t) = double((t * 7) % 4) - 1.5;
            f.timestamps.push_back(t);
        }
        f.channel_names = {"a", "b"};
        const Forecaster naive = [](const Eigen::VectorXd& x, Index) { return metrics::seasonal_naive(x, 4, 8); };
        const auto r = evaluate_forecaster(naive, f, 16, 8);
        CHECK(r.mse == 0.0);
        CHECK(r.mae == 0.0);
        CHECK(r.windows == 2 * (200 - 16 - 8 + 1));
    }
    SUBCASE("a zero forecaster on unit-variance targets scores about one")
    {
        std::mt19937_64 rng(12);
        std::normal_distribution<double> n(0, 1);
        data::SeriesFrame f;
        f.values.resize(1, 10000 + 8);
        for (Index t = 0; t < f.values.cols(); ++t) {
            f.values(0, t) = n(rng);
            f.timestamps.push_back(t);
        }
        f.channel_names = {"x"};
        const Forecaster zero = [](const Eigen::VectorXd&, Index) { return Eigen::VectorXd(Eigen::VectorXd::Zero(1)); };
        const auto r = evaluate_forecaster(zero, f, 8, 1);
        CHECK(r.windows == 10000);
        CHECK(std::abs(r.mse - 1.0) < 0.1);
    }
    SUBCASE("short-term metrics and the naive reference")
    {
        const auto frame = synthetic(400);
        const Forecaster naive = [](const Eigen::VectorXd& x, Index) { return metrics::seasonal_naive(x, 24, 48); };
        EvalOptions opt;
        opt.short_term = true;
        opt.period = 24;
        const auto r = evaluate_forecaster(naive, frame, 96, 48, opt);
        CHECK(r.owa == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.smape > 0);
    }
    SUBCASE("empty test set")
    {
        const Forecaster zero = [](const Eigen::VectorXd&, Index) { return Eigen::VectorXd(Eigen::VectorXd::Zero(4)); };
        CHECK_THROWS_AS(evaluate_forecaster(zero, synthetic(10), 8, 4), InvalidArgument);
    }
}

TEST_CASE("trainable share of parameters")
{
    SUBCASE("desk default")
    {
        const auto counts = parameter_counts(parameter_layout(RunConfig{}, 7));
        CHECK(counts.ratio() < 0.15);
        CHECK(init_model<double>(RunConfig{}, 7).counts().total == counts.total);
    }
    SUBCASE("zero layers")
    {
        RunConfig c;
        c.layers = 0;
        for (const auto& t : parameter_layout(c, 1))
            CHECK(t.name.find("attn") == std::string::npos);
    }
}
