// Command-line front end: train, evaluate, forecast, export-embeddings and
// make-synthetic. Exit status 1 marks runtime failures, 2 usage or
// configuration errors.

#include "nncl/checkpoint.hpp"
#include "nncl/config.hpp"
#include "nncl/data.hpp"
#include "nncl/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>

#ifndef NNCL_TLLM_VERSION
#define NNCL_TLLM_VERSION "0.0.0-unknown"
#endif

namespace {

using namespace nncl;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path, const std::string& what)
{
    if (!fs::is_regular_file(path))
        throw UsageError(what + " not found: " + path.string());
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

data::SeriesFrame read_frame(const fs::path& path, const RunConfig& cfg)
{
    require_file(path, "data file");
    data::CsvSchema schema;
    if (cfg.forward_fill)
        schema.missing = data::MissingPolicy::forward_fill;
    return data::load_csv(path, schema);
}

struct Prepared {
    data::Splits splits;
    std::optional<data::StandardScaler> scaler;
};

/// Splits by the configured preset and, when enabled, standardizes every
/// partition with statistics of the training partition.
Prepared prepare(const data::SeriesFrame& frame, const RunConfig& cfg,
                 std::optional<data::StandardScaler> scaler = {})
{
    Prepared p;
    p.splits = data::split(frame, data::SplitSpec::preset(cfg.split), cfg.lookback);
    if (cfg.scale) {
        p.scaler = scaler ? *scaler : data::StandardScaler::fit(p.splits.train);
        p.splits.train = p.scaler->transform(p.splits.train);
        p.splits.val = p.scaler->transform(p.splits.val);
        p.splits.test = p.scaler->transform(p.splits.test);
    }
    return p;
}

nlohmann::json report_json(const EvalReport& r)
{
    return {{"mse", r.mse}, {"mae", r.mae}, {"windows", r.windows}};
}

struct TrainOptions {
    fs::path config, data, out;
    std::optional<std::uint64_t> seed;
    std::optional<Index> horizon;
    std::optional<double> few_shot;
    std::vector<std::string> ablations;
};

int cmd_train(const TrainOptions& o)
{
    const auto started = utc_now();
    require_file(o.config, "config file");
    RunConfig cfg = RunConfig::load(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.horizon)
        cfg.horizon = *o.horizon;
    if (o.few_shot)
        cfg.few_shot_fraction = *o.few_shot;
    for (const auto& a : o.ablations)
        (a == "no-nncl" ? cfg.disable_nncl : cfg.disable_neighborhood_tctp) = true;
    cfg.validate();

    const auto frame = read_frame(o.data, cfg);
    const auto prep = prepare(frame, cfg);
    const auto& sp = prep.splits;

    std::optional<Model<double>> initial;
    if (!cfg.pretrained.empty()) {
        require_file(cfg.pretrained, "pretrained archive");
        initial = init_model<double>(cfg, frame.channels());
        load_pretrained(*initial, TensorArchive::load(cfg.pretrained));
    }
    const auto result = fit<double>(cfg, sp.train, sp.val, std::move(initial));

    fs::create_directories(o.out);
    const fs::path ckpt = o.out / "checkpoint.nnt";
    save_checkpoint(result.best, ckpt, prep.scaler);

    {
        std::ofstream h(o.out / "history.csv");
        if (!h)
            throw RuntimeError("cannot write " + (o.out / "history.csv").string());
        h << "step,loss_forecast,loss_nncl,loss_proto,loss_total\n";
        for (const auto& r : result.history)
            h << r.step << ',' << fmt(r.loss_forecast) << ',' << fmt(r.loss_nncl) << ','
              << fmt(r.loss_proto) << ',' << fmt(r.loss_total) << '\n';
    }

    // Metrics come from the stored checkpoint so they match what a later
    // evaluate call reproduces.
    const auto [stored, stored_scaler] = load_checkpoint<double>(ckpt);
    const auto val = evaluate(stored, sp.val);
    const auto test = evaluate(stored, sp.test);
    const auto counts = stored.counts();
    const Index full_windows =
        static_cast<Index>(data::window_refs(sp.train, cfg.lookback, cfg.horizon).size());

    nlohmann::json manifest = {
        {"version", NNCL_TLLM_VERSION},
        {"command", "train"},
        {"config", cfg.to_map()},
        {"config_text", cfg.to_text()},
        {"seed", cfg.seed},
        {"data", {{"path", o.data.string()},
                  {"sha256", data::file_fingerprint(o.data)},
                  {"channels", frame.channels()},
                  {"length", frame.length()}}},
        {"training", {{"steps", result.history.size()},
                      {"best_step", result.best_step},
                      {"train_windows_full", full_windows},
                      {"few_shot_fraction", cfg.few_shot_fraction},
                      {"train_windows_used", result.train_windows}}},
        {"parameters", {{"trainable", counts.trainable},
                        {"total", counts.total},
                        {"trainable_ratio", counts.ratio()}}},
        {"metrics", {{"validation", report_json(val)}, {"test", report_json(test)}}},
        {"artifacts", {"checkpoint.nnt", "history.csv", "manifest.json"}},
        {"started_at", started},
        {"finished_at", utc_now()},
    };
    std::ofstream(o.out / "manifest.json") << manifest.dump(2) << '\n';
    std::cout << "trained " << result.history.size() << " steps; test mse " << fmt(test.mse)
              << " mae " << fmt(test.mae) << "\nartifacts in " << o.out.string() << '\n';
    return 0;
}

struct LoadedCheckpoint {
    fs::path path;
    Model<double> model;
    std::optional<data::StandardScaler> scaler;
};

LoadedCheckpoint open_checkpoint(const fs::path& path)
{
    require_file(path, "checkpoint");
    auto [model, scaler] = load_checkpoint<double>(path);
    return {path, std::move(model), std::move(scaler)};
}

void check_channels(const LoadedCheckpoint& c, const data::SeriesFrame& frame)
{
    if (frame.channels() != c.model.channels)
        throw UsageError("checkpoint " + c.path.string() + " expects "
                         + std::to_string(c.model.channels) + " channels, data has "
                         + std::to_string(frame.channels()));
}

struct EvaluateOptions {
    std::vector<fs::path> checkpoints;
    fs::path data, out;
    std::vector<Index> horizons;
    bool short_term = false;
    Index period = 0;
    bool history_mase = false;
};

int cmd_evaluate(const EvaluateOptions& o)
{
    std::vector<LoadedCheckpoint> ckpts;
    for (const auto& p : o.checkpoints)
        ckpts.push_back(open_checkpoint(p));
    const auto frame = read_frame(o.data, ckpts.front().model.config);
    for (const auto& c : ckpts)
        check_channels(c, frame);

    std::vector<Index> horizons = o.horizons;
    if (horizons.empty())
        for (const auto& c : ckpts)
            horizons.push_back(c.model.config.horizon);

    struct Row {
        std::string label;
        EvalReport r;
    };
    std::vector<Row> rows;
    for (const Index h : horizons) {
        // Exact horizon match first, else the shortest longer horizon with
        // its forecast truncated.
        const LoadedCheckpoint* pick = nullptr;
        for (const auto& c : ckpts) {
            const Index ch = c.model.config.horizon;
            if (ch >= h && (!pick || ch < pick->model.config.horizon))
                pick = &c;
        }
        if (!pick)
            throw UsageError("no checkpoint covers horizon " + std::to_string(h));
        const auto& cfg = pick->model.config;
        const auto prep = prepare(frame, cfg, pick->scaler);
        EvalOptions opt;
        opt.short_term = o.short_term;
        opt.history_mase = o.history_mase;
        opt.period = o.period > 0 ? o.period : data::m4_periodicity(frame.frequency);
        const Model<double>& model = pick->model;
        const Forecaster f = [&](const Eigen::VectorXd& input, Index channel) {
            return Eigen::VectorXd(forecast(model, Vector<double>(input), channel).head(h));
        };
        rows.push_back({std::to_string(h), evaluate_forecaster(f, prep.splits.test, cfg.lookback, h, opt)});
    }

    Row avg{"Avg", {}};
    for (const auto& r : rows) {
        avg.r.mse += r.r.mse / double(rows.size());
        avg.r.mae += r.r.mae / double(rows.size());
        avg.r.smape += r.r.smape / double(rows.size());
        avg.r.mase += r.r.mase / double(rows.size());
        avg.r.owa += r.r.owa / double(rows.size());
        avg.r.windows += r.r.windows;
    }
    rows.push_back(avg);

    std::ostringstream csv;
    csv << "horizon,mse,mae" << (o.short_term ? ",smape,mase,owa" : "") << ",windows\n";
    for (const auto& r : rows) {
        csv << r.label << ',' << fmt(r.r.mse) << ',' << fmt(r.r.mae);
        if (o.short_term)
            csv << ',' << fmt(r.r.smape) << ',' << fmt(r.r.mase) << ',' << fmt(r.r.owa);
        csv << ',' << r.r.windows << '\n';
    }
    std::cout << csv.str();
    if (!o.out.empty()) {
        std::ofstream out(o.out);
        if (!out)
            throw RuntimeError("cannot write " + o.out.string());
        out << csv.str();
    }
    return 0;
}

struct ForecastOptions {
    fs::path checkpoint, data, out;
    std::optional<Index> end;
};

int cmd_forecast(const ForecastOptions& o)
{
    const auto ckpt = open_checkpoint(o.checkpoint);
    const auto& cfg = ckpt.model.config;
    auto frame = read_frame(o.data, cfg);
    check_channels(ckpt, frame);
    if (ckpt.scaler)
        frame = ckpt.scaler->transform(frame);
    const Index end = o.end.value_or(frame.length());
    if (end < cfg.lookback || end > frame.length())
        throw UsageError("--end must lie in [" + std::to_string(cfg.lookback) + ", "
                         + std::to_string(frame.length()) + "]");

    data::SeriesFrame out;
    out.values.resize(frame.channels(), cfg.horizon);
    out.channel_names = frame.channel_names;
    out.frequency = frame.frequency;
    for (Index c = 0; c < frame.channels(); ++c) {
        const Vector<double> input = frame.values.row(c).segment(end - cfg.lookback, cfg.lookback).transpose();
        out.values.row(c) = forecast(ckpt.model, input, c).transpose();
    }
    // Timestamps continue the input cadence when it is regular.
    const auto& ts = frame.timestamps;
    const std::int64_t last = ts[static_cast<std::size_t>(end - 1)];
    const std::int64_t delta = end >= 2 ? last - ts[static_cast<std::size_t>(end - 2)] : 1;
    for (Index h = 1; h <= cfg.horizon; ++h)
        out.timestamps.push_back(last + h * delta);
    if (ckpt.scaler)
        out = ckpt.scaler->inverse_transform(out);

    if (o.out.empty())
        data::write_csv(out, std::cout);
    else
        data::save_csv(out, o.out);
    return 0;
}

struct ExportOptions {
    fs::path checkpoint, out;
    std::string what;
    bool allow_empty = false;
};

int cmd_export(const ExportOptions& o)
{
    const auto ckpt = open_checkpoint(o.checkpoint);
    const auto& m = ckpt.model;
    TensorArchive a;
    a.metadata["source"] = o.checkpoint.string();
    a.metadata["step"] = m.step;
    if (o.what == "prototypes") {
        a.put_matrix("tctp/E", m.trainable.prototypes);
    } else if (o.what == "vocabulary") {
        a.put_matrix("vocab/W", m.frozen.vocabulary());
    } else {
        if (m.queue.empty() && !o.allow_empty)
            throw RuntimeError("support queue is empty (no training step recorded); pass "
                               "--allow-empty to export a zero-row tensor");
        a.put_matrix("support/Q", m.queue.ordered());
        a.metadata["queue_fill"] = m.queue.fill();
    }
    a.save(o.out);
    std::cout << "wrote " << o.what << " to " << o.out.string() << '\n';
    return 0;
}

struct SyntheticOptions {
    fs::path out;
    data::SyntheticSpec spec;
};

int cmd_make_synthetic(const SyntheticOptions& o)
{
    data::save_csv(data::make_synthetic(o.spec), o.out);
    std::cout << "wrote " << o.spec.channels << " x " << o.spec.length << " series to "
              << o.out.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Nearest-neighbor contrastive prompt forecasting with a partly frozen transformer"};
    app.set_version_flag("--version", std::string(NNCL_TLLM_VERSION));
    app.require_subcommand(1);

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Train a model and write checkpoint, history and manifest");
    t->add_option("--config", train.config, "Run configuration file")->required();
    t->add_option("--data", train.data, "Input CSV")->required();
    t->add_option("--out", train.out, "Output directory")->required();
    t->add_option("--seed", train.seed, "Override the configured seed");
    t->add_option("--horizon", train.horizon, "Override the configured horizon");
    t->add_option("--few-shot", train.few_shot, "Fraction of training windows to keep");
    t->add_option("--ablation", train.ablations, "Disable a component")
        ->check(CLI::IsMember({"no-nncl", "no-proto"}));

    EvaluateOptions eval;
    auto* e = app.add_subcommand("evaluate", "Per-horizon test metrics plus their average");
    e->add_option("--checkpoint", eval.checkpoints, "Checkpoint archive (repeatable)")->required();
    e->add_option("--data", eval.data, "Input CSV")->required();
    e->add_option("--horizon", eval.horizons, "Horizons to report (comma separated)")
        ->delimiter(',');
    e->add_option("--out", eval.out, "Also write the table to this CSV");
    e->add_flag("--short-term", eval.short_term, "Add SMAPE, MASE and OWA columns");
    e->add_option("--period", eval.period, "Seasonal period (default from the data frequency)");
    e->add_flag("--history-mase", eval.history_mase, "Scale MASE by the look-back window");

    ForecastOptions fc;
    auto* f = app.add_subcommand("forecast", "Emit the H-step forecast for one window as CSV");
    f->add_option("--checkpoint", fc.checkpoint, "Checkpoint archive")->required();
    f->add_option("--data", fc.data, "Input CSV")->required();
    f->add_option("--end", fc.end, "Exclusive end step of the look-back window (default: series end)");
    f->add_option("--out", fc.out, "Output CSV (default: stdout)");

    ExportOptions ex;
    auto* x = app.add_subcommand("export-embeddings", "Export prototypes, queue or vocabulary");
    x->add_option("--checkpoint", ex.checkpoint, "Checkpoint archive")->required();
    x->add_option("--what", ex.what, "Matrix to export")
        ->required()
        ->check(CLI::IsMember({"prototypes", "queue", "vocabulary"}));
    x->add_option("--out", ex.out, "Output tensor archive")->required();
    x->add_flag("--allow-empty", ex.allow_empty, "Export an empty queue as a zero-row tensor");

    SyntheticOptions syn;
    auto* s = app.add_subcommand("make-synthetic", "Write the seeded synthetic benchmark CSV");
    s->add_option("--out", syn.out, "Output CSV")->required();
    s->add_option("--seed", syn.spec.seed, "Generator seed");
    s->add_option("--length", syn.spec.length, "Number of steps");
    s->add_option("--channels", syn.spec.channels, "Number of channels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*t)
            return cmd_train(train);
        if (*e)
            return cmd_evaluate(eval);
        if (*f)
            return cmd_forecast(fc);
        if (*x)
            return cmd_export(ex);
        return cmd_make_synthetic(syn);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
