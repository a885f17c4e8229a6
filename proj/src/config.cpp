#include "nncl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace nncl {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value)
{
    Int out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key, "expected an integer, got '" + value + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& value)
{
    double out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key, "expected a real number, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::string format_real(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field index_field(T RunConfig::*member, const char* key)
{
    return {[member, key](RunConfig& c, const std::string& v) { c.*member = parse_int<T>(key, v); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member, const char* key)
{
    return {[member, key](RunConfig& c, const std::string& v) { c.*member = parse_real(key, v); },
            [member](const RunConfig& c) { return format_real(c.*member); }};
}

Field bool_field(bool RunConfig::*member, const char* key)
{
    return {[member, key](RunConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
            [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(std::string RunConfig::*member)
{
    return {[member](RunConfig& c, const std::string& v) { c.*member = v; },
            [member](const RunConfig& c) { return c.*member; }};
}

template <typename E>
Field enum_field(E RunConfig::*member, const char* key,
                 std::vector<std::pair<std::string, E>> names)
{
    return {[member, key, names](RunConfig& c, const std::string& v) {
                for (const auto& [n, e] : names)
                    if (n == v) {
                        c.*member = e;
                        return;
                    }
                std::string allowed;
                for (const auto& [n, e] : names)
                    allowed += (allowed.empty() ? "" : ", ") + n;
                throw ConfigError(key, "'" + v + "' is not one of {" + allowed + "}");
            },
            [member, names](const RunConfig& c) {
                for (const auto& [n, e] : names)
                    if (e == c.*member)
                        return n;
                return std::string();
            }};
}

const std::map<std::string, Field>& fields()
{
    static const std::map<std::string, Field> table = {
        {"lookback", index_field(&RunConfig::lookback, "lookback")},
        {"horizon", index_field(&RunConfig::horizon, "horizon")},
        {"patch_length", index_field(&RunConfig::patch_length, "patch_length")},
        {"patch_stride", index_field(&RunConfig::patch_stride, "patch_stride")},
        {"series_pooling",
         enum_field(&RunConfig::series_pooling, "series_pooling",
                    {{"patch_linear", SeriesPooling::patch_linear},
                     {"flatten", SeriesPooling::flatten},
                     {"mean", SeriesPooling::mean}})},
        {"head_positions", enum_field(&RunConfig::head_positions, "head_positions",
                                      {{"all", HeadPositions::all},
                                       {"patches", HeadPositions::patches}})},
        {"width", index_field(&RunConfig::width, "width")},
        {"layers", index_field(&RunConfig::layers, "layers")},
        {"heads", index_field(&RunConfig::heads, "heads")},
        {"vocab_size", index_field(&RunConfig::vocab_size, "vocab_size")},
        {"max_positions", index_field(&RunConfig::max_positions, "max_positions")},
        {"causal", bool_field(&RunConfig::causal, "causal")},
        {"init_std", real_field(&RunConfig::init_std, "init_std")},
        {"pretrained", string_field(&RunConfig::pretrained)},
        {"prototypes", index_field(&RunConfig::prototypes, "prototypes")},
        {"queue_size", index_field(&RunConfig::queue_size, "queue_size")},
        {"neighbors", index_field(&RunConfig::neighbors, "neighbors")},
        {"tau", real_field(&RunConfig::tau, "tau")},
        {"nncl_aggregation", enum_field(&RunConfig::nncl_aggregation, "nncl_aggregation",
                                        {{"mean", NnclAggregation::mean},
                                         {"sum", NnclAggregation::sum}})},
        {"proto_vocab_sample", index_field(&RunConfig::proto_vocab_sample, "proto_vocab_sample")},
        {"revin_affine", bool_field(&RunConfig::revin_affine, "revin_affine")},
        {"revin_eps", real_field(&RunConfig::revin_eps, "revin_eps")},
        {"lambda", real_field(&RunConfig::lambda, "lambda")},
        {"learning_rate", real_field(&RunConfig::learning_rate, "learning_rate")},
        {"lr_schedule", enum_field(&RunConfig::lr_schedule, "lr_schedule",
                                   {{"constant", LrSchedule::constant},
                                    {"cosine", LrSchedule::cosine},
                                    {"step", LrSchedule::step}})},
        {"lr_step_size", index_field(&RunConfig::lr_step_size, "lr_step_size")},
        {"lr_gamma", real_field(&RunConfig::lr_gamma, "lr_gamma")},
        {"adam_beta1", real_field(&RunConfig::adam_beta1, "adam_beta1")},
        {"adam_beta2", real_field(&RunConfig::adam_beta2, "adam_beta2")},
        {"adam_eps", real_field(&RunConfig::adam_eps, "adam_eps")},
        {"weight_decay", real_field(&RunConfig::weight_decay, "weight_decay")},
        {"batch_size", index_field(&RunConfig::batch_size, "batch_size")},
        {"epochs", index_field(&RunConfig::epochs, "epochs")},
        {"max_steps", index_field(&RunConfig::max_steps, "max_steps")},
        {"patience", index_field(&RunConfig::patience, "patience")},
        {"eval_every", index_field(&RunConfig::eval_every, "eval_every")},
        {"eval_stride", index_field(&RunConfig::eval_stride, "eval_stride")},
        {"seed", index_field(&RunConfig::seed, "seed")},
        {"few_shot_fraction", real_field(&RunConfig::few_shot_fraction, "few_shot_fraction")},
        {"disable_nncl", bool_field(&RunConfig::disable_nncl, "disable_nncl")},
        {"disable_neighborhood_tctp",
         bool_field(&RunConfig::disable_neighborhood_tctp, "disable_neighborhood_tctp")},
        {"split", string_field(&RunConfig::split)},
        {"scale", bool_field(&RunConfig::scale, "scale")},
        {"forward_fill", bool_field(&RunConfig::forward_fill, "forward_fill")},
    };
    return table;
}

void check(bool ok, const char* key, const std::string& what)
{
    if (!ok)
        throw ConfigError(key, what);
}

} // namespace

Index RunConfig::patch_count() const
{
    return nncl::patch_count(lookback, patch_length, patch_stride);
}

Index RunConfig::prompt_length() const
{
    return patch_count() + neighbors;
}

Index RunConfig::head_inputs() const
{
    return (head_positions == HeadPositions::all ? prompt_length() : patch_count()) * width;
}

PatchConfig RunConfig::patch_config() const
{
    return PatchConfig{patch_length, patch_stride, width};
}

BackboneConfig RunConfig::backbone_config() const
{
    BackboneConfig b;
    b.layers = layers;
    b.heads = heads;
    b.width = width;
    b.max_positions = max_positions;
    b.vocab_size = vocab_size;
    b.causal = causal;
    return b;
}

void RunConfig::validate() const
{
    check(lookback >= 1, "lookback", "must be positive");
    check(horizon >= 1, "horizon", "must be positive");
    check(patch_stride >= 1 && patch_stride <= patch_length, "patch_stride",
          "must satisfy 1 <= patch_stride <= patch_length");
    check(patch_length <= lookback, "patch_length", "must not exceed lookback");
    check(width >= 1, "width", "must be positive");
    check(layers >= 0, "layers", "must be non-negative");
    check(heads >= 1 && width % heads == 0, "heads", "must divide width");
    check(prototypes >= 1, "prototypes", "must be positive");
    check(vocab_size > prototypes, "vocab_size", "must exceed the prototype count");
    check(queue_size > prototypes && queue_size % prototypes == 0, "queue_size",
          "must be a multiple of prototypes and larger than it");
    check(neighbors >= 0, "neighbors", "must be non-negative");
    check(neighbors <= prototypes, "neighbors", "must not exceed the prototype count");
    check(max_positions >= prompt_length(), "max_positions",
          "must be at least the prompt length " + std::to_string(prompt_length()));
    check(tau > 0, "tau", "must be positive");
    check(lambda >= 0, "lambda", "must be non-negative");
    check(learning_rate > 0, "learning_rate", "must be positive");
    check(batch_size >= 1, "batch_size", "must be positive");
    check(epochs >= 0, "epochs", "must be non-negative");
    check(max_steps >= 0, "max_steps", "must be non-negative");
    check(patience >= 0, "patience", "must be non-negative");
    check(eval_every >= 0, "eval_every", "must be non-negative");
    check(eval_stride >= 1, "eval_stride", "must be positive");
    check(few_shot_fraction > 0 && few_shot_fraction <= 1, "few_shot_fraction",
          "must lie in (0, 1]");
    check(revin_eps > 0, "revin_eps", "must be positive");
    check(init_std >= 0, "init_std", "must be non-negative");
    check(proto_vocab_sample >= 0 && proto_vocab_sample <= vocab_size, "proto_vocab_sample",
          "must lie in [0, vocab_size]");
    check(lr_step_size >= 1, "lr_step_size", "must be positive");
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    const auto& table = fields();
    const auto it = table.find(key);
    if (it == table.end())
        throw ConfigError(key, "unknown key");
    it->second.set(*this, value);
}

std::map<std::string, std::string> RunConfig::to_map() const
{
    std::map<std::string, std::string> out;
    for (const auto& [key, field] : fields())
        out[key] = field.get(*this);
    return out;
}

std::string RunConfig::to_text() const
{
    std::ostringstream out;
    for (const auto& [key, value] : to_map())
        out << key << " = " << value << '\n';
    return out.str();
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& values)
{
    RunConfig c;
    for (const auto& [key, value] : values)
        c.set(key, value);
    return c;
}

RunConfig RunConfig::parse(const std::string& text)
{
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, "line " + std::to_string(lineno) + " is not 'key = value'");
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw RuntimeError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

} // namespace nncl
