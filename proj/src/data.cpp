#include "nncl/data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace nncl::data {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(trim(field));
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

bool is_missing(const std::string& cell)
{
    if (cell.empty())
        return true;
    std::string lower(cell.size(), ' ');
    std::transform(cell.begin(), cell.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "nan" || lower == "na" || lower == "null" || lower == "?";
}

std::optional<double> parse_double(const std::string& cell)
{
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '+')
        ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        return std::nullopt;
    return value;
}

std::optional<std::int64_t> parse_integer(const std::string& cell)
{
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        return std::nullopt;
    return value;
}

// Accepts YYYY-MM-DD with an optional [T| ]HH:MM[:SS[.fff]] and trailing Z.
std::optional<std::int64_t> parse_iso8601(const std::string& cell)
{
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 0;
    if (cell.size() < 10 || cell[4] != '-' || cell[7] != '-')
        return std::nullopt;
    auto digits = [&](std::size_t pos, std::size_t len, int& out) {
        auto [ptr, ec] = std::from_chars(cell.data() + pos, cell.data() + pos + len, out);
        return ec == std::errc() && ptr == cell.data() + pos + len;
    };
    if (!digits(0, 4, y) || !digits(5, 2, mo) || !digits(8, 2, d))
        return std::nullopt;
    std::size_t pos = 10;
    if (pos < cell.size()) {
        sep = cell[pos];
        if (sep != 'T' && sep != ' ')
            return std::nullopt;
        if (cell.size() < pos + 6 || cell[pos + 3] != ':')
            return std::nullopt;
        if (!digits(pos + 1, 2, h) || !digits(pos + 4, 2, mi))
            return std::nullopt;
        pos += 6;
        if (pos < cell.size() && cell[pos] == ':') {
            std::size_t end = cell.size();
            if (cell.back() == 'Z')
                --end;
            const auto parsed = parse_double(cell.substr(pos + 1, end - pos - 1));
            if (!parsed)
                return std::nullopt;
            sec = *parsed;
        } else if (pos < cell.size() && !(pos + 1 == cell.size() && cell[pos] == 'Z')) {
            return std::nullopt;
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec < 0.0 || sec >= 61.0)
        return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60
         + static_cast<std::int64_t>(sec);
}

Frequency infer_frequency(const std::vector<std::int64_t>& ts, bool integral_index)
{
    if (integral_index || ts.size() < 2)
        return Frequency::other;
    const std::int64_t step = ts[1] - ts[0];
    constexpr std::int64_t day = 86400;
    if (step == 600)
        return Frequency::min10;
    if (step == 900)
        return Frequency::min15;
    if (step == 3600)
        return Frequency::hourly;
    if (step == day)
        return Frequency::daily;
    if (step == 7 * day)
        return Frequency::weekly;
    if (step >= 28 * day && step <= 31 * day)
        return Frequency::monthly;
    if (step >= 89 * day && step <= 92 * day)
        return Frequency::quarterly;
    if (step >= 365 * day && step <= 366 * day)
        return Frequency::yearly;
    return Frequency::other;
}

std::string format_timestamp(std::int64_t t, Frequency f)
{
    if (f == Frequency::other)
        return std::to_string(t);
    using namespace std::chrono;
    const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
    const std::int64_t rem = t - static_cast<std::int64_t>(days) * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

template <typename Sample>
std::vector<Sample> few_shot_impl(const std::vector<Sample>& samples, double fraction)
{
    require(!samples.empty(), "few_shot_subset: empty input");
    require(fraction > 0.0 && fraction <= 1.0, "few_shot_subset: fraction must lie in (0, 1]");

    std::map<Index, std::vector<std::size_t>> per_channel;
    for (std::size_t i = 0; i < samples.size(); ++i)
        per_channel[samples[i].channel_index].push_back(i);

    std::vector<char> keep(samples.size(), 0);
    for (auto& [channel, indices] : per_channel) {
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].window_start < samples[b].window_start;
        });
        const Index n = few_shot_count(static_cast<Index>(indices.size()), fraction);
        for (Index j = 0; j < n; ++j)
            keep[indices[static_cast<std::size_t>(j)]] = 1;
    }
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (keep[i])
            out.push_back(samples[i]);
    return out;
}

std::string sha256_hex(const void* data, std::size_t size)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace

std::string to_string(Frequency f)
{
    switch (f) {
    case Frequency::hourly: return "hourly";
    case Frequency::min15: return "15min";
    case Frequency::min10: return "10min";
    case Frequency::daily: return "daily";
    case Frequency::weekly: return "weekly";
    case Frequency::monthly: return "monthly";
    case Frequency::quarterly: return "quarterly";
    case Frequency::yearly: return "yearly";
    case Frequency::other: return "other";
    }
    return "other";
}

Frequency frequency_from_string(const std::string& name)
{
    for (auto f : {Frequency::hourly, Frequency::min15, Frequency::min10, Frequency::daily,
                   Frequency::weekly, Frequency::monthly, Frequency::quarterly, Frequency::yearly,
                   Frequency::other})
        if (to_string(f) == name)
            return f;
    std::string lower(name.size(), ' ');
    std::transform(name.begin(), name.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower != name)
        return frequency_from_string(lower);
    throw InvalidArgument("unknown frequency '" + name + "'");
}

SeriesFrame SeriesFrame::slice(Index begin, Index end) const
{
    require(0 <= begin && begin < end && end <= length(), "SeriesFrame::slice: bad range");
    SeriesFrame out;
    out.values = values.middleCols(begin, end - begin);
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    out.frequency = frequency;
    out.channel_names = channel_names;
    return out;
}

void SeriesFrame::validate() const
{
    require(channels() >= 1 && length() >= 1, "SeriesFrame: needs at least one channel and step");
    require(static_cast<Index>(timestamps.size()) == length(),
            "SeriesFrame: timestamp count differs from series length");
    require(static_cast<Index>(channel_names.size()) == channels(),
            "SeriesFrame: channel name count differs from channel count");
    require(values.allFinite(), "SeriesFrame: non-finite value");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        require(timestamps[i] > timestamps[i - 1], "SeriesFrame: timestamps not strictly increasing");
}

SplitSpec SplitSpec::ett_hourly()
{
    constexpr Index month = 30 * 24;
    return SplitSpec{12.0 * month, 16.0 * month, SplitMode::absolute, 20 * month};
}

SplitSpec SplitSpec::ett_minute()
{
    constexpr Index month = 30 * 24 * 4;
    return SplitSpec{12.0 * month, 16.0 * month, SplitMode::absolute, 20 * month};
}

SplitSpec SplitSpec::preset(const std::string& name)
{
    if (name == "ett_hourly")
        return ett_hourly();
    if (name == "ett_minute")
        return ett_minute();
    if (name == "ratio_7_1_2")
        return SplitSpec{0.7, 0.8, SplitMode::ratio, std::nullopt};
    throw InvalidArgument("unknown split preset '" + name + "'");
}

ParseError::ParseError(std::size_t row, std::string column, const std::string& what)
    : RuntimeError("parse error at row " + std::to_string(row) + ", column '" + column
                   + "': " + what),
      row_(row), column_(std::move(column))
{
}

SeriesFrame load_csv(const std::filesystem::path& path, const CsvSchema& schema)
{
    std::ifstream in(path);
    if (!in)
        throw RuntimeError("file not found: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw ParseError(0, "", "missing header row");
    const auto header = split_fields(line);
    if (header.size() < 2)
        throw ParseError(0, "", "header needs a timestamp column and at least one value column");

    std::vector<std::size_t> columns;
    std::vector<std::string> names;
    if (schema.value_columns.empty()) {
        for (std::size_t c = 1; c < header.size(); ++c) {
            columns.push_back(c);
            names.push_back(header[c]);
        }
    } else {
        for (const auto& wanted : schema.value_columns) {
            auto it = std::find(header.begin() + 1, header.end(), wanted);
            if (it == header.end())
                throw ParseError(0, wanted, "column not present in header");
            columns.push_back(static_cast<std::size_t>(it - header.begin()));
            names.push_back(wanted);
        }
    }

    std::vector<std::int64_t> timestamps;
    std::vector<std::vector<double>> rows;
    bool integral_index = true;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError(row, "", "expected " + std::to_string(header.size()) + " fields, got "
                                          + std::to_string(fields.size()));
        std::int64_t stamp = 0;
        if (auto iso = parse_iso8601(fields[0])) {
            stamp = *iso;
            integral_index = false;
        } else if (auto idx = parse_integer(fields[0])) {
            stamp = *idx;
        } else {
            throw ParseError(row, header[0], "cannot parse timestamp '" + fields[0] + "'");
        }
        if (!timestamps.empty() && stamp <= timestamps.back())
            throw ParseError(row, header[0], "timestamps are not strictly increasing");
        timestamps.push_back(stamp);

        std::vector<double> values(columns.size());
        for (std::size_t j = 0; j < columns.size(); ++j) {
            const auto& cell = fields[columns[j]];
            if (is_missing(cell)) {
                if (schema.missing == MissingPolicy::error || rows.empty())
                    throw ParseError(row, names[j], "missing value");
                values[j] = rows.back()[j];
                continue;
            }
            const auto v = parse_double(cell);
            if (!v || !std::isfinite(*v))
                throw ParseError(row, names[j], "non-numeric value '" + cell + "'");
            values[j] = *v;
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty())
        throw ParseError(0, "", "no data rows");

    SeriesFrame frame;
    frame.values.resize(static_cast<Index>(columns.size()), static_cast<Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < columns.size(); ++j)
            frame.values(static_cast<Index>(j), static_cast<Index>(t)) = rows[t][j];
    frame.timestamps = std::move(timestamps);
    frame.channel_names = std::move(names);
    frame.frequency = schema.frequency.value_or(infer_frequency(frame.timestamps, integral_index));
    frame.validate();
    return frame;
}

void save_csv(const SeriesFrame& frame, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw RuntimeError("cannot write " + path.string());
    write_csv(frame, out);
    if (!out)
        throw RuntimeError("failed writing " + path.string());
}

void write_csv(const SeriesFrame& frame, std::ostream& out)
{
    out << (frame.frequency == Frequency::other ? "index" : "date");
    for (const auto& name : frame.channel_names)
        out << ',' << name;
    out << '\n';
    char buf[64];
    for (Index t = 0; t < frame.length(); ++t) {
        out << format_timestamp(frame.timestamps[static_cast<std::size_t>(t)], frame.frequency);
        for (Index c = 0; c < frame.channels(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", frame.values(c, t));
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::tuple<Index, Index, Index> resolve_borders(const SplitSpec& spec, Index total)
{
    Index train_end = 0, val_end = 0;
    if (spec.mode == SplitMode::ratio) {
        require(spec.train_end > 0.0 && spec.val_end <= 1.0,
                "split: ratio borders must lie in (0, 1]");
        train_end = static_cast<Index>(std::floor(spec.train_end * static_cast<double>(total)));
        val_end = static_cast<Index>(std::floor(spec.val_end * static_cast<double>(total)));
    } else {
        train_end = static_cast<Index>(spec.train_end);
        val_end = static_cast<Index>(spec.val_end);
    }
    const Index test_end = spec.test_end ? std::min(*spec.test_end, total) : total;
    require(0 < train_end && train_end < val_end && val_end < test_end,
            "split: borders must satisfy 0 < train_end < val_end < end of series");
    return {train_end, val_end, test_end};
}

Splits split(const SeriesFrame& frame, const SplitSpec& spec, Index lookback)
{
    const auto [train_end, val_end, test_end] = resolve_borders(spec, frame.length());
    require(lookback >= 1, "split: look-back must be positive");
    require(train_end >= lookback + 1, "split: training partition shorter than look-back + 1");
    require(val_end - train_end >= 1 && test_end - val_end >= 1, "split: empty partition");
    require(train_end - lookback >= 0, "split: validation extension runs before series start");
    return Splits{frame.slice(0, train_end), frame.slice(train_end - lookback, val_end),
                  frame.slice(val_end - lookback, test_end)};
}

std::vector<WindowRef> window_refs(const SeriesFrame& frame, Index lookback, Index horizon)
{
    require(lookback >= 1 && horizon >= 1, "window: look-back and horizon must be positive");
    require(frame.length() >= lookback + horizon,
            "window: frame of length " + std::to_string(frame.length())
                + " is shorter than look-back + horizon = "
                + std::to_string(lookback + horizon));
    const Index starts = frame.length() - lookback - horizon + 1;
    std::vector<WindowRef> out;
    out.reserve(static_cast<std::size_t>(starts * frame.channels()));
    for (Index c = 0; c < frame.channels(); ++c)
        for (Index s = 0; s < starts; ++s)
            out.push_back({c, s});
    return out;
}

WindowSample materialize(const SeriesFrame& frame, const WindowRef& ref, Index lookback,
                         Index horizon)
{
    WindowSample s;
    s.channel_index = ref.channel_index;
    s.window_start = ref.window_start;
    s.input = frame.values.row(ref.channel_index).segment(ref.window_start, lookback).transpose();
    s.target = frame.values.row(ref.channel_index)
                   .segment(ref.window_start + lookback, horizon)
                   .transpose();
    return s;
}

std::vector<WindowSample> window(const SeriesFrame& frame, Index lookback, Index horizon)
{
    const auto refs = window_refs(frame, lookback, horizon);
    std::vector<WindowSample> out;
    out.reserve(refs.size());
    for (const auto& r : refs)
        out.push_back(materialize(frame, r, lookback, horizon));
    return out;
}

Index few_shot_count(Index count, double fraction)
{
    // The small slack keeps products such as 0.1 * 100 from rounding up.
    const double raw = fraction * static_cast<double>(count);
    return std::min(count, static_cast<Index>(std::ceil(raw - 1e-9)));
}

std::vector<WindowSample> few_shot_subset(const std::vector<WindowSample>& samples,
                                          double fraction)
{
    return few_shot_impl(samples, fraction);
}

std::vector<WindowRef> few_shot_subset(const std::vector<WindowRef>& samples, double fraction)
{
    return few_shot_impl(samples, fraction);
}

StandardScaler StandardScaler::fit(const SeriesFrame& frame)
{
    StandardScaler s;
    s.mean = frame.values.rowwise().mean();
    s.scale.resize(frame.channels());
    for (Index c = 0; c < frame.channels(); ++c) {
        const double var = (frame.values.row(c).array() - s.mean[c]).square().mean();
        s.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

SeriesFrame StandardScaler::transform(const SeriesFrame& frame) const
{
    require(mean.size() == frame.channels(), "StandardScaler: channel count mismatch");
    SeriesFrame out = frame;
    for (Index c = 0; c < frame.channels(); ++c)
        out.values.row(c) = (frame.values.row(c).array() - mean[c]) / scale[c];
    return out;
}

SeriesFrame StandardScaler::inverse_transform(const SeriesFrame& frame) const
{
    require(mean.size() == frame.channels(), "StandardScaler: channel count mismatch");
    SeriesFrame out = frame;
    for (Index c = 0; c < frame.channels(); ++c)
        out.values.row(c) = frame.values.row(c).array() * scale[c] + mean[c];
    return out;
}

std::vector<M4Series> load_m4(const std::filesystem::path& values_path,
                              const std::filesystem::path& metadata_path)
{
    std::ifstream meta(metadata_path);
    if (!meta)
        throw RuntimeError("file not found: " + metadata_path.string());
    std::string line;
    if (!std::getline(meta, line))
        throw ParseError(0, "", "metadata file has no header");
    const auto header = split_fields(line);
    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ParseError(0, name, "metadata column missing");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = find_col("id"), freq_col = find_col("frequency"),
               horizon_col = find_col("horizon");
    std::map<std::string, std::pair<Frequency, Index>> info;
    std::size_t row = 0;
    while (std::getline(meta, line)) {
        if (trim(line).empty())
            continue;
        ++row;
        const auto f = split_fields(line);
        if (f.size() != header.size())
            throw ParseError(row, "", "wrong field count in metadata");
        const auto horizon = parse_integer(f[horizon_col]);
        if (!horizon || *horizon < 1)
            throw ParseError(row, "horizon", "horizon must be a positive integer");
        Frequency freq;
        try {
            freq = frequency_from_string(f[freq_col]);
        } catch (const InvalidArgument& e) {
            throw ParseError(row, "frequency", e.what());
        }
        info[f[id_col]] = {freq, static_cast<Index>(*horizon)};
    }

    std::ifstream in(values_path);
    if (!in)
        throw RuntimeError("file not found: " + values_path.string());
    std::vector<M4Series> out;
    row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        ++row;
        const auto f = split_fields(line);
        if (f.size() < 2)
            throw ParseError(row, "", "series line needs an id and at least one value");
        M4Series s;
        s.id = f[0];
        const auto it = info.find(s.id);
        if (it == info.end())
            throw ParseError(row, "id", "series '" + s.id + "' missing from metadata");
        s.frequency = it->second.first;
        s.horizon = it->second.second;
        std::vector<double> values;
        for (std::size_t j = 1; j < f.size(); ++j) {
            if (f[j].empty())
                continue; // ragged rows pad with trailing blanks
            const auto v = parse_double(f[j]);
            if (!v || !std::isfinite(*v))
                throw ParseError(row, "V" + std::to_string(j), "non-numeric value '" + f[j] + "'");
            values.push_back(*v);
        }
        s.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
        out.push_back(std::move(s));
    }
    return out;
}

Index m4_periodicity(Frequency f)
{
    switch (f) {
    case Frequency::yearly: return 1;
    case Frequency::quarterly: return 4;
    case Frequency::monthly: return 12;
    case Frequency::weekly: return 1;
    case Frequency::daily: return 1;
    case Frequency::hourly: return 24;
    default: return 1;
    }
}

SeriesFrame make_synthetic(const SyntheticSpec& spec)
{
    require(spec.length >= 1 && spec.channels >= 1, "make_synthetic: empty series requested");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr double two_pi = 6.283185307179586;

    SeriesFrame frame;
    frame.values.resize(spec.channels, spec.length);
    for (Index c = 0; c < spec.channels; ++c) {
        const double phase1 = two_pi * unit(rng);
        const double phase2 = two_pi * unit(rng);
        const double amp_scale = 0.75 + 0.5 * unit(rng);
        const double trend = spec.trend_per_step * (0.5 + unit(rng));
        const double offset = 2.0 * unit(rng) - 1.0;
        for (Index t = 0; t < spec.length; ++t) {
            const double td = static_cast<double>(t);
            frame.values(c, t) =
                offset + amp_scale * spec.primary_amplitude
                             * std::sin(two_pi * td / spec.primary_period + phase1)
                + amp_scale * spec.secondary_amplitude
                      * std::sin(two_pi * td / spec.secondary_period + phase2)
                + trend * td + spec.noise_std * noise(rng);
        }
        frame.channel_names.push_back("ch" + std::to_string(c));
    }
    // 2016-07-01 00:00:00, the start of the ETT recordings.
    constexpr std::int64_t origin = 1467331200;
    frame.timestamps.resize(static_cast<std::size_t>(spec.length));
    for (Index t = 0; t < spec.length; ++t)
        frame.timestamps[static_cast<std::size_t>(t)] = origin + 3600 * t;
    frame.frequency = Frequency::hourly;
    return frame;
}

std::string fingerprint(const SeriesFrame& frame)
{
    std::vector<unsigned char> bytes;
    auto append = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), b, b + n);
    };
    const std::int64_t dims[2] = {frame.channels(), frame.length()};
    append(dims, sizeof(dims));
    // Channel-major so the hash does not depend on Eigen's storage order.
    for (Index c = 0; c < frame.channels(); ++c)
        for (Index t = 0; t < frame.length(); ++t) {
            const double v = frame.values(c, t);
            append(&v, sizeof(v));
        }
    append(frame.timestamps.data(), frame.timestamps.size() * sizeof(std::int64_t));
    return sha256_hex(bytes.data(), bytes.size());
}

std::string file_fingerprint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw RuntimeError("file not found: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(content.data(), content.size());
}

} // namespace nncl::data
