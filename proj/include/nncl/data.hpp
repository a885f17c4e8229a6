#pragma once

#include "nncl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nncl::data {

enum class Frequency { hourly, min15, min10, daily, weekly, monthly, quarterly, yearly, other };

std::string to_string(Frequency f);
Frequency frequency_from_string(const std::string& name);

/// Multivariate series, one row per channel. Timestamps are seconds since the
/// Unix epoch, or plain step indices when the source column is integral.
struct SeriesFrame {
    Eigen::MatrixXd values; // M x T_total
    std::vector<std::int64_t> timestamps;
    Frequency frequency = Frequency::other;
    std::vector<std::string> channel_names;

    Index channels() const { return values.rows(); }
    Index length() const { return values.cols(); }

    /// Steps [begin, end) of every channel.
    SeriesFrame slice(Index begin, Index end) const;

    /// Throws InvalidArgument if any frame invariant is broken.
    void validate() const;
};

struct WindowSample {
    Eigen::VectorXd input;  // length T
    Eigen::VectorXd target; // length H
    Index channel_index = 0;
    Index window_start = 0;
};

/// Lightweight reference to a window inside a frame; the training loop uses
/// these instead of materialized samples.
struct WindowRef {
    Index channel_index = 0;
    Index window_start = 0;
};

enum class SplitMode { ratio, absolute };

/// Partition borders. In ratio mode the borders are fractions of the series
/// length; in absolute mode they are step indices.
struct SplitSpec {
    double train_end = 0.7;
    double val_end = 0.8;
    SplitMode mode = SplitMode::ratio;
    /// Optional end of the test partition (absolute steps); the ETT presets
    /// stop at 20 months.
    std::optional<Index> test_end;

    /// ETT hourly convention: 12/4/4 months of 30 days.
    static SplitSpec ett_hourly();
    /// ETT 15-minute convention: 12/4/4 months of 30 days.
    static SplitSpec ett_minute();
    static SplitSpec preset(const std::string& name);
};

struct Splits {
    SeriesFrame train;
    SeriesFrame val;
    SeriesFrame test;
};

enum class MissingPolicy { error, forward_fill };

struct CsvSchema {
    /// Value columns to keep; empty means every column after the first.
    std::vector<std::string> value_columns;
    MissingPolicy missing = MissingPolicy::error;
    std::optional<Frequency> frequency;
};

/// Parse failure with the 1-based data row (header excluded) and the column
/// name where it happened.
class ParseError : public RuntimeError {
public:
    ParseError(std::size_t row, std::string column, const std::string& what);
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

SeriesFrame load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void save_csv(const SeriesFrame& frame, const std::filesystem::path& path);
void write_csv(const SeriesFrame& frame, std::ostream& out);

/// Chronological split. Validation and test frames start T steps before their
/// border so the first forecast window may look back into the previous
/// partition.
Splits split(const SeriesFrame& frame, const SplitSpec& spec, Index lookback);

/// Resolves a split spec to absolute borders (train_end, val_end, test_end).
std::tuple<Index, Index, Index> resolve_borders(const SplitSpec& spec, Index total_length);

/// Every (channel, start) window with stride 1.
std::vector<WindowSample> window(const SeriesFrame& frame, Index lookback, Index horizon);
std::vector<WindowRef> window_refs(const SeriesFrame& frame, Index lookback, Index horizon);
WindowSample materialize(const SeriesFrame& frame, const WindowRef& ref, Index lookback,
                         Index horizon);

/// Chronologically first ceil(fraction * count) windows of each channel.
std::vector<WindowSample> few_shot_subset(const std::vector<WindowSample>& samples,
                                          double fraction);
std::vector<WindowRef> few_shot_subset(const std::vector<WindowRef>& samples, double fraction);

/// Number of windows kept per channel for `count` available windows.
Index few_shot_count(Index count, double fraction);

/// Per-channel z-scoring fitted on a reference frame (the training split).
struct StandardScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static StandardScaler fit(const SeriesFrame& frame);
    SeriesFrame transform(const SeriesFrame& frame) const;
    SeriesFrame inverse_transform(const SeriesFrame& frame) const;
};

struct M4Series {
    std::string id;
    Eigen::VectorXd values;
    Frequency frequency = Frequency::other;
    Index horizon = 0;
};

/// M4-style input: `values_path` holds one series per line (`id,v1,v2,...`),
/// `metadata_path` is a CSV with header `id,frequency,horizon`.
std::vector<M4Series> load_m4(const std::filesystem::path& values_path,
                              const std::filesystem::path& metadata_path);

/// Seasonal period conventionally used for each M4 frequency.
Index m4_periodicity(Frequency f);

struct SyntheticSpec {
    Index length = 10000;
    Index channels = 2;
    double primary_period = 24.0;
    double primary_amplitude = 1.0;
    double secondary_period = 168.0;
    double secondary_amplitude = 0.5;
    double trend_per_step = 2e-4;
    double noise_std = 0.1;
    std::uint64_t seed = 2024;
};

/// Sum of two sinusoids plus a linear trend plus Gaussian noise, hourly
/// timestamps. Channels differ in phase, amplitude and trend.
SeriesFrame make_synthetic(const SyntheticSpec& spec);

/// SHA-256 of the frame's values and timestamps, hex encoded.
std::string fingerprint(const SeriesFrame& frame);
std::string file_fingerprint(const std::filesystem::path& path);

} // namespace nncl::data
