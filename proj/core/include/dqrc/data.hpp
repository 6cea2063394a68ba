#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dqrc {

struct Series {
    std::string name;
    std::vector<double> values;
};

/// Reads one column of a headered delimited file (comma, semicolon or tab).
/// Blank or unparsable rows are errors that name the line.
Series load_series(const std::filesystem::path& path, const std::string& column = "load");

struct SplitSpec {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t total() const { return train + val + test; }
    /// 70 / 15 / 15 of `samples`, remainder to the test split.
    static SplitSpec proportional(std::size_t samples, double train_frac = 0.70, double val_frac = 0.15);
    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct NormParams {
    double min = 0.0;
    double max = 1.0;
};

/// (x - min) / (max - min); throws DataError when max == min.
double normalize(double x, const NormParams& norm);
double denormalize(double x, const NormParams& norm);

/// Supervised pairs: window i = values[first + i .. first + i + w - 1],
/// target i = values[first + i + w]. Windows are stored row-major.
struct WindowedDataset {
    std::size_t window = 4;
    std::vector<double> windows;
    std::vector<double> targets;
    NormParams norm;
    bool normalized = false;

    std::size_t size() const { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {windows.data() + i * window, window}; }
};

/// Raw sliding windows over the whole series (len - w samples).
WindowedDataset window_series(const Series& series, std::size_t w);

struct DatasetSplits {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
    std::size_t available = 0;  // len - w
};

/// Windows the series, splits chronologically (train, val, test) and
/// min-max normalizes every split with the training split's range.
DatasetSplits make_windows(const Series& series, std::size_t w, const SplitSpec& split);

/// Daily (period 24) + weekly (period 168) sinusoids, linear trend and
/// seeded Gaussian noise around a base level.
struct SyntheticComponents {
    double base = 5000.0;
    double daily_amplitude = 800.0;
    double weekly_amplitude = 400.0;
    double trend_per_hour = 0.05;
    double noise_sigma = 40.0;
};

Series synthesize_series(std::size_t length, std::uint64_t seed, const SyntheticComponents& components = {});

struct ForecastMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    /// False when y_true is constant; r2 is then NaN.
    bool r2_defined = true;
};

ForecastMetrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred);

void to_json(nlohmann::json& j, const ForecastMetrics& m);
void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);
void to_json(nlohmann::json& j, const SyntheticComponents& c);
void from_json(const nlohmann::json& j, SyntheticComponents& c);

/// Dataset artifact: windowed, normalized splits plus the parameters that
/// produced them. `provenance` is stored verbatim (source, seed, ...).
void save_dataset(const std::filesystem::path& path, const DatasetSplits& splits, const SplitSpec& split,
                  const nlohmann::json& provenance);
DatasetSplits load_dataset(const std::filesystem::path& path);

}  // namespace dqrc
