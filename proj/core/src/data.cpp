#include "dqrc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"

namespace dqrc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

char detect_delimiter(std::string_view header) {
    for (char c : {',', ';', '\t'}) {
        if (header.find(c) != std::string_view::npos) return c;
    }
    return ',';
}

WindowedDataset slice_windows(const std::vector<double>& values, std::size_t w, std::size_t first, std::size_t count,
                              const NormParams& norm) {
    WindowedDataset ds;
    ds.window = w;
    ds.norm = norm;
    ds.normalized = true;
    ds.windows.reserve(count * w);
    ds.targets.reserve(count);
    for (std::size_t i = first; i < first + count; ++i) {
        for (std::size_t k = 0; k < w; ++k) ds.windows.push_back(normalize(values[i + k], norm));
        ds.targets.push_back(normalize(values[i + w], norm));
    }
    return ds;
}

nlohmann::json dataset_json(const WindowedDataset& ds) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = ds.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return nlohmann::json{{"windows", rows}, {"targets", ds.targets}};
}

WindowedDataset dataset_from(const nlohmann::json& j, std::size_t w, const NormParams& norm) {
    WindowedDataset ds;
    ds.window = w;
    ds.norm = norm;
    ds.normalized = true;
    ds.targets = j.at("targets").get<std::vector<double>>();
    const auto& rows = j.at("windows");
    if (rows.size() != ds.targets.size()) throw DataError("dataset windows and targets differ in count");
    for (const auto& r : rows) {
        const auto v = r.get<std::vector<double>>();
        if (v.size() != w) throw DataError("dataset window has the wrong length");
        ds.windows.insert(ds.windows.end(), v.begin(), v.end());
    }
    return ds;
}

}  // namespace

Series load_series(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw DataError(path.string() + ": empty file");
    const char delim = detect_delimiter(line);
    const auto header = split_fields(line, delim);
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) throw DataError(path.string() + ": column '" + column + "' not found");
    const std::size_t col = static_cast<std::size_t>(it - header.begin());

    Series s{column, {}};
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (trim(line).empty()) throw DataError(where + ": blank line");
        const auto fields = split_fields(line, delim);
        if (col >= fields.size()) throw DataError(where + ": missing column '" + column + "'");
        const auto f = fields[col];
        double v = 0.0;
        const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc{} || end != f.data() + f.size() || !std::isfinite(v)) {
            throw DataError(where + ": cannot parse '" + std::string(f) + "' as a number");
        }
        s.values.push_back(v);
    }
    if (s.values.empty()) throw DataError(path.string() + ": no data rows");
    return s;
}

SplitSpec SplitSpec::proportional(std::size_t samples, double train_frac, double val_frac) {
    const auto train = static_cast<std::size_t>(std::floor(static_cast<double>(samples) * train_frac));
    const auto val = static_cast<std::size_t>(std::floor(static_cast<double>(samples) * val_frac));
    return {train, val, samples - train - val};
}

double normalize(double x, const NormParams& norm) {
    if (!(norm.max > norm.min)) throw DataError("degenerate normalization range");
    return (x - norm.min) / (norm.max - norm.min);
}

double denormalize(double x, const NormParams& norm) {
    if (!(norm.max > norm.min)) throw DataError("degenerate normalization range");
    return norm.min + x * (norm.max - norm.min);
}

WindowedDataset window_series(const Series& series, std::size_t w) {
    if (w == 0) throw DataError("window size must be positive");
    if (series.values.size() <= w) throw DataError("series is shorter than window + 1");
    WindowedDataset ds;
    ds.window = w;
    const std::size_t m = series.values.size() - w;
    ds.windows.reserve(m * w);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < w; ++k) ds.windows.push_back(series.values[i + k]);
        ds.targets.push_back(series.values[i + w]);
    }
    return ds;
}

DatasetSplits make_windows(const Series& series, std::size_t w, const SplitSpec& split) {
    if (w == 0) throw DataError("window size must be positive");
    if (series.values.size() <= w) throw DataError("series is shorter than window + 1");
    const std::size_t m = series.values.size() - w;
    if (split.total() > m) {
        throw DataError("split " + std::to_string(split.train) + "/" + std::to_string(split.val) + "/" +
                        std::to_string(split.test) + " needs " + std::to_string(split.total()) +
                        " samples but the series yields " + std::to_string(m));
    }
    if (split.train == 0) throw DataError("training split is empty");
    // Range of every value the training split touches: windows and targets.
    const auto begin = series.values.begin();
    const auto [lo, hi] = std::minmax_element(begin, begin + static_cast<std::ptrdiff_t>(split.train + w));
    const NormParams norm{*lo, *hi};
    if (!(norm.max > norm.min)) throw DataError("training split is constant; cannot normalize");

    DatasetSplits out;
    out.available = m;
    out.train = slice_windows(series.values, w, 0, split.train, norm);
    out.val = slice_windows(series.values, w, split.train, split.val, norm);
    out.test = slice_windows(series.values, w, split.train + split.val, split.test, norm);
    return out;
}

Series synthesize_series(std::size_t length, std::uint64_t seed, const SyntheticComponents& c) {
    Series s{"synthetic", std::vector<double>(length)};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    constexpr double tau = 2.0 * std::numbers::pi;
    for (std::size_t t = 0; t < length; ++t) {
        // Reduce the phase first so the periodic part repeats exactly.
        const double daily = std::sin(tau * static_cast<double>(t % 24) / 24.0);
        const double weekly = std::sin(tau * static_cast<double>(t % 168) / 168.0);
        double v = c.base + c.daily_amplitude * daily + c.weekly_amplitude * weekly +
                   c.trend_per_hour * static_cast<double>(t);
        if (c.noise_sigma != 0.0) v += c.noise_sigma * noise(rng);
        s.values[t] = v;
    }
    return s;
}

ForecastMetrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw ValidationError("metric inputs differ in length");
    if (y_true.empty()) throw ValidationError("metrics need at least one sample");
    const double m = static_cast<double>(y_true.size());
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_true[i] - y_pred[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        mean += y_true[i];
    }
    mean /= m;
    double tot = 0.0;
    for (double y : y_true) tot += (y - mean) * (y - mean);

    ForecastMetrics out;
    out.mae = abs_sum / m;
    out.rmse = std::sqrt(sq_sum / m);
    if (tot > 0.0) {
        out.r2 = 1.0 - sq_sum / tot;
    } else {
        out.r2 = std::numeric_limits<double>::quiet_NaN();
        out.r2_defined = false;
    }
    return out;
}

void to_json(nlohmann::json& j, const ForecastMetrics& m) {
    j = nlohmann::json{{"mae", m.mae}, {"rmse", m.rmse}, {"r2_defined", m.r2_defined}};
    j["r2"] = m.r2_defined ? nlohmann::json(m.r2) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = nlohmann::json{{"train", s.train}, {"val", s.val}, {"test", s.test}};
}

void from_json(const nlohmann::json& j, SplitSpec& s) {
    s.train = j.at("train").get<std::size_t>();
    s.val = j.value("val", std::size_t{0});
    s.test = j.value("test", std::size_t{0});
}

void to_json(nlohmann::json& j, const SyntheticComponents& c) {
    j = nlohmann::json{{"base", c.base},
                       {"daily_amplitude", c.daily_amplitude},
                       {"weekly_amplitude", c.weekly_amplitude},
                       {"trend_per_hour", c.trend_per_hour},
                       {"noise_sigma", c.noise_sigma}};
}

void from_json(const nlohmann::json& j, SyntheticComponents& c) {
    const SyntheticComponents d;
    c.base = j.value("base", d.base);
    c.daily_amplitude = j.value("daily_amplitude", d.daily_amplitude);
    c.weekly_amplitude = j.value("weekly_amplitude", d.weekly_amplitude);
    c.trend_per_hour = j.value("trend_per_hour", d.trend_per_hour);
    c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
}

void save_dataset(const std::filesystem::path& path, const DatasetSplits& splits, const SplitSpec& split,
                  const nlohmann::json& provenance) {
    const nlohmann::json j{{"format", "dqrc-dataset"},
                           {"version", 1},
                           {"window", splits.train.window},
                           {"available", splits.available},
                           {"split", split},
                           {"norm", {{"min", splits.train.norm.min}, {"max", splits.train.norm.max}}},
                           {"normalization", "train-split min/max applied to all splits"},
                           {"provenance", provenance},
                           {"train", dataset_json(splits.train)},
                           {"val", dataset_json(splits.val)},
                           {"test", dataset_json(splits.test)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

DatasetSplits load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.value("format", std::string{}) != "dqrc-dataset") throw DataError(path.string() + ": not a dataset artifact");
        const auto w = j.at("window").get<std::size_t>();
        const NormParams norm{j.at("norm").at("min").get<double>(), j.at("norm").at("max").get<double>()};
        DatasetSplits out;
        out.available = j.at("available").get<std::size_t>();
        out.train = dataset_from(j.at("train"), w, norm);
        out.val = dataset_from(j.at("val"), w, norm);
        out.test = dataset_from(j.at("test"), w, norm);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed dataset artifact: " + e.what());
    }
}

}  // namespace dqrc
