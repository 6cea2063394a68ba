#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dqrc/data.hpp"
#include "dqrc/error.hpp"

using namespace dqrc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
    const auto dir = fs::temp_directory_path() / "dqrc_data_test";
    fs::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << contents;
    return path;
}

double autocorrelation(const std::vector<double>& x, std::size_t lag) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        den += (x[i] - mean) * (x[i] - mean);
        if (i + lag < x.size()) num += (x[i] - mean) * (x[i + lag] - mean);
    }
    return num / den;
}

}  // namespace

TEST(Windows, TableTwoRows) {
    const Series s{"load", {4182, 3899, 3932, 3945, 3795, 3911}};
    const auto ds = window_series(s, 4);
    ASSERT_EQ(ds.size(), 2u);
    const std::vector<double> first(ds.row(0).begin(), ds.row(0).end());
    const std::vector<double> second(ds.row(1).begin(), ds.row(1).end());
    EXPECT_EQ(first, (std::vector<double>{4182, 3899, 3932, 3945}));
    EXPECT_EQ(ds.targets[0], 3795);
    EXPECT_EQ(second, (std::vector<double>{3899, 3932, 3945, 3795}));
    EXPECT_EQ(ds.targets[1], 3911);

    const Series five{"load", {4182, 3899, 3932, 3945, 3795}};
    EXPECT_EQ(window_series(five, 4).size(), 1u);
}

TEST(Windows, SampleCountIsLengthMinusWindow) {
    const auto s = synthesize_series(35064, 1);
    EXPECT_EQ(window_series(s, 4).size(), 35060u);
    const auto splits = make_windows(s, 4, SplitSpec::proportional(35060));
    EXPECT_EQ(splits.available, 35060u);
    EXPECT_EQ(splits.train.size() + splits.val.size() + splits.test.size(), 35060u);
}

TEST(Windows, ReconstructsSeries) {
    const auto s = synthesize_series(500, 3);
    for (std::size_t w : {1u, 4u, 9u}) {
        const auto ds = window_series(s, w);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            EXPECT_EQ(ds.row(i)[w - 1], s.values[i + w - 1]);
            EXPECT_EQ(ds.targets[i], s.values[i + w]);
        }
    }
}

TEST(Windows, SplitsAreChronologicalAndNormalizedByTrain) {
    const auto s = synthesize_series(2404, 7);
    const auto splits = make_windows(s, 4, {1600, 400, 400});
    ASSERT_EQ(splits.train.size(), 1600u);
    ASSERT_EQ(splits.val.size(), 400u);
    ASSERT_EQ(splits.test.size(), 400u);
    const auto norm = splits.train.norm;
    EXPECT_EQ(splits.val.targets[0], normalize(s.values[1604], norm));
    EXPECT_EQ(splits.test.targets.back(), normalize(s.values[2403], norm));
    double lo = 1.0;
    double hi = 0.0;
    for (double v : splits.train.windows) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : splits.train.targets) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
}

TEST(Windows, RejectsOversizedSplit) {
    const auto s = synthesize_series(2400, 7);
    EXPECT_THROW(make_windows(s, 4, {1600, 400, 400}), DataError);
    EXPECT_THROW(make_windows(s, 0, {10, 0, 0}), DataError);
}

TEST(Normalize, AffineMapAndInverse) {
    const NormParams n{0.0, 10.0};
    EXPECT_EQ(normalize(0.0, n), 0.0);
    EXPECT_EQ(normalize(10.0, n), 1.0);
    EXPECT_EQ(normalize(5.0, n), 0.5);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (int i = 0; i < 1000; ++i) {
        const NormParams p{3795.0, 5703.0};
        const double x = u(rng);
        EXPECT_NEAR(denormalize(normalize(x, p), p), x, 1e-12 * std::max(1.0, std::abs(x)));
    }
    EXPECT_THROW(normalize(1.0, NormParams{2.0, 2.0}), DataError);
}

TEST(Synthetic, DeterministicAndPeriodic) {
    EXPECT_EQ(synthesize_series(1000, 9).values, synthesize_series(1000, 9).values);
    EXPECT_NE(synthesize_series(1000, 9).values, synthesize_series(1000, 10).values);
    SyntheticComponents flat;
    flat.noise_sigma = 0.0;
    flat.trend_per_hour = 0.0;
    const auto s = synthesize_series(1000, 1, flat);
    for (std::size_t t = 168; t < s.values.size(); ++t) EXPECT_EQ(s.values[t], s.values[t - 168]);
}

TEST(Synthetic, DailyAutocorrelationDominates) {
    const auto s = synthesize_series(3000, 11);
    EXPECT_GT(autocorrelation(s.values, 24), autocorrelation(s.values, 13));
}

TEST(Metrics, KnownValues) {
    const std::vector<double> y{0.2, 0.4, 0.9};
    const auto perfect = compute_metrics(y, y);
    EXPECT_EQ(perfect.mae, 0.0);
    EXPECT_EQ(perfect.rmse, 0.0);
    EXPECT_EQ(perfect.r2, 1.0);

    const std::vector<double> t{0.0, 1.0};
    const std::vector<double> p{1.0, 0.0};
    const auto m = compute_metrics(t, p);
    EXPECT_EQ(m.mae, 1.0);
    EXPECT_EQ(m.rmse, 1.0);
    EXPECT_EQ(m.r2, -3.0);
}

TEST(Metrics, ConstantTargetsFlagR2) {
    const std::vector<double> t{0.5, 0.5, 0.5};
    const std::vector<double> p{0.4, 0.5, 0.6};
    const auto m = compute_metrics(t, p);
    EXPECT_FALSE(m.r2_defined);
    EXPECT_TRUE(std::isnan(m.r2));
    nlohmann::json j = m;
    EXPECT_TRUE(j["r2"].is_null());
    EXPECT_THROW(compute_metrics(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST(Metrics, PropertiesOnRandomData) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> t(1 + trial % 40);
        std::vector<double> p(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = u(rng);
            p[i] = u(rng);
        }
        const auto m = compute_metrics(t, p);
        EXPECT_GE(m.rmse + 1e-15, m.mae);
        if (m.r2_defined) EXPECT_LE(m.r2, 1.0);

        const double c = 2.5;
        std::vector<double> ts(t), ps(p);
        for (auto& v : ts) v *= c;
        for (auto& v : ps) v *= c;
        const auto s = compute_metrics(ts, ps);
        EXPECT_NEAR(s.mae, c * m.mae, 1e-12);
        EXPECT_NEAR(s.rmse, c * m.rmse, 1e-12);
        if (m.r2_defined) EXPECT_NEAR(s.r2, m.r2, 1e-9);
    }
}

TEST(LoadSeries, ReadsColumnInOrder) {
    const auto path = temp_file("three.csv", "time,load\n0,4182\n1,3899\n2,3932\n");
    const auto s = load_series(path);
    EXPECT_EQ(s.values, (std::vector<double>{4182, 3899, 3932}));
    const auto semi = temp_file("semi.csv", "load;other\n1.5;x\n2.5;y\n");
    EXPECT_EQ(load_series(semi).values, (std::vector<double>{1.5, 2.5}));
    const auto named = temp_file("named.tsv", "a\tMW\n1\t7\n");
    EXPECT_EQ(load_series(named, "MW").values, (std::vector<double>{7}));
}

TEST(LoadSeries, LongFile) {
    std::string text = "load\n";
    for (int i = 0; i < 35064; ++i) text += std::to_string(4000 + i % 977) + "\n";
    EXPECT_EQ(load_series(temp_file("long.csv", text)).values.size(), 35064u);
}

TEST(LoadSeries, ErrorsNameTheProblem) {
    const auto blank = temp_file("blank.csv", "load\n1\n\n3\n");
    try {
        load_series(blank);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("blank.csv:3"), std::string::npos) << e.what();
    }
    const auto bad = temp_file("bad.csv", "load\n1\nabc\n");
    try {
        load_series(bad);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_series(temp_file("empty.csv", "")), DataError);
    EXPECT_THROW(load_series(temp_file("nocol.csv", "x\n1\n")), DataError);
    try {
        load_series("/nonexistent/series.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/series.csv"), std::string::npos);
    }
}

TEST(DatasetArtifact, RoundTrip) {
    const auto s = synthesize_series(300, 5);
    const SplitSpec split{200, 50, 46};
    const auto splits = make_windows(s, 4, split);
    const auto path = fs::temp_directory_path() / "dqrc_data_test" / "ds.json";
    save_dataset(path, splits, split, {{"source", "synthetic"}});
    const auto back = load_dataset(path);
    EXPECT_EQ(back.train.windows, splits.train.windows);
    EXPECT_EQ(back.test.targets, splits.test.targets);
    EXPECT_EQ(back.train.norm.min, splits.train.norm.min);
    EXPECT_EQ(back.available, 296u);
    EXPECT_THROW(load_dataset(temp_file("notads.json", "{\"format\":\"other\"}")), DataError);
}
