#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dense_oracle.hpp"
#include "dqrc/error.hpp"
#include "dqrc/readout.hpp"
#include "dqrc/seed.hpp"

using namespace dqrc;
using std::numbers::pi;

namespace {

Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0,
                               double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    }
    return m;
}

Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n) { return uniform_matrix(rng, n, 1, -1, 1); }

}  // namespace

TEST(Ridge, HandExample) {
    const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::Vector2d y(1.0, 2.0);
    const auto model = ridge_fit(r, y, 1.0);
    EXPECT_NEAR(model.weights(0), 0.5, 1e-15);
    EXPECT_NEAR(model.weights(1), 1.0, 1e-15);
    const std::array<double, 2> probe{1.0, 0.0};
    EXPECT_NEAR(ridge_predict(model, probe), 0.5, 1e-15);
}

TEST(Ridge, ZeroTargetsGiveZeroWeights) {
    std::mt19937_64 rng(1);
    const auto model = ridge_fit(uniform_matrix(rng, 5, 20), Eigen::VectorXd::Zero(20), 1e-3);
    EXPECT_EQ(model.weights.cwiseAbs().maxCoeff(), 0.0);
    const std::array<double, 5> probe{1, 2, 3, 4, 5};
    EXPECT_EQ(ridge_predict(RidgeModel{Eigen::VectorXd::Zero(5), 1.0}, probe), 0.0);
}

TEST(Ridge, MatchesExtendedPrecisionOracle) {
    std::mt19937_64 rng(20240101);
    std::uniform_int_distribution<int> dim(1, 64);
    std::uniform_int_distribution<int> samples(1, 500);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = dim(rng);
        const int m = samples(rng);
        const double lambda = std::pow(10.0, -(trial % 4));
        const Eigen::MatrixXd r = uniform_matrix(rng, d, m, -1, 1);
        const Eigen::VectorXd y = uniform_vector(rng, m);
        const auto model = ridge_fit(r, y, lambda);
        const auto ref = oracle::ridge_extended(r, y, lambda);
        EXPECT_LT((model.weights - ref).cwiseAbs().maxCoeff(), 1e-8) << "d=" << d << " m=" << m;
    }
}

TEST(Ridge, RejectsBadInput) {
    EXPECT_THROW(ridge_fit(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(3), 1.0), StructuralError);
    EXPECT_THROW(ridge_fit(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2), 0.0), ValidationError);
    const std::array<double, 3> wrong{1, 2, 3};
    EXPECT_THROW(ridge_predict(RidgeModel{Eigen::VectorXd::Zero(2), 1.0}, wrong), StructuralError);
}

TEST(KernelMap, Structure) {
    const KernelFeatureMapConfig config{3, 2, 1};
    const std::array<double, 3> x{0.1, 0.2, 0.3};
    const auto c = build_kernel_feature_map(config, x);
    ASSERT_EQ(c.size(), 12u);
    for (std::size_t block = 0; block < 2; ++block) {
        for (std::size_t q = 0; q < 3; ++q) {
            EXPECT_EQ(c.gates()[block * 6 + q], Gate::h(q));
            EXPECT_EQ(c.gates()[block * 6 + 3 + q], Gate::phase(q, 2.0 * x[q]));
        }
    }
}

TEST(KernelMap, LayersForWideFeatures) {
    EXPECT_EQ(KernelFeatureMapConfig::for_dimension(20, 10).num_layers, 2u);
    EXPECT_EQ(KernelFeatureMapConfig::for_dimension(10, 10).num_layers, 1u);
    EXPECT_EQ(KernelFeatureMapConfig::for_dimension(11, 10).num_layers, 2u);
    const auto config = KernelFeatureMapConfig::for_dimension(7, 5);
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7};
    const auto c = build_kernel_feature_map(config, x);
    ASSERT_EQ(c.size(), 2u * 2u * 10u);
    // Second layer of the first block: features 5, 6 then zero padding.
    EXPECT_EQ(c.gates()[15], Gate::phase(0, 12.0));
    EXPECT_EQ(c.gates()[16], Gate::phase(1, 14.0));
    EXPECT_EQ(c.gates()[17], Gate::phase(2, 0.0));
    EXPECT_THROW(build_kernel_feature_map(KernelFeatureMapConfig{5, 2, 1}, x), ValidationError);
}

TEST(KernelValue, KnownValues) {
    Backend backend(BackendSpec{});
    const KernelFeatureMapConfig one{1, 2, 1};
    const std::array<double, 1> a{0.0};
    const std::array<double, 1> b{pi / 2};
    // By hand: (H then P(0))^2 |0> = |0>, while (H then Z)^2 |0> = -|1>.
    EXPECT_NEAR(kernel_value(one, a, b, backend), 0.0, 1e-15);
    EXPECT_NEAR(kernel_value(one, a, a, backend), 1.0, 1e-15);

    const KernelFeatureMapConfig five{5, 2, 1};
    const std::array<double, 5> zeros{};
    EXPECT_NEAR(kernel_value(five, zeros, zeros, backend), 1.0, 1e-12);
}

TEST(KernelValue, MatchesDenseOracle) {
    Backend backend(BackendSpec{});
    std::mt19937_64 rng(5);
    const KernelFeatureMapConfig config{5, 2, 1};
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd x = uniform_matrix(rng, 2, 5);
        const std::vector<double> a(x.row(0).begin(), x.row(0).end());
        const std::vector<double> b(x.row(1).begin(), x.row(1).end());
        const double ref = oracle::overlap_sq(oracle::run(build_kernel_feature_map(config, a)),
                                              oracle::run(build_kernel_feature_map(config, b)));
        EXPECT_NEAR(kernel_value(config, a, b, backend), ref, 1e-12);
    }
}

TEST(Gram, UnitDiagonalSymmetricPsd) {
    Backend backend(BackendSpec{});
    std::mt19937_64 rng(6);
    for (std::size_t n : {5u, 10u}) {
        const Eigen::MatrixXd x = uniform_matrix(rng, 50, static_cast<Eigen::Index>(n));
        const KernelFeatureMapConfig config{n, 2, 1};
        std::vector<Circuit> circuits;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const std::vector<double> row(x.row(i).begin(), x.row(i).end());
            circuits.push_back(build_kernel_feature_map(config, row));
        }
        const Eigen::MatrixXd g = backend.kernel_matrix(circuits, circuits, true, 0);
        EXPECT_LT((g.diagonal().array() - 1.0).abs().maxCoeff(), 1e-10);
        EXPECT_LT((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff(), -1e-9);
        EXPECT_GE(g.minCoeff(), 0.0);
        EXPECT_LE(g.maxCoeff(), 1.0);
    }
}

TEST(Dual, SingleSampleAndOrthogonalStates) {
    Backend backend(BackendSpec{});
    const KernelFeatureMapConfig config{1, 2, 1};
    Eigen::MatrixXd one(1, 1);
    one << 0.3;
    const auto m1 = kernel_ridge_fit(one, Eigen::VectorXd::Constant(1, 2.0), config, 0.5, backend);
    EXPECT_NEAR(m1.alphas(0), 2.0 / 1.5, 1e-15);

    // x = 0 and x = pi/2 map to orthogonal states, so G = I.
    Eigen::MatrixXd two(2, 1);
    two << 0.0, pi / 2;
    const Eigen::Vector2d y(3.0, -1.0);
    const auto m2 = kernel_ridge_fit(two, y, config, 1.0, backend);
    EXPECT_NEAR(m2.alphas(0), 1.5, 1e-12);
    EXPECT_NEAR(m2.alphas(1), -0.5, 1e-12);

    const auto tight = kernel_ridge_fit(two, y, config, 1e-9, backend);
    const std::array<double, 1> support{pi / 2};
    EXPECT_NEAR(kernel_ridge_predict(tight, support, backend), -1.0, 1e-6);

    KernelRidgeModel zero = m2;
    zero.alphas.setZero();
    EXPECT_EQ(kernel_ridge_predict(zero, support, backend), 0.0);
}

TEST(Dual, FailureReportsMinimumEigenvalue) {
    Eigen::Matrix2d g;
    g << 1.0, 2.0, 2.0, 1.0;
    try {
        solve_dual(g, Eigen::Vector2d(1.0, 1.0), 1e-6);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("-1.0"), std::string::npos) << e.what();
    }
}

TEST(Dual, NearestPsdClipsNegativeSpectrum) {
    Eigen::Matrix2d g;
    g << 1.0, 2.0, 2.0, 1.0;
    Eigen::Matrix2d expected;
    expected << 1.5, 1.5, 1.5, 1.5;
    EXPECT_LT((nearest_psd(g) - expected).cwiseAbs().maxCoeff(), 1e-14);

    std::mt19937_64 rng(12);
    const Eigen::MatrixXd a = uniform_matrix(rng, 12, 5, -1, 1);
    const Eigen::MatrixXd psd = a * a.transpose();
    EXPECT_LT((nearest_psd(psd) - psd).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dual, SampledNoisyGramStillSolves) {
    BackendSpec spec;
    spec.mode = BackendMode::noisy;
    spec.noise = NoiseModel{0.001, 0.01, 0.02, "test"};
    spec.shots = 64;
    Backend backend(spec);
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd x = uniform_matrix(rng, 40, 3, 0, pi);
    const Eigen::VectorXd y = uniform_vector(rng, 40);
    const KernelFeatureMapConfig config{3, 2, 1};
    const auto model = kernel_ridge_fit(x, y, config, 1e-6, backend, 3);
    EXPECT_TRUE(model.alphas.allFinite());
    EXPECT_TRUE(kernel_ridge_predict(model, x, backend, 3).allFinite());
}

TEST(Dual, LinearKernelMatchesPrimal) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index m = 10 + trial * 7;
        const Eigen::Index d = 3 + trial % 12;
        const double lambda = trial % 2 ? 1e-2 : 1.0;
        const Eigen::MatrixXd x = uniform_matrix(rng, m, d, -1, 1);
        const Eigen::VectorXd y = uniform_vector(rng, m);
        const Eigen::MatrixXd q = uniform_matrix(rng, 15, d, -1, 1);
        const Eigen::VectorXd alpha = solve_dual(x * x.transpose(), y, lambda);
        const Eigen::VectorXd dual = q * x.transpose() * alpha;
        const Eigen::VectorXd primal = q * ridge_fit(x.transpose(), y, lambda).weights;
        EXPECT_LT((dual - primal).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Dual, TinyLambdaInterpolates) {
    Backend backend(BackendSpec{});
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd x = uniform_matrix(rng, 30, 5, 0, pi);
    const Eigen::VectorXd y = uniform_vector(rng, 30);
    const auto model = kernel_ridge_fit(x, y, KernelFeatureMapConfig{5, 2, 1}, 1e-8, backend);
    const Eigen::VectorXd fit = kernel_ridge_predict(model, x, backend);
    EXPECT_LT((fit - y).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Dual, TrainingErrorGrowsWithLambda) {
    Backend backend(BackendSpec{});
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = uniform_matrix(rng, 40, 5);
    const Eigen::VectorXd y = uniform_vector(rng, 40);
    double kernel_prev = -1.0;
    double ridge_prev = -1.0;
    for (double lambda : {1e-6, 1e-4, 1e-2, 1.0}) {
        const auto km = kernel_ridge_fit(x, y, KernelFeatureMapConfig{5, 2, 1}, lambda, backend);
        const double kernel_mse = (kernel_ridge_predict(km, x, backend) - y).squaredNorm() / 40.0;
        const double ridge_mse = (x * ridge_fit(x.transpose(), y, lambda).weights - y).squaredNorm() / 40.0;
        EXPECT_GE(kernel_mse, kernel_prev);
        EXPECT_GE(ridge_mse, ridge_prev);
        kernel_prev = kernel_mse;
        ridge_prev = ridge_mse;
    }
}

TEST(Slices, SizingAndRemainders) {
    const auto two = split_features(10, 2);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two[0], (FeatureSlice{0, 5}));
    EXPECT_EQ(two[1], (FeatureSlice{5, 5}));
    const auto uneven = split_features(7, 3);
    EXPECT_EQ(uneven[0], (FeatureSlice{0, 3}));
    EXPECT_EQ(uneven[1], (FeatureSlice{3, 2}));
    EXPECT_EQ(uneven[2], (FeatureSlice{5, 2}));
    EXPECT_EQ(split_features(25, 5).back(), (FeatureSlice{20, 5}));
    EXPECT_THROW(split_features(3, 4), ValidationError);
    EXPECT_THROW(split_features(3, 0), ValidationError);
}

TEST(MultiReadout, SingleInstanceEqualsSingleReadout) {
    std::mt19937_64 rng(10);
    const Eigen::MatrixXd x = uniform_matrix(rng, 60, 8);
    const Eigen::VectorXd y = uniform_vector(rng, 60);
    const auto slices = split_features(8, 1);
    ReadoutSettings settings;
    const auto multi = multi_readout_fit(x, y, slices, settings, {}, 0);
    const auto single = ridge_fit(x.transpose(), y, settings.lambda);
    const auto& w = std::get<RidgeModel>(multi.models[0]).weights;
    EXPECT_EQ(w, single.weights);
    const Eigen::VectorXd pred = multi_readout_predict(multi, x, {}, 0);
    const Eigen::VectorXd ref = x * single.weights;
    EXPECT_EQ(pred, ref);

    Backend backend(BackendSpec{});
    Backend* backends[] = {&backend};
    settings.kind = ReadoutKind::quantum;
    settings.kernel_qubits = 8;
    const auto qm = multi_readout_fit(x, y, slices, settings, backends, 3);
    const auto& km = std::get<KernelRidgeModel>(qm.models[0]);
    const auto direct = kernel_ridge_fit(x, y, KernelFeatureMapConfig::for_dimension(8, 8), settings.lambda, backend,
                                         derive_seed(3, "instance", {0}));
    EXPECT_EQ(km.alphas, direct.alphas);
}

TEST(MultiReadout, MeanOfEqualInstances) {
    MultiReadout r;
    r.slices = split_features(3, 3);
    for (int i = 0; i < 3; ++i) r.models.emplace_back(RidgeModel{Eigen::VectorXd::Constant(1, 0.25), 1e-6});
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 3);
    const Eigen::VectorXd pred = multi_readout_predict(r, ones, {}, 0);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(pred(i), 0.25);
}

TEST(MultiReadout, AveragesInstancePredictions) {
    std::mt19937_64 rng(12);
    const Eigen::MatrixXd x = uniform_matrix(rng, 40, 10);
    const Eigen::VectorXd y = uniform_vector(rng, 40);
    const auto slices = split_features(10, 2);
    const auto multi = multi_readout_fit(x, y, slices, ReadoutSettings{}, {}, 0);
    const Eigen::VectorXd a = x.leftCols(5) * ridge_fit(x.leftCols(5).transpose(), y, kDefaultLambda).weights;
    const Eigen::VectorXd b = x.rightCols(5) * ridge_fit(x.rightCols(5).transpose(), y, kDefaultLambda).weights;
    const Eigen::VectorXd pred = multi_readout_predict(multi, x, {}, 0);
    EXPECT_LT((pred - (a + b) / 2.0).cwiseAbs().maxCoeff(), 1e-12);

    nlohmann::json j = multi;
    const auto back = multi_readout_from_json(j);
    EXPECT_EQ(multi_readout_predict(back, x, {}, 0), pred);
}
