#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "dqrc/backend.hpp"
#include "dqrc/circuit.hpp"

namespace dqrc {

inline constexpr double kDefaultLambda = 1e-6;

// ---------------------------------------------------------------------------
// Classical ridge

struct RidgeModel {
    Eigen::VectorXd weights;
    double lambda = kDefaultLambda;
};

/// W = Y R^T (R R^T + lambda I)^{-1}, with `features` laid out d x m
/// (columns are samples). Solved through an LLT factorization.
RidgeModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double lambda);
double ridge_predict(const RidgeModel& model, std::span<const double> feature);

// ---------------------------------------------------------------------------
// Quantum kernel

/// Hadamard/phase feature map on `num_qubits` qubits with `num_layers`
/// H-P layers per block, repeated `num_blocks` times.
struct KernelFeatureMapConfig {
    std::size_t num_qubits = 10;
    std::size_t num_blocks = 2;
    std::size_t num_layers = 1;

    /// Layers = ceil(d / n).
    static KernelFeatureMapConfig for_dimension(std::size_t d, std::size_t num_qubits, std::size_t num_blocks = 2);
    void validate() const;
    friend bool operator==(const KernelFeatureMapConfig&, const KernelFeatureMapConfig&) = default;
};

/// Per block, per layer l: H on every qubit, then PHASE(2 x_{l n + q}) on
/// qubit q. Features beyond d are padded with zero.
Circuit build_kernel_feature_map(const KernelFeatureMapConfig& config, std::span<const double> feature);

/// |<Phi(a)|Phi(b)>|^2: exact overlap on ideal backends, compute-uncompute
/// fidelity on noisy ones.
double kernel_value(const KernelFeatureMapConfig& config, std::span<const double> a, std::span<const double> b,
                    Backend& backend, std::uint64_t seed = 0);

/// alpha = (G + lambda I)^{-1} y via LLT. Throws NumericalError with a
/// minimum-eigenvalue estimate if the factorization fails.
Eigen::VectorXd solve_dual(const Eigen::MatrixXd& gram, const Eigen::VectorXd& targets, double lambda);

struct KernelRidgeModel {
    Eigen::MatrixXd support;  // m x d
    Eigen::VectorXd alphas;
    KernelFeatureMapConfig config;
    double lambda = kDefaultLambda;
};

/// Projection onto the positive semidefinite cone: negative eigenvalues of
/// the symmetrized matrix are set to zero.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& gram);

/// `features` is m x d (rows are samples). On a noisy backend the estimated
/// Gram matrix is passed through nearest_psd before the solve.
KernelRidgeModel kernel_ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                  const KernelFeatureMapConfig& config, double lambda, Backend& backend,
                                  std::uint64_t seed = 0, std::size_t threads = 1);
double kernel_ridge_predict(const KernelRidgeModel& model, std::span<const double> feature, Backend& backend,
                            std::uint64_t seed = 0);
/// Batched prediction through one cross-kernel evaluation.
Eigen::VectorXd kernel_ridge_predict(const KernelRidgeModel& model, const Eigen::MatrixXd& features,
                                     Backend& backend, std::uint64_t seed = 0, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Multi-instance readout

enum class ReadoutKind { classical, quantum };

std::string_view to_string(ReadoutKind k);
ReadoutKind readout_kind_from_string(std::string_view s);

struct FeatureSlice {
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const FeatureSlice&, const FeatureSlice&) = default;
};

/// `instances` contiguous slices covering [0, d); when the division is
/// uneven the first slices take one extra feature.
std::vector<FeatureSlice> split_features(std::size_t d, std::size_t instances);

struct ReadoutSettings {
    ReadoutKind kind = ReadoutKind::classical;
    double lambda = kDefaultLambda;
    std::size_t kernel_qubits = 10;
    std::size_t kernel_blocks = 2;
};

using ReadoutModel = std::variant<RidgeModel, KernelRidgeModel>;

struct MultiReadout {
    ReadoutSettings settings;
    std::vector<FeatureSlice> slices;
    std::vector<ReadoutModel> models;
};

/// Fits one readout per slice against the same targets. `features` is
/// m x D. `backends[i]` executes instance i's kernels (unused for classical).
/// Instance i draws seeds from derive_seed(seed, "instance", {i}).
MultiReadout multi_readout_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                               std::span<const FeatureSlice> slices, const ReadoutSettings& settings,
                               std::span<Backend* const> backends, std::uint64_t seed = 0,
                               std::size_t threads = 1);

/// Arithmetic mean of the instance predictions, one per row of `features`.
Eigen::VectorXd multi_readout_predict(const MultiReadout& readout, const Eigen::MatrixXd& features,
                                      std::span<Backend* const> backends, std::uint64_t seed = 0,
                                      std::size_t threads = 1);

void to_json(nlohmann::json& j, const KernelFeatureMapConfig& c);
void from_json(const nlohmann::json& j, KernelFeatureMapConfig& c);
void to_json(nlohmann::json& j, const MultiReadout& r);
MultiReadout multi_readout_from_json(const nlohmann::json& j);

}  // namespace dqrc
