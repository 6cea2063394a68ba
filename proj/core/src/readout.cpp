#include "dqrc/readout.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"
#include "dqrc/parallel.hpp"
#include "dqrc/seed.hpp"

namespace dqrc {

namespace {

void check_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("ridge lambda must be positive and finite");
}

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

std::vector<Circuit> feature_circuits(const KernelFeatureMapConfig& config, const Eigen::MatrixXd& rows) {
    std::vector<Circuit> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    std::vector<double> buf(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j) buf[static_cast<std::size_t>(j)] = rows(i, j);
        out.push_back(build_kernel_feature_map(config, buf));
    }
    return out;
}

}  // namespace

RidgeModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double lambda) {
    check_lambda(lambda);
    const Eigen::Index d = features.rows();
    const Eigen::Index m = features.cols();
    if (d < 1 || m < 1) throw ValidationError("ridge needs at least one feature and one sample");
    if (targets.size() != m) throw StructuralError("ridge targets do not match the sample count");
    check_finite(features, "ridge features");
    check_finite(targets, "ridge targets");

    Eigen::MatrixXd gram = features * features.transpose();
    gram.diagonal().array() += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge normal matrix is not positive definite");
    return {llt.solve(features * targets), lambda};
}

double ridge_predict(const RidgeModel& model, std::span<const double> feature) {
    if (feature.size() != static_cast<std::size_t>(model.weights.size())) {
        throw StructuralError("ridge feature has " + std::to_string(feature.size()) + " entries, model expects " +
                              std::to_string(model.weights.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) acc += model.weights[static_cast<Eigen::Index>(i)] * feature[i];
    return acc;
}

KernelFeatureMapConfig KernelFeatureMapConfig::for_dimension(std::size_t d, std::size_t num_qubits,
                                                             std::size_t num_blocks) {
    if (num_qubits == 0) throw ValidationError("kernel feature map needs at least one qubit");
    const std::size_t layers = std::max<std::size_t>(1, (d + num_qubits - 1) / num_qubits);
    return {num_qubits, num_blocks, layers};
}

void KernelFeatureMapConfig::validate() const {
    if (num_qubits == 0 || num_blocks == 0 || num_layers == 0) {
        throw ValidationError("kernel feature map needs n, B, L >= 1");
    }
    if (num_qubits > kMaxCircuitQubits) throw CapacityError("kernel feature map is wider than the simulator limit");
}

Circuit build_kernel_feature_map(const KernelFeatureMapConfig& config, std::span<const double> feature) {
    config.validate();
    const std::size_t n = config.num_qubits;
    if (feature.size() > n * config.num_layers) {
        throw ValidationError("feature of length " + std::to_string(feature.size()) + " does not fit " +
                              std::to_string(config.num_layers) + " layers of " + std::to_string(n) + " qubits");
    }
    Circuit c(n);
    for (std::size_t block = 0; block < config.num_blocks; ++block) {
        for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
            for (std::size_t q = 0; q < n; ++q) c.add(Gate::h(q));
            for (std::size_t q = 0; q < n; ++q) {
                const std::size_t idx = layer * n + q;
                const double x = idx < feature.size() ? feature[idx] : 0.0;
                c.add(Gate::phase(q, 2.0 * x));
            }
        }
    }
    return c;
}

double kernel_value(const KernelFeatureMapConfig& config, std::span<const double> a, std::span<const double> b,
                    Backend& backend, std::uint64_t seed) {
    if (a.size() != b.size()) throw StructuralError("kernel arguments have different lengths");
    return backend.overlap(build_kernel_feature_map(config, a), build_kernel_feature_map(config, b), seed);
}

Eigen::VectorXd solve_dual(const Eigen::MatrixXd& gram, const Eigen::VectorXd& targets, double lambda) {
    check_lambda(lambda);
    if (gram.rows() != gram.cols() || gram.rows() != targets.size()) {
        throw StructuralError("Gram matrix and targets disagree in size");
    }
    check_finite(gram, "Gram matrix");
    check_finite(targets, "kernel targets");
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        throw NumericalError("kernel system is not positive definite; min Gram eigenvalue ~ " +
                             std::to_string(eig.eigenvalues().minCoeff()));
    }
    return llt.solve(targets);
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& gram) {
    const Eigen::MatrixXd sym = 0.5 * (gram + gram.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
}

KernelRidgeModel kernel_ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                  const KernelFeatureMapConfig& config, double lambda, Backend& backend,
                                  std::uint64_t seed, std::size_t threads) {
    check_lambda(lambda);
    if (features.rows() < 1) throw ValidationError("kernel ridge needs at least one sample");
    if (targets.size() != features.rows()) throw StructuralError("kernel targets do not match the sample count");
    check_finite(features, "kernel features");
    const auto circuits = feature_circuits(config, features);
    Eigen::MatrixXd gram = backend.kernel_matrix(circuits, circuits, true, seed, threads);
    if (!backend.ideal()) gram = nearest_psd(gram);
    return {features, solve_dual(gram, targets, lambda), config, lambda};
}

Eigen::VectorXd kernel_ridge_predict(const KernelRidgeModel& model, const Eigen::MatrixXd& features,
                                     Backend& backend, std::uint64_t seed, std::size_t threads) {
    if (features.cols() != model.support.cols()) throw StructuralError("feature width does not match the model");
    const auto queries = feature_circuits(model.config, features);
    const auto support = feature_circuits(model.config, model.support);
    const Eigen::MatrixXd cross = backend.kernel_matrix(queries, support, false, seed, threads);
    return cross * model.alphas;
}

double kernel_ridge_predict(const KernelRidgeModel& model, std::span<const double> feature, Backend& backend,
                            std::uint64_t seed) {
    const Eigen::MatrixXd row =
        Eigen::Map<const Eigen::RowVectorXd>(feature.data(), static_cast<Eigen::Index>(feature.size()));
    return kernel_ridge_predict(model, row, backend, seed)(0);
}

std::string_view to_string(ReadoutKind k) { return k == ReadoutKind::quantum ? "quantum" : "classical"; }

ReadoutKind readout_kind_from_string(std::string_view s) {
    if (s == "quantum") return ReadoutKind::quantum;
    if (s == "classical") return ReadoutKind::classical;
    throw ConfigError("unknown readout kind '" + std::string(s) + "' (expected quantum or classical)");
}

std::vector<FeatureSlice> split_features(std::size_t d, std::size_t instances) {
    if (instances == 0) throw ValidationError("need at least one readout instance");
    if (instances > d) {
        throw ValidationError(std::to_string(instances) + " readout instances exceed the feature dimension " +
                              std::to_string(d));
    }
    std::vector<FeatureSlice> slices;
    const std::size_t base = d / instances;
    const std::size_t extra = d % instances;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        slices.push_back({offset, len});
        offset += len;
    }
    return slices;
}

MultiReadout multi_readout_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                               std::span<const FeatureSlice> slices, const ReadoutSettings& settings,
                               std::span<Backend* const> backends, std::uint64_t seed, std::size_t threads) {
    if (slices.empty()) throw ValidationError("need at least one readout instance");
    std::size_t covered = 0;
    for (const auto& s : slices) {
        if (s.offset != covered || s.length == 0) throw ValidationError("readout slices must tile the features");
        covered += s.length;
    }
    if (covered != static_cast<std::size_t>(features.cols())) {
        throw StructuralError("readout slices cover " + std::to_string(covered) + " of " +
                              std::to_string(features.cols()) + " features");
    }
    if (settings.kind == ReadoutKind::quantum && backends.size() != slices.size()) {
        throw ConfigError("quantum readout needs one backend per instance");
    }

    MultiReadout out{settings, {slices.begin(), slices.end()}, std::vector<ReadoutModel>(slices.size())};
    const std::size_t inner = std::max<std::size_t>(1, threads / slices.size());
    parallel_for(slices.size(), threads, [&](std::size_t i) {
        const auto& s = slices[i];
        const auto cols = features.middleCols(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.length));
        if (settings.kind == ReadoutKind::classical) {
            out.models[i] = ridge_fit(cols.transpose(), targets, settings.lambda);
        } else {
            if (!backends[i]) throw ConfigError("quantum readout instance " + std::to_string(i) + " has no backend");
            const auto config = KernelFeatureMapConfig::for_dimension(s.length, settings.kernel_qubits,
                                                                      settings.kernel_blocks);
            try {
                out.models[i] = kernel_ridge_fit(cols, targets, config, settings.lambda, *backends[i],
                                                 derive_seed(seed, "instance", {i}), inner);
            } catch (const ServiceError& e) {
                throw ServiceError("readout instance " + std::to_string(i) + ": " + e.what());
            }
        }
    });
    return out;
}

Eigen::VectorXd multi_readout_predict(const MultiReadout& readout, const Eigen::MatrixXd& features,
                                      std::span<Backend* const> backends, std::uint64_t seed, std::size_t threads) {
    const std::size_t count = readout.models.size();
    std::vector<Eigen::VectorXd> parts(count);
    const std::size_t inner = std::max<std::size_t>(1, threads / std::max<std::size_t>(count, 1));
    parallel_for(count, threads, [&](std::size_t i) {
        const auto& s = readout.slices[i];
        if (s.offset + s.length > static_cast<std::size_t>(features.cols())) {
            throw StructuralError("feature matrix is narrower than the readout slices");
        }
        const Eigen::MatrixXd cols =
            features.middleCols(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.length));
        if (const auto* ridge = std::get_if<RidgeModel>(&readout.models[i])) {
            parts[i] = cols * ridge->weights;
        } else {
            if (i >= backends.size() || !backends[i]) {
                throw ConfigError("quantum readout instance " + std::to_string(i) + " has no backend");
            }
            try {
                parts[i] = kernel_ridge_predict(std::get<KernelRidgeModel>(readout.models[i]), cols, *backends[i],
                                                derive_seed(seed, "instance", {i}), inner);
            } catch (const ServiceError& e) {
                throw ServiceError("readout instance " + std::to_string(i) + ": " + e.what());
            }
        }
    });
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(features.rows());
    for (const auto& p : parts) sum += p;
    return sum / static_cast<double>(count);
}

void to_json(nlohmann::json& j, const KernelFeatureMapConfig& c) {
    j = nlohmann::json{{"qubits", c.num_qubits}, {"blocks", c.num_blocks}, {"layers", c.num_layers}};
}

void from_json(const nlohmann::json& j, KernelFeatureMapConfig& c) {
    c.num_qubits = j.at("qubits").get<std::size_t>();
    c.num_blocks = j.at("blocks").get<std::size_t>();
    c.num_layers = j.at("layers").get<std::size_t>();
    c.validate();
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
        rows.push_back(std::move(r));
    }
    return rows;
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const MultiReadout& r) {
    nlohmann::json instances = nlohmann::json::array();
    for (std::size_t i = 0; i < r.models.size(); ++i) {
        nlohmann::json inst{{"offset", r.slices[i].offset}, {"length", r.slices[i].length}};
        if (const auto* ridge = std::get_if<RidgeModel>(&r.models[i])) {
            inst["kind"] = "ridge";
            inst["lambda"] = ridge->lambda;
            inst["weights"] = std::vector<double>(ridge->weights.begin(), ridge->weights.end());
        } else {
            const auto& k = std::get<KernelRidgeModel>(r.models[i]);
            inst["kind"] = "kernel";
            inst["lambda"] = k.lambda;
            inst["config"] = k.config;
            inst["support"] = matrix_rows(k.support);
            inst["alphas"] = std::vector<double>(k.alphas.begin(), k.alphas.end());
        }
        instances.push_back(std::move(inst));
    }
    j = nlohmann::json{{"kind", to_string(r.settings.kind)},
                       {"lambda", r.settings.lambda},
                       {"kernel_qubits", r.settings.kernel_qubits},
                       {"kernel_blocks", r.settings.kernel_blocks},
                       {"instances", instances}};
}

MultiReadout multi_readout_from_json(const nlohmann::json& j) {
    MultiReadout r;
    r.settings.kind = readout_kind_from_string(j.at("kind").get<std::string>());
    r.settings.lambda = j.at("lambda").get<double>();
    r.settings.kernel_qubits = j.at("kernel_qubits").get<std::size_t>();
    r.settings.kernel_blocks = j.at("kernel_blocks").get<std::size_t>();
    for (const auto& inst : j.at("instances")) {
        r.slices.push_back({inst.at("offset").get<std::size_t>(), inst.at("length").get<std::size_t>()});
        if (inst.at("kind") == "ridge") {
            r.models.emplace_back(RidgeModel{vector_from(inst.at("weights")), inst.at("lambda").get<double>()});
        } else {
            KernelRidgeModel k;
            k.lambda = inst.at("lambda").get<double>();
            k.config = inst.at("config").get<KernelFeatureMapConfig>();
            k.alphas = vector_from(inst.at("alphas"));
            const auto& rows = inst.at("support");
            k.support.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(r.slices.back().length));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = rows[i].get<std::vector<double>>();
                for (std::size_t c = 0; c < row.size(); ++c) {
                    k.support(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
                }
            }
            r.models.emplace_back(std::move(k));
        }
    }
    return r;
}

}  // namespace dqrc
