#include "dqrc/noise.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dqrc/error.hpp"

namespace dqrc {

namespace {

void check_probability(double p, const char* what) {
    if (!std::isfinite(p) || p < 0.0 || p >= 1.0) {
        throw ValidationError(std::string(what) + " must lie in [0, 1), got " + std::to_string(p));
    }
}

}  // namespace

void NoiseModel::validate() const {
    check_probability(p1, "p1");
    check_probability(p2, "p2");
    check_probability(p_readout, "p_readout");
}

void to_json(nlohmann::json& j, const NoiseModel& n) {
    j = nlohmann::json{{"p1", n.p1}, {"p2", n.p2}, {"p_readout", n.p_readout}, {"label", n.label}};
}

void from_json(const nlohmann::json& j, NoiseModel& n) {
    n.p1 = j.value("p1", 0.0);
    n.p2 = j.value("p2", 0.0);
    n.p_readout = j.value("p_readout", 0.0);
    n.label = j.value("label", std::string{});
    n.validate();
}

NoiseModel Calibration::noise_model() const {
    NoiseModel n{sx_error, twoq_error, readout_error, name};
    n.validate();
    return n;
}

void to_json(nlohmann::json& j, const Calibration& c) {
    j = nlohmann::json{{"name", c.name},
                       {"sx_error", c.sx_error},
                       {"twoq_error", c.twoq_error},
                       {"readout_error", c.readout_error}};
    if (c.t1_us) j["t1_us"] = *c.t1_us;
    if (c.t2_us) j["t2_us"] = *c.t2_us;
}

void from_json(const nlohmann::json& j, Calibration& c) {
    c.name = j.at("name").get<std::string>();
    c.sx_error = j.at("sx_error").get<double>();
    c.twoq_error = j.at("twoq_error").get<double>();
    c.readout_error = j.at("readout_error").get<double>();
    c.t1_us = j.contains("t1_us") ? std::optional<double>(j["t1_us"].get<double>()) : std::nullopt;
    c.t2_us = j.contains("t2_us") ? std::optional<double>(j["t2_us"].get<double>()) : std::nullopt;
}

Calibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open calibration file " + path.string());
    try {
        Calibration c = nlohmann::json::parse(in).get<Calibration>();
        c.noise_model();  // range check
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed calibration file " + path.string() + ": " + e.what());
    }
}

std::optional<Calibration> builtin_calibration(std::string_view name) {
    // IBM: median SX, median ECR (Brisbane) / CZ (Marrakesh), median readout.
    // IonQ: 1 - fidelity for 1Q, 2Q and measurement; T1 = 100 s, T2 = 1 s.
    static const std::array<Calibration, 3> table{{
        {"ibm_brisbane", 2.236e-4, 7.519e-3, 1.660e-2, 230.85, 154.59},
        {"ibm_marrakesh", 2.304e-4, 3.351e-3, 1.038e-2, 219.88, 118.27},
        {"ionq_aria1", 1.0 - 0.9998, 1.0 - 0.9858, 1.0 - 0.9951, 100e6, 1e6},
    }};
    for (const auto& c : table) {
        if (c.name == name) return c;
    }
    return std::nullopt;
}

Calibration resolve_calibration(const std::string& spec) {
    if (auto c = builtin_calibration(spec)) return *c;
    return load_calibration(spec);
}

}  // namespace dqrc
