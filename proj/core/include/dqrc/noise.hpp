#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace dqrc {

/// Channel parameters applied by the density-matrix simulator: depolarizing
/// after every 1-qubit gate (p1) and CNOT (p2), then a symmetric bit-flip
/// confusion at readout.
struct NoiseModel {
    double p1 = 0.0;
    double p2 = 0.0;
    double p_readout = 0.0;
    std::string label;

    void validate() const;
    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

void to_json(nlohmann::json& j, const NoiseModel& n);
void from_json(const nlohmann::json& j, NoiseModel& n);

/// Per-backend calibration record. T1/T2 are carried for provenance only.
struct Calibration {
    std::string name;
    double sx_error = 0.0;
    double twoq_error = 0.0;
    double readout_error = 0.0;
    std::optional<double> t1_us;
    std::optional<double> t2_us;

    NoiseModel noise_model() const;
};

void to_json(nlohmann::json& j, const Calibration& c);
void from_json(const nlohmann::json& j, Calibration& c);

/// Reads a calibration file (JSON object with the Calibration fields).
Calibration load_calibration(const std::filesystem::path& path);

/// Medians recorded for ibm_brisbane, ibm_marrakesh and ionq_aria1.
std::optional<Calibration> builtin_calibration(std::string_view name);

/// `spec` is either a builtin name or a path to a calibration file.
Calibration resolve_calibration(const std::string& spec);

}  // namespace dqrc
