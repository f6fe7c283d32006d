#pragma once

// Post-hoc confidence calibrators: a single-temperature softmax rescaling
// fitted by grid search on NLL, and isotonic regression fitted by
// pool-adjacent-violators. Both sit behind CalibratorModel so the pipelines
// can treat them uniformly.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lacecal {

inline constexpr double kMassFloor = 1e-12;

enum class CalibratorKind : std::uint8_t { none, temperature, isotonic };

std::string_view to_string(CalibratorKind kind);
CalibratorKind parse_calibrator_kind(std::string_view text);

struct TemperatureGrid {
    double lower = 0.05;
    double upper = 5.0;
    int coarse_count = 60;
    int refine_count = 40;
    int refine_rounds = 2;
    // Also score T = 1 when it lies inside the bounds, so the fitted NLL can
    // never be worse than leaving the logits alone.
    bool include_identity = true;
};

struct TemperatureModel {
    double temperature = 1.0;
    double fit_nll = 0.0;
    std::size_t fit_count = 0;
    std::uint64_t data_hash = 0;
    std::vector<std::pair<double, double>> grid_trace;  // (T, NLL), evaluation order
};

struct IsotonicModel {
    std::vector<double> breakpoints;  // strictly increasing
    std::vector<double> values;       // non-decreasing, in [0, 1]
    double fit_sse = 0.0;
    std::size_t fit_count = 0;
    std::uint64_t data_hash = 0;

    double predict(double confidence) const;
};

struct IdentityModel {};

// One fitting example for temperature scaling: the K choice masses and the
// gold index.
struct TemperatureExample {
    std::span<const double> masses;
    int gold = 0;
};

// Mean gold-choice NLL of softmax(log(masses) / T).
double temperature_nll(std::span<const TemperatureExample> examples, double temperature);

TemperatureModel fit_temperature(std::span<const TemperatureExample> examples, const TemperatureGrid& grid = {},
                                 bool keep_trace = false);

std::vector<double> apply_temperature(std::span<const double> masses, double temperature);

struct ConfidencePair {
    double confidence = 0.0;
    bool correct = false;
};

IsotonicModel fit_isotonic(std::span<const ConfidencePair> pairs);

struct CalibratorModel {
    std::variant<IdentityModel, TemperatureModel, IsotonicModel> model;
    std::optional<std::string> language;  // nullopt: global scope

    CalibratorKind kind() const;
};

// What a calibrator may read. Temperature models need the full masses and
// the final prediction; isotonic models only the scalar confidence.
struct CalibrationInput {
    std::span<const double> masses;
    int pred = 0;
    double confidence = 0.0;
};

// Per-language models refuse other languages unless `allow_scope_override`.
double apply_calibrator(const CalibratorModel& model, const CalibrationInput& input,
                        std::optional<std::string_view> language = std::nullopt,
                        bool allow_scope_override = false);

nlohmann::ordered_json to_json(const CalibratorModel& model);
CalibratorModel calibrator_from_json(const nlohmann::json& doc);

}  // namespace lacecal
