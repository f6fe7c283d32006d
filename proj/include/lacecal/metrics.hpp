#pragma once

// Calibration and discrimination metrics over (confidence, correctness)
// samples. Correctness flags are bytes (0 = incorrect, nonzero = correct) so
// the same buffers cross the C boundary untouched.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lacecal {

inline constexpr int kDefaultBins = 10;

struct BinSummary {
    int bin_index = 0;  // 1..M
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    // Undefined (nullopt) for empty bins.
    std::optional<double> mean_confidence;
    std::optional<double> accuracy;
    std::optional<double> gap;
};

// Bin of a confidence under M equal-width bins ((m-1)/M, m/M]; 0 goes to bin 1.
int bin_index(double confidence, int bins);

std::vector<BinSummary> reliability_bins(std::span<const double> confidences,
                                         std::span<const std::uint8_t> correct, int bins = kDefaultBins);

// Weighted gap sum of a reliability table. `ece` is defined through this, so
// the two agree bit-for-bit.
double ece_from_bins(std::span<const BinSummary> bins);

double ece(std::span<const double> confidences, std::span<const std::uint8_t> correct, int bins = kDefaultBins);

double brier(std::span<const double> confidences, std::span<const std::uint8_t> correct);

// Mann-Whitney AUROC with average ranks for ties. nullopt when all records
// share one correctness value.
std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> correct);

double accuracy(std::span<const std::uint8_t> correct);

// Shannon entropy in nats. Inputs summing below 1 are renormalized first.
double entropy(std::span<const double> distribution);

// Confidence behaviour summary. All fields are percentages.
struct ConfidenceStats {
    std::size_t count = 0;
    double accuracy = 0.0;
    double avg_conf = 0.0;
    double conf_gap = 0.0;  // accuracy - avg_conf
    std::optional<double> underconf_rate;  // share of correct predictions with confidence < 0.5
    std::optional<double> corr_conf;
    std::optional<double> inc_conf;
    std::optional<double> corr_inc_gap;
};

ConfidenceStats confidence_stats(std::span<const double> confidences, std::span<const std::uint8_t> correct);

std::string reliability_csv(std::span<const BinSummary> bins);

}  // namespace lacecal
