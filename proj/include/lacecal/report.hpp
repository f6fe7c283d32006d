#pragma once

// Per-language metric reports over scored records, and their file forms:
// MetricReport as JSON/CSV, the per-record confidence sidecar CSV, and the
// static reliability-diagram SVG.

#include "lacecal/metrics.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace lacecal {

// One record after a confidence method has been applied.
struct ScoredRecord {
    std::string id;
    std::string language;
    double confidence = 0.0;
    bool correct = false;
    // Set when the method had to fall back to a global component.
    bool fallback = false;

    friend bool operator==(const ScoredRecord&, const ScoredRecord&) = default;
};

struct LanguageMetrics {
    std::string language;
    std::size_t count = 0;
    double accuracy = 0.0;
    double ece = 0.0;
    double brier = 0.0;
    std::optional<double> auroc;
    double mean_confidence = 0.0;

    friend bool operator==(const LanguageMetrics&, const LanguageMetrics&) = default;
};

enum class Metric : std::uint8_t { ece, brier, auroc, accuracy, mean_confidence };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);
std::optional<double> metric_value(const LanguageMetrics& row, Metric metric);

struct MetricReport {
    int bins = kDefaultBins;
    std::string method;
    std::vector<LanguageMetrics> languages;  // sorted by tag
    // Unweighted mean over languages; AUROC averages the defined entries.
    LanguageMetrics macro;
    std::map<std::string, std::string> metadata;

    const LanguageMetrics* find(const std::string& language) const;
    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

LanguageMetrics score_language(std::string language, std::span<const double> confidences,
                               std::span<const std::uint8_t> correct, int bins);

MetricReport build_report(std::span<const ScoredRecord> records, int bins, std::string method = {});

// Groups records by language tag (sorted).
std::map<std::string, std::vector<const ScoredRecord*>> by_language(std::span<const ScoredRecord> records);

nlohmann::ordered_json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& doc);
std::string report_csv(const MetricReport& report);

std::string scored_csv(std::span<const ScoredRecord> records);
std::vector<ScoredRecord> parse_scored_csv(const std::string& text);

// Confidence behaviour per language plus a pooled "all" row.
std::string confidence_stats_csv(std::span<const ScoredRecord> records);

// Reliability diagram (bars, diagonal, gap overlay, ECE inset).
std::string reliability_svg(std::span<const BinSummary> bins, double ece_value, const std::string& title);

}  // namespace lacecal
