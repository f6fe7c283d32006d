#pragma once

// Group averages, rank correlations against language resource levels, and
// percentile bootstrap intervals for report metrics.

#include "lacecal/report.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace lacecal {

// Named language sets. A language may appear in several groups.
struct LanguageGroups {
    std::map<std::string, std::vector<std::string>> groups;
};

LanguageGroups groups_from_json(const nlohmann::json& doc);
LanguageGroups load_groups(const std::string& path);

struct GroupRow {
    std::string group;
    std::vector<std::string> present;
    std::vector<std::string> missing;  // listed in the group but absent from the report
    std::optional<LanguageMetrics> mean;  // nullopt when no member is present
};

// Unweighted member means. Errors on a group with no members.
std::vector<GroupRow> group_summary(const MetricReport& report, const LanguageGroups& groups);
std::string group_csv(std::span<const GroupRow> rows);
nlohmann::ordered_json to_json(std::span<const GroupRow> rows);

// Language tag to resource share. Shares are non-negative.
struct ResourceTable {
    std::map<std::string, double> shares;
};

ResourceTable parse_resource_csv(const std::string& text);

// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct Coefficient {
    std::optional<double> value;    // nullopt on zero variance
    std::optional<double> p_value;  // two-sided, asymptotic
};

struct CorrelationResult {
    std::size_t n = 0;
    Coefficient pearson;
    Coefficient spearman;
    Coefficient kendall;  // tau-b
};

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);

// Requires equal lengths of at least 3.
CorrelationResult correlations(std::span<const double> x, std::span<const double> y);
nlohmann::ordered_json to_json(const CorrelationResult& result);

struct ResourceCorrelation {
    Metric metric = Metric::ece;
    std::vector<std::string> languages;  // joined, sorted
    std::vector<double> shares;
    std::vector<double> values;
    std::vector<std::string> dropped;  // in only one input, or metric undefined
    CorrelationResult result;
};

// Joins on language tag; errors when fewer than 3 languages overlap.
ResourceCorrelation resource_correlation(const MetricReport& report, const ResourceTable& table, Metric metric);
nlohmann::ordered_json to_json(const ResourceCorrelation& rc);

enum class Aggregate : std::uint8_t { pooled, macro };

struct BootstrapOptions {
    std::size_t resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    int bins = kDefaultBins;
    Aggregate aggregate = Aggregate::pooled;
    // Resample within each language so every resample keeps all languages.
    bool stratify = false;
    std::size_t max_retries = 100;
};

struct BootstrapResult {
    Metric metric = Metric::ece;
    Aggregate aggregate = Aggregate::pooled;
    double estimate = 0.0;  // metric on the original sample
    double mean = 0.0;      // mean over resamples
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::size_t resamples = 0;
    std::uint64_t seed = 0;
};

// Statistic of a sample: the pooled metric, or the macro average over
// languages. nullopt when undefined.
std::optional<double> sample_statistic(std::span<const ScoredRecord> records, Metric metric, Aggregate aggregate,
                                       int bins);

// Percentile bootstrap. Undefined resamples are redrawn up to
// `max_retries` times before failing with Errc::undefined.
BootstrapResult bootstrap_ci(std::span<const ScoredRecord> records, Metric metric, const BootstrapOptions& options = {});
nlohmann::ordered_json to_json(const BootstrapResult& result);

// Linear-interpolation quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace lacecal
