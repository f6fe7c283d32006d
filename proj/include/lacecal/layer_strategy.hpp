#pragma once

// Layer-wise confidence tracing and the strategies built on it: the layer
// ECE profile, best-layer selection, good-layer ensembles, and the
// language-aware ensemble (LACE) with per-language calibrators.

#include "lacecal/calibrators.hpp"
#include "lacecal/core.hpp"
#include "lacecal/metrics.hpp"
#include "lacecal/report.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace lacecal {

struct LayerEceProfile {
    int bins = kDefaultBins;
    std::string source;  // split the profile was computed on
    std::size_t num_layers = 0;
    std::vector<std::string> languages;  // sorted
    std::vector<std::size_t> counts;     // records per language
    std::vector<double> ece;             // row-major [layer][language]
    std::vector<double> avg;             // unweighted row means

    // `layer` is 1-based.
    double at(std::size_t layer, std::size_t language_index) const;
    std::optional<std::size_t> language_index(const std::string& language) const;
};

LayerEceProfile layer_ece_profile(const Dataset& dataset, SplitFilter filter, int bins = kDefaultBins);
LayerEceProfile layer_ece_profile(std::span<const PredictionRecord* const> records, std::size_t num_choices,
                                  std::size_t num_layers, int bins, std::string source);

// Layers x languages CSV of the profile, with the average as the last column.
std::string profile_csv(const LayerEceProfile& profile);

// Mean per-layer entropy by language. Choice-level entropy is computed from
// the masses; supplied full-vocabulary entropy is averaged when every record
// carries it.
struct LayerEntropyProfile {
    std::size_t num_layers = 0;
    std::vector<std::string> languages;
    std::vector<double> choice;                 // row-major [layer][language]
    std::optional<std::vector<double>> vocab;   // same shape
};

LayerEntropyProfile layer_entropy_profile(const Dataset& dataset, SplitFilter filter);
std::string entropy_csv(const LayerEntropyProfile& profile);

// Deepest layer among those with the lowest average ECE.
std::size_t select_best_layer(const LayerEceProfile& profile);

// Strictly-better-than-final layers, ascending. An empty result is replaced
// by {L} with `final_fallback` set.
struct LayerSet {
    std::vector<std::size_t> layers;
    bool final_fallback = false;

    friend bool operator==(const LayerSet&, const LayerSet&) = default;
};

LayerSet select_good_layers(const LayerEceProfile& profile, const std::optional<std::string>& language = std::nullopt);

ChoiceDistribution ensemble_distribution(const PredictionRecord& record, std::span<const std::size_t> layers,
                                         std::size_t num_choices);
// Ensemble mass at the final prediction, equal bit-for-bit to reading
// ensemble_distribution at `pred`.
double ensemble_confidence(const PredictionRecord& record, std::span<const std::size_t> layers,
                           std::size_t num_choices);

// Records passing `filter`, scored with their confidence at `layer`.
std::vector<ScoredRecord> score_layer(const Dataset& dataset, std::size_t layer, SplitFilter filter);

struct FitOptions {
    int bins = kDefaultBins;
    CalibratorKind calibrator = CalibratorKind::none;
    std::size_t min_samples = 50;
    TemperatureGrid grid;
    // Fixed 1-based layer for best_layer; selected from the profile when unset.
    std::optional<std::size_t> layer;
};

struct LaceLanguage {
    std::size_t count = 0;  // validation records
    bool uses_global = false;
    LayerSet layers;
    CalibratorModel calibrator;
};

struct LaceModel {
    CalibratorKind calibrator_kind = CalibratorKind::none;
    std::size_t min_samples = 50;
    int bins = kDefaultBins;
    std::size_t num_layers = 0;
    LayerSet global_layers;
    CalibratorModel global_calibrator;
    std::map<std::string, LaceLanguage> languages;
};

// Reads validation records only.
LaceModel fit_lace(const Dataset& dataset, const FitOptions& options = {});

struct LaceOutput {
    double confidence = 0.0;
    bool fallback = false;  // global layer set and calibrator were used
};

LaceOutput apply_lace(const LaceModel& model, const PredictionRecord& record, std::size_t num_choices);

enum class MethodKind : std::uint8_t { final_layer, best_layer, ensemble, lace };

std::string_view to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view text);

struct MethodModel {
    MethodKind kind = MethodKind::final_layer;
    CalibratorKind calibrator_kind = CalibratorKind::none;
    int bins = kDefaultBins;
    std::size_t num_layers = 0;
    std::size_t num_choices = 0;
    std::size_t fit_count = 0;
    std::string model_name;
    std::string benchmark;
    // Layers read by final/best/ensemble; empty for lace.
    LayerSet layers;
    CalibratorModel calibrator;
    std::optional<LaceModel> lace;
};

// Fits on validation records only; errors when there are none.
MethodModel fit_method(const Dataset& dataset, MethodKind kind, const FitOptions& options = {});

ScoredRecord apply_method(const MethodModel& model, const PredictionRecord& record);

// Scores the records passing `filter`. Errors when the dataset's L or K
// differs from the model's.
std::vector<ScoredRecord> apply_method(const MethodModel& model, const Dataset& dataset,
                                       SplitFilter filter = SplitFilter::test);

// Scores and reports test records only.
MetricReport evaluate_method(const MethodModel& model, const Dataset& dataset, int bins = kDefaultBins);

nlohmann::ordered_json to_json(const LayerSet& set);
LayerSet layer_set_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const LaceModel& model);
LaceModel lace_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const MethodModel& model);
MethodModel method_from_json(const nlohmann::json& doc);

}  // namespace lacecal
