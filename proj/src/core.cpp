#include "lacecal/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace lacecal {

void fail(Errc code, const std::string& message)
{
    throw Error(code, message);
}

std::string_view to_string(Split split)
{
    return split == Split::validation ? "validation" : "test";
}

Split parse_split(std::string_view text)
{
    if (text == "validation") return Split::validation;
    if (text == "test") return Split::test;
    fail(Errc::parse, "unknown split tag '" + std::string(text) + "'");
}

SplitFilter parse_split_filter(std::string_view text)
{
    if (text == "all") return SplitFilter::all;
    if (text == "validation") return SplitFilter::validation;
    if (text == "test") return SplitFilter::test;
    fail(Errc::invalid_argument, "unknown split filter '" + std::string(text) + "' (expected all|validation|test)");
}

bool matches(SplitFilter filter, Split split)
{
    switch (filter) {
    case SplitFilter::all: return true;
    case SplitFilter::validation: return split == Split::validation;
    case SplitFilter::test: return split == Split::test;
    }
    return false;
}

double ChoiceDistribution::sum() const
{
    return std::accumulate(masses.begin(), masses.end(), 0.0);
}

std::size_t argmax(std::span<const double> masses)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < masses.size(); ++i) {
        if (masses[i] > masses[best]) best = i;
    }
    return best;
}

std::span<const double> PredictionRecord::layer(std::size_t layer, std::size_t num_choices) const
{
    return std::span<const double>(masses).subspan((layer - 1) * num_choices, num_choices);
}

std::span<double> PredictionRecord::layer(std::size_t layer, std::size_t num_choices)
{
    return std::span<double>(masses).subspan((layer - 1) * num_choices, num_choices);
}

std::vector<std::string> Dataset::languages() const
{
    std::set<std::string> tags;
    for (const auto& r : records) tags.insert(r.language);
    return {tags.begin(), tags.end()};
}

std::string Violation::describe() const
{
    if (record_id.empty()) return "dataset: " + field + ": " + rule;
    return "record '" + record_id + "': " + field + ": " + rule;
}

namespace {

void check_record(const PredictionRecord& r, const DatasetHeader& h, std::vector<Violation>& out)
{
    const std::size_t K = h.num_choices;
    const std::size_t L = h.num_layers;
    auto add = [&](std::string field, std::string rule) {
        out.push_back({r.id, std::move(field), std::move(rule)});
    };

    if (K < 2 || L < 1) return;  // reported once at dataset level
    if (r.masses.size() != K * L) {
        add("layers", "expected " + std::to_string(L) + " layers of " + std::to_string(K) + " masses");
        return;
    }
    if (r.gold < 0 || static_cast<std::size_t>(r.gold) >= K) add("gold", "choice index outside [0, K)");
    const bool pred_ok = r.pred >= 0 && static_cast<std::size_t>(r.pred) < K;
    if (!pred_ok) add("pred", "choice index outside [0, K)");

    for (std::size_t l = 1; l <= L; ++l) {
        auto masses = r.layer(l, K);
        bool in_range = true;
        double total = 0.0;
        for (double m : masses) {
            if (!std::isfinite(m) || m < 0.0 || m > 1.0) in_range = false;
            total += m;
        }
        const std::string field = "layers[" + std::to_string(l) + "]";
        if (!in_range) add(field, "mass outside [0, 1]");
        if (h.normalized) {
            if (!(std::abs(total - 1.0) <= kNormalizedSlack)) add(field, "masses must sum to 1 within 1e-6 (normalized mode)");
        } else if (!(total <= 1.0 + kRawMassSlack)) {
            add(field, "masses sum above 1 + 1e-9 (raw-mass mode)");
        }
    }

    if (pred_ok && argmax(r.layer(L, K)) != static_cast<std::size_t>(r.pred)) {
        add("pred", "final prediction is not the argmax of the final-layer masses");
    }

    if (r.entropy) {
        if (r.entropy->size() != L) {
            add("entropy", "expected " + std::to_string(L) + " entries");
        } else if (std::any_of(r.entropy->begin(), r.entropy->end(),
                               [](double e) { return !std::isfinite(e) || e < 0.0; })) {
            add("entropy", "entries must be finite and non-negative");
        }
    }
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& dataset)
{
    std::vector<Violation> out;
    const auto& h = dataset.header;
    if (h.num_choices < 2) out.push_back({"", "K", "at least 2 choices required"});
    if (h.num_layers < 1) out.push_back({"", "L", "at least 1 layer required"});

    std::map<std::string, std::size_t> id_counts;
    for (const auto& r : dataset.records) ++id_counts[r.id];

    for (const auto& r : dataset.records) {
        check_record(r, h, out);
        if (id_counts[r.id] > 1) out.push_back({r.id, "id", "example id is not unique"});
    }

    if (!h.languages.empty()) {
        std::set<std::string> present;
        for (const auto& r : dataset.records) present.insert(r.language);
        for (const auto& lang : h.languages) {
            if (!present.count(lang)) out.push_back({"", "languages", "declared language '" + lang + "' has no records"});
        }
    }
    return out;
}

double layer_confidence(const PredictionRecord& record, std::size_t layer, std::size_t num_choices)
{
    const std::size_t L = record.num_layers(num_choices);
    if (layer < 1 || layer > L) {
        fail(Errc::invalid_argument, "layer " + std::to_string(layer) + " outside [1, " + std::to_string(L) + "]");
    }
    return record.layer(layer, num_choices)[static_cast<std::size_t>(record.pred)];
}

std::vector<const PredictionRecord*> select_records(const Dataset& dataset, SplitFilter filter)
{
    std::vector<const PredictionRecord*> out;
    for (const auto& r : dataset.records) {
        if (matches(filter, r.split)) out.push_back(&r);
    }
    return out;
}

}  // namespace lacecal
