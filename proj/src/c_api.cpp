#include "lacecal/lacecal.h"

#include "lacecal/analysis.hpp"
#include "lacecal/calibrators.hpp"
#include "lacecal/core.hpp"
#include "lacecal/layer_strategy.hpp"
#include "lacecal/metrics.hpp"
#include "lacecal/report.hpp"
#include "lacecal/store.hpp"
#include "lacecal/synth.hpp"
#include "text_util.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

using namespace lacecal;

struct lc_dataset {
    Dataset dataset;
    std::vector<Violation> violations;
};

struct lc_model {
    MethodModel model;
};

struct lc_report {
    MetricReport report;
};

struct lc_scores {
    std::vector<ScoredRecord> records;
};

namespace {

thread_local std::string g_last_error;

lc_status to_status(Errc code) { return static_cast<lc_status>(static_cast<int>(code)); }

template <class F>
lc_status guard(F&& body) noexcept
{
    try {
        g_last_error.clear();
        body();
        return LC_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return LC_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return LC_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return LC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return LC_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what)
{
    if (!p) fail(Errc::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s)
{
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size());
    out[s.size()] = '\0';
    return out;
}

template <class T>
T* dup_array(const std::vector<T>& v)
{
    auto* out = static_cast<T*>(std::malloc(v.empty() ? 1 : v.size() * sizeof(T)));
    if (!out) throw std::bad_alloc();
    if (!v.empty()) std::memcpy(out, v.data(), v.size() * sizeof(T));
    return out;
}

SplitFilter to_filter(lc_split split)
{
    switch (split) {
    case LC_SPLIT_ALL: return SplitFilter::all;
    case LC_SPLIT_VALIDATION: return SplitFilter::validation;
    case LC_SPLIT_TEST: return SplitFilter::test;
    }
    fail(Errc::invalid_argument, "unknown split value");
}

std::size_t resolve_layer(const Dataset& d, std::size_t layer) { return layer == 0 ? d.num_layers() : layer; }

nlohmann::json parse_json(const char* text, const char* what)
{
    require(text, what);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, std::string(what) + ": " + e.what());
    }
}

std::span<const std::uint8_t> bytes(const unsigned char* p, std::size_t n)
{
    return {reinterpret_cast<const std::uint8_t*>(p), n};
}

}  // namespace

extern "C" {

const char* lc_version(void) { return "1.0.0"; }

const char* lc_status_name(lc_status status)
{
    switch (status) {
    case LC_OK: return "ok";
    case LC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LC_ERR_IO: return "i/o error";
    case LC_ERR_PARSE: return "parse error";
    case LC_ERR_DATA: return "data error";
    case LC_ERR_UNDEFINED: return "undefined result";
    case LC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* lc_last_error(void) { return g_last_error.c_str(); }

void lc_free(void* ptr) { std::free(ptr); }

lc_status lc_dataset_read(const char* path, lc_dataset** out)
{
    return guard([&] {
        require(path, "path");
        require(out, "out");
        auto r = read_records(path);
        *out = new lc_dataset{std::move(r.dataset), std::move(r.violations)};
    });
}

lc_status lc_dataset_parse(const char* text, size_t length, lc_dataset** out)
{
    return guard([&] {
        require(text, "text");
        require(out, "out");
        auto r = parse_records(std::string_view(text, length));
        *out = new lc_dataset{std::move(r.dataset), std::move(r.violations)};
    });
}

lc_status lc_dataset_write(const lc_dataset* dataset, const char* path, int gzip, size_t* bytes_written)
{
    return guard([&] {
        require(dataset, "dataset");
        require(path, "path");
        const std::size_t n = write_records(dataset->dataset, path, gzip != 0);
        if (bytes_written) *bytes_written = n;
    });
}

lc_status lc_dataset_serialize(const lc_dataset* dataset, char** text)
{
    return guard([&] {
        require(dataset, "dataset");
        require(text, "text");
        *text = dup_string(serialize_records(dataset->dataset));
    });
}

void lc_dataset_free(lc_dataset* dataset) { delete dataset; }

lc_status lc_dataset_shape(const lc_dataset* dataset, size_t* records, size_t* choices, size_t* layers,
                           int* normalized)
{
    return guard([&] {
        require(dataset, "dataset");
        if (records) *records = dataset->dataset.records.size();
        if (choices) *choices = dataset->dataset.num_choices();
        if (layers) *layers = dataset->dataset.num_layers();
        if (normalized) *normalized = dataset->dataset.header.normalized ? 1 : 0;
    });
}

lc_status lc_dataset_languages(const lc_dataset* dataset, char** json)
{
    return guard([&] {
        require(dataset, "dataset");
        require(json, "json");
        *json = dup_string(nlohmann::json(dataset->dataset.languages()).dump());
    });
}

size_t lc_dataset_violation_count(const lc_dataset* dataset) { return dataset ? dataset->violations.size() : 0; }

lc_status lc_dataset_violation_text(const lc_dataset* dataset, size_t index, char** text)
{
    return guard([&] {
        require(dataset, "dataset");
        require(text, "text");
        if (index >= dataset->violations.size()) fail(Errc::invalid_argument, "violation index out of range");
        *text = dup_string(dataset->violations[index].describe());
    });
}

lc_status lc_dataset_confidences(const lc_dataset* dataset, lc_split split, size_t layer, double** confidences,
                                 unsigned char** correct, size_t* count)
{
    return guard([&] {
        require(dataset, "dataset");
        require(confidences, "confidences");
        require(correct, "correct");
        require(count, "count");
        const auto scored = score_layer(dataset->dataset, resolve_layer(dataset->dataset, layer), to_filter(split));
        std::vector<double> conf;
        std::vector<unsigned char> corr;
        for (const auto& s : scored) {
            conf.push_back(s.confidence);
            corr.push_back(s.correct ? 1 : 0);
        }
        double* c = dup_array(conf);
        unsigned char* k = nullptr;
        try {
            k = dup_array(corr);
        } catch (...) {
            std::free(c);
            throw;
        }
        *confidences = c;
        *correct = k;
        *count = scored.size();
    });
}

lc_status lc_simulate(const char* preset, const char* profiles_json, size_t n, uint64_t seed, lc_dataset** out)
{
    return guard([&] {
        require(out, "out");
        if ((preset == nullptr) == (profiles_json == nullptr)) {
            fail(Errc::invalid_argument, "give exactly one of a preset name and a profiles document");
        }
        const auto profiles =
            preset ? preset_profiles(preset) : profiles_from_json(parse_json(profiles_json, "profiles document"));
        Dataset d = generate(profiles, n, seed);
        if (preset) d.header.model = std::string("synthetic:") + preset;
        *out = new lc_dataset{std::move(d), {}};
    });
}

lc_status lc_preset_names(char** text)
{
    return guard([&] {
        require(text, "text");
        std::string s;
        for (const auto& name : preset_names()) s += name + "\n";
        *text = dup_string(s);
    });
}

lc_status lc_metrics_report(const lc_dataset* dataset, lc_split split, size_t layer, int bins, int by_language,
                            lc_report** out)
{
    return guard([&] {
        require(dataset, "dataset");
        require(out, "out");
        const std::size_t l = resolve_layer(dataset->dataset, layer);
        auto scored = score_layer(dataset->dataset, l, to_filter(split));
        if (scored.empty()) fail(Errc::data, "no records in the selected split");
        if (!by_language) {
            for (auto& s : scored) s.language = "all";
        }
        MetricReport report = build_report(scored, bins, l == dataset->dataset.num_layers()
                                                              ? std::string("final")
                                                              : "layer-" + std::to_string(l));
        report.metadata["layer"] = std::to_string(l);
        report.metadata["confidence"] = dataset->dataset.header.normalized ? "normalized" : "raw-mass";
        report.metadata["split"] = split == LC_SPLIT_ALL ? "all" : split == LC_SPLIT_VALIDATION ? "validation" : "test";
        *out = new lc_report{std::move(report)};
    });
}

lc_status lc_confidence_stats(const lc_dataset* dataset, lc_split split, size_t layer, char** csv)
{
    return guard([&] {
        require(dataset, "dataset");
        require(csv, "csv");
        const auto scored = score_layer(dataset->dataset, resolve_layer(dataset->dataset, layer), to_filter(split));
        *csv = dup_string(confidence_stats_csv(scored));
    });
}

lc_status lc_layer_sweep(const lc_dataset* dataset, lc_split split, int bins, char** ece_csv, char** entropy_csv)
{
    return guard([&] {
        require(dataset, "dataset");
        std::string a, b;
        if (ece_csv) a = profile_csv(layer_ece_profile(dataset->dataset, to_filter(split), bins));
        if (entropy_csv) b = lacecal::entropy_csv(layer_entropy_profile(dataset->dataset, to_filter(split)));
        char* pa = ece_csv ? dup_string(a) : nullptr;
        if (entropy_csv) {
            try {
                *entropy_csv = dup_string(b);
            } catch (...) {
                std::free(pa);
                throw;
            }
        }
        if (ece_csv) *ece_csv = pa;
    });
}

lc_status lc_select_best_layer(const lc_dataset* dataset, lc_split split, int bins, size_t* layer)
{
    return guard([&] {
        require(dataset, "dataset");
        require(layer, "layer");
        *layer = select_best_layer(layer_ece_profile(dataset->dataset, to_filter(split), bins));
    });
}

lc_status lc_select_good_layers(const lc_dataset* dataset, lc_split split, int bins, const char* language,
                                size_t** layers, size_t* count, int* final_fallback)
{
    return guard([&] {
        require(dataset, "dataset");
        require(layers, "layers");
        require(count, "count");
        const auto profile = layer_ece_profile(dataset->dataset, to_filter(split), bins);
        const LayerSet set =
            select_good_layers(profile, language ? std::optional<std::string>(language) : std::nullopt);
        *layers = dup_array(set.layers);
        *count = set.layers.size();
        if (final_fallback) *final_fallback = set.final_fallback ? 1 : 0;
    });
}

lc_status lc_fit(const lc_dataset* dataset, const char* method, const char* calibrator, int bins, size_t min_samples,
                 lc_model** out)
{
    return guard([&] {
        require(dataset, "dataset");
        require(method, "method");
        require(calibrator, "calibrator");
        require(out, "out");
        FitOptions options;
        options.bins = bins;
        options.calibrator = parse_calibrator_kind(calibrator);
        options.min_samples = min_samples;
        if (!dataset->violations.empty()) {
            fail(Errc::data, "dataset has " + std::to_string(dataset->violations.size()) + " violation(s)");
        }
        *out = new lc_model{fit_method(dataset->dataset, parse_method_kind(method), options)};
    });
}

lc_status lc_fit_best_layer(const lc_dataset* dataset, size_t layer, const char* calibrator, int bins, lc_model** out)
{
    return guard([&] {
        require(dataset, "dataset");
        require(calibrator, "calibrator");
        require(out, "out");
        FitOptions options;
        options.bins = bins;
        options.calibrator = parse_calibrator_kind(calibrator);
        options.layer = layer;
        if (!dataset->violations.empty()) {
            fail(Errc::data, "dataset has " + std::to_string(dataset->violations.size()) + " violation(s)");
        }
        *out = new lc_model{fit_method(dataset->dataset, MethodKind::best_layer, options)};
    });
}

lc_status lc_model_to_json(const lc_model* model, char** json)
{
    return guard([&] {
        require(model, "model");
        require(json, "json");
        *json = dup_string(to_json(model->model).dump(2) + "\n");
    });
}

lc_status lc_model_from_json(const char* json, lc_model** out)
{
    return guard([&] {
        require(out, "out");
        *out = new lc_model{method_from_json(parse_json(json, "model document"))};
    });
}

void lc_model_free(lc_model* model) { delete model; }

lc_status lc_apply(const lc_model* model, const lc_dataset* dataset, lc_scores** out)
{
    return guard([&] {
        require(model, "model");
        require(dataset, "dataset");
        require(out, "out");
        *out = new lc_scores{apply_method(model->model, dataset->dataset, SplitFilter::test)};
    });
}

lc_status lc_evaluate(const lc_model* model, const lc_dataset* dataset, int bins, lc_report** out)
{
    return guard([&] {
        require(model, "model");
        require(dataset, "dataset");
        require(out, "out");
        *out = new lc_report{evaluate_method(model->model, dataset->dataset, bins)};
    });
}

lc_status lc_scores_read(const char* path, lc_scores** out)
{
    return guard([&] {
        require(path, "path");
        require(out, "out");
        try {
            *out = new lc_scores{parse_scored_csv(detail::read_text_file(path))};
        } catch (const Error& e) {
            if (e.code() == Errc::parse) fail(Errc::parse, std::string(path) + ": " + e.what());
            throw;
        }
    });
}

lc_status lc_scores_parse(const char* csv, lc_scores** out)
{
    return guard([&] {
        require(csv, "csv");
        require(out, "out");
        *out = new lc_scores{parse_scored_csv(csv)};
    });
}

lc_status lc_scores_to_csv(const lc_scores* scores, char** csv)
{
    return guard([&] {
        require(scores, "scores");
        require(csv, "csv");
        *csv = dup_string(scored_csv(scores->records));
    });
}

size_t lc_scores_count(const lc_scores* scores) { return scores ? scores->records.size() : 0; }

void lc_scores_free(lc_scores* scores) { delete scores; }

lc_status lc_scores_report(const lc_scores* scores, int bins, const char* method, lc_report** out)
{
    return guard([&] {
        require(scores, "scores");
        require(out, "out");
        *out = new lc_report{build_report(scores->records, bins, method ? method : "")};
    });
}

lc_status lc_scores_reliability(const lc_scores* scores, const char* language, int bins, const char* title,
                                char** csv, char** svg, double* ece_out)
{
    return guard([&] {
        require(scores, "scores");
        std::vector<double> conf;
        std::vector<std::uint8_t> correct;
        for (const auto& r : scores->records) {
            if (language && r.language != language) continue;
            conf.push_back(r.confidence);
            correct.push_back(r.correct ? 1 : 0);
        }
        if (conf.empty()) {
            fail(Errc::data, language ? "no records for language '" + std::string(language) + "'" : "empty sample");
        }
        const auto table = reliability_bins(conf, correct, bins);
        const double e = ece_from_bins(table);
        const std::string a = csv ? reliability_csv(table) : std::string();
        const std::string b = svg ? reliability_svg(table, e, title ? title : "") : std::string();
        char* pa = csv ? dup_string(a) : nullptr;
        if (svg) {
            try {
                *svg = dup_string(b);
            } catch (...) {
                std::free(pa);
                throw;
            }
        }
        if (csv) *csv = pa;
        if (ece_out) *ece_out = e;
    });
}

lc_status lc_scores_bootstrap(const lc_scores* scores, const char* metric, size_t resamples, double level,
                              uint64_t seed, int bins, int macro, char** json)
{
    return guard([&] {
        require(scores, "scores");
        require(metric, "metric");
        require(json, "json");
        BootstrapOptions options;
        options.resamples = resamples;
        options.level = level;
        options.seed = seed;
        options.bins = bins;
        options.aggregate = macro ? Aggregate::macro : Aggregate::pooled;
        options.stratify = macro != 0;
        *json = dup_string(to_json(bootstrap_ci(scores->records, parse_metric(metric), options)).dump());
    });
}

lc_status lc_report_to_json(const lc_report* report, char** json)
{
    return guard([&] {
        require(report, "report");
        require(json, "json");
        *json = dup_string(to_json(report->report).dump(2) + "\n");
    });
}

lc_status lc_report_from_json(const char* json, lc_report** out)
{
    return guard([&] {
        require(out, "out");
        *out = new lc_report{report_from_json(parse_json(json, "report document"))};
    });
}

lc_status lc_report_to_csv(const lc_report* report, char** csv)
{
    return guard([&] {
        require(report, "report");
        require(csv, "csv");
        *csv = dup_string(report_csv(report->report));
    });
}

lc_status lc_report_macro(const lc_report* report, const char* metric, double* value, int* defined)
{
    return guard([&] {
        require(report, "report");
        require(metric, "metric");
        require(value, "value");
        const auto v = metric_value(report->report.macro, parse_metric(metric));
        if (defined) *defined = v ? 1 : 0;
        if (v) *value = *v;
    });
}

void lc_report_free(lc_report* report) { delete report; }

lc_status lc_report_groups(const lc_report* report, const char* groups_json, char** json, char** csv)
{
    return guard([&] {
        require(report, "report");
        const auto rows = group_summary(report->report, groups_from_json(parse_json(groups_json, "groups config")));
        const std::string a = json ? to_json(std::span<const GroupRow>(rows)).dump(2) + "\n" : std::string();
        const std::string b = csv ? group_csv(rows) : std::string();
        char* pa = json ? dup_string(a) : nullptr;
        if (csv) {
            try {
                *csv = dup_string(b);
            } catch (...) {
                std::free(pa);
                throw;
            }
        }
        if (json) *json = pa;
    });
}

lc_status lc_report_resource_correlation(const lc_report* report, const char* resource_csv, const char* metric,
                                         char** json)
{
    return guard([&] {
        require(report, "report");
        require(resource_csv, "resource_csv");
        require(metric, "metric");
        require(json, "json");
        const auto rc = resource_correlation(report->report, parse_resource_csv(resource_csv), parse_metric(metric));
        *json = dup_string(to_json(rc).dump(2) + "\n");
    });
}

lc_status lc_ece(const double* confidences, const unsigned char* correct, size_t n, int bins, double* out)
{
    return guard([&] {
        require(out, "out");
        if (n > 0) {
            require(confidences, "confidences");
            require(correct, "correct");
        }
        *out = ece({confidences, n}, bytes(correct, n), bins);
    });
}

lc_status lc_brier(const double* confidences, const unsigned char* correct, size_t n, double* out)
{
    return guard([&] {
        require(out, "out");
        if (n > 0) {
            require(confidences, "confidences");
            require(correct, "correct");
        }
        *out = brier({confidences, n}, bytes(correct, n));
    });
}

lc_status lc_auroc(const double* scores, const unsigned char* correct, size_t n, double* out, int* defined)
{
    return guard([&] {
        require(out, "out");
        require(defined, "defined");
        if (n > 0) {
            require(scores, "scores");
            require(correct, "correct");
        }
        const auto v = auroc({scores, n}, bytes(correct, n));
        *defined = v ? 1 : 0;
        if (v) *out = *v;
    });
}

lc_status lc_entropy(const double* distribution, size_t n, double* out)
{
    return guard([&] {
        require(out, "out");
        if (n > 0) require(distribution, "distribution");
        *out = entropy({distribution, n});
    });
}

lc_status lc_correlations(const double* x, const double* y, size_t n, lc_correlation* out)
{
    return guard([&] {
        require(out, "out");
        if (n > 0) {
            require(x, "x");
            require(y, "y");
        }
        const CorrelationResult r = correlations({x, n}, {y, n});
        *out = lc_correlation{};
        auto put = [](const Coefficient& c, double& v, double& p, int& d) {
            d = c.value ? 1 : 0;
            v = c.value.value_or(0.0);
            p = c.p_value.value_or(0.0);
        };
        put(r.pearson, out->pearson, out->pearson_p, out->pearson_defined);
        put(r.spearman, out->spearman, out->spearman_p, out->spearman_defined);
        put(r.kendall, out->kendall_tau_b, out->kendall_p, out->kendall_defined);
    });
}

}  // extern "C"
