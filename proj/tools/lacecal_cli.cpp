// lacecal command-line tool. Talks to the library only through the C API.

#include "lacecal/lacecal.h"

#include <CLI11.hpp>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// Library failure carrying the status and message from the C API.
struct LibraryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(lc_status status)
{
    if (status != LC_OK) throw LibraryError(std::string(lc_status_name(status)) + ": " + lc_last_error());
}

struct FreeDeleter {
    void operator()(void* p) const { lc_free(p); }
};
using CString = std::unique_ptr<char, FreeDeleter>;

struct DatasetDeleter {
    void operator()(lc_dataset* p) const { lc_dataset_free(p); }
};
struct ModelDeleter {
    void operator()(lc_model* p) const { lc_model_free(p); }
};
struct ReportDeleter {
    void operator()(lc_report* p) const { lc_report_free(p); }
};
struct ScoresDeleter {
    void operator()(lc_scores* p) const { lc_scores_free(p); }
};
using Dataset = std::unique_ptr<lc_dataset, DatasetDeleter>;
using Model = std::unique_ptr<lc_model, ModelDeleter>;
using Report = std::unique_ptr<lc_report, ReportDeleter>;
using Scores = std::unique_ptr<lc_scores, ScoresDeleter>;

std::string take(char* p)
{
    CString owner(p);
    return p ? std::string(p) : std::string();
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LibraryError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LibraryError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw LibraryError("write to '" + path.string() + "' failed");
}

lc_split parse_split(const std::string& s)
{
    if (s == "all") return LC_SPLIT_ALL;
    if (s == "validation") return LC_SPLIT_VALIDATION;
    return LC_SPLIT_TEST;
}

Dataset load_dataset(const std::string& path, bool require_clean)
{
    lc_dataset* raw = nullptr;
    check(lc_dataset_read(path.c_str(), &raw));
    Dataset d(raw);
    if (require_clean) {
        const std::size_t n = lc_dataset_violation_count(d.get());
        if (n > 0) {
            char* first = nullptr;
            check(lc_dataset_violation_text(d.get(), 0, &first));
            throw LibraryError("'" + path + "' has " + std::to_string(n) + " violation(s), first: " + take(first) +
                               " (run `lacecal validate`)");
        }
    }
    return d;
}

std::string fmt(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string safe_name(const std::string& s)
{
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out.empty() ? std::string("_") : out;
}

void print_report_summary(const lc_report* report)
{
    char* raw = nullptr;
    check(lc_report_to_json(report, &raw));
    const auto doc = nlohmann::json::parse(take(raw));
    std::printf("%-10s %8s %9s %9s %9s %9s\n", "language", "n", "accuracy", "ece", "brier", "auroc");
    auto row = [](const nlohmann::json& r) {
        const std::string auroc = r["auroc"].is_null() ? "NA" : fmt(r["auroc"].get<double>());
        std::printf("%-10s %8zu %9s %9s %9s %9s\n", r["language"].get<std::string>().c_str(), r["n"].get<std::size_t>(),
                    fmt(r["accuracy"].get<double>()).c_str(), fmt(r["ece"].get<double>()).c_str(),
                    fmt(r["brier"].get<double>()).c_str(), auroc.c_str());
    };
    for (const auto& r : doc["languages"]) row(r);
    row(doc["macro"]);
    std::printf("macro ECE: %s\n", fmt(doc["macro"]["ece"].get<double>()).c_str());
}

// ---- subcommands ---------------------------------------------------------

struct ValidateArgs {
    std::string file;
};

int run_validate(const ValidateArgs& a)
{
    Dataset d = load_dataset(a.file, false);
    std::size_t records = 0, K = 0, L = 0;
    check(lc_dataset_shape(d.get(), &records, &K, &L, nullptr));
    const std::size_t n = lc_dataset_violation_count(d.get());
    for (std::size_t i = 0; i < n; ++i) {
        char* text = nullptr;
        check(lc_dataset_violation_text(d.get(), i, &text));
        std::printf("%s\n", take(text).c_str());
    }
    std::printf("%s: %zu records, K=%zu, L=%zu, %zu violation(s)\n", a.file.c_str(), records, K, L, n);
    return n == 0 ? kExitOk : kExitData;
}

struct MetricsArgs {
    std::string file;
    int bins = 10;
    std::string split = "all";
    std::size_t layer = 0;
    std::string by = "language";
    std::string group_config;
    std::string out;
};

int run_metrics(const MetricsArgs& a)
{
    Dataset d = load_dataset(a.file, true);
    lc_report* raw = nullptr;
    check(lc_metrics_report(d.get(), parse_split(a.split), a.layer, a.bins, a.by == "language", &raw));
    Report report(raw);

    std::optional<std::string> groups_json, groups_csv;
    if (!a.group_config.empty()) {
        const std::string config = read_file(a.group_config);
        char* j = nullptr;
        char* c = nullptr;
        check(lc_report_groups(report.get(), config.c_str(), &j, &c));
        groups_json = take(j);
        groups_csv = take(c);
    }

    print_report_summary(report.get());
    if (groups_csv) std::printf("%s", groups_csv->c_str());

    if (!a.out.empty()) {
        const fs::path dir(a.out);
        char* s = nullptr;
        check(lc_report_to_json(report.get(), &s));
        write_file(dir / "metrics.json", take(s));
        check(lc_report_to_csv(report.get(), &s));
        write_file(dir / "metrics.csv", take(s));
        check(lc_confidence_stats(d.get(), parse_split(a.split), a.layer, &s));
        write_file(dir / "confidence_stats.csv", take(s));
        if (groups_json) {
            write_file(dir / "groups.json", *groups_json);
            write_file(dir / "groups.csv", *groups_csv);
        }
    }
    return kExitOk;
}

struct SweepArgs {
    std::string file;
    int bins = 10;
    std::string split = "all";
    std::string out;
};

int run_layer_sweep(const SweepArgs& a)
{
    Dataset d = load_dataset(a.file, true);
    char* e = nullptr;
    char* h = nullptr;
    check(lc_layer_sweep(d.get(), parse_split(a.split), a.bins, &e, &h));
    const std::string ece_csv = take(e), entropy_csv = take(h);
    std::size_t best = 0;
    check(lc_select_best_layer(d.get(), parse_split(a.split), a.bins, &best));
    if (a.out.empty()) {
        std::printf("%s", ece_csv.c_str());
    } else {
        const fs::path dir(a.out);
        write_file(dir / "layer_ece.csv", ece_csv);
        write_file(dir / "layer_entropy.csv", entropy_csv);
    }
    std::printf("best layer: %zu\n", best);
    return kExitOk;
}

struct SelectArgs {
    std::string file;
    bool best = false;
    bool good = false;
    std::string language;
    std::string split = "validation";
    int bins = 10;
};

int run_select(const SelectArgs& a)
{
    if (a.best == a.good) throw UsageError("select needs exactly one of --best-layer and --good-layers");
    if (!a.language.empty() && !a.good) throw UsageError("--language applies to --good-layers only");
    Dataset d = load_dataset(a.file, true);
    if (a.best) {
        std::size_t layer = 0;
        check(lc_select_best_layer(d.get(), parse_split(a.split), a.bins, &layer));
        std::printf("best-layer: %zu\n", layer);
        return kExitOk;
    }
    std::size_t* layers = nullptr;
    std::size_t count = 0;
    int fallback = 0;
    check(lc_select_good_layers(d.get(), parse_split(a.split), a.bins, a.language.empty() ? nullptr : a.language.c_str(),
                                &layers, &count, &fallback));
    std::unique_ptr<std::size_t, FreeDeleter> owner(layers);
    std::printf("good-layers%s:", a.language.empty() ? "" : (" [" + a.language + "]").c_str());
    for (std::size_t i = 0; i < count; ++i) std::printf(" %zu", layers[i]);
    std::printf("%s\n", fallback ? " (final-layer fallback)" : "");
    return kExitOk;
}

struct FitArgs {
    std::string file;
    std::string method;
    std::string calibrator = "none";
    int bins = 10;
    std::size_t min_samples = 50;
    std::optional<std::size_t> layer;
    std::string out;
};

int run_fit(const FitArgs& a)
{
    if (a.layer && a.method != "best") throw UsageError("--layer applies to --method best only");
    Dataset d = load_dataset(a.file, true);
    lc_model* raw = nullptr;
    if (a.layer) {
        check(lc_fit_best_layer(d.get(), *a.layer, a.calibrator.c_str(), a.bins, &raw));
    } else {
        check(lc_fit(d.get(), a.method.c_str(), a.calibrator.c_str(), a.bins, a.min_samples, &raw));
    }
    Model model(raw);
    char* json = nullptr;
    check(lc_model_to_json(model.get(), &json));
    write_file(a.out, take(json));
    std::printf("fitted %s + %s on validation records; model written to %s\n", a.method.c_str(), a.calibrator.c_str(),
                a.out.c_str());
    return kExitOk;
}

struct ApplyArgs {
    std::string model;
    std::string file;
    int bins = 10;
    std::string out;
};

int run_apply(const ApplyArgs& a)
{
    const std::string text = read_file(a.model);
    lc_model* raw_model = nullptr;
    check(lc_model_from_json(text.c_str(), &raw_model));
    Model model(raw_model);
    Dataset d = load_dataset(a.file, true);

    lc_scores* raw_scores = nullptr;
    check(lc_apply(model.get(), d.get(), &raw_scores));
    Scores scores(raw_scores);
    lc_report* raw_report = nullptr;
    check(lc_evaluate(model.get(), d.get(), a.bins, &raw_report));
    Report report(raw_report);

    const fs::path dir(a.out);
    char* s = nullptr;
    check(lc_scores_to_csv(scores.get(), &s));
    write_file(dir / "scores.csv", take(s));
    check(lc_report_to_json(report.get(), &s));
    write_file(dir / "report.json", take(s));
    check(lc_report_to_csv(report.get(), &s));
    write_file(dir / "report.csv", take(s));
    print_report_summary(report.get());
    return kExitOk;
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string resource_table;
    std::size_t bootstrap = 0;
    std::uint64_t seed = 0;
    double level = 0.95;
    std::string metric = "ece";
    bool pooled = false;
    int bins = 10;
    bool svg = false;
    std::string out;
};

int run_report(const ReportArgs& a)
{
    const fs::path dir(a.out);
    std::optional<std::string> resource_csv;
    if (!a.resource_table.empty()) resource_csv = read_file(a.resource_table);

    for (const auto& input : a.inputs) {
        const std::string stem = safe_name(fs::path(input).stem().string());
        const bool is_report = fs::path(input).extension() == ".json";
        Scores scores;
        Report report;
        if (is_report) {
            lc_report* raw = nullptr;
            check(lc_report_from_json(read_file(input).c_str(), &raw));
            report.reset(raw);
        } else {
            lc_scores* raw = nullptr;
            check(lc_scores_read(input.c_str(), &raw));
            scores.reset(raw);
            lc_report* rep = nullptr;
            check(lc_scores_report(scores.get(), a.bins, stem.c_str(), &rep));
            report.reset(rep);
        }
        std::printf("== %s\n", input.c_str());
        print_report_summary(report.get());

        char* s = nullptr;
        check(lc_report_to_json(report.get(), &s));
        write_file(dir / (stem + ".report.json"), take(s));

        if (scores) {
            char* langs_raw = nullptr;
            check(lc_report_to_json(report.get(), &langs_raw));
            const auto doc = nlohmann::json::parse(take(langs_raw));
            std::vector<std::optional<std::string>> slices{std::nullopt};
            for (const auto& row : doc["languages"]) slices.emplace_back(row["language"].get<std::string>());
            for (const auto& lang : slices) {
                const std::string tag = lang ? safe_name(*lang) : std::string("all");
                const std::string title = stem + " (" + (lang ? *lang : std::string("all")) + ")";
                char* csv = nullptr;
                char* svg = nullptr;
                check(lc_scores_reliability(scores.get(), lang ? lang->c_str() : nullptr, a.bins, title.c_str(), &csv,
                                            a.svg ? &svg : nullptr, nullptr));
                write_file(dir / (stem + "." + tag + ".reliability.csv"), take(csv));
                if (a.svg) write_file(dir / (stem + "." + tag + ".reliability.svg"), take(svg));
            }
            if (a.bootstrap > 0) {
                char* json = nullptr;
                check(lc_scores_bootstrap(scores.get(), a.metric.c_str(), a.bootstrap, a.level, a.seed, a.bins,
                                          a.pooled ? 0 : 1, &json));
                const std::string text = take(json);
                write_file(dir / (stem + ".bootstrap.json"), text + "\n");
                const auto ci = nlohmann::json::parse(text);
                std::printf("%s %s %s, %g%% CI [%s, %s], bootstrap mean %s\n", a.pooled ? "pooled" : "macro",
                            a.metric.c_str(), fmt(ci["estimate"].get<double>()).c_str(), 100.0 * a.level,
                            fmt(ci["lower"].get<double>()).c_str(), fmt(ci["upper"].get<double>()).c_str(),
                            fmt(ci["mean"].get<double>()).c_str());
            }
        } else if (a.bootstrap > 0) {
            std::fprintf(stderr, "note: %s is a metric report; bootstrap needs per-record scores\n", input.c_str());
        }

        if (resource_csv) {
            char* json = nullptr;
            check(lc_report_resource_correlation(report.get(), resource_csv->c_str(), a.metric.c_str(), &json));
            const std::string text = take(json);
            write_file(dir / (stem + ".correlation.json"), text);
            const auto c = nlohmann::json::parse(text)["correlation"];
            auto val = [](const nlohmann::json& v) { return v.is_null() ? std::string("NA") : fmt(v.get<double>(), 3); };
            std::printf("%s vs resource share: spearman %s, kendall %s, pearson %s (n=%zu)\n", a.metric.c_str(),
                        val(c["spearman"]["value"]).c_str(), val(c["kendall_tau_b"]["value"]).c_str(),
                        val(c["pearson"]["value"]).c_str(), c["n"].get<std::size_t>());
        }
    }
    return kExitOk;
}

struct SimulateArgs {
    std::string preset;
    std::string profiles;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    std::string out;
    bool gzip = false;
};

int run_simulate(const SimulateArgs& a)
{
    if (a.preset.empty() == a.profiles.empty()) throw UsageError("simulate needs exactly one of --preset and --profiles");
    lc_dataset* raw = nullptr;
    if (!a.preset.empty()) {
        check(lc_simulate(a.preset.c_str(), nullptr, a.n, a.seed, &raw));
    } else {
        const std::string doc = read_file(a.profiles);
        check(lc_simulate(nullptr, doc.c_str(), a.n, a.seed, &raw));
    }
    Dataset d(raw);
    std::size_t bytes = 0, records = 0;
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    check(lc_dataset_write(d.get(), a.out.c_str(), a.gzip ? 1 : 0, &bytes));
    check(lc_dataset_shape(d.get(), &records, nullptr, nullptr, nullptr));
    std::printf("wrote %zu records (%zu bytes) to %s\n", records, bytes, a.out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multilingual confidence calibration toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lc_version()));

    const auto splits = CLI::IsMember({"all", "validation", "test"});
    const auto metrics = CLI::IsMember({"ece", "brier", "auroc", "accuracy", "mean_confidence"});
    const auto bins_range = CLI::Range(1, 1000);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Check a record file against every dataset invariant");
    validate->add_option("file", va.file, "Record file")->required();

    MetricsArgs ma;
    auto* metrics_cmd = app.add_subcommand("metrics", "Per-language and macro ECE, Brier, AUROC and accuracy");
    metrics_cmd->add_option("file", ma.file, "Record file")->required();
    metrics_cmd->add_option("--bins", ma.bins, "Number of equal-width confidence bins")->check(bins_range);
    metrics_cmd->add_option("--split", ma.split, "Records to score")->check(splits);
    metrics_cmd->add_option("--layer", ma.layer, "Layer to read confidence from (0 = final)");
    metrics_cmd->add_option("--by", ma.by, "Grouping of the report rows")->check(CLI::IsMember({"language", "none"}));
    metrics_cmd->add_option("--group-config", ma.group_config, "Language groups JSON")->check(CLI::ExistingFile);
    metrics_cmd->add_option("--out", ma.out, "Output directory for JSON/CSV files");

    SweepArgs sa;
    auto* sweep = app.add_subcommand("layer-sweep", "Layer ECE profile and per-layer entropy");
    sweep->add_option("file", sa.file, "Record file")->required();
    sweep->add_option("--bins", sa.bins, "Number of equal-width confidence bins")->check(bins_range);
    sweep->add_option("--split", sa.split, "Records to profile")->check(splits);
    sweep->add_option("--out", sa.out, "Output directory (default: print the ECE profile)");

    SelectArgs sel;
    auto* select = app.add_subcommand("select", "Best layer or good-layer set from the validation profile");
    select->add_option("file", sel.file, "Record file")->required();
    select->add_flag("--best-layer", sel.best, "Layer with the lowest language-averaged ECE");
    select->add_flag("--good-layers", sel.good, "Layers strictly better calibrated than the final layer");
    select->add_option("--language", sel.language, "Per-language good-layer set");
    select->add_option("--split", sel.split, "Records to profile")->check(splits);
    select->add_option("--bins", sel.bins, "Number of equal-width confidence bins")->check(bins_range);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a confidence method on validation records");
    fit->add_option("file", fa.file, "Record file")->required();
    fit->add_option("--method", fa.method, "Confidence method")
        ->required()
        ->check(CLI::IsMember({"final", "best", "ensemble", "lace"}));
    fit->add_option("--calibrator", fa.calibrator, "Post-hoc calibrator")
        ->check(CLI::IsMember({"none", "temperature", "isotonic"}));
    fit->add_option("--bins", fa.bins, "Number of equal-width confidence bins")->check(bins_range);
    fit->add_option("--min-samples", fa.min_samples, "Per-language minimum for LACE calibrators");
    fit->add_option("--layer", fa.layer, "Fixed 1-based layer for --method best")->check(CLI::PositiveNumber);
    fit->add_option("--out", fa.out, "Model JSON path")->required();

    ApplyArgs aa;
    auto* apply = app.add_subcommand("apply", "Score test records with a fitted model");
    apply->add_option("model", aa.model, "Model JSON")->required()->check(CLI::ExistingFile);
    apply->add_option("file", aa.file, "Record file")->required();
    apply->add_option("--bins", aa.bins, "Number of equal-width confidence bins")->check(bins_range);
    apply->add_option("--out", aa.out, "Output directory")->required();

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Reliability tables, diagrams, intervals and correlations");
    report->add_option("inputs", ra.inputs, "Score sidecar CSVs or metric report JSONs")->required();
    report->add_option("--resource-table", ra.resource_table, "language,share CSV")->check(CLI::ExistingFile);
    report->add_option("--bootstrap", ra.bootstrap, "Bootstrap resamples (0 = off)");
    report->add_option("--seed", ra.seed, "Bootstrap seed");
    report->add_option("--level", ra.level, "Interval level")->check(CLI::Range(0.5, 0.999));
    report->add_option("--metric", ra.metric, "Metric for intervals and correlations")->check(metrics);
    report->add_flag("--pooled", ra.pooled, "Bootstrap the pooled metric instead of the macro average");
    report->add_option("--bins", ra.bins, "Number of equal-width confidence bins")->check(bins_range);
    report->add_flag("--svg", ra.svg, "Also write SVG reliability diagrams");
    report->add_option("--out", ra.out, "Output directory")->required();

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic record file");
    simulate->add_option("--preset", sm.preset, "Preset name")
        ->check(CLI::IsMember({"paper-like-llama", "paper-like-aya", "uniform-calibrated"}));
    simulate->add_option("--profiles", sm.profiles, "Language profiles JSON")->check(CLI::ExistingFile);
    simulate->add_option("--n", sm.n, "Records per language")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sm.seed, "Seed");
    simulate->add_option("--out", sm.out, "Output record file")->required();
    simulate->add_flag("--gzip", sm.gzip, "Compress the output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate->parsed()) return run_validate(va);
        if (metrics_cmd->parsed()) return run_metrics(ma);
        if (sweep->parsed()) return run_layer_sweep(sa);
        if (select->parsed()) return run_select(sel);
        if (fit->parsed()) return run_fit(fa);
        if (apply->parsed()) return run_apply(aa);
        if (report->parsed()) return run_report(ra);
        if (simulate->parsed()) return run_simulate(sm);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "lacecal: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lacecal: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
