#include "lacecal/layer_strategy.hpp"

#include "parallel.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lacecal {

double LayerEceProfile::at(std::size_t layer, std::size_t language_index) const
{
    if (layer < 1 || layer > num_layers || language_index >= languages.size()) {
        fail(Errc::invalid_argument, "profile cell out of range");
    }
    return ece[(layer - 1) * languages.size() + language_index];
}

std::optional<std::size_t> LayerEceProfile::language_index(const std::string& language) const
{
    const auto it = std::lower_bound(languages.begin(), languages.end(), language);
    if (it == languages.end() || *it != language) return std::nullopt;
    return static_cast<std::size_t>(it - languages.begin());
}

namespace {

using RecordGroups = std::vector<std::pair<std::string, std::vector<const PredictionRecord*>>>;

RecordGroups group_by_language(std::span<const PredictionRecord* const> records)
{
    std::map<std::string, std::vector<const PredictionRecord*>> groups;
    for (const auto* r : records) groups[r->language].push_back(r);
    return {groups.begin(), groups.end()};
}

void check_layer(std::size_t layer, std::size_t num_layers)
{
    if (layer < 1 || layer > num_layers) {
        fail(Errc::invalid_argument,
             "layer " + std::to_string(layer) + " outside 1.." + std::to_string(num_layers));
    }
}

}  // namespace

LayerEceProfile layer_ece_profile(std::span<const PredictionRecord* const> records, std::size_t num_choices,
                                  std::size_t num_layers, int bins, std::string source)
{
    if (records.empty()) fail(Errc::invalid_argument, "no records for the layer profile (split '" + source + "')");
    if (num_layers == 0) fail(Errc::invalid_argument, "layer profile needs at least one layer");

    const RecordGroups groups = group_by_language(records);
    LayerEceProfile profile;
    profile.bins = bins;
    profile.source = std::move(source);
    profile.num_layers = num_layers;
    for (const auto& [lang, group] : groups) {
        if (group.empty()) fail(Errc::invalid_argument, "empty language slice '" + lang + "'");
        profile.languages.push_back(lang);
        profile.counts.push_back(group.size());
    }

    const std::size_t nlang = groups.size();
    profile.ece.assign(num_layers * nlang, 0.0);
    detail::parallel_for(num_layers * nlang, [&](std::size_t cell) {
        const std::size_t layer = cell / nlang + 1;
        const auto& group = groups[cell % nlang].second;
        std::vector<double> conf(group.size());
        std::vector<std::uint8_t> correct(group.size());
        for (std::size_t i = 0; i < group.size(); ++i) {
            conf[i] = layer_confidence(*group[i], layer, num_choices);
            correct[i] = group[i]->correct() ? 1 : 0;
        }
        profile.ece[cell] = ece(conf, correct, bins);
    });

    profile.avg.assign(num_layers, 0.0);
    for (std::size_t l = 0; l < num_layers; ++l) {
        double sum = 0.0;
        for (std::size_t k = 0; k < nlang; ++k) sum += profile.ece[l * nlang + k];
        profile.avg[l] = sum / static_cast<double>(nlang);
    }
    return profile;
}

LayerEceProfile layer_ece_profile(const Dataset& dataset, SplitFilter filter, int bins)
{
    const auto records = select_records(dataset, filter);
    std::string source = filter == SplitFilter::all ? "all" : std::string(to_string(
        filter == SplitFilter::validation ? Split::validation : Split::test));
    return layer_ece_profile(records, dataset.num_choices(), dataset.num_layers(), bins, std::move(source));
}

std::string profile_csv(const LayerEceProfile& profile)
{
    std::string out = "layer";
    for (const auto& lang : profile.languages) out += ',' + detail::csv_field(lang);
    out += ",avg\n";
    for (std::size_t l = 1; l <= profile.num_layers; ++l) {
        out += std::to_string(l);
        for (std::size_t k = 0; k < profile.languages.size(); ++k) out += ',' + detail::format_double(profile.at(l, k));
        out += ',' + detail::format_double(profile.avg[l - 1]) + '\n';
    }
    return out;
}

LayerEntropyProfile layer_entropy_profile(const Dataset& dataset, SplitFilter filter)
{
    const auto records = select_records(dataset, filter);
    if (records.empty()) fail(Errc::invalid_argument, "no records for the entropy profile");
    const RecordGroups groups = group_by_language(records);
    const std::size_t L = dataset.num_layers(), K = dataset.num_choices(), nlang = groups.size();

    LayerEntropyProfile out;
    out.num_layers = L;
    for (const auto& g : groups) out.languages.push_back(g.first);
    out.choice.assign(L * nlang, std::numeric_limits<double>::quiet_NaN());
    const bool has_vocab =
        std::all_of(records.begin(), records.end(), [](const PredictionRecord* r) { return r->entropy.has_value(); });
    if (has_vocab) out.vocab.emplace(L * nlang, 0.0);

    for (std::size_t k = 0; k < nlang; ++k) {
        const auto& group = groups[k].second;
        for (std::size_t l = 1; l <= L; ++l) {
            double sum = 0.0, vocab_sum = 0.0;
            std::size_t n = 0;
            for (const auto* r : group) {
                const auto masses = r->layer(l, K);
                double total = 0.0;
                for (double m : masses) total += m;
                if (total > 0.0) {
                    sum += entropy(masses);
                    ++n;
                }
                if (has_vocab) vocab_sum += (*r->entropy)[l - 1];
            }
            const std::size_t cell = (l - 1) * nlang + k;
            if (n > 0) out.choice[cell] = sum / static_cast<double>(n);
            if (has_vocab) (*out.vocab)[cell] = vocab_sum / static_cast<double>(group.size());
        }
    }
    return out;
}

std::string entropy_csv(const LayerEntropyProfile& profile)
{
    std::string out = "layer,language,choice_entropy,vocab_entropy\n";
    const std::size_t nlang = profile.languages.size();
    for (std::size_t l = 0; l < profile.num_layers; ++l) {
        for (std::size_t k = 0; k < nlang; ++k) {
            const std::size_t cell = l * nlang + k;
            const double c = profile.choice[cell];
            out += std::to_string(l + 1) + ',' + detail::csv_field(profile.languages[k]) + ',' +
                   (std::isnan(c) ? std::string("NA") : detail::format_double(c)) + ',' +
                   (profile.vocab ? detail::format_double((*profile.vocab)[cell]) : std::string("NA")) + '\n';
        }
    }
    return out;
}

std::size_t select_best_layer(const LayerEceProfile& profile)
{
    if (profile.avg.empty()) fail(Errc::invalid_argument, "empty layer profile");
    std::size_t best = profile.avg.size();
    for (std::size_t l = profile.avg.size(); l-- > 0;) {
        if (profile.avg[l] < profile.avg[best - 1]) best = l + 1;
    }
    return best;
}

LayerSet select_good_layers(const LayerEceProfile& profile, const std::optional<std::string>& language)
{
    if (profile.avg.empty()) fail(Errc::invalid_argument, "empty layer profile");
    const std::size_t L = profile.num_layers;
    std::optional<std::size_t> column;
    if (language) {
        column = profile.language_index(*language);
        if (!column) fail(Errc::invalid_argument, "language '" + *language + "' is not in the profile");
    }
    auto value = [&](std::size_t layer) { return column ? profile.at(layer, *column) : profile.avg[layer - 1]; };

    LayerSet set;
    const double final_value = value(L);
    for (std::size_t l = 1; l < L; ++l) {
        if (value(l) < final_value) set.layers.push_back(l);
    }
    if (set.layers.empty()) {
        set.layers = {L};
        set.final_fallback = true;
    }
    return set;
}

ChoiceDistribution ensemble_distribution(const PredictionRecord& record, std::span<const std::size_t> layers,
                                         std::size_t num_choices)
{
    if (layers.empty()) fail(Errc::invalid_argument, "ensemble needs at least one layer");
    const std::size_t L = record.num_layers(num_choices);
    ChoiceDistribution out;
    out.masses.assign(num_choices, 0.0);
    for (std::size_t l : layers) {
        check_layer(l, L);
        const auto m = record.layer(l, num_choices);
        for (std::size_t j = 0; j < num_choices; ++j) out.masses[j] += m[j];
    }
    const double n = static_cast<double>(layers.size());
    for (double& m : out.masses) m /= n;
    return out;
}

double ensemble_confidence(const PredictionRecord& record, std::span<const std::size_t> layers,
                           std::size_t num_choices)
{
    if (layers.empty()) fail(Errc::invalid_argument, "ensemble needs at least one layer");
    const std::size_t L = record.num_layers(num_choices);
    const auto pred = static_cast<std::size_t>(record.pred);
    double sum = 0.0;
    for (std::size_t l : layers) {
        check_layer(l, L);
        sum += record.layer(l, num_choices)[pred];
    }
    return sum / static_cast<double>(layers.size());
}

std::vector<ScoredRecord> score_layer(const Dataset& dataset, std::size_t layer, SplitFilter filter)
{
    check_layer(layer, dataset.num_layers());
    std::vector<ScoredRecord> out;
    for (const auto* r : select_records(dataset, filter)) {
        out.push_back({r->id, r->language, layer_confidence(*r, layer, dataset.num_choices()), r->correct(), false});
    }
    return out;
}

namespace {

CalibratorModel fit_calibrator(std::span<const PredictionRecord* const> records, const LayerSet& layers,
                               std::size_t num_choices, const FitOptions& options,
                               std::optional<std::string> language)
{
    CalibratorModel model;
    model.language = std::move(language);
    switch (options.calibrator) {
    case CalibratorKind::none:
        model.model = IdentityModel{};
        break;
    case CalibratorKind::temperature: {
        std::vector<ChoiceDistribution> dists;
        dists.reserve(records.size());
        for (const auto* r : records) dists.push_back(ensemble_distribution(*r, layers.layers, num_choices));
        std::vector<TemperatureExample> examples;
        examples.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) examples.push_back({dists[i].masses, records[i]->gold});
        model.model = fit_temperature(examples, options.grid);
        break;
    }
    case CalibratorKind::isotonic: {
        std::vector<ConfidencePair> pairs;
        pairs.reserve(records.size());
        for (const auto* r : records) {
            pairs.push_back({ensemble_confidence(*r, layers.layers, num_choices), r->correct()});
        }
        model.model = fit_isotonic(pairs);
        break;
    }
    }
    return model;
}

double calibrated_confidence(const CalibratorModel& calibrator, const PredictionRecord& record,
                             const LayerSet& layers, std::size_t num_choices)
{
    CalibrationInput input;
    input.pred = record.pred;
    input.confidence = ensemble_confidence(record, layers.layers, num_choices);
    if (calibrator.kind() == CalibratorKind::temperature) {
        const auto dist = ensemble_distribution(record, layers.layers, num_choices);
        input.masses = dist.masses;
        return apply_calibrator(calibrator, input, record.language);
    }
    return apply_calibrator(calibrator, input, record.language);
}

std::vector<const PredictionRecord*> validation_records(const Dataset& dataset)
{
    auto records = select_records(dataset, SplitFilter::validation);
    if (records.empty()) fail(Errc::data, "no validation records to fit on");
    return records;
}

}  // namespace

LaceModel fit_lace(const Dataset& dataset, const FitOptions& options)
{
    const auto records = validation_records(dataset);
    const std::size_t K = dataset.num_choices(), L = dataset.num_layers();
    const LayerEceProfile profile = layer_ece_profile(records, K, L, options.bins, "validation");

    LaceModel model;
    model.calibrator_kind = options.calibrator;
    model.min_samples = options.min_samples;
    model.bins = options.bins;
    model.num_layers = L;
    model.global_layers = select_good_layers(profile);
    model.global_calibrator = fit_calibrator(records, model.global_layers, K, options, std::nullopt);

    for (const auto& [lang, group] : group_by_language(records)) {
        LaceLanguage entry;
        entry.count = group.size();
        if (group.size() < options.min_samples) {
            entry.uses_global = true;
            entry.layers = model.global_layers;
            entry.calibrator = model.global_calibrator;
        } else {
            entry.layers = select_good_layers(profile, lang);
            entry.calibrator = fit_calibrator(group, entry.layers, K, options, lang);
        }
        model.languages.emplace(lang, std::move(entry));
    }
    return model;
}

LaceOutput apply_lace(const LaceModel& model, const PredictionRecord& record, std::size_t num_choices)
{
    const auto it = model.languages.find(record.language);
    if (it == model.languages.end() || it->second.uses_global) {
        return {calibrated_confidence(model.global_calibrator, record, model.global_layers, num_choices), true};
    }
    return {calibrated_confidence(it->second.calibrator, record, it->second.layers, num_choices), false};
}

std::string_view to_string(MethodKind kind)
{
    switch (kind) {
    case MethodKind::final_layer: return "final";
    case MethodKind::best_layer: return "best";
    case MethodKind::ensemble: return "ensemble";
    case MethodKind::lace: return "lace";
    }
    return "final";
}

MethodKind parse_method_kind(std::string_view text)
{
    if (text == "final") return MethodKind::final_layer;
    if (text == "best" || text == "best-layer") return MethodKind::best_layer;
    if (text == "ensemble" || text == "good-ensemble") return MethodKind::ensemble;
    if (text == "lace") return MethodKind::lace;
    fail(Errc::invalid_argument, "unknown method '" + std::string(text) + "'");
}

MethodModel fit_method(const Dataset& dataset, MethodKind kind, const FitOptions& options)
{
    const auto records = validation_records(dataset);
    const std::size_t K = dataset.num_choices(), L = dataset.num_layers();

    if (options.layer && kind != MethodKind::best_layer) {
        fail(Errc::invalid_argument, "a fixed layer applies to the best-layer method only");
    }

    MethodModel model;
    model.kind = kind;
    model.calibrator_kind = options.calibrator;
    model.bins = options.bins;
    model.num_layers = L;
    model.num_choices = K;
    model.fit_count = records.size();
    model.model_name = dataset.header.model;
    model.benchmark = dataset.header.benchmark;

    switch (kind) {
    case MethodKind::final_layer:
        model.layers.layers = {L};
        break;
    case MethodKind::best_layer: {
        if (options.layer) {
            if (*options.layer < 1 || *options.layer > L) {
                fail(Errc::invalid_argument,
                     "layer " + std::to_string(*options.layer) + " is outside 1.." + std::to_string(L));
            }
            model.layers.layers = {*options.layer};
            break;
        }
        const auto profile = layer_ece_profile(records, K, L, options.bins, "validation");
        model.layers.layers = {select_best_layer(profile)};
        break;
    }
    case MethodKind::ensemble: {
        const auto profile = layer_ece_profile(records, K, L, options.bins, "validation");
        model.layers = select_good_layers(profile);
        break;
    }
    case MethodKind::lace:
        model.lace = fit_lace(dataset, options);
        return model;
    }
    model.calibrator = fit_calibrator(records, model.layers, K, options, std::nullopt);
    return model;
}

ScoredRecord apply_method(const MethodModel& model, const PredictionRecord& record)
{
    ScoredRecord out;
    out.id = record.id;
    out.language = record.language;
    out.correct = record.correct();
    if (model.kind == MethodKind::lace) {
        if (!model.lace) fail(Errc::internal, "lace method without a fitted lace model");
        const auto r = apply_lace(*model.lace, record, model.num_choices);
        out.confidence = r.confidence;
        out.fallback = r.fallback;
    } else {
        out.confidence = calibrated_confidence(model.calibrator, record, model.layers, model.num_choices);
    }
    return out;
}

std::vector<ScoredRecord> apply_method(const MethodModel& model, const Dataset& dataset, SplitFilter filter)
{
    if (dataset.num_layers() != model.num_layers) {
        fail(Errc::data, "layer mismatch: model expects L=" + std::to_string(model.num_layers) +
                             " but the dataset has L=" + std::to_string(dataset.num_layers()));
    }
    if (dataset.num_choices() != model.num_choices) {
        fail(Errc::data, "choice-count mismatch: model expects K=" + std::to_string(model.num_choices) +
                             " but the dataset has K=" + std::to_string(dataset.num_choices()));
    }
    const auto records = select_records(dataset, filter);
    std::vector<ScoredRecord> out(records.size());
    detail::parallel_for(records.size(), [&](std::size_t i) { out[i] = apply_method(model, *records[i]); });
    return out;
}

MetricReport evaluate_method(const MethodModel& model, const Dataset& dataset, int bins)
{
    const auto scored = apply_method(model, dataset, SplitFilter::test);
    if (scored.empty()) fail(Errc::data, "no test records to evaluate");
    std::string name(to_string(model.kind));
    if (model.calibrator_kind != CalibratorKind::none) name += "+" + std::string(to_string(model.calibrator_kind));
    MetricReport report = build_report(scored, bins, name);
    std::size_t fallbacks = 0;
    for (const auto& s : scored) fallbacks += s.fallback ? 1 : 0;
    report.metadata["split"] = "test";
    report.metadata["confidence"] = dataset.header.normalized ? "normalized" : "raw-mass";
    report.metadata["fallback_records"] = std::to_string(fallbacks);
    if (model.calibrator_kind == CalibratorKind::temperature) report.metadata["temperature_scope"] = "softmax over K";
    return report;
}

nlohmann::ordered_json to_json(const LayerSet& set)
{
    return {{"layers", set.layers}, {"final_fallback", set.final_fallback}};
}

LayerSet layer_set_from_json(const nlohmann::json& doc)
{
    LayerSet set;
    set.layers = doc.at("layers").get<std::vector<std::size_t>>();
    set.final_fallback = doc.value("final_fallback", false);
    if (set.layers.empty()) fail(Errc::parse, "layer set must not be empty");
    return set;
}

nlohmann::ordered_json to_json(const LaceModel& model)
{
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "lace_model";
    doc["calibrator"] = std::string(to_string(model.calibrator_kind));
    doc["min_samples"] = model.min_samples;
    doc["bins"] = model.bins;
    doc["num_layers"] = model.num_layers;
    doc["global"] = {{"layers", to_json(model.global_layers)}, {"calibrator", to_json(model.global_calibrator)}};
    doc["languages"] = nlohmann::ordered_json::object();
    for (const auto& [lang, entry] : model.languages) {
        nlohmann::ordered_json e;
        e["n"] = entry.count;
        e["uses_global"] = entry.uses_global;
        if (!entry.uses_global) {
            e["layers"] = to_json(entry.layers);
            e["calibrator"] = to_json(entry.calibrator);
        }
        doc["languages"][lang] = std::move(e);
    }
    return doc;
}

namespace {

void check_layers_range(const LayerSet& set, std::size_t num_layers)
{
    for (std::size_t l : set.layers) {
        if (l < 1 || l > num_layers) fail(Errc::parse, "layer " + std::to_string(l) + " outside the model's range");
    }
}

}  // namespace

LaceModel lace_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("kind").get<std::string>() != "lace_model") fail(Errc::parse, "document is not a lace model");
        LaceModel model;
        model.calibrator_kind = parse_calibrator_kind(doc.at("calibrator").get<std::string>());
        model.min_samples = doc.at("min_samples").get<std::size_t>();
        model.bins = doc.at("bins").get<int>();
        model.num_layers = doc.at("num_layers").get<std::size_t>();
        model.global_layers = layer_set_from_json(doc.at("global").at("layers"));
        model.global_calibrator = calibrator_from_json(doc.at("global").at("calibrator"));
        check_layers_range(model.global_layers, model.num_layers);
        for (const auto& [lang, e] : doc.at("languages").items()) {
            LaceLanguage entry;
            entry.count = e.at("n").get<std::size_t>();
            entry.uses_global = e.at("uses_global").get<bool>();
            if (entry.uses_global) {
                entry.layers = model.global_layers;
                entry.calibrator = model.global_calibrator;
            } else {
                entry.layers = layer_set_from_json(e.at("layers"));
                entry.calibrator = calibrator_from_json(e.at("calibrator"));
                check_layers_range(entry.layers, model.num_layers);
            }
            model.languages.emplace(lang, std::move(entry));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, std::string("malformed lace model: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const MethodModel& model)
{
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "method_model";
    doc["method"] = std::string(to_string(model.kind));
    doc["calibrator"] = std::string(to_string(model.calibrator_kind));
    doc["bins"] = model.bins;
    doc["num_layers"] = model.num_layers;
    doc["num_choices"] = model.num_choices;
    doc["fit"] = {{"split", "validation"}, {"n", model.fit_count}, {"model", model.model_name},
                  {"benchmark", model.benchmark}};
    if (model.kind == MethodKind::lace) {
        if (!model.lace) fail(Errc::internal, "lace method without a fitted lace model");
        doc["lace"] = to_json(*model.lace);
    } else {
        doc["layers"] = to_json(model.layers);
        doc["calibrator_model"] = to_json(model.calibrator);
    }
    return doc;
}

MethodModel method_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("kind").get<std::string>() != "method_model") fail(Errc::parse, "document is not a method model");
        if (doc.at("format_version").get<int>() != 1) fail(Errc::parse, "unsupported method model format_version");
        MethodModel model;
        model.kind = parse_method_kind(doc.at("method").get<std::string>());
        model.calibrator_kind = parse_calibrator_kind(doc.at("calibrator").get<std::string>());
        model.bins = doc.at("bins").get<int>();
        model.num_layers = doc.at("num_layers").get<std::size_t>();
        model.num_choices = doc.at("num_choices").get<std::size_t>();
        const auto& fit = doc.at("fit");
        model.fit_count = fit.value("n", std::size_t{0});
        model.model_name = fit.value("model", "");
        model.benchmark = fit.value("benchmark", "");
        if (model.kind == MethodKind::lace) {
            model.lace = lace_from_json(doc.at("lace"));
            if (model.lace->num_layers != model.num_layers) fail(Errc::parse, "lace model layer count disagrees");
        } else {
            model.layers = layer_set_from_json(doc.at("layers"));
            check_layers_range(model.layers, model.num_layers);
            model.calibrator = calibrator_from_json(doc.at("calibrator_model"));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, std::string("malformed method model: ") + e.what());
    }
}

}  // namespace lacecal
