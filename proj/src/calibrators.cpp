#include "lacecal/calibrators.hpp"

#include "lacecal/core.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace lacecal {

std::string_view to_string(CalibratorKind kind)
{
    switch (kind) {
    case CalibratorKind::none: return "none";
    case CalibratorKind::temperature: return "temperature";
    case CalibratorKind::isotonic: return "isotonic";
    }
    return "none";
}

CalibratorKind parse_calibrator_kind(std::string_view text)
{
    if (text == "none" || text == "identity") return CalibratorKind::none;
    if (text == "temperature") return CalibratorKind::temperature;
    if (text == "isotonic") return CalibratorKind::isotonic;
    fail(Errc::invalid_argument, "unknown calibrator '" + std::string(text) + "' (expected none|temperature|isotonic)");
}

// ---------------------------------------------------------------------------
// Temperature scaling

namespace {

// Log masses, floored, laid out flat so each NLL pass is a tight loop.
struct LogMassTable {
    std::size_t num_choices = 0;
    std::vector<double> logs;
    std::vector<int> gold;
};

LogMassTable build_log_table(std::span<const TemperatureExample> examples)
{
    if (examples.empty()) fail(Errc::invalid_argument, "temperature fitting needs at least one example");
    LogMassTable t;
    t.num_choices = examples.front().masses.size();
    if (t.num_choices < 2) fail(Errc::invalid_argument, "temperature fitting needs at least two choices");
    t.logs.reserve(examples.size() * t.num_choices);
    t.gold.reserve(examples.size());
    for (const auto& ex : examples) {
        if (ex.masses.size() != t.num_choices) fail(Errc::invalid_argument, "examples disagree on the number of choices");
        if (ex.gold < 0 || static_cast<std::size_t>(ex.gold) >= t.num_choices) {
            fail(Errc::invalid_argument, "gold index outside [0, K)");
        }
        for (double m : ex.masses) t.logs.push_back(std::log(std::max(m, kMassFloor)));
        t.gold.push_back(ex.gold);
    }
    return t;
}

double mean_nll(const LogMassTable& t, double temperature)
{
    const std::size_t K = t.num_choices;
    const double inv_t = 1.0 / temperature;
    double total = 0.0;
    for (std::size_t e = 0; e < t.gold.size(); ++e) {
        const double* row = t.logs.data() + e * K;
        std::size_t top = 0;
        for (std::size_t i = 1; i < K; ++i) {
            if (row[i] > row[top]) top = i;
        }
        const double s_top = row[top] * inv_t;
        double tail = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            if (i != top) tail += std::exp(row[i] * inv_t - s_top);
        }
        // log-sum-exp minus the gold score, written to keep precision when
        // the gold choice dominates.
        total += (s_top - row[t.gold[e]] * inv_t) + std::log1p(tail);
    }
    return total / static_cast<double>(t.gold.size());
}

std::vector<double> log_spaced(double lo, double hi, int count)
{
    if (count <= 1 || lo == hi) return {lo};
    std::vector<double> out(static_cast<std::size_t>(count));
    const double ratio = hi / lo;
    for (int i = 0; i < count; ++i) {
        out[i] = lo * std::pow(ratio, static_cast<double>(i) / (count - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::uint64_t hash_examples(std::span<const TemperatureExample> examples)
{
    // Order-insensitive so permuted inputs describe the same fit.
    std::uint64_t h = 0;
    for (const auto& ex : examples) {
        std::uint64_t e = detail::fnv1a(ex.masses.data(), ex.masses.size_bytes());
        e = detail::fnv1a(&ex.gold, sizeof(ex.gold), e);
        h += e;
    }
    return h;
}

}  // namespace

double temperature_nll(std::span<const TemperatureExample> examples, double temperature)
{
    if (!(temperature > 0.0)) fail(Errc::invalid_argument, "temperature must be positive");
    return mean_nll(build_log_table(examples), temperature);
}

TemperatureModel fit_temperature(std::span<const TemperatureExample> examples, const TemperatureGrid& grid,
                                 bool keep_trace)
{
    if (!(grid.lower > 0.0) || !(grid.upper >= grid.lower)) fail(Errc::invalid_argument, "invalid temperature bounds");
    if (grid.coarse_count < 1 || grid.refine_count < 1 || grid.refine_rounds < 0) {
        fail(Errc::invalid_argument, "invalid temperature grid sizes");
    }
    const LogMassTable table = build_log_table(examples);

    TemperatureModel model;
    model.fit_count = examples.size();
    model.data_hash = hash_examples(examples);

    double best_t = 0.0;
    double best_nll = std::numeric_limits<double>::infinity();
    auto consider = [&](double t) {
        const double nll = mean_nll(table, t);
        if (keep_trace) model.grid_trace.emplace_back(t, nll);
        if (std::tie(nll, t) < std::tie(best_nll, best_t) || best_t == 0.0) {
            best_nll = nll;
            best_t = t;
        }
    };

    for (double t : log_spaced(grid.lower, grid.upper, grid.coarse_count)) consider(t);
    if (grid.include_identity && grid.lower <= 1.0 && 1.0 <= grid.upper) consider(1.0);

    double step = grid.coarse_count > 1 ? std::pow(grid.upper / grid.lower, 1.0 / (grid.coarse_count - 1)) : 1.0;
    for (int round = 0; round < grid.refine_rounds && step > 1.0; ++round) {
        const double lo = std::max(grid.lower, best_t / step);
        const double hi = std::min(grid.upper, best_t * step);
        if (!(hi > lo)) break;
        for (double t : log_spaced(lo, hi, grid.refine_count)) consider(t);
        step = grid.refine_count > 1 ? std::pow(hi / lo, 1.0 / (grid.refine_count - 1)) : 1.0;
    }

    model.temperature = best_t;
    model.fit_nll = best_nll;
    return model;
}

std::vector<double> apply_temperature(std::span<const double> masses, double temperature)
{
    if (!(temperature > 0.0)) fail(Errc::invalid_argument, "temperature must be positive");
    if (masses.empty() || std::all_of(masses.begin(), masses.end(), [](double m) { return !(m > 0.0); })) {
        fail(Errc::invalid_argument, "temperature scaling of an all-zero vector is undefined");
    }
    std::vector<double> scores(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i) scores[i] = std::log(std::max(masses[i], kMassFloor)) / temperature;
    const double top = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - top);
        z += s;
    }
    for (double& s : scores) s /= z;
    return scores;
}

// ---------------------------------------------------------------------------
// Isotonic regression

double IsotonicModel::predict(double confidence) const
{
    if (breakpoints.empty()) fail(Errc::invalid_argument, "isotonic model has no breakpoints");
    if (confidence <= breakpoints.front()) return values.front();
    if (confidence >= breakpoints.back()) return values.back();
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), confidence);
    const std::size_t hi = static_cast<std::size_t>(it - breakpoints.begin());
    const std::size_t lo = hi - 1;
    const double t = (confidence - breakpoints[lo]) / (breakpoints[hi] - breakpoints[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

IsotonicModel fit_isotonic(std::span<const ConfidencePair> pairs)
{
    if (pairs.empty()) fail(Errc::invalid_argument, "isotonic fitting needs at least one pair");
    for (const auto& p : pairs) {
        if (!std::isfinite(p.confidence)) fail(Errc::invalid_argument, "isotonic inputs must be finite");
    }

    // Sort by confidence, then correctness, then position, so the fit does
    // not depend on input order.
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(pairs[a].confidence, pairs[a].correct, a) <
               std::make_tuple(pairs[b].confidence, pairs[b].correct, b);
    });

    // Duplicate inputs collapse into one weighted point.
    std::vector<double> xs, ys, ws;
    for (std::size_t idx : order) {
        const double x = pairs[idx].confidence;
        const double y = pairs[idx].correct ? 1.0 : 0.0;
        if (!xs.empty() && xs.back() == x) {
            ys.back() += y;
            ws.back() += 1.0;
        } else {
            xs.push_back(x);
            ys.push_back(y);
            ws.push_back(1.0);
        }
    }

    struct Block {
        double weighted_sum;
        double weight;
        std::size_t first;
        std::size_t last;
        double mean() const { return weighted_sum / weight; }
    };
    std::vector<Block> blocks;
    blocks.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        blocks.push_back({ys[i], ws[i], i, i});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            prev.weighted_sum += top.weighted_sum;
            prev.weight += top.weight;
            prev.last = top.last;
        }
    }

    std::vector<double> fitted(xs.size());
    for (const auto& b : blocks) {
        const double v = std::clamp(b.mean(), 0.0, 1.0);
        for (std::size_t i = b.first; i <= b.last; ++i) fitted[i] = v;
    }

    IsotonicModel model;
    model.fit_count = pairs.size();
    // Interior points of a flat run do not change the interpolant.
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool edge = i == 0 || i + 1 == xs.size();
        if (edge || fitted[i] != fitted[i - 1] || fitted[i] != fitted[i + 1]) {
            model.breakpoints.push_back(xs[i]);
            model.values.push_back(fitted[i]);
        }
    }

    std::uint64_t h = 0;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        // ys holds the hit count of the collapsed point; expand its squared error.
        const double hits = ys[i];
        const double misses = ws[i] - hits;
        sse += hits * (1.0 - fitted[i]) * (1.0 - fitted[i]) + misses * fitted[i] * fitted[i];
    }
    for (const auto& p : pairs) {
        std::uint64_t e = detail::fnv1a(&p.confidence, sizeof(p.confidence));
        const unsigned char c = p.correct ? 1 : 0;
        h += detail::fnv1a(&c, 1, e);
    }
    model.fit_sse = sse;
    model.data_hash = h;
    return model;
}

// ---------------------------------------------------------------------------
// Uniform interface

CalibratorKind CalibratorModel::kind() const
{
    if (std::holds_alternative<TemperatureModel>(model)) return CalibratorKind::temperature;
    if (std::holds_alternative<IsotonicModel>(model)) return CalibratorKind::isotonic;
    return CalibratorKind::none;
}

double apply_calibrator(const CalibratorModel& model, const CalibrationInput& input,
                        std::optional<std::string_view> language, bool allow_scope_override)
{
    if (model.language && !allow_scope_override) {
        if (!language || *language != *model.language) {
            fail(Errc::invalid_argument, "calibrator fitted for language '" + *model.language + "' applied to '" +
                                             std::string(language.value_or("<global>")) + "'");
        }
    }
    if (const auto* t = std::get_if<TemperatureModel>(&model.model)) {
        if (input.pred < 0 || static_cast<std::size_t>(input.pred) >= input.masses.size()) {
            fail(Errc::invalid_argument, "temperature calibration needs the choice masses and a valid prediction");
        }
        const auto scaled = apply_temperature(input.masses, t->temperature);
        return std::clamp(scaled[static_cast<std::size_t>(input.pred)], 0.0, 1.0);
    }
    if (const auto* iso = std::get_if<IsotonicModel>(&model.model)) {
        return std::clamp(iso->predict(input.confidence), 0.0, 1.0);
    }
    return input.confidence;
}

nlohmann::ordered_json to_json(const CalibratorModel& model)
{
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = model.kind() == CalibratorKind::none ? "identity" : std::string(to_string(model.kind()));
    if (model.language) {
        doc["scope"] = "language";
        doc["language"] = *model.language;
    } else {
        doc["scope"] = "global";
    }
    if (const auto* t = std::get_if<TemperatureModel>(&model.model)) {
        doc["temperature"] = t->temperature;
        doc["fit"] = {{"n", t->fit_count}, {"nll", t->fit_nll}, {"data_hash", detail::hex64(t->data_hash)}};
    } else if (const auto* iso = std::get_if<IsotonicModel>(&model.model)) {
        doc["breakpoints"] = iso->breakpoints;
        doc["values"] = iso->values;
        doc["fit"] = {{"n", iso->fit_count}, {"sse", iso->fit_sse}, {"data_hash", detail::hex64(iso->data_hash)}};
    }
    return doc;
}

namespace {

std::uint64_t parse_hash(const nlohmann::json& fit)
{
    if (!fit.contains("data_hash")) return 0;
    return std::stoull(fit.at("data_hash").get<std::string>(), nullptr, 16);
}

}  // namespace

CalibratorModel calibrator_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("format_version").get<int>() != 1) fail(Errc::parse, "unsupported calibrator format_version");
        CalibratorModel model;
        const std::string scope = doc.value("scope", "global");
        if (scope == "language") {
            model.language = doc.at("language").get<std::string>();
        } else if (scope != "global") {
            fail(Errc::parse, "unknown calibrator scope '" + scope + "'");
        }
        const std::string kind = doc.at("kind").get<std::string>();
        const nlohmann::json fit = doc.value("fit", nlohmann::json::object());
        if (kind == "identity" || kind == "none") {
            model.model = IdentityModel{};
        } else if (kind == "temperature") {
            TemperatureModel t;
            t.temperature = doc.at("temperature").get<double>();
            if (!(t.temperature > 0.0)) fail(Errc::parse, "temperature must be positive");
            t.fit_count = fit.value("n", std::size_t{0});
            t.fit_nll = fit.value("nll", 0.0);
            t.data_hash = parse_hash(fit);
            model.model = std::move(t);
        } else if (kind == "isotonic") {
            IsotonicModel iso;
            iso.breakpoints = doc.at("breakpoints").get<std::vector<double>>();
            iso.values = doc.at("values").get<std::vector<double>>();
            if (iso.breakpoints.empty() || iso.breakpoints.size() != iso.values.size()) {
                fail(Errc::parse, "isotonic breakpoints and values must be non-empty and equally long");
            }
            for (std::size_t i = 1; i < iso.breakpoints.size(); ++i) {
                if (!(iso.breakpoints[i] > iso.breakpoints[i - 1]) || iso.values[i] < iso.values[i - 1]) {
                    fail(Errc::parse, "isotonic map must be increasing in x and non-decreasing in y");
                }
            }
            iso.fit_count = fit.value("n", std::size_t{0});
            iso.fit_sse = fit.value("sse", 0.0);
            iso.data_hash = parse_hash(fit);
            model.model = std::move(iso);
        } else {
            fail(Errc::parse, "unknown calibrator kind '" + kind + "'");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, std::string("malformed calibrator document: ") + e.what());
    }
}

}  // namespace lacecal
