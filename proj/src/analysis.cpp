#include "lacecal/analysis.hpp"

#include "parallel.hpp"
#include "rng.hpp"
#include "text_util.hpp"

#include "lacecal/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace lacecal {

LanguageGroups groups_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) fail(Errc::parse, "groups config must be an object of group name to language list");
    LanguageGroups out;
    for (const auto& [name, members] : doc.items()) {
        if (!members.is_array()) fail(Errc::parse, "group '" + name + "' must be a list of language tags");
        auto& list = out.groups[name];
        for (const auto& m : members) {
            if (!m.is_string()) fail(Errc::parse, "group '" + name + "' contains a non-string tag");
            list.push_back(m.get<std::string>());
        }
    }
    return out;
}

LanguageGroups load_groups(const std::string& path)
{
    const std::string text = detail::read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, path + ": " + e.what());
    }
    return groups_from_json(doc);
}

std::vector<GroupRow> group_summary(const MetricReport& report, const LanguageGroups& groups)
{
    std::vector<GroupRow> rows;
    for (const auto& [name, members] : groups.groups) {
        if (members.empty()) fail(Errc::invalid_argument, "group '" + name + "' is empty");
        GroupRow row;
        row.group = name;
        std::vector<const LanguageMetrics*> found;
        for (const auto& lang : members) {
            if (const auto* m = report.find(lang)) {
                row.present.push_back(lang);
                found.push_back(m);
            } else {
                row.missing.push_back(lang);
            }
        }
        if (!found.empty()) {
            LanguageMetrics mean;
            mean.language = name;
            double auroc_sum = 0.0;
            std::size_t auroc_n = 0;
            for (const auto* m : found) {
                mean.count += m->count;
                mean.accuracy += m->accuracy;
                mean.ece += m->ece;
                mean.brier += m->brier;
                mean.mean_confidence += m->mean_confidence;
                if (m->auroc) {
                    auroc_sum += *m->auroc;
                    ++auroc_n;
                }
            }
            const double k = static_cast<double>(found.size());
            mean.accuracy /= k;
            mean.ece /= k;
            mean.brier /= k;
            mean.mean_confidence /= k;
            if (auroc_n > 0) mean.auroc = auroc_sum / static_cast<double>(auroc_n);
            row.mean = std::move(mean);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string join(const std::vector<std::string>& items, char sep)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string group_csv(std::span<const GroupRow> rows)
{
    std::string out = "group,n,accuracy,ece,brier,auroc,mean_confidence,present,missing\n";
    for (const auto& row : rows) {
        out += detail::csv_field(row.group) + ',';
        if (row.mean) {
            const auto& m = *row.mean;
            out += std::to_string(m.count) + ',' + detail::format_double(m.accuracy) + ',' +
                   detail::format_double(m.ece) + ',' + detail::format_double(m.brier) + ',' +
                   detail::format_optional(m.auroc) + ',' + detail::format_double(m.mean_confidence);
        } else {
            out += "0,NA,NA,NA,NA,NA";
        }
        out += ',' + detail::csv_field(join(row.present, ';')) + ',' + detail::csv_field(join(row.missing, ';')) + '\n';
    }
    return out;
}

nlohmann::ordered_json to_json(std::span<const GroupRow> rows)
{
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json j;
        j["group"] = row.group;
        j["present"] = row.present;
        j["missing"] = row.missing;
        if (row.mean) {
            j["n"] = row.mean->count;
            j["accuracy"] = row.mean->accuracy;
            j["ece"] = row.mean->ece;
            j["brier"] = row.mean->brier;
            j["auroc"] = optional_json(row.mean->auroc);
            j["mean_confidence"] = row.mean->mean_confidence;
        } else {
            j["n"] = 0;
        }
        out.push_back(std::move(j));
    }
    return out;
}

ResourceTable parse_resource_csv(const std::string& text)
{
    ResourceTable table;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(detail::strip_cr(raw));
        if (line.empty() || line.front() == '#') continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() < 2 || fields[0] != "language" || fields[1] != "share") {
                fail(Errc::parse, "line " + std::to_string(line_no) + ": expected header language,share");
            }
            continue;
        }
        if (fields.size() < 2) fail(Errc::parse, "line " + std::to_string(line_no) + ": expected language,share");
        double share = 0.0;
        try {
            std::size_t used = 0;
            share = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": bad share '" + fields[1] + "'");
        }
        if (!(share >= 0.0) || !std::isfinite(share)) {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": share must be finite and non-negative");
        }
        if (!table.shares.emplace(fields[0], share).second) {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": duplicate language '" + fields[0] + "'");
        }
    }
    if (!header_seen) fail(Errc::parse, "empty resource table");
    return table;
}

std::vector<double> average_ranks(std::span<const double> values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n)
{
    if (x.size() != y.size()) fail(Errc::invalid_argument, "correlation inputs differ in length");
    if (x.size() < min_n) {
        fail(Errc::invalid_argument, "correlation needs at least " + std::to_string(min_n) + " pairs");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(Errc::invalid_argument, "correlation inputs must be finite");
    }
}

std::optional<double> t_test_p(double r, std::size_t n)
{
    if (n < 3) return std::nullopt;
    const double df = static_cast<double>(n - 2);
    if (std::abs(r) >= 1.0) return 0.0;
    const double t = r * std::sqrt(df / (1.0 - r * r));
    const boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

}  // namespace

std::optional<double> pearson(std::span<const double> x, std::span<const double> y)
{
    check_pair(x, y, 2);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y)
{
    check_pair(x, y, 2);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

namespace {

struct KendallCounts {
    double concordant_minus_discordant = 0.0;
    double n0 = 0.0, n1 = 0.0, n2 = 0.0;
};

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y)
{
    KendallCounts c;
    const std::size_t n = x.size();
    long long s = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const int sx = (x[i] < x[j]) - (x[i] > x[j]);
            const int sy = (y[i] < y[j]) - (y[i] > y[j]);
            if (sx == 0) ++tx;
            if (sy == 0) ++ty;
            s += sx * sy;
        }
    }
    c.concordant_minus_discordant = static_cast<double>(s);
    c.n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    c.n1 = static_cast<double>(tx);
    c.n2 = static_cast<double>(ty);
    return c;
}

// Tie group sizes of a vector.
std::vector<double> tie_sizes(std::span<const double> v)
{
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> sizes;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        if (j > i) sizes.push_back(static_cast<double>(j - i + 1));
        i = j + 1;
    }
    return sizes;
}

std::optional<double> kendall_p(std::span<const double> x, std::span<const double> y, double s)
{
    const double n = static_cast<double>(x.size());
    if (n < 3) return std::nullopt;
    double vt = 0, vu = 0, t1 = 0, u1 = 0, t2 = 0, u2 = 0;
    for (double t : tie_sizes(x)) {
        vt += t * (t - 1) * (2 * t + 5);
        t1 += t * (t - 1);
        t2 += t * (t - 1) * (t - 2);
    }
    for (double u : tie_sizes(y)) {
        vu += u * (u - 1) * (2 * u + 5);
        u1 += u * (u - 1);
        u2 += u * (u - 1) * (u - 2);
    }
    const double v0 = n * (n - 1) * (2 * n + 5);
    const double var = (v0 - vt - vu) / 18.0 + t1 * u1 / (2.0 * n * (n - 1)) + t2 * u2 / (9.0 * n * (n - 1) * (n - 2));
    if (!(var > 0.0)) return std::nullopt;
    const double z = std::abs(s) / std::sqrt(var);
    const boost::math::normal dist;
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, z)));
}

}  // namespace

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y)
{
    check_pair(x, y, 2);
    const KendallCounts c = kendall_counts(x, y);
    const double denom = (c.n0 - c.n1) * (c.n0 - c.n2);
    if (!(denom > 0.0)) return std::nullopt;
    return std::clamp(c.concordant_minus_discordant / std::sqrt(denom), -1.0, 1.0);
}

CorrelationResult correlations(std::span<const double> x, std::span<const double> y)
{
    check_pair(x, y, 3);
    CorrelationResult r;
    r.n = x.size();
    r.pearson.value = pearson(x, y);
    if (r.pearson.value) r.pearson.p_value = t_test_p(*r.pearson.value, r.n);
    r.spearman.value = spearman(x, y);
    if (r.spearman.value) r.spearman.p_value = t_test_p(*r.spearman.value, r.n);
    r.kendall.value = kendall_tau_b(x, y);
    if (r.kendall.value) r.kendall.p_value = kendall_p(x, y, kendall_counts(x, y).concordant_minus_discordant);
    return r;
}

nlohmann::ordered_json to_json(const CorrelationResult& result)
{
    auto coef = [](const Coefficient& c) {
        return nlohmann::ordered_json{{"value", optional_json(c.value)}, {"p_value", optional_json(c.p_value)}};
    };
    nlohmann::ordered_json j;
    j["n"] = result.n;
    j["p_value_method"] = "asymptotic (Student t for pearson/spearman, normal for kendall tau-b)";
    j["pearson"] = coef(result.pearson);
    j["spearman"] = coef(result.spearman);
    j["kendall_tau_b"] = coef(result.kendall);
    return j;
}

ResourceCorrelation resource_correlation(const MetricReport& report, const ResourceTable& table, Metric metric)
{
    ResourceCorrelation rc;
    rc.metric = metric;
    for (const auto& row : report.languages) {
        const auto it = table.shares.find(row.language);
        const auto value = metric_value(row, metric);
        if (it == table.shares.end() || !value) {
            rc.dropped.push_back(row.language);
            continue;
        }
        rc.languages.push_back(row.language);
        rc.shares.push_back(it->second);
        rc.values.push_back(*value);
    }
    for (const auto& [lang, share] : table.shares) {
        if (!report.find(lang)) rc.dropped.push_back(lang);
    }
    std::sort(rc.dropped.begin(), rc.dropped.end());
    if (rc.languages.size() < 3) {
        fail(Errc::data, "resource correlation needs at least 3 overlapping languages, found " +
                             std::to_string(rc.languages.size()));
    }
    rc.result = correlations(rc.shares, rc.values);
    return rc;
}

nlohmann::ordered_json to_json(const ResourceCorrelation& rc)
{
    nlohmann::ordered_json j;
    j["metric"] = std::string(to_string(rc.metric));
    j["languages"] = rc.languages;
    j["shares"] = rc.shares;
    j["values"] = rc.values;
    j["dropped"] = rc.dropped;
    j["correlation"] = to_json(rc.result);
    return j;
}

double quantile_sorted(std::span<const double> sorted, double q)
{
    if (sorted.empty()) fail(Errc::invalid_argument, "quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::optional<double> sample_statistic(std::span<const ScoredRecord> records, Metric metric, Aggregate aggregate,
                                       int bins)
{
    if (records.empty()) fail(Errc::invalid_argument, "empty sample");
    if (aggregate == Aggregate::macro) return metric_value(build_report(records, bins).macro, metric);
    std::vector<double> conf(records.size());
    std::vector<std::uint8_t> correct(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        conf[i] = records[i].confidence;
        correct[i] = records[i].correct ? 1 : 0;
    }
    return metric_value(score_language("pooled", conf, correct, bins), metric);
}

BootstrapResult bootstrap_ci(std::span<const ScoredRecord> records, Metric metric, const BootstrapOptions& options)
{
    if (records.empty()) fail(Errc::invalid_argument, "empty sample");
    if (options.resamples < 1) fail(Errc::invalid_argument, "bootstrap needs at least one resample");
    if (!(options.level > 0.0 && options.level < 1.0)) fail(Errc::invalid_argument, "level must lie in (0, 1)");

    const auto estimate = sample_statistic(records, metric, options.aggregate, options.bins);
    if (!estimate) fail(Errc::undefined, std::string(to_string(metric)) + " is undefined on the full sample");

    // Index pools: one per language when stratified, otherwise one overall.
    std::vector<std::vector<std::size_t>> strata;
    if (options.stratify) {
        std::map<std::string, std::vector<std::size_t>> by_lang;
        for (std::size_t i = 0; i < records.size(); ++i) by_lang[records[i].language].push_back(i);
        for (auto& [lang, idx] : by_lang) strata.push_back(std::move(idx));
    } else {
        strata.emplace_back(records.size());
        std::iota(strata[0].begin(), strata[0].end(), 0);
    }

    std::vector<double> stats(options.resamples);
    detail::parallel_for(options.resamples, [&](std::size_t b) {
        std::vector<ScoredRecord> sample;
        sample.reserve(records.size());
        for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
            boost::random::mt19937_64 rng(detail::derive_seed(options.seed, b, attempt));
            sample.clear();
            for (const auto& pool : strata) {
                boost::random::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                for (std::size_t i = 0; i < pool.size(); ++i) sample.push_back(records[pool[pick(rng)]]);
            }
            if (const auto v = sample_statistic(sample, metric, options.aggregate, options.bins)) {
                stats[b] = *v;
                return;
            }
        }
        fail(Errc::undefined, std::string(to_string(metric)) + " undefined on resample " + std::to_string(b) +
                                  " after " + std::to_string(options.max_retries) + " redraws");
    });

    BootstrapResult r;
    r.metric = metric;
    r.aggregate = options.aggregate;
    r.estimate = *estimate;
    r.level = options.level;
    r.resamples = options.resamples;
    r.seed = options.seed;
    double sum = 0.0;
    for (double s : stats) sum += s;
    r.mean = sum / static_cast<double>(stats.size());
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - options.level;
    r.lower = quantile_sorted(stats, alpha / 2.0);
    r.upper = quantile_sorted(stats, 1.0 - alpha / 2.0);
    return r;
}

nlohmann::ordered_json to_json(const BootstrapResult& result)
{
    nlohmann::ordered_json j;
    j["metric"] = std::string(to_string(result.metric));
    j["aggregate"] = result.aggregate == Aggregate::macro ? "macro" : "pooled";
    j["method"] = "percentile";
    j["resamples"] = result.resamples;
    j["level"] = result.level;
    j["seed"] = result.seed;
    j["estimate"] = result.estimate;
    j["mean"] = result.mean;
    j["lower"] = result.lower;
    j["upper"] = result.upper;
    return j;
}

}  // namespace lacecal
