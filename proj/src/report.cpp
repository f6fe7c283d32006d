#include "lacecal/report.hpp"

#include "lacecal/core.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace lacecal {

std::string_view to_string(Metric metric)
{
    switch (metric) {
    case Metric::ece: return "ece";
    case Metric::brier: return "brier";
    case Metric::auroc: return "auroc";
    case Metric::accuracy: return "accuracy";
    case Metric::mean_confidence: return "mean_confidence";
    }
    return "ece";
}

Metric parse_metric(std::string_view text)
{
    if (text == "ece") return Metric::ece;
    if (text == "brier") return Metric::brier;
    if (text == "auroc") return Metric::auroc;
    if (text == "accuracy") return Metric::accuracy;
    if (text == "mean_confidence") return Metric::mean_confidence;
    fail(Errc::invalid_argument, "unknown metric '" + std::string(text) + "'");
}

std::optional<double> metric_value(const LanguageMetrics& row, Metric metric)
{
    switch (metric) {
    case Metric::ece: return row.ece;
    case Metric::brier: return row.brier;
    case Metric::auroc: return row.auroc;
    case Metric::accuracy: return row.accuracy;
    case Metric::mean_confidence: return row.mean_confidence;
    }
    return std::nullopt;
}

const LanguageMetrics* MetricReport::find(const std::string& language) const
{
    for (const auto& row : languages) {
        if (row.language == language) return &row;
    }
    return nullptr;
}

LanguageMetrics score_language(std::string language, std::span<const double> confidences,
                               std::span<const std::uint8_t> correct, int bins)
{
    LanguageMetrics row;
    row.language = std::move(language);
    row.count = confidences.size();
    row.accuracy = accuracy(correct);
    row.ece = ece(confidences, correct, bins);
    row.brier = brier(confidences, correct);
    row.auroc = auroc(confidences, correct);
    double sum = 0.0;
    for (double c : confidences) sum += c;
    row.mean_confidence = sum / static_cast<double>(confidences.size());
    return row;
}

std::map<std::string, std::vector<const ScoredRecord*>> by_language(std::span<const ScoredRecord> records)
{
    std::map<std::string, std::vector<const ScoredRecord*>> groups;
    for (const auto& r : records) groups[r.language].push_back(&r);
    return groups;
}

MetricReport build_report(std::span<const ScoredRecord> records, int bins, std::string method)
{
    if (records.empty()) fail(Errc::invalid_argument, "empty sample");
    MetricReport report;
    report.bins = bins;
    report.method = std::move(method);

    std::vector<double> conf;
    std::vector<std::uint8_t> correct;
    for (const auto& [lang, group] : by_language(records)) {
        conf.clear();
        correct.clear();
        for (const auto* r : group) {
            conf.push_back(r->confidence);
            correct.push_back(r->correct ? 1 : 0);
        }
        report.languages.push_back(score_language(lang, conf, correct, bins));
    }

    LanguageMetrics& macro = report.macro;
    macro.language = "macro";
    double auroc_sum = 0.0;
    std::size_t auroc_n = 0;
    for (const auto& row : report.languages) {
        macro.count += row.count;
        macro.accuracy += row.accuracy;
        macro.ece += row.ece;
        macro.brier += row.brier;
        macro.mean_confidence += row.mean_confidence;
        if (row.auroc) {
            auroc_sum += *row.auroc;
            ++auroc_n;
        }
    }
    const double k = static_cast<double>(report.languages.size());
    macro.accuracy /= k;
    macro.ece /= k;
    macro.brier /= k;
    macro.mean_confidence /= k;
    if (auroc_n > 0) macro.auroc = auroc_sum / static_cast<double>(auroc_n);
    return report;
}

namespace {

nlohmann::ordered_json row_json(const LanguageMetrics& row)
{
    nlohmann::ordered_json j;
    j["language"] = row.language;
    j["n"] = row.count;
    j["accuracy"] = row.accuracy;
    j["ece"] = row.ece;
    j["brier"] = row.brier;
    j["auroc"] = row.auroc ? nlohmann::ordered_json(*row.auroc) : nlohmann::ordered_json(nullptr);
    j["mean_confidence"] = row.mean_confidence;
    return j;
}

LanguageMetrics row_from_json(const nlohmann::json& j)
{
    LanguageMetrics row;
    row.language = j.at("language").get<std::string>();
    row.count = j.at("n").get<std::size_t>();
    row.accuracy = j.at("accuracy").get<double>();
    row.ece = j.at("ece").get<double>();
    row.brier = j.at("brier").get<double>();
    if (!j.at("auroc").is_null()) row.auroc = j.at("auroc").get<double>();
    row.mean_confidence = j.at("mean_confidence").get<double>();
    return row;
}

}  // namespace

nlohmann::ordered_json to_json(const MetricReport& report)
{
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["kind"] = "metric_report";
    doc["method"] = report.method;
    doc["bins"] = report.bins;
    doc["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.metadata) doc["metadata"][k] = v;
    doc["languages"] = nlohmann::ordered_json::array();
    for (const auto& row : report.languages) doc["languages"].push_back(row_json(row));
    doc["macro"] = row_json(report.macro);
    return doc;
}

MetricReport report_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("kind").get<std::string>() != "metric_report") fail(Errc::parse, "document is not a metric report");
        MetricReport report;
        report.method = doc.value("method", "");
        report.bins = doc.at("bins").get<int>();
        const nlohmann::json metadata = doc.value("metadata", nlohmann::json::object());
        for (const auto& [k, v] : metadata.items()) report.metadata[k] = v.get<std::string>();
        for (const auto& row : doc.at("languages")) report.languages.push_back(row_from_json(row));
        report.macro = row_from_json(doc.at("macro"));
        return report;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, std::string("malformed metric report: ") + e.what());
    }
}

std::string report_csv(const MetricReport& report)
{
    std::string out = "language,n,accuracy,ece,brier,auroc,mean_confidence\n";
    auto line = [&](const LanguageMetrics& row) {
        out += detail::csv_field(row.language) + ',' + std::to_string(row.count) + ',' +
               detail::format_double(row.accuracy) + ',' + detail::format_double(row.ece) + ',' +
               detail::format_double(row.brier) + ',' + detail::format_optional(row.auroc) + ',' +
               detail::format_double(row.mean_confidence) + '\n';
    };
    for (const auto& row : report.languages) line(row);
    line(report.macro);
    return out;
}

std::string scored_csv(std::span<const ScoredRecord> records)
{
    std::string out = "id,language,confidence,correct,fallback\n";
    for (const auto& r : records) {
        out += detail::csv_field(r.id) + ',' + detail::csv_field(r.language) + ',' +
               detail::format_double(r.confidence) + ',' + (r.correct ? "1" : "0") + ',' + (r.fallback ? "1" : "0") +
               '\n';
    }
    return out;
}

std::vector<ScoredRecord> parse_scored_csv(const std::string& text)
{
    std::vector<ScoredRecord> out;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::strip_cr(raw);
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() < 4 || fields[0] != "id" || fields[1] != "language" || fields[2] != "confidence" ||
                fields[3] != "correct") {
                fail(Errc::parse, "line 1: expected sidecar header id,language,confidence,correct[,fallback]");
            }
            continue;
        }
        if (fields.size() < 4) fail(Errc::parse, "line " + std::to_string(line_no) + ": expected at least 4 fields");
        ScoredRecord r;
        r.id = fields[0];
        r.language = fields[1];
        try {
            std::size_t used = 0;
            r.confidence = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": bad confidence '" + fields[2] + "'");
        }
        if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": confidence outside [0, 1]");
        }
        if (fields[3] != "0" && fields[3] != "1") {
            fail(Errc::parse, "line " + std::to_string(line_no) + ": correct must be 0 or 1");
        }
        r.correct = fields[3] == "1";
        r.fallback = fields.size() > 4 && fields[4] == "1";
        out.push_back(std::move(r));
    }
    if (!header_seen) fail(Errc::parse, "empty sidecar file");
    return out;
}

std::string confidence_stats_csv(std::span<const ScoredRecord> records)
{
    std::string out = "language,n,accuracy,avg_conf,conf_gap,underconf_rate,corr_conf,inc_conf,corr_inc_gap\n";
    auto line = [&](const std::string& lang, const std::vector<const ScoredRecord*>& group) {
        std::vector<double> conf;
        std::vector<std::uint8_t> correct;
        for (const auto* r : group) {
            conf.push_back(r->confidence);
            correct.push_back(r->correct ? 1 : 0);
        }
        const ConfidenceStats s = confidence_stats(conf, correct);
        out += detail::csv_field(lang) + ',' + std::to_string(s.count) + ',' + detail::format_double(s.accuracy) + ',' +
               detail::format_double(s.avg_conf) + ',' + detail::format_double(s.conf_gap) + ',' +
               detail::format_optional(s.underconf_rate) + ',' + detail::format_optional(s.corr_conf) + ',' +
               detail::format_optional(s.inc_conf) + ',' + detail::format_optional(s.corr_inc_gap) + '\n';
    };
    if (records.empty()) fail(Errc::invalid_argument, "empty sample");
    std::vector<const ScoredRecord*> all;
    for (const auto& [lang, group] : by_language(records)) {
        line(lang, group);
        all.insert(all.end(), group.begin(), group.end());
    }
    line("all", all);
    return out;
}

namespace {

std::string fixed(double v, int digits = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string xml_escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string reliability_svg(std::span<const BinSummary> bins, double ece_value, const std::string& title)
{
    constexpr double size = 360.0, left = 48.0, top = 32.0, plot = 280.0;
    auto px = [&](double x) { return left + x * plot; };
    auto py = [&](double y) { return top + (1.0 - y) * plot; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20
      << "\" viewBox=\"0 0 " << size << ' ' << size + 20 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
         "patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#d62728\" "
         "stroke-width=\"2\"/></pattern></defs>\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size + 20 << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << size / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
      << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot << "\" height=\"" << plot
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (const auto& b : bins) {
        if (b.count == 0) continue;
        const double x0 = px(b.lower) + 1.0, w = (b.upper - b.lower) * plot - 2.0;
        const double acc = *b.accuracy, conf = *b.mean_confidence;
        s << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(py(acc)) << "\" width=\"" << fixed(w) << "\" height=\""
          << fixed(acc * plot) << "\" fill=\"#1f77b4\" fill-opacity=\"0.8\"/>\n";
        const double lo = std::min(acc, conf), hi = std::max(acc, conf);
        if (hi > lo) {
            s << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(py(hi)) << "\" width=\"" << fixed(w)
              << "\" height=\"" << fixed((hi - lo) * plot) << "\" fill=\"url(#hatch)\" stroke=\"#d62728\" "
              << "stroke-width=\"0.5\"/>\n";
        }
    }

    s << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = t / 4.0;
        s << "<text x=\"" << fixed(px(v)) << "\" y=\"" << fixed(top + plot + 14) << "\" text-anchor=\"middle\">"
          << fixed(v) << "</text>\n";
        s << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">" << fixed(v)
          << "</text>\n";
    }
    s << "<text x=\"" << fixed(px(0.5)) << "\" y=\"" << fixed(top + plot + 30)
      << "\" text-anchor=\"middle\">confidence</text>\n";
    s << "<text x=\"14\" y=\"" << fixed(py(0.5)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fixed(py(0.5)) << ")\">accuracy</text>\n";
    s << "<rect x=\"" << fixed(left + 8) << "\" y=\"" << fixed(top + 8) << "\" width=\"108\" height=\"22\" "
      << "fill=\"white\" stroke=\"#999\"/>\n";
    s << "<text x=\"" << fixed(left + 14) << "\" y=\"" << fixed(top + 23) << "\">ECE = " << fixed(100.0 * ece_value)
      << "%</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace lacecal
