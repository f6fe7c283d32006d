#include "lacecal/metrics.hpp"

#include "lacecal/core.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lacecal {

namespace {

void check_sample(std::span<const double> confidences, std::span<const std::uint8_t> correct)
{
    if (confidences.empty()) fail(Errc::invalid_argument, "empty sample");
    if (confidences.size() != correct.size()) {
        fail(Errc::invalid_argument, "confidence and correctness vectors differ in length");
    }
}

void check_bins(int bins)
{
    if (bins < 1) fail(Errc::invalid_argument, "bin count must be at least 1");
}

}  // namespace

int bin_index(double confidence, int bins)
{
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        fail(Errc::invalid_argument, "confidence " + detail::format_double(confidence) + " outside [0, 1]");
    }
    const double M = bins;
    int m = static_cast<int>(std::ceil(confidence * M));
    m = std::clamp(m, 1, bins);
    // ceil(c*M) can land one bin off near edges; settle against the exact bounds.
    if (m > 1 && confidence <= (m - 1) / M) --m;
    if (m < bins && confidence > m / M) ++m;
    return m;
}

std::vector<BinSummary> reliability_bins(std::span<const double> confidences,
                                         std::span<const std::uint8_t> correct, int bins)
{
    check_sample(confidences, correct);
    check_bins(bins);

    std::vector<double> conf_sum(bins, 0.0);
    std::vector<std::size_t> hits(bins, 0);
    std::vector<std::size_t> counts(bins, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const int m = bin_index(confidences[i], bins) - 1;
        conf_sum[m] += confidences[i];
        hits[m] += correct[i] ? 1 : 0;
        ++counts[m];
    }

    std::vector<BinSummary> out(bins);
    const double M = bins;
    for (int m = 0; m < bins; ++m) {
        BinSummary& b = out[m];
        b.bin_index = m + 1;
        b.lower = m / M;
        b.upper = (m + 1) / M;
        b.count = counts[m];
        if (counts[m] > 0) {
            const double n = static_cast<double>(counts[m]);
            b.mean_confidence = conf_sum[m] / n;
            b.accuracy = static_cast<double>(hits[m]) / n;
            b.gap = std::abs(*b.accuracy - *b.mean_confidence);
        }
    }
    return out;
}

double ece_from_bins(std::span<const BinSummary> bins)
{
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    if (total == 0) fail(Errc::invalid_argument, "empty sample");
    const double n = static_cast<double>(total);
    double sum = 0.0;
    for (const auto& b : bins) {
        if (b.count > 0) sum += (static_cast<double>(b.count) / n) * *b.gap;
    }
    return sum;
}

double ece(std::span<const double> confidences, std::span<const std::uint8_t> correct, int bins)
{
    const auto table = reliability_bins(confidences, correct, bins);
    return ece_from_bins(table);
}

double brier(std::span<const double> confidences, std::span<const std::uint8_t> correct)
{
    check_sample(confidences, correct);
    double sum = 0.0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double d = confidences[i] - (correct[i] ? 1.0 : 0.0);
        sum += d * d;
    }
    return sum / static_cast<double>(confidences.size());
}

std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> correct)
{
    check_sample(scores, correct);
    const std::size_t n = scores.size();
    std::size_t positives = 0;
    for (auto c : correct) positives += c ? 1 : 0;
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of average ranks (1-based) over the correct records.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (correct[order[k]]) rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(positives);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(negatives));
}

double accuracy(std::span<const std::uint8_t> correct)
{
    if (correct.empty()) fail(Errc::invalid_argument, "empty sample");
    std::size_t hits = 0;
    for (auto c : correct) hits += c ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(correct.size());
}

double entropy(std::span<const double> distribution)
{
    double total = 0.0;
    for (double p : distribution) {
        if (!(p >= 0.0) || !std::isfinite(p)) fail(Errc::invalid_argument, "entropy requires finite non-negative entries");
        total += p;
    }
    if (total <= 0.0) fail(Errc::invalid_argument, "entropy of an all-zero vector is undefined");
    double h = 0.0;
    for (double p : distribution) {
        if (p > 0.0) {
            const double q = p / total;
            h -= q * std::log(q);
        }
    }
    return std::max(h, 0.0);
}

ConfidenceStats confidence_stats(std::span<const double> confidences, std::span<const std::uint8_t> correct)
{
    check_sample(confidences, correct);
    ConfidenceStats s;
    s.count = confidences.size();

    double conf_sum = 0.0, corr_sum = 0.0, inc_sum = 0.0;
    std::size_t n_corr = 0, n_under = 0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        conf_sum += confidences[i];
        if (correct[i]) {
            ++n_corr;
            corr_sum += confidences[i];
            if (confidences[i] < 0.5) ++n_under;
        } else {
            inc_sum += confidences[i];
        }
    }
    const double n = static_cast<double>(s.count);
    const std::size_t n_inc = s.count - n_corr;
    s.accuracy = 100.0 * static_cast<double>(n_corr) / n;
    s.avg_conf = 100.0 * conf_sum / n;
    s.conf_gap = s.accuracy - s.avg_conf;
    if (n_corr > 0) {
        s.underconf_rate = 100.0 * static_cast<double>(n_under) / static_cast<double>(n_corr);
        s.corr_conf = 100.0 * corr_sum / static_cast<double>(n_corr);
    }
    if (n_inc > 0) s.inc_conf = 100.0 * inc_sum / static_cast<double>(n_inc);
    if (s.corr_conf && s.inc_conf) s.corr_inc_gap = *s.corr_conf - *s.inc_conf;
    return s;
}

std::string reliability_csv(std::span<const BinSummary> bins)
{
    std::string out = "bin_index,lower,upper,count,mean_confidence,accuracy,gap\n";
    for (const auto& b : bins) {
        out += std::to_string(b.bin_index) + ',' + detail::format_double(b.lower) + ',' +
               detail::format_double(b.upper) + ',' + std::to_string(b.count) + ',' +
               detail::format_optional(b.mean_confidence) + ',' + detail::format_optional(b.accuracy) + ',' +
               detail::format_optional(b.gap) + '\n';
    }
    return out;
}

}  // namespace lacecal
