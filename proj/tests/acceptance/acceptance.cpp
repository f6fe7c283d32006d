// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "lacecal/analysis.hpp"
#include "lacecal/calibrators.hpp"
#include "lacecal/core.hpp"
#include "lacecal/layer_strategy.hpp"
#include "lacecal/metrics.hpp"
#include "lacecal/report.hpp"
#include "lacecal/store.hpp"
#include "lacecal/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#ifndef LACECAL_FIXTURE_DIR
#error "LACECAL_FIXTURE_DIR must be defined"
#endif
#ifndef LACECAL_CLI_PATH
#error "LACECAL_CLI_PATH must be defined"
#endif

using namespace lacecal;
namespace fs = std::filesystem;

namespace {

using Flags = std::vector<std::uint8_t>;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Brute-force references

double ece_reference(const std::vector<double>& c, const Flags& y, int M)
{
    double total = 0.0;
    const double n = static_cast<double>(c.size());
    for (int m = 1; m <= M; ++m) {
        const double lo = (m - 1) / static_cast<double>(M), hi = m / static_cast<double>(M);
        double conf = 0, acc = 0, count = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const bool in = (c[i] > lo && c[i] <= hi) || (m == 1 && c[i] == 0.0);
            if (!in) continue;
            conf += c[i];
            acc += y[i];
            count += 1;
        }
        if (count > 0) total += (count / n) * std::abs(acc / count - conf / count);
    }
    return total;
}

std::optional<double> auroc_reference(const std::vector<double>& s, const Flags& y)
{
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    if (pairs == 0) return std::nullopt;
    return wins / pairs;
}

std::vector<double> rank_reference(const std::vector<double>& v)
{
    // Rank = 1 + #smaller + (#equal - 1) / 2.
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
}

std::optional<double> pearson_reference(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> kendall_reference(const std::vector<double>& x, const std::vector<double>& y)
{
    double concordant = 0, discordant = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) {
                ++tx;
            } else if (dy == 0) {
                ++ty;
            } else if ((dx > 0) == (dy > 0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double a = concordant + discordant + tx, b = concordant + discordant + ty;
    if (a == 0 || b == 0) return std::nullopt;
    return (concordant - discordant) / std::sqrt(a * b);
}

bool close_opt(const std::optional<double>& a, const std::optional<double>& b, double tol)
{
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= tol;
}

Dataset llama_dataset() { return generate(preset_profiles("paper-like-llama"), 5000, 1); }

// ---------------------------------------------------------------------------
// Criteria

Outcome ece_oracle()
{
    Outcome o;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int grids[] = {5, 10, 15};
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng() % 64;
        const int M = grids[t % 3];
        std::vector<double> c(n);
        Flags y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double masses[4];
            double sum = 0;
            for (double& m : masses) sum += m = -std::log(u(rng) + 1e-300);
            const double scale = 0.5 + 0.5 * u(rng);
            const std::size_t pred = argmax(std::span<const double>(masses, 4));
            c[i] = masses[pred] / sum * scale;
            if (rng() % 8 == 0) c[i] = static_cast<double>(rng() % (M + 1)) / M;  // exact edges
            y[i] = rng() % 2;
        }
        const double lib = ece(c, y, M);
        const double ref = ece_reference(c, y, M);
        worst = std::max(worst, std::abs(lib - ref));
    }
    o.require(worst <= 1e-12, "max |diff| " + fmt(worst));
    o.detail = o.detail.empty() ? "200 sets, max |diff| " + fmt(worst) : o.detail;
    return o;
}

Outcome calibrated_sanity()
{
    Outcome o;
    const auto expected = nlohmann::json::parse(read_file(fs::path(LACECAL_FIXTURE_DIR) / "calibrated_expected.json"));
    const std::size_t n = expected.at("n").get<std::size_t>();
    const std::uint64_t offset = expected.at("offset").get<std::uint64_t>();
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    };
    auto unit = [&](std::uint64_t i) { return static_cast<double>(splitmix(i) >> 11) * 0x1p-53; };
    std::vector<double> c(n);
    Flags y(n);
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = unit(i);
        y[i] = unit(i + offset) < c[i];
    }
    for (std::size_t i = 0; i < expected.at("first").size(); ++i) {
        o.require(expected["first"][i][0].get<double>() == c[i], "sample stream disagrees with the oracle");
    }
    const double e = ece(c, y, expected.at("bins").get<int>());
    const double b = brier(c, y);
    const double db = std::abs(b - expected.at("brier").get<double>());
    const double de = std::abs(e - expected.at("ece").get<double>());
    o.require(e < 0.01, "ece " + fmt(e));
    o.require(db <= 1e-12, "brier diff " + fmt(db));
    o.require(de <= 1e-12, "ece diff " + fmt(de));
    if (o.pass) o.detail = "ece " + fmt(e) + ", brier diff " + fmt(db);
    return o;
}

Outcome auroc_oracle()
{
    Outcome o;
    std::mt19937_64 rng(202);
    double worst = 0;
    int undefined_checked = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng() % 60;
        const int levels = 2 + static_cast<int>(rng() % 12);  // few levels force ties
        std::vector<double> s(n);
        Flags y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % levels) / levels;
            y[i] = rng() % 3 != 0;
        }
        const auto lib = auroc(s, y);
        const auto ref = auroc_reference(s, y);
        if (lib.has_value() != ref.has_value()) {
            o.require(false, "definedness differs");
            continue;
        }
        if (lib) worst = std::max(worst, std::abs(*lib - *ref));
    }
    for (std::uint8_t v : {0, 1}) {
        const Flags same(10, v);
        const std::vector<double> s{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        o.require(!auroc(s, same).has_value(), "single-class input must be undefined");
        ++undefined_checked;
    }
    o.require(worst <= 1e-12, "max |diff| " + fmt(worst));
    if (o.pass) o.detail = "200 sets, max |diff| " + fmt(worst) + ", single-class undefined";
    return o;
}

Outcome temperature_recovery()
{
    Outcome o;
    const TemperatureGrid grid;
    o.require(grid.lower == 0.05 && grid.upper == 5.0 && grid.coarse_count == 60, "default grid is not [0.05, 5] x 60");

    std::string detail;
    for (double s : {0.5, 2.0}) {
        std::mt19937_64 rng(s == 0.5 ? 5 : 6);
        std::normal_distribution<double> normal(0.0, 2.0);
        constexpr std::size_t n = 50000, K = 4;
        std::vector<double> masses(n * K);
        std::vector<int> gold(n);
        for (std::size_t i = 0; i < n; ++i) {
            double z[K], p[K], q[K];
            for (double& v : z) v = normal(rng);
            const double zmax = *std::max_element(z, z + K);
            double sp = 0, sq = 0;
            for (std::size_t k = 0; k < K; ++k) {
                sp += p[k] = std::exp(z[k] - zmax);
                sq += q[k] = std::exp(s * (z[k] - zmax));
            }
            std::discrete_distribution<int> pick(p, p + K);
            gold[i] = pick(rng);
            for (std::size_t k = 0; k < K; ++k) masses[i * K + k] = q[k] / sq;
        }
        std::vector<TemperatureExample> ex(n);
        for (std::size_t i = 0; i < n; ++i) ex[i] = {std::span<const double>(&masses[i * K], K), gold[i]};
        TemperatureGrid coarse = grid;
        coarse.refine_rounds = 0;
        coarse.include_identity = false;
        const auto trace = fit_temperature(std::span<const TemperatureExample>(ex.data(), 8), coarse, true).grid_trace;
        o.require(trace.size() == 60 && std::abs(trace.front().first - 0.05) < 1e-15 &&
                      std::abs(trace.back().first - 5.0) < 1e-12,
                  "coarse trace is not 60 points spanning [0.05, 5]");
        const double t = fit_temperature(ex, grid).temperature;
        o.require(t >= 0.9 * s && t <= 1.1 * s, "s=" + fmt(s) + " fitted T=" + fmt(t));
        detail += (detail.empty() ? "" : ", ") + std::string("s=") + fmt(s) + " T=" + fmt(t);
    }
    if (o.pass) o.detail = detail + ", grid [0.05, 5] x 60";
    return o;
}

Outcome isotonic_properties()
{
    Outcome o;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ConfidencePair> pairs;
    for (int i = 0; i < 2000; ++i) {
        const double c = u(rng);
        pairs.push_back({c, u(rng) < 0.2 + 0.6 * c});
    }
    const auto model = fit_isotonic(pairs);
    std::size_t violations = 0;
    for (int i = 0; i < 10000; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        if (model.predict(a) > model.predict(b)) ++violations;
    }
    o.require(violations == 0, std::to_string(violations) + " monotonicity violations");

    // Every labelling of n <= 8 distinct inputs against every monotone
    // assignment on the grid {0, .25, .5, .75, 1}.
    std::size_t instances = 0, losses = 0;
    const double grid[] = {0, 0.25, 0.5, 0.75, 1};
    for (int n = 1; n <= 8; ++n) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            std::vector<ConfidencePair> ps;
            std::vector<double> y;
            for (int i = 0; i < n; ++i) {
                const bool c = (mask >> i) & 1u;
                ps.push_back({0.05 + 0.1 * i, c});
                y.push_back(c);
            }
            const auto m = fit_isotonic(ps);
            double pav = 0;
            for (int i = 0; i < n; ++i) pav += std::pow(y[i] - m.predict(ps[i].confidence), 2);
            double best = 1e300;
            std::vector<double> assign(n);
            std::function<void(int, int, double)> rec = [&](int i, int lo, double partial) {
                if (partial >= best) return;
                if (i == n) {
                    best = partial;
                    return;
                }
                for (int g = lo; g < 5; ++g) rec(i + 1, g, partial + (y[i] - grid[g]) * (y[i] - grid[g]));
            };
            rec(0, 0, 0.0);
            ++instances;
            if (pav > best + 1e-12) ++losses;
        }
    }
    o.require(losses == 0, std::to_string(losses) + " brute-force instances beat PAV");

    std::string detail;
    for (const auto& name : preset_names()) {
        const auto d = generate(preset_profiles(name), 2000, 13);
        std::vector<ConfidencePair> fit;
        std::vector<double> raw;
        Flags y;
        for (const auto& r : d.records) {
            raw.push_back(layer_confidence(r, d.num_layers(), d.num_choices()));
            y.push_back(r.correct());
            fit.push_back({raw.back(), r.correct()});
        }
        const auto m = fit_isotonic(fit);
        std::vector<double> cal;
        for (double c : raw) cal.push_back(m.predict(c));
        const double before = ece(raw, y, 10), after = ece(cal, y, 10);
        o.require(after <= before, name + " calibrated ece " + fmt(after) + " > raw " + fmt(before));
        detail += ", " + name + " " + fmt(before) + "->" + fmt(after);
    }
    if (o.pass) o.detail = std::to_string(instances) + " brute-force instances" + detail;
    return o;
}

Outcome layer_selection()
{
    Outcome o;
    const Dataset d = llama_dataset();
    const auto profile = layer_ece_profile(d, SplitFilter::validation, 10);
    const std::size_t best = select_best_layer(profile);
    o.require(best >= 28 && best <= 30, "best layer " + std::to_string(best));
    const auto en = select_good_layers(profile, std::string("en"));
    o.require(en.final_fallback && en.layers == std::vector<std::size_t>{32}, "English set is not the {L} sentinel");
    for (const auto& lang : profile.languages) {
        if (lang == "en") continue;
        const auto g = select_good_layers(profile, lang);
        o.require(!g.final_fallback && !g.layers.empty(), lang + " good-layer set is empty");
    }
    if (o.pass) o.detail = "best layer " + std::to_string(best) + ", en sentinel, 8 non-English sets non-empty";
    return o;
}

Outcome method_ordering()
{
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    const Dataset d = llama_dataset();
    auto macro_ece = [&](MethodKind kind, CalibratorKind cal) {
        FitOptions opt;
        opt.calibrator = cal;
        return evaluate_method(fit_method(d, kind, opt), d, 10).macro.ece;
    };
    const double fin = macro_ece(MethodKind::final_layer, CalibratorKind::none);
    const double best = macro_ece(MethodKind::best_layer, CalibratorKind::none);
    const double ens = macro_ece(MethodKind::ensemble, CalibratorKind::none);
    const double lace = macro_ece(MethodKind::lace, CalibratorKind::none);
    const double lace_iso = macro_ece(MethodKind::lace, CalibratorKind::isotonic);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(fin > best, "final <= best");
    o.require(best > ens, "best <= ensemble");
    o.require(ens > lace, "ensemble <= lace");
    o.require(lace_iso <= 0.5 * fin, "lace+isotonic above half of final");
    o.require(secs < 30.0, "took " + fmt(secs) + " s");
    const std::string values = "final " + fmt(fin) + " > best " + fmt(best) + " > ensemble " + fmt(ens) + " > lace " +
                               fmt(lace) + ", lace+isotonic " + fmt(lace_iso);
    o.detail = o.pass ? values : o.detail + " (" + values + ")";
    return o;
}

Outcome baseline_identity()
{
    Outcome o;
    const auto d = generate(preset_profiles("paper-like-llama"), 400, 21);
    const std::size_t K = d.num_choices(), L = d.num_layers();
    LaceModel m;
    m.num_layers = L;
    m.global_layers = {{L}, true};
    for (const auto& lang : d.languages()) m.languages[lang] = {200, false, {{L}, true}, {{}, lang}};
    std::size_t mismatches = 0;
    for (const auto& r : d.records) {
        if (apply_lace(m, r, K).confidence != r.layer(L, K)[r.pred]) ++mismatches;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " sentinel confidences differ");

    const auto base = build_report(score_layer(d, L, SplitFilter::test), 10);
    std::size_t checked = 0;
    for (auto kind : {MethodKind::final_layer, MethodKind::best_layer, MethodKind::ensemble, MethodKind::lace}) {
        for (auto cal : {CalibratorKind::none, CalibratorKind::temperature, CalibratorKind::isotonic}) {
            FitOptions opt;
            opt.calibrator = cal;
            const auto rep = evaluate_method(fit_method(d, kind, opt), d, 10);
            for (std::size_t i = 0; i < rep.languages.size(); ++i) {
                o.require(rep.languages[i].accuracy == base.languages[i].accuracy,
                          std::string(to_string(kind)) + " accuracy differs");
            }
            o.require(rep.macro.accuracy == base.macro.accuracy, "macro accuracy differs");
            ++checked;
        }
    }
    if (o.pass) o.detail = "sentinel bit-exact on " + std::to_string(d.records.size()) + " records, accuracy equal in " +
                           std::to_string(checked) + " method reports";
    return o;
}

Outcome correlation_oracle()
{
    Outcome o;
    std::size_t cases = 0;
    double worst = 0;
    auto check = [&](const std::vector<double>& x, const std::vector<double>& y) {
        const auto rx = rank_reference(x), ry = rank_reference(y);
        const auto p = pearson(x, y), s = spearman(x, y), k = kendall_tau_b(x, y);
        const auto pr = pearson_reference(x, y), sr = pearson_reference(rx, ry), kr = kendall_reference(x, y);
        if (!close_opt(p, pr, 1e-12) || !close_opt(s, sr, 1e-12) || !close_opt(k, kr, 1e-12)) {
            o.require(false, "mismatch at n=" + std::to_string(x.size()));
        }
        for (auto [a, b] : {std::pair{p, pr}, std::pair{s, sr}, std::pair{k, kr}}) {
            if (a && b) worst = std::max(worst, std::abs(*a - *b));
        }
        ++cases;
    };
    // Every permutation against the identity for n = 3..8.
    for (std::size_t n = 3; n <= 8; ++n) {
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 1.0);
        y = x;
        do {
            check(x, y);
        } while (std::next_permutation(y.begin(), y.end()));
    }
    // Every pair of tied patterns over three levels for n = 3..5.
    for (std::size_t n = 3; n <= 5; ++n) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= 3;
        for (std::size_t a = 0; a < total; ++a) {
            std::vector<double> x(n);
            for (std::size_t i = 0, v = a; i < n; ++i, v /= 3) x[i] = static_cast<double>(v % 3);
            for (std::size_t b = 0; b < total; ++b) {
                std::vector<double> y(n);
                for (std::size_t i = 0, v = b; i < n; ++i, v /= 3) y[i] = static_cast<double>(v % 3);
                check(x, y);
            }
        }
    }
    const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
    const double rho = *spearman(x, y), tau = *kendall_tau_b(x, y);
    o.require(rho == 0.8, "rho " + fmt(rho));
    o.require(tau == 2.0 / 3.0, "tau " + fmt(tau));
    if (o.pass) o.detail = std::to_string(cases) + " enumerated inputs, max |diff| " + fmt(worst) + ", rho=0.8 tau_b=2/3";
    return o;
}

int run_cli(const fs::path& dir, const std::string& args)
{
    const std::string cmd = "cd \"" + dir.string() + "\" && \"" + std::string(LACECAL_CLI_PATH) + "\" " + args +
                            " > cli.log 2>&1";
    return std::system(cmd.c_str());
}

std::map<std::string, std::string> tree_contents(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    }
    return out;
}

Outcome roundtrip_determinism()
{
    Outcome o;
    const fs::path tmp = fs::temp_directory_path() / ("lacecal_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    std::mt19937_64 rng(404);
    const auto presets = preset_names();
    std::size_t roundtrips = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<LanguageProfile> ps;
        if (t % 2 == 0) {
            ps = preset_profiles(presets[t / 2 % presets.size()]);
        } else {
            const std::size_t K = 2 + rng() % 5, L = 1 + rng() % 12;
            for (std::size_t k = 0; k < 1 + rng() % 4; ++k) {
                auto p = calibrated_profile("l" + std::to_string(k), 0.2 + 0.6 * (rng() % 100) / 100.0, 3.0, K, L);
                p.peak = 1 + rng() % L;
                p.delta = 0.5 + (rng() % 20) / 10.0;
                p.tau1 = 1.0 + (rng() % 30) / 10.0;
                p.noise = (rng() % 10) / 10.0;
                ps.push_back(p);
            }
        }
        const auto d = generate(ps, 1 + rng() % 12, rng());
        const fs::path file = tmp / ("rt" + std::to_string(t) + (t % 3 == 0 ? ".jsonl.gz" : ".jsonl"));
        write_records(d, file.string(), t % 3 == 0);
        const auto back = read_records(file.string());
        o.require(back.violations.empty() && back.dataset == d, "round trip " + std::to_string(t) + " differs");
        ++roundtrips;
    }

    const auto a = generate(preset_profiles("paper-like-llama"), 50, 99);
    const auto b = generate(preset_profiles("paper-like-llama"), 50, 99);
    o.require(serialize_records(a) == serialize_records(b), "simulator output differs for equal seeds");

    std::vector<std::map<std::string, std::string>> runs;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = tmp / ("cli" + std::to_string(run));
        fs::create_directories(dir);
        const char* steps[] = {
            "simulate --preset paper-like-llama --n 200 --seed 5 --out data.jsonl",
            "metrics data.jsonl --out metrics",
            "layer-sweep data.jsonl --out sweep",
            "fit data.jsonl --method lace --calibrator isotonic --out lace.json",
            "apply lace.json data.jsonl --out applied",
            "report applied/scores.csv --bootstrap 200 --seed 3 --svg --out report",
        };
        for (const char* step : steps) {
            if (run_cli(dir, step) != 0) o.require(false, std::string("cli step failed: ") + step);
        }
        fs::remove(dir / "cli.log");
        runs.push_back(tree_contents(dir));
    }
    o.require(runs[0].size() > 10, "cli wrote too few files");
    o.require(runs[0] == runs[1], "cli outputs differ between runs");
    fs::remove_all(tmp);
    if (o.pass) o.detail = std::to_string(roundtrips) + " round trips, " + std::to_string(runs[0].size()) +
                           " cli output files byte-identical";
    return o;
}

Outcome fixture_regression()
{
    Outcome o;
    const fs::path dir(LACECAL_FIXTURE_DIR);
    const auto expected = nlohmann::json::parse(read_file(dir / "fixture_expected.json"));
    const auto data = read_records((dir / "fixture_3lang_8layer.jsonl").string());
    o.require(data.violations.empty(), "fixture has violations");
    const Dataset& d = data.dataset;
    o.require(d.records.size() == 1000 && d.languages().size() == 3 && d.num_layers() == 8, "fixture shape");

    const int bins = expected.at("bins").get<int>();
    const auto rep = build_report(score_layer(d, d.num_layers(), SplitFilter::all), bins);
    double worst = 0;
    for (const auto& [lang, want] : expected.at("languages").items()) {
        const auto* row = rep.find(lang);
        if (!row) {
            o.require(false, "missing language " + lang);
            continue;
        }
        o.require(row->count == want.at("n").get<std::size_t>(), lang + " count");
        for (auto [got, key] : {std::pair{row->ece, "ece"}, std::pair{row->brier, "brier"},
                                std::pair{row->accuracy, "accuracy"}}) {
            worst = std::max(worst, std::abs(got - want.at(key).get<double>()));
        }
        o.require(row->auroc.has_value() == !want.at("auroc").is_null(), lang + " auroc definedness");
        if (row->auroc) worst = std::max(worst, std::abs(*row->auroc - want.at("auroc").get<double>()));
    }
    const auto profile = layer_ece_profile(d, SplitFilter::all, bins);
    for (const auto& [layer, cells] : expected.at("layer_ece").items()) {
        for (const auto& [lang, want] : cells.items()) {
            const double got = profile.at(std::stoul(layer), *profile.language_index(lang));
            worst = std::max(worst, std::abs(got - want.get<double>()));
        }
    }
    o.require(worst <= 1e-9, "max |diff| " + fmt(worst));
    if (o.pass) o.detail = "3 languages + 8x3 layer cells, max |diff| " + fmt(worst);
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // 0 = no runtime bound
    Outcome (*run)();
};

}  // namespace

// With arguments, runs only the listed criterion ids.
int main(int argc, char** argv)
{
    const Criterion criteria[] = {
        {1, "ece-oracle-equivalence", 1.0, ece_oracle},
        {2, "calibrated-data-sanity", 2.0, calibrated_sanity},
        {3, "auroc-pair-counting", 0.0, auroc_oracle},
        {4, "temperature-recovery", 5.0, temperature_recovery},
        {5, "isotonic-properties", 0.0, isotonic_properties},
        {6, "layer-selection", 0.0, layer_selection},
        {7, "method-ordering", 30.0, method_ordering},
        {8, "baseline-identity", 0.0, baseline_identity},
        {9, "correlation-oracles", 0.0, correlation_oracle},
        {10, "roundtrip-determinism", 0.0, roundtrip_determinism},
        {11, "fixture-regression", 0.0, fixture_regression},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
            out.pass = false;
            out.detail += "; runtime " + fmt(secs) + " s over " + fmt(c.budget_seconds) + " s";
        }
        std::printf("%s %2d %-24s %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
        std::fflush(stdout);
        failures += out.pass ? 0 : 1;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no matching criteria\n");
        return 2;
    }
    std::printf("%d/%d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
