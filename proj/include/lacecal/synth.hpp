#pragma once

// Deterministic generator of multilingual per-layer prediction records with
// controllable miscalibration and an intermediate-layer sweet spot.
//
// Per record: correctness c ~ Bernoulli(a), latent confidence q from the
// c-conditioned Beta, final confidence sigmoid(logit(q) * delta). Layers up to
// the peak carry logit noise and are tempered over a virtual vocabulary of
// `vocab` tokens with temperature tau_l; layers past the peak interpolate the
// distortion geometrically toward the final layer.

#include "lacecal/core.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lacecal {

struct BetaShape {
    double alpha = 1.0;
    double beta = 1.0;

    friend bool operator==(const BetaShape&, const BetaShape&) = default;
};

struct LanguageProfile {
    std::string language;
    double accuracy = 0.5;
    BetaShape correct_shape;    // q | correct
    BetaShape incorrect_shape;  // q | incorrect
    std::size_t peak = 1;       // sweet-spot layer, 1..L
    double tau1 = 1.0;          // temperature at layer 1
    double tau_power = 1.0;     // curvature of the decay to 1 at the peak
    double delta = 1.0;         // final-layer logit distortion
    double noise = 0.0;         // logit noise sd on non-final layers
    std::size_t num_choices = 4;
    std::size_t num_layers = 32;
    std::size_t vocab = 32000;
    double leak = 0.9;  // share of the non-predicted remainder kept on choices

    // tau_l for l = 1..L; >= 1 and equal to 1 from the peak on.
    std::vector<double> tau_curve() const;
    void validate() const;

    friend bool operator==(const LanguageProfile&, const LanguageProfile&) = default;
};

// Betas Beta(a s + 1, (1 - a) s) and Beta(a s, (1 - a) s + 1): with
// c ~ Bernoulli(a) the latent q satisfies P(correct | q) = q.
LanguageProfile calibrated_profile(std::string language, double accuracy, double concentration,
                                   std::size_t num_choices, std::size_t num_layers);

// `n` records per profile; record i of each language goes to validation when
// i is even. Pure function of (profiles, n, seed).
Dataset generate(std::span<const LanguageProfile> profiles, std::size_t n, std::uint64_t seed);

std::vector<std::string> preset_names();
std::vector<LanguageProfile> preset_profiles(std::string_view name);

nlohmann::ordered_json to_json(const LanguageProfile& profile);
LanguageProfile profile_from_json(const nlohmann::json& doc);
// Accepts a list of profiles or {"profiles": [...]}.
std::vector<LanguageProfile> profiles_from_json(const nlohmann::json& doc);

}  // namespace lacecal
