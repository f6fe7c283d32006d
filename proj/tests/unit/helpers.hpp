#pragma once

#include "lacecal/core.hpp"

#include <string>
#include <vector>

namespace lacecal::test {

inline PredictionRecord make_record(std::string id, std::string lang, int gold, int pred,
                                    const std::vector<std::vector<double>>& layers, Split split = Split::validation)
{
    PredictionRecord r;
    r.id = std::move(id);
    r.language = std::move(lang);
    r.gold = gold;
    r.pred = pred;
    r.split = split;
    for (const auto& row : layers) r.masses.insert(r.masses.end(), row.begin(), row.end());
    return r;
}

inline Dataset make_dataset(std::size_t K, std::size_t L, std::vector<PredictionRecord> records, bool normalized = false)
{
    Dataset d;
    d.header.num_choices = K;
    d.header.num_layers = L;
    d.header.normalized = normalized;
    d.header.model = "test";
    d.header.benchmark = "test";
    d.records = std::move(records);
    return d;
}

}  // namespace lacecal::test
