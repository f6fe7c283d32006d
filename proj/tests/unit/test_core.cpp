#include "helpers.hpp"

#include "lacecal/core.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace lacecal;
using lacecal::test::make_dataset;
using lacecal::test::make_record;

TEST_CASE("argmax breaks ties toward the lowest index")
{
    const std::vector<double> a{0.2, 0.4, 0.4};
    CHECK(argmax(a) == 1);
    const std::vector<double> b{0.3, 0.3};
    CHECK(argmax(b) == 0);
}

TEST_CASE("well-formed dataset has no violations")
{
    auto d = make_dataset(2, 2,
                          {make_record("a", "en", 0, 0, {{0.5, 0.4}, {0.7, 0.2}}),
                           make_record("b", "en", 1, 1, {{0.1, 0.8}, {0.3, 0.6}}),
                           make_record("c", "de", 0, 1, {{0.4, 0.4}, {0.1, 0.9}}, Split::test)});
    CHECK(validate_dataset(d).empty());
}

TEST_CASE("raw-mass sum above one is one violation naming the record")
{
    auto d = make_dataset(2, 1, {make_record("ok", "en", 0, 0, {{0.6, 0.3}}), make_record("bad", "en", 0, 0, {{0.9, 0.6}})});
    const auto v = validate_dataset(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].record_id == "bad");
    CHECK(v[0].field == "layers[1]");
}

TEST_CASE("normalized mode requires unit sums within 1e-6")
{
    auto d = make_dataset(2, 1, {make_record("a", "en", 0, 0, {{0.6, 0.3}})}, true);
    CHECK(validate_dataset(d).size() == 1);
    d.records[0].masses = {0.6, 0.4 + 5e-7};
    CHECK(validate_dataset(d).empty());
}

TEST_CASE("prediction that is not the final argmax is flagged")
{
    auto d = make_dataset(3, 2, {make_record("r", "en", 0, 2, {{0.1, 0.1, 0.8}, {0.5, 0.3, 0.2}})});
    const auto v = validate_dataset(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "pred");
    CHECK(v[0].describe().find("'r'") != std::string::npos);
}

TEST_CASE("argmax tie at the final layer must go to the lowest index")
{
    auto d = make_dataset(2, 1, {make_record("r", "en", 1, 1, {{0.5, 0.5}})});
    CHECK(validate_dataset(d).size() == 1);
    d.records[0].pred = 0;
    CHECK(validate_dataset(d).empty());
}

TEST_CASE("index, entropy, id and language rules")
{
    auto d = make_dataset(2, 2,
                          {make_record("x", "en", 5, 0, {{0.5, 0.4}, {0.7, 0.2}}),
                           make_record("x", "en", 0, 0, {{0.5, 0.4}, {0.7, 0.2}}),
                           make_record("y", "en", 0, 0, {{-0.1, 0.4}, {0.7, 0.2}})});
    d.records[1].entropy = std::vector<double>{0.1};
    d.records[2].entropy = std::vector<double>{0.1, -1.0};
    d.header.languages = {"en", "fr"};
    const auto v = validate_dataset(d);
    auto has = [&](const std::string& id, const std::string& field) {
        return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.record_id == id && x.field == field; });
    };
    CHECK(has("x", "gold"));
    CHECK(has("x", "id"));
    CHECK(has("x", "entropy"));
    CHECK(has("y", "entropy"));
    CHECK(has("y", "layers[1]"));
    CHECK(has("", "languages"));
}

TEST_CASE("wrong mass count is reported once per record")
{
    auto d = make_dataset(2, 2, {make_record("a", "en", 0, 0, {{0.5, 0.4}})});
    const auto v = validate_dataset(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "layers");
}

TEST_CASE("degenerate header is a dataset-level violation")
{
    auto d = make_dataset(1, 0, {});
    CHECK(validate_dataset(d).size() == 2);
}

TEST_CASE("validation is order-insensitive")
{
    std::vector<PredictionRecord> recs;
    for (int i = 0; i < 30; ++i) {
        const double m = (i % 7) / 6.0;
        recs.push_back(make_record("r" + std::to_string(i % 25), i % 2 ? "en" : "de", 0, i % 3 == 0 ? 1 : 0,
                                   {{m, 1.0 - m}, {0.6, 0.3 + (i % 4) * 0.1}}));
    }
    auto d = make_dataset(2, 2, recs);
    auto base = validate_dataset(d);
    std::sort(base.begin(), base.end());
    REQUIRE_FALSE(base.empty());
    std::mt19937 rng(3);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(d.records.begin(), d.records.end(), rng);
        auto v = validate_dataset(d);
        std::sort(v.begin(), v.end());
        CHECK(v == base);
    }
}

TEST_CASE("layer confidence reads the final prediction at the requested layer")
{
    const auto r = make_record("a", "en", 0, 1, {{0.2, 0.2, 0.3, 0.3}, {0.1, 0.3, 0.05, 0.05}, {0.1, 0.6, 0.2, 0.1}});
    CHECK(layer_confidence(r, 2, 4) == 0.3);
    CHECK(layer_confidence(r, 3, 4) == 0.6);
    CHECK_THROWS_AS(layer_confidence(r, 0, 4), Error);
    CHECK_THROWS_AS(layer_confidence(r, 4, 4), Error);
    const auto u = make_record("u", "en", 0, 3, {{0.25, 0.25, 0.25, 0.25}});
    CHECK(layer_confidence(u, 1, 4) == 0.25);
}

TEST_CASE("split parsing and filtering")
{
    CHECK(parse_split("validation") == Split::validation);
    CHECK(parse_split("test") == Split::test);
    CHECK_THROWS_AS(parse_split("train"), Error);
    CHECK(matches(SplitFilter::all, Split::test));
    CHECK_FALSE(matches(SplitFilter::validation, Split::test));
    auto d = make_dataset(2, 1,
                          {make_record("a", "en", 0, 0, {{0.6, 0.3}}), make_record("b", "en", 0, 0, {{0.6, 0.3}}, Split::test)});
    CHECK(select_records(d, SplitFilter::test).size() == 1);
    CHECK(select_records(d, SplitFilter::all).size() == 2);
    CHECK(d.languages() == std::vector<std::string>{"en"});
}
