#pragma once

// Domain types shared by every module: per-example, per-layer choice
// probability records and the dataset that holds them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lacecal {

enum class Errc : int {
    invalid_argument = 1,
    io = 2,
    parse = 3,
    data = 4,
    undefined = 5,
    internal = 6,
};

// Every failure raised by the library carries one of the codes above so the
// C boundary can map it without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

enum class Split : std::uint8_t { validation, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// Which records an operation reads. `all` ignores split tags.
enum class SplitFilter : std::uint8_t { all, validation, test };

SplitFilter parse_split_filter(std::string_view text);
bool matches(SplitFilter filter, Split split);

// Masses over the K answer choices. In raw-vocab-mass mode the entries are
// the vocabulary probabilities of the choice tokens, so they may sum below 1.
struct ChoiceDistribution {
    std::vector<double> masses;

    std::size_t size() const { return masses.size(); }
    double sum() const;
    friend bool operator==(const ChoiceDistribution&, const ChoiceDistribution&) = default;
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> masses);

struct PredictionRecord {
    std::string id;
    std::string language;
    int gold = 0;
    int pred = 0;  // final-layer prediction
    Split split = Split::validation;
    // Row-major [layer][choice], layers 1..L stored at rows 0..L-1.
    std::vector<double> masses;
    std::optional<std::vector<double>> entropy;

    std::size_t num_layers(std::size_t num_choices) const
    {
        return num_choices == 0 ? 0 : masses.size() / num_choices;
    }

    // `layer` is 1-based; layer L is the final layer.
    std::span<const double> layer(std::size_t layer, std::size_t num_choices) const;
    std::span<double> layer(std::size_t layer, std::size_t num_choices);

    bool correct() const { return gold == pred; }

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

struct DatasetHeader {
    int format_version = 1;
    std::size_t num_choices = 0;  // K
    std::size_t num_layers = 0;   // L
    bool normalized = false;
    std::string model;
    std::string benchmark;
    std::vector<std::string> choice_labels;
    // Optional. When non-empty each listed language must own a record.
    std::vector<std::string> languages;

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<PredictionRecord> records;

    std::size_t num_choices() const { return header.num_choices; }
    std::size_t num_layers() const { return header.num_layers; }

    // Sorted, de-duplicated language tags present in the records.
    std::vector<std::string> languages() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Violation {
    std::string record_id;  // empty for dataset-level rules
    std::string field;
    std::string rule;

    std::string describe() const;
    friend bool operator==(const Violation&, const Violation&) = default;
    friend auto operator<=>(const Violation&, const Violation&) = default;
};

inline constexpr double kRawMassSlack = 1e-9;
inline constexpr double kNormalizedSlack = 1e-6;

std::vector<Violation> validate_dataset(const Dataset& dataset);

// Mass the given layer puts on the final prediction. Throws on an
// out-of-range layer.
double layer_confidence(const PredictionRecord& record, std::size_t layer, std::size_t num_choices);

// Records passing the split filter, in dataset order.
std::vector<const PredictionRecord*> select_records(const Dataset& dataset, SplitFilter filter);

}  // namespace lacecal
