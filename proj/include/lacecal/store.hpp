#pragma once

// Line-delimited JSON record files. Line 1 is the header object; every
// following line is one record. Files may be gzip-compressed; readers detect
// compression from the magic bytes and accept LF or CRLF line endings.

#include "lacecal/core.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lacecal {

struct ReadResult {
    Dataset dataset;
    std::vector<Violation> violations;
};

// Serialized text of a dataset. Floats use shortest round-trip decimals.
std::string serialize_records(const Dataset& dataset);

// Refuses datasets with violations. Returns the number of bytes written.
std::size_t write_records(const Dataset& dataset, const std::string& path, bool gzip = false);

// `source` names the input in error messages.
ReadResult parse_records(std::string_view text, const std::string& source = "<memory>");
ReadResult read_records(const std::string& path);

// Raw file bytes, inflated when gzip-compressed.
std::string read_maybe_gzip(const std::string& path);

}  // namespace lacecal
