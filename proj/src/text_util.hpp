#pragma once

// Internal formatting helpers shared by the exporters.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lacecal::detail {

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value, std::string_view missing = "NA");

std::string csv_field(std::string_view text);
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view text);
std::string_view strip_cr(std::string_view line);

// FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace lacecal::detail
