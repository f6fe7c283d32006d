#include "lacecal/store.hpp"

#include "text_util.hpp"

#include <json.hpp>
#include <zlib.h>

namespace lacecal {

namespace {

using ojson = nlohmann::ordered_json;

std::string gzip_compress(std::string_view data)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        fail(Errc::internal, "deflateInit2 failed");
    }
    std::string out;
    out.resize(deflateBound(&zs, static_cast<uLong>(data.size())));
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) fail(Errc::internal, "gzip compression failed");
    out.resize(zs.total_out);
    return out;
}

std::string gzip_decompress(std::string_view data, const std::string& path)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) fail(Errc::internal, "inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    std::string out;
    char buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            fail(Errc::parse, "'" + path + "': corrupt gzip stream");
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            fail(Errc::parse, "'" + path + "': truncated gzip stream");
        }
    }
    inflateEnd(&zs);
    return out;
}

ojson header_json(const DatasetHeader& h)
{
    ojson j;
    j["format_version"] = h.format_version;
    j["K"] = h.num_choices;
    j["L"] = h.num_layers;
    j["normalized"] = h.normalized;
    j["model"] = h.model;
    j["benchmark"] = h.benchmark;
    j["choice_labels"] = h.choice_labels;
    if (!h.languages.empty()) j["languages"] = h.languages;
    return j;
}

ojson record_json(const PredictionRecord& r, std::size_t K, std::size_t L)
{
    ojson j;
    j["id"] = r.id;
    j["lang"] = r.language;
    j["gold"] = r.gold;
    j["pred"] = r.pred;
    j["split"] = std::string(to_string(r.split));
    ojson layers = ojson::array();
    for (std::size_t l = 1; l <= L; ++l) {
        const auto row = r.layer(l, K);
        layers.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["layers"] = std::move(layers);
    if (r.entropy) j["entropy"] = *r.entropy;
    return j;
}

[[noreturn]] void line_error(Errc code, const std::string& source, std::size_t line, const std::string& what)
{
    fail(code, source + ": line " + std::to_string(line) + ": " + what);
}

DatasetHeader parse_header(const nlohmann::json& j, const std::string& source)
{
    if (!j.is_object()) line_error(Errc::parse, source, 1, "header must be a JSON object");
    DatasetHeader h;
    try {
        h.format_version = j.at("format_version").get<int>();
        if (h.format_version != 1) {
            line_error(Errc::parse, source, 1, "unsupported format_version " + std::to_string(h.format_version));
        }
        const long long K = j.at("K").get<long long>();
        const long long L = j.at("L").get<long long>();
        if (K < 2) line_error(Errc::parse, source, 1, "K must be at least 2");
        if (L < 1) line_error(Errc::parse, source, 1, "L must be at least 1");
        h.num_choices = static_cast<std::size_t>(K);
        h.num_layers = static_cast<std::size_t>(L);
        h.normalized = j.value("normalized", false);
        h.model = j.value("model", "");
        h.benchmark = j.value("benchmark", "");
        if (j.contains("choice_labels")) h.choice_labels = j.at("choice_labels").get<std::vector<std::string>>();
        if (j.contains("languages")) h.languages = j.at("languages").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        line_error(Errc::parse, source, 1, std::string("bad header: ") + e.what());
    }
    return h;
}

PredictionRecord parse_record(const nlohmann::json& j, const DatasetHeader& h, const std::string& source,
                              std::size_t line)
{
    if (!j.is_object()) line_error(Errc::parse, source, line, "record must be a JSON object");
    PredictionRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.language = j.at("lang").get<std::string>();
        r.gold = j.at("gold").get<int>();
        r.pred = j.at("pred").get<int>();
        r.split = parse_split(j.at("split").get<std::string>());
        const auto& layers = j.at("layers");
        if (!layers.is_array() || layers.size() != h.num_layers) {
            line_error(Errc::data, source, line,
                       "record has " + std::to_string(layers.is_array() ? layers.size() : 0) +
                           " layers but the header declares L=" + std::to_string(h.num_layers));
        }
        r.masses.reserve(h.num_layers * h.num_choices);
        for (const auto& row : layers) {
            if (!row.is_array() || row.size() != h.num_choices) {
                line_error(Errc::data, source, line,
                           "layer has " + std::to_string(row.is_array() ? row.size() : 0) +
                               " choices but the header declares K=" + std::to_string(h.num_choices));
            }
            for (const auto& v : row) r.masses.push_back(v.get<double>());
        }
        if (j.contains("entropy") && !j.at("entropy").is_null()) {
            r.entropy = j.at("entropy").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        line_error(Errc::parse, source, line, std::string("bad record: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_argument) line_error(Errc::parse, source, line, e.what());
        throw;
    }
    return r;
}

}  // namespace

std::string serialize_records(const Dataset& dataset)
{
    const std::size_t K = dataset.num_choices(), L = dataset.num_layers();
    std::string out = header_json(dataset.header).dump();
    out += '\n';
    for (const auto& r : dataset.records) {
        if (r.masses.size() != K * L) fail(Errc::invalid_argument, "record '" + r.id + "' does not match K x L");
        out += record_json(r, K, L).dump();
        out += '\n';
    }
    return out;
}

std::size_t write_records(const Dataset& dataset, const std::string& path, bool gzip)
{
    const auto violations = validate_dataset(dataset);
    if (!violations.empty()) {
        fail(Errc::data, "refusing to write '" + path + "': " + std::to_string(violations.size()) +
                             " violation(s), first: " + violations.front().describe());
    }
    std::string text = serialize_records(dataset);
    if (gzip) text = gzip_compress(text);
    detail::write_text_file(path, text);
    return text.size();
}

ReadResult parse_records(std::string_view text, const std::string& source)
{
    ReadResult result;
    std::size_t pos = 0, line_no = 0;
    bool have_header = false;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = detail::strip_cr(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (detail::trim(line).empty()) {
            if (!have_header) line_error(Errc::parse, source, line_no, "missing header line");
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            line_error(Errc::parse, source, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!have_header) {
            result.dataset.header = parse_header(j, source);
            have_header = true;
            continue;
        }
        result.dataset.records.push_back(parse_record(j, result.dataset.header, source, line_no));
    }
    if (!have_header) fail(Errc::parse, source + ": empty file (no header)");
    result.violations = validate_dataset(result.dataset);
    return result;
}

std::string read_maybe_gzip(const std::string& path)
{
    std::string raw = detail::read_text_file(path);
    if (raw.size() >= 2 && static_cast<unsigned char>(raw[0]) == 0x1f && static_cast<unsigned char>(raw[1]) == 0x8b) {
        return gzip_decompress(raw, path);
    }
    return raw;
}

ReadResult read_records(const std::string& path)
{
    const std::string text = read_maybe_gzip(path);
    return parse_records(text, path);
}

}  // namespace lacecal
