#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bodycomp {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by (case-sensitive) header name.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC 4180-style parsing: quoted fields, doubled quotes, CRLF tolerated, blank lines skipped.
CsvTable parse_csv(std::string_view text, bool has_header = true);
CsvTable read_csv(const std::filesystem::path& path, bool has_header = true);

std::optional<double> parse_double(std::string_view text);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

/// Fixed-notation number with up to `precision` significant decimals, trailing zeros kept.
std::string format_fixed(double value, int precision = 6);

}  // namespace bodycomp
