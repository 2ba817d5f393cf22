#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace epiquota::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Minimal RFC-4180 style reader: comma separated, double-quoted fields may
// contain commas and doubled quotes. Lines end with \n or \r\n.
class CsvReader {
public:
    explicit CsvReader(std::string text) : text_(std::move(text)) {}

    // Returns false at end of input.
    bool next_row(std::vector<std::string>& fields);
    std::size_t line() const noexcept { return line_; }

private:
    std::string text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

std::string trim(std::string_view s);

// Strict number parsing; throws InputError naming `field` on garbage.
double parse_double(std::string_view s, const std::string& field);
long long parse_int(std::string_view s, const std::string& field);

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

}  // namespace epiquota::io
