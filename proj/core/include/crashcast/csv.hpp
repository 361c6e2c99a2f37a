#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace crashcast {

// Shortest decimal string that round-trips back to the same double.
// All emitted files go through this so output bytes are stable.
std::string format_double(double v);

// Strict numeric parsing: the whole field must be consumed.
double parse_double_field(std::string_view field, std::size_t line_no);
std::int64_t parse_int_field(std::string_view field, std::size_t line_no);

// Split one CSV line on commas. Fields in this toolkit never contain
// commas or quotes, so no quoting rules apply.
std::vector<std::string_view> split_fields(std::string_view line);

// Buffered line-at-a-time reader. Strips a trailing '\r' so CRLF input
// parses the same as LF.
class LineReader {
public:
    explicit LineReader(const std::string& path);
    bool next(std::string& line);
    std::size_t line_no() const { return line_no_; }

private:
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

std::string read_entire_file(const std::string& path);
void write_entire_file(const std::string& path, const std::string& content);

} // namespace crashcast
