#include "crashcast/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <system_error>

#include "crashcast/errors.hpp"

namespace crashcast {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        throw NumericError("failed to format double");
    return std::string(buf, ptr);
}

double parse_double_field(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value))
        throw MalformedRowError(line_no, "invalid number '" + std::string(field) + "'");
    return value;
}

std::int64_t parse_int_field(std::string_view field, std::size_t line_no) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw MalformedRowError(line_no, "invalid integer '" + std::string(field) + "'");
    return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

LineReader::LineReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_)
        throw InputError("cannot open file: " + path);
}

bool LineReader::next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
}

std::string read_entire_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_entire_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw InputError("failed writing file: " + path);
}

} // namespace crashcast
