#include "crashcast/model_io.hpp"

#include <cmath>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"

namespace crashcast {

std::vector<std::string> read_model_lines(const std::string& path) {
    LineReader reader(path);
    std::vector<std::string> lines;
    std::string line;
    while (reader.next(line)) lines.push_back(line);
    if (lines.empty()) throw EmptyFileError(path);
    return lines;
}

std::string format_double_line(const double* data, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += format_double(data[i]);
    }
    return out;
}

std::vector<double> parse_double_line(const std::string& line, std::size_t line_no) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t space = line.find(' ', pos);
        if (space == std::string::npos) space = line.size();
        out.push_back(parse_double_field(
            std::string_view(line).substr(pos, space - pos), line_no));
        pos = space + 1;
    }
    if (out.empty()) throw FormatError(line_no, "empty tensor line");
    for (double v : out)
        if (!std::isfinite(v)) throw FormatError(line_no, "non-finite weight");
    return out;
}

std::vector<double> parse_double_line(const std::string& line, std::size_t line_no,
                                      std::size_t expected) {
    auto out = parse_double_line(line, line_no);
    if (out.size() != expected)
        throw FormatError(line_no, "expected " + std::to_string(expected) + " values, got " +
                                       std::to_string(out.size()));
    return out;
}

std::string format_name_line(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> parse_name_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> names;
    for (auto field : split_fields(line)) {
        if (field.empty()) throw FormatError(line_no, "empty feature name");
        names.emplace_back(field);
    }
    return names;
}

std::string format_norm_line(const NormalizationParams& params) {
    std::string out;
    for (std::size_t f = 0; f < params.min.size(); ++f) {
        if (f) out += ' ';
        out += format_double(params.min[f]);
        out += ',';
        out += format_double(params.max[f]);
    }
    return out;
}

NormalizationParams parse_norm_line(const std::string& line, std::size_t line_no,
                                    std::size_t expected) {
    NormalizationParams p;
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t space = line.find(' ', pos);
        if (space == std::string::npos) space = line.size();
        std::string_view pair = std::string_view(line).substr(pos, space - pos);
        std::size_t comma = pair.find(',');
        if (comma == std::string_view::npos)
            throw FormatError(line_no, "normalization entries must be min,max pairs");
        double lo = parse_double_field(pair.substr(0, comma), line_no);
        double hi = parse_double_field(pair.substr(comma + 1), line_no);
        if (hi < lo) throw FormatError(line_no, "normalization max below min");
        p.min.push_back(lo);
        p.max.push_back(hi);
        p.constant.push_back(hi == lo ? 1 : 0);
        pos = space + 1;
    }
    if (p.min.size() != expected)
        throw FormatError(line_no, "expected " + std::to_string(expected) +
                                       " normalization pairs, got " + std::to_string(p.min.size()));
    return p;
}

} // namespace crashcast
