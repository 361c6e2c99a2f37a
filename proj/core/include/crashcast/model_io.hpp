#pragma once

#include <string>
#include <vector>

#include "crashcast/features.hpp"

namespace crashcast {

// Helpers for the shared text model-file container: one logical value line
// per tensor, space-separated shortest-round-trip decimals.

std::vector<std::string> read_model_lines(const std::string& path);

std::string format_double_line(const double* data, std::size_t n);
std::vector<double> parse_double_line(const std::string& line, std::size_t line_no);
std::vector<double> parse_double_line(const std::string& line, std::size_t line_no,
                                      std::size_t expected);

std::string format_name_line(const std::vector<std::string>& names);
std::vector<std::string> parse_name_line(const std::string& line, std::size_t line_no);

std::string format_norm_line(const NormalizationParams& params);
NormalizationParams parse_norm_line(const std::string& line, std::size_t line_no,
                                    std::size_t expected);

} // namespace crashcast
