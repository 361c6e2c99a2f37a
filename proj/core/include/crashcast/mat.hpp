#pragma once

#include <cstddef>
#include <vector>

#include "crashcast/errors.hpp"

namespace crashcast {

// Dense row-major matrix of doubles. Deliberately minimal: the training code
// needs shape-checked storage and elementwise access, nothing more.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }

    void require_shape(std::size_t r, std::size_t c, const char* what) const {
        if (rows != r || cols != c)
            throw DimensionMismatchError(std::string(what) + ": expected " +
                                         std::to_string(r) + "x" + std::to_string(c) +
                                         ", got " + std::to_string(rows) + "x" +
                                         std::to_string(cols));
    }
};

} // namespace crashcast
