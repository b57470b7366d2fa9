#pragma once

#include <cstddef>
#include <vector>

namespace byzsim {

// Flat, ordered list of model parameters. The common currency between
// workers, attacks and defenses.
using ParameterVector = std::vector<double>;

// Dense row-major matrix of doubles. Rows are samples almost everywhere.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool empty() const { return rows == 0 || cols == 0; }
};

} // namespace byzsim
