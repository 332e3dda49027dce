#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ltcs/errors.hpp"

namespace ltcs {

// Dense row-major 2-D tensor. Vectors are represented as n x 1 (columns)
// or 1 x n (rows) depending on context.
template <typename T>
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, T fill = T(0))
        : rows(r), cols(c), data(r * c, fill) {}
    Tensor2(std::size_t r, std::size_t c, std::vector<T> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) {
            throw ConfigError("Tensor2: data length " + std::to_string(data.size()) +
                              " does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols));
        }
    }

    std::size_t size() const { return rows * cols; }

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    T& at_flat(std::size_t i) { return data[i]; }
    const T& at_flat(std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor2& other) const {
        return rows == other.rows && cols == other.cols;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    bool operator==(const Tensor2& other) const {
        return rows == other.rows && cols == other.cols && data == other.data;
    }
};

template <typename T>
T max_abs_diff(const Tensor2<T>& a, const Tensor2<T>& b) {
    T worst = T(0);
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        T d = std::abs(a.data[i] - b.data[i]);
        if (d > worst) worst = d;
    }
    return worst;
}

}  // namespace ltcs
