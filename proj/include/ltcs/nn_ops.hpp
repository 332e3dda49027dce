#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ltcs/errors.hpp"

namespace ltcs {

// SmeLU: smooth ReLU with a quadratic transition of half-width beta.
//   x <= -beta        -> 0
//   -beta < x < beta  -> (x + beta)^2 / (4 beta)
//   x >= beta         -> x
template <typename T>
T smelu(T x, T beta) {
    if (!(beta > T(0))) {
        throw ConfigError("smelu: beta must be positive, got " + std::to_string(static_cast<double>(beta)));
    }
    if (x <= -beta) return T(0);
    if (x >= beta) return x;
    const T t = x + beta;
    return t * t / (T(4) * beta);
}

template <typename T>
T smelu_derivative(T x, T beta) {
    if (!(beta > T(0))) {
        throw ConfigError("smelu_derivative: beta must be positive");
    }
    if (x <= -beta) return T(0);
    if (x >= beta) return T(1);
    return (x + beta) / (T(2) * beta);
}

// Max-subtraction stabilized softmax.
template <typename T>
std::vector<T> softmax(const std::vector<T>& v) {
    if (v.empty()) throw ConfigError("softmax: empty input");
    T hi = *std::max_element(v.begin(), v.end());
    std::vector<T> out(v.size());
    T sum = T(0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - hi);
        sum += out[i];
    }
    for (T& x : out) x /= sum;
    return out;
}

// log(sum(exp(v))), max-stabilized.
template <typename T>
T log_sum_exp(const std::vector<T>& v) {
    if (v.empty()) throw ConfigError("log_sum_exp: empty input");
    T hi = *std::max_element(v.begin(), v.end());
    T sum = T(0);
    for (const T& x : v) sum += std::exp(x - hi);
    return hi + std::log(sum);
}

// y = gain * (v - mean) / sqrt(var + eps) + bias, mean/var over the vector.
// Population variance (divide by length).
template <typename T>
std::vector<T> layer_norm(const std::vector<T>& v, const std::vector<T>& gain,
                          const std::vector<T>& bias, T eps) {
    if (gain.size() != v.size() || bias.size() != v.size()) {
        throw ConfigError("layer_norm: gain/bias length must match input length " +
                          std::to_string(v.size()));
    }
    const std::size_t n = v.size();
    T mean = T(0);
    for (const T& x : v) mean += x;
    mean /= static_cast<T>(n);
    T var = T(0);
    for (const T& x : v) var += (x - mean) * (x - mean);
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + eps);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = gain[i] * (v[i] - mean) * inv + bias[i];
    }
    return out;
}

}  // namespace ltcs
