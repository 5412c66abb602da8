#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "adaloc/errors.hpp"

namespace adaloc {

// Dense row-major tensor of doubles. Shape product must equal data length.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)), data(count(shape), 0.0) {}

    Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != data.size()) throw DimensionError("tensor shape does not match data length");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t size() const { return data.size(); }
    size_t rank() const { return shape.size(); }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    // 2-D accessors for weight matrices [rows, cols].
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(size_t r, size_t c) { return data[r * cols() + c]; }
    double at(size_t r, size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

double l2_norm(const Tensor& t);
double l1_norm(const Tensor& t);
void check_finite(const Tensor& t, const char* context);

}  // namespace adaloc
