#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nmtattack/errors.hpp"

namespace nmtattack {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s);

// Dense row-major tensor of 64-bit floats. `grad` is mutable so that a
// backward pass can deposit gradients through const references to shared
// parameters; whether that happens is controlled by requires_grad.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    mutable std::vector<double> grad;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}

    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw DimensionError("tensor data size " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    int rows() const {
        if (shape.size() != 2) throw DimensionError("rows() on tensor of shape " + shape_str(shape));
        return shape[0];
    }
    int cols() const {
        if (shape.size() != 2) throw DimensionError("cols() on tensor of shape " + shape_str(shape));
        return shape[1];
    }

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

    void set_requires_grad(bool on) {
        requires_grad = on;
        if (on)
            grad.assign(data.size(), 0.0);
        else
            grad.clear();
    }

    void zero_grad() const {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
};

}  // namespace nmtattack
