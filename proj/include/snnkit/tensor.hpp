#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "snnkit/error.hpp"

namespace snnkit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Value semantics; data.size() always
// equals the product of shape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}
    Tensor(Shape s, std::vector<double> d);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor full(Shape s, double v);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // Row-major offset for a full multi-index.
    std::size_t offset(const std::vector<std::size_t>& idx) const;
    double& at(const std::vector<std::size_t>& idx) { return data[offset(idx)]; }
    double at(const std::vector<std::size_t>& idx) const { return data[offset(idx)]; }

    bool all_finite() const;
    double max_value() const;

    // Same data, new shape; element count must match.
    Tensor reshaped(Shape new_shape) const;
};

bool same_shape(const Tensor& a, const Tensor& b);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double l1_norm(const Tensor& t);
double l2_norm_sq(const Tensor& t);
double dot(const Tensor& a, const Tensor& b);

}  // namespace snnkit
