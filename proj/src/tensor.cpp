#include "snnkit/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace snnkit {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(Shape s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
}

std::size_t Tensor::offset(const std::vector<std::size_t>& idx) const {
    if (idx.size() != shape.size()) {
        throw DimensionError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                             std::to_string(shape.size()));
    }
    std::size_t off = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= shape[k]) {
            throw ArgumentError("index " + std::to_string(idx[k]) + " out of bounds for dim " +
                                std::to_string(k) + " of " + shape_str(shape));
        }
        off = off * shape[k] + idx[k];
    }
    return off;
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data) m = std::max(m, v);
    return m;
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw DimensionError("cannot reshape " + shape_str(shape) + " to " + shape_str(new_shape));
    }
    return Tensor(std::move(new_shape), data);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!same_shape(a, b)) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    }
}

double l1_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += std::abs(v);
    return s;
}

double l2_norm_sq(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace snnkit
