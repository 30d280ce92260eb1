#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

struct Dataset {
    Tensor inputs;            // [N, ...], values in [0,1]
    std::vector<int> labels;  // length N

    std::size_t size() const { return labels.size(); }
    Tensor sample(std::size_t i) const;
    Dataset subset(const std::vector<std::size_t>& indices) const;
    Dataset head(std::size_t n) const;
};

// MNIST-style IDX pair: images magic 0x00000803, labels magic 0x00000801,
// big-endian dimensions, pixels scaled to [0,1] by /255. Output shape is
// [N, 1, rows, cols].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_idx: quantizes values to bytes with round(v*255).
void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path);

// Gaussian class blobs in [0,1]^dim with round-robin labels. At
// sigma_scale = 1 the centers are at least 4 sigma apart; larger values
// blur the classes for harder tasks.
Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t dim,
                      double sigma_scale = 1.0);

}  // namespace snnkit
