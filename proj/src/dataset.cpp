#include "snnkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>

namespace snnkit {

Tensor Dataset::sample(std::size_t i) const {
    if (i >= size()) throw ArgumentError("dataset: sample index out of range");
    const std::size_t elems = inputs.numel() / size();
    Shape s(inputs.shape.begin() + 1, inputs.shape.end());
    return Tensor(s, std::vector<double>(inputs.data.begin() + i * elems,
                                         inputs.data.begin() + (i + 1) * elems));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    const std::size_t elems = inputs.numel() / size();
    Shape s = inputs.shape;
    s[0] = indices.size();
    Dataset out;
    out.inputs = Tensor(s);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size()) throw ArgumentError("dataset: subset index out of range");
        std::copy(inputs.data.begin() + indices[k] * elems,
                  inputs.data.begin() + (indices[k] + 1) * elems,
                  out.inputs.data.begin() + k * elems);
        out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

Dataset Dataset::head(std::size_t n) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return subset(idx);
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        throw FormatError("truncated IDX file: " + path);
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open IDX image file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot open IDX label file: " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 0x00000803) {
        throw FormatError("bad IDX image magic in " + images_path + ": got " +
                          std::to_string(img_magic) + ", want 2051");
    }
    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 0x00000801) {
        throw FormatError("bad IDX label magic in " + labels_path + ": got " +
                          std::to_string(lab_magic) + ", want 2049");
    }
    const std::uint32_t n_img = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::uint32_t n_lab = read_be32(lab, labels_path);
    if (n_img != n_lab) {
        throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images vs " +
                          std::to_string(n_lab) + " labels");
    }

    const std::size_t pixels = std::size_t(n_img) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
        throw FormatError("truncated IDX image file: " + images_path);
    }
    std::vector<unsigned char> raw_labels(n_lab);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n_lab))) {
        throw FormatError("truncated IDX label file: " + labels_path);
    }

    Dataset data;
    data.inputs = Tensor({n_img, 1, rows, cols});
    for (std::size_t i = 0; i < pixels; ++i) {
        data.inputs.data[i] = static_cast<double>(raw[i]) / 255.0;
    }
    data.labels.assign(raw_labels.begin(), raw_labels.end());
    return data;
}

void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path) {
    if (data.inputs.rank() != 4 || data.inputs.shape[1] != 1) {
        throw ArgumentError("write_idx expects [N,1,rows,cols] inputs, got " +
                            shape_str(data.inputs.shape));
    }
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot create " + images_path);
    write_be32(img, 0x00000803);
    write_be32(img, static_cast<std::uint32_t>(data.inputs.shape[0]));
    write_be32(img, static_cast<std::uint32_t>(data.inputs.shape[2]));
    write_be32(img, static_cast<std::uint32_t>(data.inputs.shape[3]));
    for (double v : data.inputs.data) {
        const double q = std::round(std::min(std::max(v, 0.0), 1.0) * 255.0);
        const unsigned char byte = static_cast<unsigned char>(q);
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot create " + labels_path);
    write_be32(lab, 0x00000801);
    write_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
    for (int l : data.labels) {
        const unsigned char byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t dim,
                      double sigma_scale) {
    if (classes == 0 || n < classes) throw ArgumentError("gen_synthetic: need n >= classes >= 1");
    if (dim == 0) throw ArgumentError("gen_synthetic: dim must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> center_dist(0.25, 0.75);

    std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
    for (auto& c : centers) {
        for (double& v : c) v = center_dist(rng);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < classes; ++a) {
        for (std::size_t b = a + 1; b < classes; ++b) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = centers[a][k] - centers[b][k];
                d2 += d * d;
            }
            min_dist = std::min(min_dist, std::sqrt(d2));
        }
    }
    // Separation is 8 sigma at sigma_scale = 1, comfortably above the
    // 4-sigma floor the blobs guarantee, so a linear classifier clears 99%.
    const double sigma = (classes > 1 ? min_dist / 8.0 : 0.1) * sigma_scale;

    std::normal_distribution<double> noise(0.0, sigma);
    Dataset data;
    data.inputs = Tensor({n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % classes;
        for (std::size_t k = 0; k < dim; ++k) {
            const double v = centers[label][k] + noise(rng);
            data.inputs.data[i * dim + k] = std::min(std::max(v, 0.0), 1.0);
        }
        data.labels.push_back(static_cast<int>(label));
    }
    return data;
}

}  // namespace snnkit
