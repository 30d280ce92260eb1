#include "snnkit/nn.hpp"

#include <algorithm>
#include <cmath>

namespace snnkit {

Tensor affine_forward(const Tensor& W, const Tensor& x, const Tensor& b) {
    if (W.rank() != 2) {
        throw DimensionError("affine: weight must be 2-D, got " + shape_str(W.shape));
    }
    const std::size_t out = W.shape[0];
    const std::size_t in = W.shape[1];
    if (x.rank() == 0 || x.shape.back() != in) {
        throw DimensionError("affine: input " + shape_str(x.shape) + " incompatible with weight " +
                             shape_str(W.shape));
    }
    if (b.numel() != out) {
        throw DimensionError("affine: bias " + shape_str(b.shape) + " incompatible with weight " +
                             shape_str(W.shape));
    }
    const std::size_t batch = x.numel() / in;
    Shape out_shape = x.shape;
    out_shape.back() = out;
    Tensor y(out_shape);
    for (std::size_t n = 0; n < batch; ++n) {
        const double* xv = x.data.data() + n * in;
        double* yv = y.data.data() + n * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = W.data.data() + o * in;
            double acc = b.data[o];
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * xv[i];
            yv[o] = acc;
        }
    }
    return y;
}

Tensor conv2d_forward(const Tensor& kernel, const Tensor& x, const Tensor& b, std::size_t stride) {
    if (kernel.rank() != 4 || x.rank() != 4) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape) + " and input " +
                             shape_str(x.shape) + " must be 4-D");
    }
    if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
    const std::size_t oc = kernel.shape[0], ic = kernel.shape[1];
    const std::size_t kh = kernel.shape[2], kw = kernel.shape[3];
    const std::size_t batch = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (c != ic) {
        throw DimensionError("conv2d: input channels " + std::to_string(c) +
                             " vs kernel channels " + std::to_string(ic));
    }
    if (kh > h || kw > w) {
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape) +
                             " larger than input " + shape_str(x.shape));
    }
    if (b.numel() != oc) {
        throw DimensionError("conv2d: bias length " + std::to_string(b.numel()) +
                             " vs output channels " + std::to_string(oc));
    }
    const std::size_t oh = (h - kh) / stride + 1;
    const std::size_t ow = (w - kw) / stride + 1;
    Tensor y({batch, oc, oh, ow});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    double acc = b.data[o];
                    for (std::size_t ci = 0; ci < ic; ++ci) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const double* row =
                                x.data.data() + ((n * c + ci) * h + yy * stride + ky) * w + xx * stride;
                            const double* krow =
                                kernel.data.data() + ((o * ic + ci) * kh + ky) * kw;
                            for (std::size_t kx = 0; kx < kw; ++kx) acc += krow[kx] * row[kx];
                        }
                    }
                    y.data[((n * oc + o) * oh + yy) * ow + xx] = acc;
                }
            }
        }
    }
    return y;
}

Tensor avgpool2d_forward(const Tensor& x, std::size_t window) {
    if (x.rank() != 4) {
        throw DimensionError("avgpool2d: input must be 4-D, got " + shape_str(x.shape));
    }
    if (window == 0) throw ArgumentError("avgpool2d: window must be positive");
    const std::size_t batch = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (h % window != 0 || w % window != 0) {
        throw DimensionError("avgpool2d: spatial dims of " + shape_str(x.shape) +
                             " not divisible by window " + std::to_string(window));
    }
    const std::size_t oh = h / window, ow = w / window;
    const double inv = 1.0 / static_cast<double>(window * window);
    Tensor y({batch, c, oh, ow});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    double acc = 0.0;
                    for (std::size_t dy = 0; dy < window; ++dy) {
                        const double* row =
                            x.data.data() + ((n * c + ci) * h + yy * window + dy) * w + xx * window;
                        for (std::size_t dx = 0; dx < window; ++dx) acc += row[dx];
                    }
                    y.data[((n * c + ci) * oh + yy) * ow + xx] = acc * inv;
                }
            }
        }
    }
    return y;
}

Tensor clip_interval(const Tensor& x, double lo, double hi) {
    if (lo > hi) {
        throw ArgumentError("clip: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
    }
    Tensor y = x;
    for (double& v : y.data) v = std::min(std::max(v, lo), hi);
    return y;
}

Tensor clip_interval_backward(const Tensor& x, double lo, double hi, const Tensor& upstream) {
    if (lo > hi) {
        throw ArgumentError("clip: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
    }
    require_same_shape(x, upstream, "clip backward");
    Tensor dx(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        dx.data[i] = (x.data[i] >= lo && x.data[i] <= hi) ? upstream.data[i] : 0.0;
    }
    return dx;
}

double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw DimensionError("cross_entropy: logits must be [batch,classes], got " +
                             shape_str(logits.shape));
    }
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    if (labels.size() != batch) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(batch) + " rows");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
        if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
            throw ArgumentError("cross_entropy: label " + std::to_string(labels[n]) +
                                " out of range for " + std::to_string(classes) + " classes");
        }
        const double* row = logits.data.data() + n * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
        total += std::log(sum) + m - row[static_cast<std::size_t>(labels[n])];
    }
    return total / static_cast<double>(batch);
}

Tensor cross_entropy_backward(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    Tensor d(logits.shape);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t n = 0; n < batch; ++n) {
        const double* row = logits.data.data() + n * classes;
        double* drow = d.data.data() + n * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
        for (std::size_t c = 0; c < classes; ++c) drow[c] = std::exp(row[c] - m) / sum * inv_batch;
        drow[static_cast<std::size_t>(labels[n])] -= inv_batch;
    }
    return d;
}

double cosine_similarity(const Tensor& a, const Tensor& b, bool* zero_flag) {
    require_same_shape(a, b, "cosine_similarity");
    const double na = std::sqrt(l2_norm_sq(a));
    const double nb = std::sqrt(l2_norm_sq(b));
    if (zero_flag) *zero_flag = false;
    if (na == 0.0 || nb == 0.0) {
        // Collapsed vector: defined as 0 so early-training outputs do not abort.
        if (zero_flag) *zero_flag = true;
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

Tensor cosine_similarity_backward_b(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "cosine_similarity");
    const double na = std::sqrt(l2_norm_sq(a));
    const double nb = std::sqrt(l2_norm_sq(b));
    Tensor d(b.shape);
    if (na == 0.0 || nb == 0.0) return d;
    const double ab = dot(a, b);
    for (std::size_t i = 0; i < b.numel(); ++i) {
        d.data[i] = a.data[i] / (na * nb) - ab * b.data[i] / (na * nb * nb * nb);
    }
    return d;
}

// ---- layers ----

Tensor AffineLayer::forward(const Tensor& x, Mode) {
    cached_input_ = x;
    return affine_forward(W.value, x, b.value);
}

Tensor AffineLayer::backward(const Tensor& upstream) {
    const Tensor& x = cached_input_;
    if (x.numel() == 0) throw StateError("affine: backward before forward");
    const std::size_t batch = x.numel() / in_;
    Tensor dx(x.shape);
    for (std::size_t n = 0; n < batch; ++n) {
        const double* xv = x.data.data() + n * in_;
        const double* u = upstream.data.data() + n * out_;
        double* dxv = dx.data.data() + n * in_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double uo = u[o];
            double* wgrad = W.grad.data.data() + o * in_;
            const double* w = W.value.data.data() + o * in_;
            b.grad.data[o] += uo;
            for (std::size_t i = 0; i < in_; ++i) {
                wgrad[i] += uo * xv[i];
                dxv[i] += uo * w[i];
            }
        }
    }
    return dx;
}

Tensor Conv2dLayer::forward(const Tensor& x, Mode) {
    cached_input_ = x;
    return conv2d_forward(K.value, x, b.value, stride_);
}

Tensor Conv2dLayer::backward(const Tensor& upstream) {
    const Tensor& x = cached_input_;
    if (x.numel() == 0) throw StateError("conv2d: backward before forward");
    const std::size_t batch = x.shape[0], h = x.shape[2], w = x.shape[3];
    const std::size_t oh = upstream.shape[2], ow = upstream.shape[3];
    Tensor dx(x.shape);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < out_ch_; ++o) {
            for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    const double u = upstream.data[((n * out_ch_ + o) * oh + yy) * ow + xx];
                    if (u == 0.0) continue;
                    b.grad.data[o] += u;
                    for (std::size_t ci = 0; ci < in_ch_; ++ci) {
                        for (std::size_t ky = 0; ky < kernel_; ++ky) {
                            const std::size_t iy = yy * stride_ + ky;
                            const double* xrow = x.data.data() + ((n * in_ch_ + ci) * h + iy) * w;
                            double* dxrow = dx.data.data() + ((n * in_ch_ + ci) * h + iy) * w;
                            double* kgrad =
                                K.grad.data.data() + ((o * in_ch_ + ci) * kernel_ + ky) * kernel_;
                            const double* kval =
                                K.value.data.data() + ((o * in_ch_ + ci) * kernel_ + ky) * kernel_;
                            for (std::size_t kx = 0; kx < kernel_; ++kx) {
                                const std::size_t ix = xx * stride_ + kx;
                                kgrad[kx] += u * xrow[ix];
                                dxrow[ix] += u * kval[kx];
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

Tensor AvgPool2dLayer::forward(const Tensor& x, Mode) {
    cached_input_shape_ = x.shape;
    return avgpool2d_forward(x, window_);
}

Tensor AvgPool2dLayer::backward(const Tensor& upstream) {
    if (cached_input_shape_.empty()) throw StateError("avgpool2d: backward before forward");
    const Shape& s = cached_input_shape_;
    const std::size_t batch = s[0], c = s[1], h = s[2], w = s[3];
    const std::size_t oh = h / window_, ow = w / window_;
    const double inv = 1.0 / static_cast<double>(window_ * window_);
    Tensor dx(s);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    const double u = upstream.data[((n * c + ci) * oh + yy) * ow + xx] * inv;
                    for (std::size_t dy = 0; dy < window_; ++dy) {
                        double* row =
                            dx.data.data() + ((n * c + ci) * h + yy * window_ + dy) * w + xx * window_;
                        for (std::size_t dxi = 0; dxi < window_; ++dxi) row[dxi] += u;
                    }
                }
            }
        }
    }
    return dx;
}

Tensor ReluLayer::forward(const Tensor& x, Mode) {
    cached_input_ = x;
    Tensor y = x;
    for (double& v : y.data) v = std::max(v, 0.0);
    return y;
}

Tensor ReluLayer::backward(const Tensor& upstream) {
    if (cached_input_.numel() == 0) throw StateError("relu: backward before forward");
    Tensor dx(cached_input_.shape);
    for (std::size_t i = 0; i < dx.numel(); ++i) {
        dx.data[i] = cached_input_.data[i] > 0.0 ? upstream.data[i] : 0.0;
    }
    return dx;
}

void Sgd::step(const std::vector<std::pair<Param*, std::string>>& params) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const auto& [p, name] : params) velocity_.emplace_back(p->value.shape);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param* p = params[k].first;
        Tensor& v = velocity_[k];
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i];
            if (!std::isfinite(g)) {
                throw TrainingError("non-finite gradient in " + params[k].second);
            }
            v.data[i] = momentum_ * v.data[i] + g;
            p->value.data[i] -= lr_ * v.data[i];
        }
    }
}

}  // namespace snnkit
