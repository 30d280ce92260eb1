#pragma once

#include <memory>
#include <string>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

// Trainable tensor plus its gradient accumulator.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(value.shape) {}
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

enum class Mode { Train, Eval };

// ---- stateless math used by the layers and directly by callers ----

// y = W x + b, batched over all leading dimensions of x (last dim == in).
Tensor affine_forward(const Tensor& W, const Tensor& x, const Tensor& b);

// Valid cross-correlation with per-output-channel bias. x is [B,C,H,W],
// kernel is [OC,IC,kh,kw].
Tensor conv2d_forward(const Tensor& kernel, const Tensor& x, const Tensor& b, std::size_t stride);

// Non-overlapping window mean; spatial dims must be divisible by window.
Tensor avgpool2d_forward(const Tensor& x, std::size_t window);

// Element-wise min(max(x,lo),hi). Backward passes gradient where
// lo <= x <= hi, boundary inclusive.
Tensor clip_interval(const Tensor& x, double lo, double hi);
Tensor clip_interval_backward(const Tensor& x, double lo, double hi, const Tensor& upstream);

// Mean softmax cross-entropy over the batch; logits [B,C].
double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);
Tensor cross_entropy_backward(const Tensor& logits, const std::vector<int>& labels);

// a.b / (|a||b|). If either vector is all-zero the result is defined as 0
// and *zero_flag (when given) is set.
double cosine_similarity(const Tensor& a, const Tensor& b, bool* zero_flag = nullptr);
// d cos / d b with a held constant (gradient for the second argument).
Tensor cosine_similarity_backward_b(const Tensor& a, const Tensor& b);

// ---- layers ----

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual Tensor backward(const Tensor& upstream) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string kind() const = 0;
};

class AffineLayer : public Layer {
public:
    Param W;  // [out, in]
    Param b;  // [out]

    AffineLayer(std::size_t in, std::size_t out)
        : W(Tensor({out, in})), b(Tensor({out})), in_(in), out_(out) {}

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    std::vector<Param*> params() override { return {&W, &b}; }
    std::string kind() const override { return "affine"; }

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor cached_input_;
};

class Conv2dLayer : public Layer {
public:
    Param K;  // [out_ch, in_ch, k, k]
    Param b;  // [out_ch]

    Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride)
        : K(Tensor({out_ch, in_ch, kernel, kernel})),
          b(Tensor({out_ch})),
          in_ch_(in_ch),
          out_ch_(out_ch),
          kernel_(kernel),
          stride_(stride) {}

    std::size_t in_channels() const { return in_ch_; }
    std::size_t out_channels() const { return out_ch_; }
    std::size_t kernel() const { return kernel_; }
    std::size_t stride() const { return stride_; }

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    std::vector<Param*> params() override { return {&K, &b}; }
    std::string kind() const override { return "conv2d"; }

private:
    std::size_t in_ch_, out_ch_, kernel_, stride_;
    Tensor cached_input_;
};

class AvgPool2dLayer : public Layer {
public:
    explicit AvgPool2dLayer(std::size_t window) : window_(window) {}

    std::size_t window() const { return window_; }

    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    std::string kind() const override { return "avgpool2d"; }

private:
    std::size_t window_;
    Shape cached_input_shape_;
};

class ReluLayer : public Layer {
public:
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    std::string kind() const override { return "relu"; }

private:
    Tensor cached_input_;
};

// ---- optimizer ----

// Classic momentum SGD: v <- mu*v + g; value <- value - lr*v.
// Parameter order is fixed by the caller, so updates are deterministic.
class Sgd {
public:
    Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void step(const std::vector<std::pair<Param*, std::string>>& params);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_;
    double momentum_;
    std::vector<Tensor> velocity_;
};

}  // namespace snnkit
