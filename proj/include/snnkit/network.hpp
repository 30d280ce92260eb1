#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "snnkit/nn.hpp"
#include "snnkit/rate_norm.hpp"

namespace snnkit {

// Declarative layer description; dimensions depend on kind.
struct LayerSpec {
    std::string kind;  // affine | conv2d | avgpool2d | rate_norm | relu
    std::size_t in = 0, out = 0;                       // affine
    std::size_t in_ch = 0, out_ch = 0, kernel = 0;     // conv2d
    std::size_t stride = 1;                            // conv2d
    std::size_t window = 0;                            // avgpool2d
};

// Feed-forward stack of layers. Inputs of rank > 2 are flattened to
// [batch, features] before an affine layer; the reshape is undone on the
// way back.
class Network {
public:
    std::vector<std::unique_ptr<Layer>> layers;

    Tensor forward(const Tensor& x, Mode mode);
    // Gradient of the loss w.r.t. every parameter. `output_injections` adds
    // extra upstream gradient at the named layers' outputs (used by losses
    // with mid-network terms such as the rate inference loss).
    void backward(const Tensor& upstream, const std::map<std::size_t, Tensor>& output_injections = {});
    void zero_grad();

    std::vector<std::pair<Param*, std::string>> param_entries();
    std::vector<RateNormLayer*> rate_norm_layers();
    std::vector<std::size_t> rate_norm_indices() const;

    // Output of layer i from the most recent forward.
    const Tensor& layer_output(std::size_t i) const { return outputs_.at(i); }
    std::size_t size() const { return layers.size(); }

private:
    std::vector<Tensor> outputs_;
    std::vector<Shape> pre_flatten_shapes_;  // empty shape = no flatten at that layer
    bool has_forward_ = false;
};

// Construct a network from specs; weights are initialized uniform in
// +-sqrt(6/(fan_in+fan_out)) from the given seed.
Network build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed);

std::vector<LayerSpec> network_specs(const Network& net);

// Max over sampled parameters of the relative error between analytic
// gradients of the cross-entropy loss and central differences.
double grad_check(Network& net, const Tensor& x, const std::vector<int>& labels, double eps,
                  std::size_t max_samples = 200, std::uint64_t seed = 0);

}  // namespace snnkit
