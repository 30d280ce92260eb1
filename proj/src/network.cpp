#include "snnkit/network.hpp"

#include <algorithm>
#include <cmath>

namespace snnkit {

Tensor Network::forward(const Tensor& x, Mode mode) {
    outputs_.assign(layers.size(), Tensor());
    pre_flatten_shapes_.assign(layers.size(), Shape());
    Tensor cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i]->kind() == "affine" && cur.rank() > 2) {
            pre_flatten_shapes_[i] = cur.shape;
            cur = cur.reshaped({cur.shape[0], cur.numel() / cur.shape[0]});
        }
        cur = layers[i]->forward(cur, mode);
        outputs_[i] = cur;
    }
    has_forward_ = true;
    return cur;
}

void Network::backward(const Tensor& upstream, const std::map<std::size_t, Tensor>& output_injections) {
    if (!has_forward_) throw StateError("network: backward before forward");
    Tensor grad = upstream;
    for (std::size_t k = layers.size(); k-- > 0;) {
        auto it = output_injections.find(k);
        if (it != output_injections.end()) {
            require_same_shape(grad, it->second, "output injection");
            for (std::size_t i = 0; i < grad.numel(); ++i) grad.data[i] += it->second.data[i];
        }
        grad = layers[k]->backward(grad);
        if (!pre_flatten_shapes_[k].empty()) {
            grad = grad.reshaped(pre_flatten_shapes_[k]);
        }
    }
}

void Network::zero_grad() {
    for (auto& [p, name] : param_entries()) p->zero_grad();
    for (RateNormLayer* r : rate_norm_layers()) r->p_state()->grad = 0.0;
}

std::vector<std::pair<Param*, std::string>> Network::param_entries() {
    std::vector<std::pair<Param*, std::string>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto ps = layers[i]->params();
        for (std::size_t k = 0; k < ps.size(); ++k) {
            out.emplace_back(ps[k], "layer " + std::to_string(i) + " (" + layers[i]->kind() +
                                        ") param " + std::to_string(k));
        }
    }
    return out;
}

std::vector<RateNormLayer*> Network::rate_norm_layers() {
    std::vector<RateNormLayer*> out;
    for (auto& l : layers) {
        if (auto* r = dynamic_cast<RateNormLayer*>(l.get())) out.push_back(r);
    }
    return out;
}

std::vector<std::size_t> Network::rate_norm_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (dynamic_cast<const RateNormLayer*>(layers[i].get())) out.push_back(i);
    }
    return out;
}

namespace {

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data) v = dist(rng);
}

}  // namespace

Network build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net;
    for (const LayerSpec& s : specs) {
        if (s.kind == "affine") {
            if (s.in == 0 || s.out == 0) throw ArgumentError("affine spec needs in/out");
            auto l = std::make_unique<AffineLayer>(s.in, s.out);
            init_uniform(l->W.value, std::sqrt(6.0 / double(s.in + s.out)), rng);
            net.layers.push_back(std::move(l));
        } else if (s.kind == "conv2d") {
            if (s.in_ch == 0 || s.out_ch == 0 || s.kernel == 0) {
                throw ArgumentError("conv2d spec needs in_ch/out_ch/kernel");
            }
            auto l = std::make_unique<Conv2dLayer>(s.in_ch, s.out_ch, s.kernel, s.stride);
            const double fan_in = double(s.in_ch * s.kernel * s.kernel);
            const double fan_out = double(s.out_ch * s.kernel * s.kernel);
            init_uniform(l->K.value, std::sqrt(6.0 / (fan_in + fan_out)), rng);
            net.layers.push_back(std::move(l));
        } else if (s.kind == "avgpool2d") {
            if (s.window == 0) throw ArgumentError("avgpool2d spec needs window");
            net.layers.push_back(std::make_unique<AvgPool2dLayer>(s.window));
        } else if (s.kind == "rate_norm") {
            net.layers.push_back(std::make_unique<RateNormLayer>());
        } else if (s.kind == "relu") {
            net.layers.push_back(std::make_unique<ReluLayer>());
        } else {
            throw ArgumentError("unknown layer kind '" + s.kind + "'");
        }
    }
    return net;
}

std::vector<LayerSpec> network_specs(const Network& net) {
    std::vector<LayerSpec> specs;
    for (const auto& l : net.layers) {
        LayerSpec s;
        s.kind = l->kind();
        if (auto* a = dynamic_cast<const AffineLayer*>(l.get())) {
            s.in = a->in_features();
            s.out = a->out_features();
        } else if (auto* c = dynamic_cast<const Conv2dLayer*>(l.get())) {
            s.in_ch = c->in_channels();
            s.out_ch = c->out_channels();
            s.kernel = c->kernel();
            s.stride = c->stride();
        } else if (auto* p = dynamic_cast<const AvgPool2dLayer*>(l.get())) {
            s.window = p->window();
        }
        specs.push_back(s);
    }
    return specs;
}

double grad_check(Network& net, const Tensor& x, const std::vector<int>& labels, double eps,
                  std::size_t max_samples, std::uint64_t seed) {
    if (eps <= 0.0) throw ArgumentError("grad_check: eps must be positive");
    auto loss_at = [&]() {
        Tensor logits = net.forward(x, Mode::Eval);
        return cross_entropy_loss(logits, labels);
    };
    net.zero_grad();
    Tensor logits = net.forward(x, Mode::Eval);
    net.backward(cross_entropy_backward(logits, labels));

    struct Slot {
        double* value;
        double analytic;
    };
    std::vector<Slot> slots;
    for (auto& [p, name] : net.param_entries()) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            slots.push_back({&p->value.data[i], p->grad.data[i]});
        }
    }
    for (RateNormLayer* r : net.rate_norm_layers()) {
        if (!r->locked()) slots.push_back({&r->p_state()->p_raw, r->p_state()->grad});
    }

    std::mt19937_64 rng(seed);
    if (slots.size() > max_samples) {
        std::shuffle(slots.begin(), slots.end(), rng);
        slots.resize(max_samples);
    }

    double max_rel = 0.0;
    for (const Slot& s : slots) {
        const double orig = *s.value;
        *s.value = orig + eps;
        const double lp = loss_at();
        *s.value = orig - eps;
        const double lm = loss_at();
        *s.value = orig;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double denom = std::max({std::abs(s.analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(s.analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace snnkit
