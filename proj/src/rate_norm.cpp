#include "snnkit/rate_norm.hpp"

#include <algorithm>
#include <cmath>

namespace snnkit {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    if (p <= 0.0 || p >= 1.0) throw ArgumentError("logit: p must be in (0,1)");
    return std::log(p / (1.0 - p));
}

Tensor RateNormLayer::forward(const Tensor& pre, Mode mode) {
    if (mode == Mode::Train) {
        // Momentum-tracked statistic of the pre-activation maximum; frozen in
        // eval mode so inference is stationary.
        running_max_ = (1.0 - momentum_) * running_max_ + momentum_ * pre.max_value();
    }
    cached_p_ = p();
    cached_theta_ = cached_p_ * running_max_;
    if (cached_theta_ <= 1e-12) {
        throw DegenerateThresholdError("rate layer dead: theta=" + std::to_string(cached_theta_));
    }
    cached_pre_ = pre;
    Tensor r(pre.shape);
    const double theta = cached_theta_;
    for (std::size_t i = 0; i < pre.numel(); ++i) {
        r.data[i] = std::min(std::max(pre.data[i], 0.0), theta) / theta;
    }
    cached_rates_ = r;
    has_cache_ = true;
    return r;
}

Tensor RateNormLayer::backward(const Tensor& upstream) {
    if (!has_cache_) throw StateError("rate_norm: backward before forward");
    require_same_shape(cached_pre_, upstream, "rate_norm backward");
    const double theta = cached_theta_;
    Tensor dpre(cached_pre_.shape);
    double dp = 0.0;
    for (std::size_t i = 0; i < cached_pre_.numel(); ++i) {
        const double pre = cached_pre_.data[i];
        if (pre >= 0.0 && pre <= theta) dpre.data[i] = upstream.data[i] / theta;
        // d r_i / d p = -r_i / p for strictly interior components; saturated
        // and negative components contribute nothing.
        if (pre > 0.0 && pre < theta) {
            dp += upstream.data[i] * (-cached_rates_.data[i] / cached_p_);
        }
    }
    if (!p_->locked) {
        // Chain through p = sigmoid(p_raw). The running_max path carries no
        // gradient.
        p_->grad += dp * cached_p_ * (1.0 - cached_p_);
    }
    return dpre;
}

double RateNormLayer::threshold() const {
    const double theta = p() * running_max_;
    if (theta <= 1e-12) {
        throw DegenerateThresholdError("rate layer dead: theta=" + std::to_string(theta));
    }
    return theta;
}

void RateNormLayer::unlock(double p_init) {
    p_->locked = false;
    p_->p_raw = logit(p_init);
    p_->grad = 0.0;
}

void tie_shared_p(const std::vector<RateNormLayer*>& layers) {
    if (layers.empty()) return;
    for (RateNormLayer* l : layers) {
        if (l->p_state()->stage2_started) {
            throw StateError("tie_shared_p: cannot tie after Stage 2 has started");
        }
    }
    auto shared = layers.front()->p_state();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i]->adopt_p_state(shared);
        layers[i]->set_shared_group(0);
    }
}

ScopedPLock::ScopedPLock(const std::vector<RateNormLayer*>& layers) {
    for (RateNormLayer* l : layers) {
        saved_.emplace_back(l, l->locked());
        l->lock();
    }
}

ScopedPLock::~ScopedPLock() {
    for (auto& [layer, was_locked] : saved_) {
        if (!was_locked) layer->p_state()->locked = false;
    }
}

}  // namespace snnkit
