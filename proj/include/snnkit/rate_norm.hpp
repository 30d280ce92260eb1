#pragma once

#include <memory>
#include <vector>

#include "snnkit/nn.hpp"

namespace snnkit {

// Trainable clip coefficient p = sigmoid(p_raw), shareable between layers.
// While locked, the layer behaves as if p == 1 exactly and p receives no
// gradient (Stage-1 semantics).
struct PState {
    double p_raw = 6.0;  // sigmoid(6) ~ 0.9975
    double grad = 0.0;
    bool locked = true;
    bool stage2_started = false;
};

double sigmoid(double x);
double logit(double p);

// Rate Norm Layer: theta = p * running_max, output = clip(pre,0,theta)/theta.
// The output is the simulated firing rate, always in [0,1].
class RateNormLayer : public Layer {
public:
    RateNormLayer() : p_(std::make_shared<PState>()) {}

    Tensor forward(const Tensor& pre, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    std::string kind() const override { return "rate_norm"; }

    // theta for the current state; throws DegenerateThresholdError when dead.
    double threshold() const;

    double p() const { return p_->locked ? 1.0 : sigmoid(p_->p_raw); }
    double p_raw() const { return p_->p_raw; }
    bool locked() const { return p_->locked; }
    void set_p_raw(double v) { p_->p_raw = v; }
    void unlock(double p_init);
    void lock() { p_->locked = true; }

    double running_max() const { return running_max_; }
    void set_running_max(double v) { running_max_ = v; }
    double momentum() const { return momentum_; }
    void set_momentum(double m) { momentum_ = m; }

    int shared_group() const { return shared_group_; }
    void set_shared_group(int g) { shared_group_ = g; }

    std::shared_ptr<PState> p_state() { return p_; }
    void adopt_p_state(std::shared_ptr<PState> s) { p_ = std::move(s); }

    // Simulated firing rate cached by the last forward.
    const Tensor& last_rates() const { return cached_rates_; }
    double last_theta() const { return cached_theta_; }

private:
    std::shared_ptr<PState> p_;
    double running_max_ = 1.0;
    double momentum_ = 0.1;
    int shared_group_ = -1;

    Tensor cached_pre_;
    Tensor cached_rates_;
    double cached_theta_ = 0.0;
    double cached_p_ = 1.0;
    bool has_cache_ = false;
};

// Point every listed layer at one shared p accumulator (the first layer's).
// Gradients from all layers sum into it. Must happen before Stage 2 starts.
void tie_shared_p(const std::vector<RateNormLayer*>& layers);

// Temporarily lock p at 1 for a reference forward pass.
class ScopedPLock {
public:
    explicit ScopedPLock(const std::vector<RateNormLayer*>& layers);
    ~ScopedPLock();
    ScopedPLock(const ScopedPLock&) = delete;
    ScopedPLock& operator=(const ScopedPLock&) = delete;

private:
    std::vector<std::pair<RateNormLayer*, bool>> saved_;
};

}  // namespace snnkit
