#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnkit/dataset.hpp"
#include "snnkit/network.hpp"

namespace snnkit {

struct StageConfig {
    std::size_t epochs = 0;
    double lr = 0.1;
    double sgd_momentum = 0.9;  // stage 1 only
    double lambda = 0.5;        // stage 2 only
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double p_init = 0.9975;     // p when stage 2 unlocks the shared parameter
};

struct TrainLogRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double mean_omega = 0.0;
    double p = 1.0;
    std::vector<double> thetas;
    // Stage-2 decomposition, zero in stage 1.
    double cos_term = 0.0;
    double omega_term = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    std::string to_csv() const;
};

// Stage 1: accuracy training. p locked at 1, running_max tracking enabled,
// weights and biases updated against cross-entropy.
TrainLog stage1_train(Network& net, const Dataset& data, const StageConfig& cfg);

// Fast-inference objective: 1 - Cos(r*, r') + lambda * mean(omegas).
double fast_loss(const Tensor& r_star, const Tensor& r_prime, const std::vector<double>& omegas,
                 double lambda);

// Stage 2: fast-inference training. Weights frozen, thresholds trained via
// one shared p tied across all rate layers; running_max frozen. Each batch
// runs a gradient-detached reference pass with p = 1 and a training pass
// with the trainable p.
TrainLog stage2_train(Network& net, const Dataset& data, const StageConfig& cfg);

// Mean over rate layers and batch rows of the Rate Inference Loss, from an
// eval-mode forward pass. Used for before/after comparisons.
double mean_omega(Network& net, const Tensor& inputs);

// Plain argmax accuracy of an eval-mode forward pass.
double ann_accuracy(Network& net, const Dataset& data);

}  // namespace snnkit
