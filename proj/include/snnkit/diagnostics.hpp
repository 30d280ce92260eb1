#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "snnkit/network.hpp"
#include "snnkit/snn.hpp"

namespace snnkit {

// K(r_hat, r) = ||r - r_hat||^2 / ||r_hat||^2. Scale-invariant fit between
// the simulated and the real firing rate of one layer.
double k_value(const Tensor& r_hat, const Tensor& r);

// Rate Inference Loss: ||r_hat||_1 / ||r_hat||_2^2, the coefficient of the
// 2*Omega/t upper bound on K.
double omega(const Tensor& r_hat);

// 2*Omega/t - K(r_hat, floor(r_hat*t)/t) under the cumulate-and-floor
// firing model. Strictly positive for every valid input.
double bound_margin(const Tensor& r_hat, std::size_t t);

struct KCurve {
    std::size_t layer = 0;
    std::vector<double> k;  // k[t-1] = K_l(t)
};

// Simulated firing rate of each rate layer for one input sample (batch
// dimension added internally), flattened per layer.
std::vector<Tensor> ann_simulated_rates(Network& ann, const Tensor& x);

// K_l(t) for every spiking layer of the trace against the matching ANN
// rates.
std::vector<KCurve> k_curves_from_trace(const std::vector<Tensor>& ann_rates,
                                        const SimulationTrace& trace);

// Mean K over several (rates, trace) pairs, e.g. a batch of inputs.
std::vector<KCurve> k_curves_batch_mean(const std::vector<std::vector<Tensor>>& ann_rates,
                                        const std::vector<SimulationTrace>& traces);

std::optional<std::size_t> time_to_k_below(const KCurve& curve, double threshold);

// 2*Omega_l/T - K_l(T) at the final step, one entry per layer; negative
// entries mean the empirical trace broke the bound.
std::vector<double> final_step_bound_margins(const std::vector<Tensor>& ann_rates,
                                             const std::vector<KCurve>& curves);

// Energy model: P(t) = spikes(t)/1e-3 * alpha watts (one step = 1 ms),
// E(t) = cumulative spikes * alpha.
struct EnergyReport {
    double alpha = 0.0;
    std::vector<double> power;   // watts, per step
    std::vector<double> energy;  // joules, cumulative
    std::optional<std::size_t> time_to_target;   // steps, 1-based
    std::optional<double> energy_to_target;      // joules at that step
};

EnergyReport power_series(const std::vector<std::uint64_t>& spikes_per_step, double alpha,
                          const std::vector<double>* accuracy_series = nullptr,
                          double target_accuracy = 0.0);

// Smallest t (1-based) with accuracy(t) >= target, or nullopt.
std::optional<std::size_t> time_to_accuracy(const std::vector<double>& accuracy_series,
                                            double target);

}  // namespace snnkit
