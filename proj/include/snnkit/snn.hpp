#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

enum class Coding { Constant, Poisson };

Coding coding_from_string(const std::string& s);
std::string coding_to_string(Coding c);

// One synaptic transform of the converted network, applied per sample
// (no batch dimension).
struct SynapticOp {
    std::string kind;  // affine | conv2d | avgpool2d
    Tensor W;          // affine [out,in]
    Tensor K;          // conv2d [oc,ic,k,k]
    Tensor b;          // affine/conv2d bias
    std::size_t stride = 1;
    std::size_t window = 0;

    Tensor apply(const Tensor& x) const;
};

// A synaptic transform optionally followed by a population of soft-reset
// I&F neurons. Stages without a threshold pass values linearly (average
// pooling) or, in last position, accumulate as a non-spiking readout.
struct SpikingStage {
    SynapticOp op;
    std::optional<double> v_th;
};

struct SpikingNet {
    std::vector<SpikingStage> stages;

    std::size_t spiking_layer_count() const;
    bool has_potential_readout() const {
        return !stages.empty() && !stages.back().v_th.has_value();
    }
};

// Runtime state of one spiking layer, exposed for single-step use in tests.
struct SpikingLayerState {
    Tensor v;  // membrane potentials
    double v_th = 1.0;
    Tensor cumulative_spikes;  // same shape as v, integer-valued
};

// One soft-reset I&F update: m = v + input_current; s = [m >= v_th];
// v = m - v_th*s. Returns the binary spike vector. At most one spike per
// neuron per step. The fire comparison carries a relative tolerance of
// 1e-9*v_th so constant-drive accumulation reproduces the exact
// cumulate-and-floor process despite rounding.
Tensor if_step(SpikingLayerState& layer, const Tensor& input_current);

// Constant coding presents the intensities themselves as input current.
Tensor encode_constant(const Tensor& x);

// Poisson coding: independent Bernoulli(x) spikes per step; x in [0,1].
Tensor encode_poisson(const Tensor& x, std::mt19937_64& rng);

// Full per-step record of one simulation run.
struct SimulationTrace {
    std::size_t T = 0;
    std::vector<std::size_t> layer_sizes;  // spiking layers, network order
    // cum_counts[l][t-1][i] = cumulative spikes of neuron i in spiking
    // layer l after step t.
    std::vector<std::vector<std::vector<std::uint32_t>>> cum_counts;
    std::vector<Tensor> output_series;              // [T]; readout potential / t
    std::vector<std::uint64_t> spikes_per_step;     // all layers, each step
    std::vector<std::uint64_t> total_spikes_series; // cumulative

    Tensor firing_rates(std::size_t layer, std::size_t t) const;
};

Tensor firing_rate(const SimulationTrace& trace, std::size_t layer, std::size_t t);

// Clock-driven simulation of one sample for T steps. All membrane
// potentials start at 0.
SimulationTrace run(const SpikingNet& net, const Tensor& x, std::size_t T, Coding coding,
                    std::uint64_t seed = 0);

// Aggregate accuracy/spike series over an evaluation set. Per-neuron
// traces are not recorded.
struct EvalSeries {
    std::size_t T = 0;
    std::size_t n_samples = 0;
    std::vector<double> accuracy_series;             // [T]
    std::vector<std::uint64_t> spikes_per_step;      // summed over samples
    std::vector<std::uint64_t> total_spikes_series;  // cumulative
};

EvalSeries evaluate(const SpikingNet& net, const Tensor& inputs, const std::vector<int>& labels,
                    std::size_t T, Coding coding, std::uint64_t seed = 0);

}  // namespace snnkit
