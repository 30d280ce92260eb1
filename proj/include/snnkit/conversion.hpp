#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snnkit/network.hpp"
#include "snnkit/snn.hpp"

namespace snnkit {

// What a conversion did to each spiking layer, in network order.
struct ConversionReport {
    std::string scheme;
    std::vector<double> v_th;
    std::vector<double> w_scale;
    std::vector<double> b_scale;
    std::size_t calibration_size = 0;
    std::optional<double> percentile;
    std::optional<double> input_max;
};

struct ConversionResult {
    SpikingNet snn;
    ConversionReport report;
};

// Copy W/b unchanged and set each spiking layer's threshold to the rate
// layer's theta. Requires every activation to be a Rate Norm Layer.
ConversionResult convert_direct(Network& ann);

struct NormOptions {
    // Max over calibration inputs when unset; the harness passes 1.0 for
    // [0,1]-normalized pixels.
    std::optional<double> input_max;
};

// Weight normalization per the scaling identities: W <- W*max_{l-1}/max_l,
// b <- b/max_l, v_th = 1, with max_l the maximum layer-l activation over
// the calibration set. Requires ReLU activations.
ConversionResult convert_max_norm(Network& ann, const Tensor& calibration_inputs,
                                  const NormOptions& options = {});

// Max Norm with the maximum replaced by a nearest-rank percentile of the
// flattened activation multiset.
ConversionResult convert_robust_norm(Network& ann, const Tensor& calibration_inputs,
                                     double percentile = 99.9, const NormOptions& options = {});

// Multiply every firing threshold by `factor`, weights untouched.
SpikingNet scale_thresholds(const SpikingNet& snn, double factor);

// Replace each rate layer's running_max by the exact maximum of its
// pre-activation over the calibration set, updating layers front to back
// so later statistics see the corrected earlier thresholds.
void recalibrate_running_max(Network& net, const Tensor& calibration_inputs);

// Nearest-rank percentile of a value multiset; percentile in (0,100].
double nearest_rank_percentile(std::vector<double> values, double percentile);

}  // namespace snnkit
