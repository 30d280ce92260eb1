#include "snnkit/conversion.hpp"

#include <algorithm>
#include <cmath>

namespace snnkit {

namespace {

SynapticOp op_from_layer(const Layer& layer) {
    SynapticOp op;
    if (auto* a = dynamic_cast<const AffineLayer*>(&layer)) {
        op.kind = "affine";
        op.W = a->W.value;
        op.b = a->b.value;
    } else if (auto* c = dynamic_cast<const Conv2dLayer*>(&layer)) {
        op.kind = "conv2d";
        op.K = c->K.value;
        op.b = c->b.value;
        op.stride = c->stride();
    } else if (auto* p = dynamic_cast<const AvgPool2dLayer*>(&layer)) {
        op.kind = "avgpool2d";
        op.window = p->window();
    } else {
        throw ConversionError("layer kind '" + layer.kind() + "' has no spiking counterpart here");
    }
    return op;
}

bool is_weight_kind(const std::string& k) { return k == "affine" || k == "conv2d"; }
bool is_activation_kind(const std::string& k) { return k == "relu" || k == "rate_norm"; }

void scale_stage(SpikingStage& stage, double w_scale, double b_scale) {
    Tensor& w = stage.op.kind == "affine" ? stage.op.W : stage.op.K;
    for (double& v : w.data) v *= w_scale;
    for (double& v : stage.op.b.data) v *= b_scale;
}

}  // namespace

ConversionResult convert_direct(Network& ann) {
    ConversionResult res;
    res.report.scheme = "direct";
    for (std::size_t i = 0; i < ann.layers.size(); ++i) {
        Layer& layer = *ann.layers[i];
        if (is_activation_kind(layer.kind())) {
            auto* rnl = dynamic_cast<RateNormLayer*>(&layer);
            if (!rnl) {
                throw ConversionError("direct conversion requires rate_norm activations, found '" +
                                      layer.kind() + "'");
            }
            if (res.snn.stages.empty() || res.snn.stages.back().v_th.has_value()) {
                throw ConversionError("activation at layer " + std::to_string(i) +
                                      " does not follow a synaptic layer");
            }
            res.snn.stages.back().v_th = rnl->threshold();  // theta_l, throws when dead
            res.report.v_th.push_back(*res.snn.stages.back().v_th);
            res.report.w_scale.push_back(1.0);
            res.report.b_scale.push_back(1.0);
        } else {
            res.snn.stages.push_back({op_from_layer(layer), std::nullopt});
        }
    }
    return res;
}

namespace {

ConversionResult convert_scaled(Network& ann, const Tensor& calibration_inputs,
                                std::optional<double> percentile, const NormOptions& options) {
    if (calibration_inputs.rank() < 2 || calibration_inputs.shape[0] == 0) {
        throw ConversionError("calibration set must be a non-empty batch");
    }
    for (auto& l : ann.layers) {
        if (l->kind() == "rate_norm") {
            throw ConversionError("max/robust norm conversion expects ReLU activations");
        }
    }

    // One eval pass records every activation layer's output.
    ann.forward(calibration_inputs, Mode::Eval);

    ConversionResult res;
    res.report.scheme = percentile ? "robust_norm" : "max_norm";
    res.report.percentile = percentile;
    res.report.calibration_size = calibration_inputs.shape[0];

    double prev_max = options.input_max ? *options.input_max : calibration_inputs.max_value();
    res.report.input_max = prev_max;
    if (prev_max <= 0.0) throw ConversionError("input maximum is not positive");

    for (std::size_t i = 0; i < ann.layers.size(); ++i) {
        Layer& layer = *ann.layers[i];
        if (is_activation_kind(layer.kind())) {
            if (res.snn.stages.empty() || res.snn.stages.back().v_th.has_value() ||
                !is_weight_kind(res.snn.stages.back().op.kind)) {
                throw ConversionError("activation at layer " + std::to_string(i) +
                                      " does not follow a weight layer");
            }
            const Tensor& act = ann.layer_output(i);
            double factor;
            if (percentile) {
                factor = nearest_rank_percentile(act.data, *percentile);
                if (factor <= 0.0) {
                    throw ConversionError("percentile " + std::to_string(*percentile) +
                                          " of layer " + std::to_string(i) + " activations is 0");
                }
            } else {
                factor = act.max_value();
                if (factor <= 0.0) {
                    throw ConversionError("layer " + std::to_string(i) + " is dead (max activation 0)");
                }
            }
            const double w_scale = prev_max / factor;
            const double b_scale = 1.0 / factor;
            scale_stage(res.snn.stages.back(), w_scale, b_scale);
            res.snn.stages.back().v_th = 1.0;
            res.report.v_th.push_back(1.0);
            res.report.w_scale.push_back(w_scale);
            res.report.b_scale.push_back(b_scale);
            prev_max = factor;
        } else {
            res.snn.stages.push_back({op_from_layer(layer), std::nullopt});
        }
    }

    // Non-spiking readout: inputs arrive as rates a/prev_max, so scaling the
    // weights back by prev_max makes the accumulated potential converge to
    // the original logits.
    if (!res.snn.stages.empty() && !res.snn.stages.back().v_th.has_value() &&
        is_weight_kind(res.snn.stages.back().op.kind)) {
        scale_stage(res.snn.stages.back(), prev_max, 1.0);
    }
    return res;
}

}  // namespace

ConversionResult convert_max_norm(Network& ann, const Tensor& calibration_inputs,
                                  const NormOptions& options) {
    return convert_scaled(ann, calibration_inputs, std::nullopt, options);
}

ConversionResult convert_robust_norm(Network& ann, const Tensor& calibration_inputs,
                                     double percentile, const NormOptions& options) {
    if (percentile <= 0.0 || percentile > 100.0) {
        throw ArgumentError("percentile must be in (0,100], got " + std::to_string(percentile));
    }
    return convert_scaled(ann, calibration_inputs, percentile, options);
}

SpikingNet scale_thresholds(const SpikingNet& snn, double factor) {
    if (factor <= 0.0) {
        throw ArgumentError("threshold scale factor must be positive, got " + std::to_string(factor));
    }
    SpikingNet out = snn;
    for (auto& stage : out.stages) {
        if (stage.v_th) stage.v_th = *stage.v_th * factor;
    }
    return out;
}

void recalibrate_running_max(Network& net, const Tensor& calibration_inputs) {
    const auto rnl_indices = net.rate_norm_indices();
    auto rnls = net.rate_norm_layers();
    for (std::size_t k = 0; k < rnl_indices.size(); ++k) {
        net.forward(calibration_inputs, Mode::Eval);
        const std::size_t idx = rnl_indices[k];
        if (idx == 0) throw ConversionError("rate layer cannot be the first layer");
        const Tensor& pre = net.layer_output(idx - 1);
        rnls[k]->set_running_max(pre.max_value());
    }
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
    if (values.empty()) throw ArgumentError("percentile of empty set");
    if (percentile <= 0.0 || percentile > 100.0) {
        throw ArgumentError("percentile must be in (0,100], got " + std::to_string(percentile));
    }
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
    if (rank < 1) rank = 1;
    return values[rank - 1];
}

}  // namespace snnkit
