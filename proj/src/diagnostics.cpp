#include "snnkit/diagnostics.hpp"

#include <cmath>

namespace snnkit {

double k_value(const Tensor& r_hat, const Tensor& r) {
    require_same_shape(r_hat, r, "k_value");
    const double denom = l2_norm_sq(r_hat);
    if (denom == 0.0) throw ArgumentError("k_value undefined: ||r_hat|| = 0");
    double num = 0.0;
    for (std::size_t i = 0; i < r.numel(); ++i) {
        const double d = r.data[i] - r_hat.data[i];
        num += d * d;
    }
    return num / denom;
}

double omega(const Tensor& r_hat) {
    double l1 = 0.0, l2sq = 0.0;
    for (double v : r_hat.data) {
        if (v < 0.0) throw ArgumentError("omega: rates must be non-negative");
        l1 += v;
        l2sq += v * v;
    }
    if (l2sq == 0.0) throw ArgumentError("omega undefined: all rates zero");
    return l1 / l2sq;
}

double bound_margin(const Tensor& r_hat, std::size_t t) {
    if (t < 1) throw ArgumentError("bound_margin: t must be >= 1");
    Tensor r(r_hat.shape);
    for (std::size_t i = 0; i < r_hat.numel(); ++i) {
        const double v = r_hat.data[i];
        if (v < 0.0 || v > 1.0) throw ArgumentError("bound_margin: rates must be in [0,1]");
        r.data[i] = std::floor(v * static_cast<double>(t)) / static_cast<double>(t);
    }
    return 2.0 * omega(r_hat) / static_cast<double>(t) - k_value(r_hat, r);
}

std::vector<Tensor> ann_simulated_rates(Network& ann, const Tensor& x) {
    Shape batched = x.shape;
    batched.insert(batched.begin(), 1);
    ann.forward(x.reshaped(batched), Mode::Eval);
    std::vector<Tensor> rates;
    for (std::size_t idx : ann.rate_norm_indices()) {
        const Tensor& out = ann.layer_output(idx);
        rates.push_back(out.reshaped({out.numel()}));
    }
    return rates;
}

std::vector<KCurve> k_curves_from_trace(const std::vector<Tensor>& ann_rates,
                                        const SimulationTrace& trace) {
    if (ann_rates.size() != trace.cum_counts.size()) {
        throw ArgumentError("k_curves: " + std::to_string(ann_rates.size()) +
                            " ANN rate layers vs " + std::to_string(trace.cum_counts.size()) +
                            " trace layers");
    }
    std::vector<KCurve> curves;
    for (std::size_t l = 0; l < ann_rates.size(); ++l) {
        if (ann_rates[l].numel() != trace.layer_sizes[l]) {
            throw ArgumentError("k_curves: layer " + std::to_string(l) + " has " +
                                std::to_string(ann_rates[l].numel()) + " ANN rates vs " +
                                std::to_string(trace.layer_sizes[l]) + " neurons");
        }
        KCurve c;
        c.layer = l;
        for (std::size_t t = 1; t <= trace.T; ++t) {
            c.k.push_back(k_value(ann_rates[l], trace.firing_rates(l, t)));
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

std::vector<KCurve> k_curves_batch_mean(const std::vector<std::vector<Tensor>>& ann_rates,
                                        const std::vector<SimulationTrace>& traces) {
    if (ann_rates.size() != traces.size() || traces.empty()) {
        throw ArgumentError("k_curves_batch_mean: need matching non-empty rate/trace lists");
    }
    std::vector<KCurve> mean = k_curves_from_trace(ann_rates[0], traces[0]);
    for (std::size_t s = 1; s < traces.size(); ++s) {
        const auto curves = k_curves_from_trace(ann_rates[s], traces[s]);
        for (std::size_t l = 0; l < mean.size(); ++l) {
            for (std::size_t t = 0; t < mean[l].k.size(); ++t) mean[l].k[t] += curves[l].k[t];
        }
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (auto& c : mean) {
        for (double& v : c.k) v *= inv;
    }
    return mean;
}

std::optional<std::size_t> time_to_k_below(const KCurve& curve, double threshold) {
    for (std::size_t t = 0; t < curve.k.size(); ++t) {
        if (curve.k[t] < threshold) return t + 1;
    }
    return std::nullopt;
}

std::vector<double> final_step_bound_margins(const std::vector<Tensor>& ann_rates,
                                             const std::vector<KCurve>& curves) {
    if (ann_rates.size() != curves.size()) {
        throw ArgumentError("bound margins: rate/curve count mismatch");
    }
    std::vector<double> margins;
    for (std::size_t l = 0; l < curves.size(); ++l) {
        if (curves[l].k.empty()) throw ArgumentError("bound margins: empty K curve");
        const double T = static_cast<double>(curves[l].k.size());
        margins.push_back(2.0 * omega(ann_rates[l]) / T - curves[l].k.back());
    }
    return margins;
}

EnergyReport power_series(const std::vector<std::uint64_t>& spikes_per_step, double alpha,
                          const std::vector<double>* accuracy_series, double target_accuracy) {
    if (alpha <= 0.0) throw ArgumentError("power_series: alpha must be positive");
    EnergyReport report;
    report.alpha = alpha;
    std::uint64_t cumulative = 0;
    for (std::uint64_t s : spikes_per_step) {
        report.power.push_back(static_cast<double>(s) / 1e-3 * alpha);
        cumulative += s;  // integer count times alpha keeps E(t) exact
        report.energy.push_back(static_cast<double>(cumulative) * alpha);
    }
    if (accuracy_series) {
        report.time_to_target = time_to_accuracy(*accuracy_series, target_accuracy);
        if (report.time_to_target) {
            report.energy_to_target = report.energy[*report.time_to_target - 1];
        }
    }
    return report;
}

std::optional<std::size_t> time_to_accuracy(const std::vector<double>& accuracy_series,
                                            double target) {
    for (std::size_t t = 0; t < accuracy_series.size(); ++t) {
        if (accuracy_series[t] >= target) return t + 1;
    }
    return std::nullopt;
}

}  // namespace snnkit
