#include "snnkit/snn.hpp"

#include <algorithm>
#include <cmath>

#include "snnkit/nn.hpp"

namespace snnkit {

namespace {

// Relative firing tolerance: v within 1e-9*v_th of threshold fires. Keeps
// the discrete dynamics aligned with the exact cumulate-and-floor model
// when repeated double additions land an ulp short of the threshold.
constexpr double kFireTol = 1e-9;

Tensor wrap_batch1(const Tensor& x) {
    Shape s = x.shape;
    s.insert(s.begin(), 1);
    return x.reshaped(s);
}

Tensor unwrap_batch1(const Tensor& x) {
    Shape s(x.shape.begin() + 1, x.shape.end());
    return x.reshaped(s);
}

}  // namespace

Coding coding_from_string(const std::string& s) {
    if (s == "constant") return Coding::Constant;
    if (s == "poisson") return Coding::Poisson;
    throw ArgumentError("unknown coding '" + s + "'");
}

std::string coding_to_string(Coding c) {
    return c == Coding::Constant ? "constant" : "poisson";
}

Tensor SynapticOp::apply(const Tensor& x) const {
    if (kind == "affine") {
        const std::size_t in = W.shape[1];
        if (x.numel() != in && x.shape.back() != in) {
            throw DimensionError("synaptic affine: input " + shape_str(x.shape) +
                                 " vs weight " + shape_str(W.shape));
        }
        return affine_forward(W, x.rank() == 1 ? x : x.reshaped({x.numel()}), b);
    }
    if (kind == "conv2d") {
        return unwrap_batch1(conv2d_forward(K, wrap_batch1(x), b, stride));
    }
    if (kind == "avgpool2d") {
        return unwrap_batch1(avgpool2d_forward(wrap_batch1(x), window));
    }
    throw ArgumentError("unknown synaptic op kind '" + kind + "'");
}

std::size_t SpikingNet::spiking_layer_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) {
        if (s.v_th.has_value()) ++n;
    }
    return n;
}

Tensor if_step(SpikingLayerState& layer, const Tensor& input_current) {
    require_same_shape(layer.v, input_current, "if_step");
    const double fire_line = layer.v_th * (1.0 - kFireTol);
    Tensor spikes(layer.v.shape);
    for (std::size_t i = 0; i < layer.v.numel(); ++i) {
        const double m = layer.v.data[i] + input_current.data[i];
        const double s = (m >= fire_line) ? 1.0 : 0.0;
        layer.v.data[i] = m - layer.v_th * s;
        spikes.data[i] = s;
        layer.cumulative_spikes.data[i] += s;
    }
    return spikes;
}

Tensor encode_constant(const Tensor& x) { return x; }

Tensor encode_poisson(const Tensor& x, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor s(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (x.data[i] < 0.0 || x.data[i] > 1.0) {
            throw ArgumentError("poisson coding: intensity " + std::to_string(x.data[i]) +
                                " outside [0,1]");
        }
        s.data[i] = (u(rng) < x.data[i]) ? 1.0 : 0.0;
    }
    return s;
}

Tensor SimulationTrace::firing_rates(std::size_t layer, std::size_t t) const {
    if (layer >= cum_counts.size()) {
        throw ArgumentError("trace: layer " + std::to_string(layer) + " out of range");
    }
    if (t < 1 || t > T) {
        throw ArgumentError("trace: t=" + std::to_string(t) + " outside [1," + std::to_string(T) + "]");
    }
    const auto& counts = cum_counts[layer][t - 1];
    Tensor r({counts.size()});
    for (std::size_t i = 0; i < counts.size(); ++i) {
        r.data[i] = static_cast<double>(counts[i]) / static_cast<double>(t);
    }
    return r;
}

Tensor firing_rate(const SimulationTrace& trace, std::size_t layer, std::size_t t) {
    return trace.firing_rates(layer, t);
}

namespace {

// Shared clock-driven engine. Op outputs are cached while their input is
// still constant across steps (constant coding up to the first spiking
// layer).
class Engine {
public:
    Engine(const SpikingNet& net, const Tensor& x, Coding coding, std::uint64_t seed)
        : net_(net), x_(x), coding_(coding), rng_(seed) {
        states_.resize(net.stages.size());
        const_cache_.resize(net.stages.size());
    }

    // Advances one step; returns spikes emitted this step across all layers.
    std::uint64_t step(std::size_t t) {
        Tensor cur = (coding_ == Coding::Constant) ? x_ : encode_poisson(x_, rng_);
        bool constant_input = (coding_ == Coding::Constant);
        std::uint64_t emitted = 0;
        for (std::size_t k = 0; k < net_.stages.size(); ++k) {
            const SpikingStage& stage = net_.stages[k];
            Tensor current;
            if (constant_input && const_cache_[k].numel() > 0) {
                current = const_cache_[k];
            } else {
                current = stage.op.apply(cur);
                if (constant_input) const_cache_[k] = current;
            }
            const bool is_readout = (k + 1 == net_.stages.size()) && !stage.v_th.has_value();
            if (stage.v_th.has_value()) {
                SpikingLayerState& st = states_[k];
                if (st.v.numel() == 0) {
                    st.v = Tensor(current.shape);
                    st.cumulative_spikes = Tensor(current.shape);
                    st.v_th = *stage.v_th;
                }
                cur = if_step(st, current);
                if (!st.v.all_finite()) {
                    throw SimulationError("non-finite potential in layer " + std::to_string(k) +
                                          " at step " + std::to_string(t));
                }
                for (double s : cur.data) emitted += (s != 0.0) ? 1 : 0;
                constant_input = false;
            } else if (is_readout) {
                if (readout_acc_.numel() == 0) readout_acc_ = Tensor(current.shape);
                for (std::size_t i = 0; i < current.numel(); ++i) {
                    readout_acc_.data[i] += current.data[i];
                }
                if (!readout_acc_.all_finite()) {
                    throw SimulationError("non-finite readout potential at step " + std::to_string(t));
                }
            } else {
                cur = current;  // linear pooling stage: rates pass through
            }
        }
        return emitted;
    }

    // Readout potential divided by t, or the last spiking layer's rates.
    Tensor output(std::size_t t) const {
        if (net_.has_potential_readout()) {
            Tensor out = readout_acc_;
            for (double& v : out.data) v /= static_cast<double>(t);
            return out;
        }
        for (std::size_t k = net_.stages.size(); k-- > 0;) {
            if (net_.stages[k].v_th.has_value()) {
                Tensor out = states_[k].cumulative_spikes;
                for (double& v : out.data) v /= static_cast<double>(t);
                return out;
            }
        }
        throw SimulationError("network has no output stage");
    }

    const std::vector<SpikingLayerState>& states() const { return states_; }

private:
    const SpikingNet& net_;
    Tensor x_;
    Coding coding_;
    std::mt19937_64 rng_;
    std::vector<SpikingLayerState> states_;
    std::vector<Tensor> const_cache_;
    Tensor readout_acc_;
};

}  // namespace

SimulationTrace run(const SpikingNet& net, const Tensor& x, std::size_t T, Coding coding,
                    std::uint64_t seed) {
    if (T < 1) throw ArgumentError("run: T must be >= 1");
    Engine engine(net, x, coding, seed);
    SimulationTrace trace;
    trace.T = T;
    const std::size_t n_spiking = net.spiking_layer_count();
    trace.cum_counts.resize(n_spiking);
    trace.layer_sizes.assign(n_spiking, 0);

    std::uint64_t total = 0;
    for (std::size_t t = 1; t <= T; ++t) {
        const std::uint64_t emitted = engine.step(t);
        total += emitted;
        trace.spikes_per_step.push_back(emitted);
        trace.total_spikes_series.push_back(total);
        std::size_t li = 0;
        for (std::size_t k = 0; k < net.stages.size(); ++k) {
            if (!net.stages[k].v_th.has_value()) continue;
            const Tensor& cum = engine.states()[k].cumulative_spikes;
            trace.layer_sizes[li] = cum.numel();
            std::vector<std::uint32_t> counts(cum.numel());
            for (std::size_t i = 0; i < cum.numel(); ++i) {
                counts[i] = static_cast<std::uint32_t>(cum.data[i]);
            }
            trace.cum_counts[li].push_back(std::move(counts));
            ++li;
        }
        trace.output_series.push_back(engine.output(t));
    }
    return trace;
}

EvalSeries evaluate(const SpikingNet& net, const Tensor& inputs, const std::vector<int>& labels,
                    std::size_t T, Coding coding, std::uint64_t seed) {
    if (T < 1) throw ArgumentError("evaluate: T must be >= 1");
    if (inputs.rank() < 2 || inputs.shape[0] != labels.size()) {
        throw DimensionError("evaluate: inputs " + shape_str(inputs.shape) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = inputs.shape[0];
    const std::size_t sample_elems = inputs.numel() / n;
    Shape sample_shape(inputs.shape.begin() + 1, inputs.shape.end());

    EvalSeries series;
    series.T = T;
    series.n_samples = n;
    std::vector<std::uint64_t> correct(T, 0);
    series.spikes_per_step.assign(T, 0);

    for (std::size_t s = 0; s < n; ++s) {
        Tensor x(sample_shape,
                 std::vector<double>(inputs.data.begin() + s * sample_elems,
                                     inputs.data.begin() + (s + 1) * sample_elems));
        Engine engine(net, x, coding, seed + s);
        for (std::size_t t = 1; t <= T; ++t) {
            series.spikes_per_step[t - 1] += engine.step(t);
            const Tensor out = engine.output(t);
            std::size_t best = 0;
            for (std::size_t c = 1; c < out.numel(); ++c) {
                if (out.data[c] > out.data[best]) best = c;
            }
            if (static_cast<int>(best) == labels[s]) ++correct[t - 1];
        }
    }

    std::uint64_t total = 0;
    for (std::size_t t = 0; t < T; ++t) {
        total += series.spikes_per_step[t];
        series.total_spikes_series.push_back(total);
        series.accuracy_series.push_back(static_cast<double>(correct[t]) / static_cast<double>(n));
    }
    return series;
}

}  // namespace snnkit
