#include "snnkit/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace snnkit {

namespace {

using nlohmann::json;

json tensor_to_nested(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) throw FormatError("checkpoint: non-finite value in tensor");
    }
    // Recursive nested-list encoding of a row-major tensor.
    std::function<json(std::size_t, std::size_t&, std::size_t)> rec =
        [&](std::size_t dim, std::size_t& pos, std::size_t) -> json {
        json arr = json::array();
        if (dim + 1 == t.rank()) {
            for (std::size_t i = 0; i < t.shape[dim]; ++i) arr.push_back(t.data[pos++]);
        } else {
            for (std::size_t i = 0; i < t.shape[dim]; ++i) arr.push_back(rec(dim + 1, pos, 0));
        }
        return arr;
    };
    std::size_t pos = 0;
    if (t.rank() == 0) return json::array();
    return rec(0, pos, 0);
}

void flatten_nested(const json& j, std::vector<double>& out, Shape& shape, std::size_t depth) {
    if (!j.is_array()) throw FormatError("checkpoint: expected nested array of numbers");
    if (depth == shape.size()) {
        shape.push_back(j.size());
    } else if (shape[depth] != j.size()) {
        throw FormatError("checkpoint: ragged nested array");
    }
    for (const auto& el : j) {
        if (el.is_number()) {
            out.push_back(el.get<double>());
        } else {
            flatten_nested(el, out, shape, depth + 1);
        }
    }
}

Tensor tensor_from_nested(const json& j) {
    std::vector<double> data;
    Shape shape;
    flatten_nested(j, data, shape, 0);
    return Tensor(shape, std::move(data));
}

json layer_to_json(const Layer& layer) {
    json j;
    j["kind"] = layer.kind();
    if (auto* a = dynamic_cast<const AffineLayer*>(&layer)) {
        j["in"] = a->in_features();
        j["out"] = a->out_features();
        j["W"] = tensor_to_nested(a->W.value);
        j["b"] = tensor_to_nested(a->b.value);
    } else if (auto* c = dynamic_cast<const Conv2dLayer*>(&layer)) {
        j["in_ch"] = c->in_channels();
        j["out_ch"] = c->out_channels();
        j["kernel"] = c->kernel();
        j["stride"] = c->stride();
        j["K"] = tensor_to_nested(c->K.value);
        j["b"] = tensor_to_nested(c->b.value);
    } else if (auto* p = dynamic_cast<const AvgPool2dLayer*>(&layer)) {
        j["window"] = p->window();
    } else if (auto* r = dynamic_cast<const RateNormLayer*>(&layer)) {
        j["p_raw"] = r->p_raw();
        j["running_max"] = r->running_max();
        j["momentum"] = r->momentum();
        j["locked"] = r->locked();
        j["shared_group"] = r->shared_group();
    }
    return j;
}

}  // namespace

json network_to_json(const Network& net) {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["kind"] = "ann";
    json layers = json::array();
    for (const auto& l : net.layers) layers.push_back(layer_to_json(*l));
    j["layers"] = layers;
    return j;
}

Network network_from_json(const json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointFormatVersion) {
        throw FormatError("checkpoint: unsupported or missing format_version");
    }
    if (!j.contains("layers") || !j["layers"].is_array()) {
        throw FormatError("checkpoint: missing layers array");
    }
    Network net;
    std::map<int, std::vector<RateNormLayer*>> groups;
    for (const auto& lj : j["layers"]) {
        const std::string kind = lj.at("kind").get<std::string>();
        if (kind == "affine") {
            auto l = std::make_unique<AffineLayer>(lj.at("in").get<std::size_t>(),
                                                   lj.at("out").get<std::size_t>());
            Tensor W = tensor_from_nested(lj.at("W"));
            Tensor b = tensor_from_nested(lj.at("b"));
            if (W.shape != l->W.value.shape || b.shape != l->b.value.shape) {
                throw FormatError("checkpoint: affine parameter shape mismatch");
            }
            l->W.value = std::move(W);
            l->b.value = std::move(b);
            net.layers.push_back(std::move(l));
        } else if (kind == "conv2d") {
            auto l = std::make_unique<Conv2dLayer>(
                lj.at("in_ch").get<std::size_t>(), lj.at("out_ch").get<std::size_t>(),
                lj.at("kernel").get<std::size_t>(), lj.at("stride").get<std::size_t>());
            Tensor K = tensor_from_nested(lj.at("K"));
            Tensor b = tensor_from_nested(lj.at("b"));
            if (K.shape != l->K.value.shape || b.shape != l->b.value.shape) {
                throw FormatError("checkpoint: conv2d parameter shape mismatch");
            }
            l->K.value = std::move(K);
            l->b.value = std::move(b);
            net.layers.push_back(std::move(l));
        } else if (kind == "avgpool2d") {
            net.layers.push_back(std::make_unique<AvgPool2dLayer>(lj.at("window").get<std::size_t>()));
        } else if (kind == "relu") {
            net.layers.push_back(std::make_unique<ReluLayer>());
        } else if (kind == "rate_norm") {
            auto l = std::make_unique<RateNormLayer>();
            l->set_p_raw(lj.at("p_raw").get<double>());
            l->set_running_max(lj.at("running_max").get<double>());
            l->set_momentum(lj.at("momentum").get<double>());
            l->p_state()->locked = lj.at("locked").get<bool>();
            const int group = lj.at("shared_group").get<int>();
            l->set_shared_group(group);
            if (group >= 0) groups[group].push_back(l.get());
            net.layers.push_back(std::move(l));
        } else {
            throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
        }
    }
    for (auto& [group, members] : groups) {
        if (members.size() > 1) tie_shared_p(members);
    }
    return net;
}

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create checkpoint file " + path);
    out << network_to_json(net).dump(2) << "\n";
}

Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open checkpoint file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("corrupted checkpoint " + path + ": " + e.what());
    }
    return network_from_json(j);
}

json snn_to_json(const SpikingNet& snn) {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["kind"] = "snn";
    json stages = json::array();
    for (const auto& s : snn.stages) {
        json sj;
        sj["kind"] = s.op.kind;
        if (s.op.kind == "affine") {
            sj["W"] = tensor_to_nested(s.op.W);
            sj["b"] = tensor_to_nested(s.op.b);
        } else if (s.op.kind == "conv2d") {
            sj["K"] = tensor_to_nested(s.op.K);
            sj["b"] = tensor_to_nested(s.op.b);
            sj["stride"] = s.op.stride;
        } else if (s.op.kind == "avgpool2d") {
            sj["window"] = s.op.window;
        }
        sj["v_th"] = s.v_th ? json(*s.v_th) : json(nullptr);
        stages.push_back(sj);
    }
    j["stages"] = stages;
    return j;
}

SpikingNet snn_from_json(const json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointFormatVersion) {
        throw FormatError("snn checkpoint: unsupported or missing format_version");
    }
    SpikingNet snn;
    for (const auto& sj : j.at("stages")) {
        SpikingStage stage;
        stage.op.kind = sj.at("kind").get<std::string>();
        if (stage.op.kind == "affine") {
            stage.op.W = tensor_from_nested(sj.at("W"));
            stage.op.b = tensor_from_nested(sj.at("b"));
        } else if (stage.op.kind == "conv2d") {
            stage.op.K = tensor_from_nested(sj.at("K"));
            stage.op.b = tensor_from_nested(sj.at("b"));
            stage.op.stride = sj.at("stride").get<std::size_t>();
        } else if (stage.op.kind == "avgpool2d") {
            stage.op.window = sj.at("window").get<std::size_t>();
        } else {
            throw FormatError("snn checkpoint: unknown stage kind '" + stage.op.kind + "'");
        }
        if (!sj.at("v_th").is_null()) stage.v_th = sj.at("v_th").get<double>();
        snn.stages.push_back(std::move(stage));
    }
    return snn;
}

void save_snn(const SpikingNet& snn, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create snn checkpoint " + path);
    out << snn_to_json(snn).dump(2) << "\n";
}

SpikingNet load_snn(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open snn checkpoint " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("corrupted snn checkpoint " + path + ": " + e.what());
    }
    return snn_from_json(j);
}

json report_to_json(const ConversionReport& report) {
    json j;
    j["scheme"] = report.scheme;
    j["v_th"] = report.v_th;
    j["w_scale"] = report.w_scale;
    j["b_scale"] = report.b_scale;
    j["calibration_size"] = report.calibration_size;
    if (report.percentile) j["percentile"] = *report.percentile;
    if (report.input_max) j["input_max"] = *report.input_max;
    return j;
}

}  // namespace snnkit
