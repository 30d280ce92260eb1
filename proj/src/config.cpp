#include "snnkit/config.hpp"

#include <filesystem>
#include <fstream>

namespace snnkit {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

LayerSpec layer_spec_from_json(const json& j) {
    LayerSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.in = get_or<std::size_t>(j, "in", 0);
    s.out = get_or<std::size_t>(j, "out", 0);
    s.in_ch = get_or<std::size_t>(j, "in_ch", 0);
    s.out_ch = get_or<std::size_t>(j, "out_ch", 0);
    s.kernel = get_or<std::size_t>(j, "kernel", 0);
    s.stride = get_or<std::size_t>(j, "stride", 1);
    s.window = get_or<std::size_t>(j, "window", 0);
    return s;
}

json layer_spec_to_json(const LayerSpec& s) {
    json j;
    j["kind"] = s.kind;
    if (s.kind == "affine") {
        j["in"] = s.in;
        j["out"] = s.out;
    } else if (s.kind == "conv2d") {
        j["in_ch"] = s.in_ch;
        j["out_ch"] = s.out_ch;
        j["kernel"] = s.kernel;
        j["stride"] = s.stride;
    } else if (s.kind == "avgpool2d") {
        j["window"] = s.window;
    }
    return j;
}

StageConfig stage_from_json(const json& j) {
    StageConfig s;
    s.epochs = get_or<std::size_t>(j, "epochs", 0);
    s.lr = get_or<double>(j, "lr", 0.1);
    s.sgd_momentum = get_or<double>(j, "momentum", 0.9);
    s.lambda = get_or<double>(j, "lambda", 0.5);
    s.batch_size = get_or<std::size_t>(j, "batch_size", 32);
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    s.p_init = get_or<double>(j, "p_init", 0.9975);
    if (s.lambda < 0.0) throw FormatError("config: lambda must be >= 0");
    if (s.batch_size == 0) throw FormatError("config: batch_size must be positive");
    return s;
}

json stage_to_json(const StageConfig& s) {
    json j;
    j["epochs"] = s.epochs;
    j["lr"] = s.lr;
    j["momentum"] = s.sgd_momentum;
    j["lambda"] = s.lambda;
    j["batch_size"] = s.batch_size;
    j["seed"] = s.seed;
    j["p_init"] = s.p_init;
    return j;
}

void require_file(const std::string& path, const char* what) {
    if (!std::filesystem::exists(path)) {
        throw FormatError(std::string("config: ") + what + " file does not exist: " + path);
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.out_dir = get_or<std::string>(j, "out_dir", "out");

    const json& dj = j.at("dataset");
    cfg.dataset.source = dj.at("source").get<std::string>();
    if (cfg.dataset.source == "idx") {
        cfg.dataset.train_images = dj.at("train_images").get<std::string>();
        cfg.dataset.train_labels = dj.at("train_labels").get<std::string>();
        cfg.dataset.test_images = dj.at("test_images").get<std::string>();
        cfg.dataset.test_labels = dj.at("test_labels").get<std::string>();
        cfg.dataset.train_limit = get_or<std::size_t>(dj, "train_limit", 0);
        cfg.dataset.test_limit = get_or<std::size_t>(dj, "test_limit", 0);
        require_file(cfg.dataset.train_images, "train images");
        require_file(cfg.dataset.train_labels, "train labels");
        require_file(cfg.dataset.test_images, "test images");
        require_file(cfg.dataset.test_labels, "test labels");
    } else if (cfg.dataset.source == "synthetic") {
        cfg.dataset.n_train = dj.at("n_train").get<std::size_t>();
        cfg.dataset.n_test = dj.at("n_test").get<std::size_t>();
        cfg.dataset.classes = dj.at("classes").get<std::size_t>();
        cfg.dataset.dim = dj.at("dim").get<std::size_t>();
        cfg.dataset.sigma_scale = get_or<double>(dj, "sigma_scale", 1.0);
        cfg.dataset.image_side = get_or<std::size_t>(dj, "image_side", 0);
        cfg.dataset.seed = get_or<std::uint64_t>(dj, "seed", cfg.seed);
        if (cfg.dataset.image_side > 0 &&
            cfg.dataset.image_side * cfg.dataset.image_side != cfg.dataset.dim) {
            throw FormatError("config: image_side^2 must equal dim");
        }
    } else {
        throw FormatError("config: dataset.source must be 'idx' or 'synthetic'");
    }

    if (!j.contains("architecture") || !j.at("architecture").is_array() ||
        j.at("architecture").empty()) {
        throw FormatError("config: architecture must be a non-empty array of layer specs");
    }
    for (const auto& lj : j.at("architecture")) {
        cfg.architecture.push_back(layer_spec_from_json(lj));
    }

    if (j.contains("stage1")) cfg.stage1 = stage_from_json(j.at("stage1"));
    if (j.contains("stage2")) cfg.stage2 = stage_from_json(j.at("stage2"));
    cfg.stage1_only = get_or<bool>(j, "stage1_only", false);

    if (j.contains("conversion")) {
        const json& cj = j.at("conversion");
        cfg.conversion.scheme = get_or<std::string>(cj, "scheme", "direct");
        cfg.conversion.percentile = get_or<double>(cj, "percentile", 99.9);
        cfg.conversion.threshold_scale = get_or<double>(cj, "threshold_scale", 1.0);
        cfg.conversion.calibration_size = get_or<std::size_t>(cj, "calibration_size", 256);
        if (cj.contains("input_max")) cfg.conversion.input_max = cj.at("input_max").get<double>();
        if (cfg.conversion.scheme != "direct" && cfg.conversion.scheme != "max_norm" &&
            cfg.conversion.scheme != "robust_norm") {
            throw FormatError("config: unknown conversion scheme '" + cfg.conversion.scheme + "'");
        }
    }
    if (j.contains("simulation")) {
        const json& sj = j.at("simulation");
        cfg.simulation.T = get_or<std::size_t>(sj, "T", 2000);
        cfg.simulation.coding = get_or<std::string>(sj, "coding", "constant");
        if (cfg.simulation.T < 1) throw FormatError("config: simulation.T must be >= 1");
        if (cfg.simulation.coding != "constant" && cfg.simulation.coding != "poisson") {
            throw FormatError("config: coding must be 'constant' or 'poisson'");
        }
    }
    if (j.contains("diagnostics")) {
        const json& gj = j.at("diagnostics");
        cfg.diagnostics.target_accuracy_drop = get_or<double>(gj, "target_accuracy_drop", 0.02);
        cfg.diagnostics.k_curve_samples = get_or<std::size_t>(gj, "k_curve_samples", 1);
        cfg.diagnostics.compare_baseline = get_or<bool>(gj, "compare_baseline", true);
    }
    cfg.alpha = get_or<double>(j, "alpha", 1e-9);
    if (cfg.alpha <= 0.0) throw FormatError("config: alpha must be positive");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("config parse error in " + path + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw FormatError("config error in " + path + ": " + e.what());
    }
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    json dj;
    dj["source"] = cfg.dataset.source;
    if (cfg.dataset.source == "idx") {
        dj["train_images"] = cfg.dataset.train_images;
        dj["train_labels"] = cfg.dataset.train_labels;
        dj["test_images"] = cfg.dataset.test_images;
        dj["test_labels"] = cfg.dataset.test_labels;
        dj["train_limit"] = cfg.dataset.train_limit;
        dj["test_limit"] = cfg.dataset.test_limit;
    } else {
        dj["n_train"] = cfg.dataset.n_train;
        dj["n_test"] = cfg.dataset.n_test;
        dj["classes"] = cfg.dataset.classes;
        dj["dim"] = cfg.dataset.dim;
        dj["sigma_scale"] = cfg.dataset.sigma_scale;
        dj["image_side"] = cfg.dataset.image_side;
        dj["seed"] = cfg.dataset.seed;
    }
    j["dataset"] = dj;
    json arch = json::array();
    for (const auto& s : cfg.architecture) arch.push_back(layer_spec_to_json(s));
    j["architecture"] = arch;
    j["stage1"] = stage_to_json(cfg.stage1);
    j["stage2"] = stage_to_json(cfg.stage2);
    j["stage1_only"] = cfg.stage1_only;
    json cj;
    cj["scheme"] = cfg.conversion.scheme;
    cj["percentile"] = cfg.conversion.percentile;
    cj["threshold_scale"] = cfg.conversion.threshold_scale;
    cj["calibration_size"] = cfg.conversion.calibration_size;
    if (cfg.conversion.input_max) cj["input_max"] = *cfg.conversion.input_max;
    j["conversion"] = cj;
    json sj;
    sj["T"] = cfg.simulation.T;
    sj["coding"] = cfg.simulation.coding;
    j["simulation"] = sj;
    json gj;
    gj["target_accuracy_drop"] = cfg.diagnostics.target_accuracy_drop;
    gj["k_curve_samples"] = cfg.diagnostics.k_curve_samples;
    gj["compare_baseline"] = cfg.diagnostics.compare_baseline;
    j["diagnostics"] = gj;
    j["alpha"] = cfg.alpha;
    return j;
}

}  // namespace snnkit
