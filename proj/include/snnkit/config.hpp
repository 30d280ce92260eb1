#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "snnkit/network.hpp"
#include "snnkit/training.hpp"

namespace snnkit {

struct DatasetConfig {
    std::string source;  // synthetic | idx
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t train_limit = 0;  // 0 = all
    std::size_t test_limit = 0;
    // synthetic
    std::size_t n_train = 0, n_test = 0, classes = 0, dim = 0;
    double sigma_scale = 1.0;
    std::size_t image_side = 0;  // reshape inputs to [N,1,side,side] for conv nets
    std::uint64_t seed = 0;
};

struct ConversionConfig {
    std::string scheme = "direct";  // direct | max_norm | robust_norm
    double percentile = 99.9;
    double threshold_scale = 1.0;
    std::size_t calibration_size = 256;
    std::optional<double> input_max;
};

struct SimulationConfig {
    std::size_t T = 2000;
    std::string coding = "constant";
};

struct DiagnosticsConfig {
    double target_accuracy_drop = 0.02;  // target = ANN accuracy - drop
    std::size_t k_curve_samples = 1;     // batch-mean K over this many test inputs
    bool compare_baseline = true;        // also run the p=1 (Max Norm equivalent) net
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    DatasetConfig dataset;
    std::vector<LayerSpec> architecture;
    StageConfig stage1;
    StageConfig stage2;
    bool stage1_only = false;
    ConversionConfig conversion;
    SimulationConfig simulation;
    DiagnosticsConfig diagnostics;
    double alpha = 1e-9;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace snnkit
