#pragma once

#include <string>

#include <json.hpp>

#include "snnkit/config.hpp"
#include "snnkit/dataset.hpp"

namespace snnkit {

struct ExperimentResult {
    std::string out_dir;
    nlohmann::json summary;
};

// Loads (or generates) the configured dataset splits.
struct DataSplits {
    Dataset train;
    Dataset test;
    Dataset calibration;
};
DataSplits load_splits(const ExperimentConfig& cfg, std::size_t calibration_size);

// Full pipeline: train (stage 1, optionally stage 2), convert, simulate,
// diagnose. Writes checkpoints, train logs, conversion_report.json,
// k_curves.csv, energy.csv, trace_summary.json and summary.json under
// cfg.out_dir. Reruns with the same config produce bit-identical output.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace snnkit
