// Command-line entry point: train / convert / simulate / diagnose / run /
// validate, each driven by a JSON experiment config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "snnkit/checkpoint.hpp"
#include "snnkit/conversion.hpp"
#include "snnkit/diagnostics.hpp"
#include "snnkit/experiment.hpp"
#include "snnkit/training.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::int64_t seed_override = -1;
    bool stage1_only = false;
};

snnkit::ExperimentConfig resolve_config(const CommonArgs& args) {
    snnkit::ExperimentConfig cfg = snnkit::load_config(args.config_path);
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;
    if (args.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    if (args.stage1_only) cfg.stage1_only = true;
    return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args, bool with_stage1_only = false) {
    sub->add_option("--config", args.config_path, "experiment config JSON")->required();
    sub->add_option("--out", args.out_override, "output directory override");
    sub->add_option("--seed", args.seed_override, "seed override");
    if (with_stage1_only) {
        sub->add_flag("--stage1-only", args.stage1_only, "skip stage 2 threshold training");
    }
}

int cmd_train(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    std::filesystem::create_directories(cfg.out_dir);
    auto splits = snnkit::load_splits(cfg, cfg.conversion.calibration_size);
    snnkit::Network net = snnkit::build_network(cfg.architecture, cfg.seed);
    snnkit::TrainLog log1 = snnkit::stage1_train(net, splits.train, cfg.stage1);
    std::ofstream(cfg.out_dir + "/stage1_log.csv") << log1.to_csv();
    snnkit::save_network(net, cfg.out_dir + "/ann_stage1.json");
    std::cout << "stage 1 done: train acc " << log1.rows.back().accuracy << "\n";
    if (!cfg.stage1_only && cfg.stage2.epochs > 0) {
        snnkit::TrainLog log2 = snnkit::stage2_train(net, splits.train, cfg.stage2);
        std::ofstream(cfg.out_dir + "/stage2_log.csv") << log2.to_csv();
        snnkit::save_network(net, cfg.out_dir + "/ann_stage2.json");
        std::cout << "stage 2 done: p " << log2.rows.back().p << "\n";
    }
    return 0;
}

int cmd_convert(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string ckpt = std::filesystem::exists(cfg.out_dir + "/ann_stage2.json")
                                 ? cfg.out_dir + "/ann_stage2.json"
                                 : cfg.out_dir + "/ann_stage1.json";
    snnkit::Network net = snnkit::load_network(ckpt);
    snnkit::ConversionResult conv;
    if (cfg.conversion.scheme == "direct") {
        conv = snnkit::convert_direct(net);
    } else {
        auto splits = snnkit::load_splits(cfg, cfg.conversion.calibration_size);
        snnkit::NormOptions opts;
        opts.input_max = cfg.conversion.input_max;
        conv = cfg.conversion.scheme == "max_norm"
                   ? snnkit::convert_max_norm(net, splits.calibration.inputs, opts)
                   : snnkit::convert_robust_norm(net, splits.calibration.inputs,
                                                 cfg.conversion.percentile, opts);
    }
    if (cfg.conversion.threshold_scale != 1.0) {
        conv.snn = snnkit::scale_thresholds(conv.snn, cfg.conversion.threshold_scale);
    }
    snnkit::save_snn(conv.snn, cfg.out_dir + "/snn.json");
    std::ofstream(cfg.out_dir + "/conversion_report.json")
        << snnkit::report_to_json(conv.report).dump(2) << "\n";
    std::cout << "converted (" << conv.report.scheme << "), " << conv.report.v_th.size()
              << " spiking layers\n";
    return 0;
}

int cmd_simulate(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    snnkit::SpikingNet snn = snnkit::load_snn(cfg.out_dir + "/snn.json");
    auto splits = snnkit::load_splits(cfg, cfg.conversion.calibration_size);
    auto series = snnkit::evaluate(snn, splits.test.inputs, splits.test.labels, cfg.simulation.T,
                                   snnkit::coding_from_string(cfg.simulation.coding), cfg.seed);
    json tj;
    tj["T"] = series.T;
    tj["accuracy_series"] = series.accuracy_series;
    tj["total_spikes_series"] = series.total_spikes_series;
    std::ofstream(cfg.out_dir + "/trace_summary.json") << tj.dump(2) << "\n";
    std::cout << "simulated " << series.n_samples << " samples for T=" << series.T
              << ", final accuracy " << series.accuracy_series.back() << "\n";
    return 0;
}

int cmd_diagnose(const CommonArgs& args) {
    // Deterministic pipeline rerun; emits the diagnostic files only.
    auto cfg = resolve_config(args);
    auto result = snnkit::run_experiment(cfg);
    std::cout << result.summary.dump(2) << "\n";
    return 0;
}

int cmd_run(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    auto result = snnkit::run_experiment(cfg);
    std::cout << "artifacts in " << result.out_dir << "\n";
    std::cout << result.summary.dump(2) << "\n";
    return 0;
}

bool check_csv(const std::string& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) return false;
    std::string line;
    if (!std::getline(in, line)) return false;
    return line.rfind(header, 0) == 0;
}

int cmd_validate(const std::string& path) {
    namespace fs = std::filesystem;
    const std::string name = fs::path(path).filename().string();
    if (name.ends_with(".json")) {
        std::ifstream in(path);
        if (!in) throw snnkit::FormatError("cannot open " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw snnkit::FormatError("invalid JSON in " + path + ": " + e.what());
        }
        if (name == "summary.json" &&
            !(j.contains("format_version") && j.contains("ann_accuracy") && j.contains("T"))) {
            throw snnkit::FormatError(path + ": missing summary fields");
        }
        if ((name == "ann_stage1.json" || name == "ann_stage2.json" || name == "snn.json") &&
            !j.contains("format_version")) {
            throw snnkit::FormatError(path + ": missing format_version");
        }
        if (name == "trace_summary.json" &&
            !(j.contains("T") && j.contains("accuracy_series") && j.contains("total_spikes_series"))) {
            throw snnkit::FormatError(path + ": missing trace fields");
        }
    } else if (name == "k_curves.csv") {
        if (!check_csv(path, "t,layer,K")) throw snnkit::FormatError(path + ": bad header");
    } else if (name == "energy.csv") {
        if (!check_csv(path, "t,power_w,energy_j,accuracy")) {
            throw snnkit::FormatError(path + ": bad header");
        }
    } else if (name == "trace.csv") {
        if (!check_csv(path, "t,layer,mean_rate,cum_spikes")) {
            throw snnkit::FormatError(path + ": bad header");
        }
    } else if (name.ends_with(".csv")) {
        if (!check_csv(path, "epoch,loss,acc,mean_omega,p")) {
            throw snnkit::FormatError(path + ": bad header");
        }
    } else {
        throw snnkit::ArgumentError("do not know how to validate " + path);
    }
    std::cout << path << ": ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rate-norm ANN-to-SNN conversion toolkit"};
    app.require_subcommand(1);

    CommonArgs train_args, convert_args, simulate_args, diagnose_args, run_args;
    std::string validate_path;

    auto* train = app.add_subcommand("train", "run the two training stages");
    add_common(train, train_args, true);
    auto* convert = app.add_subcommand("convert", "convert a trained checkpoint to an SNN");
    add_common(convert, convert_args);
    auto* simulate = app.add_subcommand("simulate", "simulate a converted SNN on the test split");
    add_common(simulate, simulate_args);
    auto* diagnose = app.add_subcommand("diagnose", "full diagnostics (K curves, energy)");
    add_common(diagnose, diagnose_args);
    auto* runcmd = app.add_subcommand("run", "whole pipeline: train, convert, simulate, diagnose");
    add_common(runcmd, run_args, true);
    auto* validate = app.add_subcommand("validate", "check an output file against its schema");
    validate->add_option("path", validate_path, "artifact file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (convert->parsed()) return cmd_convert(convert_args);
        if (simulate->parsed()) return cmd_simulate(simulate_args);
        if (diagnose->parsed()) return cmd_diagnose(diagnose_args);
        if (runcmd->parsed()) return cmd_run(run_args);
        if (validate->parsed()) return cmd_validate(validate_path);
    } catch (const snnkit::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const snnkit::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const snnkit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
