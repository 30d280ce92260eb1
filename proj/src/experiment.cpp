#include "snnkit/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snnkit/checkpoint.hpp"
#include "snnkit/conversion.hpp"
#include "snnkit/diagnostics.hpp"
#include "snnkit/training.hpp"

namespace snnkit {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create output file " + path);
    out << content;
}

json optional_size_to_json(const std::optional<std::size_t>& v) {
    return v ? json(*v) : json(nullptr);
}

json optional_double_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

struct SimulatedDiagnostics {
    EvalSeries series;
    std::vector<KCurve> k_curves;
    std::vector<Tensor> mean_ann_rates;  // per layer, from the K-curve samples
    EnergyReport energy;
    std::vector<double> bound_margins;
};

// Per-layer simulated rates the converted SNN should approach. Rate-norm
// nets expose them directly; for normalized ReLU nets they are the
// activations over the recorded scaling factor. A threshold scale of s
// divides every threshold, so rates grow to min(r/s, 1).
std::vector<Tensor> simulated_rates_for_scheme(Network& ann, const Tensor& x,
                                               const ConversionReport& report,
                                               double threshold_scale) {
    std::vector<Tensor> rates;
    if (report.scheme == "direct") {
        rates = ann_simulated_rates(ann, x);
    } else {
        Shape batched = x.shape;
        batched.insert(batched.begin(), 1);
        ann.forward(x.reshaped(batched), Mode::Eval);
        std::size_t act = 0;
        for (std::size_t i = 0; i < ann.layers.size(); ++i) {
            if (ann.layers[i]->kind() != "relu") continue;
            const Tensor& a = ann.layer_output(i);
            Tensor r({a.numel()});
            for (std::size_t k = 0; k < a.numel(); ++k) {
                r.data[k] = std::min(a.data[k] * report.b_scale[act], 1.0);
            }
            rates.push_back(std::move(r));
            ++act;
        }
    }
    if (threshold_scale != 1.0) {
        for (Tensor& r : rates) {
            for (double& v : r.data) v = std::min(v / threshold_scale, 1.0);
        }
    }
    return rates;
}

SimulatedDiagnostics diagnose_net(Network& ann, const SpikingNet& snn, const Dataset& test,
                                  const ExperimentConfig& cfg, double target_accuracy,
                                  const ConversionReport& report, double threshold_scale) {
    SimulatedDiagnostics d;
    const Coding coding = coding_from_string(cfg.simulation.coding);
    d.series = evaluate(snn, test.inputs, test.labels, cfg.simulation.T, coding, cfg.seed);

    const std::size_t n_k = std::max<std::size_t>(1, std::min(cfg.diagnostics.k_curve_samples,
                                                              test.size()));
    std::vector<std::vector<Tensor>> rates;
    std::vector<SimulationTrace> traces;
    for (std::size_t s = 0; s < n_k; ++s) {
        Tensor x = test.sample(s);
        rates.push_back(simulated_rates_for_scheme(ann, x, report, threshold_scale));
        traces.push_back(run(snn, x, cfg.simulation.T, coding, cfg.seed + s));
    }
    d.k_curves = k_curves_batch_mean(rates, traces);
    // Batch-mean simulated rates, for per-layer Omega reporting.
    d.mean_ann_rates = rates[0];
    for (std::size_t s = 1; s < rates.size(); ++s) {
        for (std::size_t l = 0; l < d.mean_ann_rates.size(); ++l) {
            for (std::size_t i = 0; i < d.mean_ann_rates[l].numel(); ++i) {
                d.mean_ann_rates[l].data[i] += rates[s][l].data[i];
            }
        }
    }
    for (auto& t : d.mean_ann_rates) {
        for (double& v : t.data) v /= double(rates.size());
    }
    d.energy = power_series(d.series.spikes_per_step, cfg.alpha, &d.series.accuracy_series,
                            target_accuracy);
    d.bound_margins = final_step_bound_margins(d.mean_ann_rates, d.k_curves);
    return d;
}

std::string k_curves_csv(const std::vector<KCurve>& curves) {
    std::string out = "t,layer,K\n";
    for (std::size_t t = 0; curves.empty() ? false : t < curves[0].k.size(); ++t) {
        for (const auto& c : curves) {
            out += std::to_string(t + 1) + "," + std::to_string(c.layer + 1) + "," +
                   fmt17(c.k[t]) + "\n";
        }
    }
    return out;
}

std::string energy_csv(const EnergyReport& energy, const std::vector<double>& accuracy) {
    std::string out = "t,power_w,energy_j,accuracy\n";
    for (std::size_t t = 0; t < energy.power.size(); ++t) {
        out += std::to_string(t + 1) + "," + fmt17(energy.power[t]) + "," +
               fmt17(energy.energy[t]) + "," + fmt17(accuracy[t]) + "\n";
    }
    return out;
}

std::string trace_csv(const SimulationTrace& trace) {
    std::string out = "t,layer,mean_rate,cum_spikes\n";
    for (std::size_t t = 1; t <= trace.T; ++t) {
        for (std::size_t l = 0; l < trace.cum_counts.size(); ++l) {
            const auto& counts = trace.cum_counts[l][t - 1];
            std::uint64_t total = 0;
            for (std::uint32_t c : counts) total += c;
            const double mean_rate =
                counts.empty() ? 0.0 : double(total) / double(counts.size()) / double(t);
            out += std::to_string(t) + "," + std::to_string(l + 1) + "," + fmt17(mean_rate) + "," +
                   std::to_string(total) + "\n";
        }
    }
    return out;
}

}  // namespace

DataSplits load_splits(const ExperimentConfig& cfg, std::size_t calibration_size) {
    DataSplits splits;
    if (cfg.dataset.source == "idx") {
        splits.train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
        if (cfg.dataset.train_limit > 0) splits.train = splits.train.head(cfg.dataset.train_limit);
        splits.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
        if (cfg.dataset.test_limit > 0) splits.test = splits.test.head(cfg.dataset.test_limit);
    } else {
        // One pool, then split: train and test must share the class centers.
        Dataset pool = gen_synthetic(cfg.dataset.seed, cfg.dataset.n_train + cfg.dataset.n_test,
                                     cfg.dataset.classes, cfg.dataset.dim, cfg.dataset.sigma_scale);
        std::vector<std::size_t> train_idx(cfg.dataset.n_train), test_idx(cfg.dataset.n_test);
        for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
        for (std::size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = cfg.dataset.n_train + i;
        splits.train = pool.subset(train_idx);
        splits.test = pool.subset(test_idx);
        if (cfg.dataset.image_side > 0) {
            const std::size_t side = cfg.dataset.image_side;
            splits.train.inputs = splits.train.inputs.reshaped({splits.train.size(), 1, side, side});
            splits.test.inputs = splits.test.inputs.reshaped({splits.test.size(), 1, side, side});
        }
    }
    splits.calibration = splits.train.head(std::min(calibration_size, splits.train.size()));
    return splits;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string dir = cfg.out_dir + "/";

    DataSplits splits = load_splits(cfg, cfg.conversion.calibration_size);

    Network net = build_network(cfg.architecture, cfg.seed);
    TrainLog log1 = stage1_train(net, splits.train, cfg.stage1);
    write_text(dir + "stage1_log.csv", log1.to_csv());
    save_network(net, dir + "ann_stage1.json");

    const double ann_acc = ann_accuracy(net, splits.test);
    const double target_acc = ann_acc - cfg.diagnostics.target_accuracy_drop;

    const bool run_stage2 = !cfg.stage1_only && cfg.stage2.epochs > 0 &&
                            !net.rate_norm_layers().empty();
    if (run_stage2) {
        TrainLog log2 = stage2_train(net, splits.train, cfg.stage2);
        write_text(dir + "stage2_log.csv", log2.to_csv());
        save_network(net, dir + "ann_stage2.json");
    }

    ConversionResult conv;
    if (cfg.conversion.scheme == "direct") {
        conv = convert_direct(net);
    } else {
        NormOptions opts;
        opts.input_max = cfg.conversion.input_max;
        if (cfg.conversion.scheme == "max_norm") {
            conv = convert_max_norm(net, splits.calibration.inputs, opts);
        } else {
            conv = convert_robust_norm(net, splits.calibration.inputs, cfg.conversion.percentile,
                                       opts);
        }
        conv.report.calibration_size = splits.calibration.size();
    }
    if (cfg.conversion.threshold_scale != 1.0) {
        conv.snn = scale_thresholds(conv.snn, cfg.conversion.threshold_scale);
        for (double& v : conv.report.v_th) v *= cfg.conversion.threshold_scale;
    }
    save_snn(conv.snn, dir + "snn.json");
    write_text(dir + "conversion_report.json", report_to_json(conv.report).dump(2) + "\n");

    SimulatedDiagnostics diag = diagnose_net(net, conv.snn, splits.test, cfg, target_acc,
                                             conv.report, cfg.conversion.threshold_scale);
    write_text(dir + "k_curves.csv", k_curves_csv(diag.k_curves));
    write_text(dir + "energy.csv", energy_csv(diag.energy, diag.series.accuracy_series));
    {
        const Coding coding = coding_from_string(cfg.simulation.coding);
        SimulationTrace t0 = run(conv.snn, splits.test.sample(0), cfg.simulation.T, coding, cfg.seed);
        write_text(dir + "trace.csv", trace_csv(t0));
        json tj;
        tj["T"] = diag.series.T;
        tj["accuracy_series"] = diag.series.accuracy_series;
        tj["total_spikes_series"] = diag.series.total_spikes_series;
        write_text(dir + "trace_summary.json", tj.dump(2) + "\n");
    }

    json summary;
    summary["format_version"] = 1;
    summary["dataset_source"] = cfg.dataset.source;
    summary["scheme"] = conv.report.scheme;
    summary["T"] = cfg.simulation.T;
    summary["coding"] = cfg.simulation.coding;
    summary["ann_accuracy"] = ann_acc;
    summary["target_accuracy"] = target_acc;
    summary["snn_accuracy_final"] = diag.series.accuracy_series.back();
    summary["time_to_target"] = optional_size_to_json(diag.energy.time_to_target);
    summary["energy_to_target_j"] = optional_double_to_json(diag.energy.energy_to_target);
    summary["total_spikes"] = diag.series.total_spikes_series.back();
    summary["alpha_j_per_spike"] = cfg.alpha;
    summary["energy_total_j"] = diag.energy.energy.back();
    {
        json omegas = json::array();
        for (const Tensor& r : diag.mean_ann_rates) omegas.push_back(omega(r));
        summary["per_layer_omega"] = omegas;
        json margins = json::array();
        for (double m : diag.bound_margins) margins.push_back(m);
        summary["k_bound_final_margins"] = margins;
    }
    {
        json thetas = json::array();
        for (RateNormLayer* r : net.rate_norm_layers()) thetas.push_back(r->threshold());
        summary["thetas"] = thetas;
        summary["p"] = net.rate_norm_layers().empty() ? 1.0 : net.rate_norm_layers().front()->p();
    }

    // Baseline: the same weights converted with p locked at 1, the Max Norm
    // equivalent of the direct scheme. Reported as speedup/energy ratios.
    if (run_stage2 && cfg.diagnostics.compare_baseline && cfg.conversion.scheme == "direct") {
        auto rnls = net.rate_norm_layers();
        ConversionResult base;
        {
            ScopedPLock lock(rnls);
            base = convert_direct(net);
        }
        SimulatedDiagnostics bdiag =
            diagnose_net(net, base.snn, splits.test, cfg, target_acc, base.report, 1.0);
        json bj;
        bj["time_to_target"] = optional_size_to_json(bdiag.energy.time_to_target);
        bj["energy_to_target_j"] = optional_double_to_json(bdiag.energy.energy_to_target);
        bj["snn_accuracy_final"] = bdiag.series.accuracy_series.back();
        bj["total_spikes"] = bdiag.series.total_spikes_series.back();
        if (diag.energy.time_to_target && bdiag.energy.time_to_target) {
            const double speedup = double(*bdiag.energy.time_to_target) /
                                   double(*diag.energy.time_to_target);
            bj["speedup_ratio"] = speedup;
            bj["log10_speedup_ratio"] = std::log10(speedup);
        }
        if (diag.energy.energy_to_target && bdiag.energy.energy_to_target &&
            *bdiag.energy.energy_to_target > 0.0) {
            const double ratio = *diag.energy.energy_to_target / *bdiag.energy.energy_to_target;
            bj["energy_ratio"] = ratio;
            bj["log10_energy_ratio"] = std::log10(ratio);
        }
        summary["baseline_p1"] = bj;
    }

    write_text(dir + "summary.json", summary.dump(2) + "\n");

    ExperimentResult result;
    result.out_dir = cfg.out_dir;
    result.summary = summary;
    return result;
}

}  // namespace snnkit
