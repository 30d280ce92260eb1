#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "snnkit/conversion.hpp"
#include "snnkit/diagnostics.hpp"

using namespace snnkit;

namespace {

// ReLU-activation network with explicit weights.
Network relu_net(const std::vector<Tensor>& Ws, const std::vector<Tensor>& bs) {
    Network net;
    for (std::size_t l = 0; l < Ws.size(); ++l) {
        auto aff = std::make_unique<AffineLayer>(Ws[l].shape[1], Ws[l].shape[0]);
        aff->W.value = Ws[l];
        aff->b.value = bs[l];
        net.layers.push_back(std::move(aff));
        net.layers.push_back(std::make_unique<ReluLayer>());
    }
    return net;
}

Network rnl_net(const std::vector<Tensor>& Ws, const std::vector<Tensor>& bs) {
    Network net;
    for (std::size_t l = 0; l < Ws.size(); ++l) {
        auto aff = std::make_unique<AffineLayer>(Ws[l].shape[1], Ws[l].shape[0]);
        aff->W.value = Ws[l];
        aff->b.value = bs[l];
        net.layers.push_back(std::move(aff));
        net.layers.push_back(std::make_unique<RateNormLayer>());
    }
    return net;
}

Tensor random_uniform(Shape s, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(s));
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("convert_direct: thresholds copied, rates track the ANN") {
    Network ann = rnl_net({Tensor({1, 1}, {1.0})}, {Tensor({1})});
    ann.rate_norm_layers()[0]->set_running_max(0.5);

    auto [snn, report] = convert_direct(ann);
    REQUIRE(report.v_th.size() == 1);
    CHECK(report.v_th[0] == 0.5);
    CHECK(snn.stages[0].v_th == 0.5);
    CHECK(report.scheme == "direct");

    Tensor x({1}, {0.25});
    Tensor r_hat = ann.forward(x.reshaped({1, 1}), Mode::Eval);
    CHECK(r_hat.data[0] == doctest::Approx(0.5));

    SimulationTrace trace = run(snn, x, 2000, Coding::Constant);
    CHECK(std::abs(trace.firing_rates(0, 2000).data[0] - 0.5) <= 1.0 / 2000.0);
}

TEST_CASE("convert_direct with theta=1 leaves parameters at max-norm values") {
    std::mt19937_64 rng(7);
    Tensor W = random_uniform({3, 2}, rng, -1, 1);
    Tensor b = random_uniform({3}, rng, -0.2, 0.2);
    Network ann = rnl_net({W}, {b});
    ann.rate_norm_layers()[0]->set_running_max(1.0);  // theta = 1: Max Norm degeneracy

    auto [snn, report] = convert_direct(ann);
    CHECK(*snn.stages[0].v_th == 1.0);
    for (std::size_t i = 0; i < W.numel(); ++i) CHECK(snn.stages[0].op.W.data[i] == W.data[i]);
    for (std::size_t i = 0; i < b.numel(); ++i) CHECK(snn.stages[0].op.b.data[i] == b.data[i]);
}

TEST_CASE("convert_direct rejects ReLU activations") {
    Network ann = relu_net({Tensor({2, 2}, {1, 0, 0, 1})}, {Tensor({2})});
    CHECK_THROWS_AS(convert_direct(ann), ConversionError);
}

TEST_CASE("convert_direct: degenerate threshold raises") {
    Network ann = rnl_net({Tensor({1, 1}, {1.0})}, {Tensor({1})});
    ann.rate_norm_layers()[0]->set_running_max(0.0);
    CHECK_THROWS_AS(convert_direct(ann), DegenerateThresholdError);
}

TEST_CASE("convert_max_norm: direct substitution case") {
    Network ann = relu_net({Tensor({1, 1}, {2.0})}, {Tensor({1})});
    Tensor calib({1, 1}, {1.0});  // activation max = 2
    NormOptions opts;
    opts.input_max = 1.0;
    auto [snn, report] = convert_max_norm(ann, calib, opts);
    CHECK(snn.stages[0].op.W.data[0] == 1.0);
    CHECK(snn.stages[0].op.b.data[0] == 0.0);
    CHECK(*snn.stages[0].v_th == 1.0);
    CHECK(report.w_scale[0] == 0.5);
    CHECK(report.b_scale[0] == 0.5);
}

TEST_CASE("convert_max_norm: already-normalized net is unchanged") {
    Tensor W({2, 2}, {0.5, 0.5, 1.0, 0.0});
    Tensor b({2}, {0.0, 0.0});
    Network ann = relu_net({W}, {b});
    Tensor calib({1, 2}, {1.0, 1.0});  // activations: [1, 1] -> max 1
    auto [snn, report] = convert_max_norm(ann, calib);
    for (std::size_t i = 0; i < W.numel(); ++i) CHECK(snn.stages[0].op.W.data[i] == W.data[i]);
    CHECK(report.w_scale[0] == 1.0);
}

TEST_CASE("convert_max_norm satisfies the scaling identities bit-exactly") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor W1 = random_uniform({5, 3}, rng, -0.8, 0.8);
        Tensor b1 = random_uniform({5}, rng, -0.1, 0.3);
        Tensor W2 = random_uniform({4, 5}, rng, -0.8, 0.8);
        Tensor b2 = random_uniform({4}, rng, -0.1, 0.3);
        Network ann = relu_net({W1, W2}, {b1, b2});
        Tensor calib = random_uniform({16, 3}, rng, 0.0, 1.0);

        auto [snn, report] = convert_max_norm(ann, calib);

        // Oracle: recompute the activation maxima with the plain recursion.
        Tensor a = calib;
        double prev = calib.max_value();
        std::vector<Tensor> Ws = {W1, W2};
        std::vector<Tensor> bs = {b1, b2};
        for (std::size_t l = 0; l < 2; ++l) {
            a = clip_interval(affine_forward(Ws[l], a, bs[l]), 0.0,
                              std::numeric_limits<double>::infinity());
            const double cur = a.max_value();
            const double w_scale = prev / cur;
            const double b_scale = 1.0 / cur;
            CHECK(report.w_scale[l] == w_scale);
            for (std::size_t i = 0; i < Ws[l].numel(); ++i) {
                CHECK(snn.stages[l].op.W.data[i] == Ws[l].data[i] * w_scale);
            }
            for (std::size_t i = 0; i < bs[l].numel(); ++i) {
                CHECK(snn.stages[l].op.b.data[i] == bs[l].data[i] * b_scale);
            }
            CHECK(*snn.stages[l].v_th == 1.0);
            prev = cur;
        }
    }
}

TEST_CASE("convert_max_norm: converted rates track the normalized activations") {
    std::mt19937_64 rng(17);
    Tensor W1 = random_uniform({6, 3}, rng, 0.0, 0.6);
    Tensor b1 = random_uniform({6}, rng, 0.0, 0.2);
    Tensor W2 = random_uniform({4, 6}, rng, 0.0, 0.5);
    Tensor b2 = random_uniform({4}, rng, 0.0, 0.2);
    Network ann = relu_net({W1, W2}, {b1, b2});
    Tensor calib = random_uniform({24, 3}, rng, 0.0, 1.0);
    auto [snn, report] = convert_max_norm(ann, calib);

    // Simulate a calibration member; its activations stay below the maxima.
    Tensor x({3}, {calib.data[0], calib.data[1], calib.data[2]});
    SimulationTrace trace = run(snn, x, 4000, Coding::Constant);

    Tensor a1 = clip_interval(affine_forward(W1, x, b1), 0.0, 1e300);
    Tensor a2 = clip_interval(affine_forward(W2, a1, b2), 0.0, 1e300);
    ann.forward(calib, Mode::Eval);
    const double max1 = ann.layer_output(1).max_value();
    const double max2 = ann.layer_output(3).max_value();
    for (std::size_t i = 0; i < a1.numel(); ++i) {
        CHECK(std::abs(trace.firing_rates(0, 4000).data[i] - a1.data[i] / max1) <= 0.02);
    }
    for (std::size_t i = 0; i < a2.numel(); ++i) {
        CHECK(std::abs(trace.firing_rates(1, 4000).data[i] - a2.data[i] / max2) <= 0.02);
    }
}

TEST_CASE("convert_max_norm: dead layer raises") {
    Network ann = relu_net({Tensor({1, 1}, {-1.0})}, {Tensor({1})});
    Tensor calib({2, 1}, {0.5, 1.0});
    CHECK_THROWS_AS(convert_max_norm(ann, calib), ConversionError);
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> vals = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(nearest_rank_percentile(vals, 90.0) == 0.9);
    CHECK(nearest_rank_percentile(vals, 100.0) == 1.0);
    CHECK(nearest_rank_percentile(vals, 5.0) == 0.1);
    CHECK_THROWS_AS(nearest_rank_percentile(vals, 0.0), ArgumentError);
    CHECK_THROWS_AS(nearest_rank_percentile(vals, 100.5), ArgumentError);
}

TEST_CASE("convert_robust_norm at percentile 100 equals max norm") {
    std::mt19937_64 rng(19);
    Tensor W = random_uniform({4, 3}, rng, -0.7, 0.7);
    Tensor b = random_uniform({4}, rng, 0.0, 0.2);
    Network ann = relu_net({W}, {b});
    Tensor calib = random_uniform({12, 3}, rng, 0.0, 1.0);
    auto max_res = convert_max_norm(ann, calib);
    auto rob_res = convert_robust_norm(ann, calib, 100.0);
    for (std::size_t i = 0; i < W.numel(); ++i) {
        CHECK(rob_res.snn.stages[0].op.W.data[i] == max_res.snn.stages[0].op.W.data[i]);
    }
    CHECK(rob_res.report.scheme == "robust_norm");
}

TEST_CASE("lower percentile does not increase the layer rate inference loss") {
    // Recompute-Omega oracle on a realistic half-normal activation sample.
    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> acts(20000);
    for (double& v : acts) v = std::abs(nd(rng));

    double prev_omega = -1.0;
    for (double pct : {100.0, 99.9, 99.0, 95.0, 90.0}) {
        const double s = nearest_rank_percentile(acts, pct);
        Tensor r({acts.size()});
        for (std::size_t i = 0; i < acts.size(); ++i) r.data[i] = std::min(acts[i] / s, 1.0);
        const double om = omega(r);
        if (prev_omega >= 0.0) CHECK(om <= prev_omega);
        prev_omega = om;
    }
}

TEST_CASE("robust norm with a rank that lands on zero raises") {
    // One high outlier, everything else silent.
    Tensor W({4, 1}, {1.0, -1.0, -1.0, -1.0});
    Network ann = relu_net({W}, {Tensor({4})});
    Tensor calib({4, 1}, {0.2, 0.4, 0.6, 0.8});
    CHECK_THROWS_AS(convert_robust_norm(ann, calib, 50.0), ConversionError);
}

TEST_CASE("scale_thresholds: identity, composition, domain") {
    Network ann = rnl_net({Tensor({2, 2}, {0.4, 0.1, 0.2, 0.6})}, {Tensor({2})});
    ann.rate_norm_layers()[0]->set_running_max(1.3);
    auto [snn, report] = convert_direct(ann);

    SpikingNet same = scale_thresholds(snn, 1.0);
    CHECK(*same.stages[0].v_th == *snn.stages[0].v_th);

    SpikingNet twice = scale_thresholds(scale_thresholds(snn, 0.5), 0.5);
    SpikingNet once = scale_thresholds(snn, 0.25);
    CHECK(*twice.stages[0].v_th == *once.stages[0].v_th);

    CHECK_THROWS_AS(scale_thresholds(snn, 0.0), ArgumentError);
    CHECK_THROWS_AS(scale_thresholds(snn, -0.3), ArgumentError);
}

TEST_CASE("direct conversion with p=1 matches max norm rate-for-rate") {
    std::mt19937_64 rng(29);
    Tensor W1 = random_uniform({5, 3}, rng, 0.0, 0.7);
    Tensor b1 = random_uniform({5}, rng, 0.0, 0.15);
    Tensor W2 = random_uniform({3, 5}, rng, 0.0, 0.6);
    Tensor b2 = random_uniform({3}, rng, 0.0, 0.15);
    Tensor calib = random_uniform({20, 3}, rng, 0.0, 1.0);

    // Route A: rate-norm network, running_max recomputed over the
    // calibration set, converted directly.
    Network ann = rnl_net({W1, W2}, {b1, b2});
    recalibrate_running_max(ann, calib);
    const double M1 = ann.rate_norm_layers()[0]->running_max();
    const double M2 = ann.rate_norm_layers()[1]->running_max();
    auto direct = convert_direct(ann);

    // Route B: the ReLU twin of the same function (a_l = prod(M) * r_l)
    // converted with Max Norm over the same calibration set.
    Tensor b2_twin = b2;
    for (double& v : b2_twin.data) v *= M1;
    Network twin = relu_net({W1, W2}, {b1, b2_twin});
    NormOptions opts;
    opts.input_max = 1.0;
    auto norm = convert_max_norm(twin, calib, opts);
    CHECK(norm.report.w_scale[0] == doctest::Approx(1.0 / M1).epsilon(1e-12));
    CHECK(norm.report.w_scale[1] == doctest::Approx(M1 / (M1 * M2)).epsilon(1e-12));

    const std::size_t T = 512;
    Tensor x({3}, {calib.data[0], calib.data[1], calib.data[2]});
    SimulationTrace ta = run(direct.snn, x, T, Coding::Constant);
    SimulationTrace tb = run(norm.snn, x, T, Coding::Constant);
    for (std::size_t l = 0; l < 2; ++l) {
        Tensor ra = ta.firing_rates(l, T);
        Tensor rb = tb.firing_rates(l, T);
        for (std::size_t i = 0; i < ra.numel(); ++i) {
            CHECK(std::abs(ra.data[i] - rb.data[i]) <= 1.0 / double(T));
        }
    }
}

TEST_CASE("all schemes preserve topology") {
    std::mt19937_64 rng(31);
    Tensor W1 = random_uniform({5, 3}, rng, 0.0, 0.5);
    Tensor W2 = random_uniform({2, 5}, rng, 0.0, 0.5);
    Tensor calib = random_uniform({10, 3}, rng, 0.0, 1.0);

    Network relu = relu_net({W1, W2}, {Tensor({5}), Tensor({2})});
    Network rnl = rnl_net({W1, W2}, {Tensor({5}), Tensor({2})});
    recalibrate_running_max(rnl, calib);

    auto direct = convert_direct(rnl);
    auto maxn = convert_max_norm(relu, calib);
    auto robust = convert_robust_norm(relu, calib, 99.9);
    for (const auto& res : {direct, maxn, robust}) {
        CHECK(res.snn.stages.size() == 2);
        CHECK(res.snn.stages[0].op.W.shape == Shape{5, 3});
        CHECK(res.snn.stages[1].op.W.shape == Shape{2, 5});
        CHECK(res.snn.spiking_layer_count() == 2);
    }
    SpikingNet scaled = scale_thresholds(direct.snn, 0.8);
    CHECK(scaled.stages.size() == direct.snn.stages.size());
}
