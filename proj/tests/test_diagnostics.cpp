#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "snnkit/conversion.hpp"
#include "snnkit/diagnostics.hpp"

using namespace snnkit;

TEST_CASE("k_value: fit quality ratios") {
    Tensor r_hat({2}, {0.5, 0.5});
    CHECK(k_value(r_hat, r_hat) == 0.0);

    Tensor r({2}, {0.25, 0.5});
    CHECK(k_value(r_hat, r) == doctest::Approx(0.125).epsilon(1e-15));

    CHECK(k_value(Tensor({1}, {1.0}), Tensor({1}, {0.0})) == 1.0);
    CHECK_THROWS_AS(k_value(Tensor({2}), Tensor({2})), ArgumentError);
}

TEST_CASE("k_value scale invariance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0.01, 1.0);
    Tensor r_hat({16}), r({16});
    for (std::size_t i = 0; i < 16; ++i) {
        r_hat.data[i] = dist(rng);
        r.data[i] = dist(rng);
    }
    const double base = k_value(r_hat, r);
    for (double c : {0.5, 2.0, 10.0}) {
        Tensor sh = r_hat, s = r;
        for (double& v : sh.data) v *= c;
        for (double& v : s.data) v *= c;
        CHECK(std::abs(k_value(sh, s) - base) < 1e-12);
    }
}

TEST_CASE("omega: saturation floor, arithmetic, homogeneity") {
    for (std::size_t n : {1u, 5u, 64u}) {
        CHECK(omega(Tensor::full({n}, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(omega(Tensor({2}, {0.5, 0.5})) == doctest::Approx(2.0).epsilon(1e-15));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    Tensor r({24});
    for (double& v : r.data) v = dist(rng);
    const double base = omega(r);
    for (double c : {0.5, 2.0, 10.0}) {
        Tensor s = r;
        for (double& v : s.data) v *= c;
        CHECK(std::abs(omega(s) - base / c) < 1e-12 * base);
    }
    // Omega >= 1/max(r).
    CHECK(base >= 1.0 / r.max_value());

    CHECK_THROWS_AS(omega(Tensor({3})), ArgumentError);
    CHECK_THROWS_AS(omega(Tensor({2}, {0.5, -0.1})), ArgumentError);
}

TEST_CASE("bound_margin: hand cases") {
    // r_hat = [0.5], t = 4: rates exact, K = 0, margin = 2*2/4.
    CHECK(bound_margin(Tensor({1}, {0.5}), 4) == doctest::Approx(1.0).epsilon(1e-15));

    // Exact multiples of 1/t (binary so the products are exact).
    const std::size_t t = 8;
    Tensor r({4}, {1.0 / 8, 3.0 / 8, 5.0 / 8, 8.0 / 8});
    const double expected = 2.0 * omega(r) / double(t);
    CHECK(bound_margin(r, t) == doctest::Approx(expected).epsilon(1e-15));

    CHECK_THROWS_AS(bound_margin(Tensor({1}, {1.5}), 4), ArgumentError);
    CHECK_THROWS_AS(bound_margin(Tensor({1}, {0.5}), 0), ArgumentError);
}

TEST_CASE("bound_margin is strictly positive on random draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> rdist(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> ndist(1, 64);
    std::uniform_int_distribution<std::size_t> tdist(1, 1000);
    for (int rep = 0; rep < 10000; ++rep) {
        const std::size_t n = ndist(rng);
        Tensor r({n});
        bool any = false;
        for (double& v : r.data) {
            v = rdist(rng);
            any = any || v > 0.0;
        }
        if (!any) r.data[0] = 0.5;
        CHECK(bound_margin(r, tdist(rng)) > 0.0);
    }
}

TEST_CASE("k curves: perfect fit and layer ordering on a converted net") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> wdist(0.0, 0.8);

    // Three stacked rate layers so the curves have depth structure.
    std::vector<Tensor> Ws, bs;
    std::vector<std::size_t> widths = {4, 6, 6, 6};
    Network ann;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        auto aff = std::make_unique<AffineLayer>(widths[l], widths[l + 1]);
        for (double& v : aff->W.value.data) v = wdist(rng) / double(widths[l]);
        for (double& v : aff->b.value.data) v = 0.05 * wdist(rng);
        ann.layers.push_back(std::move(aff));
        ann.layers.push_back(std::make_unique<RateNormLayer>());
    }
    Tensor calib({8, 4});
    for (double& v : calib.data) v = wdist(rng);
    recalibrate_running_max(ann, calib);
    auto [snn, report] = convert_direct(ann);

    Tensor x = Tensor({4}, {calib.data[0], calib.data[1], calib.data[2], calib.data[3]});
    const std::size_t T = 3000;
    std::vector<Tensor> rates = ann_simulated_rates(ann, x);
    SimulationTrace trace = run(snn, x, T, Coding::Constant);
    std::vector<KCurve> curves = k_curves_from_trace(rates, trace);
    REQUIRE(curves.size() == 3);

    // At the final step every layer's K is small and under the 2*Omega/T bound.
    std::vector<double> margins = final_step_bound_margins(rates, curves);
    for (double m : margins) CHECK(m > 0.0);

    // Deeper layers settle no earlier than shallow ones.
    auto t1 = time_to_k_below(curves[0], 0.1);
    auto t2 = time_to_k_below(curves[1], 0.1);
    auto t3 = time_to_k_below(curves[2], 0.1);
    REQUIRE(t1.has_value());
    REQUIRE(t2.has_value());
    REQUIRE(t3.has_value());
    CHECK(*t2 >= *t1);
    CHECK(*t3 >= *t2);

    // Scaling thresholds by 0.8 speeds every layer up (or leaves it equal).
    // Scaled ANN view: the same network with thresholds shrunk by 0.8.
    SpikingNet scaled = scale_thresholds(snn, 0.8);
    for (auto& layer : ann.layers) {
        if (auto* r = dynamic_cast<RateNormLayer*>(layer.get())) {
            r->set_running_max(0.8 * r->running_max());
        }
    }
    std::vector<Tensor> scaled_rates = ann_simulated_rates(ann, x);
    SimulationTrace scaled_trace = run(scaled, x, T, Coding::Constant);
    std::vector<KCurve> scaled_curves = k_curves_from_trace(scaled_rates, scaled_trace);
    for (std::size_t l = 0; l < 3; ++l) {
        auto t_base = time_to_k_below(curves[l], 0.1);
        auto t_scaled = time_to_k_below(scaled_curves[l], 0.1);
        REQUIRE(t_scaled.has_value());
        CHECK(*t_scaled <= *t_base);
    }
}

TEST_CASE("k curves: exact-match points are zero") {
    // Passthrough with binary-exact rate: r(t) = x at even steps.
    SpikingNet net;
    SpikingStage stage;
    stage.op.kind = "affine";
    stage.op.W = Tensor({1, 1}, {1.0});
    stage.op.b = Tensor({1});
    stage.v_th = 1.0;
    net.stages.push_back(stage);
    SimulationTrace trace = run(net, Tensor({1}, {0.5}), 10, Coding::Constant);
    std::vector<KCurve> curves = k_curves_from_trace({Tensor({1}, {0.5})}, trace);
    for (std::size_t t = 2; t <= 10; t += 2) CHECK(curves[0].k[t - 1] == 0.0);
}

TEST_CASE("k curve layer mismatch raises") {
    SpikingNet net;
    SpikingStage stage;
    stage.op.kind = "affine";
    stage.op.W = Tensor({1, 1}, {1.0});
    stage.op.b = Tensor({1});
    stage.v_th = 1.0;
    net.stages.push_back(stage);
    SimulationTrace trace = run(net, Tensor({1}, {0.5}), 5, Coding::Constant);
    CHECK_THROWS_AS(k_curves_from_trace({}, trace), ArgumentError);
    CHECK_THROWS_AS(k_curves_from_trace({Tensor({3}, {0.1, 0.2, 0.3})}, trace), ArgumentError);
}

TEST_CASE("power series: substitution, zero, telescoping identity") {
    EnergyReport r = power_series({1000}, 1e-9);
    CHECK(r.power[0] == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(r.energy[0] == 1000 * 1e-9);

    EnergyReport zero = power_series({0, 0, 0}, 1e-9);
    for (double p : zero.power) CHECK(p == 0.0);
    CHECK(zero.energy.back() == 0.0);

    std::vector<std::uint64_t> spikes = {3, 0, 17, 5, 1};
    EnergyReport sum = power_series(spikes, 2.5e-10);
    std::uint64_t total = 0;
    for (auto s : spikes) total += s;
    CHECK(sum.energy.back() == double(total) * 2.5e-10);  // exact identity

    CHECK_THROWS_AS(power_series(spikes, 0.0), ArgumentError);
}

TEST_CASE("time to accuracy: first crossing or none") {
    std::vector<double> acc = {0.1, 0.5, 0.92, 0.93};
    CHECK(time_to_accuracy(acc, 0.9) == 3);
    CHECK(!time_to_accuracy(acc, 0.95).has_value());
    CHECK(time_to_accuracy(acc, 0.05) == 1);

    EnergyReport r = power_series({10, 10, 10, 10}, 1e-9, &acc, 0.9);
    REQUIRE(r.time_to_target.has_value());
    CHECK(*r.time_to_target == 3);
    CHECK(*r.energy_to_target == 30 * 1e-9);
}
