#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qtherm/harness.hpp"

using namespace qtherm;
using namespace qtherm::harness;

namespace {

SweepSpec base_spec() {
    SweepSpec spec;
    spec.base_config.qubit.p_e_equilibrium = 0.02;
    spec.base_config.apparatus.noise_sigma =
        std::abs(spec.base_config.apparatus.v_e - spec.base_config.apparatus.v_g) / 6.0;
    spec.base_config.n_shots = 20000;
    spec.base_config.seed = 1;
    return spec;
}

}  // namespace

TEST_CASE("exp_decay_scan recovers T1 and the configured population") {
    auto spec = base_spec();
    spec.variable = SweepVariable::tau;
    for (int k = 0; k < 8; ++k) spec.values.push_back(k * 40e-6 / 7.0);
    spec.base_config.n_shots = 50000;
    auto res = exp_decay_scan(spec);
    REQUIRE(res.points.size() == 8);
    CHECK(res.fit.t1_fit == Catch::Approx(10e-6).epsilon(0.15));
    CHECK(res.p_e_at_zero == Catch::Approx(0.02).margin(3 * res.p_e_at_zero_err + 0.002));
    CHECK(res.rows.size() == 8);
    CHECK(res.rows.front().x_name == "tau");
}

TEST_CASE("exp_decay_scan: zero population gives amplitude consistent with zero") {
    auto spec = base_spec();
    spec.variable = SweepVariable::tau;
    spec.base_config.qubit.p_e_equilibrium = 0.0;
    for (int k = 0; k < 6; ++k) spec.values.push_back(k * 8e-6);
    auto res = exp_decay_scan(spec);
    CHECK(std::abs(res.fit.amplitude) < 3 * std::max(res.fit.amp0_err, 1e-4));
}

TEST_CASE("exp_temperature_sweep: zero hot bath matches the M-B curve") {
    auto spec = base_spec();
    spec.variable = SweepVariable::temperature;
    spec.hot_bath = BathModel{0.0, 0.0};
    spec.values = {0.060, 0.100, 0.140};
    spec.base_config.n_shots = 65536;
    auto res = exp_temperature_sweep(spec);
    REQUIRE(res.rows.size() == 3);
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const auto& row = res.rows[i];
        double mb = boltzmann_population(spec.base_config.qubit.frequency, spec.values[i]);
        CHECK(row.truth_p_e == Catch::Approx(mb).margin(1e-12));
        CHECK(row.p_e == Catch::Approx(mb).margin(4 * row.std_error));
        CHECK(row.seeds.size() == 1);
    }
}

TEST_CASE("exp_temperature_sweep: hot bath produces the low-T plateau") {
    auto spec = base_spec();
    spec.variable = SweepVariable::temperature;
    // 332.19 Hz symmetric hot bath -> 0.33% plateau on a 10 us qubit.
    spec.hot_bath = BathModel{332.19, 332.19};
    spec.values = {0.025};
    spec.base_config.n_shots = 65536;
    auto res = exp_temperature_sweep(spec);
    CHECK(res.rows.front().truth_p_e == Catch::Approx(0.0033).margin(2e-4));
}

TEST_CASE("exp_precision_scaling: slope near -1/2") {
    auto spec = base_spec();
    spec.variable = SweepVariable::n_shots;
    spec.values = {256, 1024, 4096, 16384};
    spec.seeds_per_point = 16;
    spec.base_config.qubit.p_e_equilibrium = 0.005;
    auto res = exp_precision_scaling(spec);
    REQUIRE(res.slopes.size() == 1);
    CHECK(res.slopes.front().second == Catch::Approx(-0.5).margin(0.2));
    CHECK(res.rows.size() == 4);

    spec.seeds_per_point = 4;
    CHECK_THROWS_AS(exp_precision_scaling(spec), std::domain_error);
}

TEST_CASE("exp_method_comparison needs at least two methods") {
    auto spec = base_spec();
    spec.variable = SweepVariable::temperature;
    spec.hot_bath = BathModel{0, 0};
    spec.values = {0.1};
    CHECK_THROWS_AS(exp_method_comparison(spec), std::domain_error);

    spec.methods = {Method::correlator_exact, Method::direct_count};
    auto res = exp_method_comparison(spec);
    CHECK(res.rows.size() == 2);
}

TEST_CASE("exp_frequency_replay: flat profile gives flat rows; zero profile matches M-B") {
    auto spec = base_spec();
    spec.variable = SweepVariable::frequency;
    spec.fridge_temperature = 0.060;
    spec.values = {4.8e9, 5.0e9, 5.2e9};
    for (double f : spec.values) spec.frequency_profile.push_back({f, 0.0, 0.0});
    spec.base_config.n_shots = 65536;
    auto res = exp_frequency_replay(spec);
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        double mb = boltzmann_population(spec.values[i], 0.060);
        CHECK(res.rows[i].truth_p_e == Catch::Approx(mb).margin(1e-12));
        CHECK(res.rows[i].p_e == Catch::Approx(mb).margin(4 * res.rows[i].std_error));
    }

    // A peaked profile shows up in the estimated curve.
    SweepSpec peaked = spec;
    peaked.frequency_profile.clear();
    peaked.frequency_profile.push_back({4.8e9, 0.0, 0.0});
    peaked.frequency_profile.push_back({5.0e9, 500.0, 500.0});
    peaked.frequency_profile.push_back({5.2e9, 0.0, 0.0});
    auto res2 = exp_frequency_replay(peaked);
    // The hot bath at 5.0 GHz lifts that point above its own M-B baseline.
    double mb_mid = boltzmann_population(5.0e9, 0.060);
    CHECK(res2.rows[1].p_e > mb_mid + 2 * res2.rows[1].std_error);
    CHECK(res2.rows[1].p_e == Catch::Approx(res2.rows[1].truth_p_e).margin(4 * res2.rows[1].std_error));

    spec.frequency_profile.clear();
    CHECK_THROWS_AS(exp_frequency_replay(spec), std::domain_error);
}

TEST_CASE("sweep rows serialize with the fixed column contract") {
    auto spec = base_spec();
    spec.variable = SweepVariable::temperature;
    spec.hot_bath = BathModel{0, 0};
    spec.values = {0.1};
    spec.base_config.n_shots = 4096;
    auto res = exp_temperature_sweep(spec);
    auto csv = sweep_rows_to_csv(res.rows);
    CHECK(csv.rfind("x_name,x_value,method,p_e,std_error,truth_p_e,deviation\n", 0) == 0);
    CHECK(csv.find("temperature,") != std::string::npos);
    CHECK(csv.find("correlator_exact") != std::string::npos);
}

TEST_CASE("sweep spec JSON round trip") {
    auto spec = base_spec();
    spec.variable = SweepVariable::n_shots;
    spec.values = {64, 128};
    spec.seeds_per_point = 16;
    spec.power_map.push_back({-40.0, 6.0, 0.0});
    spec.hot_bath = BathModel{100, 200};
    spec.methods = {Method::correlator_exact, Method::direct_count};
    auto j = sweep_spec_to_json(spec);
    auto back = sweep_spec_from_json(j);
    CHECK(back.variable == spec.variable);
    CHECK(back.values == spec.values);
    CHECK(back.seeds_per_point == 16);
    CHECK(back.power_map.size() == 1);
    CHECK(back.hot_bath->gamma_down == 200);
    CHECK(back.methods.size() == 2);

    j["unexpected"] = 1;
    CHECK_THROWS_AS(sweep_spec_from_json(j), io::ParseError);
}

TEST_CASE("sweep rows are reproducible from recorded seeds") {
    auto spec = base_spec();
    spec.variable = SweepVariable::temperature;
    spec.hot_bath = BathModel{50, 50};
    spec.values = {0.08};
    spec.base_config.n_shots = 8192;
    auto a = exp_temperature_sweep(spec);
    auto b = exp_temperature_sweep(spec);
    REQUIRE(a.rows.size() == b.rows.size());
    CHECK(a.rows[0].p_e == b.rows[0].p_e);
    CHECK(a.rows[0].seeds == b.rows[0].seeds);
}
