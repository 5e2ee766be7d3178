#include "dpi/engine.hpp"
#include "dpi/errors.hpp"
#include "dpi/sample_io.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dpi;

namespace {

Scenario flat(double seconds = 30)
{
    Scenario s;
    s.duration_s = seconds;
    s.base_irradiance = Profile::constant(130);
    s.base_temp = Profile::constant(25);
    s.panel.gamma = 0.0; // 13 W at 130 W/m²
    return s;
}

std::vector<SimSample> feed(const Scenario& s, double p_avail, int steps, RunMode mode = RunMode::Dpi)
{
    Engine e(s, mode);
    std::vector<SimSample> out;
    for (int k = 0; k < steps; ++k) {
        EnvSample env{k * s.dt_s, 0.0, 25.0};
        out.push_back(e.step(p_avail, env));
    }
    return out;
}

Scenario random_scenario(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0, 1);
    Scenario s;
    s.duration_s = 20 + 40 * unit(rng);
    s.dt_s = 0.05 + 0.2 * unit(rng);
    s.base_irradiance.points = {{0, 50 + 200 * unit(rng)}, {s.duration_s, 50 + 200 * unit(rng)}};
    s.base_temp = Profile::constant(10 + 30 * unit(rng));
    const double a = 2 + 5 * unit(rng);
    s.shading = {ShadingEvent{a, a + 10, 0.1 + 0.8 * unit(rng), 3 * unit(rng)}};
    s.noise_sigma = 20 * unit(rng);
    s.seed = rng();
    s.battery.capacity_ah = 0.01 + 0.5 * unit(rng);
    s.battery.ramp_limit = 0.5 + 10 * unit(rng);
    s.battery.eta_charge = 0.7 + 0.3 * unit(rng);
    s.battery.eta_discharge = 0.7 + 0.3 * unit(rng);
    s.initial_soc = 0.2 + 0.8 * unit(rng);
    s.controller.p_set = 5 + 15 * unit(rng);
    s.controller.hysteresis_w = 0.5 * unit(rng);
    s.load_demand_w = 5 + 25 * unit(rng);
    s.engine.actuation_delay = unit(rng) < 0.3;
    return s;
}

} // namespace

TEST_CASE("equilibrium stays in bypass")
{
    const Scenario s = flat();
    const SimResult r = run(s);
    REQUIRE(r.samples.size() == s.step_count());
    for (const SimSample& x : r.samples) {
        CHECK(x.mode == Mode::Bypass);
        CHECK(x.p_batt == 0.0);
        CHECK(x.p_load == doctest::Approx(13.0).epsilon(1e-12));
    }
    CHECK(r.final_soc == r.initial_soc);
}

TEST_CASE("surplus charges the battery")
{
    Scenario s = flat();
    s.battery.ramp_limit = 1e4;
    s.initial_soc = 0.5;
    for (const SimSample& x : feed(s, 15.0, 200)) {
        CHECK(x.p_load == doctest::Approx(13.0));
        CHECK(x.p_batt == doctest::Approx(-2.0));
        CHECK(x.mode == Mode::Charge);
        CHECK(x.p_pv == doctest::Approx(15.0));
    }
}

TEST_CASE("deficit on an empty battery falls back to PV")
{
    Scenario s = flat();
    s.initial_soc = s.battery.soc_min;
    const auto oracle = battery_step(s.battery, make_battery_state(s.battery, s.battery.soc_min), 3.0, s.dt_s);
    REQUIRE(oracle.p_actual == 0.0);
    for (const SimSample& x : feed(s, 10.0, 50)) {
        CHECK(x.p_load == doctest::Approx(10.0));
        CHECK(x.p_batt == 0.0);
        CHECK(x.battery_flag == BatteryFlag::Depleted);
    }
}

TEST_CASE("deficit is filled at the ramp limit")
{
    Scenario s = flat();
    const auto xs = feed(s, 10.0, 100);
    // 10 W/s over 0.1 s steps reaches the 3 W gap on the third step.
    CHECK(xs[0].p_batt == doctest::Approx(1.0));
    CHECK(xs[1].p_batt == doctest::Approx(2.0));
    for (std::size_t k = 2; k < xs.size(); ++k) {
        CHECK(xs[k].p_batt == doctest::Approx(3.0));
        CHECK(xs[k].p_load == doctest::Approx(13.0));
        CHECK(xs[k].mode == Mode::Insert);
    }
}

TEST_CASE("unabsorbed surplus is curtailed")
{
    Scenario s = flat();
    s.initial_soc = s.battery.soc_max;
    for (const SimSample& x : feed(s, 40.0, 50)) {
        CHECK(x.p_load == doctest::Approx(13.0));
        CHECK(x.p_pv == doctest::Approx(13.0));
        CHECK(x.p_curtailed() == doctest::Approx(27.0));
        CHECK(x.battery_flag == BatteryFlag::Full);
    }
}

TEST_CASE("load demand below the setpoint caps delivery")
{
    Scenario s = flat();
    s.load_demand_w = 8.0;
    s.battery.ramp_limit = 1e4;
    for (const SimSample& x : feed(s, 13.0, 20)) {
        CHECK(x.p_load == doctest::Approx(8.0));
        CHECK(x.p_batt <= 0.0);
    }
}

TEST_CASE("disabled battery degenerates to setpoint curtailment")
{
    std::mt19937_64 rng(8);
    for (int k = 0; k < 30; ++k) {
        Scenario s = random_scenario(rng);
        s.battery.p_charge_max = 0;
        s.battery.p_discharge_max = 0;
        s.load_demand_w = 30;
        const SimResult dpi_run = run(s, RunMode::Dpi);
        const SimResult spg_run = run(s, RunMode::SpgOnly);
        REQUIRE(dpi_run.samples.size() == spg_run.samples.size());
        for (std::size_t i = 0; i < dpi_run.samples.size(); ++i) {
            const SimSample& x = dpi_run.samples[i];
            CHECK(x.p_load == std::min(x.p_pv_available, s.controller.p_set));
            CHECK(x.p_batt == 0.0);
            CHECK(encode_exact(x) == encode_exact(spg_run.samples[i]));
        }
    }
}

TEST_CASE("per step balance and curtailment over random scenarios")
{
    std::mt19937_64 rng(21);
    for (int k = 0; k < 60; ++k) {
        const Scenario s = random_scenario(rng);
        const SimResult r = run(s);
        const double cap = s.controller.p_set + s.controller.hysteresis_w;
        for (const SimSample& x : r.samples) {
            CHECK(std::abs(x.p_load - (x.p_pv_to_load + std::max(x.p_batt, 0.0))) <= 1e-9);
            CHECK(x.p_pv_to_load <= cap);
            CHECK(x.p_pv <= x.p_pv_available + 1e-12);
            CHECK(x.soc >= s.battery.soc_min);
            CHECK(x.soc <= s.battery.soc_max);
            CHECK_FALSE((x.switches.s_charge && x.switches.s_insert));
        }
        for (std::size_t i = 1; i < r.samples.size(); ++i) {
            const double jump = std::abs(r.samples[i].p_batt - r.samples[i - 1].p_batt);
            if (r.samples[i].battery_flag != BatteryFlag::RampOverride)
                CHECK(jump <= s.battery.ramp_limit * s.dt_s * (1 + 1e-9));
        }
    }
}

TEST_CASE("energy balance")
{
    SUBCASE("all bypass")
    {
        const Scenario s = flat();
        const EnergyBalance b = energy_balance(run(s), s);
        CHECK(b.e_pv_delivered_wh == b.e_load_wh);
        CHECK(b.e_charge_in_wh == 0.0);
        CHECK(b.e_discharge_out_wh == 0.0);
        CHECK(b.e_loss_wh == 0.0);
        CHECK(b.e_stored_delta_wh == 0.0);
    }
    SUBCASE("lossless battery")
    {
        std::mt19937_64 rng(4);
        Scenario s = random_scenario(rng);
        s.battery.eta_charge = 1.0;
        s.battery.eta_discharge = 1.0;
        const SimResult r = run(s);
        const EnergyBalance b = energy_balance(r, s);
        CHECK(b.e_charge_in_wh + b.e_discharge_out_wh > 0.0);
        CHECK(b.e_loss_wh == 0.0);
    }
    SUBCASE("random scenarios against per-step sums")
    {
        std::mt19937_64 rng(12);
        for (int k = 0; k < 40; ++k) {
            const Scenario s = random_scenario(rng);
            const SimResult r = run(s);
            double in = 0, out = 0, pv = 0;
            for (const SimSample& x : r.samples) {
                in += (x.p_pv + std::max(x.p_batt, 0.0)) * s.dt_s;
                out += (x.p_load + std::max(-x.p_batt, 0.0)) * s.dt_s;
                pv += x.p_pv * s.dt_s;
            }
            CHECK(std::abs(in - out) <= 1e-6 * in);
            const EnergyBalance b = energy_balance(r, s);
            CHECK(std::abs(b.residual_wh) <= 1e-6 * (b.e_pv_delivered_wh + b.e_discharge_out_wh));
            CHECK(b.e_pv_delivered_wh == doctest::Approx(pv / 3600).epsilon(1e-9));
        }
    }
    SUBCASE("tampered result is rejected")
    {
        const Scenario s = flat();
        SimResult r = run(s);
        r.samples[10].p_load += 5.0;
        CHECK_THROWS_AS(energy_balance(r, s), ImbalanceError);
        r.samples.clear();
        CHECK_THROWS_AS(energy_balance(r, s), EmptySeries);
    }
}

TEST_CASE("runs are bit identical")
{
    std::mt19937_64 rng(31);
    for (int k = 0; k < 10; ++k) {
        Scenario s = random_scenario(rng);
        if (k % 2) s.engine.pv_model = PvModelKind::Diode;
        const SimResult a = run(s), b = run(s);
        REQUIRE(a.samples.size() == b.samples.size());
        CHECK(a.scenario_digest == b.scenario_digest);
        for (std::size_t i = 0; i < a.samples.size(); ++i)
            CHECK(encode_exact(a.samples[i]) == encode_exact(b.samples[i]));
    }
}

TEST_CASE("actuation delay acts one step late")
{
    Scenario s = flat();
    s.battery.ramp_limit = 1e4;
    s.engine.actuation_delay = true;
    const auto xs = feed(s, 10.0, 5);
    CHECK(xs[0].p_batt == 0.0);
    CHECK(xs[0].mode == Mode::Bypass);
    CHECK(xs[1].p_batt == doctest::Approx(3.0));
}

TEST_CASE("observer sees every sample in order")
{
    const Scenario s = flat(5);
    std::vector<double> seen;
    const SimResult r = run(s, RunMode::Dpi, [&](const SimSample& x) { seen.push_back(x.t); });
    REQUIRE(seen.size() == r.samples.size());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == r.samples[i].t);
}
