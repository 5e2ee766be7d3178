#include "dpi/engine.hpp"

#include "dpi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dpi {

const char* to_string(RunMode m) { return m == RunMode::SpgOnly ? "spg-only" : "dpi"; }

namespace {

BatteryParams effective_battery(const BatteryParams& p, RunMode mode)
{
    BatteryParams out = p;
    if (mode == RunMode::SpgOnly) {
        out.p_charge_max = 0.0;
        out.p_discharge_max = 0.0;
    }
    return out;
}

// The realized battery sign wins when it contradicts the decision (a ramp
// tail still flowing the other way); otherwise the decision stands.
Mode effective_mode(Mode decided, double p_batt)
{
    if (p_batt > 0) return Mode::Insert;
    if (p_batt < 0) return Mode::Charge;
    return decided;
}

} // namespace

Engine::Engine(const Scenario& scenario, RunMode mode)
    : scenario_(scenario),
      battery_params_(effective_battery(scenario.battery, mode)),
      battery_(make_battery_state(scenario.battery, scenario.initial_soc)),
      mppt_(initial_mppt_state(scenario.panel, scenario.engine.mppt_step_v))
{
}

double Engine::available_pv(const EnvSample& env)
{
    if (scenario_.engine.pv_model == PvModelKind::Scaled)
        return scaled_power(scenario_.panel, env);

    const double v = mppt_.v_ref;
    const double p = diode_power(scenario_.panel, v, env);
    mppt_ = mppt_step(mppt_, p, v);
    return std::max(p, 0.0);
}

SimSample Engine::step(double p_avail, const EnvSample& env)
{
    const ControllerConfig& cfg = scenario_.controller;
    const double dt = scenario_.dt_s;
    p_avail = std::max(p_avail, 0.0);

    const ControlDecision decided = control_step(p_avail, last_load_, cfg, controller_, dt);
    const ControlDecision act = scenario_.engine.actuation_delay ? pending_ : decided;
    pending_ = decided;

    // Load is a constant-power sink fed up to min(demand, p_set).
    const double load_cap = std::min(scenario_.load_demand_w, cfg.p_set);
    const double pv_to_load_max = std::min(p_avail, load_cap);

    double request = act.p_batt_target;
    if (request > 0) request = std::min(request, load_cap - pv_to_load_max);
    if (request < 0) request = std::max(request, -(p_avail - pv_to_load_max));

    // Charging can only draw on PV; discharging only into the load.
    const PowerBand band{-p_avail, std::max(scenario_.load_demand_w, 0.0)};
    const BatteryStepResult br = battery_step(battery_params_, battery_, request, dt, band);
    battery_ = br.state;
    const double p_batt = br.p_actual;

    double pv_to_load = 0.0;
    double p_pv = 0.0;
    if (p_batt >= 0) {
        pv_to_load = std::clamp(load_cap - p_batt, 0.0, pv_to_load_max);
        p_pv = pv_to_load;
    } else {
        const double absorbed = -p_batt;
        pv_to_load = std::clamp(p_avail - absorbed, 0.0, load_cap);
        p_pv = pv_to_load + absorbed;
    }

    SimSample s;
    s.t = env.t;
    s.irradiance = env.irradiance;
    s.temperature = env.ambient_temp;
    s.p_set = cfg.p_set;
    s.p_pv = p_pv;
    s.p_load = pv_to_load + std::max(p_batt, 0.0);
    s.p_batt = p_batt;
    s.soc = battery_.soc;
    s.mode = effective_mode(act.mode, p_batt);
    s.duty = act.duty;
    s.p_pv_available = p_avail;
    s.p_pv_to_load = pv_to_load;
    s.switches = switch_states(s.mode);
    s.battery_flag = br.flag;

    last_load_ = s.p_load;
    return s;
}

SimResult run(const Scenario& scenario, RunMode mode, const SampleObserver& observer)
{
    validate(scenario);
    Engine engine(scenario, mode);

    SimResult result;
    result.scenario_digest = scenario_digest(scenario);
    result.dt_s = scenario.dt_s;
    result.initial_soc = engine.battery().soc;

    const std::size_t n = scenario.step_count();
    result.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = std::min(scenario.time_of(k), scenario.duration_s);
        const EnvSample env = sample_env(scenario, t);
        const double p_avail = engine.available_pv(env);
        result.samples.push_back(engine.step(p_avail, env));
        if (observer) observer(result.samples.back());
    }
    result.final_soc = engine.battery().soc;
    return result;
}

EnergyBalance energy_balance(const SimResult& result, const Scenario& scenario)
{
    if (result.samples.empty()) throw EmptySeries("energy_balance: empty result");

    const double h = result.dt_s / 3600.0;
    EnergyBalance b;
    for (const SimSample& s : result.samples) {
        b.e_pv_available_wh += s.p_pv_available * h;
        b.e_pv_delivered_wh += s.p_pv * h;
        b.e_load_wh += s.p_load * h;
        b.e_charge_in_wh += std::max(-s.p_batt, 0.0) * h;
        b.e_discharge_out_wh += std::max(s.p_batt, 0.0) * h;
        b.e_curtailed_wh += s.p_curtailed() * h;
    }
    const BatteryParams& bp = scenario.battery;
    b.e_loss_wh = b.e_charge_in_wh * (1.0 - bp.eta_charge)
                + b.e_discharge_out_wh * (1.0 / bp.eta_discharge - 1.0);
    b.e_stored_delta_wh = (result.final_soc - result.initial_soc) * bp.capacity_wh();

    b.residual_wh = b.e_pv_delivered_wh + b.e_discharge_out_wh - b.e_load_wh - b.e_charge_in_wh;
    const double stored_from_flows =
        b.e_charge_in_wh * bp.eta_charge - b.e_discharge_out_wh / bp.eta_discharge;
    b.storage_residual_wh = b.e_stored_delta_wh - stored_from_flows;

    const double throughput = b.e_pv_delivered_wh + b.e_discharge_out_wh;
    const double scale = std::max(throughput, 1e-12);
    if (std::abs(b.residual_wh) > 1e-6 * scale)
        throw ImbalanceError("energy_balance: power flow residual " + std::to_string(b.residual_wh) + " Wh");
    const double storage_scale = std::max(b.e_charge_in_wh + b.e_discharge_out_wh, 1e-12);
    if (std::abs(b.storage_residual_wh) > 1e-6 * std::max(storage_scale, scale))
        throw ImbalanceError("energy_balance: storage residual " + std::to_string(b.storage_residual_wh) + " Wh");
    return b;
}

} // namespace dpi
