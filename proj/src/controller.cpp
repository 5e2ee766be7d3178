#include "dpi/controller.hpp"

#include "dpi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dpi {

void validate(const ControllerConfig& c, const std::string& where)
{
    auto fail = [&](const char* field, const char* what) {
        throw ValidationError(where + "." + field, what);
    };
    if (!(c.p_set > 0)) fail("p_set", "must be > 0");
    if (!(c.duty_scale > 0)) fail("duty_scale", "must be > 0");
    if (!(c.hysteresis_w >= 0 && c.hysteresis_w < c.p_set))
        fail("hysteresis_w", "requires 0 <= hysteresis_w < p_set");
    if (!(c.duty_min >= 0)) fail("duty_min", "must be >= 0");
    if (!(c.duty_max >= c.duty_min && c.duty_max <= c.duty_scale))
        fail("duty_max", "requires duty_min <= duty_max <= duty_scale");
    if (!(c.ki >= 0)) fail("ki", "must be >= 0");
}

const char* to_string(Mode m)
{
    switch (m) {
    case Mode::Charge: return "Charge";
    case Mode::Insert: return "Insert";
    case Mode::Bypass: return "Bypass";
    }
    return "?";
}

Mode mode_from_string(const std::string& s)
{
    if (s == "Charge") return Mode::Charge;
    if (s == "Insert") return Mode::Insert;
    if (s == "Bypass") return Mode::Bypass;
    throw ParseError("unknown mode '" + s + "'");
}

Mode decide_mode(double p_pv, const ControllerConfig& cfg)
{
    if (p_pv > cfg.p_set + cfg.hysteresis_w) return Mode::Charge;
    if (p_pv < cfg.p_set - cfg.hysteresis_w) return Mode::Insert;
    return Mode::Bypass;
}

double battery_power_target(double p_pv, const ControllerConfig& cfg)
{
    switch (decide_mode(p_pv, cfg)) {
    case Mode::Insert: return cfg.p_set - p_pv;
    case Mode::Charge: return -(p_pv - cfg.p_set);
    case Mode::Bypass: return 0.0;
    }
    return 0.0;
}

DutyResult duty_cycle(double p_set, double p_load, const ControllerConfig& cfg,
                      const ControllerState& state, double dt)
{
    const double error = (p_set - p_load) / p_set;
    const double proportional = error * cfg.duty_scale;

    DutyResult out;
    out.state = state;
    if (cfg.ki <= 0) {
        out.duty = std::clamp(proportional, cfg.duty_min, cfg.duty_max);
        return out;
    }

    const double integral = state.integral + error * dt;
    const double raw = proportional + cfg.duty_scale * cfg.ki * integral;
    if (raw > cfg.duty_max || raw < cfg.duty_min) {
        // Conditional integration: keep the stored integral while saturated.
        const double held = proportional + cfg.duty_scale * cfg.ki * state.integral;
        out.duty = std::clamp(held, cfg.duty_min, cfg.duty_max);
    } else {
        out.duty = raw;
        out.state.integral = integral;
    }
    return out;
}

SwitchStates switch_states(Mode mode)
{
    switch (mode) {
    case Mode::Charge: return {true, true, false};
    case Mode::Insert: return {false, true, true};
    case Mode::Bypass: return {false, true, false};
    }
    return {};
}

ControlDecision control_step(double p_pv, double p_load_measured, const ControllerConfig& cfg,
                             ControllerState& state, double dt)
{
    ControlDecision d;
    d.mode = decide_mode(p_pv, cfg);
    d.p_batt_target = battery_power_target(p_pv, cfg);
    if (d.mode != Mode::Bypass) {
        const DutyResult r = duty_cycle(cfg.p_set, p_load_measured, cfg, state, dt);
        d.duty = r.duty;
        state = r.state;
    } else {
        d.duty = std::clamp(0.0, cfg.duty_min, cfg.duty_max);
    }
    d.switches = switch_states(d.mode);
    return d;
}

} // namespace dpi
