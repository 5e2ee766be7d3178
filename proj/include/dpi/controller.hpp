#pragma once

#include <string>

namespace dpi {

struct ControllerConfig {
    double p_set = 13.0;        // W, the stabilization setpoint
    double duty_scale = 300.0;  // PWM register full scale
    double duty_min = 0.0;
    double duty_max = 300.0;
    double hysteresis_w = 0.1;  // deadband half-width around p_set
    double ki = 0.0;            // 1/s, integral gain on the normalized error

    bool operator==(const ControllerConfig&) const = default;
};

void validate(const ControllerConfig& c, const std::string& where = "controller");

enum class Mode { Charge, Insert, Bypass };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s); // throws ParseError

struct SwitchStates {
    bool s_charge = false; // MOSFET 1
    bool s_bypass = true;  // MOSFET 2
    bool s_insert = false; // MOSFET 3

    bool operator==(const SwitchStates&) const = default;
};

struct ControlDecision {
    Mode mode = Mode::Bypass;
    double p_batt_target = 0.0; // W, positive = insert
    double duty = 0.0;
    SwitchStates switches;
};

// Caller-owned integrator of the normalized power error (seconds).
struct ControllerState {
    double integral = 0.0;
};

Mode decide_mode(double p_pv, const ControllerConfig& cfg);

double battery_power_target(double p_pv, const ControllerConfig& cfg);

struct DutyResult {
    double duty = 0.0;
    ControllerState state;
};

/// Proportional duty ((p_set - p_load) / p_set) * duty_scale, plus
/// duty_scale * ki * integral of the normalized error when ki > 0.
/// Saturates to [duty_min, duty_max]; the integrator holds while saturated.
DutyResult duty_cycle(double p_set, double p_load, const ControllerConfig& cfg,
                      const ControllerState& state, double dt = 0.0);

SwitchStates switch_states(Mode mode);

/// decide_mode -> battery_power_target -> duty_cycle -> switch_states.
/// Duty regulation only runs on an active battery path; Bypass yields duty 0
/// and leaves the integrator untouched.
ControlDecision control_step(double p_pv, double p_load_measured, const ControllerConfig& cfg,
                             ControllerState& state, double dt = 0.0);

} // namespace dpi
