#pragma once

#include <limits>
#include <string>

namespace dpi {

// Energy-reservoir battery. Power sign convention: positive = discharge
// (insertion into the load), negative = charge (absorption).
struct BatteryParams {
    double capacity_ah = 42.0;
    double nominal_v = 12.0;
    double soc_min = 0.2;
    double soc_max = 1.0;
    double p_charge_max = 50.0;    // W; 0 disables charging
    double p_discharge_max = 50.0; // W; 0 disables discharging
    double ramp_limit = 10.0;      // W/s
    double eta_charge = 0.95;
    double eta_discharge = 0.95;

    double capacity_wh() const { return capacity_ah * nominal_v; }
    bool enabled() const { return p_charge_max > 0 || p_discharge_max > 0; }

    bool operator==(const BatteryParams&) const = default;
};

void validate(const BatteryParams& p, const std::string& where = "battery");

struct BatteryState {
    double soc = 1.0;
    double last_power = 0.0; // W, signed

    bool operator==(const BatteryState&) const = default;
};

BatteryState make_battery_state(const BatteryParams& p, double soc);

/// Stored energy in Wh.
double energy_wh(const BatteryParams& p, const BatteryState& s);

double soc_of(const BatteryState& s);

enum class BatteryFlag {
    None,
    Depleted,     // discharge clipped by remaining energy
    Full,         // charge clipped by remaining headroom
    RampOverride, // caller's feasibility band forced a step beyond the ramp limit
};

const char* to_string(BatteryFlag f);

// Externally imposed limits on the realized power, e.g. the PV power
// actually available to charge from. Must contain 0.
struct PowerBand {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct BatteryStepResult {
    double p_actual = 0.0;
    BatteryState state;
    BatteryFlag flag = BatteryFlag::None;
};

/// Realize a power request over `dt` seconds.
///
/// The request is clipped by the power limits, by the ramp window
/// [last_power - ramp_limit*dt, last_power + ramp_limit*dt], and by the
/// energy (or headroom) left between the SoC bounds. The energy bound also
/// reserves what a ramp-limited return to zero would still move, so a later
/// step is never forced to violate the ramp limit to protect the SoC bounds.
///
/// Discharge draws p*dt/eta_discharge from storage; charge stores
/// |p|*dt*eta_charge.
BatteryStepResult battery_step(const BatteryParams& params, const BatteryState& state,
                               double p_request, double dt, const PowerBand& band = {});

/// Largest constant-then-ramped power whose total moved energy fits in
/// `budget_j` joules. Exposed for tests.
double ramp_aware_power_bound(double budget_j, double dt, double ramp_step);

} // namespace dpi
