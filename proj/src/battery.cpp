#include "dpi/battery.hpp"

#include "dpi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dpi {

void validate(const BatteryParams& p, const std::string& where)
{
    auto fail = [&](const char* field, const char* what) {
        throw ValidationError(where + "." + field, what);
    };
    if (!(p.capacity_ah > 0)) fail("capacity_ah", "must be > 0");
    if (!(p.nominal_v > 0)) fail("nominal_v", "must be > 0");
    if (!(p.soc_min >= 0 && p.soc_min < p.soc_max && p.soc_max <= 1))
        fail("soc_min", "requires 0 <= soc_min < soc_max <= 1");
    if (!(p.p_charge_max >= 0)) fail("p_charge_max", "must be >= 0");
    if (!(p.p_discharge_max >= 0)) fail("p_discharge_max", "must be >= 0");
    if (!(p.ramp_limit > 0)) fail("ramp_limit", "must be > 0");
    if (!(p.eta_charge > 0 && p.eta_charge <= 1)) fail("eta_charge", "must lie in (0, 1]");
    if (!(p.eta_discharge > 0 && p.eta_discharge <= 1))
        fail("eta_discharge", "must lie in (0, 1]");
}

BatteryState make_battery_state(const BatteryParams& p, double soc)
{
    BatteryState s;
    s.soc = std::clamp(soc, p.soc_min, p.soc_max);
    return s;
}

double energy_wh(const BatteryParams& p, const BatteryState& s)
{
    return s.soc * p.capacity_wh();
}

double soc_of(const BatteryState& s) { return s.soc; }

const char* to_string(BatteryFlag f)
{
    switch (f) {
    case BatteryFlag::None: return "none";
    case BatteryFlag::Depleted: return "depleted";
    case BatteryFlag::Full: return "full";
    case BatteryFlag::RampOverride: return "ramp_override";
    }
    return "?";
}

double ramp_aware_power_bound(double budget_j, double dt, double ramp_step)
{
    if (!(budget_j > 0) || !(dt > 0))
        return 0.0;
    // Moving at p now and then ramping down by ramp_step per step costs
    //   dt * sum_{k>=0} max(p - k*ramp_step, 0).
    // For p in (m*r, (m+1)*r] that is dt*((m+1)p - r*m(m+1)/2), and at the
    // right end of the interval it equals dt*r*(m+1)(m+2)/2.
    const double b = budget_j / dt;
    const double r = ramp_step;
    if (!(r > 0) || b <= r)
        return b;

    double m = std::max(0.0, std::ceil((-3.0 + std::sqrt(1.0 + 8.0 * b / r)) / 2.0));
    while (r * (m + 1) * (m + 2) / 2 < b) m += 1;
    while (m > 0 && r * m * (m + 1) / 2 >= b) m -= 1;
    return (b + r * m * (m + 1) / 2) / (m + 1);
}

BatteryStepResult battery_step(const BatteryParams& params, const BatteryState& state,
                               double p_request, double dt, const PowerBand& band)
{
    if (!(dt > 0))
        throw OutOfRange("battery_step: dt must be > 0");

    const double cap_j = params.capacity_wh() * 3600.0;
    const double ramp_step = params.ramp_limit * dt;

    const double avail_j = std::max(0.0, (state.soc - params.soc_min) * cap_j);
    const double headroom_j = std::max(0.0, (params.soc_max - state.soc) * cap_j);
    const double discharge_energy_max =
        ramp_aware_power_bound(avail_j * params.eta_discharge, dt, ramp_step);
    const double charge_energy_max =
        ramp_aware_power_bound(headroom_j / params.eta_charge, dt, ramp_step);

    // Hard limits: power ratings and SoC bounds. Always contains 0.
    const double safe_lo = -std::min(params.p_charge_max, charge_energy_max);
    const double safe_hi = std::min(params.p_discharge_max, discharge_energy_max);

    double lo = std::max(safe_lo, state.last_power - ramp_step);
    double hi = std::min(safe_hi, state.last_power + ramp_step);
    if (lo > hi) {
        // Only reachable through rounding at the energy bound; hard limits win.
        lo = std::clamp(lo, safe_lo, safe_hi);
        hi = lo;
    }

    BatteryFlag flag = BatteryFlag::None;
    const double band_lo = std::max(band.lo, safe_lo);
    const double band_hi = std::min(band.hi, safe_hi);
    if (hi < band_lo || lo > band_hi) {
        const double forced = std::clamp(hi < band_lo ? band_lo : band_hi, safe_lo, safe_hi);
        lo = hi = forced;
        flag = BatteryFlag::RampOverride;
    } else {
        lo = std::max(lo, band_lo);
        hi = std::min(hi, band_hi);
    }

    const double p = std::clamp(p_request, lo, hi);

    if (flag == BatteryFlag::None) {
        if (p_request > 0 && p < p_request && p >= discharge_energy_max)
            flag = BatteryFlag::Depleted;
        else if (p_request < 0 && p > p_request && -p >= charge_energy_max)
            flag = BatteryFlag::Full;
    }

    double stored_j = state.soc * cap_j;
    if (p > 0)
        stored_j -= p * dt / params.eta_discharge;
    else if (p < 0)
        stored_j += -p * dt * params.eta_charge;

    BatteryStepResult out;
    out.p_actual = p;
    out.state.soc = std::clamp(stored_j / cap_j, params.soc_min, params.soc_max);
    out.state.last_power = p;
    out.flag = flag;
    return out;
}

} // namespace dpi
