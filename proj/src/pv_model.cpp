#include "dpi/pv_model.hpp"

#include "dpi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dpi {

namespace {

constexpr double kBoltzmann = 1.380649e-23;      // J/K
constexpr double kCharge = 1.602176634e-19;      // C
constexpr double kBoltzmannEv = 8.617333262e-5;  // eV/K
constexpr double kBandGapEv = 1.12;              // silicon
constexpr double kKelvin = 273.15;

// n * Vt * Ncells at absolute temperature `kelvin`.
double diode_voltage_scale(const PanelParams& p, double kelvin)
{
    return p.n_ideality * kBoltzmann * kelvin / kCharge * p.n_cells;
}

struct DiodeCoefficients {
    double i_ph;
    double i_0;
    double a;
};

DiodeCoefficients coefficients(const PanelParams& p, const EnvSample& env)
{
    const double t_ref = p.t_stc + kKelvin;
    const double t_cell = cell_temperature(p, env) + kKelvin;
    const double a_ref = diode_voltage_scale(p, t_ref);

    const double i_ph_ref = p.i_sc * (p.r_sh + p.r_s) / p.r_sh;
    const double i_0_ref = (i_ph_ref - p.v_oc / p.r_sh) / std::expm1(p.v_oc / a_ref);

    DiodeCoefficients c{};
    c.i_ph = i_ph_ref * std::max(env.irradiance, 0.0) / p.g_stc;
    c.i_0 = i_0_ref * std::pow(t_cell / t_ref, 3.0)
          * std::exp(kBandGapEv / kBoltzmannEv * (1.0 / t_ref - 1.0 / t_cell));
    c.a = diode_voltage_scale(p, t_cell);
    return c;
}

} // namespace

void validate(const PanelParams& p, const std::string& where)
{
    auto fail = [&](const char* field, const char* what) {
        throw ValidationError(where + "." + field, what);
    };
    if (!(p.p_stc > 0)) fail("p_stc", "must be > 0");
    if (!(p.gamma >= -0.01 && p.gamma <= 0)) fail("gamma", "must lie in [-0.01, 0]");
    if (!(p.g_stc > 0)) fail("g_stc", "must be > 0");
    if (!std::isfinite(p.t_stc)) fail("t_stc", "must be finite");
    if (!(p.i_sc > 0)) fail("i_sc", "must be > 0");
    if (!(p.v_oc > 0)) fail("v_oc", "must be > 0");
    if (!(p.n_ideality > 0)) fail("n_ideality", "must be > 0");
    if (!(p.r_s >= 0)) fail("r_s", "must be >= 0");
    if (!(p.r_sh > 0)) fail("r_sh", "must be > 0");
    if (p.n_cells < 1) fail("n_cells", "must be >= 1");
    if (!(p.k_cell >= 0)) fail("k_cell", "must be >= 0");
}

double cell_temperature(const PanelParams& p, const EnvSample& env)
{
    return env.ambient_temp + p.k_cell * std::max(env.irradiance, 0.0);
}

double scaled_power_at(const PanelParams& p, double irradiance, double cell_temp)
{
    const double g = std::max(irradiance, 0.0);
    const double derate = 1.0 + p.gamma * (cell_temp - p.t_stc);
    const double w = p.p_stc * (g / p.g_stc) * derate;
    return std::isfinite(w) ? std::max(w, 0.0) : 0.0;
}

double scaled_power(const PanelParams& p, const EnvSample& env)
{
    return scaled_power_at(p, env.irradiance, cell_temperature(p, env));
}

double diode_current(const PanelParams& p, double v, const EnvSample& env,
                     const DiodeSolverOptions& opt)
{
    if (v < 0 || v > 1.2 * p.v_oc)
        throw OutOfRange("diode_current: voltage outside [0, 1.2 v_oc]");

    const DiodeCoefficients c = coefficients(p, env);

    // Residual is strictly decreasing in I.
    auto residual = [&](double i) {
        const double vd = v + i * p.r_s;
        return c.i_ph - c.i_0 * std::expm1(vd / c.a) - vd / p.r_sh - i;
    };
    auto slope = [&](double i) {
        const double vd = v + i * p.r_s;
        return -c.i_0 * std::exp(vd / c.a) * p.r_s / c.a - p.r_s / p.r_sh - 1.0;
    };

    double hi = c.i_ph;
    double lo = std::min(0.0, -c.i_ph) - 1.0;
    int expansions = 0;
    while (residual(lo) <= 0) {
        lo *= 2.0;
        if (++expansions > 60)
            throw NonConvergence("diode_current: could not bracket the root");
    }
    if (residual(hi) > 0)
        return hi; // only possible for degenerate zero-size circuits

    double i = 0.5 * (lo + hi);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        const double r = residual(i);
        if (r > 0) lo = i; else hi = i;

        double next = i - r / slope(i);
        if (!(next > lo && next < hi) || !std::isfinite(next))
            next = 0.5 * (lo + hi);

        const double delta = std::abs(next - i);
        i = next;
        if (delta < opt.tolerance || hi - lo < opt.tolerance)
            return i;
    }
    throw NonConvergence("diode_current: no convergence within iteration cap");
}

double diode_power(const PanelParams& p, double v, const EnvSample& env,
                   const DiodeSolverOptions& opt)
{
    return v * diode_current(p, v, env, opt);
}

MpptState initial_mppt_state(const PanelParams& p, double step_v)
{
    MpptState s;
    s.v_ref = 0.5 * p.v_oc;
    s.step_v = step_v;
    s.v_max = p.v_oc;
    return s;
}

MpptState mppt_step(const MpptState& state, double measured_p, double measured_v)
{
    const double dp = measured_p - state.last_p;
    const double dv = measured_v - state.last_v;

    int direction = dv > 0 ? 1 : dv < 0 ? -1 : state.direction;
    if (dp < 0)
        direction = -direction;

    MpptState next = state;
    next.v_ref = std::clamp(state.v_ref + direction * state.step_v, 0.0, state.v_max);
    // Pinned against a clamp: point back into the range.
    if (next.v_ref >= state.v_max) direction = -1;
    else if (next.v_ref <= 0.0) direction = 1;
    next.direction = direction;
    next.last_p = measured_p;
    next.last_v = measured_v;
    return next;
}

} // namespace dpi
