#pragma once

#include <string>

namespace dpi {

struct PanelParams {
    double p_stc = 100.0;       // W at STC
    double gamma = -0.004;      // power temperature coefficient, 1/°C
    double g_stc = 1000.0;      // W/m²
    double t_stc = 25.0;        // °C
    double i_sc = 6.11;         // A
    double v_oc = 21.6;         // V
    double n_ideality = 1.3;
    double r_s = 0.15;          // Ω
    double r_sh = 250.0;        // Ω
    int n_cells = 36;
    double k_cell = 0.03;       // cell temperature rise, °C per W/m²

    bool operator==(const PanelParams&) const = default;
};

// Throws ValidationError (path prefixed with `where`) on the first violated invariant.
void validate(const PanelParams& p, const std::string& where = "panel");

struct EnvSample {
    double t = 0.0;             // s since scenario start
    double irradiance = 0.0;    // W/m²
    double ambient_temp = 25.0; // °C
};

/// Cell temperature from ambient with a linear irradiance-driven rise.
double cell_temperature(const PanelParams& p, const EnvSample& env);

/// Power-scaling model evaluated at an explicit cell temperature. Never negative.
double scaled_power_at(const PanelParams& p, double irradiance, double cell_temp);

/// Power-scaling model; the default P_MPPT source for system runs.
double scaled_power(const PanelParams& p, const EnvSample& env);

struct DiodeSolverOptions {
    double tolerance = 1e-9; // A
    int max_iterations = 200;
};

/// Terminal current of the single-diode equivalent circuit at voltage `v`.
///
/// Solves the implicit equation
///   I = Iph - I0 (exp((V + I Rs) / (n Vt Ncells)) - 1) - (V + I Rs) / Rsh
/// with a Newton iteration safeguarded by bisection on a bracket. Iph scales
/// linearly with irradiance; I0 is pinned so that I(v_oc) = 0 at STC and
/// follows the usual cubic/band-gap temperature dependence.
///
/// Requires 0 <= v <= 1.2 v_oc. Throws NonConvergence if the bracket fails
/// to shrink below `tolerance` within `max_iterations`.
double diode_current(const PanelParams& p, double v, const EnvSample& env,
                     const DiodeSolverOptions& opt = {});

/// v * diode_current(v).
double diode_power(const PanelParams& p, double v, const EnvSample& env,
                   const DiodeSolverOptions& opt = {});

struct MpptState {
    double v_ref = 0.0;  // V, commanded operating voltage
    double last_p = 0.0; // W
    double last_v = 0.0; // V
    double step_v = 0.1; // V
    double v_max = 0.0;  // V, upper clamp (panel v_oc)
    int direction = 1;   // used when the last move did not change the voltage

    bool operator==(const MpptState&) const = default;
};

/// Starting tracker state: v_ref at half of v_oc.
MpptState initial_mppt_state(const PanelParams& p, double step_v = 0.1);

/// One perturb-and-observe update. Keeps the perturbation direction when
/// power did not drop, reverses it otherwise.
MpptState mppt_step(const MpptState& state, double measured_p, double measured_v);

} // namespace dpi
