#pragma once

#include "dpi/battery.hpp"
#include "dpi/controller.hpp"
#include "dpi/pv_model.hpp"
#include "dpi/scenario.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dpi {

// One timestep. Power fields are held constant over [t, t + dt).
struct SimSample {
    double t = 0.0;
    double irradiance = 0.0;
    double temperature = 0.0;   // ambient, °C
    double p_set = 0.0;
    double p_pv = 0.0;          // power leaving the PV terminals
    double p_load = 0.0;        // power delivered to the load
    double p_batt = 0.0;        // signed, positive = discharge
    double soc = 0.0;
    Mode mode = Mode::Bypass;
    double duty = 0.0;

    // Not part of the CSV record.
    double p_pv_available = 0.0; // P_MPPT before curtailment
    double p_pv_to_load = 0.0;
    SwitchStates switches;
    BatteryFlag battery_flag = BatteryFlag::None;

    double p_curtailed() const { return p_pv_available - p_pv; }
};

struct SimResult {
    std::vector<SimSample> samples;
    std::string scenario_digest;
    double dt_s = 0.0;
    double initial_soc = 0.0;
    double final_soc = 0.0;
};

enum class RunMode { Dpi, SpgOnly };

const char* to_string(RunMode m);

// Closed loop for a single step of the DPI system. `run` drives it over a
// whole scenario; tests can feed P_MPPT directly.
class Engine {
public:
    Engine(const Scenario& scenario, RunMode mode = RunMode::Dpi);

    /// Advances one dt with the given available PV power and environment.
    SimSample step(double p_pv_available, const EnvSample& env);

    /// Available PV power at `env` under the scenario's PV model. With the
    /// diode model this also advances the MPPT tracker.
    double available_pv(const EnvSample& env);

    const BatteryState& battery() const { return battery_; }
    const BatteryParams& battery_params() const { return battery_params_; }

private:
    const Scenario& scenario_;
    BatteryParams battery_params_;
    BatteryState battery_;
    ControllerState controller_;
    MpptState mppt_;
    ControlDecision pending_;
    double last_load_ = 0.0;
};

using SampleObserver = std::function<void(const SimSample&)>;

/// Runs the full scenario. `observer`, when set, sees every sample in order
/// as it is produced; it must not block (see BufferedSink).
SimResult run(const Scenario& scenario, RunMode mode = RunMode::Dpi,
              const SampleObserver& observer = {});

// Energy bookkeeping over a run. Each sample's power is held for one dt.
struct EnergyBalance {
    double e_pv_available_wh = 0.0;
    double e_pv_delivered_wh = 0.0;
    double e_load_wh = 0.0;
    double e_charge_in_wh = 0.0;
    double e_discharge_out_wh = 0.0;
    double e_loss_wh = 0.0;
    double e_curtailed_wh = 0.0;
    double e_stored_delta_wh = 0.0;  // from the SoC trajectory
    double residual_wh = 0.0;        // pv + discharge - load - charge
    double storage_residual_wh = 0.0;
};

/// Throws EmptySeries on an empty result and ImbalanceError when either
/// residual exceeds 1e-6 of the energy throughput.
EnergyBalance energy_balance(const SimResult& result, const Scenario& scenario);

} // namespace dpi
