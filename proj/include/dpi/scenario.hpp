#pragma once

#include "dpi/battery.hpp"
#include "dpi/controller.hpp"
#include "dpi/pv_model.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dpi {

// Either a constant or piecewise-linear breakpoints (t, value), sorted by t.
// Values are held flat before the first and after the last breakpoint.
struct Profile {
    std::vector<std::pair<double, double>> points;

    static Profile constant(double v) { return Profile{{{0.0, v}}}; }
    bool is_constant() const { return points.size() == 1; }
    double at(double t) const;

    bool operator==(const Profile&) const = default;
};

struct ShadingEvent {
    double start_s = 0.0;
    double end_s = 0.0;
    double depth = 1.0;  // remaining irradiance fraction while fully shaded
    double ramp_s = 0.0; // linear transition at both edges

    /// Irradiance multiplier at time t (1 outside the event).
    double multiplier(double t) const;

    bool operator==(const ShadingEvent&) const = default;
};

enum class PvModelKind { Scaled, Diode };

struct EngineOptions {
    bool actuation_delay = false; // act on the previous step's decision
    PvModelKind pv_model = PvModelKind::Scaled;
    double mppt_step_v = 0.1;

    bool operator==(const EngineOptions&) const = default;
};

struct Scenario {
    std::string name;
    double duration_s = 60.0;
    double dt_s = 0.1;
    Profile base_irradiance = Profile::constant(1000.0);
    Profile base_temp = Profile::constant(25.0);
    std::vector<ShadingEvent> shading;
    double noise_sigma = 0.0; // W/m², Gaussian on irradiance
    std::uint64_t seed = 0;
    PanelParams panel;
    BatteryParams battery;
    double initial_soc = 0.8;
    ControllerConfig controller;
    double load_demand_w = 20.0;
    EngineOptions engine;

    /// Number of samples a run produces: floor(duration/dt) + 1.
    std::size_t step_count() const;
    double time_of(std::size_t k) const { return static_cast<double>(k) * dt_s; }

    bool operator==(const Scenario&) const = default;
};

void validate(const Scenario& s);

/// Parses and validates a JSON scenario document. Missing fields take their
/// defaults; unknown fields are rejected. Throws ParseError / ValidationError.
Scenario load_scenario(const std::string& text);

/// Reads a file and forwards to load_scenario. A missing file is a ConfigError
/// naming the path.
Scenario load_scenario_file(const std::string& path);

/// Canonical JSON form; load_scenario(to_json_text(s)) == s.
std::string to_json_text(const Scenario& s);

/// Content hash (FNV-1a 64 over the canonical JSON), hex encoded.
std::string scenario_digest(const Scenario& s);

/// Environment at time t: interpolated base values times the active shading
/// multipliers, plus optional seeded noise. Throws OutOfRange outside
/// [0, duration_s].
EnvSample sample_env(const Scenario& s, double t);

} // namespace dpi
