#pragma once

#include "dpi/engine.hpp"
#include "dpi/scenario.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dpi {

enum class Field { PvAvailable, Pv, Load, Battery, SetPoint, Soc, Curtailed };

double field_value(const SimSample& s, Field f);
std::vector<double> field_series(std::span<const SimSample> samples, Field f);

struct ErrorOptions {
    bool mask_transients = false; // drop samples shortly after a mode change
    double mask_s = 5.0;
};

/// 100 * mean(|p_load - p_set|) / p_set. Throws EmptySeries when no sample
/// survives masking.
double stabilization_error(std::span<const SimSample> samples, double p_set,
                           const ErrorOptions& opt = {});
double stabilization_error(std::span<const double> load, double p_set);

/// Steady-state mask used by stabilization_error (true = keep).
std::vector<bool> steady_state_mask(std::span<const SimSample> samples, const ErrorOptions& opt);

enum class RampDirection { Up, Down };
const char* to_string(RampDirection d);

struct RampRate {
    double magnitude = 0.0; // W/s
    RampDirection direction = RampDirection::Up;
};

double least_squares_slope(std::span<const double> t, std::span<const double> y);

/// Least-squares slope of `field` over samples with t in [t_start, t_end].
/// Throws WindowTooSmall with fewer than two samples in the window.
RampRate ramp_rate(std::span<const SimSample> samples, Field field, double t_start, double t_end);

/// Trapezoidal energy of `field` in Wh; samples must be uniformly spaced.
/// Throws EmptySeries with fewer than two samples.
double energy_wh(std::span<const SimSample> samples, Field field);
double energy_wh(std::span<const double> power, double dt);

struct RampEvent {
    std::string label;
    RampDirection direction = RampDirection::Down;
    double t_start = 0.0;
    double t_end = 0.0;
    double pv_ramp = 0.0;   // W/s, magnitude of the PV slope
    double batt_ramp = 0.0; // W/s, battery slope in the compensating direction
};

struct RampDetection {
    double threshold = 0.5;    // W/s on the sample-to-sample PV derivative
    double merge_gap_s = 1.0;  // same-direction runs closer than this are one event
    double min_change_w = 0.5; // events moving PV by less than this are dropped
};

struct ReportOptions {
    RampDetection ramps;
    double band_w = 0.5;         // tracking band half-width
    double hysteresis_w = 0.1;   // deficit counts only below p_set - hysteresis
    ErrorOptions error;
};

struct MetricsReport {
    double p_set = 0.0;
    double error_pct = 0.0;
    double max_abs_deviation_w = 0.0;
    double band_fraction = 0.0;
    std::vector<RampEvent> ramp_events;
    double e_pv_wh = 0.0;          // available PV energy
    double e_stabilized_wh = 0.0;  // energy delivered to the load
    double e_diff_wh = 0.0;
    double e_pv_delivered_wh = 0.0;
    double e_curtailed_wh = 0.0;
    double e_loss_wh = 0.0;
    double e_net_stored_wh = 0.0;
    double deficit_s = 0.0;
    double deficit_wh = 0.0;
    std::size_t n = 0;
};

/// Contiguous runs of |d p_pv / dt| > threshold with one sign, labelled
/// A, B, ... in time order. Runs separated by short flat stretches (the
/// setpoint deadband) merge; sub-threshold steps in total PV are dropped.
std::vector<RampEvent> detect_ramp_events(std::span<const SimSample> samples,
                                          const RampDetection& opt = {});

/// Battery efficiencies drive the loss/storage split; pass 1.0 when unknown.
MetricsReport report(std::span<const SimSample> samples, double p_set, double eta_charge,
                     double eta_discharge, const ReportOptions& opt = {});
MetricsReport report(const SimResult& result, const Scenario& scenario, ReportOptions opt = {});

std::string format_text(const MetricsReport& r);
std::string format_json(const MetricsReport& r);

} // namespace dpi
