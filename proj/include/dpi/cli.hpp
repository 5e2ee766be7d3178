#pragma once

#include "dpi/engine.hpp"
#include "dpi/scenario.hpp"

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dpi::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kIoError = 2 };

struct TelemetryTarget {
    std::string url;       // e.g. http://127.0.0.1:3000
    std::string write_key;
    double interval_s = 15.0; // sim-time decimation
    double pace_s = 15.0;     // wall-clock spacing between sends
};

// Command-line overrides applied on top of the scenario's controller section.
struct ControllerOverrides {
    std::optional<double> p_set;
    std::optional<double> hysteresis_w;
    std::optional<double> ki;
    std::optional<double> duty_scale;
};

enum class ReportFormat { Text, Json };

struct RunManifest {
    std::string scenario_path;
    std::string csv_path;
    std::string report_path;
    std::optional<TelemetryTarget> telemetry;
    RunMode mode = RunMode::Dpi;
    ReportFormat format = ReportFormat::Text;
    ControllerOverrides overrides;
};

void apply_overrides(Scenario& s, const ControllerOverrides& o);

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err);

int cmd_compare(const std::string& scenario_path, const ControllerOverrides& o, ReportFormat format,
                std::ostream& out, std::ostream& err);

/// Recomputes metrics from a CSV. With a scenario, available PV power is
/// rebuilt from the irradiance/temperature columns and battery efficiencies
/// are taken from it; without one, the PV column stands in for both.
int cmd_report(const std::string& csv_path, const std::optional<std::string>& scenario_path,
               ReportFormat format, std::ostream& out, std::ostream& err);

struct ServeOptions {
    std::string bind = "127.0.0.1:3000";
    std::string data_dir = "telemetry-data";
    std::chrono::milliseconds min_interval{15000};
    std::vector<std::string> channels; // ID:WRITE_KEY[:READ_KEY]
};

/// Blocks until SIGINT/SIGTERM.
int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err);

struct Comparison {
    double dpi_error_pct, spg_error_pct;
    double dpi_delivered_wh, spg_delivered_wh;
    double dpi_curtailed_wh, spg_curtailed_wh;
    double dpi_deficit_s, spg_deficit_s;
};

Comparison compare(const Scenario& s);

int main(int argc, char** argv);

} // namespace dpi::cli
