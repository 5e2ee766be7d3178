#include "dpi/metrics.hpp"

#include "dpi/errors.hpp"
#include "dpi/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dpi {

double field_value(const SimSample& s, Field f)
{
    switch (f) {
    case Field::PvAvailable: return s.p_pv_available;
    case Field::Pv: return s.p_pv;
    case Field::Load: return s.p_load;
    case Field::Battery: return s.p_batt;
    case Field::SetPoint: return s.p_set;
    case Field::Soc: return s.soc;
    case Field::Curtailed: return s.p_curtailed();
    }
    return 0.0;
}

std::vector<double> field_series(std::span<const SimSample> samples, Field f)
{
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(field_value(s, f));
    return out;
}

std::vector<bool> steady_state_mask(std::span<const SimSample> samples, const ErrorOptions& opt)
{
    std::vector<bool> keep(samples.size(), true);
    if (!opt.mask_transients) return keep;
    double last_change = -1e300;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i > 0 && samples[i].mode != samples[i - 1].mode) last_change = samples[i].t;
        if (samples[i].t - last_change < opt.mask_s) keep[i] = false;
    }
    return keep;
}

double stabilization_error(std::span<const double> load, double p_set)
{
    if (load.empty()) throw EmptySeries("stabilization_error: empty series");
    if (!(p_set > 0)) throw OutOfRange("stabilization_error: p_set must be > 0");
    const double mean_dev = kernels::omp::abs_deviation_sum(load, p_set) / static_cast<double>(load.size());
    return 100.0 * mean_dev / p_set;
}

double stabilization_error(std::span<const SimSample> samples, double p_set, const ErrorOptions& opt)
{
    const auto keep = steady_state_mask(samples, opt);
    std::vector<double> load;
    load.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (keep[i]) load.push_back(samples[i].p_load);
    return stabilization_error(load, p_set);
}

const char* to_string(RampDirection d) { return d == RampDirection::Up ? "up" : "down"; }

double least_squares_slope(std::span<const double> t, std::span<const double> y)
{
    const std::size_t n = std::min(t.size(), y.size());
    if (n < 2) throw WindowTooSmall("least_squares_slope: need at least two points");
    double t_mean = 0.0, y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t_mean += t[i];
        y_mean += y[i];
    }
    t_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);
    double sty = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = t[i] - t_mean;
        sty += dt * (y[i] - y_mean);
        stt += dt * dt;
    }
    if (!(stt > 0)) throw WindowTooSmall("least_squares_slope: zero time span");
    return sty / stt;
}

RampRate ramp_rate(std::span<const SimSample> samples, Field field, double t_start, double t_end)
{
    std::vector<double> t, y;
    for (const auto& s : samples) {
        if (s.t >= t_start && s.t <= t_end) {
            t.push_back(s.t);
            y.push_back(field_value(s, field));
        }
    }
    if (t.size() < 2) throw WindowTooSmall("ramp_rate: window holds fewer than two samples");
    const double slope = least_squares_slope(t, y);
    return {std::abs(slope), slope < 0 ? RampDirection::Down : RampDirection::Up};
}

double energy_wh(std::span<const double> power, double dt)
{
    if (power.size() < 2) throw EmptySeries("energy_wh: need at least two samples");
    return kernels::omp::trapezoid(power, dt) / 3600.0;
}

double energy_wh(std::span<const SimSample> samples, Field field)
{
    if (samples.size() < 2) throw EmptySeries("energy_wh: need at least two samples");
    const double dt = samples[1].t - samples[0].t;
    return energy_wh(field_series(samples, field), dt);
}

std::vector<RampEvent> detect_ramp_events(std::span<const SimSample> samples, const RampDetection& opt)
{
    const std::size_t n = samples.size();
    auto rate = [&](std::size_t i) {
        return (samples[i].p_pv - samples[i - 1].p_pv) / (samples[i].t - samples[i - 1].t);
    };

    // Runs of derivative indices [first, last] over one sign.
    struct Run {
        std::size_t first, last;
        bool down;
    };
    std::vector<Run> runs;
    for (std::size_t k = 1; k < n;) {
        const double r = rate(k);
        if (std::abs(r) <= opt.threshold) {
            ++k;
            continue;
        }
        const bool down = r < 0;
        std::size_t end = k;
        while (end + 1 < n) {
            const double next = rate(end + 1);
            if (std::abs(next) <= opt.threshold || (next < 0) != down) break;
            ++end;
        }
        if (!runs.empty() && runs.back().down == down
            && samples[k - 1].t - samples[runs.back().last].t <= opt.merge_gap_s)
            runs.back().last = end;
        else
            runs.push_back({k, end, down});
        k = end + 1;
    }

    std::vector<RampEvent> events;
    for (const Run& run : runs) {
        // Window covers samples [first-1, last].
        const auto window = samples.subspan(run.first - 1, run.last - run.first + 2);
        if (std::abs(window.back().p_pv - window.front().p_pv) < opt.min_change_w) continue;

        std::vector<double> t, pv;
        for (const auto& s : window) {
            t.push_back(s.t);
            pv.push_back(s.p_pv);
        }

        // Battery response while it actively compensates: inserting during a
        // PV drop, absorbing during a PV rise.
        std::vector<double> bt, bp;
        for (const auto& s : window) {
            if ((run.down && s.p_batt > 0) || (!run.down && s.p_batt < 0)) {
                bt.push_back(s.t);
                bp.push_back(s.p_batt);
            }
        }
        if (bt.size() < 2) {
            bt = t;
            bp.clear();
            for (const auto& s : window) bp.push_back(s.p_batt);
        }

        RampEvent e;
        e.direction = run.down ? RampDirection::Down : RampDirection::Up;
        e.t_start = window.front().t;
        e.t_end = window.back().t;
        e.pv_ramp = std::abs(least_squares_slope(t, pv));
        const double batt_slope = least_squares_slope(bt, bp);
        e.batt_ramp = run.down ? batt_slope : -batt_slope;
        events.push_back(e);
    }

    for (std::size_t i = 0; i < events.size(); ++i) {
        std::string label;
        std::size_t idx = i;
        do {
            label.insert(label.begin(), static_cast<char>('A' + idx % 26));
            idx = idx / 26;
        } while (idx-- > 0);
        events[i].label = label;
    }
    return events;
}

MetricsReport report(std::span<const SimSample> samples, double p_set, double eta_charge,
                     double eta_discharge, const ReportOptions& opt)
{
    if (samples.size() < 2) throw EmptySeries("report: need at least two samples");
    const double dt = samples[1].t - samples[0].t;

    MetricsReport r;
    r.p_set = p_set;
    r.n = samples.size();
    r.error_pct = stabilization_error(samples, p_set, opt.error);

    const auto keep = steady_state_mask(samples, opt.error);
    std::size_t kept = 0, in_band = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double dev = std::abs(samples[i].p_load - p_set);
        r.max_abs_deviation_w = std::max(r.max_abs_deviation_w, dev);
        if (!keep[i]) continue;
        ++kept;
        if (dev <= opt.band_w) ++in_band;
    }
    r.band_fraction = kept ? static_cast<double>(in_band) / static_cast<double>(kept) : 0.0;

    r.ramp_events = detect_ramp_events(samples, opt.ramps);

    r.e_pv_wh = energy_wh(samples, Field::PvAvailable);
    r.e_stabilized_wh = energy_wh(samples, Field::Load);
    r.e_diff_wh = r.e_pv_wh - r.e_stabilized_wh;
    r.e_pv_delivered_wh = energy_wh(samples, Field::Pv);
    r.e_curtailed_wh = energy_wh(samples, Field::Curtailed);

    std::vector<double> loss, stored, deficit;
    loss.reserve(samples.size());
    stored.reserve(samples.size());
    deficit.reserve(samples.size());
    for (const auto& s : samples) {
        const double charge = std::max(-s.p_batt, 0.0);
        const double discharge = std::max(s.p_batt, 0.0);
        loss.push_back(charge * (1.0 - eta_charge) + discharge * (1.0 / eta_discharge - 1.0));
        stored.push_back(charge * eta_charge - discharge / eta_discharge);
        deficit.push_back(std::max(p_set - s.p_load, 0.0));
        if (s.p_load < p_set - opt.hysteresis_w - 1e-9) r.deficit_s += dt;
    }
    r.e_loss_wh = energy_wh(loss, dt);
    r.e_net_stored_wh = energy_wh(stored, dt);
    r.deficit_wh = energy_wh(deficit, dt);
    return r;
}

MetricsReport report(const SimResult& result, const Scenario& scenario, ReportOptions opt)
{
    opt.hysteresis_w = scenario.controller.hysteresis_w;
    return report(result.samples, scenario.controller.p_set, scenario.battery.eta_charge,
                  scenario.battery.eta_discharge, opt);
}

std::string format_text(const MetricsReport& r)
{
    std::ostringstream out;
    char line[160];
    auto row = [&](const char* name, double value, const char* unit) {
        std::snprintf(line, sizeof line, "%-28s %14.6f %s\n", name, value, unit);
        out << line;
    };
    row("setpoint", r.p_set, "W");
    std::snprintf(line, sizeof line, "%-28s %14zu\n", "samples", r.n);
    out << line;
    row("stabilization error", r.error_pct, "%");
    row("max |p_load - p_set|", r.max_abs_deviation_w, "W");
    row("samples within band", 100.0 * r.band_fraction, "%");
    row("PV energy (available)", r.e_pv_wh, "Wh");
    row("stabilized energy (load)", r.e_stabilized_wh, "Wh");
    row("difference", r.e_diff_wh, "Wh");
    row("PV energy (delivered)", r.e_pv_delivered_wh, "Wh");
    row("curtailed energy", r.e_curtailed_wh, "Wh");
    row("battery losses", r.e_loss_wh, "Wh");
    row("net stored energy", r.e_net_stored_wh, "Wh");
    row("deficit duration", r.deficit_s, "s");
    row("deficit energy", r.deficit_wh, "Wh");
    out << "ramp events:\n";
    if (r.ramp_events.empty()) out << "  (none)\n";
    for (const auto& e : r.ramp_events) {
        std::snprintf(line, sizeof line, "  %-3s %-4s t=[%.3f, %.3f] s  pv %.4f W/s  battery %.4f W/s\n",
                      e.label.c_str(), to_string(e.direction), e.t_start, e.t_end, e.pv_ramp, e.batt_ramp);
        out << line;
    }
    return out.str();
}

std::string format_json(const MetricsReport& r)
{
    nlohmann::json j;
    j["p_set"] = r.p_set;
    j["N"] = r.n;
    j["error_pct"] = r.error_pct;
    j["max_abs_deviation_w"] = r.max_abs_deviation_w;
    j["band_fraction"] = r.band_fraction;
    j["e_pv_wh"] = r.e_pv_wh;
    j["e_stabilized_wh"] = r.e_stabilized_wh;
    j["e_diff_wh"] = r.e_diff_wh;
    j["e_pv_delivered_wh"] = r.e_pv_delivered_wh;
    j["e_curtailed_wh"] = r.e_curtailed_wh;
    j["e_loss_wh"] = r.e_loss_wh;
    j["e_net_stored_wh"] = r.e_net_stored_wh;
    j["deficit_s"] = r.deficit_s;
    j["deficit_wh"] = r.deficit_wh;
    j["ramp_events"] = nlohmann::json::array();
    for (const auto& e : r.ramp_events)
        j["ramp_events"].push_back({{"label", e.label}, {"direction", to_string(e.direction)},
                                    {"t_start", e.t_start}, {"t_end", e.t_end},
                                    {"pv_ramp", e.pv_ramp}, {"batt_ramp", e.batt_ramp}});
    return j.dump(2);
}

} // namespace dpi
