#include "dpi/cli.hpp"

#include "dpi/errors.hpp"
#include "dpi/metrics.hpp"
#include "dpi/sample_io.hpp"
#include "dpi/sample_queue.hpp"
#include "dpi/telemetry.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

namespace dpi::cli {

void apply_overrides(Scenario& s, const ControllerOverrides& o)
{
    auto& c = s.controller;
    if (o.duty_scale) {
        // Keep a full-range actuator unless the scenario narrowed it.
        if (c.duty_max == c.duty_scale) c.duty_max = *o.duty_scale;
        c.duty_scale = *o.duty_scale;
    }
    if (o.p_set) c.p_set = *o.p_set;
    if (o.hysteresis_w) c.hysteresis_w = *o.hysteresis_w;
    if (o.ki) c.ki = *o.ki;
    validate(s);
}

namespace {

std::string render(const MetricsReport& r, ReportFormat f)
{
    return f == ReportFormat::Json ? format_json(r) + "\n" : format_text(r);
}

// Forwards decimated samples to a telemetry endpoint at a fixed wall-clock pace.
class TelemetryForwarder {
public:
    explicit TelemetryForwarder(const TelemetryTarget& t)
        : target_(t), client_(t.url), decimator_(t.interval_s) {}

    void operator()(const SimSample& s)
    {
        if (auto picked = decimator_.push(s)) send(*picked);
    }

    void flush()
    {
        if (auto picked = decimator_.flush()) send(*picked);
    }

    std::size_t sent() const { return sent_; }
    std::size_t rate_limited() const { return rate_limited_; }

private:
    void send(const SimSample& s)
    {
        if (last_send_) {
            const auto due = *last_send_ + std::chrono::duration<double>(target_.pace_s);
            std::this_thread::sleep_until(due);
        }
        const auto r = client_.send(s, target_.write_key);
        last_send_ = std::chrono::steady_clock::now();
        if (r.http_status != 200)
            throw Error("telemetry endpoint rejected update (HTTP " + std::to_string(r.http_status) + ")");
        if (r.entry_id == 0) ++rate_limited_;
        else ++sent_;
    }

    TelemetryTarget target_;
    telemetry::Client client_;
    telemetry::Decimator decimator_;
    std::optional<std::chrono::steady_clock::time_point> last_send_;
    std::size_t sent_ = 0;
    std::size_t rate_limited_ = 0;
};

} // namespace

int cmd_run(const RunManifest& m, std::ostream& out, std::ostream& err)
{
    Scenario scenario;
    try {
        scenario = load_scenario_file(m.scenario_path);
        apply_overrides(scenario, m.overrides);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    std::ofstream csv(m.csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) {
        err << "error: cannot write CSV '" << m.csv_path << "'\n";
        return kIoError;
    }
    csv << kCsvHeader << '\n';

    BufferedSink csv_sink([&](const SimSample& s) { csv << csv_row(s) << '\n'; });

    std::optional<TelemetryForwarder> forwarder;
    std::optional<BufferedSink> telemetry_sink;
    if (m.telemetry) {
        forwarder.emplace(*m.telemetry);
        telemetry_sink.emplace([&](const SimSample& s) { (*forwarder)(s); });
    }

    SimResult result;
    try {
        result = run(scenario, m.mode, [&](const SimSample& s) {
            csv_sink.push(s);
            if (telemetry_sink) telemetry_sink->push(s);
        });
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    int status = kOk;
    try {
        csv_sink.finish();
        csv.flush();
        if (!csv) throw Error("write failed");
    } catch (const std::exception& e) {
        err << "error: CSV output '" << m.csv_path << "': " << e.what() << '\n';
        status = kIoError;
    }

    if (telemetry_sink) {
        try {
            telemetry_sink->finish();
            forwarder->flush();
            out << "telemetry: " << forwarder->sent() << " updates accepted, "
                << forwarder->rate_limited() << " rate limited\n";
        } catch (const std::exception& e) {
            err << "error: telemetry: " << e.what() << '\n';
            status = kIoError;
        }
    }

    try {
        const MetricsReport r = report(result, scenario);
        energy_balance(result, scenario);
        std::ofstream rep(m.report_path, std::ios::trunc);
        rep << render(r, m.format);
        if (!rep) {
            err << "error: cannot write report '" << m.report_path << "'\n";
            return kIoError;
        }
    } catch (const ImbalanceError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    out << "wrote " << result.samples.size() << " samples to " << m.csv_path << " and report to "
        << m.report_path << " (" << to_string(m.mode) << ")\n";
    return status;
}

Comparison compare(const Scenario& s)
{
    const SimResult dpi_run = run(s, RunMode::Dpi);
    const SimResult spg_run = run(s, RunMode::SpgOnly);
    const MetricsReport d = report(dpi_run, s);
    const MetricsReport g = report(spg_run, s);
    return {d.error_pct, g.error_pct, d.e_stabilized_wh, g.e_stabilized_wh,
            d.e_curtailed_wh, g.e_curtailed_wh, d.deficit_s, g.deficit_s};
}

int cmd_compare(const std::string& scenario_path, const ControllerOverrides& o, ReportFormat format,
                std::ostream& out, std::ostream& err)
{
    Comparison c{};
    try {
        Scenario s = load_scenario_file(scenario_path);
        apply_overrides(s, o);
        c = compare(s);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    if (format == ReportFormat::Json) {
        nlohmann::json j;
        j["dpi"] = {{"error_pct", c.dpi_error_pct}, {"energy_delivered_wh", c.dpi_delivered_wh},
                    {"energy_curtailed_wh", c.dpi_curtailed_wh}, {"deficit_s", c.dpi_deficit_s}};
        j["spg-only"] = {{"error_pct", c.spg_error_pct}, {"energy_delivered_wh", c.spg_delivered_wh},
                         {"energy_curtailed_wh", c.spg_curtailed_wh}, {"deficit_s", c.spg_deficit_s}};
        out << j.dump(2) << '\n';
        return kOk;
    }

    char line[128];
    std::snprintf(line, sizeof line, "%-24s %14s %14s\n", "metric", "dpi", "spg-only");
    out << line;
    auto row = [&](const char* name, double a, double b) {
        std::snprintf(line, sizeof line, "%-24s %14.6f %14.6f\n", name, a, b);
        out << line;
    };
    row("error %", c.dpi_error_pct, c.spg_error_pct);
    row("energy delivered Wh", c.dpi_delivered_wh, c.spg_delivered_wh);
    row("energy curtailed Wh", c.dpi_curtailed_wh, c.spg_curtailed_wh);
    row("deficit duration s", c.dpi_deficit_s, c.spg_deficit_s);
    return kOk;
}

int cmd_report(const std::string& csv_path, const std::optional<std::string>& scenario_path,
               ReportFormat format, std::ostream& out, std::ostream& err)
{
    std::ifstream in(csv_path);
    if (!in) {
        err << "error: cannot read CSV '" << csv_path << "'\n";
        return kIoError;
    }
    try {
        std::vector<SimSample> samples = read_csv(in);
        if (samples.size() < 2) throw ConfigError("CSV holds fewer than two samples");

        double eta_c = 1.0, eta_d = 1.0;
        ReportOptions opt;
        if (scenario_path) {
            const Scenario s = load_scenario_file(*scenario_path);
            eta_c = s.battery.eta_charge;
            eta_d = s.battery.eta_discharge;
            opt.hysteresis_w = s.controller.hysteresis_w;
            if (s.engine.pv_model == PvModelKind::Scaled)
                for (auto& x : samples)
                    x.p_pv_available = std::max(x.p_pv, scaled_power(s.panel, {x.t, x.irradiance, x.temperature}));
        }
        out << render(report(samples, samples.front().p_set, eta_c, eta_d, opt), format);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

namespace {

std::pair<std::string, int> split_bind(const std::string& bind)
{
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("bind address must be HOST:PORT, got '" + bind + "'");
    const std::string host = bind.substr(0, colon);
    const int port = std::atoi(bind.c_str() + colon + 1);
    if (port < 0 || port > 65535) throw ConfigError("bad port in '" + bind + "'");
    return {host, port};
}

telemetry::ChannelConfig parse_channel(const std::string& arg)
{
    telemetry::ChannelConfig c;
    const auto first = arg.find(':');
    if (first == std::string::npos) throw ConfigError("channel must be ID:WRITE_KEY[:READ_KEY], got '" + arg + "'");
    c.id = std::strtoull(arg.substr(0, first).c_str(), nullptr, 10);
    const auto second = arg.find(':', first + 1);
    c.write_key = arg.substr(first + 1, second == std::string::npos ? std::string::npos : second - first - 1);
    if (second != std::string::npos) c.read_key = arg.substr(second + 1);
    c.name = "DPI channel " + std::to_string(c.id);
    return c;
}

} // namespace

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err)
{
    try {
        const auto [host, port] = split_bind(o.bind);
        telemetry::ChannelStore store(o.data_dir, o.min_interval);
        for (const auto& arg : o.channels) store.add_channel(parse_channel(arg));
        if (store.channels().empty())
            throw ConfigError("no channels configured; pass --channel ID:WRITE_KEY");

        sigset_t signals;
        sigemptyset(&signals);
        sigaddset(&signals, SIGINT);
        sigaddset(&signals, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &signals, nullptr);

        telemetry::Server server(store);
        const int bound = server.start(host, port);
        out << "serving " << store.channels().size() << " channel(s) on " << host << ":" << bound
            << ", min interval " << o.min_interval.count() << " ms, data in " << o.data_dir << std::endl;

        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
        out << "shutting down" << std::endl;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

namespace {

void add_overrides(CLI::App* cmd, ControllerOverrides& o)
{
    cmd->add_option("--p-set", o.p_set, "Setpoint in W");
    cmd->add_option("--hysteresis", o.hysteresis_w, "Mode deadband half-width in W");
    cmd->add_option("--ki", o.ki, "Integral gain (1/s) on the duty loop");
    cmd->add_option("--duty-scale", o.duty_scale, "PWM full-scale value");
}

std::string env_or(const char* name, const std::string& fallback)
{
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Battery-backed PV stabilization simulator"};
    app.require_subcommand(1);

    std::map<std::string, ReportFormat> formats{{"text", ReportFormat::Text}, {"json", ReportFormat::Json}};
    std::map<std::string, RunMode> modes{{"dpi", RunMode::Dpi}, {"spg-only", RunMode::SpgOnly}};

    RunManifest manifest;
    std::string telemetry_url = env_or("DPI_TELEMETRY_URL", "");
    std::string telemetry_key = env_or("DPI_TELEMETRY_KEY", "");
    double telemetry_interval = 15.0;
    double telemetry_pace = 15.0;
    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario, write CSV and a metrics report");
    run_cmd->add_option("--scenario", manifest.scenario_path, "Scenario file")->required();
    run_cmd->add_option("--out", manifest.csv_path, "CSV output path")->required();
    run_cmd->add_option("--report", manifest.report_path, "Report output path")->required();
    run_cmd->add_option("--mode", manifest.mode, "dpi | spg-only")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    run_cmd->add_option("--format", manifest.format, "Report format: text | json")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
    run_cmd->add_option("--telemetry", telemetry_url, "Telemetry endpoint (env DPI_TELEMETRY_URL)");
    run_cmd->add_option("--write-key", telemetry_key, "Channel write key (env DPI_TELEMETRY_KEY)");
    run_cmd->add_option("--telemetry-interval", telemetry_interval, "Simulated seconds between updates");
    run_cmd->add_option("--telemetry-pace", telemetry_pace, "Wall-clock seconds between sends");
    add_overrides(run_cmd, manifest.overrides);

    std::string compare_scenario;
    ControllerOverrides compare_overrides;
    ReportFormat compare_format = ReportFormat::Text;
    auto* compare_cmd = app.add_subcommand("compare", "Run DPI and SPG-only on one scenario and tabulate");
    compare_cmd->add_option("--scenario", compare_scenario, "Scenario file")->required();
    compare_cmd->add_option("--format", compare_format, "text | json")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
    add_overrides(compare_cmd, compare_overrides);

    std::string report_csv;
    std::optional<std::string> report_scenario;
    ReportFormat report_format = ReportFormat::Text;
    auto* report_cmd = app.add_subcommand("report", "Recompute metrics from an existing CSV");
    report_cmd->add_option("--csv", report_csv, "CSV produced by `run`")->required();
    report_cmd->add_option("--scenario", report_scenario, "Scenario used for the run (optional)");
    report_cmd->add_option("--format", report_format, "text | json")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

    ServeOptions serve;
    serve.bind = env_or("DPI_TELEMETRY_BIND", serve.bind);
    double min_interval_s = 15.0;
    auto* serve_cmd = app.add_subcommand("serve", "Run the telemetry ingest service");
    serve_cmd->add_option("--bind", serve.bind, "HOST:PORT (env DPI_TELEMETRY_BIND)");
    serve_cmd->add_option("--data-dir", serve.data_dir, "Directory for the channel registry and logs");
    serve_cmd->add_option("--min-interval", min_interval_s, "Minimum seconds between accepted updates");
    serve_cmd->add_option("--channel", serve.channels, "ID:WRITE_KEY[:READ_KEY], repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    if (*run_cmd) {
        if (!telemetry_url.empty()) {
            if (telemetry_key.empty()) {
                std::cerr << "error: --telemetry needs --write-key or DPI_TELEMETRY_KEY\n";
                return kConfigError;
            }
            manifest.telemetry = TelemetryTarget{telemetry_url, telemetry_key, telemetry_interval, telemetry_pace};
        }
        return cmd_run(manifest, std::cout, std::cerr);
    }
    if (*compare_cmd) return cmd_compare(compare_scenario, compare_overrides, compare_format, std::cout, std::cerr);
    if (*report_cmd) return cmd_report(report_csv, report_scenario, report_format, std::cout, std::cerr);
    if (*serve_cmd) {
        serve.min_interval = std::chrono::milliseconds(static_cast<long long>(min_interval_s * 1000.0));
        return cmd_serve(serve, std::cout, std::cerr);
    }
    return kConfigError;
}

} // namespace dpi::cli
