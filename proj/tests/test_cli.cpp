#include "dpi/cli.hpp"
#include "dpi/metrics.hpp"
#include "dpi/sample_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace dpi;
namespace fs = std::filesystem;

namespace {

const std::string kSourceDir = DPI_SOURCE_DIR;
const std::string kReference = kSourceDir + "/scenarios/two-shading.json";
const std::string kEquilibrium = kSourceDir + "/scenarios/equilibrium.json";

struct Workdir {
    Workdir()
    {
        static std::atomic<int> n{0};
        path = fs::temp_directory_path() / ("dpi-cli-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        fs::create_directories(path);
    }
    ~Workdir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    fs::path path;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int invoke(std::vector<std::string> args)
{
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("run writes csv and report")
{
    Workdir w;
    const int rc = invoke({"dpisim", "run", "--scenario", kReference, "--out", w.file("run.csv"),
                           "--report", w.file("report.txt")});
    CHECK(rc == cli::kOk);
    const std::string csv = slurp(w.file("run.csv"));
    CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3002);
    CHECK(slurp(w.file("report.txt")).find("stabilization error") != std::string::npos);
}

TEST_CASE("missing scenario is a configuration error naming the path")
{
    Workdir w;
    cli::RunManifest m;
    m.scenario_path = w.file("absent.json");
    m.csv_path = w.file("run.csv");
    m.report_path = w.file("report.txt");
    std::ostringstream out, err;
    CHECK(cli::cmd_run(m, out, err) == cli::kConfigError);
    CHECK(err.str().find(m.scenario_path) != std::string::npos);
    CHECK_FALSE(fs::exists(m.csv_path));
}

TEST_CASE("unwritable output is an io error")
{
    cli::RunManifest m;
    m.scenario_path = kEquilibrium;
    m.csv_path = "/nonexistent-dir/run.csv";
    m.report_path = "/nonexistent-dir/report.txt";
    std::ostringstream out, err;
    CHECK(cli::cmd_run(m, out, err) == cli::kIoError);
}

TEST_CASE("spg-only run shows the shading deficit")
{
    Workdir w;
    cli::RunManifest m;
    m.scenario_path = kReference;
    m.csv_path = w.file("spg.csv");
    m.report_path = w.file("spg.json");
    m.mode = RunMode::SpgOnly;
    m.format = cli::ReportFormat::Json;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run(m, out, err) == cli::kOk);
    const auto spg = nlohmann::json::parse(slurp(m.report_path));

    m.mode = RunMode::Dpi;
    m.csv_path = w.file("dpi.csv");
    m.report_path = w.file("dpi.json");
    REQUIRE(cli::cmd_run(m, out, err) == cli::kOk);
    const auto dpi_report = nlohmann::json::parse(slurp(m.report_path));

    CHECK(spg["deficit_s"].get<double>() > 0.0);
    CHECK(spg["deficit_wh"].get<double>() > dpi_report["deficit_wh"].get<double>());
    CHECK(dpi_report["deficit_s"].get<double>() < spg["deficit_s"].get<double>());
}

TEST_CASE("repeated runs produce byte identical csv")
{
    Workdir w;
    for (const char* name : {"a.csv", "b.csv"})
        REQUIRE(invoke({"dpisim", "run", "--scenario", kReference, "--out", w.file(name),
                        "--report", w.file("r.txt")}) == cli::kOk);
    CHECK(slurp(w.file("a.csv")) == slurp(w.file("b.csv")));
}

TEST_CASE("compare")
{
    SUBCASE("equilibrium rows match")
    {
        const cli::Comparison c = cli::compare(load_scenario_file(kEquilibrium));
        CHECK(c.dpi_error_pct == c.spg_error_pct);
        CHECK(c.dpi_delivered_wh == c.spg_delivered_wh);
        CHECK(c.dpi_curtailed_wh == c.spg_curtailed_wh);
        CHECK(c.dpi_deficit_s == c.spg_deficit_s);
    }
    SUBCASE("reference favours dpi")
    {
        const cli::Comparison c = cli::compare(load_scenario_file(kReference));
        CHECK(c.dpi_error_pct < c.spg_error_pct);
    }
    SUBCASE("disabled battery matches spg-only")
    {
        Scenario s = load_scenario_file(kReference);
        s.battery.p_charge_max = 0;
        s.battery.p_discharge_max = 0;
        const cli::Comparison c = cli::compare(s);
        CHECK(c.dpi_error_pct == c.spg_error_pct);
        CHECK(c.dpi_delivered_wh == c.spg_delivered_wh);
        CHECK(c.dpi_curtailed_wh == c.spg_curtailed_wh);
        CHECK(c.dpi_deficit_s == c.spg_deficit_s);
    }
    SUBCASE("table output")
    {
        std::ostringstream out, err;
        CHECK(cli::cmd_compare(kReference, {}, cli::ReportFormat::Text, out, err) == cli::kOk);
        CHECK(out.str().find("spg-only") != std::string::npos);
        CHECK(out.str().find("error %") != std::string::npos);
    }
}

TEST_CASE("report recomputes metrics from csv")
{
    Workdir w;
    cli::RunManifest m;
    m.scenario_path = kReference;
    m.csv_path = w.file("run.csv");
    m.report_path = w.file("run.json");
    m.format = cli::ReportFormat::Json;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run(m, out, err) == cli::kOk);
    const auto original = nlohmann::json::parse(slurp(m.report_path));

    std::ostringstream rep;
    REQUIRE(cli::cmd_report(m.csv_path, kReference, cli::ReportFormat::Json, rep, err) == cli::kOk);
    const auto again = nlohmann::json::parse(rep.str());
    // CSV carries 6 significant digits.
    CHECK(again["error_pct"].get<double>() == doctest::Approx(original["error_pct"].get<double>()).epsilon(1e-2));
    CHECK(again["e_stabilized_wh"].get<double>() == doctest::Approx(original["e_stabilized_wh"].get<double>()).epsilon(1e-5));
    CHECK(again["e_pv_wh"].get<double>() == doctest::Approx(original["e_pv_wh"].get<double>()).epsilon(1e-5));
    CHECK(again["ramp_events"].size() == original["ramp_events"].size());

    std::ostringstream bare;
    CHECK(cli::cmd_report(m.csv_path, std::nullopt, cli::ReportFormat::Text, bare, err) == cli::kOk);
    CHECK(cli::cmd_report(w.file("none.csv"), std::nullopt, cli::ReportFormat::Text, bare, err) != cli::kOk);
}

TEST_CASE("controller overrides")
{
    Scenario s;
    cli::ControllerOverrides o;
    o.p_set = 12.0;
    o.ki = 0.2;
    cli::apply_overrides(s, o);
    CHECK(s.controller.p_set == 12.0);
    CHECK(s.controller.ki == 0.2);
    CHECK(s.controller.hysteresis_w == 0.1);

    Workdir w;
    CHECK(invoke({"dpisim", "run", "--scenario", kEquilibrium, "--out", w.file("o.csv"), "--report",
                  w.file("o.txt"), "--p-set", "-3"}) == cli::kConfigError);
    CHECK(invoke({"dpisim", "run", "--scenario", kEquilibrium, "--out", w.file("o.csv"), "--report",
                  w.file("o.txt"), "--p-set", "12"}) == cli::kOk);
    CHECK(slurp(w.file("o.txt")).find("12.000000 W") != std::string::npos);
}

TEST_CASE("bad command lines are configuration errors")
{
    CHECK(invoke({"dpisim", "run"}) == cli::kConfigError);
    CHECK(invoke({"dpisim", "frobnicate"}) == cli::kConfigError);
    CHECK(invoke({"dpisim", "run", "--scenario", kEquilibrium, "--out", "x", "--report", "y", "--mode", "both"})
          == cli::kConfigError);
}
