#include "dpi/sample_io.hpp"

#include "dpi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace dpi {

namespace {

void append_g6(std::string& out, double v)
{
    if (v == 0.0) v = 0.0; // drop the sign of negative zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    out += buf;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> parts;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

double parse_double(const std::string& s, const char* what)
{
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(std::string("bad numeric value for ") + what + ": '" + s + "'");
    return v;
}

void append_exact(std::string& out, double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, ptr);
}

} // namespace

std::string csv_row(const SimSample& s)
{
    std::string row;
    row.reserve(96);
    for (double v : {s.t, s.irradiance, s.temperature, s.p_set, s.p_pv, s.p_load, s.p_batt, s.soc}) {
        append_g6(row, v);
        row += ',';
    }
    row += to_string(s.mode);
    row += ',';
    append_g6(row, s.duty);
    return row;
}

void write_csv(std::ostream& out, const std::vector<SimSample>& samples)
{
    out << kCsvHeader << '\n';
    for (const auto& s : samples) out << csv_row(s) << '\n';
}

std::vector<SimSample> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("unexpected CSV header: '" + line + "'");

    std::vector<SimSample> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line, ',');
        if (f.size() != 10)
            throw ParseError("line " + std::to_string(lineno) + ": expected 10 fields");
        SimSample s;
        s.t = parse_double(f[0], "t");
        s.irradiance = parse_double(f[1], "irradiance");
        s.temperature = parse_double(f[2], "temperature");
        s.p_set = parse_double(f[3], "p_set");
        s.p_pv = parse_double(f[4], "p_pv");
        s.p_load = parse_double(f[5], "p_load");
        s.p_batt = parse_double(f[6], "p_batt");
        s.soc = parse_double(f[7], "soc");
        s.mode = mode_from_string(f[8]);
        s.duty = parse_double(f[9], "duty");
        s.p_pv_available = s.p_pv;
        s.p_pv_to_load = s.p_pv - std::max(-s.p_batt, 0.0);
        s.switches = switch_states(s.mode);
        out.push_back(s);
    }
    return out;
}

std::string encode_exact(const SimSample& s)
{
    std::string out;
    for (double v : {s.t, s.irradiance, s.temperature, s.p_set, s.p_pv, s.p_load, s.p_batt, s.soc,
                     s.duty, s.p_pv_available, s.p_pv_to_load}) {
        append_exact(out, v);
        out += ' ';
    }
    out += std::to_string(static_cast<int>(s.mode));
    out += ' ';
    out += std::to_string(static_cast<int>(s.battery_flag));
    return out;
}

SimSample decode_exact(const std::string& line)
{
    const auto f = split(line, ' ');
    if (f.size() != 13) throw ParseError("corrupt spill record");
    SimSample s;
    double* fields[] = {&s.t, &s.irradiance, &s.temperature, &s.p_set, &s.p_pv, &s.p_load,
                        &s.p_batt, &s.soc, &s.duty, &s.p_pv_available, &s.p_pv_to_load};
    for (std::size_t i = 0; i < 11; ++i) *fields[i] = parse_double(f[i], "spill field");
    s.mode = static_cast<Mode>(std::stoi(f[11]));
    s.battery_flag = static_cast<BatteryFlag>(std::stoi(f[12]));
    s.switches = switch_states(s.mode);
    return s;
}

} // namespace dpi
