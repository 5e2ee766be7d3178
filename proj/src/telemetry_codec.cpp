#include "dpi/telemetry.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>

namespace dpi::telemetry {

std::string format_field(double v)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

std::string url_encode(std::string_view s)
{
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string url_decode(std::string_view s)
{
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size() && nibble(s[i + 1]) >= 0 && nibble(s[i + 2]) >= 0) {
            out += static_cast<char>(nibble(s[i + 1]) * 16 + nibble(s[i + 2]));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

Params parse_query(std::string_view query)
{
    Params out;
    if (!query.empty() && query.front() == '?') query.remove_prefix(1);
    while (!query.empty()) {
        const auto amp = query.find('&');
        const auto pair = query.substr(0, amp);
        if (!pair.empty()) {
            const auto eq = pair.find('=');
            if (eq == std::string_view::npos) out[url_decode(pair)] = "";
            else out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
        }
        if (amp == std::string_view::npos) break;
        query.remove_prefix(amp + 1);
    }
    return out;
}

std::string encode_update_form(const SimSample& s, const std::string& write_key)
{
    std::string q = "api_key=" + url_encode(write_key);
    const double values[] = {s.temperature, s.p_set, s.p_pv, s.p_load, s.p_batt};
    for (int i = 0; i < 5; ++i)
        q += "&field" + std::to_string(i + 1) + "=" + format_field(values[i]);
    return q;
}

std::string encode_update(const SimSample& s, const std::string& write_key)
{
    return "/update?" + encode_update_form(s, write_key);
}

std::string iso8601(TimePoint t)
{
    const std::time_t tt = std::chrono::system_clock::to_time_t(
        std::chrono::floor<std::chrono::seconds>(t));
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {
constexpr double kSlotEps = 1e-9;
}

std::optional<SimSample> Decimator::push(const SimSample& s)
{
    std::optional<SimSample> out;
    if (latest_ && s.t > next_slot_ + kSlotEps) {
        if (latest_->t <= next_slot_ + kSlotEps) out = latest_;
        while (next_slot_ + kSlotEps < s.t) next_slot_ += interval_;
    }
    latest_ = s;
    return out;
}

std::optional<SimSample> Decimator::flush()
{
    std::optional<SimSample> out;
    if (latest_ && std::abs(latest_->t - next_slot_) <= kSlotEps) out = latest_;
    latest_.reset();
    return out;
}

std::vector<SimSample> decimate(std::span<const SimSample> samples, double interval_s)
{
    Decimator d(interval_s);
    std::vector<SimSample> out;
    for (const auto& s : samples)
        if (auto picked = d.push(s)) out.push_back(*picked);
    if (auto last = d.flush()) out.push_back(*last);
    return out;
}

} // namespace dpi::telemetry
