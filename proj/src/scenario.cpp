#include "dpi/scenario.hpp"

#include "dpi/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dpi {

using nlohmann::json;

double Profile::at(double t) const
{
    if (points.empty()) return 0.0;
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    auto hi = std::upper_bound(points.begin(), points.end(), t,
                               [](double x, const auto& p) { return x < p.first; });
    auto lo = std::prev(hi);
    const double span = hi->first - lo->first;
    if (span <= 0) return hi->second;
    const double w = (t - lo->first) / span;
    return lo->second + w * (hi->second - lo->second);
}

double ShadingEvent::multiplier(double t) const
{
    if (t < start_s || t > end_s) return 1.0;
    if (ramp_s > 0) {
        if (t < start_s + ramp_s)
            return 1.0 - (1.0 - depth) * (t - start_s) / ramp_s;
        if (t > end_s - ramp_s)
            return depth + (1.0 - depth) * (t - (end_s - ramp_s)) / ramp_s;
        return depth;
    }
    return t < end_s ? depth : 1.0;
}

std::size_t Scenario::step_count() const
{
    return static_cast<std::size_t>(std::floor(duration_s / dt_s + 1e-9)) + 1;
}

namespace {

void validate_profile(const Profile& p, const std::string& where, bool non_negative)
{
    if (p.points.empty()) throw ValidationError(where, "needs at least one value");
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        const auto& [t, v] = p.points[i];
        const std::string at = where + "[" + std::to_string(i) + "]";
        if (!std::isfinite(t) || !std::isfinite(v)) throw ValidationError(at, "must be finite");
        if (non_negative && v < 0) throw ValidationError(at, "value must be >= 0");
        if (i > 0 && t < p.points[i - 1].first)
            throw ValidationError(at, "breakpoints must be sorted by t");
    }
}

} // namespace

void validate(const Scenario& s)
{
    if (!(s.duration_s > 0)) throw ValidationError("duration_s", "must be > 0");
    if (!(s.dt_s > 0)) throw ValidationError("dt_s", "must be > 0");
    if (!(s.dt_s <= s.duration_s)) throw ValidationError("dt_s", "must not exceed duration_s");
    validate_profile(s.base_irradiance, "irradiance", true);
    validate_profile(s.base_temp, "temperature", false);
    if (!(s.noise_sigma >= 0)) throw ValidationError("noise_sigma", "must be >= 0");

    for (std::size_t i = 0; i < s.shading.size(); ++i) {
        const auto& e = s.shading[i];
        const std::string at = "shading[" + std::to_string(i) + "]";
        if (!(e.start_s >= 0 && e.start_s < e.end_s))
            throw ValidationError(at, "requires 0 <= start_s < end_s");
        if (!(e.depth > 0 && e.depth <= 1)) throw ValidationError(at + ".depth", "must lie in (0, 1]");
        if (!(e.ramp_s >= 0 && e.ramp_s <= (e.end_s - e.start_s) / 2))
            throw ValidationError(at + ".ramp_s", "must lie in [0, (end_s - start_s)/2]");
        for (std::size_t j = 0; j < i; ++j) {
            const auto& o = s.shading[j];
            if (e.start_s < o.end_s && o.start_s < e.end_s)
                throw ValidationError("shading", "events shading[" + std::to_string(j) + "] and "
                                                     + at + " overlap");
        }
    }

    validate(s.panel);
    validate(s.battery);
    if (!(s.initial_soc >= s.battery.soc_min && s.initial_soc <= s.battery.soc_max))
        throw ValidationError("battery.initial_soc", "must lie in [soc_min, soc_max]");
    validate(s.controller);
    if (!(s.load_demand_w >= 0)) throw ValidationError("load.demand_w", "must be >= 0");
    if (!(s.engine.mppt_step_v > 0)) throw ValidationError("engine.mppt_step_v", "must be > 0");
}

namespace {

// Reads an object, checking that every key is known, and hands typed access
// to the caller. Errors carry the dotted field path.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "must be an object");
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ValidationError(field(key), "has the wrong type");
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const std::string& key) const
    {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ValidationError(field(it.key()), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Profile read_profile(const json& j, const std::string& path)
{
    if (j.is_number()) return Profile::constant(j.get<double>());
    if (!j.is_array()) throw ValidationError(path, "must be a number or a list of [t, value] pairs");
    Profile p;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ValidationError(path + "[" + std::to_string(i) + "]", "must be a [t, value] pair");
        p.points.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return p;
}

json write_profile(const Profile& p)
{
    if (p.is_constant() && p.points.front().first == 0.0) return p.points.front().second;
    json a = json::array();
    for (const auto& [t, v] : p.points) a.push_back({t, v});
    return a;
}

const char* to_string(PvModelKind k) { return k == PvModelKind::Diode ? "diode" : "scaled"; }

} // namespace

Scenario load_scenario(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed scenario document: ") + e.what());
    }

    Scenario s;
    Reader root(doc, "");
    root.get("name", s.name);
    root.get("duration_s", s.duration_s);
    root.get("dt_s", s.dt_s);
    root.get("noise_sigma", s.noise_sigma);
    root.get("seed", s.seed);
    if (const json* g = root.child("irradiance")) s.base_irradiance = read_profile(*g, "irradiance");
    if (const json* t = root.child("temperature")) s.base_temp = read_profile(*t, "temperature");

    if (const json* sh = root.child("shading")) {
        if (!sh->is_array()) throw ValidationError("shading", "must be a list");
        for (std::size_t i = 0; i < sh->size(); ++i) {
            Reader r((*sh)[i], "shading[" + std::to_string(i) + "]");
            ShadingEvent e;
            r.get("start_s", e.start_s);
            r.get("end_s", e.end_s);
            r.get("depth", e.depth);
            r.get("ramp_s", e.ramp_s);
            r.finish();
            s.shading.push_back(e);
        }
    }

    if (const json* pj = root.child("panel")) {
        Reader r(*pj, "panel");
        auto& p = s.panel;
        r.get("p_stc", p.p_stc);
        r.get("gamma", p.gamma);
        r.get("g_stc", p.g_stc);
        r.get("t_stc", p.t_stc);
        r.get("i_sc", p.i_sc);
        r.get("v_oc", p.v_oc);
        r.get("n_ideality", p.n_ideality);
        r.get("r_s", p.r_s);
        r.get("r_sh", p.r_sh);
        r.get("n_cells", p.n_cells);
        r.get("k_cell", p.k_cell);
        r.finish();
    }

    if (const json* bj = root.child("battery")) {
        Reader r(*bj, "battery");
        auto& b = s.battery;
        r.get("capacity_ah", b.capacity_ah);
        r.get("nominal_v", b.nominal_v);
        r.get("soc_min", b.soc_min);
        r.get("soc_max", b.soc_max);
        r.get("p_charge_max", b.p_charge_max);
        r.get("p_discharge_max", b.p_discharge_max);
        r.get("ramp_limit", b.ramp_limit);
        r.get("eta_charge", b.eta_charge);
        r.get("eta_discharge", b.eta_discharge);
        r.get("initial_soc", s.initial_soc);
        r.finish();
    }

    if (const json* cj = root.child("controller")) {
        Reader r(*cj, "controller");
        auto& c = s.controller;
        r.get("p_set", c.p_set);
        r.get("duty_scale", c.duty_scale);
        c.duty_max = c.duty_scale;
        r.get("duty_min", c.duty_min);
        r.get("duty_max", c.duty_max);
        r.get("hysteresis_w", c.hysteresis_w);
        r.get("ki", c.ki);
        r.finish();
    }

    if (const json* lj = root.child("load")) {
        Reader r(*lj, "load");
        r.get("demand_w", s.load_demand_w);
        r.finish();
    }

    if (const json* ej = root.child("engine")) {
        Reader r(*ej, "engine");
        r.get("actuation_delay", s.engine.actuation_delay);
        std::string model = to_string(s.engine.pv_model);
        r.get("pv_model", model);
        if (model == "scaled") s.engine.pv_model = PvModelKind::Scaled;
        else if (model == "diode") s.engine.pv_model = PvModelKind::Diode;
        else throw ValidationError("engine.pv_model", "must be \"scaled\" or \"diode\"");
        r.get("mppt_step_v", s.engine.mppt_step_v);
        r.finish();
    }

    root.finish();
    validate(s);
    return s;
}

Scenario load_scenario_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

std::string to_json_text(const Scenario& s)
{
    json j;
    j["name"] = s.name;
    j["duration_s"] = s.duration_s;
    j["dt_s"] = s.dt_s;
    j["noise_sigma"] = s.noise_sigma;
    j["seed"] = s.seed;
    j["irradiance"] = write_profile(s.base_irradiance);
    j["temperature"] = write_profile(s.base_temp);
    j["shading"] = json::array();
    for (const auto& e : s.shading)
        j["shading"].push_back({{"start_s", e.start_s}, {"end_s", e.end_s},
                                {"depth", e.depth}, {"ramp_s", e.ramp_s}});
    const auto& p = s.panel;
    j["panel"] = {{"p_stc", p.p_stc}, {"gamma", p.gamma}, {"g_stc", p.g_stc},
                  {"t_stc", p.t_stc}, {"i_sc", p.i_sc}, {"v_oc", p.v_oc},
                  {"n_ideality", p.n_ideality}, {"r_s", p.r_s}, {"r_sh", p.r_sh},
                  {"n_cells", p.n_cells}, {"k_cell", p.k_cell}};
    const auto& b = s.battery;
    j["battery"] = {{"capacity_ah", b.capacity_ah}, {"nominal_v", b.nominal_v},
                    {"soc_min", b.soc_min}, {"soc_max", b.soc_max},
                    {"p_charge_max", b.p_charge_max}, {"p_discharge_max", b.p_discharge_max},
                    {"ramp_limit", b.ramp_limit}, {"eta_charge", b.eta_charge},
                    {"eta_discharge", b.eta_discharge}, {"initial_soc", s.initial_soc}};
    const auto& c = s.controller;
    j["controller"] = {{"p_set", c.p_set}, {"duty_scale", c.duty_scale},
                       {"duty_min", c.duty_min}, {"duty_max", c.duty_max},
                       {"hysteresis_w", c.hysteresis_w}, {"ki", c.ki}};
    j["load"] = {{"demand_w", s.load_demand_w}};
    j["engine"] = {{"actuation_delay", s.engine.actuation_delay},
                   {"pv_model", to_string(s.engine.pv_model)},
                   {"mppt_step_v", s.engine.mppt_step_v}};
    return j.dump(2);
}

std::string scenario_digest(const Scenario& s)
{
    const std::string text = to_json_text(s);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EnvSample sample_env(const Scenario& s, double t)
{
    if (!(t >= 0 && t <= s.duration_s + 1e-9 * s.dt_s))
        throw OutOfRange("sample_env: t = " + std::to_string(t) + " outside [0, duration_s]");

    double g = s.base_irradiance.at(t);
    for (const auto& e : s.shading) g *= e.multiplier(t);

    if (s.noise_sigma > 0) {
        // Keyed on (seed, step index) so any t can be sampled independently.
        const auto step = static_cast<std::uint64_t>(std::llround(t / s.dt_s));
        std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                          static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, s.noise_sigma);
        g += noise(rng);
    }

    EnvSample env;
    env.t = t;
    env.irradiance = std::max(g, 0.0);
    env.ambient_temp = s.base_temp.at(t);
    return env;
}

} // namespace dpi
