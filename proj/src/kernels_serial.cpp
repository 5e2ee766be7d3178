#include "dpi/kernels.hpp"

#include <cmath>

namespace dpi::kernels::serial {

MppPoint mpp_scan(const PanelParams& panel, const EnvSample& env, double v_step)
{
    const auto n = static_cast<long>(std::floor(panel.v_oc / v_step));
    MppPoint best{0.0, diode_power(panel, 0.0, env)};
    for (long k = 1; k <= n; ++k) {
        const double v = static_cast<double>(k) * v_step;
        const double p = diode_power(panel, v, env);
        if (p > best.p) best = {v, p};
    }
    return best;
}

double trapezoid(std::span<const double> y, double dt)
{
    double sum = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) sum += y[i - 1] + y[i];
    return 0.5 * dt * sum;
}

double abs_deviation_sum(std::span<const double> y, double target)
{
    double sum = 0.0;
    for (double v : y) sum += std::abs(v - target);
    return sum;
}

std::vector<SimResult> run_batch(std::span<const Scenario> scenarios, RunMode mode)
{
    std::vector<SimResult> out;
    out.reserve(scenarios.size());
    for (const auto& s : scenarios) out.push_back(run(s, mode));
    return out;
}

} // namespace dpi::kernels::serial
