#include "dpi/kernels.hpp"

#include <cmath>
#include <exception>

namespace dpi::kernels::omp {

namespace {

std::size_t block_count(std::size_t n) { return (n + kReductionBlock - 1) / kReductionBlock; }

} // namespace

MppPoint mpp_scan(const PanelParams& panel, const EnvSample& env, double v_step)
{
    const auto n = static_cast<long>(std::floor(panel.v_oc / v_step));
    std::vector<double> power(static_cast<std::size_t>(n) + 1);
    std::exception_ptr error;

    #pragma omp parallel for schedule(static)
    for (long k = 0; k <= n; ++k) {
        try {
            power[static_cast<std::size_t>(k)] = diode_power(panel, static_cast<double>(k) * v_step, env);
        } catch (...) {
            #pragma omp critical(dpi_mpp_scan_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    // The arg-max pass is cheap next to the diode solves; keep it ordered so
    // ties resolve exactly as in the serial scan.
    MppPoint best{0.0, power[0]};
    for (long k = 1; k <= n; ++k)
        if (power[static_cast<std::size_t>(k)] > best.p)
            best = {static_cast<double>(k) * v_step, power[static_cast<std::size_t>(k)]};
    return best;
}

double trapezoid(std::span<const double> y, double dt)
{
    if (y.size() < 2) return 0.0;
    const std::size_t intervals = y.size() - 1;
    const std::size_t blocks = block_count(intervals);
    std::vector<double> partial(blocks, 0.0);

    #pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t lo = b * kReductionBlock;
        const std::size_t hi = std::min(lo + kReductionBlock, intervals);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += y[i] + y[i + 1];
        partial[b] = s;
    }

    double sum = 0.0;
    for (double s : partial) sum += s;
    return 0.5 * dt * sum;
}

double abs_deviation_sum(std::span<const double> y, double target)
{
    const std::size_t blocks = block_count(y.size());
    std::vector<double> partial(blocks, 0.0);

    #pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t lo = b * kReductionBlock;
        const std::size_t hi = std::min(lo + kReductionBlock, y.size());
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += std::abs(y[i] - target);
        partial[b] = s;
    }

    double sum = 0.0;
    for (double s : partial) sum += s;
    return sum;
}

std::vector<SimResult> run_batch(std::span<const Scenario> scenarios, RunMode mode)
{
    std::vector<SimResult> out(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    const auto n = static_cast<long>(scenarios.size());

    // Each run is serial and independent, so results match the serial batch bit for bit.
    #pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = run(scenarios[static_cast<std::size_t>(i)], mode);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace dpi::kernels::omp
