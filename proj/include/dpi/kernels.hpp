#pragma once

// Data-parallel kernels. Each has a plain serial reference in
// dpi::kernels::serial and an OpenMP version in dpi::kernels::omp; the
// tests hold the two against each other and bench_kernels times them.
//
// The OpenMP reductions sum fixed-size blocks in index order, so their
// results do not depend on the thread count.

#include "dpi/engine.hpp"
#include "dpi/pv_model.hpp"
#include "dpi/scenario.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dpi::kernels {

inline constexpr std::size_t kReductionBlock = 4096;

struct MppPoint {
    double v = 0.0;
    double p = 0.0;
};

namespace serial {

/// Exhaustive scan of v * I(v) over v = 0, step, 2 step, ... <= v_oc.
/// Ties go to the lowest voltage.
MppPoint mpp_scan(const PanelParams& panel, const EnvSample& env, double v_step = 1e-3);

/// Trapezoidal integral of uniformly spaced samples (units of y * s).
double trapezoid(std::span<const double> y, double dt);

/// Sum of |y_k - target|.
double abs_deviation_sum(std::span<const double> y, double target);

std::vector<SimResult> run_batch(std::span<const Scenario> scenarios, RunMode mode = RunMode::Dpi);

} // namespace serial

namespace omp {

MppPoint mpp_scan(const PanelParams& panel, const EnvSample& env, double v_step = 1e-3);
double trapezoid(std::span<const double> y, double dt);
double abs_deviation_sum(std::span<const double> y, double target);
std::vector<SimResult> run_batch(std::span<const Scenario> scenarios, RunMode mode = RunMode::Dpi);

} // namespace omp

} // namespace dpi::kernels
