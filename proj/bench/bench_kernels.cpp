#include "dpi/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace dpi;

namespace {

std::vector<double> noise(std::size_t n)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 20);
    std::vector<double> y(n);
    for (double& v : y) v = u(rng);
    return y;
}

std::vector<Scenario> batch(std::size_t n)
{
    std::vector<Scenario> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k].duration_s = 60;
        out[k].base_irradiance.points = {{0, 150}, {30, 80 + 2.0 * k}, {60, 140}};
        out[k].seed = k;
        out[k].noise_sigma = 5;
    }
    return out;
}

template <auto Fn>
void mpp_scan(benchmark::State& state)
{
    PanelParams p;
    const EnvSample env{0, 800, 30};
    for (auto _ : state) benchmark::DoNotOptimize(Fn(p, env, 1e-3));
}

template <auto Fn>
void trapezoid(benchmark::State& state)
{
    const auto y = noise(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(y, 0.1));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void abs_deviation(benchmark::State& state)
{
    const auto y = noise(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(y, 13.0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void run_batch(benchmark::State& state)
{
    const auto scenarios = batch(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(scenarios, RunMode::Dpi));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(mpp_scan<kernels::serial::mpp_scan>)->Name("mpp_scan/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(mpp_scan<kernels::omp::mpp_scan>)->Name("mpp_scan/omp")->Unit(benchmark::kMillisecond);

BENCHMARK(trapezoid<kernels::serial::trapezoid>)->Name("trapezoid/serial")->Range(1 << 12, 1 << 22);
BENCHMARK(trapezoid<kernels::omp::trapezoid>)->Name("trapezoid/omp")->Range(1 << 12, 1 << 22);

BENCHMARK(abs_deviation<kernels::serial::abs_deviation_sum>)->Name("abs_deviation_sum/serial")->Range(1 << 12, 1 << 22);
BENCHMARK(abs_deviation<kernels::omp::abs_deviation_sum>)->Name("abs_deviation_sum/omp")->Range(1 << 12, 1 << 22);

BENCHMARK(run_batch<kernels::serial::run_batch>)->Name("run_batch/serial")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(run_batch<kernels::omp::run_batch>)->Name("run_batch/omp")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
