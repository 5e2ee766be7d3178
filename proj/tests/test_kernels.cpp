#include "dpi/kernels.hpp"

#include <doctest.h>
#include <omp.h>

#include <random>

using namespace dpi;
namespace ks = dpi::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5, 30);
    std::vector<double> y(n);
    for (double& v : y) v = u(rng);
    return y;
}

struct ThreadCount {
    explicit ThreadCount(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
    ~ThreadCount() { omp_set_num_threads(saved); }
    int saved;
};

} // namespace

TEST_CASE("reductions agree with the serial reference")
{
    for (std::size_t n : {0u, 1u, 2u, 100u, 4096u, 4097u, 50000u, 200001u}) {
        const auto y = noise(n, static_cast<unsigned>(n));
        const double s_trap = ks::serial::trapezoid(y, 0.1);
        const double o_trap = ks::omp::trapezoid(y, 0.1);
        const double s_abs = ks::serial::abs_deviation_sum(y, 13.0);
        const double o_abs = ks::omp::abs_deviation_sum(y, 13.0);
        if (n <= ks::kReductionBlock) {
            CHECK(o_trap == s_trap);
            CHECK(o_abs == s_abs);
        } else {
            CHECK(o_trap == doctest::Approx(s_trap).epsilon(1e-12));
            CHECK(o_abs == doctest::Approx(s_abs).epsilon(1e-12));
        }
    }
}

TEST_CASE("reductions do not depend on the thread count")
{
    const auto y = noise(300000, 77);
    double trap1, abs1;
    {
        ThreadCount one(1);
        trap1 = ks::omp::trapezoid(y, 0.1);
        abs1 = ks::omp::abs_deviation_sum(y, 13.0);
    }
    for (int threads : {2, 3, 4, 8}) {
        ThreadCount tc(threads);
        CHECK(ks::omp::trapezoid(y, 0.1) == trap1);
        CHECK(ks::omp::abs_deviation_sum(y, 13.0) == abs1);
    }
}

TEST_CASE("maximum power scans agree")
{
    PanelParams p;
    p.k_cell = 0;
    const EnvSample env{0, 1000, 25};
    const auto s = ks::serial::mpp_scan(p, env);
    CHECK(s.v == doctest::Approx(17.499).epsilon(1e-6));
    CHECK(s.p == doctest::Approx(98.6622048288).epsilon(1e-9));
    for (int threads : {1, 2, 4}) {
        ThreadCount tc(threads);
        const auto o = ks::omp::mpp_scan(p, env);
        CHECK(o.v == s.v);
        CHECK(o.p == s.p);
    }
}

TEST_CASE("batch runs match the serial batch bit for bit")
{
    std::vector<Scenario> batch;
    for (int k = 0; k < 12; ++k) {
        Scenario s;
        s.duration_s = 20;
        s.base_irradiance.points = {{0, 100.0 + 5 * k}, {20, 160.0 - 3 * k}};
        s.noise_sigma = 10;
        s.seed = static_cast<std::uint64_t>(k);
        if (k % 3 == 0) s.engine.pv_model = PvModelKind::Diode;
        batch.push_back(s);
    }
    const auto serial = ks::serial::run_batch(batch);
    ThreadCount tc(4);
    const auto parallel = ks::omp::run_batch(batch);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].samples.size() == parallel[i].samples.size());
        CHECK(serial[i].scenario_digest == parallel[i].scenario_digest);
        for (std::size_t j = 0; j < serial[i].samples.size(); ++j) {
            CHECK(serial[i].samples[j].p_load == parallel[i].samples[j].p_load);
            CHECK(serial[i].samples[j].soc == parallel[i].samples[j].soc);
        }
    }
}

TEST_CASE("batch surfaces a failing scenario")
{
    std::vector<Scenario> batch(3);
    batch[1].dt_s = -1;
    CHECK_THROWS(ks::omp::run_batch(batch));
    CHECK_THROWS(ks::serial::run_batch(batch));
}
