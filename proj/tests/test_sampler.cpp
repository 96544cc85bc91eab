#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dcdm/noise_schedule.hpp"
#include "dcdm/rng.hpp"
#include "dcdm/sampler.hpp"

using namespace dcdm;

TEST_CASE("ddim exact-noise inversion recovers z0") {
    auto s = build_schedule(100, 0.005, 0.1);
    Rng rng(5);
    Tensor z0 = rng.normal_tensor({2, 2, 4});
    Tensor eps = rng.normal_tensor({2, 2, 4});
    const int t = 73;
    Tensor zt = forward_diffuse(s, z0, t, eps);
    // t_prev = 0 returns zhat0 directly; with the true noise that is z0
    Tensor rec = ddim_step(s, zt, eps, t, 0);
    for (std::int64_t i = 0; i < z0.size(); ++i) {
        const double rel = std::abs(rec[i] - z0[i]) / std::max(1.0, std::abs(z0[i]));
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("ddim intermediate step with exact noise lands on the marginal") {
    auto s = build_schedule(100, 0.005, 0.1);
    Rng rng(6);
    Tensor z0 = rng.normal_tensor({3, 1, 2});
    Tensor eps = rng.normal_tensor({3, 1, 2});
    const int t = 80, t_prev = 40;
    Tensor zt = forward_diffuse(s, z0, t, eps);
    Tensor zp = ddim_step(s, zt, eps, t, t_prev);
    Tensor want = forward_diffuse(s, z0, t_prev, eps);
    for (std::int64_t i = 0; i < zp.size(); ++i) CHECK(zp[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("ddim scalar hand-arithmetic oracle") {
    // abar_t = 0.25 at t=2, abar_prev = 0.81 at t=1 -> betas {0.19, 25/81... }
    // build a schedule that hits these exactly: beta_1 = 0.19, beta_2 such
    // that 0.81 * (1-beta_2) = 0.25
    const double beta2 = 1.0 - 0.25 / 0.81;
    NoiseSchedule s(2, {0.19, beta2});
    CHECK(s.alpha_bar(1) == doctest::Approx(0.81).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-15));
    Tensor zt({1}, {1.0});
    Tensor eps({1}, {0.5});
    Tensor out = ddim_step(s, zt, eps, 2, 1);
    // zhat0 = (1 - sqrt(0.75)*0.5)/0.5 ; z_prev = 0.9*zhat0 + sqrt(0.19)*0.5
    const double zhat0 = (1.0 - std::sqrt(0.75) * 0.5) / std::sqrt(0.25);
    const double want = std::sqrt(0.81) * zhat0 + std::sqrt(1.0 - 0.81) * 0.5;
    CHECK(zhat0 == doctest::Approx(1.1339746).epsilon(1e-6));
    CHECK(std::abs(out[0] - want) <= 1e-9);
    CHECK(want == doctest::Approx(1.2385221).epsilon(1e-6));
}

TEST_CASE("ddim rejects bad timesteps") {
    auto s = build_schedule(10, 0.05, 0.2);
    Tensor z = Tensor::zeros({2});
    CHECK_THROWS_AS(ddim_step(s, z, z, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step(s, z, z, 3, 5), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step(s, z, z, 11, 5), std::out_of_range);
    CHECK_THROWS_AS(ddim_step(s, z, z, 2, -1), std::invalid_argument);
}

TEST_CASE("ddpm scalar hand-arithmetic oracle") {
    auto s = build_schedule(1, 0.1, 0.1);
    Tensor z1({1}, {1.0});
    Tensor eps({1}, {0.2});
    Tensor zero({1}, {0.0});
    Tensor out = ddpm_step(s, z1, eps, 1, zero);
    const double want = (1.0 / std::sqrt(0.9)) * (1.0 - (0.1 / std::sqrt(0.1)) * 0.2);
    CHECK(std::abs(out[0] - want) <= 1e-9);
    CHECK(want == doctest::Approx(0.9874262).epsilon(1e-6));
}

TEST_CASE("ddpm zero noise-prediction reduction") {
    auto s = build_schedule(20, 0.01, 0.2);
    Rng rng(8);
    Tensor zt = rng.normal_tensor({2, 3});
    Tensor zeros = Tensor::zeros({2, 3});
    Tensor out = ddpm_step(s, zt, zeros, 7, zeros);
    for (std::int64_t i = 0; i < zt.size(); ++i)
        CHECK(out[i] == doctest::Approx(zt[i] / std::sqrt(s.alpha(7))).epsilon(1e-12));
}

TEST_CASE("ddpm sigma_1 is zero") {
    auto s = build_schedule(20, 0.01, 0.2);
    Rng rng(9);
    Tensor z1 = rng.normal_tensor({4});
    Tensor eps = rng.normal_tensor({4});
    Tensor big_noise = Tensor::full({4}, 1000.0);
    Tensor zero = Tensor::zeros({4});
    Tensor with_noise = ddpm_step(s, z1, eps, 1, big_noise);
    Tensor without = ddpm_step(s, z1, eps, 1, zero);
    for (std::int64_t i = 0; i < z1.size(); ++i) CHECK(with_noise[i] == without[i]);
}

TEST_CASE("ddpm posterior variance matches beta_tilde") {
    auto s = build_schedule(50, 0.02, 0.3);
    const int t = 30;
    Tensor zt = Tensor::zeros({1});
    Tensor eps = Tensor::zeros({1});
    Tensor one = Tensor::full({1}, 1.0);
    const double sigma = ddpm_step(s, zt, eps, t, one)[0];
    const double beta_tilde = (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t);
    CHECK(sigma == doctest::Approx(std::sqrt(beta_tilde)).epsilon(1e-12));
}

TEST_CASE("ddpm rejects out-of-range timesteps") {
    auto s = build_schedule(10, 0.05, 0.2);
    Tensor z = Tensor::zeros({2});
    CHECK_THROWS_AS(ddpm_step(s, z, z, 0, z), std::out_of_range);
    CHECK_THROWS_AS(ddpm_step(s, z, z, 11, z), std::out_of_range);
}

TEST_CASE("timestep ladder hits paper configuration") {
    auto ladder = ddim_timesteps(1000, 100);
    REQUIRE(ladder.size() == 100);
    CHECK(ladder.front() == 1000);
    CHECK(ladder.back() == 10);
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) CHECK(ladder[i] - ladder[i + 1] == 10);
}

TEST_CASE("timestep ladder general properties") {
    for (int T : {7, 10, 50, 999}) {
        for (int steps : {1, 3, 7}) {
            if (steps > T) continue;
            auto ladder = ddim_timesteps(T, steps);
            REQUIRE(static_cast<int>(ladder.size()) == steps);
            CHECK(ladder.front() == T);
            CHECK(ladder.back() >= 1);
            for (std::size_t i = 0; i + 1 < ladder.size(); ++i) CHECK(ladder[i] > ladder[i + 1]);
        }
    }
    CHECK_THROWS_AS(ddim_timesteps(10, 11), std::invalid_argument);
    CHECK_THROWS_AS(ddim_timesteps(10, 0), std::invalid_argument);
}
