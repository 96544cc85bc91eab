#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dcdm/noise_schedule.hpp"
#include "dcdm/rng.hpp"

using namespace dcdm;

TEST_CASE("paper schedule endpoints") {
    auto s = build_schedule(1000, 0.0015, 0.0195);
    CHECK(s.beta(1) == doctest::Approx(0.0015).epsilon(1e-12));
    CHECK(s.beta(1000) == 0.0195);
    // signal nearly destroyed at t = T
    CHECK(s.alpha_bar(1000) < 0.01);
}

TEST_CASE("single step schedule") {
    auto s = build_schedule(1, 0.1, 0.1);
    CHECK(s.beta(1) == 0.1);
    CHECK(s.alpha(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("three step alpha_bar product oracle") {
    auto s = build_schedule(3, 0.1, 0.3);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-12));
    CHECK(s.alpha_bar(3) == doctest::Approx(0.504).epsilon(1e-12));
}

TEST_CASE("schedule invariants") {
    auto s = build_schedule(1000, 0.0015, 0.0195);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) < 1.0);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        // recurrence: abar_t = abar_{t-1} * alpha_t (abar_0 = 1)
        CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-14));
    }
}

TEST_CASE("incremental alpha_bar equals direct product to 1e-10 relative") {
    auto s = build_schedule(1000, 0.0015, 0.0195);
    for (int t : {1, 10, 100, 500, 1000}) {
        long double direct = 1.0L;
        for (int i = 1; i <= t; ++i) direct *= static_cast<long double>(1.0 - s.beta(i));
        const double rel = std::abs(static_cast<double>((static_cast<long double>(s.alpha_bar(t)) - direct) / direct));
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("build_schedule input validation") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(-5, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, -0.1, 0.2), std::invalid_argument);
}

TEST_CASE("forward_diffuse zero noise collapses to the mean") {
    auto s = build_schedule(10, 0.05, 0.2);
    Rng rng(3);
    Tensor z0 = rng.normal_tensor({2, 2, 3});
    Tensor zero = Tensor::zeros({2, 2, 3});
    for (int t : {1, 5, 10}) {
        Tensor zt = forward_diffuse(s, z0, t, zero);
        const double k = std::sqrt(s.alpha_bar(t));
        for (std::int64_t i = 0; i < z0.size(); ++i) CHECK(zt[i] == doctest::Approx(k * z0[i]).epsilon(1e-14));
    }
}

TEST_CASE("forward_diffuse scalar arithmetic oracle") {
    auto s = build_schedule(1, 0.1, 0.1);
    Tensor z0({1}, {1.0});
    Tensor noise({1}, {1.0});
    Tensor zt = forward_diffuse(s, z0, 1, noise);
    CHECK(zt[0] == doctest::Approx(std::sqrt(0.9) + std::sqrt(0.1)).epsilon(1e-12));
}

TEST_CASE("forward_diffuse is linear in z0 and noise") {
    auto s = build_schedule(50, 0.01, 0.2);
    Rng rng(11);
    Tensor z0 = rng.normal_tensor({3, 3, 1});
    Tensor n = rng.normal_tensor({3, 3, 1});
    const real a = 2.75;
    Tensor z0s = z0, ns = n;
    for (std::int64_t i = 0; i < z0.size(); ++i) {
        z0s[i] *= a;
        ns[i] *= a;
    }
    Tensor lhs = forward_diffuse(s, z0s, 17, ns);
    Tensor rhs = forward_diffuse(s, z0, 17, n);
    for (std::int64_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == doctest::Approx(a * rhs[i]).epsilon(1e-12));
}

TEST_CASE("forward_diffuse monte carlo marginal") {
    auto s = build_schedule(100, 0.01, 0.1);
    const int t = 60;
    const double ab = s.alpha_bar(t);
    const double z0v = 0.8;
    Tensor z0({1}, {z0v});
    Rng rng(1234);
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        Tensor noise({1}, {rng.normal()});
        const double v = forward_diffuse(s, z0, t, noise)[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double expect_mean = std::sqrt(ab) * z0v;
    const double expect_var = 1.0 - ab;
    const double se_mean = std::sqrt(expect_var / n);
    const double se_var = expect_var * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(mean - expect_mean) < 3 * se_mean);
    CHECK(std::abs(var - expect_var) < 3 * se_var);
}

TEST_CASE("forward_diffuse rejects bad input") {
    auto s = build_schedule(10, 0.05, 0.2);
    Tensor z0 = Tensor::zeros({2, 2, 1});
    Tensor noise = Tensor::zeros({2, 2, 1});
    CHECK_THROWS_AS(forward_diffuse(s, z0, 0, noise), std::out_of_range);
    CHECK_THROWS_AS(forward_diffuse(s, z0, 11, noise), std::out_of_range);
    Tensor bad = Tensor::zeros({2, 1, 1});
    CHECK_THROWS_AS(forward_diffuse(s, z0, 3, bad), std::invalid_argument);
}
