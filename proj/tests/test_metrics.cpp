#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcdm/metrics.hpp"
#include "dcdm/rng.hpp"

using namespace dcdm;

namespace {

// O(n^2) pairwise oracle: P(ood scores lower than id), ties 1/2
double auroc_brute(const std::vector<double>& scores, const std::vector<int>& truth) {
    double num = 0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (truth[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (truth[j] != 0) continue;
            ++pairs;
            if (scores[i] < scores[j])
                num += 1.0;
            else if (scores[i] == scores[j])
                num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

double f1_at(const std::vector<double>& scores, const std::vector<int>& truth, double tau) {
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > tau ? 0 : 1;
    return confusion_metrics(pred, truth).f1;
}

// direct per-window SSIM, deliberately the naive double loop
double ssim_naive(const Tensor& x, const Tensor& y) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0;
    int count = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy + 7 <= h; ++oy) {
            for (int ox = 0; ox + 7 <= w; ++ox) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int dy = 0; dy < 7; ++dy)
                    for (int dx = 0; dx < 7; ++dx) {
                        const double a = (x[(static_cast<std::int64_t>(oy + dy) * w + ox + dx) * c + ch] + 1.0) / 2.0;
                        const double b = (y[(static_cast<std::int64_t>(oy + dy) * w + ox + dx) * c + ch] + 1.0) / 2.0;
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                    }
                const double n = 49.0;
                const double mx = sx / n, my = sy / n;
                const double vx = sxx / n - mx * mx, vy = syy / n - my * my;
                const double cov = sxy / n - mx * my;
                total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        }
    }
    return total / count;
}

}  // namespace

TEST_CASE("auroc textbook cases") {
    CHECK(auroc({0.9, 0.8, 0.1, 0.2}, {0, 0, 1, 1}) == 1.0);
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {0, 0, 1, 1}) == 0.5);
    CHECK(auroc({0.9, 0.4, 0.5, 0.1}, {0, 0, 1, 1}) == 0.75);
}

TEST_CASE("auroc equals pairwise brute force on 50 random datasets") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(199));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> truth(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            // quantized scores force plenty of ties
            scores[static_cast<std::size_t>(i)] = std::floor(rng.uniform(-1, 1) * 8) / 8.0;
            truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_index(2));
        }
        truth[0] = 0;
        truth[1] = 1;  // both classes present
        CHECK(auroc(scores, truth) == auroc_brute(scores, truth));
    }
}

TEST_CASE("auroc invariant under strictly increasing transforms") {
    Rng rng(77);
    std::vector<double> scores;
    std::vector<int> truth;
    for (int i = 0; i < 60; ++i) {
        scores.push_back(rng.uniform(-1, 1));
        truth.push_back(static_cast<int>(rng.uniform_index(2)));
    }
    truth[0] = 0;
    truth[1] = 1;
    std::vector<double> mapped(scores.size());
    std::transform(scores.begin(), scores.end(), mapped.begin(), [](double s) { return std::exp(3 * s) + 5; });
    CHECK(auroc(scores, truth) == doctest::Approx(auroc(mapped, truth)).epsilon(1e-12));
}

TEST_CASE("auroc orientation flip complements on tie-free data") {
    std::vector<double> scores{0.9, 0.7, 0.3, 0.6, 0.2, 0.8};
    std::vector<int> truth{0, 0, 1, 1, 1, 0};
    std::vector<double> neg(scores.size());
    std::transform(scores.begin(), scores.end(), neg.begin(), [](double s) { return -s; });
    CHECK(auroc(scores, truth) + auroc(neg, truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("auroc rejects degenerate input") {
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auroc({0.1}, {0, 1}), std::invalid_argument);
}

TEST_CASE("confusion metrics hand-computed table") {
    // TP=2 FP=1 FN=1 TN=4
    std::vector<int> truth{1, 1, 1, 0, 0, 0, 0, 0};
    std::vector<int> pred{1, 1, 0, 1, 0, 0, 0, 0};
    auto m = confusion_metrics(pred, truth);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.accuracy == 0.75);
    CHECK_FALSE(m.precision_degenerate);
}

TEST_CASE("confusion metrics perfect and degenerate cases") {
    auto perfect = confusion_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    // all-ID predictions with OOD present
    auto degen = confusion_metrics({0, 0, 0, 0}, {1, 1, 0, 0});
    CHECK(degen.precision == 0.0);
    CHECK(degen.precision_degenerate);
    CHECK(degen.recall == 0.0);
    CHECK_FALSE(degen.recall_degenerate);
    CHECK(degen.f1 == 0.0);
    CHECK(degen.f1_degenerate);
}

TEST_CASE("confusion f1 is harmonic mean of its own outputs") {
    Rng rng(31);
    std::vector<int> pred, truth;
    for (int i = 0; i < 100; ++i) {
        pred.push_back(static_cast<int>(rng.uniform_index(2)));
        truth.push_back(static_cast<int>(rng.uniform_index(2)));
    }
    auto m = confusion_metrics(pred, truth);
    if (m.precision + m.recall > 0)
        CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)).epsilon(1e-12));
}

TEST_CASE("select_threshold separates a clean gap") {
    std::vector<double> scores{0.9, 0.85, 0.8, 0.2, 0.15, 0.1};
    std::vector<int> truth{0, 0, 0, 1, 1, 1};
    auto tau = select_threshold(scores, truth);
    CHECK(f1_at(scores, truth, tau.tau) == 1.0);
    CHECK(tau.tau > 0.2);
    CHECK(tau.tau < 0.8);
}

TEST_CASE("select_threshold midpoint of two samples") {
    auto tau = select_threshold({0.9, 0.1}, {0, 1});
    CHECK(tau.tau == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("select_threshold matches 1e-4 brute force sweep on random data") {
    Rng rng(4040);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_index(60));
        std::vector<double> scores;
        std::vector<int> truth;
        for (int i = 0; i < n; ++i) {
            const int t = static_cast<int>(rng.uniform_index(2));
            truth.push_back(t);
            scores.push_back(rng.uniform(-1, 1) + (t == 0 ? 0.3 : -0.3));
        }
        truth[0] = 0;
        truth[1] = 1;
        auto sel = select_threshold(scores, truth);
        double best = -1;
        for (double tau = -1.0; tau <= 1.0 + 1e-12; tau += 1e-4) best = std::max(best, f1_at(scores, truth, tau));
        CHECK(f1_at(scores, truth, sel.tau) == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("select_threshold rejects single-class validation") {
    CHECK_THROWS_AS(select_threshold({0.1, 0.2}, {0, 0}), std::invalid_argument);
}

TEST_CASE("ssim self similarity is exactly 1") {
    Rng rng(5);
    Tensor x({16, 16, 1});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of distinct constants reduces to the luminance term") {
    Tensor x = Tensor::full({8, 8, 1}, -0.5);  // 0.25 after rescale
    Tensor y = Tensor::full({8, 8, 1}, 0.5);   // 0.75 after rescale
    const double a = 0.25, b = 0.75, c1 = 1e-4;
    const double want = (2 * a * b + c1) / (a * a + b * b + c1);
    CHECK(ssim(x, y) == doctest::Approx(want).epsilon(1e-12));
    CHECK(ssim(x, y) < 1.0);
}

TEST_CASE("ssim matches an independent direct implementation") {
    Rng rng(17);
    Tensor x({20, 14, 1}), y({20, 14, 1});
    for (std::int64_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(-1, 1);
        y[i] = std::clamp(x[i] + 0.3 * rng.normal(), -1.0, 1.0);
    }
    CHECK(ssim(x, y) == doctest::Approx(ssim_naive(x, y)).epsilon(1e-6));
}

TEST_CASE("ssim rejects mismatched or tiny shapes") {
    Tensor a({8, 8, 1}), b({8, 9, 1}), tiny({4, 4, 1});
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}
