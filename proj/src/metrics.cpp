#include "dcdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcdm {

namespace {

void check_binary_labels(const std::vector<int>& truth) {
    for (int t : truth)
        if (t != 0 && t != 1) throw std::invalid_argument("labels must be 0 (ID) or 1 (OOD)");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) throw std::invalid_argument("auroc: length mismatch");
    if (scores.empty()) throw std::invalid_argument("auroc: empty input");
    check_binary_labels(truth);
    const std::size_t n = scores.size();
    std::size_t n_ood = 0;
    for (int t : truth) n_ood += static_cast<std::size_t>(t);
    const std::size_t n_id = n - n_ood;
    if (n_ood == 0 || n_id == 0) throw std::invalid_argument("auroc: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks, 1-based
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum_id = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (truth[k] == 0) rank_sum_id += rank[k];
    const double u = rank_sum_id - static_cast<double>(n_id) * (static_cast<double>(n_id) + 1.0) / 2.0;
    return u / (static_cast<double>(n_id) * static_cast<double>(n_ood));
}

ConfusionMetrics confusion_metrics(const std::vector<int>& y_pred, const std::vector<int>& truth) {
    if (y_pred.size() != truth.size()) throw std::invalid_argument("confusion_metrics: length mismatch");
    if (y_pred.empty()) throw std::invalid_argument("confusion_metrics: empty input");
    check_binary_labels(y_pred);
    check_binary_labels(truth);
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < y_pred.size(); ++i) {
        if (truth[i] == 1)
            (y_pred[i] == 1 ? tp : fn)++;
        else
            (y_pred[i] == 1 ? fp : tn)++;
    }
    ConfusionMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(y_pred.size());
    if (tp + fp == 0) {
        m.precision = 0;
        m.precision_degenerate = true;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall = 0;
        m.recall_degenerate = true;
    } else {
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (m.precision + m.recall == 0) {
        m.f1 = 0;
        m.f1_degenerate = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

Threshold select_threshold(const std::vector<double>& val_scores, const std::vector<int>& val_truth) {
    if (val_scores.size() != val_truth.size()) throw std::invalid_argument("select_threshold: length mismatch");
    check_binary_labels(val_truth);
    bool has_id = false, has_ood = false;
    for (int t : val_truth) (t == 1 ? has_ood : has_id) = true;
    if (!has_id || !has_ood) throw std::invalid_argument("select_threshold: both classes must be present");

    std::vector<double> sorted = val_scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back((sorted[i] + sorted[i + 1]) / 2.0);
    // the all-OOD decision: score > max never holds under the strict rule
    candidates.push_back(sorted.back());

    double best_f1 = -1.0;
    double best_tau = candidates.front();
    for (double tau : candidates) {
        std::vector<int> pred(val_scores.size());
        for (std::size_t i = 0; i < val_scores.size(); ++i) pred[i] = val_scores[i] > tau ? 0 : 1;
        const double f1 = confusion_metrics(pred, val_truth).f1;
        if (f1 >= best_f1) {  // >= keeps the higher tau on ties
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return Threshold{best_tau};
}

namespace {

// summed-area table with a leading zero row/column
struct Integral {
    int h, w;
    std::vector<double> s;
    Integral(const Tensor& img, int channel, bool square, const Tensor* other = nullptr)
        : h(img.dim(0)), w(img.dim(1)), s(static_cast<std::size_t>((h + 1) * (w + 1)), 0.0) {
        const int c = img.dim(2);
        for (int y = 0; y < h; ++y) {
            double row = 0;
            for (int x = 0; x < w; ++x) {
                double v = (img[(static_cast<std::int64_t>(y) * w + x) * c + channel] + 1.0) / 2.0;
                if (other) {
                    double u = ((*other)[(static_cast<std::int64_t>(y) * w + x) * c + channel] + 1.0) / 2.0;
                    v *= u;
                } else if (square) {
                    v *= v;
                }
                row += v;
                s[static_cast<std::size_t>((y + 1) * (w + 1) + (x + 1))] = s[static_cast<std::size_t>(y * (w + 1) + (x + 1))] + row;
            }
        }
    }
    double window(int y, int x, int k) const {
        return s[static_cast<std::size_t>((y + k) * (w + 1) + (x + k))] - s[static_cast<std::size_t>(y * (w + 1) + (x + k))] -
               s[static_cast<std::size_t>((y + k) * (w + 1) + x)] + s[static_cast<std::size_t>(y * (w + 1) + x)];
    }
};

}  // namespace

double ssim(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    if (x.rank() != 3) throw std::invalid_argument("ssim: expects [H,W,C]");
    constexpr int kWin = 7;
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h < kWin || w < kWin) throw std::invalid_argument("ssim: image smaller than 7x7 window");
    constexpr double kC1 = 0.01 * 0.01;  // (k1 * L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    const double n = static_cast<double>(kWin) * kWin;

    double total = 0;
    std::int64_t count = 0;
    for (int ch = 0; ch < c; ++ch) {
        Integral sx(x, ch, false);
        Integral sy(y, ch, false);
        Integral sxx(x, ch, true);
        Integral syy(y, ch, true);
        Integral sxy(x, ch, false, &y);
        for (int oy = 0; oy + kWin <= h; ++oy) {
            for (int ox = 0; ox + kWin <= w; ++ox) {
                const double mx = sx.window(oy, ox, kWin) / n;
                const double my = sy.window(oy, ox, kWin) / n;
                const double vx = sxx.window(oy, ox, kWin) / n - mx * mx;
                const double vy = syy.window(oy, ox, kWin) / n - my * my;
                const double cov = sxy.window(oy, ox, kWin) / n - mx * my;
                const double val = ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                                   ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                total += val;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace dcdm
