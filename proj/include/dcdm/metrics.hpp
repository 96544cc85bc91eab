#pragma once

#include <vector>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Decision threshold on the cosine OOD score, tau in [-1, 1].
struct Threshold {
    double tau = 0.0;
};

/// Probability that a random OOD sample scores lower than a random ID sample
/// (ties 1/2). Score orientation: high = ID-like; OOD (truth=1) is the
/// positive class. Throws if only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& truth);

struct ConfusionMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    // set when the corresponding denominator was zero and the value was
    // defined to 0
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

/// OOD (1) is the positive class.
ConfusionMetrics confusion_metrics(const std::vector<int>& y_pred, const std::vector<int>& truth);

/// F1-maximizing threshold over the midpoints of adjacent distinct sorted
/// scores plus the maximum score (the all-OOD decision). Ties resolve toward
/// higher tau. Requires both classes in the validation data.
Threshold select_threshold(const std::vector<double>& val_scores, const std::vector<int>& val_truth);

/// Mean local SSIM over all fully-contained 7x7 uniform windows.
/// Inputs are [H,W,C] in [-1,1]; rescaled to [0,1] internally.
/// k1=0.01, k2=0.03, dynamic range 1.
double ssim(const Tensor& x, const Tensor& y);

}  // namespace dcdm
