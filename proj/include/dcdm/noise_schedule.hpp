#pragma once

#include <vector>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Fixed variance schedule for the forward diffusion process. Timesteps are
/// 1-indexed at the API (t in {1..T}); storage is 0-indexed internally.
/// Schedule scalars are computed and held in 64-bit.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    NoiseSchedule(int T, std::vector<double> betas);

    int T() const { return T_; }
    double beta(int t) const;        // t in {1..T}
    double alpha(int t) const;       // 1 - beta_t
    double alpha_bar(int t) const;   // prod_{i<=t} alpha_i, with alpha_bar(0) = 1

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

private:
    void check_t(int t, int lo) const;

    int T_ = 0;
    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
};

/// Linear beta schedule: betas[0]=beta_start, betas[T-1]=beta_end.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

/// Closed-form forward marginal: z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) noise.
Tensor forward_diffuse(const NoiseSchedule& schedule, const Tensor& z0, int t, const Tensor& noise);

}  // namespace dcdm
