#pragma once

#include <vector>

#include "dcdm/noise_schedule.hpp"
#include "dcdm/tensor.hpp"

namespace dcdm {

/// Deterministic DDIM update (eta = 0): recover zhat0 from the noise
/// prediction, then re-noise to t_prev. t_prev = 0 returns zhat0 itself.
Tensor ddim_step(const NoiseSchedule& schedule, const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev);

/// Ancestral DDPM update with the standard posterior variance
/// beta_tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t. sigma_1 = 0.
Tensor ddpm_step(const NoiseSchedule& schedule, const Tensor& z_t, const Tensor& eps_hat, int t, const Tensor& noise);

/// Descending uniformly spaced timestep ladder of `steps` entries drawn from
/// {1..T}, starting at T; the implicit final target after the last entry is 0.
std::vector<int> ddim_timesteps(int T, int steps);

}  // namespace dcdm
