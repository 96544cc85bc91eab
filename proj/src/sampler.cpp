#include "dcdm/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcdm {

Tensor ddim_step(const NoiseSchedule& schedule, const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev) {
    if (t_prev < 0 || t <= t_prev) throw std::invalid_argument("ddim_step: require t > t_prev >= 0");
    if (t > schedule.T()) throw std::out_of_range("ddim_step: t exceeds schedule T");
    if (!z_t.same_shape(eps_hat)) throw std::invalid_argument("ddim_step: z_t and eps_hat shapes differ");

    const double ab_t = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t_prev);
    const real inv_sqrt_ab = static_cast<real>(1.0 / std::sqrt(ab_t));
    const real sig_t = static_cast<real>(std::sqrt(1.0 - ab_t));
    const real sqrt_ab_prev = static_cast<real>(std::sqrt(ab_prev));
    const real sig_prev = static_cast<real>(std::sqrt(1.0 - ab_prev));

    Tensor out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.size(); ++i) {
        const real zhat0 = (z_t[i] - sig_t * eps_hat[i]) * inv_sqrt_ab;
        out[i] = sqrt_ab_prev * zhat0 + sig_prev * eps_hat[i];
    }
    return out;
}

Tensor ddpm_step(const NoiseSchedule& schedule, const Tensor& z_t, const Tensor& eps_hat, int t, const Tensor& noise) {
    if (t < 1 || t > schedule.T()) throw std::out_of_range("ddpm_step: timestep out of range");
    if (!z_t.same_shape(eps_hat) || !z_t.same_shape(noise))
        throw std::invalid_argument("ddpm_step: shape mismatch among z_t, eps_hat, noise");

    const double alpha_t = schedule.alpha(t);
    const double ab_t = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    const real inv_sqrt_alpha = static_cast<real>(1.0 / std::sqrt(alpha_t));
    const real eps_coef = static_cast<real>((1.0 - alpha_t) / std::sqrt(1.0 - ab_t));
    const double beta_tilde = (1.0 - ab_prev) / (1.0 - ab_t) * schedule.beta(t);
    const real sigma = static_cast<real>(std::sqrt(beta_tilde));

    Tensor out(z_t.shape());
    for (std::int64_t i = 0; i < z_t.size(); ++i)
        out[i] = inv_sqrt_alpha * (z_t[i] - eps_coef * eps_hat[i]) + sigma * noise[i];
    return out;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1) throw std::invalid_argument("ddim_timesteps: steps must be >= 1");
    if (steps > T) throw std::invalid_argument("ddim_timesteps: steps " + std::to_string(steps) + " exceeds T " + std::to_string(T));
    std::vector<int> ladder(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        ladder[static_cast<std::size_t>(i)] =
            static_cast<int>(std::llround(static_cast<double>(T) * static_cast<double>(steps - i) / static_cast<double>(steps)));
    return ladder;
}

}  // namespace dcdm
