#include "dcdm/noise_schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcdm {

NoiseSchedule::NoiseSchedule(int T, std::vector<double> betas) : T_(T), betas_(std::move(betas)) {
    if (T_ < 1) throw std::invalid_argument("noise schedule: T must be >= 1");
    if (static_cast<int>(betas_.size()) != T_) throw std::invalid_argument("noise schedule: betas size != T");
    alphas_.resize(betas_.size());
    alpha_bars_.resize(betas_.size());
    double prod = 1.0;
    for (int i = 0; i < T_; ++i) {
        const double b = betas_[static_cast<std::size_t>(i)];
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("noise schedule: beta_" + std::to_string(i + 1) + " outside (0,1)");
        alphas_[static_cast<std::size_t>(i)] = 1.0 - b;
        prod *= alphas_[static_cast<std::size_t>(i)];
        alpha_bars_[static_cast<std::size_t>(i)] = prod;
    }
}

void NoiseSchedule::check_t(int t, int lo) const {
    if (t < lo || t > T_)
        throw std::out_of_range("timestep " + std::to_string(t) + " outside {" + std::to_string(lo) + ".." + std::to_string(T_) + "}");
}

double NoiseSchedule::beta(int t) const {
    check_t(t, 1);
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const {
    check_t(t, 1);
    return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_t(t, 0);
    if (t == 0) return 1.0;
    return alpha_bars_[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be positive");
    if (!(beta_start > 0.0 && beta_end < 1.0)) throw std::invalid_argument("build_schedule: beta bounds must lie in (0,1)");
    if (beta_start > beta_end) throw std::invalid_argument("build_schedule: beta_start must not exceed beta_end");
    if (T == 1 && beta_start != beta_end)
        throw std::invalid_argument("build_schedule: T=1 requires beta_start == beta_end");
    std::vector<double> betas(static_cast<std::size_t>(T));
    if (T == 1) {
        betas[0] = beta_start;
    } else {
        const double step = (beta_end - beta_start) / static_cast<double>(T - 1);
        for (int i = 0; i < T; ++i) betas[static_cast<std::size_t>(i)] = beta_start + step * static_cast<double>(i);
        betas[static_cast<std::size_t>(T - 1)] = beta_end;  // exact endpoint
    }
    return NoiseSchedule(T, std::move(betas));
}

Tensor forward_diffuse(const NoiseSchedule& schedule, const Tensor& z0, int t, const Tensor& noise) {
    if (t < 1 || t > schedule.T())
        throw std::out_of_range("forward_diffuse: timestep " + std::to_string(t) + " outside {1.." + std::to_string(schedule.T()) + "}");
    if (!z0.same_shape(noise))
        throw std::invalid_argument("forward_diffuse: z0 " + z0.shape_str() + " and noise " + noise.shape_str() + " differ");
    const double ab = schedule.alpha_bar(t);
    const real signal = static_cast<real>(std::sqrt(ab));
    const real sigma = static_cast<real>(std::sqrt(1.0 - ab));
    Tensor zt(z0.shape());
    for (std::int64_t i = 0; i < z0.size(); ++i) zt[i] = signal * z0[i] + sigma * noise[i];
    return zt;
}

}  // namespace dcdm
