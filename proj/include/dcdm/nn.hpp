#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dcdm/autodiff.hpp"
#include "dcdm/rng.hpp"
#include "dcdm/tensor.hpp"

namespace dcdm {

/// Ordered (name, tensor) view over a model's parameters. Order is the
/// serialization and hashing order, so it must be construction-stable.
using ParamList = std::vector<std::pair<std::string, Tensor*>>;

std::int64_t param_count(const ParamList& params);
std::uint64_t param_hash(const ParamList& params);

/// Binds model tensors onto a tape, remembering the mapping so gradients can
/// be pulled back out after backward(). With train=false parameters are bound
/// as constants and no gradient is tracked.
class Binder {
public:
    Binder(Tape& tape, bool train) : tape_(tape), train_(train) {}

    Var operator()(Tensor& t);

    bool training() const { return train_; }

    /// Accumulated gradient per bound tensor (summed if bound repeatedly).
    std::vector<std::pair<Tensor*, Tensor>> grads() const;

private:
    Tape& tape_;
    bool train_;
    std::vector<std::pair<Tensor*, Var>> bound_;
};

struct LinearLayer {
    Tensor w, b;
    int din = 0, dout = 0;

    void init(int d_in, int d_out, Rng& rng);
    void collect(ParamList& out, const std::string& prefix);
    Var apply(Tape& tape, Binder& bind, Var x) const;
};

struct Conv2dLayer {
    Tensor w, b;
    int cin = 0, cout = 0, kh = 3, kw = 3, stride = 1, pad = 1;

    void init(int c_in, int c_out, int kernel, int stride_, int pad_, Rng& rng);
    void collect(ParamList& out, const std::string& prefix);
    Var apply(Tape& tape, Binder& bind, Var x) const;
};

struct GroupNormLayer {
    Tensor gamma, beta;
    int channels = 0, groups = 1;

    void init(int channels_, int groups_);
    void collect(ParamList& out, const std::string& prefix);
    Var apply(Tape& tape, Binder& bind, Var x) const;
};

/// Adam with bias correction; state keyed by parameter tensor identity.
class Adam {
public:
    explicit Adam(real lr, real beta1 = 0.9, real beta2 = 0.999, real eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<std::pair<Tensor*, Tensor>>& param_grads);

    real lr() const { return lr_; }
    std::int64_t steps_taken() const { return t_; }

private:
    struct State {
        Tensor m, v;
    };
    real lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::unordered_map<Tensor*, State> state_;
};

// weight initializers
void init_normal_scaled(Tensor& t, real std_dev, Rng& rng);
void init_kaiming(Tensor& t, int fan_in, Rng& rng);

}  // namespace dcdm
