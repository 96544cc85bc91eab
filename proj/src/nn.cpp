#include "dcdm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dcdm {

std::int64_t param_count(const ParamList& params) {
    std::int64_t n = 0;
    for (const auto& [name, t] : params) n += t->size();
    return n;
}

std::uint64_t param_hash(const ParamList& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : params) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(t->data(), static_cast<std::size_t>(t->size()) * sizeof(real), h);
    }
    return h;
}

Var Binder::operator()(Tensor& t) {
    if (!train_) return tape_.value(t);
    Var v = tape_.param(t);
    bound_.emplace_back(&t, v);
    return v;
}

std::vector<std::pair<Tensor*, Tensor>> Binder::grads() const {
    std::vector<std::pair<Tensor*, Tensor>> out;
    std::unordered_map<Tensor*, std::size_t> index;
    for (const auto& [ptr, var] : bound_) {
        Tensor g;
        try {
            g = tape_.grad(var);
        } catch (const std::runtime_error&) {
            g = Tensor::zeros(ptr->shape());  // parameter unused by the loss
        }
        auto it = index.find(ptr);
        if (it == index.end()) {
            index.emplace(ptr, out.size());
            out.emplace_back(ptr, std::move(g));
        } else {
            Tensor& acc = out[it->second].second;
            for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
    }
    return out;
}

void init_normal_scaled(Tensor& t, real std_dev, Rng& rng) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * std_dev;
}

void init_kaiming(Tensor& t, int fan_in, Rng& rng) {
    init_normal_scaled(t, std::sqrt(2.0 / static_cast<real>(fan_in)), rng);
}

void LinearLayer::init(int d_in, int d_out, Rng& rng) {
    din = d_in;
    dout = d_out;
    w = Tensor({din, dout});
    b = Tensor::zeros({dout});
    init_kaiming(w, din, rng);
}

void LinearLayer::collect(ParamList& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
}

Var LinearLayer::apply(Tape& tape, Binder& bind, Var x) const {
    auto* self = const_cast<LinearLayer*>(this);
    return tape.linear(x, bind(self->w), bind(self->b));
}

void Conv2dLayer::init(int c_in, int c_out, int kernel, int stride_, int pad_, Rng& rng) {
    cin = c_in;
    cout = c_out;
    kh = kw = kernel;
    stride = stride_;
    pad = pad_;
    w = Tensor({kh * kw * cin, cout});
    b = Tensor::zeros({cout});
    init_kaiming(w, kh * kw * cin, rng);
}

void Conv2dLayer::collect(ParamList& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
}

Var Conv2dLayer::apply(Tape& tape, Binder& bind, Var x) const {
    auto* self = const_cast<Conv2dLayer*>(this);
    return tape.conv2d(x, bind(self->w), bind(self->b), kh, kw, stride, pad);
}

void GroupNormLayer::init(int channels_, int groups_) {
    channels = channels_;
    groups = groups_;
    gamma = Tensor::full({channels}, 1.0);
    beta = Tensor::zeros({channels});
}

void GroupNormLayer::collect(ParamList& out, const std::string& prefix) {
    out.emplace_back(prefix + ".gamma", &gamma);
    out.emplace_back(prefix + ".beta", &beta);
}

Var GroupNormLayer::apply(Tape& tape, Binder& bind, Var x) const {
    auto* self = const_cast<GroupNormLayer*>(this);
    return tape.group_norm(x, bind(self->gamma), bind(self->beta), groups);
}

void Adam::step(const std::vector<std::pair<Tensor*, Tensor>>& param_grads) {
    ++t_;
    const real bc1 = 1.0 - std::pow(beta1_, static_cast<real>(t_));
    const real bc2 = 1.0 - std::pow(beta2_, static_cast<real>(t_));
    for (const auto& [p, g] : param_grads) {
        if (!p->same_shape(g)) throw std::invalid_argument("adam: grad shape mismatch");
        State& s = state_[p];
        if (s.m.empty()) {
            s.m = Tensor::zeros(p->shape());
            s.v = Tensor::zeros(p->shape());
        }
        for (std::int64_t i = 0; i < p->size(); ++i) {
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
            const real mhat = s.m[i] / bc1;
            const real vhat = s.v[i] / bc2;
            (*p)[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace dcdm
