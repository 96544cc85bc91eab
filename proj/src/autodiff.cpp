#include "dcdm/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>

namespace dcdm {

namespace {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

struct ConvDims {
    int n, h, w, c;       // input
    int kh, kw, stride, pad;
    int oh, ow, cout;
    std::int64_t rows() const { return static_cast<std::int64_t>(n) * oh * ow; }
    std::int64_t cols() const { return static_cast<std::int64_t>(kh) * kw * c; }
};

void im2col(const Tensor& x, const ConvDims& d, std::vector<real>& col) {
    col.assign(static_cast<std::size_t>(d.rows() * d.cols()), real(0));
    const real* xp = x.data();
    const std::int64_t xrow = static_cast<std::int64_t>(d.w) * d.c;
    const std::int64_t ximg = static_cast<std::int64_t>(d.h) * xrow;
    std::int64_t r = 0;
    for (int n = 0; n < d.n; ++n) {
        for (int oy = 0; oy < d.oh; ++oy) {
            for (int ox = 0; ox < d.ow; ++ox, ++r) {
                real* dst = col.data() + r * d.cols();
                for (int ky = 0; ky < d.kh; ++ky) {
                    const int iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) { dst += d.kw * d.c; continue; }
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const int ix = ox * d.stride + kx - d.pad;
                        if (ix < 0 || ix >= d.w) { dst += d.c; continue; }
                        const real* src = xp + n * ximg + iy * xrow + ix * d.c;
                        for (int c = 0; c < d.c; ++c) *dst++ = src[c];
                    }
                }
            }
        }
    }
}

void col2im_add(const std::vector<real>& col, const ConvDims& d, Tensor& dx) {
    const std::int64_t xrow = static_cast<std::int64_t>(d.w) * d.c;
    const std::int64_t ximg = static_cast<std::int64_t>(d.h) * xrow;
    real* xp = dx.data();
    std::int64_t r = 0;
    for (int n = 0; n < d.n; ++n) {
        for (int oy = 0; oy < d.oh; ++oy) {
            for (int ox = 0; ox < d.ow; ++ox, ++r) {
                const real* src = col.data() + r * d.cols();
                for (int ky = 0; ky < d.kh; ++ky) {
                    const int iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) { src += d.kw * d.c; continue; }
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const int ix = ox * d.stride + kx - d.pad;
                        if (ix < 0 || ix >= d.w) { src += d.c; continue; }
                        real* dst = xp + n * ximg + iy * xrow + ix * d.c;
                        for (int c = 0; c < d.c; ++c) dst[c] += src[c];
                        src += d.c;
                    }
                }
            }
        }
    }
}

real sigmoid(real v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Var Tape::make(Tensor v, bool requires_grad, std::function<void()> backprop) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("invalid tape var");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("invalid tape var");
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::ensure_grad(Var v) {
    Node& n = node(v);
    if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor::zeros(n.value.shape());
}

Tensor& Tape::grad_ref(Var v) {
    ensure_grad(v);
    return node(v).grad;
}

Var Tape::value(Tensor v) { return make(std::move(v), false); }
Var Tape::param(Tensor v) { return make(std::move(v), true); }

const Tensor& Tape::val(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) throw std::runtime_error("gradient not populated; call backward first");
    return n.grad;
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = av;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    };
    return o;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = av;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    };
    return o;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out = av;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o]() {
        const Tensor& g = node(o).grad;
        const Tensor& av2 = val(a);
        const Tensor& bv2 = val(b);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
        }
    };
    return o;
}

Var Tape::scale(Var a, real c) {
    Tensor out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o, c]() {
        const Tensor& g = node(o).grad;
        Tensor& ga = grad_ref(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    };
    return o;
}

Var Tape::silu(Var a) {
    Tensor out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= sigmoid(out[i]);
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o]() {
        const Tensor& g = node(o).grad;
        const Tensor& x = val(a);
        Tensor& ga = grad_ref(a);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const real s = sigmoid(x[i]);
            ga[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
    };
    return o;
}

Var Tape::relu(Var a) {
    Tensor out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0;
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o]() {
        const Tensor& g = node(o).grad;
        const Tensor& x = val(a);
        Tensor& ga = grad_ref(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0 ? g[i] : 0;
    };
    return o;
}

Var Tape::tanh(Var a) {
    Tensor out = val(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o]() {
        const Tensor& g = node(o).grad;
        const Tensor& y = val(o);
        Tensor& ga = grad_ref(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return o;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    Tensor out = val(a).reshaped(shape);
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o]() {
        const Tensor& g = node(o).grad;
        Tensor& ga = grad_ref(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return o;
}

Var Tape::concat_last(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rank() != bv.rank()) throw std::invalid_argument("concat_last: rank mismatch");
    std::vector<int> shape = av.shape();
    for (int i = 0; i + 1 < av.rank(); ++i)
        if (av.dim(i) != bv.dim(i)) throw std::invalid_argument("concat_last: leading dims differ");
    const int ca = av.dim(av.rank() - 1);
    const int cb = bv.dim(bv.rank() - 1);
    shape.back() = ca + cb;
    Tensor out(shape);
    const std::int64_t rows = av.size() / ca;
    for (std::int64_t r = 0; r < rows; ++r) {
        for (int i = 0; i < ca; ++i) out[r * (ca + cb) + i] = av[r * ca + i];
        for (int i = 0; i < cb; ++i) out[r * (ca + cb) + ca + i] = bv[r * cb + i];
    }
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o, ca, cb, rows]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (std::int64_t r = 0; r < rows; ++r)
                for (int i = 0; i < ca; ++i) ga[r * ca + i] += g[r * (ca + cb) + i];
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t r = 0; r < rows; ++r)
                for (int i = 0; i < cb; ++i) gb[r * cb + i] += g[r * (ca + cb) + ca + i];
        }
    };
    return o;
}

Var Tape::transpose_last2(Var a) {
    const Tensor& av = val(a);
    if (av.rank() != 3) throw std::invalid_argument("transpose_last2 expects rank-3");
    const int b = av.dim(0), s = av.dim(1), k = av.dim(2);
    Tensor out({b, k, s});
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < s; ++j)
            for (int l = 0; l < k; ++l) out[(static_cast<std::int64_t>(i) * k + l) * s + j] = av[(static_cast<std::int64_t>(i) * s + j) * k + l];
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o, b, s, k]() {
        const Tensor& g = node(o).grad;
        Tensor& ga = grad_ref(a);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < s; ++j)
                for (int l = 0; l < k; ++l)
                    ga[(static_cast<std::int64_t>(i) * s + j) * k + l] += g[(static_cast<std::int64_t>(i) * k + l) * s + j];
    };
    return o;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() = CMapM(av.data(), m, k) * CMapM(bv.data(), k, n);
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o, m, k, n]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            MapM(ga.data(), m, k).noalias() += CMapM(g.data(), m, n) * CMapM(val(b).data(), k, n).transpose();
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            MapM(gb.data(), k, n).noalias() += CMapM(val(a).data(), m, k).transpose() * CMapM(g.data(), m, n);
        }
    };
    return o;
}

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
        throw std::invalid_argument("linear: incompatible shapes " + xv.shape_str() + " x " + wv.shape_str());
    const int n = xv.dim(0), din = xv.dim(1), dout = wv.dim(1);
    Tensor out({n, dout});
    MapM(out.data(), n, dout).noalias() = CMapM(xv.data(), n, din) * CMapM(wv.data(), din, dout);
    bool has_bias = b.valid();
    if (has_bias) {
        const Tensor& bv = val(b);
        if (bv.size() != dout) throw std::invalid_argument("linear: bias size mismatch");
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < dout; ++c) out[static_cast<std::int64_t>(r) * dout + c] += bv[c];
    }
    bool rg = needs_grad(x) || needs_grad(w) || (has_bias && needs_grad(b));
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, w, b, o, n, din, dout, has_bias]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(x)) {
            Tensor& gx = grad_ref(x);
            MapM(gx.data(), n, din).noalias() += CMapM(g.data(), n, dout) * CMapM(val(w).data(), din, dout).transpose();
        }
        if (needs_grad(w)) {
            Tensor& gw = grad_ref(w);
            MapM(gw.data(), din, dout).noalias() += CMapM(val(x).data(), n, din).transpose() * CMapM(g.data(), n, dout);
        }
        if (has_bias && needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < dout; ++c) gb[c] += g[static_cast<std::int64_t>(r) * dout + c];
        }
    };
    return o;
}

Var Tape::bmm(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
        throw std::invalid_argument("bmm: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    const int bs = av.dim(0), s = av.dim(1), k = av.dim(2), t = bv.dim(2);
    Tensor out({bs, s, t});
    for (int i = 0; i < bs; ++i) {
        MapM(out.data() + static_cast<std::int64_t>(i) * s * t, s, t).noalias() =
            CMapM(av.data() + static_cast<std::int64_t>(i) * s * k, s, k) *
            CMapM(bv.data() + static_cast<std::int64_t>(i) * k * t, k, t);
    }
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o, bs, s, k, t]() {
        const Tensor& g = node(o).grad;
        for (int i = 0; i < bs; ++i) {
            CMapM gm(g.data() + static_cast<std::int64_t>(i) * s * t, s, t);
            if (needs_grad(a)) {
                Tensor& ga = grad_ref(a);
                MapM(ga.data() + static_cast<std::int64_t>(i) * s * k, s, k).noalias() +=
                    gm * CMapM(val(b).data() + static_cast<std::int64_t>(i) * k * t, k, t).transpose();
            }
            if (needs_grad(b)) {
                Tensor& gb = grad_ref(b);
                MapM(gb.data() + static_cast<std::int64_t>(i) * k * t, k, t).noalias() +=
                    CMapM(val(a).data() + static_cast<std::int64_t>(i) * s * k, s, k).transpose() * gm;
            }
        }
    };
    return o;
}

Var Tape::conv2d(Var x, Var w, Var b, int kh, int kw, int stride, int pad) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    if (xv.rank() != 4) throw std::invalid_argument("conv2d: input must be [N,H,W,C]");
    ConvDims d;
    d.n = xv.dim(0); d.h = xv.dim(1); d.w = xv.dim(2); d.c = xv.dim(3);
    d.kh = kh; d.kw = kw; d.stride = stride; d.pad = pad;
    if (wv.rank() != 2 || wv.dim(0) != kh * kw * d.c)
        throw std::invalid_argument("conv2d: weight must be [kh*kw*Cin, Cout], got " + wv.shape_str());
    d.cout = wv.dim(1);
    d.oh = (d.h + 2 * pad - kh) / stride + 1;
    d.ow = (d.w + 2 * pad - kw) / stride + 1;
    if (d.oh <= 0 || d.ow <= 0) throw std::invalid_argument("conv2d: empty output");

    auto col = std::make_shared<std::vector<real>>();
    im2col(xv, d, *col);
    Tensor out({d.n, d.oh, d.ow, d.cout});
    MapM(out.data(), d.rows(), d.cout).noalias() =
        CMapM(col->data(), d.rows(), d.cols()) * CMapM(wv.data(), d.cols(), d.cout);
    col->clear();
    col->shrink_to_fit();  // rebuilt on demand in backprop
    bool has_bias = b.valid();
    if (has_bias) {
        const Tensor& bv = val(b);
        if (bv.size() != d.cout) throw std::invalid_argument("conv2d: bias size mismatch");
        for (std::int64_t r = 0; r < d.rows(); ++r)
            for (int c = 0; c < d.cout; ++c) out[r * d.cout + c] += bv[c];
    }
    bool rg = needs_grad(x) || needs_grad(w) || (has_bias && needs_grad(b));
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, w, b, o, d, has_bias]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(w)) {
            std::vector<real> col2;
            im2col(val(x), d, col2);
            Tensor& gw = grad_ref(w);
            MapM(gw.data(), d.cols(), d.cout).noalias() +=
                CMapM(col2.data(), d.rows(), d.cols()).transpose() * CMapM(g.data(), d.rows(), d.cout);
        }
        if (has_bias && needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t r = 0; r < d.rows(); ++r)
                for (int c = 0; c < d.cout; ++c) gb[c] += g[r * d.cout + c];
        }
        if (needs_grad(x)) {
            std::vector<real> dcol(static_cast<std::size_t>(d.rows() * d.cols()));
            MapM(dcol.data(), d.rows(), d.cols()).noalias() =
                CMapM(g.data(), d.rows(), d.cout) * CMapM(val(w).data(), d.cols(), d.cout).transpose();
            col2im_add(dcol, d, grad_ref(x));
        }
    };
    return o;
}

Var Tape::upsample2x(Var x) {
    const Tensor& xv = val(x);
    if (xv.rank() != 4) throw std::invalid_argument("upsample2x: input must be [N,H,W,C]");
    const int n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    Tensor out({n, 2 * h, 2 * w, c});
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx) {
                const real* src = xv.data() + ((static_cast<std::int64_t>(i) * h + y / 2) * w + xx / 2) * c;
                real* dst = out.data() + ((static_cast<std::int64_t>(i) * 2 * h + y) * 2 * w + xx) * c;
                for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
            }
    bool rg = needs_grad(x);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, o, n, h, w, c]() {
        const Tensor& g = node(o).grad;
        Tensor& gx = grad_ref(x);
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < 2 * h; ++y)
                for (int xx = 0; xx < 2 * w; ++xx) {
                    real* dst = gx.data() + ((static_cast<std::int64_t>(i) * h + y / 2) * w + xx / 2) * c;
                    const real* src = g.data() + ((static_cast<std::int64_t>(i) * 2 * h + y) * 2 * w + xx) * c;
                    for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                }
    };
    return o;
}

Var Tape::gap(Var x) {
    const Tensor& xv = val(x);
    if (xv.rank() != 4) throw std::invalid_argument("gap: input must be [N,H,W,C]");
    const int n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    const real inv = 1.0 / (static_cast<real>(h) * w);
    Tensor out({n, c});
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < h * w; ++p)
            for (int ch = 0; ch < c; ++ch)
                out[static_cast<std::int64_t>(i) * c + ch] += xv[(static_cast<std::int64_t>(i) * h * w + p) * c + ch];
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= inv;
    bool rg = needs_grad(x);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, o, n, h, w, c, inv]() {
        const Tensor& g = node(o).grad;
        Tensor& gx = grad_ref(x);
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < h * w; ++p)
                for (int ch = 0; ch < c; ++ch)
                    gx[(static_cast<std::int64_t>(i) * h * w + p) * c + ch] += g[static_cast<std::int64_t>(i) * c + ch] * inv;
    };
    return o;
}

Var Tape::add_chan(Var x, Var v) {
    const Tensor& xv = val(x);
    const Tensor& vv = val(v);
    if (xv.rank() != 4 || vv.rank() != 2 || xv.dim(0) != vv.dim(0) || xv.dim(3) != vv.dim(1))
        throw std::invalid_argument("add_chan: expects [N,H,W,C] + [N,C]");
    const int n = xv.dim(0), hw = xv.dim(1) * xv.dim(2), c = xv.dim(3);
    Tensor out = xv;
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < hw; ++p)
            for (int ch = 0; ch < c; ++ch)
                out[(static_cast<std::int64_t>(i) * hw + p) * c + ch] += vv[static_cast<std::int64_t>(i) * c + ch];
    bool rg = needs_grad(x) || needs_grad(v);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, v, o, n, hw, c]() {
        const Tensor& g = node(o).grad;
        if (needs_grad(x)) {
            Tensor& gx = grad_ref(x);
            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (needs_grad(v)) {
            Tensor& gv = grad_ref(v);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < hw; ++p)
                    for (int ch = 0; ch < c; ++ch)
                        gv[static_cast<std::int64_t>(i) * c + ch] += g[(static_cast<std::int64_t>(i) * hw + p) * c + ch];
        }
    };
    return o;
}

Var Tape::group_norm(Var x, Var gamma, Var beta, int groups, real eps) {
    const Tensor& xv = val(x);
    if (xv.rank() != 4) throw std::invalid_argument("group_norm: input must be [N,H,W,C]");
    const int n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    if (groups <= 0 || c % groups != 0) throw std::invalid_argument("group_norm: groups must divide channels");
    const Tensor& gv = val(gamma);
    const Tensor& bv = val(beta);
    if (gv.size() != c || bv.size() != c) throw std::invalid_argument("group_norm: gamma/beta size mismatch");
    const int cg = c / groups;
    const std::int64_t m = static_cast<std::int64_t>(h) * w * cg;

    auto mu = std::make_shared<std::vector<real>>(static_cast<std::size_t>(n) * groups, real(0));
    auto rstd = std::make_shared<std::vector<real>>(static_cast<std::size_t>(n) * groups, real(0));
    Tensor out(xv.shape());
    for (int i = 0; i < n; ++i) {
        for (int g = 0; g < groups; ++g) {
            real s = 0, s2 = 0;
            for (int p = 0; p < h * w; ++p)
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    const real v = xv[(static_cast<std::int64_t>(i) * h * w + p) * c + ch];
                    s += v;
                    s2 += v * v;
                }
            const real mean = s / static_cast<real>(m);
            const real var = s2 / static_cast<real>(m) - mean * mean;
            const real r = 1.0 / std::sqrt(var + eps);
            (*mu)[static_cast<std::size_t>(i) * groups + g] = mean;
            (*rstd)[static_cast<std::size_t>(i) * groups + g] = r;
            for (int p = 0; p < h * w; ++p)
                for (int ch = g * cg; ch < (g + 1) * cg; ++ch) {
                    const std::int64_t idx = (static_cast<std::int64_t>(i) * h * w + p) * c + ch;
                    out[idx] = (xv[idx] - mean) * r * gv[ch] + bv[ch];
                }
        }
    }
    bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, x, gamma, beta, o, n, h, w, c, groups, cg, m, mu, rstd]() {
        const Tensor& g = node(o).grad;
        const Tensor& xv2 = val(x);
        const Tensor& gv2 = val(gamma);
        Tensor* gx = needs_grad(x) ? &grad_ref(x) : nullptr;
        Tensor* gg = needs_grad(gamma) ? &grad_ref(gamma) : nullptr;
        Tensor* gb = needs_grad(beta) ? &grad_ref(beta) : nullptr;
        for (int i = 0; i < n; ++i) {
            for (int gr = 0; gr < groups; ++gr) {
                const real mean = (*mu)[static_cast<std::size_t>(i) * groups + gr];
                const real r = (*rstd)[static_cast<std::size_t>(i) * groups + gr];
                real sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (int p = 0; p < h * w; ++p)
                    for (int ch = gr * cg; ch < (gr + 1) * cg; ++ch) {
                        const std::int64_t idx = (static_cast<std::int64_t>(i) * h * w + p) * c + ch;
                        const real xhat = (xv2[idx] - mean) * r;
                        const real dxhat = g[idx] * gv2[ch];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        if (gg) (*gg)[ch] += g[idx] * xhat;
                        if (gb) (*gb)[ch] += g[idx];
                    }
                if (gx) {
                    const real inv_m = 1.0 / static_cast<real>(m);
                    for (int p = 0; p < h * w; ++p)
                        for (int ch = gr * cg; ch < (gr + 1) * cg; ++ch) {
                            const std::int64_t idx = (static_cast<std::int64_t>(i) * h * w + p) * c + ch;
                            const real xhat = (xv2[idx] - mean) * r;
                            const real dxhat = g[idx] * gv2[ch];
                            (*gx)[idx] += r * (dxhat - inv_m * sum_dxhat - xhat * inv_m * sum_dxhat_xhat);
                        }
                }
            }
        }
    };
    return o;
}

Var Tape::rows(Var table, const std::vector<int>& indices) {
    const Tensor& tv = val(table);
    if (tv.rank() != 2) throw std::invalid_argument("rows: table must be rank-2");
    const int r = tv.dim(0), d = tv.dim(1);
    for (int idx : indices)
        if (idx < 0 || idx >= r) throw std::out_of_range("rows: index out of range");
    Tensor out({static_cast<int>(indices.size()), d});
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (int j = 0; j < d; ++j) out[static_cast<std::int64_t>(i) * d + j] = tv[static_cast<std::int64_t>(indices[i]) * d + j];
    bool rg = needs_grad(table);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, table, o, indices, d]() {
        const Tensor& g = node(o).grad;
        Tensor& gt = grad_ref(table);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (int j = 0; j < d; ++j) gt[static_cast<std::int64_t>(indices[i]) * d + j] += g[static_cast<std::int64_t>(i) * d + j];
    };
    return o;
}

Var Tape::broadcast_rows(Var row, int n) {
    const Tensor& rv = val(row);
    if (rv.rank() != 2 || rv.dim(0) != 1) throw std::invalid_argument("broadcast_rows: expects [1,D]");
    const int d = rv.dim(1);
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out[static_cast<std::int64_t>(i) * d + j] = rv[j];
    bool rg = needs_grad(row);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, row, o, n, d]() {
        const Tensor& g = node(o).grad;
        Tensor& gr = grad_ref(row);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gr[j] += g[static_cast<std::int64_t>(i) * d + j];
    };
    return o;
}

Var Tape::softmax_last(Var a) {
    const Tensor& av = val(a);
    const int l = av.dim(av.rank() - 1);
    const std::int64_t rows_n = av.size() / l;
    Tensor out(av.shape());
    for (std::int64_t r = 0; r < rows_n; ++r) {
        const real* src = av.data() + r * l;
        real* dst = out.data() + r * l;
        real mx = src[0];
        for (int i = 1; i < l; ++i) mx = std::max(mx, src[i]);
        real sum = 0;
        for (int i = 0; i < l; ++i) {
            dst[i] = std::exp(src[i] - mx);
            sum += dst[i];
        }
        for (int i = 0; i < l; ++i) dst[i] /= sum;
    }
    bool rg = needs_grad(a);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, o, l, rows_n]() {
        const Tensor& g = node(o).grad;
        const Tensor& y = val(o);
        Tensor& ga = grad_ref(a);
        for (std::int64_t r = 0; r < rows_n; ++r) {
            real dot = 0;
            for (int i = 0; i < l; ++i) dot += g[r * l + i] * y[r * l + i];
            for (int i = 0; i < l; ++i) ga[r * l + i] += y[r * l + i] * (g[r * l + i] - dot);
        }
    };
    return o;
}

Var Tape::mse(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("mse: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    const std::int64_t n = av.size();
    real s = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const real d = av[i] - bv[i];
        s += d * d;
    }
    Tensor out({1}, {s / static_cast<real>(n)});
    bool rg = needs_grad(a) || needs_grad(b);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, a, b, o, n]() {
        const real g = node(o).grad[0];
        const Tensor& av2 = val(a);
        const Tensor& bv2 = val(b);
        const real k = 2.0 * g / static_cast<real>(n);
        if (needs_grad(a)) {
            Tensor& ga = grad_ref(a);
            for (std::int64_t i = 0; i < n; ++i) ga[i] += k * (av2[i] - bv2[i]);
        }
        if (needs_grad(b)) {
            Tensor& gb = grad_ref(b);
            for (std::int64_t i = 0; i < n; ++i) gb[i] -= k * (av2[i] - bv2[i]);
        }
    };
    return o;
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& lv = val(logits);
    if (lv.rank() != 2 || lv.dim(0) != static_cast<int>(labels.size()))
        throw std::invalid_argument("cross_entropy: logits/labels mismatch");
    const int n = lv.dim(0), k = lv.dim(1);
    auto probs = std::make_shared<Tensor>(lv.shape());
    real loss = 0;
    for (int r = 0; r < n; ++r) {
        if (labels[static_cast<std::size_t>(r)] < 0 || labels[static_cast<std::size_t>(r)] >= k)
            throw std::out_of_range("cross_entropy: label out of range");
        const real* src = lv.data() + static_cast<std::int64_t>(r) * k;
        real mx = src[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, src[i]);
        real sum = 0;
        for (int i = 0; i < k; ++i) sum += std::exp(src[i] - mx);
        const real logz = mx + std::log(sum);
        for (int i = 0; i < k; ++i) (*probs)[static_cast<std::int64_t>(r) * k + i] = std::exp(src[i] - logz);
        loss -= src[labels[static_cast<std::size_t>(r)]] - logz;
    }
    Tensor out({1}, {loss / static_cast<real>(n)});
    bool rg = needs_grad(logits);
    Var o = make(std::move(out), rg);
    if (!rg) return o;
    node(o).backprop = [this, logits, o, labels, n, k, probs]() {
        const real g = node(o).grad[0];
        Tensor& gl = grad_ref(logits);
        const real inv = g / static_cast<real>(n);
        for (int r = 0; r < n; ++r) {
            for (int i = 0; i < k; ++i) {
                real p = (*probs)[static_cast<std::int64_t>(r) * k + i];
                if (i == labels[static_cast<std::size_t>(r)]) p -= 1.0;
                gl[static_cast<std::int64_t>(r) * k + i] += inv * p;
            }
        }
    };
    return o;
}

void Tape::backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    ensure_grad(loss);
    ln.grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.backprop && !n.grad.empty()) n.backprop();
    }
}

}  // namespace dcdm
