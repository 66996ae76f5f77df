#include <Eigen/Core>

#include "adamat/ops.hpp"

namespace adamat::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t o, kh, kw;
    std::size_t stride, ph, pw;
    std::size_t ho, wo;

    std::size_t k() const { return c * kh * kw; }
    std::size_t p() const { return ho * wo; }
    bool direct() const { return kh == 1 && kw == 1 && stride == 1 && ph == 0 && pw == 0; }
};

ConvGeometry make_geometry(const Shape& xs, const Shape& ks, const Shape* bs, Conv2dOptions opt) {
    if (xs.size() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(xs));
    if (ks.size() != 4) throw ShapeError("conv2d: kernel must be [O,C,kh,kw], got " + shape_str(ks));
    if (ks[1] != xs[1]) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, input has " +
                         std::to_string(xs[1]));
    }
    if (bs && (bs->size() != 1 || (*bs)[0] != ks[0])) {
        throw ShapeError("conv2d: bias must be [" + std::to_string(ks[0]) + "], got " + shape_str(*bs));
    }
    if (opt.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (opt.pad_h < 0 || opt.pad_w < 0) throw ShapeError("conv2d: padding must be >= 0");
    ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ks[0], ks[2], ks[3], std::size_t(opt.stride), std::size_t(opt.pad_h),
                   std::size_t(opt.pad_w), 0, 0};
    if (g.kh > g.h + 2 * g.ph || g.kw > g.w + 2 * g.pw) {
        throw ShapeError("conv2d: kernel " + shape_str(ks) + " larger than padded input " + shape_str(xs));
    }
    g.ho = (g.h + 2 * g.ph - g.kh) / g.stride + 1;
    g.wo = (g.w + 2 * g.pw - g.kw) / g.stride + 1;
    return g;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
    const std::ptrdiff_t h = std::ptrdiff_t(g.h), w = std::ptrdiff_t(g.w);
    const std::size_t p = g.p();
    for (std::size_t c = 0; c < g.c; ++c) {
        const T* xc = x + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                T* row = col + ((c * g.kh + ki) * g.kw + kj) * p;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * g.stride + ki) - std::ptrdiff_t(g.ph);
                    T* dst = row + oy * g.wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + g.wo, T(0));
                        continue;
                    }
                    const T* src = xc + iy * w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = std::ptrdiff_t(ox * g.stride + kj) - std::ptrdiff_t(g.pw);
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* x) {
    const std::ptrdiff_t h = std::ptrdiff_t(g.h), w = std::ptrdiff_t(g.w);
    const std::size_t p = g.p();
    for (std::size_t c = 0; c < g.c; ++c) {
        T* xc = x + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const T* row = col + ((c * g.kh + ki) * g.kw + kj) * p;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * g.stride + ki) - std::ptrdiff_t(g.ph);
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + oy * g.wo;
                    T* dst = xc + iy * w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = std::ptrdiff_t(ox * g.stride + kj) - std::ptrdiff_t(g.pw);
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Conv2dOptions opt) {
    const bool has_bias = bias.valid();
    const ConvGeometry g = make_geometry(x.shape(), kernel.shape(), has_bias ? &bias.shape() : nullptr, opt);
    const Tensor<T>& xv = x.value();
    const Tensor<T>& kv = kernel.value();

    Tensor<T> out(Shape{g.n, g.o, g.ho, g.wo});
    const std::size_t k = g.k(), p = g.p();
    std::vector<T> col(g.direct() ? 0 : k * p);
    ConstMapMat<T> wmat(kv.ptr(), Eigen::Index(g.o), Eigen::Index(k));
    for (std::size_t n = 0; n < g.n; ++n) {
        const T* xn = xv.ptr() + n * g.c * g.h * g.w;
        if (!g.direct()) im2col(xn, g, col.data());
        ConstMapMat<T> cmat(g.direct() ? xn : col.data(), Eigen::Index(k), Eigen::Index(p));
        MapMat<T> ymat(out.ptr() + n * g.o * p, Eigen::Index(g.o), Eigen::Index(p));
        ymat.noalias() = wmat * cmat;
        if (has_bias) {
            const Tensor<T>& bv = bias.value();
            for (std::size_t o = 0; o < g.o; ++o) ymat.row(Eigen::Index(o)).array() += bv[o];
        }
    }

    const std::size_t xid = x.id(), kid = kernel.id(), bid = has_bias ? bias.id() : 0;
    Var<T> inputs[] = {x, kernel, bias};
    return x.tape().record(
        std::move(out), std::span<const Var<T>>(inputs, has_bias ? 3 : 2),
        [g, xid, kid, bid, has_bias](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            const std::size_t k = g.k(), p = g.p();
            const bool need_x = tape.requires_grad(xid);
            const bool need_k = tape.requires_grad(kid);
            const bool need_b = has_bias && tape.requires_grad(bid);
            const Tensor<T>& xv = tape.value(xid);
            const Tensor<T>& kv = tape.value(kid);
            if (need_b) {
                Tensor<T>& db = tape.grad_buffer(bid);
                for (std::size_t n = 0; n < g.n; ++n) {
                    for (std::size_t o = 0; o < g.o; ++o) {
                        const T* src = dy.ptr() + (n * g.o + o) * p;
                        T acc = 0;
                        for (std::size_t i = 0; i < p; ++i) acc += src[i];
                        db[o] += acc;
                    }
                }
            }
            if (!need_x && !need_k) return;
            std::vector<T> col(g.direct() ? 0 : k * p);
            std::vector<T> dcol(need_x && !g.direct() ? k * p : 0);
            ConstMapMat<T> wmat(kv.ptr(), Eigen::Index(g.o), Eigen::Index(k));
            T* dk = need_k ? tape.grad_buffer(kid).ptr() : nullptr;
            T* dx = need_x ? tape.grad_buffer(xid).ptr() : nullptr;
            for (std::size_t n = 0; n < g.n; ++n) {
                ConstMapMat<T> dymat(dy.ptr() + n * g.o * p, Eigen::Index(g.o), Eigen::Index(p));
                const T* xn = xv.ptr() + n * g.c * g.h * g.w;
                if (need_k) {
                    if (!g.direct()) im2col(xn, g, col.data());
                    ConstMapMat<T> cmat(g.direct() ? xn : col.data(), Eigen::Index(k), Eigen::Index(p));
                    MapMat<T> dkmat(dk, Eigen::Index(g.o), Eigen::Index(k));
                    dkmat.noalias() += dymat * cmat.transpose();
                }
                if (need_x) {
                    T* dxn = dx + n * g.c * g.h * g.w;
                    if (g.direct()) {
                        MapMat<T> dxmat(dxn, Eigen::Index(k), Eigen::Index(p));
                        dxmat.noalias() += wmat.transpose() * dymat;
                    } else {
                        MapMat<T> dcmat(dcol.data(), Eigen::Index(k), Eigen::Index(p));
                        dcmat.noalias() = wmat.transpose() * dymat;
                        col2im(dcol.data(), g, dxn);
                    }
                }
            }
        },
        "conv2d");
}

namespace {

// Source index in a [N, C*r*r, H, W] tensor for output element (n, c, y, x) of [N, C, H*r, W*r].
struct ShuffleGeometry {
    std::size_t n, c, h, w, r;
};

template <typename T, bool kForward>
void shuffle_copy(const T* src, T* dst, const ShuffleGeometry& g) {
    const std::size_t oh = g.h * g.r, ow = g.w * g.r;
    for (std::size_t n = 0; n < g.n; ++n) {
        for (std::size_t c = 0; c < g.c; ++c) {
            for (std::size_t i = 0; i < g.r; ++i) {
                for (std::size_t j = 0; j < g.r; ++j) {
                    const std::size_t ic = c * g.r * g.r + i * g.r + j;
                    for (std::size_t y = 0; y < g.h; ++y) {
                        for (std::size_t x = 0; x < g.w; ++x) {
                            const std::size_t in_idx = ((n * g.c * g.r * g.r + ic) * g.h + y) * g.w + x;
                            const std::size_t out_idx = ((n * g.c + c) * oh + y * g.r + i) * ow + x * g.r + j;
                            if constexpr (kForward) {
                                dst[out_idx] = src[in_idx];
                            } else {
                                dst[in_idx] = src[out_idx];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("pixel_shuffle: input must be [N,C,H,W], got " + shape_str(s));
    if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
    const std::size_t rr = std::size_t(r) * std::size_t(r);
    if (s[1] % rr != 0) {
        throw ShapeError("pixel_shuffle: " + std::to_string(s[1]) + " channels not divisible by r^2 = " +
                         std::to_string(rr));
    }
    ShuffleGeometry g{s[0], s[1] / rr, s[2], s[3], std::size_t(r)};
    Tensor<T> out(Shape{g.n, g.c, g.h * g.r, g.w * g.r});
    shuffle_copy<T, true>(x.value().ptr(), out.ptr(), g);
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [g, xid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T> dx(tape.value(xid).shape());
            shuffle_copy<T, false>(dy.ptr(), dx.ptr(), g);
            tape.accumulate(xid, dx);
        },
        "pixel_shuffle");
}

template <typename T>
Var<T> pixel_unshuffle(Var<T> x, int r) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("pixel_unshuffle: input must be [N,C,H,W], got " + shape_str(s));
    if (r < 1) throw ShapeError("pixel_unshuffle: factor must be >= 1");
    const std::size_t ur = std::size_t(r);
    if (s[2] % ur != 0 || s[3] % ur != 0) throw ShapeError("pixel_unshuffle: spatial extent not divisible by r");
    ShuffleGeometry g{s[0], s[1], s[2] / ur, s[3] / ur, ur};
    Tensor<T> out(Shape{g.n, g.c * ur * ur, g.h, g.w});
    shuffle_copy<T, false>(x.value().ptr(), out.ptr(), g);
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [g, xid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T> dx(tape.value(xid).shape());
            shuffle_copy<T, true>(dy.ptr(), dx.ptr(), g);
            tape.accumulate(xid, dx);
        },
        "pixel_unshuffle");
}

template <typename T>
Var<T> upsample_nearest(Var<T> x, int factor) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("upsample_nearest: input must be [N,C,H,W], got " + shape_str(s));
    if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
    const std::size_t f = std::size_t(factor);
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
    Tensor<T> out(Shape{s[0], s[1], h * f, w * f});
    const T* src = x.value().ptr();
    T* dst = out.ptr();
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t y = 0; y < h * f; ++y) {
            for (std::size_t xx = 0; xx < w * f; ++xx) {
                dst[(p * h * f + y) * w * f + xx] = src[(p * h + y / f) * w + xx / f];
            }
        }
    }
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, planes, h, w, f](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t p = 0; p < planes; ++p) {
                for (std::size_t y = 0; y < h * f; ++y) {
                    for (std::size_t xx = 0; xx < w * f; ++xx) {
                        dx[(p * h + y / f) * w + xx / f] += dy[(p * h * f + y) * w * f + xx];
                    }
                }
            }
        },
        "upsample_nearest");
}

#define ADAMAT_INSTANTIATE(T)                                                  \
    template Var<T> conv2d(Var<T>, Var<T>, Var<T>, Conv2dOptions);             \
    template Var<T> pixel_shuffle(Var<T>, int);                                \
    template Var<T> pixel_unshuffle(Var<T>, int);                              \
    template Var<T> upsample_nearest(Var<T>, int);

ADAMAT_INSTANTIATE(float)
ADAMAT_INSTANTIATE(double)

#undef ADAMAT_INSTANTIATE

}  // namespace adamat::ops
