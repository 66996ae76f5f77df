#include <cmath>

#include "adamat/ops.hpp"

namespace adamat::ops {

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Elementwise unary op whose derivative is expressed through the output value.
template <typename T, typename F, typename DF>
Var<T> unary_from_output(Var<T> x, F f, DF df_from_y, const char* op) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = f(xv[i]);
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, df_from_y](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>& yv) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t i = 0; i < yv.numel(); ++i) dx[i] += dy[i] * df_from_y(yv[i]);
        },
        op);
}

}  // namespace

template <typename T>
Var<T> relu(Var<T> x) {
    const Tensor<T>& xv = x.value();
    std::vector<std::uint8_t> on(xv.numel());
    for (std::size_t i = 0; i < xv.numel(); ++i) on[i] = xv[i] > T(0) ? 1 : 0;
    x.tape().decide(on);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = on[i] ? xv[i] : T(0);
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, on = std::move(on)](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t i = 0; i < on.size(); ++i) {
                if (on[i]) dx[i] += dy[i];
            }
        },
        "relu");
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    return unary_from_output<T>(
        x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
Var<T> tanh(Var<T> x) {
    return unary_from_output<T>(
        x, [](T v) { return std::tanh(v); }, [](T y) { return T(1) - y * y; }, "tanh");
}

template <typename T>
Var<T> exp(Var<T> x) {
    return unary_from_output<T>(
        x, [](T v) { return std::exp(v); }, [](T y) { return y; }, "exp");
}

template <typename T>
Var<T> softmax_channel(Var<T> x) {
    const Shape& s = x.shape();
    if (s.size() < 2) throw ShapeError("softmax_channel: need rank >= 2, got " + shape_str(s));
    const std::size_t n = s[0], c = s[1], inner = shape_numel(s) / (n * c);
    const Tensor<T>& xv = x.value();
    Tensor<T> out(s);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = b * c * inner + i;
            T mx = xv[base];
            for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, xv[base + k * inner]);
            T z = 0;
            for (std::size_t k = 0; k < c; ++k) {
                const T e = std::exp(xv[base + k * inner] - mx);
                out[base + k * inner] = e;
                z += e;
            }
            for (std::size_t k = 0; k < c; ++k) out[base + k * inner] /= z;
        }
    }
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, n, c, inner](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>& yv) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = b * c * inner + i;
                    T dot = 0;
                    for (std::size_t k = 0; k < c; ++k) dot += dy[base + k * inner] * yv[base + k * inner];
                    for (std::size_t k = 0; k < c; ++k) {
                        dx[base + k * inner] += yv[base + k * inner] * (dy[base + k * inner] - dot);
                    }
                }
            }
        },
        "softmax_channel");
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    require_same_shape(a.shape(), b.shape(), "add");
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
    const std::size_t aid = a.id(), bid = b.id();
    Var<T> inputs[] = {a, b};
    return a.tape().record(
        std::move(out), inputs,
        [aid, bid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            tape.accumulate(aid, dy);
            tape.accumulate(bid, dy);
        },
        "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    require_same_shape(a.shape(), b.shape(), "sub");
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
    const std::size_t aid = a.id(), bid = b.id();
    Var<T> inputs[] = {a, b};
    return a.tape().record(
        std::move(out), inputs,
        [aid, bid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            tape.accumulate(aid, dy);
            if (!tape.requires_grad(bid)) return;
            Tensor<T>& db = tape.grad_buffer(bid);
            for (std::size_t i = 0; i < dy.numel(); ++i) db[i] -= dy[i];
        },
        "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
    const std::size_t aid = a.id(), bid = b.id();
    Var<T> inputs[] = {a, b};
    return a.tape().record(
        std::move(out), inputs,
        [aid, bid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            const Tensor<T>& av = tape.value(aid);
            const Tensor<T>& bv = tape.value(bid);
            if (tape.requires_grad(aid)) {
                Tensor<T>& da = tape.grad_buffer(aid);
                for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i] * bv[i];
            }
            if (tape.requires_grad(bid)) {
                Tensor<T>& db = tape.grad_buffer(bid);
                for (std::size_t i = 0; i < dy.numel(); ++i) db[i] += dy[i] * av[i];
            }
        },
        "mul");
}

template <typename T>
Var<T> scale(Var<T> x, T s) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] * s;
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, s](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i] * s;
        },
        "scale");
}

template <typename T>
Var<T> add_scalar(Var<T> x, T s) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] + s;
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs, [xid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) { tape.accumulate(xid, dy); },
        "add_scalar");
}

template <typename T>
Var<T> sum(Var<T> x) {
    const Tensor<T>& xv = x.value();
    T acc = 0;
    for (auto v : xv.data()) acc += v;
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        Tensor<T>::scalar(acc), inputs,
        [xid](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            const T g = dy[0];
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += g;
        },
        "sum");
}

template <typename T>
Var<T> mean(Var<T> x) {
    return scale(sum(x), T(1) / T(x.value().numel()));
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs) {
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape& s0 = xs[0].shape();
    if (s0.size() < 2) throw ShapeError("concat_channels: need rank >= 2");
    const std::size_t n = s0[0];
    const std::size_t inner = shape_numel(s0) / (s0[0] * s0[1]);
    std::size_t total_c = 0;
    std::vector<std::size_t> channels, ids;
    for (const auto& v : xs) {
        const Shape& s = v.shape();
        Shape a = s, b = s0;
        if (a.size() != b.size()) throw ShapeError("concat_channels: rank mismatch");
        a[1] = b[1] = 0;
        if (a != b) throw ShapeError("concat_channels: extent mismatch " + shape_str(s) + " vs " + shape_str(s0));
        channels.push_back(s[1]);
        ids.push_back(v.id());
        total_c += s[1];
    }
    Shape os = s0;
    os[1] = total_c;
    Tensor<T> out(os);
    for (std::size_t b = 0; b < n; ++b) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const T* src = xs[k].value().ptr() + b * channels[k] * inner;
            std::copy(src, src + channels[k] * inner, out.ptr() + (b * total_c + off) * inner);
            off += channels[k];
        }
    }
    return xs[0].tape().record(
        std::move(out), xs,
        [ids, channels, n, inner, total_c](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (tape.requires_grad(ids[k])) {
                    Tensor<T>& dx = tape.grad_buffer(ids[k]);
                    for (std::size_t b = 0; b < n; ++b) {
                        const T* src = dy.ptr() + (b * total_c + off) * inner;
                        T* dst = dx.ptr() + b * channels[k] * inner;
                        for (std::size_t i = 0; i < channels[k] * inner; ++i) dst[i] += src[i];
                    }
                }
                off += channels[k];
            }
        },
        "concat_channels");
}

template <typename T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t end) {
    const Shape& s = x.shape();
    if (s.size() < 2 || begin >= end || end > s[1]) {
        throw ShapeError("slice_channels: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") for shape " + shape_str(s));
    }
    const std::size_t n = s[0], c = s[1], inner = shape_numel(s) / (n * c), oc = end - begin;
    Shape os = s;
    os[1] = oc;
    Tensor<T> out(os);
    for (std::size_t b = 0; b < n; ++b) {
        const T* src = x.value().ptr() + (b * c + begin) * inner;
        std::copy(src, src + oc * inner, out.ptr() + b * oc * inner);
    }
    const std::size_t xid = x.id();
    Var<T> inputs[] = {x};
    return x.tape().record(
        std::move(out), inputs,
        [xid, n, c, inner, begin, oc](Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(xid);
            for (std::size_t b = 0; b < n; ++b) {
                const T* src = dy.ptr() + b * oc * inner;
                T* dst = dx.ptr() + (b * c + begin) * inner;
                for (std::size_t i = 0; i < oc * inner; ++i) dst[i] += src[i];
            }
        },
        "slice_channels");
}

#define ADAMAT_INSTANTIATE(T)                                                    \
    template Var<T> relu(Var<T>);                                                \
    template Var<T> sigmoid(Var<T>);                                             \
    template Var<T> tanh(Var<T>);                                                \
    template Var<T> exp(Var<T>);                                                 \
    template Var<T> softmax_channel(Var<T>);                                     \
    template Var<T> add(Var<T>, Var<T>);                                         \
    template Var<T> sub(Var<T>, Var<T>);                                         \
    template Var<T> mul(Var<T>, Var<T>);                                         \
    template Var<T> scale(Var<T>, T);                                            \
    template Var<T> add_scalar(Var<T>, T);                                       \
    template Var<T> sum(Var<T>);                                                 \
    template Var<T> mean(Var<T>);                                                \
    template Var<T> concat_channels(std::span<const Var<T>>);                    \
    template Var<T> slice_channels(Var<T>, std::size_t, std::size_t);

ADAMAT_INSTANTIATE(float)
ADAMAT_INSTANTIATE(double)

#undef ADAMAT_INSTANTIATE

}  // namespace adamat::ops
