#include <cmath>

#include "adamat/ops.hpp"

namespace adamat::ops {

template <typename T>
Var<T> batch_norm2d(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, BatchNormOptions opt) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("batch_norm2d: input must be [N,C,H,W], got " + shape_str(s));
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3], m = n * hw;
    const Shape cs{c};
    if (gamma.shape() != cs || beta.shape() != cs) throw ShapeError("batch_norm2d: gamma/beta must be [C]");
    if (state.running_mean.shape() != cs || state.running_var.shape() != cs) {
        throw ShapeError("batch_norm2d: running statistics must be [C]");
    }
    const Tensor<T>& xv = x.value();
    const Tensor<T>& gv = gamma.value();
    const Tensor<T>& bv = beta.value();

    std::vector<T> xhat(xv.numel());
    std::vector<T> inv_std(c);
    Tensor<T> out(s);
    for (std::size_t ch = 0; ch < c; ++ch) {
        T mu, var;
        if (opt.train) {
            T acc = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv.ptr() + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) acc += p[i];
            }
            mu = acc / T(m);
            T sq = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv.ptr() + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) sq += (p[i] - mu) * (p[i] - mu);
            }
            var = sq / T(m);
            const T mom = T(opt.momentum);
            const T unbiased = m > 1 ? var * T(m) / T(m - 1) : var;
            state.running_mean[ch] = (T(1) - mom) * state.running_mean[ch] + mom * mu;
            state.running_var[ch] = (T(1) - mom) * state.running_var[ch] + mom * unbiased;
        } else {
            mu = state.running_mean[ch];
            var = state.running_var[ch];
        }
        const T is = T(1) / std::sqrt(var + T(opt.eps));
        inv_std[ch] = is;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const T xh = (xv[off + i] - mu) * is;
                xhat[off + i] = xh;
                out[off + i] = gv[ch] * xh + bv[ch];
            }
        }
    }

    const std::size_t xid = x.id(), gid = gamma.id(), bid = beta.id();
    const bool train = opt.train;
    Var<T> inputs[] = {x, gamma, beta};
    return x.tape().record(
        std::move(out), inputs,
        [xid, gid, bid, n, c, hw, m, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
            Tape<T>& tape, const Tensor<T>& dy, const Tensor<T>&) {
            const Tensor<T>& gv = tape.value(gid);
            const bool need_x = tape.requires_grad(xid);
            for (std::size_t ch = 0; ch < c; ++ch) {
                T sum_dy = 0, sum_dy_xh = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t off = (b * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum_dy += dy[off + i];
                        sum_dy_xh += dy[off + i] * xhat[off + i];
                    }
                }
                if (tape.requires_grad(gid)) tape.grad_buffer(gid)[ch] += sum_dy_xh;
                if (tape.requires_grad(bid)) tape.grad_buffer(bid)[ch] += sum_dy;
                if (!need_x) continue;
                Tensor<T>& dx = tape.grad_buffer(xid);
                const T k = gv[ch] * inv_std[ch];
                const T mean_dy = sum_dy / T(m), mean_dy_xh = sum_dy_xh / T(m);
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t off = (b * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        if (train) {
                            dx[off + i] += k * (dy[off + i] - mean_dy - xhat[off + i] * mean_dy_xh);
                        } else {
                            dx[off + i] += k * dy[off + i];
                        }
                    }
                }
            }
        },
        "batch_norm2d");
}

template <typename T>
Var<T> cross_entropy_channel(Var<T> logits, std::span<const std::uint8_t> labels) {
    const Shape& s = logits.shape();
    if (s.size() < 2) throw ShapeError("cross_entropy_channel: logits need rank >= 2");
    const std::size_t n = s[0], c = s[1], inner = shape_numel(s) / (n * c), m = n * inner;
    if (labels.size() != m) {
        throw ShapeError("cross_entropy_channel: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " positions");
    }
    for (auto l : labels) {
        if (l >= c) throw DataError("cross_entropy_channel: label " + std::to_string(l) + " outside [0, C)");
    }
    const Tensor<T>& lv = logits.value();
    std::vector<T> prob(lv.numel());
    T total = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = b * c * inner + i;
            T mx = lv[base];
            for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, lv[base + k * inner]);
            T z = 0;
            for (std::size_t k = 0; k < c; ++k) z += std::exp(lv[base + k * inner] - mx);
            const T lse = mx + std::log(z);
            for (std::size_t k = 0; k < c; ++k) prob[base + k * inner] = std::exp(lv[base + k * inner] - lse);
            total += lse - lv[base + labels[b * inner + i] * inner];
        }
    }
    const std::size_t lid = logits.id();
    std::vector<std::uint8_t> lab(labels.begin(), labels.end());
    Var<T> inputs[] = {logits};
    return logits.tape().record(
        Tensor<T>::scalar(total / T(m)), inputs,
        [lid, n, c, inner, m, prob = std::move(prob), lab = std::move(lab)](Tape<T>& tape, const Tensor<T>& dy,
                                                                             const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(lid);
            const T g = dy[0] / T(m);
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = b * c * inner + i;
                    const std::size_t label = lab[b * inner + i];
                    for (std::size_t k = 0; k < c; ++k) {
                        dx[base + k * inner] += g * (prob[base + k * inner] - (k == label ? T(1) : T(0)));
                    }
                }
            }
        },
        "cross_entropy_channel");
}

template <typename T>
Var<T> masked_l1_mean(Var<T> pred, const Tensor<T>& target, std::span<const std::uint8_t> mask) {
    const Tensor<T>& pv = pred.value();
    if (target.shape() != pv.shape()) {
        throw ShapeError("masked_l1_mean: target " + shape_str(target.shape()) + " vs prediction " +
                         shape_str(pv.shape()));
    }
    if (mask.size() != pv.numel()) throw ShapeError("masked_l1_mean: mask extent mismatch");
    std::size_t count = 0;
    for (auto v : mask) count += v ? 1 : 0;

    // 0: negative, 1: zero, 2: positive residual
    std::vector<std::uint8_t> sign(pv.numel(), 1);
    for (std::size_t i = 0; i < pv.numel(); ++i) {
        if (!mask[i]) continue;
        const T d = pv[i] - target[i];
        sign[i] = d > T(0) ? 2 : (d < T(0) ? 0 : 1);
    }
    pred.tape().decide(sign);
    T total = 0;
    for (std::size_t i = 0; i < pv.numel(); ++i) {
        if (mask[i]) total += T(int(sign[i]) - 1) * (pv[i] - target[i]);
    }
    const T inv = count ? T(1) / T(count) : T(0);
    const std::size_t pid = pred.id();
    std::vector<std::uint8_t> msk(mask.begin(), mask.end());
    Var<T> inputs[] = {pred};
    return pred.tape().record(
        Tensor<T>::scalar(total * inv), inputs,
        [pid, inv, sign = std::move(sign), msk = std::move(msk)](Tape<T>& tape, const Tensor<T>& dy,
                                                                 const Tensor<T>&) {
            Tensor<T>& dx = tape.grad_buffer(pid);
            const T g = dy[0] * inv;
            for (std::size_t i = 0; i < msk.size(); ++i) {
                if (msk[i]) dx[i] += g * T(int(sign[i]) - 1);
            }
        },
        "masked_l1_mean");
}

#define ADAMAT_INSTANTIATE(T)                                                                               \
    template Var<T> batch_norm2d(Var<T>, Var<T>, Var<T>, BatchNormState<T>&, BatchNormOptions);           \
    template Var<T> cross_entropy_channel(Var<T>, std::span<const std::uint8_t>);                          \
    template Var<T> masked_l1_mean(Var<T>, const Tensor<T>&, std::span<const std::uint8_t>);

ADAMAT_INSTANTIATE(float)
ADAMAT_INSTANTIATE(double)

#undef ADAMAT_INSTANTIATE

}  // namespace adamat::ops
