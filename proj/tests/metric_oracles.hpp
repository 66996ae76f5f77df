#pragma once

// Direct-loop reference implementations of the evaluation metrics.

#include <cmath>
#include <vector>

#include "adamat/matting.hpp"

namespace oracle {

inline double sad(const adamat::AlphaMatte& p, const adamat::AlphaMatte& g, const adamat::Mask& m) {
    double s = 0;
    for (std::size_t y = 0; y < p.height(); ++y)
        for (std::size_t x = 0; x < p.width(); ++x)
            if (m.at(y, x)) s += std::abs(double(p.at(y, x)) - double(g.at(y, x)));
    return s;
}

inline double mse(const adamat::AlphaMatte& p, const adamat::AlphaMatte& g, const adamat::Mask& m) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < p.height(); ++y)
        for (std::size_t x = 0; x < p.width(); ++x)
            if (m.at(y, x)) {
                const double d = double(p.at(y, x)) - double(g.at(y, x));
                s += d * d;
                ++n;
            }
    return n ? s / double(n) : 0.0;
}

/// Gradient magnitude by explicit 2-D correlation with full (non-separable) kernels.
inline std::vector<double> grad_mag(const adamat::AlphaMatte& a, double sigma) {
    const int r = int(std::ceil(3 * sigma));
    const int size = 2 * r + 1;
    std::vector<double> kx(size * size), ky(size * size);
    double norm = 0;
    for (int v = -r; v <= r; ++v) {
        for (int u = -r; u <= r; ++u) {
            const double g = std::exp(-(double(u) * u + double(v) * v) / (2 * sigma * sigma));
            kx[(v + r) * size + (u + r)] = -u * g;
            ky[(u + r) * size + (v + r)] = -u * g;  // transpose: derivative along y
            norm += u * g * u * g;
        }
    }
    norm = std::sqrt(norm);
    for (auto& k : kx) k /= norm;
    for (auto& k : ky) k /= norm;
    const int h = int(a.height()), w = int(a.width());
    auto px = [&](int y, int x) {
        y = y < 0 ? 0 : (y >= h ? h - 1 : y);
        x = x < 0 ? 0 : (x >= w ? w - 1 : x);
        return double(a.at(y, x));
    };
    std::vector<double> out(h * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0, gy = 0;
            for (int v = -r; v <= r; ++v) {
                for (int u = -r; u <= r; ++u) {
                    gx += kx[(v + r) * size + (u + r)] * px(y + v, x + u);
                    gy += ky[(v + r) * size + (u + r)] * px(y + v, x + u);
                }
            }
            out[y * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

inline double grad(const adamat::AlphaMatte& p, const adamat::AlphaMatte& g, const adamat::Mask& m, double sigma) {
    const auto mp = grad_mag(p, sigma), mg = grad_mag(g, sigma);
    double s = 0;
    for (std::size_t i = 0; i < mp.size(); ++i)
        if (m[i]) s += (mp[i] - mg[i]) * (mp[i] - mg[i]);
    return s;
}

inline double accuracy(const adamat::Trimap& p, const adamat::Trimap& g) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == g[i];
    return double(hit) / double(p.size());
}

inline double miou(const adamat::Trimap& p, const adamat::Trimap& g) {
    double total = 0;
    int present = 0;
    for (auto label : {adamat::Label::kBackground, adamat::Label::kUnknown, adamat::Label::kForeground}) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            inter += p[i] == label && g[i] == label;
            uni += p[i] == label || g[i] == label;
        }
        if (uni) {
            total += double(inter) / double(uni);
            ++present;
        }
    }
    return total / present;
}

}  // namespace oracle
