#include "adamat/matting.hpp"

#include <algorithm>
#include <utility>

namespace adamat {

std::size_t Trimap::count(Label l) const {
    return std::size_t(std::count(values().begin(), values().end(), l));
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto v : values()) n += v ? 1 : 0;
    return n;
}

namespace {

std::string extent_str(std::size_t h, std::size_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
}

std::vector<std::pair<int, int>> element_offsets(int radius, StructuringElement element) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (element == StructuringElement::kDisk && dy * dy + dx * dx > radius * radius) continue;
            offsets.emplace_back(dy, dx);
        }
    }
    return offsets;
}

}  // namespace

ImageRGB composite(const ImageRGB& fg, const ImageRGB& bg, const AlphaMatte& alpha) {
    if (!fg.same_extent(alpha) || !bg.same_extent(alpha)) {
        throw ShapeError("composite: extents differ (fg " + extent_str(fg.height(), fg.width()) + ", bg " +
                         extent_str(bg.height(), bg.width()) + ", alpha " +
                         extent_str(alpha.height(), alpha.width()) + ")");
    }
    ImageRGB out(alpha.height(), alpha.width());
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < alpha.height(); ++y) {
            for (std::size_t x = 0; x < alpha.width(); ++x) {
                const float a = alpha.at(y, x);
                const float v = a * fg.at(c, y, x) + (1.0f - a) * bg.at(c, y, x);
                out.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Trimap derive_optimal_trimap(const AlphaMatte& alpha, float eps) {
    if (!(eps >= 0.0f && eps < 0.5f)) throw std::invalid_argument("derive_optimal_trimap: eps must be in [0, 0.5)");
    Trimap t(alpha.height(), alpha.width(), Label::kUnknown);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const float a = alpha[i];
        if (a <= eps) {
            t[i] = Label::kBackground;
        } else if (a >= 1.0f - eps) {
            t[i] = Label::kForeground;
        }
    }
    return t;
}

Mask dilate(const Mask& mask, int radius, StructuringElement element) {
    if (radius < 0) throw std::invalid_argument("dilate: radius must be >= 0");
    if (radius == 0) return mask;
    const auto offsets = element_offsets(radius, element);
    const int h = int(mask.height()), w = int(mask.width());
    Mask out(mask.height(), mask.width(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(std::size_t(y), std::size_t(x))) continue;
            for (auto [dy, dx] : offsets) {
                const int yy = y + dy, xx = x + dx;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w) out.at(std::size_t(yy), std::size_t(xx)) = 1;
            }
        }
    }
    return out;
}

Mask erode(const Mask& mask, int radius, StructuringElement element) {
    if (radius < 0) throw std::invalid_argument("erode: radius must be >= 0");
    if (radius == 0) return mask;
    const auto offsets = element_offsets(radius, element);
    const int h = int(mask.height()), w = int(mask.width());
    Mask out(mask.height(), mask.width(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(std::size_t(y), std::size_t(x))) continue;
            bool keep = true;
            for (auto [dy, dx] : offsets) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                if (!mask.at(std::size_t(yy), std::size_t(xx))) {
                    keep = false;
                    break;
                }
            }
            out.at(std::size_t(y), std::size_t(x)) = keep ? 1 : 0;
        }
    }
    return out;
}

Mask label_mask(const Trimap& t, Label label) {
    Mask m(t.height(), t.width(), 0);
    for (std::size_t i = 0; i < t.size(); ++i) m[i] = t[i] == label ? 1 : 0;
    return m;
}

Trimap degrade_trimap(const Trimap& t_opt, int r_fg, int r_bg, StructuringElement element) {
    if (r_fg < 0 || r_bg < 0) throw std::invalid_argument("degrade_trimap: radii must be >= 0");
    const Mask fg = erode(label_mask(t_opt, Label::kForeground), r_fg, element);
    const Mask bg = erode(label_mask(t_opt, Label::kBackground), r_bg, element);
    Trimap out(t_opt.height(), t_opt.width(), Label::kUnknown);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (fg[i]) {
            out[i] = Label::kForeground;
        } else if (bg[i]) {
            out[i] = Label::kBackground;
        }
    }
    return out;
}

AlphaMatte fuse_alpha(const AlphaMatte& alpha_pred, const Trimap& t_adapted) {
    if (!alpha_pred.same_extent(t_adapted)) {
        throw ShapeError("fuse_alpha: alpha " + extent_str(alpha_pred.height(), alpha_pred.width()) + " vs trimap " +
                         extent_str(t_adapted.height(), t_adapted.width()));
    }
    AlphaMatte out = alpha_pred;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (t_adapted[i] == Label::kForeground) {
            out[i] = 1.0f;
        } else if (t_adapted[i] == Label::kBackground) {
            out[i] = 0.0f;
        }
    }
    return out;
}

}  // namespace adamat
