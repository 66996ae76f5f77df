#include "adamat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "adamat/netpbm.hpp"

namespace adamat::synth {

namespace {

float uniform(Rng& rng, float lo, float hi) { return std::uniform_real_distribution<float>(lo, hi)(rng); }

Color hsv_to_rgb(float h, float s, float v) {
    h = h - std::floor(h);
    const float hh = h * 6.0f;
    const int sector = int(hh) % 6;
    const float f = hh - std::floor(hh);
    const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

float rgb_hue(const Color& c) {
    const float mx = std::max({c[0], c[1], c[2]}), mn = std::min({c[0], c[1], c[2]});
    const float d = mx - mn;
    if (d <= 0) return 0.0f;
    float h;
    if (mx == c[0]) {
        h = std::fmod((c[1] - c[2]) / d, 6.0f);
    } else if (mx == c[1]) {
        h = (c[2] - c[0]) / d + 2.0f;
    } else {
        h = (c[0] - c[1]) / d + 4.0f;
    }
    h /= 6.0f;
    return h < 0 ? h + 1.0f : h;
}

Color random_color(Rng& rng) {
    return hsv_to_rgb(uniform(rng, 0.0f, 1.0f), uniform(rng, 0.3f, 0.9f), uniform(rng, 0.4f, 0.95f));
}

nlohmann::json color_json(const Color& c) { return {c[0], c[1], c[2]}; }

// Low-frequency multiplicative texture in [1 - amp, 1 + amp].
struct Texture {
    float fy[2], fx[2], phase[2];
    float amp;

    Texture(Rng& rng, float amplitude, std::size_t extent) : amp(amplitude) {
        for (int k = 0; k < 2; ++k) {
            fy[k] = uniform(rng, -3.0f, 3.0f) * 2.0f * std::numbers::pi_v<float> / float(extent);
            fx[k] = uniform(rng, -3.0f, 3.0f) * 2.0f * std::numbers::pi_v<float> / float(extent);
            phase[k] = uniform(rng, 0.0f, 2.0f * std::numbers::pi_v<float>);
        }
    }
    float operator()(std::size_t y, std::size_t x) const {
        float s = 0;
        for (int k = 0; k < 2; ++k) s += std::sin(fy[k] * float(y) + fx[k] * float(x) + phase[k]);
        return 1.0f + amp * 0.5f * s;
    }
};

float segment_distance(float py, float px, float ay, float ax, float by, float bx) {
    const float dy = by - ay, dx = bx - ax;
    const float len2 = dy * dy + dx * dx;
    float t = len2 > 0 ? ((py - ay) * dy + (px - ax) * dx) / len2 : 0.0f;
    t = std::clamp(t, 0.0f, 1.0f);
    return std::hypot(py - (ay + t * dy), px - (ax + t * dx));
}

float sample_bilinear(std::span<const float> plane, std::size_t h, std::size_t w, float y, float x) {
    y = std::clamp(y, 0.0f, float(h - 1));
    x = std::clamp(x, 0.0f, float(w - 1));
    const std::size_t y0 = std::size_t(y), x0 = std::size_t(x);
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const float ty = y - float(y0), tx = x - float(x0);
    const float top = plane[y0 * w + x0] * (1 - tx) + plane[y0 * w + x1] * tx;
    const float bot = plane[y1 * w + x0] * (1 - tx) + plane[y1 * w + x1] * tx;
    return top * (1 - ty) + bot * ty;
}

// Source-coordinate maps: each returns the (y, x) to sample for an output pixel.
template <typename Map>
AlphaMatte remap(const AlphaMatte& a, std::size_t oh, std::size_t ow, Map map) {
    AlphaMatte out(oh, ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            const auto [sy, sx] = map(y, x);
            out.at(y, x) = sample_bilinear(a.values(), a.height(), a.width(), sy, sx);
        }
    }
    return out;
}

template <typename Map>
ImageRGB remap(const ImageRGB& img, std::size_t oh, std::size_t ow, Map map) {
    ImageRGB out(oh, ow);
    const std::size_t plane = img.height() * img.width();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto src = img.data().subspan(c * plane, plane);
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const auto [sy, sx] = map(y, x);
                out.at(c, y, x) = sample_bilinear(src, img.height(), img.width(), sy, sx);
            }
        }
    }
    return out;
}

template <typename Map>
Trimap remap_nearest(const Trimap& t, std::size_t oh, std::size_t ow, Map map) {
    Trimap out(oh, ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            const auto [sy, sx] = map(y, x);
            const long iy = std::clamp(std::lround(sy), 0L, long(t.height()) - 1);
            const long ix = std::clamp(std::lround(sx), 0L, long(t.width()) - 1);
            out.at(y, x) = t.at(std::size_t(iy), std::size_t(ix));
        }
    }
    return out;
}

template <typename G>
G crop_grid(const G& g, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    G out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, x) = g.at(top + y, left + x);
    return out;
}

ImageRGB crop_rgb(const ImageRGB& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    ImageRGB out(h, w);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
    return out;
}

std::string stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return buf;
}

}  // namespace

Foreground gen_disc(std::size_t height, std::size_t width, const DiscParams& p, Rng& rng) {
    if (!(p.r_inner > 0 && p.r_inner < p.r_outer)) throw std::invalid_argument("gen_disc: need 0 < r_inner < r_outer");
    if (p.r_outer > float(std::max(height, width))) throw std::invalid_argument("gen_disc: r_outer exceeds the canvas");
    Foreground out{ImageRGB(height, width), AlphaMatte(height, width), {}};
    const Texture tex(rng, p.texture, std::max(height, width));
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const float d = std::hypot(float(y) - p.center_y, float(x) - p.center_x);
            out.alpha.at(y, x) = std::clamp((p.r_outer - d) / (p.r_outer - p.r_inner), 0.0f, 1.0f);
            const float m = tex(y, x);
            for (std::size_t c = 0; c < 3; ++c) out.fg.at(c, y, x) = std::clamp(p.color[c] * m, 0.0f, 1.0f);
        }
    }
    out.params = {{"kind", "disc"},       {"center", {p.center_y, p.center_x}}, {"r_inner", p.r_inner},
                  {"r_outer", p.r_outer}, {"color", color_json(p.color)},      {"texture", p.texture}};
    return out;
}

Foreground gen_strands(std::size_t height, std::size_t width, const StrandParams& p, Rng& rng) {
    if (p.count < 0 || p.segments < 1 || p.falloff <= 0 || p.core_width < 0) {
        throw std::invalid_argument("gen_strands: invalid parameters");
    }
    struct Segment {
        float ay, ax, by, bx;
    };
    std::vector<Segment> segs;
    std::normal_distribution<float> turn(0.0f, 0.35f);
    for (int s = 0; s < p.count; ++s) {
        float ang = uniform(rng, 0.0f, 2.0f * std::numbers::pi_v<float>);
        float y = p.root_y, x = p.root_x;
        for (int k = 0; k < p.segments; ++k) {
            ang += turn(rng);
            const float ny = y + p.segment_length * std::sin(ang), nx = x + p.segment_length * std::cos(ang);
            segs.push_back({y, x, ny, nx});
            y = ny;
            x = nx;
        }
    }
    Foreground out{ImageRGB(height, width), AlphaMatte(height, width), {}};
    const Texture tex(rng, 0.1f, std::max(height, width));
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const float fy = float(y), fx = float(x);
            float a = 0.0f;
            if (p.body_radius > 0) {
                const float d = std::hypot(fy - p.root_y, fx - p.root_x);
                a = std::clamp((p.body_radius + p.falloff - d) / p.falloff, 0.0f, 1.0f);
            }
            for (const auto& s : segs) {
                if (a >= 1.0f) break;
                const float d = segment_distance(fy, fx, s.ay, s.ax, s.by, s.bx);
                a = std::max(a, std::clamp((p.core_width + p.falloff - d) / p.falloff, 0.0f, 1.0f));
            }
            out.alpha.at(y, x) = a;
            const float m = tex(y, x);
            for (std::size_t c = 0; c < 3; ++c) out.fg.at(c, y, x) = std::clamp(p.color[c] * m, 0.0f, 1.0f);
        }
    }
    out.params = {{"kind", "strands"},
                  {"root", {p.root_y, p.root_x}},
                  {"body_radius", p.body_radius},
                  {"count", p.count},
                  {"segments", p.segments},
                  {"segment_length", p.segment_length},
                  {"core_width", p.core_width},
                  {"falloff", p.falloff},
                  {"color", color_json(p.color)}};
    return out;
}

Foreground gen_foreground(ForegroundKind kind, std::size_t height, std::size_t width, Rng& rng) {
    const float s = float(std::min(height, width));
    if (kind == ForegroundKind::kDisc) {
        DiscParams p;
        p.r_outer = uniform(rng, 0.2f * s, 0.4f * s);
        p.r_inner = p.r_outer - uniform(rng, 0.05f * s, 0.15f * s);
        p.center_y = uniform(rng, 0.35f, 0.65f) * float(height);
        p.center_x = uniform(rng, 0.35f, 0.65f) * float(width);
        p.color = random_color(rng);
        p.texture = uniform(rng, 0.0f, 0.15f);
        return gen_disc(height, width, p, rng);
    }
    StrandParams p;
    p.root_y = uniform(rng, 0.35f, 0.65f) * float(height);
    p.root_x = uniform(rng, 0.35f, 0.65f) * float(width);
    p.body_radius = uniform(rng, 0.08f * s, 0.16f * s);
    p.count = std::uniform_int_distribution<int>(4, 9)(rng);
    p.segments = std::uniform_int_distribution<int>(5, 8)(rng);
    p.segment_length = uniform(rng, 0.05f * s, 0.09f * s);
    p.core_width = uniform(rng, 0.3f, 1.0f);
    p.falloff = uniform(rng, 0.8f, 2.0f);
    p.color = random_color(rng);
    return gen_strands(height, width, p, rng);
}

ImageRGB gen_background(std::size_t height, std::size_t width, const BackgroundParams& p, Rng& rng) {
    Color c0, c1;
    if (p.hard) {
        const float hue = rgb_hue(p.reference);
        c0 = hsv_to_rgb(hue + uniform(rng, -0.05f, 0.05f), uniform(rng, 0.3f, 0.9f), uniform(rng, 0.3f, 0.95f));
        c1 = hsv_to_rgb(hue + uniform(rng, -0.05f, 0.05f), uniform(rng, 0.3f, 0.9f), uniform(rng, 0.3f, 0.95f));
    } else {
        c0 = random_color(rng);
        c1 = random_color(rng);
    }
    const float theta = uniform(rng, 0.0f, 2.0f * std::numbers::pi_v<float>);
    const float cy = float(height - 1) / 2, cx = float(width - 1) / 2;
    const float extent = float(std::max(height, width));
    const Texture tex(rng, 4.0f * p.noise, std::max(height, width));
    std::normal_distribution<float> grain(0.0f, p.noise > 0 ? p.noise : 1.0f);
    ImageRGB out(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const float t = std::clamp(
                ((float(y) - cy) * std::sin(theta) + (float(x) - cx) * std::cos(theta)) / extent + 0.5f, 0.0f, 1.0f);
            const float m = tex(y, x);
            for (std::size_t c = 0; c < 3; ++c) {
                const float g = p.noise > 0 ? grain(rng) : 0.0f;
                out.at(c, y, x) = std::clamp((c0[c] * (1 - t) + c1[c] * t) * m + g, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

DegradeRadii random_radii(int d_min, int d_max, Rng& rng) {
    if (d_min < 0 || d_min > d_max) throw std::invalid_argument("random_radii: need 0 <= d_min <= d_max");
    std::uniform_int_distribution<int> d(d_min, d_max);
    const int fg = d(rng);
    return {fg, d(rng)};
}

SampleRecord make_sample(const ImageRGB& fg, const AlphaMatte& alpha, const ImageRGB& bg, DegradeRadii radii) {
    SampleRecord s;
    s.image = composite(fg, bg, alpha);
    s.trimap_in = degrade_trimap(derive_optimal_trimap(alpha), radii.fg, radii.bg);
    s.alpha_gt = alpha;
    s.fg = fg;
    s.bg = bg;
    s.meta["radii"] = {radii.fg, radii.bg};
    return s;
}

void quantize8(std::span<float> values) {
    for (auto& v : values) v = std::nearbyint(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

void AugmentConfig::validate() const {
    if (!(flip_prob >= 0 && flip_prob <= 1)) throw std::invalid_argument("augment: flip_prob must be in [0, 1]");
    if (!(scale_min > 0 && scale_min <= scale_max)) throw std::invalid_argument("augment: need 0 < scale_min <= scale_max");
    if (!(rotation_deg >= 0 && rotation_deg <= 180)) throw std::invalid_argument("augment: rotation_deg must be in [0, 180]");
    if (crop_min == 0 || crop_min > crop_max) throw std::invalid_argument("augment: need 0 < crop_min <= crop_max");
    if (out_size == 0) throw std::invalid_argument("augment: out_size must be positive");
}

AugmentConfig AugmentConfig::disabled(std::size_t out_size) {
    AugmentConfig c;
    c.flip_prob = 0;
    c.scale_min = c.scale_max = 1;
    c.rotation_deg = 0;
    c.crop_min = c.crop_max = c.out_size = out_size;
    return c;
}

ImageRGB resize_bilinear(const ImageRGB& img, std::size_t height, std::size_t width) {
    const float sy = float(img.height()) / float(height), sx = float(img.width()) / float(width);
    return remap(img, height, width,
                 [&](std::size_t y, std::size_t x) { return std::pair{(float(y) + 0.5f) * sy - 0.5f, (float(x) + 0.5f) * sx - 0.5f}; });
}

AlphaMatte resize_bilinear(const AlphaMatte& a, std::size_t height, std::size_t width) {
    const float sy = float(a.height()) / float(height), sx = float(a.width()) / float(width);
    return remap(a, height, width,
                 [&](std::size_t y, std::size_t x) { return std::pair{(float(y) + 0.5f) * sy - 0.5f, (float(x) + 0.5f) * sx - 0.5f}; });
}

Trimap resize_nearest(const Trimap& t, std::size_t height, std::size_t width) {
    Trimap out(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = std::min(t.height() - 1, (2 * y + 1) * t.height() / (2 * height));
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t sx = std::min(t.width() - 1, (2 * x + 1) * t.width() / (2 * width));
            out.at(y, x) = t.at(sy, sx);
        }
    }
    return out;
}

SampleRecord crop_on_unknown(const SampleRecord& s, std::size_t crop_size, std::size_t out_size, Rng& rng) {
    const std::size_t h = s.alpha_gt.height(), w = s.alpha_gt.width();
    if (crop_size == 0 || crop_size > h || crop_size > w) throw std::invalid_argument("crop_on_unknown: crop exceeds image");
    if (out_size == 0) throw std::invalid_argument("crop_on_unknown: out_size must be positive");
    std::vector<std::size_t> unknown;
    for (std::size_t i = 0; i < s.trimap_in.size(); ++i) {
        if (s.trimap_in[i] == Label::kUnknown) unknown.push_back(i);
    }
    std::size_t cy = h / 2, cx = w / 2;
    const bool fallback = unknown.empty();
    if (!fallback) {
        const std::size_t pick = unknown[std::uniform_int_distribution<std::size_t>(0, unknown.size() - 1)(rng)];
        cy = pick / w;
        cx = pick % w;
    }
    const std::size_t top = std::size_t(std::clamp<long>(long(cy) - long(crop_size / 2), 0, long(h - crop_size)));
    const std::size_t left = std::size_t(std::clamp<long>(long(cx) - long(crop_size / 2), 0, long(w - crop_size)));

    SampleRecord out;
    out.meta = s.meta;
    out.meta["crop_center"] = {cy, cx};
    out.meta["crop_window"] = {top, left, crop_size};
    out.meta["crop_fallback"] = fallback;
    out.alpha_gt = crop_grid(s.alpha_gt, top, left, crop_size, crop_size);
    out.trimap_in = crop_grid(s.trimap_in, top, left, crop_size, crop_size);
    out.fg = crop_rgb(s.fg, top, left, crop_size, crop_size);
    out.bg = crop_rgb(s.bg, top, left, crop_size, crop_size);
    if (out_size == crop_size) {
        out.image = crop_rgb(s.image, top, left, crop_size, crop_size);
        return out;
    }
    out.alpha_gt = resize_bilinear(out.alpha_gt, out_size, out_size);
    out.trimap_in = resize_nearest(out.trimap_in, out_size, out_size);
    out.fg = resize_bilinear(out.fg, out_size, out_size);
    out.bg = resize_bilinear(out.bg, out_size, out_size);
    out.image = composite(out.fg, out.bg, out.alpha_gt);
    return out;
}

SampleRecord warp(const SampleRecord& s, bool flip, float scale, float angle_deg) {
    const std::size_t h = s.alpha_gt.height(), w = s.alpha_gt.width();
    const float cy = float(h - 1) / 2, cx = float(w - 1) / 2;
    const float th = angle_deg * std::numbers::pi_v<float> / 180.0f;
    const float c = std::cos(th), sn = std::sin(th);
    // Inverse of: flip, then rotate and scale about the center.
    auto map = [&](std::size_t y, std::size_t x) {
        const float vy = float(y) - cy, vx = float(x) - cx;
        const float uy = (c * vy + sn * vx) / scale, ux = (-sn * vy + c * vx) / scale;
        const float sy = cy + uy;
        const float sx = flip ? cx - ux : cx + ux;
        return std::pair{sy, sx};
    };
    SampleRecord out;
    out.meta = s.meta;
    out.alpha_gt = remap(s.alpha_gt, h, w, map);
    out.fg = remap(s.fg, h, w, map);
    out.bg = remap(s.bg, h, w, map);
    out.trimap_in = remap_nearest(s.trimap_in, h, w, map);
    out.image = composite(out.fg, out.bg, out.alpha_gt);
    return out;
}

SampleRecord augment(const SampleRecord& s, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const bool flip = std::bernoulli_distribution(cfg.flip_prob)(rng);
    const float scale = cfg.scale_min == cfg.scale_max ? cfg.scale_min : uniform(rng, cfg.scale_min, cfg.scale_max);
    const float angle = cfg.rotation_deg == 0 ? 0.0f : uniform(rng, -cfg.rotation_deg, cfg.rotation_deg);
    if (!flip && scale == 1.0f && angle == 0.0f) return s;
    SampleRecord out = warp(s, flip, scale, angle);
    out.meta["augment"] = {{"flip", flip}, {"scale", scale}, {"angle", angle}};
    return out;
}

nlohmann::json DatasetConfig::to_json() const {
    return {{"count", count},
            {"size", size},
            {"seed", seed},
            {"strand_fraction", strand_fraction},
            {"hard_fraction", hard_fraction},
            {"d_min", d_min},
            {"d_max", d_max}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.count = j.value("count", c.count);
    c.size = j.value("size", c.size);
    c.seed = j.value("seed", c.seed);
    c.strand_fraction = j.value("strand_fraction", c.strand_fraction);
    c.hard_fraction = j.value("hard_fraction", c.hard_fraction);
    c.d_min = j.value("d_min", c.d_min);
    c.d_max = j.value("d_max", c.d_max);
    return c;
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::size_t index) {
    std::seed_seq seq{std::uint32_t(dataset_seed), std::uint32_t(dataset_seed >> 32), std::uint32_t(index),
                      std::uint32_t(std::uint64_t(index) >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (std::uint64_t(out[0]) << 32) | out[1];
}

SampleRecord generate_sample(const DatasetConfig& cfg, std::size_t index) {
    if (cfg.size < 8) throw std::invalid_argument("dataset: size must be at least 8");
    const std::uint64_t seed = sample_seed(cfg.seed, index);
    Rng rng(seed);
    const bool strands = std::bernoulli_distribution(cfg.strand_fraction)(rng);
    Foreground fg = gen_foreground(strands ? ForegroundKind::kStrands : ForegroundKind::kDisc, cfg.size, cfg.size, rng);
    BackgroundParams bp;
    bp.hard = std::bernoulli_distribution(cfg.hard_fraction)(rng);
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0;
        for (std::size_t i = 0; i < cfg.size * cfg.size; ++i) sum += fg.fg.data()[c * cfg.size * cfg.size + i];
        bp.reference[c] = float(sum / double(cfg.size * cfg.size));
    }
    ImageRGB bg = gen_background(cfg.size, cfg.size, bp, rng);
    quantize8(fg.fg.data());
    quantize8(fg.alpha.values());
    quantize8(bg.data());
    const DegradeRadii radii = random_radii(cfg.d_min, cfg.d_max, rng);
    SampleRecord s = make_sample(fg.fg, fg.alpha, bg, radii);
    quantize8(s.image.data());
    s.meta["index"] = index;
    s.meta["seed"] = seed;
    s.meta["foreground"] = fg.params;
    s.meta["background"] = {{"hard", bp.hard}, {"noise", bp.noise}};
    return s;
}

void write_dataset(const std::filesystem::path& dir, const DatasetConfig& cfg) {
    std::filesystem::create_directories(dir);
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.count; ++i) {
        const SampleRecord s = generate_sample(cfg, i);
        const std::string p = stem(i);
        io::write_pnm(dir / (p + "_image.ppm"), io::rgb_to_pnm(s.image));
        io::write_pnm(dir / (p + "_fg.ppm"), io::rgb_to_pnm(s.fg));
        io::write_pnm(dir / (p + "_bg.ppm"), io::rgb_to_pnm(s.bg));
        io::write_pnm(dir / (p + "_alpha.pgm"), io::alpha_to_pnm(s.alpha_gt));
        io::write_pnm(dir / (p + "_trimap.pgm"), io::trimap_to_pnm(s.trimap_in));
        samples.push_back(s.meta);
    }
    const nlohmann::json manifest = {{"format", "adamat-synth"}, {"version", 1}, {"config", cfg.to_json()}, {"samples", samples}};
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw DataError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << '\n';
}

std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw DataError("dataset manifest not found in " + dir.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed dataset manifest: " + std::string(e.what()));
    }
    const auto cfg = DatasetConfig::from_json(manifest.at("config"));
    const auto& metas = manifest.at("samples");
    std::vector<SampleRecord> out;
    out.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        const std::string p = stem(i);
        SampleRecord s;
        s.image = io::read_rgb(dir / (p + "_image.ppm"));
        s.fg = io::read_rgb(dir / (p + "_fg.ppm"));
        s.bg = io::read_rgb(dir / (p + "_bg.ppm"));
        s.alpha_gt = io::read_alpha(dir / (p + "_alpha.pgm"));
        s.trimap_in = io::read_trimap(dir / (p + "_trimap.pgm"));
        if (!s.image.same_extent(s.alpha_gt) || !s.fg.same_extent(s.alpha_gt) || !s.bg.same_extent(s.alpha_gt) ||
            !s.trimap_in.same_extent(s.alpha_gt)) {
            throw DataError("sample " + p + ": plane extents differ");
        }
        if (i < metas.size()) s.meta = metas[i];
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace adamat::synth
