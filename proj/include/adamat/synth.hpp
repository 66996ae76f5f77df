#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <json.hpp>

#include "adamat/matting.hpp"

namespace adamat::synth {

using Rng = std::mt19937_64;
using Color = std::array<float, 3>;

enum class ForegroundKind { kDisc, kStrands };

struct DiscParams {
    float center_y = 32.0f;
    float center_x = 32.0f;
    float r_inner = 12.0f;
    float r_outer = 18.0f;
    Color color{0.8f, 0.3f, 0.2f};
    float texture = 0.05f;  // amplitude of low-frequency color variation
};

struct StrandParams {
    float root_y = 32.0f;
    float root_x = 32.0f;
    float body_radius = 6.0f;  // solid blob at the root; 0 disables it
    int count = 6;
    int segments = 6;
    float segment_length = 4.0f;
    float core_width = 1.0f;  // fully opaque half-width
    float falloff = 1.5f;     // linear ramp to transparent beyond the core
    Color color{0.9f, 0.8f, 0.5f};
};

struct Foreground {
    ImageRGB fg;
    AlphaMatte alpha;
    nlohmann::json params;
};

/// alpha = clamp((r_outer - dist) / (r_outer - r_inner), 0, 1).
Foreground gen_disc(std::size_t height, std::size_t width, const DiscParams& p, Rng& rng);
/// Anti-aliased random polylines radiating from a root point.
Foreground gen_strands(std::size_t height, std::size_t width, const StrandParams& p, Rng& rng);
/// Draws random parameters for `kind` scaled to the canvas and generates.
Foreground gen_foreground(ForegroundKind kind, std::size_t height, std::size_t width, Rng& rng);

struct BackgroundParams {
    bool hard = false;  // hues close to `reference`
    Color reference{0.5f, 0.5f, 0.5f};
    float noise = 0.03f;
};

ImageRGB gen_background(std::size_t height, std::size_t width, const BackgroundParams& p, Rng& rng);

struct SampleRecord {
    ImageRGB image;
    Trimap trimap_in;
    AlphaMatte alpha_gt;
    ImageRGB fg;
    ImageRGB bg;
    nlohmann::json meta = nlohmann::json::object();
};

struct DegradeRadii {
    int fg = 0;
    int bg = 0;
};

DegradeRadii random_radii(int d_min, int d_max, Rng& rng);

/// Composites and derives the input trimap as degrade(optimal(alpha), radii).
SampleRecord make_sample(const ImageRGB& fg, const AlphaMatte& alpha, const ImageRGB& bg, DegradeRadii radii);

/// Rounds every value to the nearest multiple of 1/255.
void quantize8(std::span<float> values);

struct AugmentConfig {
    float flip_prob = 0.5f;
    float scale_min = 0.75f;
    float scale_max = 1.5f;
    float rotation_deg = 45.0f;  // symmetric range
    std::size_t crop_min = 64;
    std::size_t crop_max = 160;
    std::size_t out_size = 64;

    void validate() const;
    static AugmentConfig disabled(std::size_t out_size);
};

/// Crops a window centered (clamped to the borders) on a uniformly chosen unknown pixel,
/// then resizes every plane to out_size. meta gains crop_center and crop_fallback.
SampleRecord crop_on_unknown(const SampleRecord& s, std::size_t crop_size, std::size_t out_size, Rng& rng);

/// Random flip, isotropic scale and rotation about the center. Continuous planes are
/// bilinear with replicated borders, the trimap takes the nearest label, and the image is
/// recomposited from the warped planes.
SampleRecord augment(const SampleRecord& s, const AugmentConfig& cfg, Rng& rng);

/// Deterministic warp used by augment; exposed for tests.
SampleRecord warp(const SampleRecord& s, bool flip, float scale, float angle_deg);

ImageRGB resize_bilinear(const ImageRGB& img, std::size_t height, std::size_t width);
AlphaMatte resize_bilinear(const AlphaMatte& a, std::size_t height, std::size_t width);
Trimap resize_nearest(const Trimap& t, std::size_t height, std::size_t width);

struct DatasetConfig {
    std::size_t count = 64;
    std::size_t size = 64;
    std::uint64_t seed = 1;
    float strand_fraction = 0.5f;
    float hard_fraction = 0.25f;
    int d_min = 3;
    int d_max = 15;

    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

/// Seed of sample `index`, derived from the dataset seed so samples are independent of generation order.
std::uint64_t sample_seed(std::uint64_t dataset_seed, std::size_t index);

/// Fully in-memory generation; planes are quantized to 8 bits before compositing.
SampleRecord generate_sample(const DatasetConfig& cfg, std::size_t index);

/// Writes NNNN_{image,fg,bg}.ppm, NNNN_{trimap,alpha}.pgm and manifest.json.
void write_dataset(const std::filesystem::path& dir, const DatasetConfig& cfg);
std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir);

}  // namespace adamat::synth
