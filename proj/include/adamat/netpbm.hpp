#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adamat/matting.hpp"

namespace adamat::io {

/// Raw binary NetPBM raster (P5 grayscale or P6 RGB). Samples are interleaved
/// per pixel and stored unscaled in [0, maxval]; maxval > 255 means 16-bit
/// big-endian samples on disk.
struct PnmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    int channels = 1;  // 1 (P5) or 3 (P6)
    int maxval = 255;
    std::vector<std::uint16_t> samples;

    bool operator==(const PnmImage&) const = default;
};

PnmImage decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const PnmImage& image);

PnmImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const PnmImage& image);

/// Gray levels of the three trimap labels.
inline constexpr std::uint16_t kTrimapBackground = 0;
inline constexpr std::uint16_t kTrimapUnknown = 128;
inline constexpr std::uint16_t kTrimapForeground = 255;

AlphaMatte alpha_from_pnm(const PnmImage& image);
PnmImage alpha_to_pnm(const AlphaMatte& alpha, int maxval = 255);

ImageRGB rgb_from_pnm(const PnmImage& image);
PnmImage rgb_to_pnm(const ImageRGB& image, int maxval = 255);

/// Accepts only the gray levels 0/128/255 unless `snap` maps every level to the nearest of them.
Trimap trimap_from_pnm(const PnmImage& image, bool snap = false);
PnmImage trimap_to_pnm(const Trimap& trimap);

AlphaMatte read_alpha(const std::filesystem::path& path);
ImageRGB read_rgb(const std::filesystem::path& path);
Trimap read_trimap(const std::filesystem::path& path, bool snap = false);

}  // namespace adamat::io
