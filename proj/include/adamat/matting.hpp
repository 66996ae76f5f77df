#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adamat/tensor.hpp"

namespace adamat {

/// Row-major single-channel plane.
template <typename T>
class Grid {
   public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, T fill = T{}) : height_(height), width_(width), values_(height * width, fill) {}
    Grid(std::size_t height, std::size_t width, std::vector<T> values)
        : height_(height), width_(width), values_(std::move(values)) {
        if (values_.size() != height_ * width_) throw ShapeError("grid value count does not match extent");
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    T& at(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
    const T& at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    bool same_extent(std::size_t h, std::size_t w) const { return h == height_ && w == width_; }
    template <typename U>
    bool same_extent(const Grid<U>& other) const {
        return other.height() == height_ && other.width() == width_;
    }

    bool operator==(const Grid&) const = default;

   private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> values_;
};

/// Trimap labels. The numeric values double as class indices for the trimap head.
enum class Label : std::uint8_t { kBackground = 0, kUnknown = 1, kForeground = 2 };

/// Per-pixel opacity in [0, 1].
class AlphaMatte : public Grid<float> {
   public:
    using Grid<float>::Grid;
};

class Trimap : public Grid<Label> {
   public:
    using Grid<Label>::Grid;
    std::size_t count(Label l) const;
};

/// Binary plane; nonzero means set.
class Mask : public Grid<std::uint8_t> {
   public:
    using Grid<std::uint8_t>::Grid;
    std::size_t count() const;
};

/// Planar RGB image with values in [0, 1].
class ImageRGB {
   public:
    ImageRGB() = default;
    ImageRGB(std::size_t height, std::size_t width, float fill = 0.0f)
        : height_(height), width_(width), data_(3 * height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    float& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * height_ + y) * width_ + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * height_ + y) * width_ + x]; }
    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    template <typename G>
    bool same_extent(const G& g) const {
        return g.height() == height_ && g.width() == width_;
    }

    bool operator==(const ImageRGB&) const = default;

   private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

enum class StructuringElement { kDisk, kSquare };

/// I = alpha * F + (1 - alpha) * B per pixel and channel.
ImageRGB composite(const ImageRGB& fg, const ImageRGB& bg, const AlphaMatte& alpha);

/// Default tolerance for opaque alphas stored at 8 bits (half of one quantization step).
inline constexpr float kOpaqueEps = 1.0f / 512.0f;

/// alpha <= eps -> background, alpha >= 1 - eps -> foreground, otherwise unknown.
Trimap derive_optimal_trimap(const AlphaMatte& alpha, float eps = kOpaqueEps);

Mask dilate(const Mask& mask, int radius, StructuringElement element = StructuringElement::kDisk);
/// Erosion ignores pixels outside the image, so regions touching the border do not shrink from it.
Mask erode(const Mask& mask, int radius, StructuringElement element = StructuringElement::kDisk);

Mask label_mask(const Trimap& t, Label label);

/// Shrinks the foreground by r_fg and the background by r_bg; every other pixel becomes unknown.
Trimap degrade_trimap(const Trimap& t_opt, int r_fg, int r_bg, StructuringElement element = StructuringElement::kDisk);

/// Foreground -> 1, background -> 0, unknown -> predicted alpha.
AlphaMatte fuse_alpha(const AlphaMatte& alpha_pred, const Trimap& t_adapted);

}  // namespace adamat
