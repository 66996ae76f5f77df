#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adamat/matting.hpp"

namespace adamat::metrics {

enum class Region { kUnknown, kWhole };

Region parse_region(const std::string& name);
std::string region_name(Region r);

/// Pixels the alpha metrics are evaluated on: the trimap's unknown label, or everything.
Mask region_mask(const Trimap& trimap, Region region);

/// A metric value together with the number of region pixels it covers.
struct Measure {
    double value = 0;
    std::size_t pixels = 0;

    bool empty() const { return pixels == 0; }
};

/// Sum of |pred - gt| over the region.
Measure sad(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region);
/// Mean of (pred - gt)^2 over the region.
Measure mse(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region);

inline constexpr double kGradSigma = 1.4;

/// First-derivative-of-Gaussian taps on [-r, r] with r = ceil(3 sigma): the derivative factor
/// -x exp(-x^2 / 2 sigma^2) and the smoothing factor exp(-x^2 / 2 sigma^2). The 2-D kernel
/// d(x) g(y) has unit L2 norm.
struct GaussDerivKernel {
    int radius = 0;
    std::vector<double> deriv;
    std::vector<double> smooth;
};
GaussDerivKernel gauss_deriv_kernel(double sigma);

/// |grad| of an image filtered with the Gaussian-derivative pair, replicate borders.
Grid<double> gradient_magnitude(const AlphaMatte& a, double sigma);

/// Sum over the region of (|grad pred| - |grad gt|)^2.
Measure grad_error(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region, double sigma = kGradSigma);

/// confusion[gt][pred] pixel counts.
using Confusion = std::array<std::array<std::size_t, 3>, 3>;
Confusion confusion(const Trimap& pred, const Trimap& gt);

double trimap_accuracy(const Trimap& pred, const Trimap& gt);
/// Mean IoU over the classes that occur in pred or gt.
double trimap_miou(const Trimap& pred, const Trimap& gt);

struct MetricReport {
    Region region = Region::kUnknown;
    std::size_t region_pixels = 0;
    std::size_t total_pixels = 0;
    double sad = 0;
    double mse = 0;
    double grad = 0;
    std::optional<double> trimap_acc;
    std::optional<double> trimap_miou;

    double sad_k() const { return sad / 1000.0; }
    double grad_k() const { return grad / 1000.0; }
    bool empty_region() const { return region_pixels == 0; }

    nlohmann::json to_json() const;
};

struct EvalInputs {
    const AlphaMatte* pred = nullptr;
    const AlphaMatte* gt = nullptr;
    /// Trimap defining the unknown region (required for Region::kUnknown).
    const Trimap* region_trimap = nullptr;
    /// Adapted trimap and its reference; both present to report Acc/mIoU.
    const Trimap* pred_trimap = nullptr;
    const Trimap* gt_trimap = nullptr;
};

MetricReport evaluate(const EvalInputs& in, Region region, double sigma = kGradSigma);

/// Per-metric mean over images; Acc/mIoU are averaged over the images that report them.
MetricReport aggregate(const std::vector<MetricReport>& reports);

/// Aligned plain-text table with columns Grad, SAD, MSE, Acc, mIoU (raw sums for Grad and SAD).
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace adamat::metrics
