#include "adamat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace adamat::metrics {

namespace {

void check_extent(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region, const char* what) {
    if (!pred.same_extent(gt) || !pred.same_extent(region)) {
        throw ShapeError(std::string(what) + ": prediction, ground truth and region extents differ");
    }
}

std::size_t clamp_index(long i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= long(n)) return n - 1;
    return std::size_t(i);
}

/// Separable correlation of `src` with `kx` along x then `ky` along y, replicate borders.
Grid<double> separable(const AlphaMatte& src, const std::vector<double>& kx, const std::vector<double>& ky) {
    const std::size_t h = src.height(), w = src.width();
    const long r = long(kx.size() / 2);
    Grid<double> tmp(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0;
            for (long k = -r; k <= r; ++k) acc += kx[k + r] * src.at(y, clamp_index(long(x) + k, w));
            tmp.at(y, x) = acc;
        }
    }
    Grid<double> out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0;
            for (long k = -r; k <= r; ++k) acc += ky[k + r] * tmp.at(clamp_index(long(y) + k, h), x);
            out.at(y, x) = acc;
        }
    }
    return out;
}

}  // namespace

Region parse_region(const std::string& name) {
    if (name == "unknown") return Region::kUnknown;
    if (name == "whole") return Region::kWhole;
    throw std::invalid_argument("region must be 'unknown' or 'whole', got '" + name + "'");
}

std::string region_name(Region r) { return r == Region::kUnknown ? "unknown" : "whole"; }

Mask region_mask(const Trimap& trimap, Region region) {
    if (region == Region::kWhole) return Mask(trimap.height(), trimap.width(), 1);
    return label_mask(trimap, Label::kUnknown);
}

Measure sad(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region) {
    check_extent(pred, gt, region, "sad");
    Measure m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!region[i]) continue;
        m.value += std::abs(double(pred[i]) - double(gt[i]));
        ++m.pixels;
    }
    return m;
}

Measure mse(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region) {
    check_extent(pred, gt, region, "mse");
    Measure m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!region[i]) continue;
        const double d = double(pred[i]) - double(gt[i]);
        m.value += d * d;
        ++m.pixels;
    }
    if (m.pixels) m.value /= double(m.pixels);
    return m;
}

GaussDerivKernel gauss_deriv_kernel(double sigma) {
    if (!(sigma > 0)) throw std::invalid_argument("gradient sigma must be positive");
    GaussDerivKernel k;
    k.radius = int(std::ceil(3 * sigma));
    double dn = 0, sn = 0;
    for (int x = -k.radius; x <= k.radius; ++x) {
        const double g = std::exp(-double(x) * x / (2 * sigma * sigma));
        k.deriv.push_back(-x * g);
        k.smooth.push_back(g);
        dn += x * g * x * g;
        sn += g * g;
    }
    for (auto& v : k.deriv) v /= std::sqrt(dn);
    for (auto& v : k.smooth) v /= std::sqrt(sn);
    return k;
}

Grid<double> gradient_magnitude(const AlphaMatte& a, double sigma) {
    const auto k = gauss_deriv_kernel(sigma);
    const Grid<double> gx = separable(a, k.deriv, k.smooth);
    const Grid<double> gy = separable(a, k.smooth, k.deriv);
    Grid<double> mag(a.height(), a.width());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(gx[i], gy[i]);
    return mag;
}

Measure grad_error(const AlphaMatte& pred, const AlphaMatte& gt, const Mask& region, double sigma) {
    check_extent(pred, gt, region, "grad_error");
    const Grid<double> mp = gradient_magnitude(pred, sigma);
    const Grid<double> mg = gradient_magnitude(gt, sigma);
    Measure m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!region[i]) continue;
        const double d = mp[i] - mg[i];
        m.value += d * d;
        ++m.pixels;
    }
    return m;
}

Confusion confusion(const Trimap& pred, const Trimap& gt) {
    if (!pred.same_extent(gt)) throw ShapeError("trimap metrics: extents differ");
    Confusion c{};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto g = static_cast<std::size_t>(gt[i]), p = static_cast<std::size_t>(pred[i]);
        if (g > 2 || p > 2) throw DataError("trimap metrics: label outside {0,1,2}");
        ++c[g][p];
    }
    return c;
}

double trimap_accuracy(const Trimap& pred, const Trimap& gt) {
    const Confusion c = confusion(pred, gt);
    if (pred.size() == 0) return 1.0;
    return double(c[0][0] + c[1][1] + c[2][2]) / double(pred.size());
}

double trimap_miou(const Trimap& pred, const Trimap& gt) {
    const Confusion c = confusion(pred, gt);
    double total = 0;
    int classes = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t in_gt = 0, in_pred = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            in_gt += c[k][j];
            in_pred += c[j][k];
        }
        const std::size_t uni = in_gt + in_pred - c[k][k];
        if (uni == 0) continue;
        total += double(c[k][k]) / double(uni);
        ++classes;
    }
    return classes ? total / classes : 1.0;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j{{"region", region_name(region)},
                     {"region_pixels", region_pixels},
                     {"total_pixels", total_pixels},
                     {"sad", sad},
                     {"sad_k", sad_k()},
                     {"mse", mse},
                     {"grad", grad},
                     {"grad_k", grad_k()},
                     {"empty_region", empty_region()}};
    j["trimap_acc"] = trimap_acc ? nlohmann::json(*trimap_acc) : nlohmann::json(nullptr);
    j["trimap_miou"] = trimap_miou ? nlohmann::json(*trimap_miou) : nlohmann::json(nullptr);
    return j;
}

MetricReport evaluate(const EvalInputs& in, Region region, double sigma) {
    if (!in.pred || !in.gt) throw std::invalid_argument("evaluate: prediction and ground truth are required");
    Mask mask;
    if (region == Region::kUnknown) {
        if (!in.region_trimap) throw std::invalid_argument("evaluate: unknown-region mode needs a trimap");
        if (!in.region_trimap->same_extent(*in.gt)) throw ShapeError("evaluate: trimap extent differs from alpha");
        mask = region_mask(*in.region_trimap, region);
    } else {
        mask = Mask(in.gt->height(), in.gt->width(), 1);
    }
    MetricReport r;
    r.region = region;
    r.total_pixels = in.gt->size();
    const Measure s = sad(*in.pred, *in.gt, mask);
    r.region_pixels = s.pixels;
    r.sad = s.value;
    r.mse = mse(*in.pred, *in.gt, mask).value;
    r.grad = grad_error(*in.pred, *in.gt, mask, sigma).value;
    if (in.pred_trimap && in.gt_trimap) {
        r.trimap_acc = trimap_accuracy(*in.pred_trimap, *in.gt_trimap);
        r.trimap_miou = trimap_miou(*in.pred_trimap, *in.gt_trimap);
    }
    return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
    MetricReport out;
    if (reports.empty()) return out;
    out.region = reports.front().region;
    double acc = 0, miou = 0;
    std::size_t with_trimap = 0;
    for (const auto& r : reports) {
        out.region_pixels += r.region_pixels;
        out.total_pixels += r.total_pixels;
        out.sad += r.sad;
        out.mse += r.mse;
        out.grad += r.grad;
        if (r.trimap_acc && r.trimap_miou) {
            acc += *r.trimap_acc;
            miou += *r.trimap_miou;
            ++with_trimap;
        }
    }
    const double n = double(reports.size());
    out.sad /= n;
    out.mse /= n;
    out.grad /= n;
    if (with_trimap) {
        out.trimap_acc = acc / double(with_trimap);
        out.trimap_miou = miou / double(with_trimap);
    }
    return out;
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    std::size_t name_w = 4;
    for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
    auto line = [&](const std::string& name, const std::string& g, const std::string& s, const std::string& m,
                    const std::string& a, const std::string& u) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %10s  %8s  %8s\n", int(name_w), name.c_str(), g.c_str(),
                      s.c_str(), m.c_str(), a.c_str(), u.c_str());
        return std::string(buf);
    };
    auto num = [](double v, const char* fmt) {
        char buf[64];
        std::snprintf(buf, sizeof buf, fmt, v);
        return std::string(buf);
    };
    std::string out = line("name", "Grad", "SAD", "MSE", "Acc", "mIoU");
    for (const auto& [name, r] : rows) {
        out += line(name, num(r.grad, "%.4f"), num(r.sad, "%.4f"), num(r.mse, "%.6f"),
                    r.trimap_acc ? num(*r.trimap_acc, "%.4f") : "-", r.trimap_miou ? num(*r.trimap_miou, "%.4f") : "-");
    }
    return out;
}

}  // namespace adamat::metrics
