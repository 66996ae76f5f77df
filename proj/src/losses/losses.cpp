#include "adamat/losses.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adamat/matting.hpp"
#include "adamat/ops.hpp"

namespace adamat::losses {

TaskWeights TaskWeights::from_sigma(double sigma1, double sigma2) {
    if (!(sigma1 > 0) || !(sigma2 > 0)) throw std::invalid_argument("TaskWeights: sigma must be positive");
    return {std::log(sigma1), std::log(sigma2)};
}

double TaskWeights::sigma1() const { return std::exp(s1); }
double TaskWeights::sigma2() const { return std::exp(s2); }

template <typename T>
Var<T> trimap_ce(Var<T> logits, std::span<const std::uint8_t> t_opt) {
    if (logits.shape().size() != 4 || logits.dim(1) != 3) {
        throw ShapeError("trimap_ce: expected logits [N,3,H,W], got " + shape_str(logits.shape()));
    }
    return ops::cross_entropy_channel(logits, t_opt);
}

template <typename T>
MaskedL1<T> alpha_l1_masked(Var<T> alpha_pred, const Tensor<T>& alpha_gt, std::span<const std::uint8_t> mask) {
    bool any = false;
    for (auto m : mask) {
        if (m) {
            any = true;
            break;
        }
    }
    return {ops::masked_l1_mean(alpha_pred, alpha_gt, mask), !any};
}

template <typename T>
std::vector<std::uint8_t> unknown_mask_from_logits(const Tensor<T>& logits) {
    std::vector<std::uint8_t> labels = model::argmax_labels(logits);
    for (auto& l : labels) l = l == static_cast<std::uint8_t>(Label::kUnknown) ? 1 : 0;
    return labels;
}

template <typename T>
Var<T> uncertainty_combine(Var<T> l_t, Var<T> l_a, Var<T> s1, Var<T> s2, bool kendall_strict) {
    Var<T> trimap_term = ops::scale(ops::mul(l_t, ops::exp(ops::scale(s1, T(-2)))), T(0.5));
    Var<T> alpha_term = kendall_strict ? ops::scale(ops::mul(l_a, ops::exp(ops::scale(s2, T(-2)))), T(0.5))
                                       : ops::mul(l_a, ops::exp(ops::scale(s2, T(-1))));
    Var<T> reg = ops::add_scalar(ops::add(s1, s2), T(std::numbers::ln2));
    return ops::add(ops::add(trimap_term, alpha_term), reg);
}

double uncertainty_combine(double l_t, double l_a, const TaskWeights& w, bool kendall_strict) {
    const double alpha_term = kendall_strict ? 0.5 * l_a * std::exp(-2 * w.s2) : l_a * std::exp(-w.s2);
    return 0.5 * l_t * std::exp(-2 * w.s1) + alpha_term + std::numbers::ln2 + w.s1 + w.s2;
}

template <typename T>
Var<T> naive_combine(Var<T> l_t, Var<T> l_a, double sigma) {
    if (!(sigma >= 0 && sigma <= 1)) throw std::invalid_argument("naive_combine: sigma must lie in [0, 1]");
    return ops::add(ops::scale(l_t, T(1 - sigma)), ops::scale(l_a, T(sigma)));
}

void LossConfig::validate() const {
    if (mode == LossMode::kNaive && !(naive_sigma >= 0 && naive_sigma <= 1)) {
        throw std::invalid_argument("loss: naive_sigma must lie in [0, 1]");
    }
}

nlohmann::json LossConfig::to_json() const {
    return {{"mode", mode == LossMode::kNaive ? "naive" : "uncertainty"},
            {"naive_sigma", naive_sigma},
            {"kendall_strict", kendall_strict},
            {"per_step_alpha_loss", per_step_alpha_loss},
            {"mask_fallback", mask_fallback}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
    LossConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "mode") {
            const auto m = value.get<std::string>();
            if (m == "uncertainty") {
                c.mode = LossMode::kUncertainty;
            } else if (m == "naive") {
                c.mode = LossMode::kNaive;
            } else {
                throw std::invalid_argument("loss.mode: expected uncertainty or naive, got " + m);
            }
        } else if (key == "naive_sigma") {
            c.naive_sigma = value.get<double>();
        } else if (key == "kendall_strict") {
            c.kendall_strict = value.get<bool>();
        } else if (key == "per_step_alpha_loss") {
            c.per_step_alpha_loss = value.get<bool>();
        } else if (key == "mask_fallback") {
            c.mask_fallback = value.get<bool>();
        } else {
            throw std::invalid_argument("loss: unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

template <typename T>
LossTerms<T> objective(const model::ForwardOutput<T>& out, const Tensor<T>& alpha_gt,
                       std::span<const std::uint8_t> t_opt, std::span<const std::uint8_t> input_unknown, Var<T> s1,
                       Var<T> s2, const LossConfig& config) {
    config.validate();
    const Shape& as = alpha_gt.shape();
    if (as.size() != 4 || as[1] != 1) throw ShapeError("objective: alpha_gt must be [N,1,H,W]");
    const std::size_t n = as[0], plane = as[2] * as[3];
    if (t_opt.size() != n * plane || input_unknown.size() != n * plane ||
        out.trimap_labels.size() != n * plane) {
        throw ShapeError("objective: label extents do not match alpha_gt " + shape_str(as));
    }

    LossTerms<T> terms;
    terms.trimap = trimap_ce(out.trimap_logits, t_opt);

    std::vector<std::uint8_t> mask(n * plane);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = out.trimap_labels[i] == static_cast<std::uint8_t>(Label::kUnknown) ? 1 : 0;
    }
    if (config.mask_fallback) {
        for (std::size_t b = 0; b < n; ++b) {
            auto m = std::span(mask).subspan(b * plane, plane);
            bool any = false;
            for (auto v : m) any = any || v;
            if (any) continue;
            auto fallback = input_unknown.subspan(b * plane, plane);
            std::copy(fallback.begin(), fallback.end(), m.begin());
            ++terms.fallback_samples;
        }
    }

    if (config.per_step_alpha_loss && out.alpha_steps.size() > 1) {
        Var<T> acc;
        for (const auto& step : out.alpha_steps) {
            auto l = alpha_l1_masked(step, alpha_gt, mask);
            terms.alpha_mask_empty = l.empty_mask;
            acc = acc.valid() ? ops::add(acc, l.loss) : l.loss;
        }
        terms.alpha = ops::scale(acc, T(1) / T(out.alpha_steps.size()));
    } else {
        auto l = alpha_l1_masked(out.last_alpha(), alpha_gt, mask);
        terms.alpha_mask_empty = l.empty_mask;
        terms.alpha = l.loss;
    }

    terms.total = config.mode == LossMode::kUncertainty
                      ? uncertainty_combine(terms.trimap, terms.alpha, s1, s2, config.kendall_strict)
                      : naive_combine(terms.trimap, terms.alpha, config.naive_sigma);
    return terms;
}

void write_loss_csv_header(std::ostream& os) { os << "iter,L_T,L_a,sigma1,sigma2,total\n"; }

void write_loss_csv_row(std::ostream& os, const LossRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.l_t, r.l_a, r.sigma1, r.sigma2,
                  r.total);
    os << buf;
}

std::vector<LossRecord> read_loss_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "iter,L_T,L_a,sigma1,sigma2,total") {
        throw DataError("loss csv: missing or unexpected header");
    }
    std::vector<LossRecord> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        LossRecord r;
        char tail = 0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf%c", &r.iter, &r.l_t, &r.l_a, &r.sigma1, &r.sigma2,
                        &r.total, &tail) != 6) {
            throw DataError("loss csv: malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

#define ADAMAT_INSTANTIATE(T)                                                                                  \
    template Var<T> trimap_ce(Var<T>, std::span<const std::uint8_t>);                                          \
    template MaskedL1<T> alpha_l1_masked(Var<T>, const Tensor<T>&, std::span<const std::uint8_t>);             \
    template std::vector<std::uint8_t> unknown_mask_from_logits(const Tensor<T>&);                             \
    template Var<T> uncertainty_combine(Var<T>, Var<T>, Var<T>, Var<T>, bool);                                 \
    template Var<T> naive_combine(Var<T>, Var<T>, double);                                                     \
    template LossTerms<T> objective(const model::ForwardOutput<T>&, const Tensor<T>&,                          \
                                    std::span<const std::uint8_t>, std::span<const std::uint8_t>, Var<T>, Var<T>, \
                                    const LossConfig&);

ADAMAT_INSTANTIATE(float)
ADAMAT_INSTANTIATE(double)

#undef ADAMAT_INSTANTIATE

}  // namespace adamat::losses
