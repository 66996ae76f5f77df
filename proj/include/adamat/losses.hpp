#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adamat/autograd.hpp"
#include "adamat/model.hpp"
#include "adamat/tensor.hpp"

namespace adamat::losses {

/// Learnable task scales stored as log-sigma, so sigma = exp(s) is always positive.
struct TaskWeights {
    double s1 = 0;
    double s2 = 0;

    static TaskWeights from_sigma(double sigma1, double sigma2);
    double sigma1() const;
    double sigma2() const;
};

/// Mean per-pixel 3-class cross-entropy of logits[N,3,H,W] against labels in {0,1,2}.
template <typename T>
Var<T> trimap_ce(Var<T> logits, std::span<const std::uint8_t> t_opt);

template <typename T>
struct MaskedL1 {
    Var<T> loss;
    bool empty_mask = false;
};

/// Mean |pred - gt| over the mask. An empty mask yields 0 with `empty_mask` set.
template <typename T>
MaskedL1<T> alpha_l1_masked(Var<T> alpha_pred, const Tensor<T>& alpha_gt, std::span<const std::uint8_t> mask);

/// 1 where the argmax class is UNKNOWN (ties go to UNKNOWN). Carries no gradient.
template <typename T>
std::vector<std::uint8_t> unknown_mask_from_logits(const Tensor<T>& logits);

/// L_T / (2 sigma1^2) + L_a / sigma2 + log(2 sigma1 sigma2), with s = log sigma.
/// `kendall_strict` swaps the alpha term for L_a / (2 sigma2^2).
template <typename T>
Var<T> uncertainty_combine(Var<T> l_t, Var<T> l_a, Var<T> s1, Var<T> s2, bool kendall_strict = false);

double uncertainty_combine(double l_t, double l_a, const TaskWeights& w, bool kendall_strict = false);

/// (1 - sigma) L_T + sigma L_a with a fixed sigma in [0, 1].
template <typename T>
Var<T> naive_combine(Var<T> l_t, Var<T> l_a, double sigma);

enum class LossMode { kUncertainty, kNaive };

struct LossConfig {
    LossMode mode = LossMode::kUncertainty;
    double naive_sigma = 0.5;
    bool kendall_strict = false;
    /// Average the alpha loss over every propagation step instead of using the final step only.
    bool per_step_alpha_loss = false;
    /// Fall back to the input trimap's unknown region for samples whose predicted unknown region is empty.
    bool mask_fallback = true;

    void validate() const;
    nlohmann::json to_json() const;
    static LossConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct LossTerms {
    Var<T> trimap;
    Var<T> alpha;
    Var<T> total;
    /// Samples whose alpha-loss mask came from the input trimap.
    std::size_t fallback_samples = 0;
    /// True when no sample had any unknown pixel to supervise.
    bool alpha_mask_empty = false;
};

/// Full training objective for one batch.
/// `t_opt` are the optimal-trimap labels [N*H*W]; `input_unknown` marks the input trimap's unknown pixels.
/// `s1`, `s2` are only read in uncertainty mode.
template <typename T>
LossTerms<T> objective(const model::ForwardOutput<T>& out, const Tensor<T>& alpha_gt,
                       std::span<const std::uint8_t> t_opt, std::span<const std::uint8_t> input_unknown, Var<T> s1,
                       Var<T> s2, const LossConfig& config);

/// One line of the loss log.
struct LossRecord {
    std::size_t iter = 0;
    double l_t = 0;
    double l_a = 0;
    double sigma1 = 0;
    double sigma2 = 0;
    double total = 0;
};

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const LossRecord& r);
std::vector<LossRecord> read_loss_csv(std::istream& is);

}  // namespace adamat::losses
