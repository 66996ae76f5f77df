#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adamat/autograd.hpp"

namespace adamat {

struct GradCheckOptions {
    double step = 1e-3;
    /// Accuracy order of the central-difference stencil: 2 (f(x+-h)) or 4 (f(x+-h), f(x+-2h)).
    int order = 4;
    double tolerance = 1e-4;
    /// Elements checked per input; 0 checks every element.
    std::size_t max_samples_per_input = 0;
    std::uint64_t seed = 0;
    /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
};

struct GradCheckReport {
    std::vector<double> max_rel_error;  // one entry per input
    std::size_t checked = 0;
    double tolerance = 0;

    double max_error() const;
    bool passed() const { return max_error() <= tolerance; }
};

using ScalarFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

/// Compares reverse-mode gradients of `fn` with central differences. The
/// analytic pass records every discrete decision (ReLU masks, argmax
/// selections, |x| signs) and each perturbed pass replays them, so the check
/// never straddles a kink.
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace adamat
