#include "adamat/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace adamat {

double GradCheckReport::max_error() const {
    double m = 0;
    for (double e : max_rel_error) m = std::max(m, e);
    return m;
}

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs, DecisionLog& log) {
    log.start_replay();
    Tape<double> tape(&log);
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(tape.leaf(t, false));
    return fn(tape, vars).value().item();
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& options) {
    DecisionLog log;
    log.start_record();
    std::vector<Tensor<double>> analytic;
    {
        Tape<double> tape(&log);
        std::vector<Var<double>> vars;
        for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
        Var<double> out = fn(tape, vars);
        tape.backward(out);
        for (const auto& v : vars) analytic.push_back(tape.grad(v));
    }

    if (options.order != 2 && options.order != 4) throw std::invalid_argument("grad_check: order must be 2 or 4");
    GradCheckReport report;
    report.tolerance = options.tolerance;
    std::mt19937_64 rng(options.seed);
    std::vector<Tensor<double>> work = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        std::vector<std::size_t> idx(inputs[k].numel());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (options.max_samples_per_input && idx.size() > options.max_samples_per_input) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(options.max_samples_per_input);
        }
        double worst = 0;
        for (std::size_t i : idx) {
            const double orig = work[k][i];
            auto at = [&](double offset) {
                work[k][i] = orig + offset;
                return evaluate(fn, work, log);
            };
            const double h = options.step;
            const double numeric = options.order == 2
                                       ? (at(h) - at(-h)) / (2 * h)
                                       : (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
            work[k][i] = orig;
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            worst = std::max(worst, std::abs(a - numeric) / denom);
            ++report.checked;
        }
        report.max_rel_error.push_back(worst);
    }
    return report;
}

}  // namespace adamat
