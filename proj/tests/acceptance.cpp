// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adamat/grad_check.hpp"
#include "adamat/infer.hpp"
#include "adamat/losses.hpp"
#include "adamat/matting.hpp"
#include "adamat/metrics.hpp"
#include "adamat/netpbm.hpp"
#include "adamat/synth.hpp"
#include "adamat/trainer.hpp"
#include "metric_oracles.hpp"

using namespace adamat;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Tensor<double> uniform(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(std::move(s));
    for (auto& v : t.data()) v = u(rng);
    return t;
}

Var<double> weighted_sum(Var<double> y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return ops::sum(ops::mul(y, y.tape().constant(uniform(y.shape(), rng))));
}

// ---- 1: finite-difference suite -----------------------------------------------------------------

struct GradCase {
    std::string name;
    ScalarFn fn;
    std::vector<Tensor<double>> inputs;
};

std::vector<GradCase> grad_cases() {
    std::mt19937_64 rng(101);
    std::vector<GradCase> cases;
    auto unary = [&](std::string name, std::function<Var<double>(Var<double>)> f, Shape s, double lo = -1, double hi = 1) {
        const std::uint64_t seed = rng();
        cases.push_back({std::move(name),
                         [f, seed](Tape<double>&, std::span<const Var<double>> v) { return weighted_sum(f(v[0]), seed); },
                         {uniform(std::move(s), rng, lo, hi)}});
    };
    const Shape x4{2, 3, 4, 4};
    cases.push_back({"conv2d",
                     [](Tape<double>&, std::span<const Var<double>> v) {
                         return weighted_sum(ops::conv2d(v[0], v[1], v[2], ops::Conv2dOptions{2, 1, 2}), 1);
                     },
                     {uniform({2, 2, 6, 5}, rng), uniform({3, 2, 3, 3}, rng), uniform({3}, rng)}});
    cases.push_back({"conv2d_same",
                     [](Tape<double>&, std::span<const Var<double>> v) {
                         return weighted_sum(ops::conv2d(v[0], v[1], v[2], 1, 1), 2);
                     },
                     {uniform({1, 2, 5, 5}, rng), uniform({2, 2, 3, 3}, rng), uniform({2}, rng)}});
    unary("relu", [](Var<double> x) { return ops::relu(x); }, x4);
    unary("sigmoid", [](Var<double> x) { return ops::sigmoid(x); }, x4, -3, 3);
    unary("tanh", [](Var<double> x) { return ops::tanh(x); }, x4, -2, 2);
    unary("exp", [](Var<double> x) { return ops::exp(x); }, x4);
    unary("softmax_channel", [](Var<double> x) { return ops::softmax_channel(x); }, x4, -3, 3);
    unary("scale_add_scalar", [](Var<double> x) { return ops::add_scalar(ops::scale(x, -0.7), 0.3); }, x4);
    unary("mean", [](Var<double> x) { return ops::mean(x); }, x4);
    unary("upsample_nearest", [](Var<double> x) { return ops::upsample_nearest(x, 2); }, x4);
    unary("pixel_shuffle", [](Var<double> x) { return ops::pixel_shuffle(x, 2); }, {2, 8, 2, 3});
    unary("pixel_unshuffle", [](Var<double> x) { return ops::pixel_unshuffle(x, 2); }, x4);
    unary("slice_channels", [](Var<double> x) { return ops::slice_channels(x, 1, 3); }, x4);
    for (auto [name, op] : std::vector<std::pair<std::string, int>>{{"add", 0}, {"sub", 1}, {"mul", 2}, {"concat", 3}}) {
        cases.push_back({name,
                         [op](Tape<double>&, std::span<const Var<double>> v) {
                             if (op == 0) return weighted_sum(ops::add(v[0], v[1]), 3);
                             if (op == 1) return weighted_sum(ops::sub(v[0], v[1]), 4);
                             if (op == 2) return weighted_sum(ops::mul(v[0], v[1]), 5);
                             const Var<double> parts[] = {v[1], v[0]};
                             return weighted_sum(ops::concat_channels<double>(parts), 6);
                         },
                         {uniform(x4, rng), uniform(x4, rng)}});
    }
    for (bool train : {true, false}) {
        cases.push_back({train ? "batch_norm_train" : "batch_norm_eval",
                         [train](Tape<double>&, std::span<const Var<double>> v) {
                             std::mt19937_64 r(7);
                             ops::BatchNormState<double> st{uniform({3}, r), uniform({3}, r, 0.5, 2.0)};
                             return weighted_sum(ops::batch_norm2d(v[0], v[1], v[2], st, {train, 1e-5, 0.1}), 7);
                         },
                         {uniform(x4, rng), uniform({3}, rng, 0.5, 1.5), uniform({3}, rng)}});
    }
    auto labels = std::make_shared<std::vector<std::uint8_t>>(2 * 4 * 4);
    for (auto& l : *labels) l = std::uint8_t(rng() % 3);
    cases.push_back({"cross_entropy",
                     [labels](Tape<double>&, std::span<const Var<double>> v) { return losses::trimap_ce(v[0], *labels); },
                     {uniform({2, 3, 4, 4}, rng, -3, 3)}});
    auto target = std::make_shared<Tensor<double>>(uniform({2, 1, 4, 4}, rng, 0, 1));
    auto mask = std::make_shared<std::vector<std::uint8_t>>(32);
    for (auto& m : *mask) m = std::uint8_t(rng() % 2);
    (*mask)[0] = 1;
    cases.push_back({"masked_l1",
                     [target, mask](Tape<double>&, std::span<const Var<double>> v) {
                         return losses::alpha_l1_masked(v[0], *target, *mask).loss;
                     },
                     {uniform({2, 1, 4, 4}, rng, 0, 1)}});
    for (bool strict : {false, true}) {
        cases.push_back({strict ? "uncertainty_kendall" : "uncertainty_combine",
                         [strict](Tape<double>&, std::span<const Var<double>> v) {
                             return losses::uncertainty_combine(v[0], v[1], v[2], v[3], strict);
                         },
                         {uniform({1}, rng, 0.1, 2), uniform({1}, rng, 0.1, 2), uniform({1}, rng), uniform({1}, rng)}});
    }
    cases.push_back({"naive_combine",
                     [](Tape<double>&, std::span<const Var<double>> v) { return losses::naive_combine(v[0], v[1], 0.3); },
                     {uniform({1}, rng), uniform({1}, rng)}});
    cases.push_back({"global_conv",
                     [](Tape<double>&, std::span<const Var<double>> v) {
                         return weighted_sum(model::global_conv<double>(v[0], std::span<const Var<double>, 4>(v.subspan(1, 4)),
                                                                        std::span<const Var<double>, 4>(v.subspan(5, 4))),
                                             8);
                     },
                     {uniform({1, 2, 6, 6}, rng), uniform({2, 2, 3, 1}, rng), uniform({2, 2, 1, 3}, rng),
                      uniform({2, 2, 1, 3}, rng), uniform({2, 2, 3, 1}, rng), uniform({2}, rng), uniform({2}, rng),
                      uniform({2}, rng), uniform({2}, rng)}});
    cases.push_back({"conv_lstm_step",
                     [](Tape<double>&, std::span<const Var<double>> v) {
                         const auto s = model::conv_lstm_step<double>(v[0], {v[1], v[2]}, v[3], v[4]);
                         return ops::add(weighted_sum(s.h, 9), weighted_sum(s.c, 10));
                     },
                     {uniform({1, 3, 4, 5}, rng), uniform({1, 2, 4, 5}, rng), uniform({1, 2, 4, 5}, rng),
                      uniform({8, 5, 3, 3}, rng, -0.5, 0.5), uniform({8}, rng)}});

    model::ModelConfig c;
    c.in_size = 8;
    c.stage_widths = {2, 3};
    c.gc_kernel = 3;
    c.lstm_hidden = 2;
    c.prop_width = 2;
    c.prop_steps = 2;
    auto net = std::make_shared<model::Network>(c);
    std::vector<Tensor<double>> params;
    for (const auto& p : net->init_params(21)) params.push_back(p.cast<double>());
    auto x = std::make_shared<Tensor<double>>(Shape{2, 4, 16, 16});
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const double v = u(rng);
        (*x)[i] = (i / 256) % 4 < 3 ? v : (v < 0.33 ? 0.0 : (v < 0.66 ? 0.5 : 1.0));
    }
    cases.push_back({"model_small",
                     [net, x](Tape<double>& tape, std::span<const Var<double>> ps) {
                         auto bn = net->init_norm_state<double>();
                         const auto out = net->forward<double>(ps, bn, tape.constant(*x), {true, false});
                         return ops::add(ops::add(weighted_sum(out.trimap_logits, 11), weighted_sum(out.last_alpha(), 12)),
                                         weighted_sum(out.alpha_intermediate, 13));
                     },
                     params});
    return cases;
}

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    GradCheckOptions opt;
    opt.step = 1e-3;
    opt.tolerance = 1e-4;
    double worst = 0;
    std::string worst_name, failed;
    std::size_t checked = 0;
    const auto cases = grad_cases();
    for (const auto& c : cases) {
        const auto r = grad_check(c.fn, c.inputs, opt);
        checked += r.checked;
        if (r.max_error() > worst) {
            worst = r.max_error();
            worst_name = c.name;
        }
        if (!r.passed()) failed += " " + c.name;
    }
    const double secs = seconds_since(t0);
    const bool ok = failed.empty() && secs < 300;
    return {ok, fmt("%zu cases, %zu elements, max rel err %.2e (%s), %.1f s; limits 1e-4, 300 s%s", cases.size(), checked,
                    worst, worst_name.c_str(), secs, failed.empty() ? "" : (" failed:" + failed).c_str())};
}

// ---- 2: loss identities -------------------------------------------------------------------------

Outcome criterion_losses() {
    const double v = losses::uncertainty_combine(1.0, 1.0, losses::TaskWeights{0, 0});
    const double err = std::abs(v - (1.5 + std::log(2.0)));
    const double lt = 0.25, la = 0.5, lr = 0.05;
    double s1 = std::log(4.0), s2 = std::log(4.0);
    int steps = 0;
    for (; steps < 5000; ++steps) {
        if (std::abs(std::exp(s1) - 0.5) <= 1e-3 && std::abs(std::exp(s2) - 0.5) <= 1e-3) break;
        Tape<double> tape;
        auto v1 = tape.leaf(Tensor<double>::scalar(s1), true), v2 = tape.leaf(Tensor<double>::scalar(s2), true);
        tape.backward(losses::uncertainty_combine(tape.constant(Tensor<double>::scalar(lt)),
                                                  tape.constant(Tensor<double>::scalar(la)), v1, v2));
        const double g1 = tape.grad(v1).item(), g2 = tape.grad(v2).item();
        s1 -= lr * g1;
        s2 -= lr * g2;
    }
    const double sig1 = std::exp(s1), sig2 = std::exp(s2);
    const bool ok = err <= 1e-9 && std::abs(sig1 - 0.5) <= 0.005 && std::abs(sig2 - 0.5) <= 0.005 && steps <= 5000;
    return {ok, fmt("L(1,1,sigma=1) err %.1e; descent from sigma=4 reached sigma1=%.5f sigma2=%.5f in %d steps", err,
                    sig1, sig2, steps)};
}

// ---- 3: schedule --------------------------------------------------------------------------------

Outcome criterion_schedule() {
    const double base = 1e-4;
    const std::size_t max_iter = 1'000'000;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, max_iter);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t it = i == 0 ? 0 : (i == 1 ? max_iter : pick(rng));
        const double want = base * std::pow(1.0 - double(it) / double(max_iter), 0.9);
        worst = std::max(worst, std::abs(train::poly_lr(it, max_iter, base, 0.9) - want));
    }
    const double first = train::poly_lr(0, max_iter, base, 0.9);
    return {worst <= 1e-12 && first == 1e-4, fmt("max abs err %.1e over 10^4 iterations; lr(0) = %.17g", worst, first)};
}

// ---- 4: metric oracles --------------------------------------------------------------------------

Outcome criterion_metrics() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> level(0, 255);
    auto alpha = [&] {
        AlphaMatte a(8, 8);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = float(level(rng)) / 255.0f;
        return a;
    };
    auto trimap = [&] {
        Trimap t(8, 8);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Label>(rng() % 3);
        return t;
    };
    std::size_t mismatches = 0;
    double worst_grad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = alpha(), g = alpha();
        Mask m(8, 8);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng() % 2;
        const auto tp = trimap(), tg = trimap();
        mismatches += metrics::sad(p, g, m).value != oracle::sad(p, g, m);
        mismatches += metrics::mse(p, g, m).value != oracle::mse(p, g, m);
        mismatches += metrics::trimap_accuracy(tp, tg) != oracle::accuracy(tp, tg);
        mismatches += metrics::trimap_miou(tp, tg) != oracle::miou(tp, tg);
        const double want = oracle::grad(p, g, m, metrics::kGradSigma);
        const double got = metrics::grad_error(p, g, m).value;
        worst_grad = std::max(worst_grad, std::abs(got - want) / std::max(want, 1e-300));
    }
    return {mismatches == 0 && worst_grad <= 1e-6,
            fmt("1000 instances: %zu exact mismatches (SAD/MSE/Acc/mIoU), Grad max rel err %.1e", mismatches, worst_grad)};
}

// ---- 5: trimap invariants -----------------------------------------------------------------------

Outcome criterion_trimaps() {
    synth::DatasetConfig dc;
    dc.size = 32;
    dc.count = 1000;
    dc.seed = 55;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> radius(0, 15);
    std::size_t violations = 0, roundtrip_failures = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        AlphaMatte alpha = synth::generate_sample(dc, i).alpha_gt;
        const Trimap opt = derive_optimal_trimap(alpha);
        const auto element = rng() % 2 ? StructuringElement::kDisk : StructuringElement::kSquare;
        const Trimap out = degrade_trimap(opt, radius(rng), radius(rng), element);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const bool unk_kept = opt[k] != Label::kUnknown || out[k] == Label::kUnknown;
            const bool shrunk = out[k] == Label::kUnknown || out[k] == opt[k];
            violations += !(unk_kept && shrunk);
        }
        // Sprinkle exact 0 and 1 values so every label occurs.
        for (std::size_t k = 0; k < alpha.size(); k += 7) alpha[k] = float(rng() % 2);
        roundtrip_failures += fuse_alpha(alpha, derive_optimal_trimap(alpha, 0.0f)) != alpha;
    }
    return {violations == 0 && roundtrip_failures == 0,
            fmt("1000 degradations: %zu subset violations; derive-then-fuse at eps=0: %zu mismatches", violations,
                roundtrip_failures)};
}

// ---- 6 and 8: toy training ----------------------------------------------------------------------

struct ToyData {
    std::vector<synth::SampleRecord> train, held_out;
};

ToyData toy_data() {
    synth::DatasetConfig dc;  // 64 samples, 64x64
    ToyData d;
    for (std::size_t i = 0; i < dc.count; ++i) d.train.push_back(synth::generate_sample(dc, i));
    synth::DatasetConfig hc = dc;
    hc.count = 16;
    hc.seed = dc.seed + 1000;
    for (std::size_t i = 0; i < hc.count; ++i) d.held_out.push_back(synth::generate_sample(hc, i));
    return d;
}

/// Library defaults except learning rate, batch size, and augmentation reduced to flips.
train::TrainConfig toy_train_config() {
    train::TrainConfig c;
    c.epochs = 50;
    c.base_lr = 2e-3;
    c.batch_size = 2;
    c.augment.rotation_deg = 0;
    c.augment.scale_min = c.augment.scale_max = 1;
    c.augment.crop_min = c.augment.crop_max = c.augment.out_size = 64;
    c.keep_checkpoints = 3;
    return c;
}

struct ToyRun {
    train::TrainResult result;
    infer::HeldOutResult held;
    double seconds = 0;
};

ToyRun toy_run(const ToyData& data, const train::TrainConfig& cfg, const model::ModelConfig& mc, const fs::path& dir,
               const std::string& label) {
    const auto t0 = Clock::now();
    ToyRun r;
    double window = 0;
    r.result = train::train(data.train, cfg, mc, dir, [&](const train::StepStats& s) {
        window += s.total;
        if ((s.iter + 1) % 100 == 0) {
            std::fprintf(stderr, "  [%s] iter %zu  mean total %.4f  L_T %.4f  L_a %.4f  sigma %.3f/%.3f  %.0f s\n",
                         label.c_str(), s.iter + 1, window / 100, s.l_t, s.l_a, s.sigma1, s.sigma2, seconds_since(t0));
            window = 0;
        }
    });
    r.seconds = seconds_since(t0);
    const model::Network net(mc);
    r.held = infer::evaluate_samples(net, r.result.final.state, data.held_out);
    nlohmann::json per = nlohmann::json::array();
    for (const auto& rep : r.held.reports) per.push_back(rep.to_json());
    std::ofstream(dir / "heldout.json") << nlohmann::json{{"images", per}, {"aggregate", r.held.summary.to_json()}}.dump(2)
                                        << "\n";
    std::ofstream(dir / "heldout.txt") << metrics::format_table({{"held-out", r.held.summary}});
    return r;
}

/// Means of consecutive 100-iteration windows of the total loss, over the first `limit` iterations.
std::vector<double> window_means(const std::vector<losses::LossRecord>& log, std::size_t limit) {
    std::vector<double> means;
    const std::size_t n = std::min(limit, log.size()) / 100 * 100;
    for (std::size_t b = 0; b < n; b += 100) {
        double s = 0;
        for (std::size_t i = b; i < b + 100; ++i) s += log[i].total;
        means.push_back(s / 100);
    }
    return means;
}

Outcome criterion_toy_training(const ToyRun& run) {
    const auto& m = run.held.summary;
    const auto means = window_means(run.result.log, 1000);
    bool decreasing = means.size() >= 2;
    for (std::size_t i = 1; i < means.size(); ++i) decreasing = decreasing && means[i] < means[i - 1];
    std::string trail;
    for (double v : means) trail += fmt(" %.3f", v);
    const bool ok = *m.trimap_acc >= 0.95 && *m.trimap_miou >= 0.80 && m.mse <= 0.02 && decreasing && run.seconds <= 1800;
    return {ok, fmt("%zu iters in %.0f s; held-out Acc %.4f (>=0.95) mIoU %.4f (>=0.80) unknown-MSE %.4f (<=0.02); "
                    "100-iter loss means%s (%s)",
                    run.result.log.size(), run.seconds, *m.trimap_acc, *m.trimap_miou, m.mse, trail.c_str(),
                    decreasing ? "decreasing" : "NOT decreasing")};
}

Outcome criterion_determinism(const fs::path& a, const fs::path& b) {
    std::size_t files = 0;
    std::string differ;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        ++files;
        if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differ += " " + rel.string();
    }
    std::size_t files_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file();
    const bool ok = differ.empty() && files == files_b && files > 0;
    return {ok, fmt("%zu files compared (checkpoints, loss.csv, held-out reports)%s", files,
                    differ.empty() ? ", all byte-identical" : (", differing:" + differ).c_str())};
}

// ---- 7: ablation harness ------------------------------------------------------------------------

Outcome criterion_ablation(const ToyData& data, std::size_t epochs, const fs::path& dir) {
    const auto t0 = Clock::now();
    train::TrainConfig base = toy_train_config();
    base.epochs = epochs;
    base.keep_checkpoints = 1;
    std::vector<std::pair<std::string, metrics::MetricReport>> components, loss_rows;
    std::size_t completed = 0, attempted = 0;
    auto one = [&](const std::string& name, const model::ModelConfig& mc, const train::TrainConfig& tc, auto& rows) {
        ++attempted;
        try {
            const auto r = toy_run(data, tc, mc, dir / name, name);
            completed += r.result.log.size() == train::Trainer(mc, tc, data.train).max_iter();
            rows.emplace_back(name, r.held.summary);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "  [%s] failed: %s\n", name.c_str(), e.what());
        }
    };
    for (int mask = 0; mask < 8; ++mask) {
        model::ModelConfig mc;
        mc.use_sp = mask & 1;
        mc.use_gc = mask & 2;
        mc.use_pu = mask & 4;
        const std::string name = fmt("sp%d_gc%d_pu%d", int(mc.use_sp), int(mc.use_gc), int(mc.use_pu));
        one(name, mc, base, components);
    }
    model::ModelConfig seq;
    seq.shared_encoder = false;
    one("seq", seq, base, components);
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        train::TrainConfig tc = base;
        tc.loss.mode = losses::LossMode::kNaive;
        tc.loss.naive_sigma = s;
        one(fmt("naive_%.2f", s), model::ModelConfig{}, tc, loss_rows);
    }
    one("uncertainty", model::ModelConfig{}, base, loss_rows);
    std::ofstream(dir / "components.txt") << metrics::format_table(components);
    std::ofstream(dir / "loss_weighting.txt") << metrics::format_table(loss_rows);
    std::cerr << metrics::format_table(components) << "\n" << metrics::format_table(loss_rows);
    const bool ok = completed == attempted && components.size() == 9 && loss_rows.size() == 6;
    return {ok, fmt("%zu/%zu runs completed (%zu epochs each, %.0f s); tables in %s", completed, attempted, epochs,
                    seconds_since(t0), dir.string().c_str())};
}

// ---- 9: I/O -------------------------------------------------------------------------------------

Outcome criterion_io(const fs::path& dir) {
    fs::create_directories(dir);
    std::mt19937_64 rng(9);
    std::size_t pnm_failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        io::PnmImage img;
        img.width = 1 + rng() % 17;
        img.height = 1 + rng() % 13;
        img.channels = trial % 2 ? 3 : 1;
        img.maxval = std::vector<int>{255, 1, 100, 256, 65535}[rng() % 5];
        for (std::size_t i = 0; i < img.width * img.height * std::size_t(img.channels); ++i)
            img.samples.push_back(std::uint16_t(rng() % (img.maxval + 1)));
        io::write_pnm(dir / "a.pnm", img);
        const auto back = io::read_pnm(dir / "a.pnm");
        io::write_pnm(dir / "b.pnm", back);
        pnm_failures += !(back == img) || slurp(dir / "a.pnm") != slurp(dir / "b.pnm");
    }

    std::size_t level_failures = 0;
    Trimap t(9, 11);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Label>(rng() % 3);
    const auto pnm = io::trimap_to_pnm(t);
    for (auto v : pnm.samples) level_failures += v != 0 && v != 128 && v != 255;
    io::write_pnm(dir / "t.pgm", pnm);
    level_failures += io::read_trimap(dir / "t.pgm") != t;
    auto odd = pnm;
    odd.samples[0] = 130;
    io::write_pnm(dir / "odd.pgm", odd);
    bool rejected = false;
    try {
        (void)io::read_trimap(dir / "odd.pgm");
    } catch (const DataError&) {
        rejected = true;
    }
    level_failures += !rejected;
    level_failures += io::read_trimap(dir / "odd.pgm", true)[0] != Label::kUnknown;

    model::ModelConfig mc;
    mc.in_size = 16;
    mc.stage_widths = {4, 6};
    mc.gc_kernel = 3;
    mc.lstm_hidden = 2;
    mc.prop_width = 2;
    mc.prop_steps = 2;
    train::TrainConfig tc;
    tc.batch_size = 2;
    tc.epochs = 5;
    tc.augment = {0.5f, 0.75f, 1.5f, 45.0f, 12, 16, 16};
    tc.d_min = 1;
    tc.d_max = 3;
    synth::DatasetConfig dc;
    dc.count = 4;
    dc.size = 16;
    dc.d_min = 1;
    dc.d_max = 3;
    std::vector<synth::SampleRecord> data;
    for (std::size_t i = 0; i < dc.count; ++i) data.push_back(synth::generate_sample(dc, i));
    train::Trainer unbroken(mc, tc, data), first(mc, tc, data);
    for (int i = 0; i < 3; ++i) {
        unbroken.step();
        first.step();
    }
    train::save_checkpoint(first.checkpoint(), dir / "mid");
    train::Trainer resumed(train::load_checkpoint(dir / "mid"), data);
    std::size_t loss_mismatch = 0;
    while (!unbroken.done()) loss_mismatch += unbroken.step().total != resumed.step().total;
    train::save_checkpoint(unbroken.checkpoint(), dir / "x");
    train::save_checkpoint(resumed.checkpoint(), dir / "y");
    bool same = resumed.done();
    for (const char* f : {"manifest.json", "params.bin", "opt.bin"}) same = same && slurp(dir / "x" / f) == slurp(dir / "y" / f);

    const bool ok = pnm_failures == 0 && level_failures == 0 && loss_mismatch == 0 && same;
    return {ok, fmt("NetPBM 200 round trips: %zu failures; trimap levels: %zu failures; resume after 3 of %zu iterations: "
                    "%zu loss mismatches, final checkpoint %s",
                    pnm_failures, level_failures, unbroken.max_iter(), loss_mismatch,
                    same ? "byte-identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string out = "acceptance_out";
    std::vector<int> only;
    std::size_t ablation_epochs = 5;
    app.add_option("--out", out, "Scratch and report directory")->capture_default_str();
    app.add_option("--only", only, "Run only these criteria (1-9)");
    app.add_option("--ablation-epochs", ablation_epochs, "Epochs per ablation run")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const fs::path root(out);
    fs::remove_all(root);
    fs::create_directories(root);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int k) { return selected.empty() || selected.count(k); };

    int failures = 0;
    auto report = [&](int k, const std::string& title, const Outcome& o) {
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", k, title.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };
    auto guarded = [&](int k, const std::string& title, const std::function<Outcome()>& f) {
        if (!wanted(k)) return;
        try {
            report(k, title, f());
        } catch (const std::exception& e) {
            report(k, title, {false, std::string("exception: ") + e.what()});
        }
    };

    guarded(1, "gradient suite", criterion_gradients);
    guarded(2, "loss identities", criterion_losses);
    guarded(3, "poly schedule", criterion_schedule);
    guarded(4, "metric oracles", criterion_metrics);
    guarded(5, "trimap invariants", criterion_trimaps);

    std::optional<ToyData> data;
    if (wanted(6) || wanted(7) || wanted(8)) data = toy_data();
    std::optional<ToyRun> first;
    auto first_run = [&]() -> const ToyRun& {
        if (!first) first = toy_run(*data, toy_train_config(), model::ModelConfig{}, root / "toy_a", "toy");
        return *first;
    };
    guarded(6, "toy training", [&] { return criterion_toy_training(first_run()); });
    guarded(7, "ablation harness", [&] { return criterion_ablation(*data, ablation_epochs, root / "ablation"); });
    guarded(8, "determinism", [&] {
        first_run();
        toy_run(*data, toy_train_config(), model::ModelConfig{}, root / "toy_b", "repeat");
        return criterion_determinism(root / "toy_a", root / "toy_b");
    });
    guarded(9, "I/O", [&] { return criterion_io(root / "io"); });
    return failures == 0 ? 0 : 1;
}
