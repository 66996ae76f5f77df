#include "adamat/infer.hpp"

namespace adamat::infer {

namespace {

std::size_t reflect(std::size_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::size_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
}

template <typename G>
G pad_grid(const G& g, std::size_t bottom, std::size_t right) {
    G out(g.height() + bottom, g.width() + right);
    for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x) out.at(y, x) = g.at(reflect(y, g.height()), reflect(x, g.width()));
    return out;
}

template <typename G>
G crop_grid(const G& g, std::size_t h, std::size_t w) {
    G out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, x) = g.at(y, x);
    return out;
}

}  // namespace

ImageRGB reflect_pad(const ImageRGB& img, std::size_t bottom, std::size_t right) {
    const std::size_t h = img.height(), w = img.width();
    ImageRGB out(h + bottom, w + right);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < out.height(); ++y)
            for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = img.at(c, reflect(y, h), reflect(x, w));
    return out;
}

Trimap reflect_pad(const Trimap& t, std::size_t bottom, std::size_t right) { return pad_grid(t, bottom, right); }

Prediction predict(const model::Network& net, const train::ModelState& state, const ImageRGB& image,
                   const Trimap& trimap) {
    if (!image.same_extent(trimap)) throw ShapeError("predict: image and trimap extents differ");
    const std::size_t h = image.height(), w = image.width(), stride = net.config().stride();
    Prediction p;
    p.pad_bottom = (stride - h % stride) % stride;
    p.pad_right = (stride - w % stride) % stride;
    const bool padded = p.pad_bottom || p.pad_right;
    const Tensor<float> x = padded ? train::pack_input(reflect_pad(image, p.pad_bottom, p.pad_right),
                                                       reflect_pad(trimap, p.pad_bottom, p.pad_right))
                                   : train::pack_input(image, trimap);

    Tape<float> tape;
    std::vector<Var<float>> vars;
    vars.reserve(state.params.size());
    for (const auto& t : state.params) vars.push_back(tape.leaf(t, false));
    auto norm = state.norm;
    const auto out = net.forward<float>(vars, norm, tape.constant(x), model::ForwardOptions{false, false});

    const std::size_t ph = h + p.pad_bottom, pw = w + p.pad_right;
    AlphaMatte fused(ph, pw), raw(ph, pw);
    Trimap adapted(ph, pw);
    const Tensor<float>& last = out.last_alpha().value();
    for (std::size_t i = 0; i < ph * pw; ++i) {
        fused[i] = out.alpha_final[i];
        raw[i] = last[i];
        adapted[i] = static_cast<Label>(out.trimap_labels[i]);
    }
    p.alpha = padded ? crop_grid(fused, h, w) : std::move(fused);
    p.raw_alpha = padded ? crop_grid(raw, h, w) : std::move(raw);
    p.trimap = padded ? crop_grid(adapted, h, w) : std::move(adapted);
    return p;
}

HeldOutResult evaluate_samples(const model::Network& net, const train::ModelState& state,
                               const std::vector<synth::SampleRecord>& samples, metrics::Region region) {
    HeldOutResult r;
    for (const auto& s : samples) {
        Prediction p = predict(net, state, s.image, s.trimap_in);
        const Trimap t_opt = derive_optimal_trimap(s.alpha_gt);
        r.reports.push_back(metrics::evaluate({&p.alpha, &s.alpha_gt, &s.trimap_in, &p.trimap, &t_opt}, region));
        r.predictions.push_back(std::move(p));
    }
    r.summary = metrics::aggregate(r.reports);
    return r;
}

}  // namespace adamat::infer
