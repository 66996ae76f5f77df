#include "adamat/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace adamat::model {

void ModelConfig::validate() const {
    if (stage_widths.size() < 2) throw std::invalid_argument("model: at least 2 encoder stages are required");
    for (auto w : stage_widths) {
        if (w == 0) throw std::invalid_argument("model: stage widths must be positive");
    }
    if (blocks_per_stage < 1) throw std::invalid_argument("model: blocks_per_stage must be >= 1");
    if (gc_kernel < 1 || gc_kernel % 2 == 0) throw std::invalid_argument("model: gc_kernel must be odd and >= 1");
    if (lstm_hidden < 1 || prop_width < 1) throw std::invalid_argument("model: lstm_hidden and prop_width must be >= 1");
    if (prop_steps < 0) throw std::invalid_argument("model: prop_steps must be >= 0");
    if (stages() >= 16) throw std::invalid_argument("model: too many stages");
    if (in_size == 0 || in_size % stride() != 0) {
        throw std::invalid_argument("model: in_size must be a positive multiple of " + std::to_string(stride()));
    }
    if (!(bn_momentum >= 0 && bn_momentum <= 1) || !(bn_eps > 0)) throw std::invalid_argument("model: invalid norm settings");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"in_size", in_size},         {"stage_widths", stage_widths}, {"blocks_per_stage", blocks_per_stage},
            {"gc_kernel", gc_kernel},     {"lstm_hidden", lstm_hidden},   {"prop_width", prop_width},
            {"prop_steps", prop_steps},   {"use_sp", use_sp},             {"use_gc", use_gc},
            {"use_pu", use_pu},           {"shared_encoder", shared_encoder}, {"use_bn", use_bn},
            {"bn_momentum", bn_momentum}, {"bn_eps", bn_eps}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.in_size = j.value("in_size", c.in_size);
    c.stage_widths = j.value("stage_widths", c.stage_widths);
    c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
    c.gc_kernel = j.value("gc_kernel", c.gc_kernel);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.prop_width = j.value("prop_width", c.prop_width);
    c.prop_steps = j.value("prop_steps", c.prop_steps);
    c.use_sp = j.value("use_sp", c.use_sp);
    c.use_gc = j.value("use_gc", c.use_gc);
    c.use_pu = j.value("use_pu", c.use_pu);
    c.shared_encoder = j.value("shared_encoder", c.shared_encoder);
    c.use_bn = j.value("use_bn", c.use_bn);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    return c;
}

namespace detail {

struct Conv {
    std::size_t w = 0;
    std::optional<std::size_t> b;
    int stride = 1, ph = 0, pw = 0;
};

struct Norm {
    std::size_t gamma = 0, beta = 0, state = 0;
};

struct ConvNorm {
    Conv conv;
    std::optional<Norm> norm;
};

struct ResBlock {
    ConvNorm a, b;
    std::optional<ConvNorm> proj;
};

using Encoder = std::vector<std::vector<ResBlock>>;

struct Shortcut {
    bool global = false;
    std::array<Conv, 4> gc{};
    Conv plain;
};

struct Up {
    bool subpixel = false;
    Conv conv;
    std::optional<Norm> norm;
};

struct DecoderLevel {
    std::optional<Shortcut> shortcut;
    ConvNorm conv;
    Up up;
};

struct Decoder {
    std::optional<Shortcut> start;
    std::vector<DecoderLevel> levels;  // deepest first
    Conv head;
};

struct Prop {
    ResBlock r1, r2;
    Conv lstm;
    Conv out;
};

struct Spec {
    Encoder enc_t;
    std::optional<Encoder> enc_a;
    Decoder tdec, adec;
    std::optional<Prop> prop;
    std::map<std::string, std::size_t, std::less<>> index;
};

class Builder {
   public:
    Builder(const ModelConfig& cfg, std::vector<ParamInfo>& params, std::size_t& norms, Spec& spec)
        : cfg_(cfg), params_(params), norms_(norms), spec_(spec) {}

    std::size_t add(const std::string& name, Shape shape, ParamKind kind, std::size_t fan_in = 0) {
        spec_.index[name] = params_.size();
        params_.push_back({name, std::move(shape), kind, fan_in});
        return params_.size() - 1;
    }

    Conv conv(const std::string& name, std::size_t in, std::size_t out, int kh, int kw, int stride, bool bias) {
        Conv c;
        c.w = add(name + ".w", Shape{out, in, std::size_t(kh), std::size_t(kw)}, ParamKind::kConvWeight,
                  in * std::size_t(kh * kw));
        if (bias) c.b = add(name + ".b", Shape{out}, ParamKind::kBias);
        c.stride = stride;
        c.ph = kh / 2;
        c.pw = kw / 2;
        return c;
    }

    Norm norm(const std::string& name, std::size_t channels) {
        Norm n;
        n.gamma = add(name + ".gamma", Shape{channels}, ParamKind::kNormScale);
        n.beta = add(name + ".beta", Shape{channels}, ParamKind::kNormShift);
        n.state = norms_++;
        return n;
    }

    ConvNorm conv_norm(const std::string& name, std::size_t in, std::size_t out, int k, int stride) {
        ConvNorm cn;
        cn.conv = conv(name + ".conv", in, out, k, k, stride, !cfg_.use_bn);
        if (cfg_.use_bn) cn.norm = norm(name + ".bn", out);
        return cn;
    }

    ResBlock res_block(const std::string& name, std::size_t in, std::size_t out, int stride) {
        ResBlock rb;
        rb.a = conv_norm(name + ".a", in, out, 3, stride);
        rb.b = conv_norm(name + ".b", out, out, 3, 1);
        if (in != out || stride != 1) rb.proj = conv_norm(name + ".proj", in, out, 1, stride);
        return rb;
    }

    Encoder encoder(const std::string& name, std::size_t in_channels) {
        Encoder e;
        std::size_t in = in_channels;
        for (std::size_t s = 0; s < cfg_.stages(); ++s) {
            std::vector<ResBlock> blocks;
            for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) {
                const std::string bn = name + ".s" + std::to_string(s) + ".b" + std::to_string(b);
                blocks.push_back(res_block(bn, in, cfg_.stage_widths[s], b == 0 ? 2 : 1));
                in = cfg_.stage_widths[s];
            }
            e.push_back(std::move(blocks));
        }
        return e;
    }

    Shortcut shortcut(const std::string& name, std::size_t channels) {
        Shortcut s;
        s.global = cfg_.use_gc;
        if (!s.global) {
            s.plain = conv(name + ".proj", channels, channels, 1, 1, 1, true);
            return s;
        }
        const int k = cfg_.gc_kernel;
        s.gc[0] = conv(name + ".gc_l1", channels, channels, k, 1, 1, true);
        s.gc[1] = conv(name + ".gc_l2", channels, channels, 1, k, 1, true);
        s.gc[2] = conv(name + ".gc_r1", channels, channels, 1, k, 1, true);
        s.gc[3] = conv(name + ".gc_r2", channels, channels, k, 1, 1, true);
        return s;
    }

    Up up(const std::string& name, std::size_t channels) {
        Up u;
        u.subpixel = cfg_.use_sp;
        const std::size_t out = u.subpixel ? 4 * channels : channels;
        u.conv = conv(name + ".conv", channels, out, 3, 3, 1, !cfg_.use_bn);
        if (cfg_.use_bn) u.norm = norm(name + ".bn", channels);
        return u;
    }

    // taps: encoder levels whose features are concatenated after the first decoder level.
    Decoder decoder(const std::string& name, bool start_shortcut, const std::vector<std::size_t>& taps,
                    std::size_t out_channels) {
        const auto& w = cfg_.stage_widths;
        const std::size_t S = cfg_.stages();
        Decoder d;
        if (start_shortcut) d.start = shortcut(name + ".start", w[S - 1]);
        std::size_t ch = w[S - 1];
        for (std::size_t jj = 0; jj < S; ++jj) {
            const std::size_t j = S - 1 - jj;
            const std::string ln = name + ".l" + std::to_string(j);
            DecoderLevel level;
            if (j < S - 1 && std::find(taps.begin(), taps.end(), j) != taps.end()) {
                level.shortcut = shortcut(ln + ".skip", w[j]);
                ch += w[j];
            }
            const std::size_t out = j >= 1 ? w[j - 1] : w[0];
            level.conv = conv_norm(ln + ".fuse", ch, out, 3, 1);
            level.up = up(ln + ".up", out);
            ch = out;
            d.levels.push_back(std::move(level));
        }
        d.head = conv(name + ".head", ch, out_channels, 3, 3, 1, true);
        return d;
    }

    Prop prop() {
        Prop p;
        p.r1 = res_block("prop.r1", 7, cfg_.prop_width, 1);
        p.r2 = res_block("prop.r2", cfg_.prop_width, cfg_.prop_width, 1);
        p.lstm = conv("prop.lstm", cfg_.prop_width + cfg_.lstm_hidden, 4 * cfg_.lstm_hidden, 3, 3, 1, true);
        p.out = conv("prop.out", cfg_.lstm_hidden, 1, 1, 1, 1, true);
        return p;
    }

   private:
    const ModelConfig& cfg_;
    std::vector<ParamInfo>& params_;
    std::size_t& norms_;
    Spec& spec_;
};

template <typename T>
class Runner {
   public:
    Runner(const ModelConfig& cfg, std::span<const Var<T>> p, std::span<ops::BatchNormState<T>> bn, const ForwardOptions& o)
        : cfg_(cfg), p_(p), bn_(bn), opt_(o) {}

    Var<T> conv(const Conv& c, Var<T> x) const {
        return ops::conv2d(x, p_[c.w], c.b ? p_[*c.b] : Var<T>{}, ops::Conv2dOptions{c.stride, c.ph, c.pw});
    }

    Var<T> norm(const Norm& n, Var<T> x) const {
        return ops::batch_norm2d(x, p_[n.gamma], p_[n.beta], bn_[n.state],
                                 ops::BatchNormOptions{opt_.train, cfg_.bn_eps, cfg_.bn_momentum});
    }

    Var<T> conv_norm(const ConvNorm& cn, Var<T> x) const {
        Var<T> y = conv(cn.conv, x);
        return cn.norm ? norm(*cn.norm, y) : y;
    }

    Var<T> res_block(const ResBlock& rb, Var<T> x) const {
        Var<T> y = ops::relu(conv_norm(rb.a, x));
        y = conv_norm(rb.b, y);
        const Var<T> s = rb.proj ? conv_norm(*rb.proj, x) : x;
        return ops::relu(ops::add(y, s));
    }

    std::vector<Var<T>> encoder(const Encoder& e, Var<T> x) const {
        std::vector<Var<T>> feats;
        for (const auto& stage : e) {
            for (const auto& rb : stage) x = res_block(rb, x);
            feats.push_back(x);
        }
        return feats;
    }

    Var<T> shortcut(const Shortcut& s, Var<T> x) const {
        if (!s.global) return conv(s.plain, x);
        const Var<T> w[4] = {p_[s.gc[0].w], p_[s.gc[1].w], p_[s.gc[2].w], p_[s.gc[3].w]};
        const Var<T> b[4] = {p_[*s.gc[0].b], p_[*s.gc[1].b], p_[*s.gc[2].b], p_[*s.gc[3].b]};
        return global_conv<T>(x, std::span<const Var<T>, 4>(w), std::span<const Var<T>, 4>(b));
    }

    Var<T> up(const Up& u, Var<T> x) const {
        Var<T> y = u.subpixel ? ops::pixel_shuffle(conv(u.conv, x), 2) : conv(u.conv, ops::upsample_nearest(x, 2));
        if (u.norm) y = norm(*u.norm, y);
        return ops::relu(y);
    }

    Var<T> decoder(const Decoder& d, const std::vector<Var<T>>& feats) const {
        const std::size_t S = feats.size();
        Var<T> x = feats[S - 1];
        if (d.start) x = shortcut(*d.start, x);
        for (std::size_t jj = 0; jj < S; ++jj) {
            const std::size_t j = S - 1 - jj;
            const DecoderLevel& level = d.levels[jj];
            if (level.shortcut) {
                const Var<T> parts[] = {x, shortcut(*level.shortcut, feats[j])};
                x = ops::concat_channels<T>(parts);
            }
            x = ops::relu(conv_norm(level.conv, x));
            x = up(level.up, x);
        }
        return conv(d.head, x);
    }

   private:
    const ModelConfig& cfg_;
    std::span<const Var<T>> p_;
    std::span<ops::BatchNormState<T>> bn_;
    const ForwardOptions& opt_;
};

}  // namespace detail

Network::Network(ModelConfig config) : config_(std::move(config)), spec_(std::make_unique<detail::Spec>()) {
    config_.validate();
    detail::Builder b(config_, params_, norm_layers_, *spec_);
    const std::size_t S = config_.stages();
    spec_->enc_t = b.encoder("enc", 4);
    if (!config_.shared_encoder) spec_->enc_a = b.encoder("enc_a", 4);
    // Trimap branch: deep and middle shortcuts. Alpha branch: middle and shallow.
    spec_->tdec = b.decoder("tdec", true, {S - 2}, 3);
    spec_->adec = b.decoder("adec", false, {S - 2, 0}, 1);
    if (config_.use_pu) spec_->prop = b.prop();
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += shape_numel(p.shape);
    return n;
}

std::size_t Network::param_index(std::string_view name) const {
    const auto it = spec_->index.find(name);
    if (it == spec_->index.end()) throw std::out_of_range("no parameter named " + std::string(name));
    return it->second;
}

std::vector<Tensor<float>> Network::init_params(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<float>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) {
        Tensor<float> t(p.shape);
        switch (p.kind) {
            case ParamKind::kConvWeight: {
                std::normal_distribution<float> d(0.0f, std::sqrt(2.0f / float(p.fan_in)));
                for (auto& v : t.data()) v = d(rng);
                break;
            }
            case ParamKind::kNormScale: t.fill(1.0f); break;
            case ParamKind::kBias:
            case ParamKind::kNormShift: break;
        }
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
std::vector<ops::BatchNormState<T>> Network::init_norm_state() const {
    std::vector<ops::BatchNormState<T>> out(norm_layers_);
    // Norm layers are registered in state order, one scale parameter each.
    std::size_t k = 0;
    for (const auto& p : params_) {
        if (p.kind != ParamKind::kNormScale) continue;
        out[k].running_mean = Tensor<T>(p.shape, T(0));
        out[k].running_var = Tensor<T>(p.shape, T(1));
        ++k;
    }
    return out;
}

template <typename T>
ForwardOutput<T> Network::forward(std::span<const Var<T>> params, std::span<ops::BatchNormState<T>> norm_state,
                                  Var<T> input, const ForwardOptions& options) const {
    if (params.size() != params_.size()) {
        throw std::invalid_argument("forward: expected " + std::to_string(params_.size()) + " parameters, got " +
                                    std::to_string(params.size()));
    }
    if (norm_state.size() != norm_layers_) throw std::invalid_argument("forward: norm state count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != params_[i].shape) {
            throw ShapeError("forward: parameter " + params_[i].name + " has shape " + shape_str(params[i].shape()) +
                             ", expected " + shape_str(params_[i].shape));
        }
    }
    const Shape& xs = input.shape();
    if (xs.size() != 4 || xs[1] != 4) throw ShapeError("forward: input must be [N,4,H,W], got " + shape_str(xs));
    const std::size_t n = xs[0], h = xs[2], w = xs[3];
    if (h % config_.stride() != 0 || w % config_.stride() != 0) {
        throw ShapeError("forward: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by " + std::to_string(config_.stride()));
    }

    const detail::Runner<T> run(config_, params, norm_state, options);
    ForwardOutput<T> out;
    const auto feats_t = run.encoder(spec_->enc_t, input);
    out.trimap_logits = run.decoder(spec_->tdec, feats_t);
    out.trimap_probs = ops::softmax_channel(out.trimap_logits);
    const Var<T> rgb = ops::slice_channels(input, 0, 3);

    std::vector<Var<T>> feats_a = feats_t;
    if (spec_->enc_a) {
        // Cascaded variant: the alpha encoder sees RGB plus the soft trimap encoded like the input channel.
        const Var<T> soft = ops::add(ops::scale(ops::slice_channels(out.trimap_probs, 1, 2), T(0.5)),
                                     ops::slice_channels(out.trimap_probs, 2, 3));
        const Var<T> parts[] = {rgb, soft};
        feats_a = run.encoder(*spec_->enc_a, ops::concat_channels<T>(parts));
    }
    out.alpha_intermediate = ops::sigmoid(run.decoder(spec_->adec, feats_a));

    if (spec_->prop) {
        const auto& pu = *spec_->prop;
        Tape<T>& tape = input.tape();
        const Shape state_shape{n, config_.lstm_hidden, h, w};
        LstmState<T> state{tape.constant(Tensor<T>(state_shape)), tape.constant(Tensor<T>(state_shape))};
        Var<T> alpha = out.alpha_intermediate;
        for (int s = 0; s < config_.prop_steps; ++s) {
            const Var<T> parts[] = {rgb, out.trimap_probs, alpha};
            Var<T> x = run.res_block(pu.r1, ops::concat_channels<T>(parts));
            x = run.res_block(pu.r2, x);
            if (options.reset_lstm_state && s > 0) {
                state = {tape.constant(Tensor<T>(state_shape)), tape.constant(Tensor<T>(state_shape))};
            }
            state = conv_lstm_step(x, state, params[pu.lstm.w], params[*pu.lstm.b]);
            alpha = ops::sigmoid(run.conv(pu.out, state.h));
            out.alpha_steps.push_back(alpha);
        }
    }

    out.trimap_labels = argmax_labels(out.trimap_logits.value());
    out.alpha_final = out.last_alpha().value();
    for (std::size_t i = 0; i < out.trimap_labels.size(); ++i) {
        if (out.trimap_labels[i] == 2) {
            out.alpha_final[i] = T(1);
        } else if (out.trimap_labels[i] == 0) {
            out.alpha_final[i] = T(0);
        }
    }
    return out;
}

template <typename T>
Var<T> global_conv(Var<T> x, std::span<const Var<T>, 4> w, std::span<const Var<T>, 4> b) {
    const std::size_t k = w[0].dim(2);
    if (k % 2 == 0) throw std::invalid_argument("global_conv: kernel size must be odd");
    const Shape col{w[0].dim(0), w[0].dim(1), k, 1};
    if (w[0].shape() != col || w[3].dim(2) != k || w[3].dim(3) != 1 || w[1].dim(2) != 1 || w[1].dim(3) != k ||
        w[2].dim(2) != 1 || w[2].dim(3) != k) {
        throw ShapeError("global_conv: expected k x 1, 1 x k, 1 x k, k x 1 kernels");
    }
    const int p = int(k / 2);
    const Var<T> left = ops::conv2d(ops::conv2d(x, w[0], b[0], {1, p, 0}), w[1], b[1], {1, 0, p});
    const Var<T> right = ops::conv2d(ops::conv2d(x, w[2], b[2], {1, 0, p}), w[3], b[3], {1, p, 0});
    return ops::add(left, right);
}

template <typename T>
LstmState<T> conv_lstm_step(Var<T> x, LstmState<T> state, Var<T> kernel, Var<T> bias) {
    if (x.shape().size() != 4 || state.h.shape().size() != 4 || x.dim(0) != state.h.dim(0) ||
        x.dim(2) != state.h.dim(2) || x.dim(3) != state.h.dim(3) || state.c.shape() != state.h.shape()) {
        throw ShapeError("conv_lstm_step: input " + shape_str(x.shape()) + " and state " + shape_str(state.h.shape()) +
                         " / " + shape_str(state.c.shape()) + " do not match");
    }
    const std::size_t hid = state.h.dim(1);
    if (kernel.dim(0) != 4 * hid) throw ShapeError("conv_lstm_step: kernel must produce 4*hidden channels");
    const Var<T> parts[] = {x, state.h};
    const Var<T> z = ops::conv2d(ops::concat_channels<T>(parts), kernel, bias, 1, int(kernel.dim(2) / 2));
    const Var<T> i = ops::sigmoid(ops::slice_channels(z, 0, hid));
    const Var<T> f = ops::sigmoid(ops::slice_channels(z, hid, 2 * hid));
    const Var<T> o = ops::sigmoid(ops::slice_channels(z, 2 * hid, 3 * hid));
    const Var<T> g = ops::tanh(ops::slice_channels(z, 3 * hid, 4 * hid));
    const Var<T> c = ops::add(ops::mul(f, state.c), ops::mul(i, g));
    return {ops::mul(o, ops::tanh(c)), c};
}

template <typename T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& logits) {
    if (logits.rank() != 4 || logits.dim(1) != 3) throw ShapeError("argmax_labels: logits must be [N,3,H,W]");
    const std::size_t n = logits.dim(0), hw = logits.dim(2) * logits.dim(3);
    std::vector<std::uint8_t> out(n * hw);
    for (std::size_t b = 0; b < n; ++b) {
        const T* base = logits.ptr() + b * 3 * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            const T bg = base[i], un = base[hw + i], fg = base[2 * hw + i];
            out[b * hw + i] = (un >= fg && un >= bg) ? 1 : (fg >= bg ? 2 : 0);
        }
    }
    return out;
}

#define ADAMAT_INSTANTIATE_MODEL(T)                                                                              \
    template std::vector<ops::BatchNormState<T>> Network::init_norm_state<T>() const;                             \
    template ForwardOutput<T> Network::forward<T>(std::span<const Var<T>>, std::span<ops::BatchNormState<T>>,     \
                                                  Var<T>, const ForwardOptions&) const;                           \
    template Var<T> global_conv<T>(Var<T>, std::span<const Var<T>, 4>, std::span<const Var<T>, 4>);              \
    template LstmState<T> conv_lstm_step<T>(Var<T>, LstmState<T>, Var<T>, Var<T>);                               \
    template std::vector<std::uint8_t> argmax_labels<T>(const Tensor<T>&);

ADAMAT_INSTANTIATE_MODEL(float)
ADAMAT_INSTANTIATE_MODEL(double)

}  // namespace adamat::model
