#include "adamat/trainer.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "adamat/matting.hpp"

namespace adamat::train {

namespace fs = std::filesystem;

double poly_lr(std::size_t iter, std::size_t max_iter, double base, double p) {
    if (max_iter == 0) throw std::invalid_argument("poly_lr: max_iter must be positive");
    if (iter > max_iter) {
        throw std::invalid_argument("poly_lr: iteration " + std::to_string(iter) + " beyond max_iter " +
                                    std::to_string(max_iter));
    }
    return base * std::pow(1.0 - double(iter) / double(max_iter), p);
}

AdamState AdamState::zeros_like(const std::vector<Tensor<float>>& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.shape());
        s.v.emplace_back(p.shape());
    }
    return s;
}

void adam_step(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               const AdamOptions& o, const std::vector<bool>& decay) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size() ||
        decay.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient, moment and decay lists differ in length");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].shape() || state.m[i].shape() != params[i].shape() ||
            state.v[i].shape() != params[i].shape()) {
            throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(i));
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        float* p = params[i].ptr();
        const float* g = grads[i].ptr();
        float* m = state.m[i].ptr();
        float* v = state.v[i].ptr();
        const double wd = decay[i] ? o.weight_decay : 0.0;
        for (std::size_t k = 0; k < params[i].numel(); ++k) {
            const double gk = double(g[k]) + wd * double(p[k]);
            const double mk = o.beta1 * double(m[k]) + (1 - o.beta1) * gk;
            const double vk = o.beta2 * double(v[k]) + (1 - o.beta2) * gk * gk;
            m[k] = float(mk);
            v[k] = float(vk);
            p[k] = float(double(p[k]) - o.lr * (mk / c1) / (std::sqrt(vk / c2) + o.eps));
        }
    }
}

// ---------------------------------------------------------------------------------------------
// configuration

void TrainConfig::validate() const {
    if (!(base_lr > 0)) throw std::invalid_argument("train.base_lr must be positive");
    if (!(poly_p > 0)) throw std::invalid_argument("train.poly_p must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
        throw std::invalid_argument("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (!(adam_eps > 0)) throw std::invalid_argument("train.adam_eps must be positive");
    if (!(weight_decay >= 0)) throw std::invalid_argument("train.weight_decay must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("train.batch_size must be at least 1");
    if (epochs < 1) throw std::invalid_argument("train.epochs must be at least 1");
    if (!(sigma_init > 0)) throw std::invalid_argument("train.sigma_init must be positive");
    if (d_min < 0 || d_max < d_min) throw std::invalid_argument("train: need 0 <= d_min <= d_max");
    loss.validate();
    augment.validate();
}

nlohmann::json augment_to_json(const synth::AugmentConfig& a) {
    return {{"flip_prob", a.flip_prob}, {"scale_min", a.scale_min}, {"scale_max", a.scale_max},
            {"rotation_deg", a.rotation_deg}, {"crop_min", a.crop_min}, {"crop_max", a.crop_max},
            {"out_size", a.out_size}};
}

synth::AugmentConfig augment_from_json(const nlohmann::json& j) {
    synth::AugmentConfig a;
    for (const auto& [key, value] : j.items()) {
        if (key == "flip_prob") a.flip_prob = value.get<float>();
        else if (key == "scale_min") a.scale_min = value.get<float>();
        else if (key == "scale_max") a.scale_max = value.get<float>();
        else if (key == "rotation_deg") a.rotation_deg = value.get<float>();
        else if (key == "crop_min") a.crop_min = value.get<std::size_t>();
        else if (key == "crop_max") a.crop_max = value.get<std::size_t>();
        else if (key == "out_size") a.out_size = value.get<std::size_t>();
        else throw std::invalid_argument("augment: unknown key '" + key + "'");
    }
    a.validate();
    return a;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"base_lr", base_lr},
            {"poly_p", poly_p},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"weight_decay", weight_decay},
            {"decay_norm_params", decay_norm_params},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"sigma_init", sigma_init},
            {"seed", seed},
            {"loss", loss.to_json()},
            {"augment", augment_to_json(augment)},
            {"resample_trimap", resample_trimap},
            {"d_min", d_min},
            {"d_max", d_max},
            {"keep_checkpoints", keep_checkpoints}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "base_lr") c.base_lr = value.get<double>();
        else if (key == "poly_p") c.poly_p = value.get<double>();
        else if (key == "beta1") c.beta1 = value.get<double>();
        else if (key == "beta2") c.beta2 = value.get<double>();
        else if (key == "adam_eps") c.adam_eps = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "decay_norm_params") c.decay_norm_params = value.get<bool>();
        else if (key == "epochs") c.epochs = value.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
        else if (key == "sigma_init") c.sigma_init = value.get<double>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "loss") c.loss = losses::LossConfig::from_json(value);
        else if (key == "augment") c.augment = augment_from_json(value);
        else if (key == "resample_trimap") c.resample_trimap = value.get<bool>();
        else if (key == "d_min") c.d_min = value.get<int>();
        else if (key == "d_max") c.d_max = value.get<int>();
        else if (key == "keep_checkpoints") c.keep_checkpoints = value.get<std::size_t>();
        else throw std::invalid_argument("train: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------------------------
// checkpoints

namespace {

constexpr const char* kFormat = "adamat-checkpoint";

std::uint32_t crc_of(const std::string& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(bytes.data(), std::streamsize(bytes.size()));
    if (!os) throw DataError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

nlohmann::json file_entry(const std::string& bytes) { return {{"bytes", bytes.size()}, {"crc32", crc_of(bytes)}}; }

void verify_file(const nlohmann::json& entry, const std::string& bytes, const std::string& name) {
    if (bytes.size() != entry.at("bytes").get<std::size_t>()) {
        throw DataError("checkpoint " + name + ": expected " + std::to_string(entry.at("bytes").get<std::size_t>()) +
                        " bytes, found " + std::to_string(bytes.size()));
    }
    if (crc_of(bytes) != entry.at("crc32").get<std::uint32_t>()) {
        throw DataError("checkpoint " + name + ": CRC32 mismatch, file is corrupt");
    }
}

Tensor<float> expect_shape(Tensor<float> t, const Shape& shape, const std::string& what) {
    if (t.shape() != shape) {
        throw DataError("checkpoint: " + what + " has shape " + shape_str(t.shape()) + ", expected " +
                        shape_str(shape));
    }
    return t;
}

std::vector<Tensor<float>> with_task(std::vector<Tensor<float>> params, const Tensor<float>& s1,
                                     const Tensor<float>& s2) {
    params.push_back(s1);
    params.push_back(s2);
    return params;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
    const model::Network net(ckpt.model);
    const auto& infos = net.params();
    if (ckpt.state.params.size() != infos.size() || ckpt.state.norm.size() != net.norm_layers()) {
        throw std::invalid_argument("save_checkpoint: state does not match the model configuration");
    }
    if (ckpt.optimizer.m.size() != infos.size() + 2 || ckpt.optimizer.v.size() != infos.size() + 2) {
        throw std::invalid_argument("save_checkpoint: optimizer moments do not match the parameters");
    }

    std::ostringstream params;
    for (const auto& p : ckpt.state.params) write_tensor(params, p);
    for (const auto& n : ckpt.state.norm) {
        write_tensor(params, n.running_mean);
        write_tensor(params, n.running_var);
    }
    write_tensor(params, Tensor<float>(Shape{2}, std::vector<float>{float(ckpt.task.s1), float(ckpt.task.s2)}));

    std::ostringstream opt;
    for (const auto& m : ckpt.optimizer.m) write_tensor(opt, m);
    for (const auto& v : ckpt.optimizer.v) write_tensor(opt, v);

    const std::string params_bytes = params.str(), opt_bytes = opt.str();
    nlohmann::json names = nlohmann::json::array();
    for (const auto& info : infos) names.push_back(info.name);
    const nlohmann::json manifest{{"format", kFormat},
                                  {"version", Checkpoint::kVersion},
                                  {"iteration", ckpt.iteration},
                                  {"adam_step", ckpt.optimizer.step},
                                  {"model", ckpt.model.to_json()},
                                  {"train", ckpt.train.to_json()},
                                  {"task_weights", {{"s1", ckpt.task.s1}, {"s2", ckpt.task.s2}}},
                                  {"rng_state", ckpt.rng_state},
                                  {"param_names", names},
                                  {"norm_layers", ckpt.state.norm.size()},
                                  {"files", {{"params.bin", file_entry(params_bytes)}, {"opt.bin", file_entry(opt_bytes)}}}};
    fs::create_directories(dir);
    write_file(dir / "params.bin", params_bytes);
    write_file(dir / "opt.bin", opt_bytes);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint manifest is malformed: " + std::string(e.what()));
    }
    try {
        if (manifest.at("format") != kFormat) throw DataError("not a checkpoint manifest: " + dir.string());
        const int version = manifest.at("version").get<int>();
        if (version != Checkpoint::kVersion) {
            throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(Checkpoint::kVersion) + ")");
        }
        const std::string params_bytes = read_file(dir / "params.bin");
        const std::string opt_bytes = read_file(dir / "opt.bin");
        verify_file(manifest.at("files").at("params.bin"), params_bytes, "params.bin");
        verify_file(manifest.at("files").at("opt.bin"), opt_bytes, "opt.bin");

        Checkpoint c;
        c.model = model::ModelConfig::from_json(manifest.at("model"));
        c.model.validate();
        c.train = TrainConfig::from_json(manifest.at("train"));
        c.iteration = manifest.at("iteration").get<std::size_t>();
        c.rng_state = manifest.at("rng_state").get<std::string>();
        const model::Network net(c.model);
        const auto& infos = net.params();

        std::istringstream ps(params_bytes);
        for (const auto& info : infos) c.state.params.push_back(expect_shape(read_tensor<float>(ps), info.shape, info.name));
        const auto norms = net.init_norm_state<float>();
        for (const auto& n : norms) {
            auto mean = expect_shape(read_tensor<float>(ps), n.running_mean.shape(), "running mean");
            auto var = expect_shape(read_tensor<float>(ps), n.running_var.shape(), "running variance");
            c.state.norm.push_back({std::move(mean), std::move(var)});
        }
        const auto task = expect_shape(read_tensor<float>(ps), Shape{2}, "task weights");
        c.task = {task[0], task[1]};
        if (ps.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint params.bin has trailing data");

        std::istringstream os(opt_bytes);
        const auto trainable = with_task(c.state.params, Tensor<float>(Shape{1}), Tensor<float>(Shape{1}));
        for (int pass = 0; pass < 2; ++pass) {
            auto& dst = pass == 0 ? c.optimizer.m : c.optimizer.v;
            for (const auto& p : trainable) dst.push_back(expect_shape(read_tensor<float>(os), p.shape(), "moment"));
        }
        if (os.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint opt.bin has trailing data");
        c.optimizer.step = manifest.at("adam_step").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint manifest is incomplete: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw DataError("checkpoint configuration is invalid: " + std::string(e.what()));
    }
}

fs::path epoch_dir(const fs::path& out_dir, std::size_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03zu", epoch);
    return out_dir / "ckpt" / name;
}

// ---------------------------------------------------------------------------------------------
// batches

Tensor<float> pack_input(const ImageRGB& image, const Trimap& trimap) {
    if (!image.same_extent(trimap)) throw ShapeError("pack_input: image and trimap extents differ");
    const std::size_t h = image.height(), w = image.width(), plane = h * w;
    Tensor<float> x(Shape{1, 4, h, w});
    std::copy(image.data().begin(), image.data().end(), x.ptr());
    for (std::size_t i = 0; i < plane; ++i) {
        x[3 * plane + i] = model::trimap_channel_value(static_cast<std::uint8_t>(trimap[i]));
    }
    return x;
}

Batch make_batch(const std::vector<synth::SampleRecord>& samples) {
    if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
    const std::size_t h = samples[0].alpha_gt.height(), w = samples[0].alpha_gt.width(), plane = h * w;
    const std::size_t n = samples.size();
    Batch b;
    b.input = Tensor<float>(Shape{n, 4, h, w});
    b.alpha_gt = Tensor<float>(Shape{n, 1, h, w});
    b.t_opt.resize(n * plane);
    b.input_unknown.resize(n * plane);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = samples[k];
        if (!s.alpha_gt.same_extent(h, w) || !s.image.same_extent(s.alpha_gt) || !s.trimap_in.same_extent(s.alpha_gt)) {
            throw ShapeError("make_batch: samples differ in extent");
        }
        const Tensor<float> x = pack_input(s.image, s.trimap_in);
        std::copy(x.ptr(), x.ptr() + x.numel(), b.input.ptr() + k * 4 * plane);
        std::copy(s.alpha_gt.values().begin(), s.alpha_gt.values().end(), b.alpha_gt.ptr() + k * plane);
        const Trimap t_opt = derive_optimal_trimap(s.alpha_gt);
        for (std::size_t i = 0; i < plane; ++i) {
            b.t_opt[k * plane + i] = static_cast<std::uint8_t>(t_opt[i]);
            b.input_unknown[k * plane + i] = s.trimap_in[i] == Label::kUnknown ? 1 : 0;
        }
    }
    return b;
}

synth::SampleRecord prepare_sample(const synth::SampleRecord& s, const TrainConfig& cfg, synth::Rng& rng) {
    synth::SampleRecord out = synth::augment(s, cfg.augment, rng);
    const std::size_t extent = std::min(out.alpha_gt.height(), out.alpha_gt.width());
    const std::size_t lo = std::min(cfg.augment.crop_min, extent), hi = std::min(cfg.augment.crop_max, extent);
    const std::size_t crop = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    out = synth::crop_on_unknown(out, crop, cfg.augment.out_size, rng);
    if (cfg.resample_trimap) {
        const auto radii = synth::random_radii(cfg.d_min, cfg.d_max, rng);
        out.trimap_in = degrade_trimap(derive_optimal_trimap(out.alpha_gt), radii.fg, radii.bg);
        out.meta["radii"] = {radii.fg, radii.bg};
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// trainer

namespace {

synth::Rng seeded_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream), std::uint32_t(index),
                      std::uint32_t(index >> 32)};
    return synth::Rng(seq);
}

constexpr std::uint64_t kAugmentStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

}  // namespace

Trainer::Trainer(model::ModelConfig model_config, TrainConfig config, std::vector<synth::SampleRecord> data)
    : config_(std::move(config)), network_(std::move(model_config)), data_(std::move(data)) {
    config_.validate();
    if (data_.empty()) throw DataError("training set is empty");
    state_.params = network_.init_params(config_.seed);
    state_.norm = network_.init_norm_state<float>();
    s1_ = Tensor<float>::scalar(float(std::log(config_.sigma_init)));
    s2_ = s1_;
    adam_ = AdamState::zeros_like(with_task(state_.params, s1_, s2_));
    rng_ = seeded_rng(config_.seed, kAugmentStream, 0);
    init_decay_mask();
}

Trainer::Trainer(const Checkpoint& ckpt, std::vector<synth::SampleRecord> data)
    : config_(ckpt.train), network_(ckpt.model), data_(std::move(data)), state_(ckpt.state) {
    config_.validate();
    if (data_.empty()) throw DataError("training set is empty");
    s1_ = Tensor<float>::scalar(float(ckpt.task.s1));
    s2_ = Tensor<float>::scalar(float(ckpt.task.s2));
    adam_ = ckpt.optimizer;
    iteration_ = ckpt.iteration;
    std::istringstream is(ckpt.rng_state);
    is >> rng_;
    if (!is) throw DataError("checkpoint RNG state is malformed");
    if (iteration_ > max_iter()) throw DataError("checkpoint iteration exceeds the schedule for this dataset");
    init_decay_mask();
}

void Trainer::init_decay_mask() {
    decay_.clear();
    for (const auto& info : network_.params()) decay_.push_back(config_.decay_norm_params || !info.is_norm());
    decay_.push_back(false);
    decay_.push_back(false);
}

std::size_t Trainer::iters_per_epoch() const { return (data_.size() + config_.batch_size - 1) / config_.batch_size; }

std::vector<std::size_t> Trainer::batch_indices(std::size_t iter) const {
    const std::size_t ipe = iters_per_epoch(), epoch = iter / ipe, k = iter % ipe;
    std::vector<std::size_t> perm(data_.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = seeded_rng(config_.seed, kShuffleStream, epoch);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t begin = k * config_.batch_size, end = std::min(perm.size(), begin + config_.batch_size);
    return {perm.begin() + long(begin), perm.begin() + long(end)};
}

losses::TaskWeights Trainer::task_weights() const { return {double(s1_[0]), double(s2_[0])}; }

StepStats Trainer::step() {
    if (done()) throw std::logic_error("Trainer::step: schedule already complete");
    std::vector<synth::SampleRecord> prepared;
    for (std::size_t i : batch_indices(iteration_)) prepared.push_back(prepare_sample(data_[i], config_, rng_));
    const Batch batch = make_batch(prepared);

    const bool uncertainty = config_.loss.mode == losses::LossMode::kUncertainty;
    Tape<float> tape;
    std::vector<Var<float>> vars;
    vars.reserve(state_.params.size());
    for (const auto& p : state_.params) vars.push_back(tape.leaf(p, true));
    Var<float> s1 = tape.leaf(s1_, uncertainty), s2 = tape.leaf(s2_, uncertainty);
    auto norm = state_.norm;
    const auto out = network_.forward<float>(vars, norm, tape.constant(batch.input), model::ForwardOptions{true, false});
    const auto terms = losses::objective(out, batch.alpha_gt, batch.t_opt, batch.input_unknown, s1, s2, config_.loss);
    tape.backward(terms.total);

    std::vector<Tensor<float>> grads;
    grads.reserve(vars.size() + 2);
    for (const auto& v : vars) grads.push_back(tape.grad(v));
    grads.push_back(tape.grad(s1));
    grads.push_back(tape.grad(s2));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].all_finite()) {
            const std::string name = i < network_.params().size() ? network_.params()[i].name : "task weight";
            throw NumericalError("non-finite gradient for " + name + " at iteration " + std::to_string(iteration_));
        }
    }

    StepStats st;
    st.iter = iteration_;
    st.lr = poly_lr(iteration_, max_iter(), config_.base_lr, config_.poly_p);
    st.l_t = terms.trimap.value().item();
    st.l_a = terms.alpha.value().item();
    st.total = terms.total.value().item();
    st.sigma1 = std::exp(double(s1_[0]));
    st.sigma2 = std::exp(double(s2_[0]));
    st.fallback_samples = terms.fallback_samples;

    std::vector<Tensor<float>> trainable = std::move(state_.params);
    trainable.push_back(std::move(s1_));
    trainable.push_back(std::move(s2_));
    adam_step(trainable, grads,
              adam_, AdamOptions{st.lr, config_.beta1, config_.beta2, config_.adam_eps, config_.weight_decay}, decay_);
    s2_ = std::move(trainable.back());
    trainable.pop_back();
    s1_ = std::move(trainable.back());
    trainable.pop_back();
    state_.params = std::move(trainable);
    state_.norm = std::move(norm);
    ++iteration_;
    return st;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.model = network_.config();
    c.train = config_;
    c.state = state_;
    c.task = task_weights();
    c.optimizer = adam_;
    c.iteration = iteration_;
    std::ostringstream os;
    os << rng_;
    c.rng_state = os.str();
    return c;
}

namespace {

void prune_checkpoints(const fs::path& out_dir, std::size_t keep, std::size_t newest_epoch) {
    if (keep == 0) return;
    for (std::size_t e = 1; e + keep <= newest_epoch; ++e) {
        const fs::path d = epoch_dir(out_dir, e);
        if (fs::exists(d)) fs::remove_all(d);
    }
}

TrainResult run(Trainer& trainer, const fs::path& out_dir, bool append,
                const std::function<void(const StepStats&)>& on_step) {
    fs::create_directories(out_dir);
    const fs::path csv = out_dir / "loss.csv";
    const bool fresh = !append || !fs::exists(csv);
    std::ofstream log(csv, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("cannot write " + csv.string());
    if (fresh) losses::write_loss_csv_header(log);

    TrainResult result;
    const std::size_t ipe = trainer.iters_per_epoch();
    while (!trainer.done()) {
        StepStats st;
        try {
            st = trainer.step();
        } catch (const NumericalError& e) {
            const fs::path dump = out_dir / "nan_dump";
            save_checkpoint(trainer.checkpoint(), dump);
            nlohmann::json diag{{"iteration", trainer.iteration()},
                                {"error", e.what()},
                                {"batch", trainer.batch_indices(trainer.iteration())},
                                {"note", "parameters are those before the failing step"}};
            std::ofstream(dump / "diagnostics.json") << diag.dump(2) << "\n";
            throw;
        }
        const losses::LossRecord rec{st.iter, st.l_t, st.l_a, st.sigma1, st.sigma2, st.total};
        losses::write_loss_csv_row(log, rec);
        result.log.push_back(rec);
        if (on_step) on_step(st);
        if (trainer.iteration() % ipe == 0 || trainer.done()) {
            const std::size_t epoch = (trainer.iteration() + ipe - 1) / ipe;
            save_checkpoint(trainer.checkpoint(), epoch_dir(out_dir, epoch));
            prune_checkpoints(out_dir, trainer.config().keep_checkpoints, epoch);
        }
    }
    log.flush();
    result.final = trainer.checkpoint();
    return result;
}

}  // namespace

TrainResult train(std::vector<synth::SampleRecord> data, const TrainConfig& config,
                  const model::ModelConfig& model_config, const fs::path& out_dir,
                  const std::function<void(const StepStats&)>& on_step) {
    model_config.validate();
    Trainer trainer(model_config, config, std::move(data));
    fs::create_directories(out_dir);
    const nlohmann::json resolved{{"model", model_config.to_json()}, {"train", config.to_json()}};
    std::ofstream(out_dir / "config.json") << resolved.dump(2) << "\n";
    return run(trainer, out_dir, false, on_step);
}

TrainResult resume(std::vector<synth::SampleRecord> data, const Checkpoint& ckpt, const fs::path& out_dir,
                   const std::function<void(const StepStats&)>& on_step) {
    Trainer trainer(ckpt, std::move(data));
    return run(trainer, out_dir, true, on_step);
}

}  // namespace adamat::train
