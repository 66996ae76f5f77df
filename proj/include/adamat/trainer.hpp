#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adamat/losses.hpp"
#include "adamat/model.hpp"
#include "adamat/ops.hpp"
#include "adamat/synth.hpp"
#include "adamat/tensor.hpp"

namespace adamat::train {

/// base * (1 - iter / max_iter)^p for 0 <= iter <= max_iter.
double poly_lr(std::size_t iter, std::size_t max_iter, double base, double p);

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Coupled L2: weight_decay * param is added to the gradient before the moment updates.
    double weight_decay = 0;
};

struct AdamState {
    std::vector<Tensor<float>> m;
    std::vector<Tensor<float>> v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const std::vector<Tensor<float>>& params);
};

/// One bias-corrected Adam update. `decay[i] == false` exempts tensor i from weight decay.
void adam_step(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               const AdamOptions& options, const std::vector<bool>& decay);

struct TrainConfig {
    double base_lr = 1e-4;
    double poly_p = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-4;
    bool decay_norm_params = false;
    std::size_t epochs = 50;
    std::size_t batch_size = 4;
    double sigma_init = 4.0;
    std::uint64_t seed = 1;
    losses::LossConfig loss;
    synth::AugmentConfig augment{0.5f, 0.75f, 1.5f, 45.0f, 48, 64, 64};
    /// Draw a fresh degraded trimap from the optimal one every time a sample is used.
    bool resample_trimap = true;
    int d_min = 3;
    int d_max = 15;
    /// Keep only the newest N epoch checkpoints; 0 keeps all.
    std::size_t keep_checkpoints = 0;

    void validate() const;
    nlohmann::json to_json() const;
    /// Unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
};

nlohmann::json augment_to_json(const synth::AugmentConfig& a);
synth::AugmentConfig augment_from_json(const nlohmann::json& j);

/// Everything needed to run the network: parameters and normalization statistics.
struct ModelState {
    std::vector<Tensor<float>> params;
    std::vector<ops::BatchNormState<float>> norm;
};

struct Checkpoint {
    static constexpr int kVersion = 1;

    model::ModelConfig model;
    TrainConfig train;
    ModelState state;
    losses::TaskWeights task;
    /// Moments for the model parameters followed by s1 and s2.
    AdamState optimizer;
    std::size_t iteration = 0;
    std::string rng_state;
};

/// Writes manifest.json, params.bin and opt.bin into `dir` (created if needed).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Throws DataError on version mismatch, truncated blobs or checksum failures.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::filesystem::path epoch_dir(const std::filesystem::path& out_dir, std::size_t epoch);

/// Network input and targets for a list of equally sized samples.
struct Batch {
    Tensor<float> input;     // [N,4,H,W]
    Tensor<float> alpha_gt;  // [N,1,H,W]
    std::vector<std::uint8_t> t_opt;
    std::vector<std::uint8_t> input_unknown;
};

Tensor<float> pack_input(const ImageRGB& image, const Trimap& trimap);
Batch make_batch(const std::vector<synth::SampleRecord>& samples);

/// Training-time view of a sample: augment, crop around the unknown region, and (optionally)
/// replace the input trimap with a fresh degradation of the optimal one.
synth::SampleRecord prepare_sample(const synth::SampleRecord& s, const TrainConfig& cfg, synth::Rng& rng);

struct StepStats {
    std::size_t iter = 0;
    double lr = 0;
    double l_t = 0;
    double l_a = 0;
    double total = 0;
    double sigma1 = 0;
    double sigma2 = 0;
    std::size_t fallback_samples = 0;
};

class Trainer {
   public:
    Trainer(model::ModelConfig model_config, TrainConfig config, std::vector<synth::SampleRecord> data);
    /// Continues from a checkpoint; `data` must be the dataset it was trained on.
    Trainer(const Checkpoint& ckpt, std::vector<synth::SampleRecord> data);

    std::size_t iteration() const { return iteration_; }
    std::size_t iters_per_epoch() const;
    std::size_t max_iter() const { return iters_per_epoch() * config_.epochs; }
    bool done() const { return iteration_ >= max_iter(); }

    /// One optimization step. Throws NumericalError on a non-finite loss or gradient, leaving
    /// the parameters untouched.
    StepStats step();

    Checkpoint checkpoint() const;

    const model::Network& network() const { return network_; }
    const ModelState& state() const { return state_; }
    losses::TaskWeights task_weights() const;
    const TrainConfig& config() const { return config_; }
    /// Dataset indices of the batch used by the step at `iter`.
    std::vector<std::size_t> batch_indices(std::size_t iter) const;

   private:
    void init_decay_mask();

    TrainConfig config_;
    model::Network network_;
    std::vector<synth::SampleRecord> data_;
    ModelState state_;
    Tensor<float> s1_, s2_;
    AdamState adam_;
    std::vector<bool> decay_;
    std::size_t iteration_ = 0;
    synth::Rng rng_;
};

struct TrainResult {
    Checkpoint final;
    std::vector<losses::LossRecord> log;
};

/// Trains to completion, writing `out_dir/loss.csv`, `out_dir/config.json` and
/// `out_dir/ckpt/epoch_NNN/`. A numerical failure writes `out_dir/nan_dump/` before rethrowing.
TrainResult train(std::vector<synth::SampleRecord> data, const TrainConfig& config,
                  const model::ModelConfig& model_config, const std::filesystem::path& out_dir,
                  const std::function<void(const StepStats&)>& on_step = {});

/// Same, but continues an existing checkpoint.
TrainResult resume(std::vector<synth::SampleRecord> data, const Checkpoint& ckpt,
                   const std::filesystem::path& out_dir, const std::function<void(const StepStats&)>& on_step = {});

}  // namespace adamat::train
