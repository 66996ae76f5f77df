#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adamat/autograd.hpp"
#include "adamat/ops.hpp"
#include "adamat/tensor.hpp"

namespace adamat::model {

struct ModelConfig {
    std::size_t in_size = 64;
    std::vector<std::size_t> stage_widths{16, 32, 64};
    std::size_t blocks_per_stage = 1;
    int gc_kernel = 7;
    std::size_t lstm_hidden = 16;
    std::size_t prop_width = 16;  // channels of the propagation unit's residual blocks
    int prop_steps = 3;
    bool use_sp = true;
    bool use_gc = true;
    bool use_pu = true;
    bool shared_encoder = true;
    bool use_bn = true;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    void validate() const;
    std::size_t stages() const { return stage_widths.size(); }
    /// Total spatial downsampling of the encoder.
    std::size_t stride() const { return std::size_t(1) << stages(); }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

enum class ParamKind : std::uint8_t { kConvWeight, kBias, kNormScale, kNormShift };

struct ParamInfo {
    std::string name;
    Shape shape;
    ParamKind kind;
    std::size_t fan_in = 0;

    bool is_norm() const { return kind == ParamKind::kNormScale || kind == ParamKind::kNormShift; }
};

/// Options that vary between calls rather than between models.
struct ForwardOptions {
    bool train = false;
    /// Zero the LSTM state before every propagation step (memory ablation probe).
    bool reset_lstm_state = false;
};

template <typename T>
struct ForwardOutput {
    Var<T> trimap_logits;               // [N,3,H,W]
    Var<T> trimap_probs;                // softmax of the logits
    Var<T> alpha_intermediate;          // [N,1,H,W]
    std::vector<Var<T>> alpha_steps;    // prop_steps entries when the propagation unit is enabled
    std::vector<std::uint8_t> trimap_labels;  // argmax of the logits, [N*H*W]
    Tensor<T> alpha_final;              // fused, [N,1,H,W]

    Var<T> last_alpha() const { return alpha_steps.empty() ? alpha_intermediate : alpha_steps.back(); }
};

namespace detail {
struct Spec;
}

/// Architecture of the multi-task network: parameter layout plus the wiring used by forward().
class Network {
   public:
    explicit Network(ModelConfig config);
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    const ModelConfig& config() const { return config_; }
    const std::vector<ParamInfo>& params() const { return params_; }
    std::size_t param_count() const;
    std::size_t norm_layers() const { return norm_layers_; }

    /// He fan-in normal init for kernels, zero biases, unit scale and zero shift for norms.
    std::vector<Tensor<float>> init_params(std::uint64_t seed) const;
    template <typename T>
    std::vector<ops::BatchNormState<T>> init_norm_state() const;

    /// `input` is [N,4,H,W]: RGB plus the trimap channel encoded as 0 / 0.5 / 1.
    template <typename T>
    ForwardOutput<T> forward(std::span<const Var<T>> params, std::span<ops::BatchNormState<T>> norm_state, Var<T> input,
                             const ForwardOptions& options) const;

    std::size_t param_index(std::string_view name) const;

   private:
    ModelConfig config_;
    std::vector<ParamInfo> params_;
    std::size_t norm_layers_ = 0;
    std::unique_ptr<detail::Spec> spec_;
};

/// Global convolution: (k x 1 then 1 x k) + (1 x k then k x 1), same padding.
/// `w` holds the four kernels in that order, `b` the four biases.
template <typename T>
Var<T> global_conv(Var<T> x, std::span<const Var<T>, 4> w, std::span<const Var<T>, 4> b);

template <typename T>
struct LstmState {
    Var<T> h;
    Var<T> c;
};

/// One conv-LSTM step. The 3x3 gate conv maps [x; h] to 4*hidden channels in gate order i, f, o, g.
template <typename T>
LstmState<T> conv_lstm_step(Var<T> x, LstmState<T> state, Var<T> kernel, Var<T> bias);

/// Argmax over the three trimap classes with ties resolved as unknown > foreground > background.
template <typename T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& logits);

/// Encodes label l as 0 / 0.5 / 1.
inline float trimap_channel_value(std::uint8_t label) { return label == 0 ? 0.0f : (label == 1 ? 0.5f : 1.0f); }

}  // namespace adamat::model
