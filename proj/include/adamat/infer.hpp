#pragma once

#include <vector>

#include "adamat/matting.hpp"
#include "adamat/metrics.hpp"
#include "adamat/model.hpp"
#include "adamat/synth.hpp"
#include "adamat/trainer.hpp"

namespace adamat::infer {

struct Prediction {
    AlphaMatte alpha;      // fused with the adapted trimap
    AlphaMatte raw_alpha;  // network output before fusion
    Trimap trimap;         // adapted trimap
    std::size_t pad_bottom = 0;
    std::size_t pad_right = 0;
};

/// Mirror padding on the bottom and right edges (the edge pixel is not repeated).
ImageRGB reflect_pad(const ImageRGB& img, std::size_t bottom, std::size_t right);
Trimap reflect_pad(const Trimap& t, std::size_t bottom, std::size_t right);

/// Eval-mode forward pass. Inputs whose extent is not a multiple of the encoder stride are
/// reflect-padded and the outputs cropped back.
Prediction predict(const model::Network& net, const train::ModelState& state, const ImageRGB& image,
                   const Trimap& trimap);

struct HeldOutResult {
    std::vector<Prediction> predictions;
    std::vector<metrics::MetricReport> reports;
    metrics::MetricReport summary;
};

/// Predicts every sample and scores it: alpha metrics on `region` of the input trimap,
/// Acc/mIoU of the adapted trimap against the optimal trimap of the ground truth.
HeldOutResult evaluate_samples(const model::Network& net, const train::ModelState& state,
                               const std::vector<synth::SampleRecord>& samples,
                               metrics::Region region = metrics::Region::kUnknown);

}  // namespace adamat::infer
