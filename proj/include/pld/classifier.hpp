#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pld/net.hpp"
#include "pld/semantics.hpp"

namespace pld {

enum class LrSchedule : int { Constant = 0, CosineDecay = 1 };

struct TrainConfig {
    double learning_rate = 0.03;
    LrSchedule schedule = LrSchedule::CosineDecay;
    int warmup_steps = 200;
    int total_steps = 4000;
    int batch_size = 32;
    double gradient_clip_norm = 1.0;  // <= 0 disables clipping
    std::uint64_t seed = 1;
    // channel-corruption augmentation: per sample, with probability 1/2, flip
    // serialized bits at a rate drawn uniformly from [0, augment_max_bitflip]
    double augment_max_bitflip = 0.01;
    // 1 of every heldout_every images per class is held out for evaluation
    int heldout_every = 6;
};

// Hyperparameters used for the full-scale reference training regimen.
TrainConfig paper_scale_train_config();

struct PredictOutcome {
    std::array<double, kNumClasses> logits{};
    SemanticTag top_tag = SemanticTag::airplane;
    double confidence = 0.0;  // softmax probability of top_tag
};

enum class LossSelector : int { CrossEntropy = 0 };

// The default desk-scale stack: two conv/ReLU/pool blocks and a dense head.
std::vector<LayerSpec> desk_classifier_spec();

ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Classification of an 8-bit image (channels normalized internally by /255).
PredictOutcome forward(const ModelParams& model, const ImageRecord& image);

// Forward on an already-normalized continuous tensor (planar, 3072 values).
PredictOutcome forward_values(const ModelParams& model, const std::vector<double>& values);

double loss_crossentropy(const std::array<double, kNumClasses>& logits, SemanticTag label);

// Cross-entropy gradients w.r.t. every parameter.
GradientSet backward(const ModelParams& model, const ImageRecord& image, SemanticTag label);
GradientSet backward_values(const ModelParams& model, const std::vector<double>& values,
                            SemanticTag label);

// Gradient of the selected loss w.r.t. each normalized input channel value.
std::vector<double> grad_wrt_input(const ModelParams& model, const std::vector<double>& values,
                                   SemanticTag label, LossSelector loss);

ModelParams sgd_step(ModelParams model, const GradientSet& grads, double lr);

double schedule_lr(int step, const TrainConfig& cfg);

struct TrainResult {
    ModelParams model;
    double heldout_accuracy = 0.0;
    std::size_t n_train = 0;
    std::size_t n_heldout = 0;
};

TrainResult train(const std::vector<LayerSpec>& specs, const ImageDatabase& dataset,
                  const TrainConfig& cfg);

// Fraction of (image, tag) pairs the model classifies correctly.
double evaluate_accuracy(const ModelParams& model, const std::vector<ImageRecord>& images);

// Bit-exact binary container (layer specs + raw parameter doubles).
void save_model(const ModelParams& model, const std::string& path);
ModelParams load_model(const std::string& path);

// FNV-1a over the serialized parameter bytes; identifies a trained model.
std::uint64_t model_fingerprint(const ModelParams& model);

// Planar continuous tensor in [0,1] from an 8-bit image.
std::vector<double> normalize_image(const ImageRecord& image);

}  // namespace pld
