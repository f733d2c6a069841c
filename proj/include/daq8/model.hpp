#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "daq8/backward_quant.hpp"
#include "daq8/tensor.hpp"

namespace daq8 {

enum class Precision { FP32, INT8_DA, INT8_GQ };

std::string precision_name(Precision p);
Precision precision_from_name(const std::string& name);

struct ConvLayerSpec {
    int out_channels = 0;
    ConvSpec conv;
    bool bias = true;
};
struct ReluSpec {};
struct PoolSpec {
    int kernel = 2;
    int stride = 2;
};
struct LinearSpec {
    int out_features = 0;
    bool bias = true;
};

using StageSpec = std::variant<ConvLayerSpec, ReluSpec, PoolSpec, LinearSpec>;

struct ModelSpec {
    int in_channels = 1;
    int in_h = 16, in_w = 16;
    std::vector<StageSpec> stages;
    uint64_t init_seed = 1;

    // Consecutive stage shapes must chain; at least one conv; exactly one
    // linear stage, and it must come last.
    void validate() const;
    int num_classes() const;
    int conv_count() const;
};

ModelSpec default_model_spec(int in_channels, int in_h, int in_w, int num_classes,
                             uint64_t init_seed);

struct ConvParams {
    Tensor w; // (C_out, C_in, k1, k2)
    std::vector<float> b;
};
struct LinearParams {
    std::vector<float> w; // row-major (out_features, in_features)
    std::vector<float> b;
    int in_features = 0, out_features = 0;
};

struct Model {
    ModelSpec spec;
    std::vector<ConvParams> convs;
    LinearParams head;
};

// He-style normal init, fully determined by spec.init_seed.
Model init_model(const ModelSpec& spec);

// What one forward pass records for the matching backward pass.
struct ConvTrace {
    bool quantized = false;
    std::optional<LayerQuantContext> qctx; // quantized path
    Tensor x;                              // float path input
    Shape4 in_shape;
};
struct ReluTrace {
    std::vector<uint8_t> mask;
};
struct PoolTrace {
    std::vector<int32_t> argmax;
    Shape4 in_shape;
};
struct LinearTrace {
    Tensor x; // flattened input (N, F, 1, 1)
};
using StageTrace = std::variant<ConvTrace, ReluTrace, PoolTrace, LinearTrace>;

struct ForwardResult {
    Tensor logits; // (N, classes, 1, 1)
    std::vector<StageTrace> trace;
};

struct ForwardOptions {
    Precision precision = Precision::FP32;
    bool exempt_first_last = false; // run first and last conv in float
};

// In the INT8 modes every conv runs as an integer convolution of globally
// quantized (nearest-rounded, max-abs-scaled) activations and weights; bias
// add, nonlinearities, pooling and the classifier stay in float.
ForwardResult forward_model(const Model& model, const Tensor& batch, const ForwardOptions& opts);

struct Gradients {
    std::vector<Tensor> conv_w;
    std::vector<std::vector<float>> conv_b;
    std::vector<float> lin_w;
    std::vector<float> lin_b;
    // Per conv layer: the float gradient that reached it plus the backward
    // diagnostics (empty labels outside INT8-DA).
    std::vector<Tensor> layer_gy;
    std::vector<LayerBackwardResult> layer_diag; // g_x/g_w moved out, metadata kept
};

struct BackwardModelOptions {
    Precision precision = Precision::FP32;
    bool exempt_first_last = false;
    MCSHyper hyper;
    BackwardOptions quant;
};

Gradients backward_model(const Model& model, const ForwardResult& fwd, const Tensor& g_logits,
                         ClipState& state, const BackwardModelOptions& opts);

// SGD with momentum; buffers must match the parameter layout.
struct Momentum {
    std::vector<Tensor> conv_w;
    std::vector<std::vector<float>> conv_b;
    std::vector<float> lin_w;
    std::vector<float> lin_b;
};
Momentum zero_momentum(const Model& model);
void sgd_step(Model& model, Momentum& mom, const Gradients& grads, float lr, float momentum);

// Softmax cross-entropy; returns mean loss and the logits gradient.
struct LossResult {
    double loss = 0.0;
    Tensor g_logits;
};
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

int64_t correct_predictions(const Tensor& logits, std::span<const int> labels);

} // namespace daq8
