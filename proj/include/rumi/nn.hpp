#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rumi/errors.hpp"
#include "rumi/image.hpp"
#include "rumi/rng.hpp"

namespace rumi::nn {

// Binary classifier over dynamic images:
//   conv 3x3 (c_in -> 8, same padding), relu, maxpool 2
//   conv 3x3 (8 -> 16, same padding), relu, maxpool 2
//   flatten, dense -> 64, relu, dropout(p), dense -> 2, softmax
// All math is double precision; weights are stored as float32 on disk.

constexpr int kConv1Filters = 8;
constexpr int kConv2Filters = 16;
constexpr int kHiddenUnits = 64;
constexpr int kClasses = 2;
constexpr int kKernel = 3;

struct Tensor {
    std::vector<double> v;
    std::vector<int> shape;

    std::size_t size() const { return v.size(); }
    static Tensor zeros(std::vector<int> shape);
};

struct TensorSet {
    Tensor conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b;

    template <typename F>
    void for_each(F&& f) {
        f("conv1_w", conv1_w);
        f("conv1_b", conv1_b);
        f("conv2_w", conv2_w);
        f("conv2_b", conv2_b);
        f("fc1_w", fc1_w);
        f("fc1_b", fc1_b);
        f("fc2_w", fc2_w);
        f("fc2_b", fc2_b);
    }
    template <typename F>
    void for_each(F&& f) const {
        const_cast<TensorSet*>(this)->for_each(
            [&](const char* name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
    }
};

struct ModelParams {
    int in_h = 0, in_w = 0, in_c = 0;
    TensorSet t;

    // He-uniform weights, zero biases; fully determined by the seed.
    static ModelParams init(int h, int w, int c, std::uint64_t seed);

    int pool1_h() const { return in_h / 2; }
    int pool1_w() const { return in_w / 2; }
    int pool2_h() const { return pool1_h() / 2; }
    int pool2_w() const { return pool1_w() / 2; }
    int flat_dim() const { return pool2_h() * pool2_w() * kConv2Filters; }
};

using Gradients = TensorSet;

struct TrainConfig {
    double lr0 = 0.001;
    double k = -0.01;          // decay rate in lr0 * e^(k t); negative decays
    int batch_size = 12;
    double dropout_p = 0.5;
    int max_epochs = 50;
    int patience = 5;          // epochs without val-loss improvement tolerated
    std::uint64_t seed = 0;
    bool per_step_schedule = false;  // apply the decay per optimizer step
};

// Eq-style exponential schedule lr0 * e^(k t).
double lr_schedule(double lr0, double k, double t);

enum class Mode { Train, Infer };

// A batch in planar layout: data[(i * c + ch) * h * w + y * w + x].
struct Batch {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<double> data;
};

// Activations recorded by a train-mode forward pass, consumed by backward.
struct BatchCache {
    bool valid = false;
    bool train_mode = false;
    int n = 0;
    std::vector<double> input;
    std::vector<double> z1, a1, p1;
    std::vector<int> idx1;
    std::vector<double> z2, a2, p2;
    std::vector<int> idx2;
    std::vector<double> z3, a3, a3d;
    std::vector<double> dropout_mask;  // per unit: 0 or 1/(1-p); empty if unused
    std::vector<double> logits, probs;
};

// Runs the network. In train mode an inverted-dropout mask is drawn from
// rng (required when dropout_p > 0) and activations are cached for
// backward. Returns class probabilities, n x 2 row-major.
std::vector<double> forward(const ModelParams& params, const Batch& batch, Mode mode,
                            double dropout_p, Rng* rng, BatchCache* cache);

// Mean negative log-likelihood of the true class; log arguments are
// clamped at 1e-12.
double loss(const std::vector<double>& probs, const std::vector<int>& labels);

// Backpropagation through the cached activations. Gradients average over
// the batch (matching `loss`).
Gradients backward(const ModelParams& params, const BatchCache& cache,
                   const std::vector<int>& labels);

struct AdamState {
    TensorSet m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init_like(const ModelParams& params);
};

// Canonical Adam update with bias correction. Throws NumericError naming
// the tensor if a gradient is non-finite.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr);

// In-memory set of pooled dynamic images ready for the classifier.
struct Dataset {
    int h = 0, w = 0, c = 0;
    std::vector<std::vector<double>> images;  // planar, c * h * w each
    std::vector<int> labels;                  // class indices

    std::size_t size() const { return images.size(); }
};

// Planar copy of a frame's interleaved pixels.
std::vector<double> planar_from_frame(const img::Frame& f);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0, val_loss = 0.0;
    double train_acc = 0.0, val_acc = 0.0;
    double wall_seconds = 0.0;  // informational; not part of trace equality
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;      // epoch with the lowest validation loss
    int stopping_epoch = -1;  // last epoch executed
};

struct TrainResult {
    ModelParams params;  // weights from the best validation epoch
    TrainTrace trace;
};

// Mini-batch training with the exponential schedule, Adam, inverted
// dropout and early stopping on validation loss.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

// Infer-mode probabilities for every example, n x 2 row-major.
std::vector<double> predict(const ModelParams& params, const Dataset& set, int batch_size = 32);

// Self-describing weights container (.dnw): magic, version, input dims,
// tensor manifest with shapes, then little-endian float32 payloads in
// declaration order.
void save_weights(const ModelParams& params, const std::string& path);
ModelParams load_weights(const std::string& path);

// CSV with columns epoch,lr,train_loss,val_loss,train_acc,val_acc.
void save_trace_csv(const TrainTrace& trace, const std::string& path);

}  // namespace rumi::nn
