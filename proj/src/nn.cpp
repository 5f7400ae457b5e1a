#include "rumi/nn.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "rumi/kernels.hpp"

namespace rumi::nn {

Tensor Tensor::zeros(std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    Tensor t;
    t.shape = std::move(shape);
    t.v.assign(n, 0.0);
    return t;
}

double lr_schedule(double lr0, double k, double t) {
    if (!(lr0 > 0.0)) {
        throw ParamError("lr0 must be positive");
    }
    return lr0 * std::exp(k * t);
}

ModelParams ModelParams::init(int h, int w, int c, std::uint64_t seed) {
    if (h < 4 || w < 4) {
        throw ParamError("model input must be at least 4x4 to survive two pooling stages");
    }
    if (c != 1 && c != 3) {
        throw ParamError("model input channels must be 1 or 3");
    }
    ModelParams p;
    p.in_h = h;
    p.in_w = w;
    p.in_c = c;
    p.t.conv1_w = Tensor::zeros({kConv1Filters, c, kKernel, kKernel});
    p.t.conv1_b = Tensor::zeros({kConv1Filters});
    p.t.conv2_w = Tensor::zeros({kConv2Filters, kConv1Filters, kKernel, kKernel});
    p.t.conv2_b = Tensor::zeros({kConv2Filters});
    p.t.fc1_w = Tensor::zeros({kHiddenUnits, p.flat_dim()});
    p.t.fc1_b = Tensor::zeros({kHiddenUnits});
    p.t.fc2_w = Tensor::zeros({kClasses, kHiddenUnits});
    p.t.fc2_b = Tensor::zeros({kClasses});

    Rng rng(seed);
    const auto he_uniform = [&rng](Tensor& t, int fan_in) {
        const double limit = std::sqrt(6.0 / fan_in);
        for (auto& x : t.v) x = rng.uniform(-limit, limit);
    };
    he_uniform(p.t.conv1_w, c * kKernel * kKernel);
    he_uniform(p.t.conv2_w, kConv1Filters * kKernel * kKernel);
    he_uniform(p.t.fc1_w, p.flat_dim());
    he_uniform(p.t.fc2_w, kHiddenUnits);
    return p;
}

namespace {

// y ranges for a 3x3 same-padding kernel tap (dy, dx in {-1, 0, 1}):
// output rows [max(0,-dy), h-1-max(0,dy)] read input rows y+dy.
void conv3x3_forward(const double* in, int in_ch, int h, int w, const double* weights,
                     const double* bias, int out_ch, double* out) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int oc = 0; oc < out_ch; ++oc) {
        std::fill(out + oc * plane, out + (oc + 1) * plane, bias[oc]);
    }
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int ic = 0; ic < in_ch; ++ic) {
            for (int ky = 0; ky < kKernel; ++ky) {
                const int dy = ky - 1;
                const int y_lo = std::max(0, -dy);
                const int y_hi = h - 1 - std::max(0, dy);
                for (int kx = 0; kx < kKernel; ++kx) {
                    const int dx = kx - 1;
                    const double wv =
                        weights[((static_cast<std::size_t>(oc) * in_ch + ic) * kKernel + ky) *
                                    kKernel +
                                kx];
                    if (wv == 0.0) continue;
                    const int x_lo = std::max(0, -dx);
                    const int x_hi = w - 1 - std::max(0, dx);
                    const std::size_t len = static_cast<std::size_t>(x_hi - x_lo + 1);
                    for (int y = y_lo; y <= y_hi; ++y) {
                        kern::axpy(out + oc * plane + static_cast<std::size_t>(y) * w + x_lo, wv,
                                   in + ic * plane + static_cast<std::size_t>(y + dy) * w +
                                       (x_lo + dx),
                                   len);
                    }
                }
            }
        }
    }
}

void conv3x3_backward(const double* in, int in_ch, int h, int w, const double* weights,
                      int out_ch, const double* dout, double* dweights, double* dbias,
                      double* din) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int oc = 0; oc < out_ch; ++oc) {
        dbias[oc] += kern::sum(dout + oc * plane, plane);
        for (int ic = 0; ic < in_ch; ++ic) {
            for (int ky = 0; ky < kKernel; ++ky) {
                const int dy = ky - 1;
                const int y_lo = std::max(0, -dy);
                const int y_hi = h - 1 - std::max(0, dy);
                for (int kx = 0; kx < kKernel; ++kx) {
                    const int dx = kx - 1;
                    const int x_lo = std::max(0, -dx);
                    const int x_hi = w - 1 - std::max(0, dx);
                    const std::size_t len = static_cast<std::size_t>(x_hi - x_lo + 1);
                    const std::size_t widx =
                        ((static_cast<std::size_t>(oc) * in_ch + ic) * kKernel + ky) * kKernel +
                        kx;
                    double acc = 0.0;
                    for (int y = y_lo; y <= y_hi; ++y) {
                        acc += kern::dot(
                            dout + oc * plane + static_cast<std::size_t>(y) * w + x_lo,
                            in + ic * plane + static_cast<std::size_t>(y + dy) * w + (x_lo + dx),
                            len);
                    }
                    dweights[widx] += acc;
                    if (din) {
                        const double wv = weights[widx];
                        if (wv != 0.0) {
                            for (int y = y_lo; y <= y_hi; ++y) {
                                kern::axpy(din + ic * plane +
                                               static_cast<std::size_t>(y + dy) * w + (x_lo + dx),
                                           wv,
                                           dout + oc * plane + static_cast<std::size_t>(y) * w +
                                               x_lo,
                                           len);
                            }
                        }
                    }
                }
            }
        }
    }
}

// 2x2/2 max pooling; odd trailing rows/columns are dropped. idx records the
// winning input offset (within the sample's channel block) for the scatter
// in backward.
void maxpool2_forward(const double* in, int ch, int h, int w, double* out, int* idx) {
    const int oh = h / 2, ow = w / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t o = 0;
    for (int c = 0; c < ch; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const std::size_t base = c * plane + static_cast<std::size_t>(2 * oy) * w + 2 * ox;
                double best = in[base];
                std::size_t best_at = base;
                const std::size_t candidates[3] = {base + 1, base + w, base + w + 1};
                for (std::size_t cand : candidates) {
                    if (in[cand] > best) {
                        best = in[cand];
                        best_at = cand;
                    }
                }
                out[o] = best;
                idx[o] = static_cast<int>(best_at);
                ++o;
            }
        }
    }
}

void dense_forward(const double* in, std::size_t in_dim, const double* weights,
                   const double* bias, int out_dim, double* out) {
    for (int j = 0; j < out_dim; ++j) {
        out[j] = kern::dot(weights + static_cast<std::size_t>(j) * in_dim, in, in_dim) + bias[j];
    }
}

void softmax2(const double* logits, double* probs) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double inv = 1.0 / (e0 + e1);
    probs[0] = e0 * inv;
    probs[1] = e1 * inv;
}

void check_batch(const ModelParams& params, const Batch& batch) {
    if (batch.n < 1) {
        throw ShapeError("empty batch");
    }
    if (batch.h != params.in_h || batch.w != params.in_w || batch.c != params.in_c) {
        throw ShapeError("batch is " + std::to_string(batch.w) + "x" + std::to_string(batch.h) +
                         "x" + std::to_string(batch.c) + ", model expects " +
                         std::to_string(params.in_w) + "x" + std::to_string(params.in_h) + "x" +
                         std::to_string(params.in_c));
    }
    const std::size_t want =
        static_cast<std::size_t>(batch.n) * batch.c * batch.h * batch.w;
    if (batch.data.size() != want) {
        throw ShapeError("batch buffer has " + std::to_string(batch.data.size()) +
                         " values, expected " + std::to_string(want));
    }
}

}  // namespace

std::vector<double> forward(const ModelParams& params, const Batch& batch, Mode mode,
                            double dropout_p, Rng* rng, BatchCache* cache) {
    check_batch(params, batch);
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ParamError("dropout probability must lie in [0, 1)");
    }
    const bool train = mode == Mode::Train;
    if (train && dropout_p > 0.0 && rng == nullptr) {
        throw ParamError("train-mode forward with dropout needs an rng");
    }

    const int n = batch.n;
    const int h = params.in_h, w = params.in_w, c = params.in_c;
    const int h2 = params.pool1_h(), w2 = params.pool1_w();
    const std::size_t in_sz = static_cast<std::size_t>(c) * h * w;
    const std::size_t z1_sz = static_cast<std::size_t>(kConv1Filters) * h * w;
    const std::size_t p1_sz = static_cast<std::size_t>(kConv1Filters) * h2 * w2;
    const std::size_t z2_sz = static_cast<std::size_t>(kConv2Filters) * h2 * w2;
    const std::size_t p2_sz = static_cast<std::size_t>(params.flat_dim());

    BatchCache local;
    BatchCache& cc = cache ? *cache : local;
    cc = BatchCache{};
    cc.n = n;
    cc.train_mode = train;
    cc.z1.resize(n * z1_sz);
    cc.a1.resize(n * z1_sz);
    cc.p1.resize(n * p1_sz);
    cc.idx1.resize(n * p1_sz);
    cc.z2.resize(n * z2_sz);
    cc.a2.resize(n * z2_sz);
    cc.p2.resize(n * p2_sz);
    cc.idx2.resize(n * p2_sz);
    cc.z3.resize(static_cast<std::size_t>(n) * kHiddenUnits);
    cc.a3.resize(static_cast<std::size_t>(n) * kHiddenUnits);
    cc.a3d.resize(static_cast<std::size_t>(n) * kHiddenUnits);
    cc.logits.resize(static_cast<std::size_t>(n) * kClasses);
    cc.probs.resize(static_cast<std::size_t>(n) * kClasses);

    const bool use_dropout = train && dropout_p > 0.0;
    if (use_dropout) {
        cc.dropout_mask.resize(static_cast<std::size_t>(n) * kHiddenUnits);
        const double keep_scale = 1.0 / (1.0 - dropout_p);
        for (auto& mval : cc.dropout_mask) {
            mval = rng->uniform() < dropout_p ? 0.0 : keep_scale;
        }
    }

    for (int i = 0; i < n; ++i) {
        const double* x = batch.data.data() + i * in_sz;
        double* z1 = cc.z1.data() + i * z1_sz;
        double* a1 = cc.a1.data() + i * z1_sz;
        double* p1 = cc.p1.data() + i * p1_sz;
        int* idx1 = cc.idx1.data() + i * p1_sz;
        double* z2 = cc.z2.data() + i * z2_sz;
        double* a2 = cc.a2.data() + i * z2_sz;
        double* p2 = cc.p2.data() + i * p2_sz;
        int* idx2 = cc.idx2.data() + i * p2_sz;
        double* z3 = cc.z3.data() + static_cast<std::size_t>(i) * kHiddenUnits;
        double* a3 = cc.a3.data() + static_cast<std::size_t>(i) * kHiddenUnits;
        double* a3d = cc.a3d.data() + static_cast<std::size_t>(i) * kHiddenUnits;
        double* logits = cc.logits.data() + static_cast<std::size_t>(i) * kClasses;
        double* probs = cc.probs.data() + static_cast<std::size_t>(i) * kClasses;

        conv3x3_forward(x, c, h, w, params.t.conv1_w.v.data(), params.t.conv1_b.v.data(),
                        kConv1Filters, z1);
        kern::relu(a1, z1, z1_sz);
        maxpool2_forward(a1, kConv1Filters, h, w, p1, idx1);
        conv3x3_forward(p1, kConv1Filters, h2, w2, params.t.conv2_w.v.data(),
                        params.t.conv2_b.v.data(), kConv2Filters, z2);
        kern::relu(a2, z2, z2_sz);
        maxpool2_forward(a2, kConv2Filters, h2, w2, p2, idx2);
        dense_forward(p2, p2_sz, params.t.fc1_w.v.data(), params.t.fc1_b.v.data(), kHiddenUnits,
                      z3);
        kern::relu(a3, z3, kHiddenUnits);
        if (use_dropout) {
            const double* mask = cc.dropout_mask.data() + static_cast<std::size_t>(i) * kHiddenUnits;
            for (int j = 0; j < kHiddenUnits; ++j) a3d[j] = a3[j] * mask[j];
        } else {
            std::copy(a3, a3 + kHiddenUnits, a3d);
        }
        dense_forward(a3d, kHiddenUnits, params.t.fc2_w.v.data(), params.t.fc2_b.v.data(),
                      kClasses, logits);
        softmax2(logits, probs);
    }
    if (cache) {
        cc.input = batch.data;
        cc.valid = true;
    }
    return cc.probs;
}

double loss(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (labels.empty() || probs.size() != labels.size() * static_cast<std::size_t>(kClasses)) {
        throw ShapeError("loss: probs/labels size mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= kClasses) {
            throw ParamError("label out of range: " + std::to_string(y));
        }
        const double p = std::max(probs[i * kClasses + static_cast<std::size_t>(y)], 1e-12);
        total -= std::log(p);
    }
    return total / static_cast<double>(labels.size());
}

Gradients backward(const ModelParams& params, const BatchCache& cache,
                   const std::vector<int>& labels) {
    if (!cache.valid) {
        throw StateError("backward called without a cached forward pass");
    }
    if (!cache.train_mode) {
        throw StateError("backward needs a cache from a train-mode forward");
    }
    if (static_cast<int>(labels.size()) != cache.n) {
        throw ShapeError("backward: label count " + std::to_string(labels.size()) +
                         " does not match cached batch of " + std::to_string(cache.n));
    }

    const int n = cache.n;
    const int h = params.in_h, w = params.in_w, c = params.in_c;
    const int h2 = params.pool1_h(), w2 = params.pool1_w();
    const std::size_t in_sz = static_cast<std::size_t>(c) * h * w;
    const std::size_t z1_sz = static_cast<std::size_t>(kConv1Filters) * h * w;
    const std::size_t p1_sz = static_cast<std::size_t>(kConv1Filters) * h2 * w2;
    const std::size_t z2_sz = static_cast<std::size_t>(kConv2Filters) * h2 * w2;
    const std::size_t p2_sz = static_cast<std::size_t>(params.flat_dim());

    Gradients g;
    g.conv1_w = Tensor::zeros(params.t.conv1_w.shape);
    g.conv1_b = Tensor::zeros(params.t.conv1_b.shape);
    g.conv2_w = Tensor::zeros(params.t.conv2_w.shape);
    g.conv2_b = Tensor::zeros(params.t.conv2_b.shape);
    g.fc1_w = Tensor::zeros(params.t.fc1_w.shape);
    g.fc1_b = Tensor::zeros(params.t.fc1_b.shape);
    g.fc2_w = Tensor::zeros(params.t.fc2_w.shape);
    g.fc2_b = Tensor::zeros(params.t.fc2_b.shape);

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> dlogits(kClasses);
    std::vector<double> da3d(kHiddenUnits);
    std::vector<double> da3(kHiddenUnits);
    std::vector<double> dz3(kHiddenUnits);
    std::vector<double> dflat(p2_sz);
    std::vector<double> da2(z2_sz);
    std::vector<double> dz2(z2_sz);
    std::vector<double> dp1(p1_sz);
    std::vector<double> da1(z1_sz);
    std::vector<double> dz1(z1_sz);

    for (int i = 0; i < n; ++i) {
        const double* probs = cache.probs.data() + static_cast<std::size_t>(i) * kClasses;
        const double* a3d = cache.a3d.data() + static_cast<std::size_t>(i) * kHiddenUnits;
        const double* z3 = cache.z3.data() + static_cast<std::size_t>(i) * kHiddenUnits;
        const double* p2 = cache.p2.data() + i * p2_sz;
        const int* idx2 = cache.idx2.data() + i * p2_sz;
        const double* z2 = cache.z2.data() + i * z2_sz;
        const double* p1 = cache.p1.data() + i * p1_sz;
        const int* idx1 = cache.idx1.data() + i * p1_sz;
        const double* z1 = cache.z1.data() + i * z1_sz;
        const double* x = cache.input.data() + i * in_sz;

        // Softmax + cross-entropy: dL/dlogit = (p - onehot) / n.
        for (int j = 0; j < kClasses; ++j) {
            dlogits[static_cast<std::size_t>(j)] =
                (probs[j] - (labels[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0)) * inv_n;
        }

        // fc2
        std::fill(da3d.begin(), da3d.end(), 0.0);
        for (int j = 0; j < kClasses; ++j) {
            const double dj = dlogits[static_cast<std::size_t>(j)];
            kern::axpy(g.fc2_w.v.data() + static_cast<std::size_t>(j) * kHiddenUnits, dj, a3d,
                       kHiddenUnits);
            g.fc2_b.v[static_cast<std::size_t>(j)] += dj;
            kern::axpy(da3d.data(), dj,
                       params.t.fc2_w.v.data() + static_cast<std::size_t>(j) * kHiddenUnits,
                       kHiddenUnits);
        }

        // dropout
        if (!cache.dropout_mask.empty()) {
            const double* mask =
                cache.dropout_mask.data() + static_cast<std::size_t>(i) * kHiddenUnits;
            for (int j = 0; j < kHiddenUnits; ++j) da3[static_cast<std::size_t>(j)] = da3d[static_cast<std::size_t>(j)] * mask[j];
        } else {
            da3 = da3d;
        }

        kern::relu_backward(dz3.data(), z3, da3.data(), kHiddenUnits);

        // fc1
        std::fill(dflat.begin(), dflat.end(), 0.0);
        for (int j = 0; j < kHiddenUnits; ++j) {
            const double dj = dz3[static_cast<std::size_t>(j)];
            if (dj != 0.0) {
                kern::axpy(g.fc1_w.v.data() + static_cast<std::size_t>(j) * p2_sz, dj, p2, p2_sz);
                kern::axpy(dflat.data(), dj,
                           params.t.fc1_w.v.data() + static_cast<std::size_t>(j) * p2_sz, p2_sz);
            }
            g.fc1_b.v[static_cast<std::size_t>(j)] += dj;
        }

        // pool2 scatter
        std::fill(da2.begin(), da2.end(), 0.0);
        for (std::size_t o = 0; o < p2_sz; ++o) {
            da2[static_cast<std::size_t>(idx2[o])] += dflat[o];
        }
        kern::relu_backward(dz2.data(), z2, da2.data(), z2_sz);

        // conv2
        std::fill(dp1.begin(), dp1.end(), 0.0);
        conv3x3_backward(p1, kConv1Filters, h2, w2, params.t.conv2_w.v.data(), kConv2Filters,
                         dz2.data(), g.conv2_w.v.data(), g.conv2_b.v.data(), dp1.data());

        // pool1 scatter
        std::fill(da1.begin(), da1.end(), 0.0);
        for (std::size_t o = 0; o < p1_sz; ++o) {
            da1[static_cast<std::size_t>(idx1[o])] += dp1[o];
        }
        kern::relu_backward(dz1.data(), z1, da1.data(), z1_sz);

        // conv1; no input gradient needed
        conv3x3_backward(x, c, h, w, params.t.conv1_w.v.data(), kConv1Filters, dz1.data(),
                         g.conv1_w.v.data(), g.conv1_b.v.data(), nullptr);
    }
    return g;
}

AdamState AdamState::init_like(const ModelParams& params) {
    AdamState s;
    s.m = params.t;
    s.m.for_each([](const char*, Tensor& t) { std::fill(t.v.begin(), t.v.end(), 0.0); });
    s.v = s.m;
    return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr) {
    grads.for_each([](const char* name, const Tensor& t) {
        for (double x : t.v) {
            if (!std::isfinite(x)) {
                throw NumericError(std::string("non-finite gradient in tensor ") + name);
            }
        }
    });
    state.step += 1;
    const double bc1 = 1.0 / (1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
    const double bc2 = 1.0 / (1.0 - std::pow(state.beta2, static_cast<double>(state.step)));

    Tensor* ps[] = {&params.t.conv1_w, &params.t.conv1_b, &params.t.conv2_w, &params.t.conv2_b,
                    &params.t.fc1_w,   &params.t.fc1_b,   &params.t.fc2_w,   &params.t.fc2_b};
    const Tensor* gs[] = {&grads.conv1_w, &grads.conv1_b, &grads.conv2_w, &grads.conv2_b,
                          &grads.fc1_w,   &grads.fc1_b,   &grads.fc2_w,   &grads.fc2_b};
    Tensor* ms[] = {&state.m.conv1_w, &state.m.conv1_b, &state.m.conv2_w, &state.m.conv2_b,
                    &state.m.fc1_w,   &state.m.fc1_b,   &state.m.fc2_w,   &state.m.fc2_b};
    Tensor* vs[] = {&state.v.conv1_w, &state.v.conv1_b, &state.v.conv2_w, &state.v.conv2_b,
                    &state.v.fc1_w,   &state.v.fc1_b,   &state.v.fc2_w,   &state.v.fc2_b};
    for (int i = 0; i < 8; ++i) {
        if (gs[i]->size() != ps[i]->size()) {
            throw ShapeError("gradient/parameter shape mismatch");
        }
        kern::adam_update(ps[i]->v.data(), ms[i]->v.data(), vs[i]->v.data(), gs[i]->v.data(),
                          ps[i]->size(), state.beta1, state.beta2, state.eps, lr, bc1, bc2);
    }
}

std::vector<double> planar_from_frame(const img::Frame& f) {
    std::vector<double> out(f.size());
    const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            for (int c = 0; c < f.channels; ++c) {
                out[c * plane + static_cast<std::size_t>(y) * f.width + x] = f.at(x, y, c);
            }
        }
    }
    return out;
}

namespace {

Batch gather_batch(const Dataset& set, const std::vector<std::size_t>& order, std::size_t lo,
                   std::size_t hi) {
    Batch b;
    b.n = static_cast<int>(hi - lo);
    b.h = set.h;
    b.w = set.w;
    b.c = set.c;
    const std::size_t sz = static_cast<std::size_t>(set.c) * set.h * set.w;
    b.data.resize(static_cast<std::size_t>(b.n) * sz);
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& img = set.images[order[i]];
        if (img.size() != sz) {
            throw ShapeError("dataset image size mismatch");
        }
        std::copy(img.begin(), img.end(), b.data.begin() + (i - lo) * sz);
    }
    return b;
}

int argmax2(const double* p) { return p[1] > p[0] ? 1 : 0; }

struct EvalPass {
    double loss = 0.0;
    double acc = 0.0;
};

EvalPass eval_pass(const ModelParams& params, const Dataset& set, int batch_size) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < set.size(); lo += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(set.size(), lo + static_cast<std::size_t>(batch_size));
        Batch b = gather_batch(set, order, lo, hi);
        const auto probs = forward(params, b, Mode::Infer, 0.0, nullptr, nullptr);
        std::vector<int> labels(set.labels.begin() + static_cast<long>(lo),
                                set.labels.begin() + static_cast<long>(hi));
        loss_sum += loss(probs, labels) * static_cast<double>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            if (argmax2(probs.data() + (i - lo) * kClasses) == set.labels[i]) ++correct;
        }
    }
    EvalPass out;
    out.loss = loss_sum / static_cast<double>(set.size());
    out.acc = static_cast<double>(correct) / static_cast<double>(set.size());
    return out;
}

void check_dataset(const Dataset& set, const char* what) {
    if (set.size() == 0) {
        throw DataError(std::string(what) + " split is empty");
    }
    if (set.labels.size() != set.images.size()) {
        throw ShapeError(std::string(what) + " labels/images count mismatch");
    }
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
    check_dataset(train_set, "train");
    check_dataset(val_set, "validation");
    if (train_set.h != val_set.h || train_set.w != val_set.w || train_set.c != val_set.c) {
        throw ShapeError("train and validation sets have different image shapes");
    }
    if (cfg.batch_size < 1) throw ParamError("batch_size must be at least 1");
    if (cfg.max_epochs < 1) throw ParamError("max_epochs must be at least 1");
    if (cfg.patience < 0) throw ParamError("patience must be non-negative");
    if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0)) {
        throw ParamError("dropout must lie in [0, 1)");
    }

    ModelParams params = ModelParams::init(train_set.h, train_set.w, train_set.c,
                                           derive_seed(cfg.seed, 0x1717));
    AdamState adam = AdamState::init_like(params);

    TrainResult result;
    result.trace.best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    ModelParams best_params = params;
    int since_improved = 0;
    long global_step = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double epoch_lr = lr_schedule(cfg.lr0, cfg.k, static_cast<double>(epoch));

        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5bf1, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi =
                std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            Batch batch = gather_batch(train_set, order, lo, hi);
            std::vector<int> labels(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) labels[i - lo] = train_set.labels[order[i]];

            Rng dropout_rng(derive_seed(cfg.seed, 0xd309,
                                        static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                            batch_index));
            BatchCache cache;
            const auto probs =
                forward(params, batch, Mode::Train, cfg.dropout_p, &dropout_rng, &cache);
            loss_sum += loss(probs, labels) * static_cast<double>(hi - lo);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (argmax2(probs.data() + i * kClasses) == labels[i]) ++correct;
            }
            const Gradients grads = backward(params, cache, labels);
            const double lr = cfg.per_step_schedule
                                  ? lr_schedule(cfg.lr0, cfg.k, static_cast<double>(global_step))
                                  : epoch_lr;
            adam_step(params, grads, adam, lr);
            ++global_step;
            ++batch_index;
        }

        const EvalPass val = eval_pass(params, val_set, cfg.batch_size);

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = epoch_lr;
        stats.train_loss = loss_sum / static_cast<double>(train_set.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
        stats.val_loss = val.loss;
        stats.val_acc = val.acc;
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trace.epochs.push_back(stats);
        result.trace.stopping_epoch = epoch;

        if (val.loss < best_val) {
            best_val = val.loss;
            best_params = params;
            result.trace.best_epoch = epoch;
            since_improved = 0;
        } else {
            ++since_improved;
            if (since_improved > cfg.patience) {
                break;
            }
        }
    }

    result.params = std::move(best_params);
    return result;
}

std::vector<double> predict(const ModelParams& params, const Dataset& set, int batch_size) {
    check_dataset(set, "predict");
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> all(set.size() * static_cast<std::size_t>(kClasses));
    for (std::size_t lo = 0; lo < set.size(); lo += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(set.size(), lo + static_cast<std::size_t>(batch_size));
        Batch b = gather_batch(set, order, lo, hi);
        const auto probs = forward(params, b, Mode::Infer, 0.0, nullptr, nullptr);
        std::copy(probs.begin(), probs.end(), all.begin() + static_cast<long>(lo) * kClasses);
    }
    return all;
}

// ---- weights container ----

namespace {

constexpr char kMagic[4] = {'D', 'N', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    out.push_back(static_cast<std::uint8_t>(x));
    out.push_back(static_cast<std::uint8_t>(x >> 8));
    out.push_back(static_cast<std::uint8_t>(x >> 16));
    out.push_back(static_cast<std::uint8_t>(x >> 24));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& at) {
    if (at + 4 > in.size()) throw DataError("weights file truncated");
    const std::uint32_t x = std::uint32_t(in[at]) | (std::uint32_t(in[at + 1]) << 8) |
                            (std::uint32_t(in[at + 2]) << 16) | (std::uint32_t(in[at + 3]) << 24);
    at += 4;
    return x;
}

}  // namespace

void save_weights(const ModelParams& params, const std::string& path) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params.in_h));
    put_u32(out, static_cast<std::uint32_t>(params.in_w));
    put_u32(out, static_cast<std::uint32_t>(params.in_c));
    put_u32(out, 8);  // tensor count
    params.t.for_each([&out](const char* name, const Tensor& t) {
        const std::size_t len = std::strlen(name);
        out.push_back(static_cast<std::uint8_t>(len));
        out.insert(out.end(), name, name + len);
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    });
    params.t.for_each([&out](const char*, const Tensor& t) {
        for (double x : t.v) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
            put_u32(out, bits);
        }
    });
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open weights file for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("weights write failed: " + path);
}

ModelParams load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open weights file: " + path);
    std::vector<std::uint8_t> in((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
    std::size_t at = 0;
    if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) {
        throw DataError("not a weights file (bad magic): " + path);
    }
    at = 4;
    const std::uint32_t version = get_u32(in, at);
    if (version != kVersion) {
        throw DataError("unsupported weights version " + std::to_string(version));
    }
    const int h = static_cast<int>(get_u32(in, at));
    const int w = static_cast<int>(get_u32(in, at));
    const int c = static_cast<int>(get_u32(in, at));
    const std::uint32_t count = get_u32(in, at);
    if (count != 8) throw DataError("unexpected tensor count in weights file");

    ModelParams expect = ModelParams::init(h, w, c, 0);  // shapes only
    std::vector<std::vector<int>> shapes;
    expect.t.for_each([&](const char* name, const Tensor& t) {
        if (at >= in.size()) throw DataError("weights file truncated");
        const std::size_t len = in[at++];
        if (at + len > in.size()) throw DataError("weights file truncated");
        const std::string got(reinterpret_cast<const char*>(in.data() + at), len);
        at += len;
        if (got != name) {
            throw DataError("weights manifest names " + got + ", expected " + name);
        }
        const std::uint32_t ndims = get_u32(in, at);
        std::vector<int> dims(ndims);
        for (auto& d : dims) d = static_cast<int>(get_u32(in, at));
        if (dims != t.shape) {
            throw DataError(std::string("weights tensor ") + name +
                            " shape does not match the declared input size");
        }
        shapes.push_back(dims);
    });
    expect.t.for_each([&](const char*, Tensor& t) {
        for (auto& x : t.v) {
            const std::uint32_t bits = get_u32(in, at);
            x = static_cast<double>(std::bit_cast<float>(bits));
        }
    });
    if (at != in.size()) {
        throw DataError("trailing bytes in weights file: " + path);
    }
    return expect;
}

void save_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open trace file for writing: " + path);
    f << "epoch,lr,train_loss,val_loss,train_acc,val_acc\n";
    char buf[512];
    for (const auto& e : trace.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.lr,
                      e.train_loss, e.val_loss, e.train_acc, e.val_acc);
        f << buf;
    }
    if (!f) throw IoError("trace write failed: " + path);
}

}  // namespace rumi::nn
