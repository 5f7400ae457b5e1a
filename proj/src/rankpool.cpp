#include "rumi/rankpool.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "rumi/kernels.hpp"

namespace rumi::rankpool {

namespace {

void check_pairable(const FeatureSeq& seq) {
    if (seq.T < 2) {
        throw DegenerateClipError("clip has T = " + std::to_string(seq.T) +
                                  " frames; ranking needs at least 2");
    }
}

void check_dim(const FeatureSeq& seq, const std::vector<double>& d) {
    if (d.size() != seq.dim) {
        throw ShapeError("parameter vector has length " + std::to_string(d.size()) +
                         ", features have dim " + std::to_string(seq.dim));
    }
}

std::vector<double> scores_of(const std::vector<double>& d, const FeatureSeq& seq) {
    std::vector<double> s(static_cast<std::size_t>(seq.T));
    for (int t = 0; t < seq.T; ++t) {
        s[static_cast<std::size_t>(t)] = kern::dot(d.data(), seq.smoothed[static_cast<std::size_t>(t)].data(), seq.dim);
    }
    return s;
}

// Single pass over all q > t pairs. Returns the hinge sum and, when coeffs
// is non-null, accumulates the integer multiplicity of each V_t in the
// active-pair subgradient: an active pair (t, q) contributes +1 to t and
// -1 to q. Kink pairs (argument exactly 0) contribute nothing.
double pair_scan(const std::vector<double>& scores, std::vector<int>* coeffs) {
    const int T = static_cast<int>(scores.size());
    double hinge_sum = 0.0;
    for (int t = 0; t < T; ++t) {
        for (int q = t + 1; q < T; ++q) {
            const double arg = 1.0 - scores[static_cast<std::size_t>(q)] + scores[static_cast<std::size_t>(t)];
            if (arg > 0.0) {
                hinge_sum += arg;
                if (coeffs) {
                    (*coeffs)[static_cast<std::size_t>(t)] += 1;
                    (*coeffs)[static_cast<std::size_t>(q)] -= 1;
                }
            }
        }
    }
    return hinge_sum;
}

void finalize_display(DynamicImage& im) {
    DynamicImage display = to_dynamic_image(im.d, im.width, im.height, im.channels);
    im.display = std::move(display.display);
    im.norm_min = display.norm_min;
    im.norm_max = display.norm_max;
}

}  // namespace

img::Frame DynamicImage::to_frame() const {
    img::Frame f(width, height, channels);
    f.pixels = display;
    return f;
}

FeatureSeq build_feature_seq(const std::vector<img::Frame>& clip, FeatureMap map, bool smooth) {
    (void)map;  // Identity is the only feature map.
    if (clip.empty()) {
        throw DegenerateClipError("empty clip");
    }
    for (std::size_t t = 1; t < clip.size(); ++t) {
        if (!clip[t].same_shape(clip[0])) {
            throw ShapeError("frame " + std::to_string(t) + " is " +
                             std::to_string(clip[t].width) + "x" + std::to_string(clip[t].height) +
                             "x" + std::to_string(clip[t].channels) + ", expected " +
                             std::to_string(clip[0].width) + "x" + std::to_string(clip[0].height) +
                             "x" + std::to_string(clip[0].channels));
        }
    }
    std::vector<std::vector<double>> features;
    features.reserve(clip.size());
    for (const auto& frame : clip) features.push_back(frame.pixels);

    FeatureSeq seq = feature_seq_from_vectors(std::move(features), smooth);
    seq.width = clip[0].width;
    seq.height = clip[0].height;
    seq.channels = clip[0].channels;
    return seq;
}

FeatureSeq feature_seq_from_vectors(std::vector<std::vector<double>> features, bool smooth) {
    if (features.empty()) {
        throw DegenerateClipError("empty feature sequence");
    }
    const std::size_t dim = features[0].size();
    for (std::size_t t = 1; t < features.size(); ++t) {
        if (features[t].size() != dim) {
            throw ShapeError("feature vector " + std::to_string(t) + " has length " +
                             std::to_string(features[t].size()) + ", expected " +
                             std::to_string(dim));
        }
    }
    FeatureSeq seq;
    seq.T = static_cast<int>(features.size());
    seq.dim = dim;
    seq.width = static_cast<int>(dim);
    seq.height = 1;
    seq.channels = 1;
    seq.features = std::move(features);
    if (smooth) {
        seq.smoothed.assign(seq.features.size(), std::vector<double>(dim, 0.0));
        std::vector<double> prefix(dim, 0.0);
        for (std::size_t t = 0; t < seq.features.size(); ++t) {
            kern::axpy(prefix.data(), 1.0, seq.features[t].data(), dim);
            const double inv = 1.0 / static_cast<double>(t + 1);
            for (std::size_t i = 0; i < dim; ++i) {
                seq.smoothed[t][i] = prefix[i] * inv;
            }
        }
    } else {
        seq.smoothed = seq.features;
    }
    return seq;
}

double ranking_score(const std::vector<double>& d, const std::vector<double>& v) {
    if (d.size() != v.size()) {
        throw ShapeError("ranking_score: lengths differ (" + std::to_string(d.size()) + " vs " +
                         std::to_string(v.size()) + ")");
    }
    return kern::dot(d.data(), v.data(), d.size());
}

double hinge_energy(const std::vector<double>& d, const FeatureSeq& seq, double lambda) {
    check_pairable(seq);
    check_dim(seq, d);
    const auto scores = scores_of(d, seq);
    const double hinge_sum = pair_scan(scores, nullptr);
    const double npairs = static_cast<double>(seq.T) * (seq.T - 1) / 2.0;
    return 0.5 * lambda * kern::dot(d.data(), d.data(), d.size()) + hinge_sum / npairs;
}

std::vector<double> energy_subgradient(const std::vector<double>& d, const FeatureSeq& seq,
                                       double lambda) {
    check_pairable(seq);
    check_dim(seq, d);
    const auto scores = scores_of(d, seq);
    std::vector<int> coeffs(static_cast<std::size_t>(seq.T), 0);
    pair_scan(scores, &coeffs);

    std::vector<double> g(seq.dim, 0.0);
    kern::axpy(g.data(), lambda, d.data(), seq.dim);
    const double inv_npairs = 2.0 / (static_cast<double>(seq.T) * (seq.T - 1));
    for (int t = 0; t < seq.T; ++t) {
        const int c = coeffs[static_cast<std::size_t>(t)];
        if (c != 0) {
            kern::axpy(g.data(), c * inv_npairs, seq.smoothed[static_cast<std::size_t>(t)].data(), seq.dim);
        }
    }
    return g;
}

DynamicImage solve_rank_pool(const FeatureSeq& seq, const RankPoolConfig& cfg) {
    check_pairable(seq);
    if (!(cfg.lambda > 0.0)) {
        throw ParamError("lambda must be positive");
    }
    if (cfg.max_iters < 1) {
        throw ParamError("max_iters must be at least 1");
    }

    const std::size_t dim = seq.dim;
    const double npairs = static_cast<double>(seq.T) * (seq.T - 1) / 2.0;
    const double inv_npairs = 2.0 / (static_cast<double>(seq.T) * (seq.T - 1));

    std::vector<double> d(dim, 0.0);
    std::vector<double> best_d = d;
    double best_energy = 1.0;  // E(0): every hinge term is exactly 1
    double prev_best = best_energy;
    int iterations = 0;
    std::vector<double> g(dim);
    std::vector<int> coeffs(static_cast<std::size_t>(seq.T));

    for (int k = 1; k <= cfg.max_iters; ++k) {
        // Evaluate energy and subgradient at the current iterate in one pass.
        const auto scores = scores_of(d, seq);
        std::fill(coeffs.begin(), coeffs.end(), 0);
        const double hinge_sum = pair_scan(scores, &coeffs);
        const double energy =
            0.5 * cfg.lambda * kern::dot(d.data(), d.data(), dim) + hinge_sum / npairs;
        if (!std::isfinite(energy)) {
            throw NumericError("rank pool energy became non-finite at iteration " +
                               std::to_string(k));
        }
        if (energy < best_energy) {
            best_energy = energy;
            best_d = d;
        }

        std::fill(g.begin(), g.end(), 0.0);
        kern::axpy(g.data(), cfg.lambda, d.data(), dim);
        for (int t = 0; t < seq.T; ++t) {
            const int c = coeffs[static_cast<std::size_t>(t)];
            if (c != 0) {
                kern::axpy(g.data(), c * inv_npairs, seq.smoothed[static_cast<std::size_t>(t)].data(), dim);
            }
        }
        const double gnorm = kern::nrm2(g.data(), dim);
        if (gnorm == 0.0) {
            iterations = k;
            break;  // flat point; nothing more to do
        }
        // Normalized direction keeps the step length meaningful across
        // feature scales.
        const double step = cfg.step_size / std::sqrt(static_cast<double>(k));
        kern::axpy(d.data(), -step / gnorm, g.data(), dim);
        iterations = k;

        if (cfg.tol > 0.0 && prev_best - best_energy < cfg.tol) {
            break;
        }
        prev_best = best_energy;
    }

    // The final iterate was stepped to but not yet scored.
    const double final_energy = hinge_energy(d, seq, cfg.lambda);
    if (final_energy < best_energy) {
        best_energy = final_energy;
        best_d = std::move(d);
    }

    DynamicImage im;
    im.d = std::move(best_d);
    im.width = seq.width;
    im.height = seq.height;
    im.channels = seq.channels;
    im.iterations = iterations;
    im.energy = best_energy;
    im.lambda = cfg.lambda;
    im.T = seq.T;
    im.solver = "exact";
    finalize_display(im);
    return im;
}

DynamicImage approx_rank_pool(const FeatureSeq& seq, double report_lambda) {
    check_pairable(seq);
    std::vector<double> d(seq.dim, 0.0);
    for (int t = 1; t <= seq.T; ++t) {
        const double coeff = static_cast<double>(2 * t - seq.T - 1);
        if (coeff != 0.0) {
            kern::axpy(d.data(), coeff, seq.smoothed[static_cast<std::size_t>(t - 1)].data(), seq.dim);
        }
    }
    const double norm = kern::nrm2(d.data(), seq.dim);
    if (norm > 0.0) {
        kern::scale(d.data(), 1.0 / norm, seq.dim);
    }
    DynamicImage im;
    im.d = std::move(d);
    im.width = seq.width;
    im.height = seq.height;
    im.channels = seq.channels;
    im.iterations = 1;
    im.energy = hinge_energy(im.d, seq, report_lambda);
    im.lambda = report_lambda;
    im.T = seq.T;
    im.solver = "approx";
    finalize_display(im);
    return im;
}

DynamicImage to_dynamic_image(const std::vector<double>& d, int width, int height, int channels) {
    if (d.empty() || d.size() != static_cast<std::size_t>(width) * height * channels) {
        throw ShapeError("vector of length " + std::to_string(d.size()) +
                         " does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
    }
    DynamicImage im;
    im.d = d;
    im.width = width;
    im.height = height;
    im.channels = channels;
    const auto [mn, mx] = kern::minmax(d.data(), d.size());
    im.norm_min = mn;
    im.norm_max = mx;
    im.display.assign(d.size(), 0.5);
    if (mx > mn) {
        const double mul = 1.0 / (mx - mn);
        kern::affine_clamp01(im.display.data(), d.data(), mul, -mn * mul, d.size());
    }
    return im;
}

}  // namespace rumi::rankpool
