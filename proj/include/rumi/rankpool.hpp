#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rumi/errors.hpp"
#include "rumi/image.hpp"

namespace rumi::rankpool {

// Per-frame feature vectors psi(I_1..T) plus their running temporal means
// V_t = (1/t) * sum_{tau<=t} psi(I_tau). The ranking machinery scores the
// smoothed vectors.
struct FeatureSeq {
    int T = 0;
    std::size_t dim = 0;
    // Geometry of the source frames, carried through to the dynamic image.
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> smoothed;
};

enum class FeatureMap { Identity };

// Flattens each frame into a feature vector and computes the running means.
// With smooth = false the smoothed slots simply alias the raw features
// (ablation mode).
FeatureSeq build_feature_seq(const std::vector<img::Frame>& clip,
                             FeatureMap map = FeatureMap::Identity, bool smooth = true);

// Builds a sequence directly from vectors; width/height default to (dim, 1).
FeatureSeq feature_seq_from_vectors(std::vector<std::vector<double>> features,
                                    bool smooth = true);

struct RankPoolConfig {
    double lambda = 1e-3;    // regularization weight, must be > 0
    int max_iters = 200;
    double step_size = 1.0;  // step at iteration k is step_size / sqrt(k)
    double tol = 0.0;        // stop when one sweep improves best energy by < tol
    std::uint64_t seed = 0;  // reserved; the solver itself is deterministic
};

// Pooled summary of one clip: the ranking parameter vector plus its
// display form (min-max rescaled to [0,1]) and solver provenance.
struct DynamicImage {
    std::vector<double> d;
    std::vector<double> display;
    int width = 0;
    int height = 0;
    int channels = 1;
    double norm_min = 0.0;
    double norm_max = 0.0;
    int iterations = 0;
    double energy = 0.0;
    double lambda = 0.0;
    int T = 0;
    std::string solver;

    img::Frame to_frame() const;
};

// Inner product <d, v>; the score the ranking functional assigns.
double ranking_score(const std::vector<double>& d, const std::vector<double>& v);

// Regularized pairwise hinge objective:
//   E(d) = lambda/2 ||d||^2 + (1/npairs) * sum_{q>t} max{0, 1 - S(q|d) + S(t|d)}
// with npairs = T(T-1)/2. Requires T >= 2.
double hinge_energy(const std::vector<double>& d, const FeatureSeq& seq, double lambda);

// Subgradient of the energy; pairs sitting exactly on the hinge kink
// contribute zero.
std::vector<double> energy_subgradient(const std::vector<double>& d, const FeatureSeq& seq,
                                       double lambda);

// Minimizes the energy by deterministic subgradient descent from d = 0 with
// normalized directions and step_size/sqrt(k) step lengths, returning the
// best-energy iterate. The result never has energy above E(0) = 1.
DynamicImage solve_rank_pool(const FeatureSeq& seq, const RankPoolConfig& cfg);

// One-step approximation: d proportional to sum_t (2t - T - 1) V_t,
// unit-normalized. A constant clip yields the zero vector, which displays
// as mid-gray. report_lambda only affects the recorded energy.
DynamicImage approx_rank_pool(const FeatureSeq& seq, double report_lambda = 0.0);

// Min-max rescales d to [0,1] for display; a constant vector maps to 0.5.
DynamicImage to_dynamic_image(const std::vector<double>& d, int width, int height, int channels);

}  // namespace rumi::rankpool
