#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rumi/errors.hpp"
#include "rumi/image.hpp"

namespace rumi::data {

enum class Label { Ruminating, Other };

const char* to_string(Label l);
Label label_from_string(const std::string& s);

enum class Split { Train, Test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

// One windowed clip of a frame source.
struct LabeledClip {
    std::string source_id;
    int start = 0;  // first frame index within the source, 0-based
    int T = 0;
    Label label = Label::Other;
    Split split = Split::Train;
    std::optional<img::CropRect> crop;
    int aug = 0;  // 0 = original; >0 selects a deterministic augmented variant
};

struct Manifest {
    std::vector<LabeledClip> entries;
    int T = 0;
    int multiplier = 1;  // entries per base clip after augmentation
};

// Start indices of complete windows: 0, stride, 2*stride, ... while
// start + T <= frame_count. A trailing partial window is discarded.
std::vector<int> window(int frame_count, int T, int stride);

// Assigns train/test splits: deterministic shuffle by seed, stratified by
// label, total test count = round(test_fraction * N). Every class keeps at
// least one clip on each side. A class with fewer than 2 clips cannot be
// stratified.
Manifest split_manifest(const Manifest& m, double test_fraction, std::uint64_t seed);

// Shuffles [0, n) by seed and deals k folds whose sizes differ by at most
// one (the first n % k folds get the extra element).
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed);

enum class SynthKind { Periodic, Drift, Static };

const char* to_string(SynthKind k);
SynthKind synth_kind_from_string(const std::string& s);

struct SynthParams {
    int T = 25;
    int width = 64;
    int height = 64;
    int channels = 3;
    double noise = 0.01;  // uniform pixel noise amplitude; 0 disables
};

struct SynthClip {
    std::vector<img::Frame> frames;
    Label label = Label::Other;
    SynthKind kind = SynthKind::Static;
    // 1 where the moving patch ever covered the pixel (noise-free footprint).
    std::vector<std::uint8_t> path_mask;  // width * height
};

// Renders a deterministic synthetic clip. `periodic` oscillates a patch
// sinusoidally with an integer period of 5-8 frames (about 1-2 s at the
// 4 fps frame rate the generator assumes) and is labeled Ruminating;
// `drift` translates the patch monotonically and `static` keeps fixed
// content plus noise, both labeled Other.
SynthClip synth_clip(SynthKind kind, const SynthParams& p, std::uint64_t seed);

// Expands each entry into `multiplier` variants (aug = 0..multiplier-1),
// inheriting label, split and crop. multiplier = 1 returns the input.
Manifest expand_augmented(const Manifest& m, int multiplier);

// Line-delimited JSON, one clip per line with keys source_id, start, T,
// label, split and optional crop = [x, y, w, h].
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// Frame file name within a source directory: frame index i (0-based) is
// stored as the 1-based zero-padded "000001.png".
std::string frame_file_name(int index);

}  // namespace rumi::data
